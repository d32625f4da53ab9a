import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


@pytest.fixture(scope="session")
def scenario_paths() -> dict[str, pathlib.Path]:
    return {name: SCENARIOS / f"{name}.json" for name in ("scenario1", "scenario2", "scenario3")}

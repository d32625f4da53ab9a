import numpy as np
import pytest

from kinoplan.geometry import ObstacleState, Vec2
from kinoplan.homotopy import HomotopySignature, signatures_equivalent
from kinoplan.planner import (
    CandidateInfo,
    PlanFailure,
    Scenario,
    plan_once,
    sample_trajectory,
    select_best,
    simulate_run,
    trajectory_is_free,
)
from kinoplan.tracking import predict_position

TABLE1 = Scenario(
    start=Vec2(-4, 0),
    goal=Vec2(4, 0),
    obstacles=(
        ObstacleState(Vec2(-2, 0)),
        ObstacleState(Vec2(2, 0)),
        ObstacleState(Vec2(0, 0)),
    ),
    max_classes=5,
)


def info(cost, feasible=True, preserved=True, states=10, sig=()):
    return CandidateInfo(sig, cost, preserved, feasible, states)


class TestSelectBest:
    def test_argmin(self):
        assert select_best([info(5), info(2), info(9)]) == 1

    def test_tie_broken_by_fewer_states(self):
        assert select_best([info(2, states=40), info(2, states=30)]) == 1

    def test_feasibility_dominates_cost(self):
        assert select_best([info(1, feasible=False), info(10)]) == 1

    def test_signature_flip_excluded(self):
        assert select_best([info(1, preserved=False), info(10)]) == 1

    def test_none_eligible_raises(self):
        with pytest.raises(PlanFailure) as exc:
            select_best([info(1, feasible=False)])
        assert exc.value.reason == "all_infeasible"


class TestScenario:
    def test_start_goal_must_differ(self):
        with pytest.raises(ValueError):
            Scenario(start=Vec2(0, 0), goal=Vec2(0, 0))

    def test_rates_positive(self):
        with pytest.raises(ValueError):
            Scenario(start=Vec2(0, 0), goal=Vec2(1, 0), replan_rate=0.0)


class TestPlanOnce:
    def test_empty_world_single_straight_candidate(self):
        scenario = Scenario(start=Vec2(-4, 0), goal=Vec2(4, 0))
        result = plan_once(scenario, ())
        assert len(result.candidates) == 1
        assert result.chosen.start == scenario.start
        assert result.chosen.goal == scenario.goal
        assert result.eta == result.chosen.total_time
        assert result.state_count == len(result.chosen.states)

    def test_table1_five_candidates_collision_free(self):
        result = plan_once(TABLE1, TABLE1.obstacles)
        assert len(result.candidates) == 5
        # dense sampling oracle: clearance never dips below the safety radius
        traj = result.chosen
        for t in np.arange(0.0, traj.total_time, 0.001):
            pos = sample_trajectory(traj, float(t))
            for obs in TABLE1.obstacles:
                c = predict_position(obs, float(t))
                assert pos.distance_to(c) >= obs.safety_radius

    def test_chosen_is_min_cost_feasible(self):
        result = plan_once(TABLE1, TABLE1.obstacles)
        chosen = result.candidates[result.chosen_index]
        for c in result.candidates:
            if c.feasible and c.signature_preserved:
                assert chosen.final_cost <= c.final_cost

    def test_candidates_pairwise_distinct(self):
        result = plan_once(TABLE1, TABLE1.obstacles)
        sigs = [HomotopySignature(c.signature) for c in result.candidates]
        for i in range(len(sigs)):
            for j in range(i + 1, len(sigs)):
                assert not signatures_equivalent(sigs[i], sigs[j])

    def test_k1_still_feasible(self):
        scenario = Scenario(
            start=TABLE1.start, goal=TABLE1.goal, obstacles=TABLE1.obstacles, max_classes=1
        )
        result = plan_once(scenario, scenario.obstacles)
        assert len(result.candidates) == 1
        assert result.candidates[result.chosen_index].feasible
        assert trajectory_is_free(result.chosen, scenario.obstacles, scenario.margin)

    def test_goal_inside_obstacle_fails(self):
        scenario = Scenario(
            start=Vec2(-4, 0), goal=Vec2(4, 0), obstacles=(ObstacleState(Vec2(4, 0)),)
        )
        with pytest.raises(PlanFailure) as exc:
            plan_once(scenario, scenario.obstacles)
        assert exc.value.reason == "no_path"

    def test_threads_match_single_thread_result(self):
        seq = plan_once(TABLE1, TABLE1.obstacles, threads=1)
        par = plan_once(TABLE1, TABLE1.obstacles, threads=4)
        assert [c.final_cost for c in seq.candidates] == [c.final_cost for c in par.candidates]
        assert seq.chosen_index == par.chosen_index
        assert seq.chosen == par.chosen

    def test_plan_time_recorded(self):
        result = plan_once(TABLE1, TABLE1.obstacles)
        assert result.plan_time_ms > 0.0


class TestSampleTrajectory:
    def test_interpolates_and_clamps(self):
        result = plan_once(Scenario(start=Vec2(0, 0), goal=Vec2(1, 0)), ())
        traj = result.chosen
        assert sample_trajectory(traj, -1.0) == traj.start
        assert sample_trajectory(traj, traj.total_time + 5.0) == traj.goal
        mid = sample_trajectory(traj, traj.total_time / 2)
        assert 0.0 < mid.x < 1.0


class TestSimulateRun:
    def test_quick_static_run(self):
        scenario = Scenario(
            start=Vec2(-1.5, 0),
            goal=Vec2(1.5, 0),
            obstacles=(ObstacleState(Vec2(0, 0)),),
        )
        trace = simulate_run(scenario, seed=0)
        assert trace.status == "reached"
        assert trace.min_clearance >= 0.0
        assert trace.plan_failures == 0
        times = [t.time for t in trace.ticks]
        assert times == sorted(times)
        assert len(set(times)) == len(times)

    def test_vehicle_speed_bounded(self):
        scenario = Scenario(start=Vec2(-1.5, 0), goal=Vec2(1.5, 0))
        trace = simulate_run(scenario, seed=0)
        tick = 1.0 / scenario.replan_rate
        for a, b in zip(trace.ticks[:-1], trace.ticks[1:]):
            moved = a.vehicle.distance_to(b.vehicle)
            assert moved <= scenario.limits.v_max * tick + 0.01

    def test_latency_recorded_every_tick(self):
        scenario = Scenario(start=Vec2(-1.5, 0), goal=Vec2(1.5, 0))
        trace = simulate_run(scenario, seed=0)
        assert all(t.replan_ms > 0.0 for t in trace.ticks)
        assert trace.plan_time_mean_ms > 0.0
        assert trace.plan_time_p95_ms >= trace.plan_time_mean_ms * 0.5

    def test_planner_consumes_estimates_not_truth(self):
        scenario = Scenario(
            start=Vec2(-1.5, 0),
            goal=Vec2(1.5, 0),
            obstacles=(ObstacleState(Vec2(0, 0.8)),),
            detection_noise_std=0.02,
        )
        trace = simulate_run(scenario, seed=3)
        est_positions = [
            t.obstacles_est[0].position for t in trace.ticks if t.obstacles_est[0] is not None
        ]
        true_positions = [t.obstacles_true[0].position for t in trace.ticks]
        assert any(e != t for e, t in zip(est_positions, true_positions))
        # estimates still live near the truth
        assert all(e.distance_to(t) < 0.1 for e, t in zip(est_positions, true_positions))

    def test_unreachable_goal_times_out(self):
        scenario = Scenario(
            start=Vec2(-1.5, 0),
            goal=Vec2(1.5, 0),
            obstacles=(ObstacleState(Vec2(1.5, 0)),),  # goal blocked forever
            sim_duration_max=2.0,
        )
        trace = simulate_run(scenario, seed=0)
        assert trace.status == "timeout"
        assert trace.plan_failures >= 1

import math

import numpy as np
import pytest

from kinoplan.geometry import (
    KinodynamicLimits,
    MotionModel,
    ObstacleState,
    Trajectory,
    Vec2,
    arc_length,
)
from kinoplan.homotopy import HomotopySignature, SeedPath, enumerate_seed_paths, winding_signature
from kinoplan.optimizer import (
    CLEARANCE_BUFFER,
    CostWeights,
    DensityParams,
    adapt_density,
    cost_gradient,
    dynamic_weights,
    optimize_candidate,
    total_cost,
    trajectory_density,
)

LIMITS = KinodynamicLimits(0.5, 0.5)
WEIGHTS = CostWeights(1.0, 10.0, 0.5, 5.0, 5.0)


def make_traj(points, dts):
    return Trajectory.from_waypoints([Vec2(*p) for p in points], list(dts))


def reference_cost(traj, obstacles, w, limits, clearance):
    """Straight-line re-implementation of the objective with plain floats."""
    pts = [(s.position.x, s.position.y) for s in traj.states]
    dts = [s.dt for s in traj.states[:-1]]
    n = len(pts)
    cost = w.w_time * sum(dts)

    times = [0.0]
    for dt in dts:
        times.append(times[-1] + dt)
    for i, (x, y) in enumerate(pts):
        t = times[i]
        for obs in obstacles:
            cx = obs.position.x + obs.velocity.x * t + 0.5 * obs.acceleration.x * t * t
            cy = obs.position.y + obs.velocity.y * t + 0.5 * obs.acceleration.y * t * t
            h = max(0.0, obs.safety_radius + clearance - math.hypot(x - cx, y - cy))
            cost += w.w_obstacle * h * h

    for i in range(1, n - 1):
        ax = math.dist(pts[i], pts[i - 1])
        bx = math.dist(pts[i + 1], pts[i])
        cx = math.dist(pts[i + 1], pts[i - 1])
        if min(ax, bx, cx) < 1e-9:
            continue
        cross = (pts[i][0] - pts[i - 1][0]) * (pts[i + 1][1] - pts[i][1]) - (
            pts[i][1] - pts[i - 1][1]
        ) * (pts[i + 1][0] - pts[i][0])
        kappa = 2.0 * cross / (ax * bx * cx)
        cost += w.w_smooth * kappa * kappa * 0.5 * (ax + bx)

    vels = []
    for i in range(n - 1):
        ex = (pts[i + 1][0] - pts[i][0]) / dts[i]
        ey = (pts[i + 1][1] - pts[i][1]) / dts[i]
        vels.append((ex, ey))
        h = max(0.0, math.hypot(ex, ey) - limits.v_max)
        cost += w.w_vel * h * h

    for i in range(n - 2):
        tau = 0.5 * (dts[i] + dts[i + 1])
        amag = math.hypot(vels[i + 1][0] - vels[i][0], vels[i + 1][1] - vels[i][1]) / tau
        h = max(0.0, amag - limits.a_max)
        cost += w.w_acc * h * h
    return cost


def random_problem(rng, n=15):
    pts = np.cumsum(rng.normal(0, 0.3, (n, 2)), axis=0)
    dts = rng.uniform(0.05, 0.6, n - 1)
    traj = make_traj(pts.tolist(), dts.tolist())
    obstacles = [
        ObstacleState(
            Vec2(*rng.uniform(-1.5, 1.5, 2)),
            Vec2(*rng.uniform(-0.2, 0.2, 2)),
            model=MotionModel.CONST_VELOCITY,
        )
        for _ in range(3)
    ]
    return traj, obstacles


class TestTotalCost:
    def test_straight_unhindered_is_pure_time(self):
        # two states, speed v_max/2: every penalty term is exactly zero
        traj = make_traj([(-4, 0), (4, 0)], [32.0])
        assert total_cost(traj, [], WEIGHTS, LIMITS) == WEIGHTS.w_time * 32.0

    def test_state_at_obstacle_center_hits_max_hinge(self):
        obs = [ObstacleState(Vec2(0, 0), safety_radius=0.5)]
        traj = make_traj([(-1, 0), (0, 0), (1, 0)], [4.0, 4.0])
        got = total_cost(traj, obs, WEIGHTS, LIMITS, clearance=0.05)
        expected_obstacle = WEIGHTS.w_obstacle * (0.5 + 0.05) ** 2
        assert got - WEIGHTS.w_time * 8.0 == pytest.approx(expected_obstacle, rel=1e-12)

    def test_matches_independent_reimplementation(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            traj, obstacles = random_problem(rng, n=10)
            got = total_cost(traj, obstacles, WEIGHTS, LIMITS, clearance=0.05)
            want = reference_cost(traj, obstacles, WEIGHTS, LIMITS, 0.05)
            assert got == pytest.approx(want, rel=1e-9)


class TestCostGradient:
    def test_straight_constant_speed_time_only(self):
        traj = make_traj([(0, 0), (1, 0), (2, 0), (3, 0)], [4.0, 4.0, 4.0])
        grad_p, grad_dt = cost_gradient(traj, [], WEIGHTS, LIMITS)
        assert np.allclose(grad_p, 0.0)
        assert np.allclose(grad_dt, WEIGHTS.w_time)

    def test_fixed_endpoints_report_zero(self):
        rng = np.random.default_rng(3)
        traj, obstacles = random_problem(rng)
        grad_p, _ = cost_gradient(traj, obstacles, WEIGHTS, LIMITS)
        assert grad_p[0].tolist() == [0.0, 0.0]
        assert grad_p[-1].tolist() == [0.0, 0.0]

    def test_matches_central_differences(self):
        rng = np.random.default_rng(42)
        eps = 1e-6
        worst = 0.0
        for _ in range(20):
            traj, obstacles = random_problem(rng)
            pts = traj.positions()
            dts = traj.durations()
            grad_p, grad_dt = cost_gradient(traj, obstacles, WEIGHTS, LIMITS)

            def cost_of(p, d):
                return reference_cost(
                    make_traj(p.tolist(), d.tolist()), obstacles, WEIGHTS, LIMITS, CLEARANCE_BUFFER
                )

            fd_p = np.zeros_like(pts)
            for i in range(1, len(pts) - 1):
                for k in range(2):
                    hi = pts.copy()
                    lo = pts.copy()
                    hi[i, k] += eps
                    lo[i, k] -= eps
                    fd_p[i, k] = (cost_of(hi, dts) - cost_of(lo, dts)) / (2 * eps)
            fd_dt = np.zeros_like(dts)
            for k in range(len(dts)):
                hi = dts.copy()
                lo = dts.copy()
                hi[k] += eps
                lo[k] -= eps
                fd_dt[k] = (cost_of(pts, hi) - cost_of(pts, lo)) / (2 * eps)

            scale = max(np.abs(fd_p).max(), np.abs(fd_dt).max(), 1e-8)
            worst = max(
                worst,
                np.abs(grad_p[1:-1] - fd_p[1:-1]).max() / scale,
                np.abs(grad_dt - fd_dt).max() / scale,
            )
        assert worst < 1e-4


class TestDynamicWeights:
    def test_round_zero_is_identity(self):
        assert dynamic_weights(WEIGHTS, 0) == WEIGHTS

    def test_growth(self):
        assert dynamic_weights(WEIGHTS, 2).w_obstacle == WEIGHTS.w_obstacle * 4.0

    def test_cap(self):
        capped = dynamic_weights(WEIGHTS, 50)
        assert capped.w_obstacle == WEIGHTS.w_obstacle * 16.0

    def test_other_weights_untouched(self):
        out = dynamic_weights(WEIGHTS, 3)
        assert (out.w_time, out.w_smooth, out.w_vel, out.w_acc) == (
            WEIGHTS.w_time,
            WEIGHTS.w_smooth,
            WEIGHTS.w_vel,
            WEIGHTS.w_acc,
        )


class TestDensityParams:
    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            DensityParams(d_min=0.2, d_max=0.3, d_max_bend=0.1)


class TestAdaptDensity:
    def test_fixed_point(self):
        traj = make_traj([(0, 0), (0.2, 0), (0.4, 0)], [1.0, 1.0])
        out = adapt_density(traj, DensityParams())
        assert [s.position for s in out.states] == [s.position for s in traj.states]

    def test_long_segment_subdivided(self):
        params = DensityParams(d_min=0.05, d_max=0.4, d_max_bend=0.2)
        traj = make_traj([(0, 0), (1, 0)], [4.0])
        out = adapt_density(traj, params)
        pts = out.positions()
        spacings = np.hypot(*np.diff(pts, axis=0).T)
        assert len(out.states) >= len(traj.states) + 2
        assert spacings.max() <= 0.4 + 1e-12
        assert out.total_time == pytest.approx(4.0)  # splits preserve timing

    def test_bend_gets_tighter_spacing_than_straights(self):
        # right-angle corner: curvature spike at the bend
        pts = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)]
        traj = make_traj(pts, [2.0] * 4)
        params = DensityParams()
        out = adapt_density(traj, params)
        p = out.positions()
        from kinoplan.optimizer import state_curvatures

        kappa = state_curvatures(p)
        seg = np.diff(p, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        bend_seg = (kappa[:-1] > params.kappa_thresh) | (kappa[1:] > params.kappa_thresh)
        assert bend_seg.any()
        assert lengths[bend_seg].max() <= params.d_max_bend + 1e-12
        assert lengths.max() <= params.d_max + 1e-12

    def test_dense_straight_run_is_pruned(self):
        xs = np.linspace(0, 0.2, 11)  # 0.02 m spacing, all < d_min
        traj = make_traj([(x, 0) for x in xs], [0.1] * 10)
        out = adapt_density(traj, DensityParams())
        assert len(out.states) < len(traj.states)
        assert out.total_time == pytest.approx(1.0)
        assert out.start == traj.start and out.goal == traj.goal

    def test_endpoints_never_touched(self):
        traj = make_traj([(0, 0), (1.7, 0.3)], [5.0])
        out = adapt_density(traj, DensityParams())
        assert out.start == traj.start
        assert out.goal == traj.goal


class TestTrajectoryDensity:
    def test_aggregate_is_states_per_meter(self):
        n = 81
        xs = np.linspace(0, 8.5, n)
        traj = make_traj([(x, 0) for x in xs], [0.25] * (n - 1))
        report = trajectory_density(traj)
        assert report.states_per_meter == pytest.approx(81 / 8.5, rel=1e-12)

    def test_straight_has_no_bend_region(self):
        traj = make_traj([(0, 0), (1, 0), (2, 0)], [1, 1])
        report = trajectory_density(traj)
        assert report.bend_mean is None
        assert report.straight_mean is not None

    def test_zero_length_rejected(self):
        traj = make_traj([(0, 0), (0, 0)], [1.0])
        with pytest.raises(ValueError):
            trajectory_density(traj)


def straight_seed(start, goal, obstacles=()):
    sig = winding_signature([start, goal], obstacles) if obstacles else HomotopySignature(())
    return SeedPath((start, goal), sig, start.distance_to(goal))


class TestOptimizeCandidate:
    def test_no_obstacles_analytic_optimum(self):
        seed = straight_seed(Vec2(-4, 0), Vec2(4, 0))
        traj, report = optimize_candidate(seed, [])
        assert report.converged
        assert report.signature_preserved
        assert arc_length(traj) == pytest.approx(8.0, rel=0.01)
        assert traj.total_time == pytest.approx(8.0 / 0.5, rel=0.01)

    def test_endpoints_pinned(self):
        obstacles = [ObstacleState(Vec2(0, 0))]
        seeds = enumerate_seed_paths(Vec2(-2, 0), Vec2(2, 0), obstacles, 2, 0.0)
        traj, _ = optimize_candidate(seeds[0], obstacles)
        assert traj.start == Vec2(-2, 0)
        assert traj.goal == Vec2(2, 0)

    def test_table1_two_sides_stay_distinct(self):
        obstacles = (
            ObstacleState(Vec2(-2, 0)),
            ObstacleState(Vec2(2, 0)),
            ObstacleState(Vec2(0, 0)),
        )
        seeds = enumerate_seed_paths(Vec2(-4, 0), Vec2(4, 0), obstacles, 5, 0.0)
        above = next(s for s in seeds if s.waypoints[1].y > 0)
        below = next(s for s in seeds if s.waypoints[1].y < 0)
        ta, ra = optimize_candidate(above, obstacles)
        tb, rb = optimize_candidate(below, obstacles)
        assert ra.signature_preserved and rb.signature_preserved
        sig_a = winding_signature([s.position for s in ta.states], obstacles)
        sig_b = winding_signature([s.position for s in tb.states], obstacles)
        from kinoplan.homotopy import signatures_equivalent

        assert not signatures_equivalent(sig_a, sig_b)

    def test_signature_flip_is_flagged(self):
        # seed hops over a tiny obstacle; with the obstacle term disabled,
        # descent flattens the costly bump across it and flips the class
        obstacle = ObstacleState(Vec2(0, 0.1), safety_radius=0.02)
        waypoints = (Vec2(-0.5, 0), Vec2(0, 0.2), Vec2(0.5, 0))
        seed = SeedPath(
            waypoints, winding_signature(waypoints, [obstacle]), 2 * math.hypot(0.5, 0.2)
        )
        weights = CostWeights(1.0, 0.0, 0.5, 200.0, 200.0)
        traj, report = optimize_candidate(seed, [obstacle], weights)
        assert not report.signature_preserved

    def test_monotone_descent_all_accepted_steps(self):
        obstacles = (
            ObstacleState(Vec2(-2, 0)),
            ObstacleState(Vec2(2, 0)),
            ObstacleState(Vec2(0, 0)),
        )
        seeds = enumerate_seed_paths(Vec2(-4, 0), Vec2(4, 0), obstacles, 5, 0.0)
        steps: list[tuple[float, float]] = []
        for seed in seeds:
            optimize_candidate(seed, obstacles, on_accept=lambda a, b: steps.append((a, b)))
        assert steps
        assert all(after < before for before, after in steps)

    def test_bit_identical_reruns(self):
        obstacles = (ObstacleState(Vec2(0, 0)),)
        seeds = enumerate_seed_paths(Vec2(-4, 0), Vec2(4, 0), obstacles, 2, 0.0)
        t1, r1 = optimize_candidate(seeds[0], obstacles)
        t2, r2 = optimize_candidate(seeds[0], obstacles)
        assert r1 == r2
        assert t1 == t2

    def test_density_bounds_hold_after_optimization(self):
        params = DensityParams()
        obstacles = (ObstacleState(Vec2(0, 0)),)
        seeds = enumerate_seed_paths(Vec2(-2, 0), Vec2(2, 0), obstacles, 2, 0.0)
        traj, _ = optimize_candidate(seeds[0], obstacles, density=params)
        from kinoplan.optimizer import state_curvatures

        p = traj.positions()
        kappa = state_curvatures(p)
        seg = np.diff(p, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        bend_seg = (kappa[:-1] > params.kappa_thresh) | (kappa[1:] > params.kappa_thresh)
        assert lengths.max() <= params.d_max + 1e-9
        if bend_seg.any():
            assert lengths[bend_seg].max() <= params.d_max_bend + 1e-9
        for i in range(1, len(lengths)):
            if lengths[i] < params.d_min - 1e-9 and lengths[i - 1] < params.d_min - 1e-9:
                assert max(kappa[i - 1], kappa[i], kappa[i + 1]) >= params.kappa_thresh

import numpy as np
import pytest

from robust_mspca import (
    DegenerateInstance,
    FantopePoint,
    InvalidArgument,
    SecondMomentSet,
    SimplexWeights,
    StepSizes,
    certificate,
    default_step_sizes,
    duality_gap,
    fantope_mirror_update,
    simplex_mirror_update,
    solve,
    top_k_projector,
    waterfill_nu,
)

from conftest import wishart_instance


def dominated_pair():
    return SecondMomentSet.from_matrices([np.diag([3.0, 1.0]), np.diag([2.0, 1.0])])


def crossing_pair():
    return SecondMomentSet.from_matrices([np.diag([2.0, 1.0]), np.diag([1.0, 2.0])])


def minimax_angle_grid_oracle(m, n_angle=2001, n_weight=101):
    """Exhaustive d=2, k=1 oracle: max over projector angles of the min
    over a mixture-weight grid."""
    best_val, best_theta = -np.inf, None
    weights = np.linspace(0.0, 1.0, n_weight)
    for theta in np.linspace(0.0, np.pi, n_angle):
        v = np.array([np.cos(theta), np.sin(theta)])
        p = np.outer(v, v)
        evs = np.array([np.sum(s * p) for s in m.matrices])
        val = min(w * evs[0] + (1.0 - w) * evs[1] for w in weights)
        if val > best_val:
            best_val, best_theta = val, theta
    return best_val, best_theta


def waterfill_oracle(lam, k):
    """Independent route: enumerate the clip set on the sorted spectrum and
    solve the unclipped part in closed form."""
    lam = np.asarray(lam, dtype=float)
    d = lam.size
    order = np.argsort(-lam, kind="stable")
    s = lam[order]
    for clipped in range(k):
        tail = s[clipped:]
        shift = tail.max()
        log_mass = shift + np.log(np.exp(tail - shift).sum())
        nu = np.log(k - clipped) - log_mass
        ok_clipped = clipped == 0 or s[clipped - 1] + nu >= -1e-12
        ok_free = s[clipped] + nu <= 1e-12
        if ok_clipped and ok_free:
            xi_sorted = np.concatenate([np.ones(clipped), np.exp(tail + nu)])
            xi = np.empty(d)
            xi[order] = xi_sorted
            return nu, xi
    raise AssertionError("oracle found no consistent clip set")


class TestDefaultStepSizes:
    def test_frozen_example(self):
        m = SecondMomentSet.from_matrices([np.diag([2.0] + [0.0] * 3),
                                           np.diag([1.0] + [0.0] * 3)])
        steps = default_step_sizes(m, 1)
        eta = 0.125 * np.sqrt(np.log(2.0) / np.log(4.0))
        assert steps.eta == pytest.approx(0.0883883, abs=1e-7)
        assert steps.eta == pytest.approx(eta, rel=1e-14)
        assert steps.eta_M == pytest.approx(0.127518, abs=1e-6)
        assert steps.eta_M == pytest.approx(eta / np.log(2.0), rel=1e-14)
        # quoted value 0.0637583 carries a last-digit typo; the formula gives
        # eta / log 4 = 0.06375871...
        assert steps.eta_omega == pytest.approx(0.0637587, abs=1e-7)
        assert steps.eta_omega == pytest.approx(eta / np.log(4.0), rel=1e-14)

    def test_rho_inverse_proportionality(self):
        m1 = SecondMomentSet.from_matrices([np.diag([2.0, 0.0, 0.0, 0.0]),
                                            np.diag([1.0, 0.0, 0.0, 0.0])])
        m2 = SecondMomentSet.from_matrices([np.diag([4.0, 0.0, 0.0, 0.0]),
                                            np.diag([1.0, 0.0, 0.0, 0.0])])
        s1, s2 = default_step_sizes(m1, 1), default_step_sizes(m2, 1)
        assert s2.eta == pytest.approx(s1.eta / 2.0, rel=1e-12)
        assert s2.eta_M == pytest.approx(s1.eta_M / 2.0, rel=1e-12)
        assert s2.eta_omega == pytest.approx(s1.eta_omega / 2.0, rel=1e-12)

    def test_log_clamp_activates_near_full_rank(self):
        d, k = 21, 20
        m = SecondMomentSet.from_matrices([np.eye(d), 2.0 * np.eye(d)])
        steps = default_step_sizes(m, k)
        assert np.isfinite(steps.eta) and steps.eta > 0
        expected = 1.0 / 8.0 * np.sqrt(np.log(2) / (k * 0.05))
        assert steps.eta == pytest.approx(expected, rel=1e-12)

    def test_degenerate_instances(self):
        single = SecondMomentSet.from_matrices([np.eye(3)])
        with pytest.raises(DegenerateInstance):
            default_step_sizes(single, 1)
        pair = SecondMomentSet.from_matrices([np.eye(3), 2 * np.eye(3)])
        with pytest.raises(DegenerateInstance):
            default_step_sizes(pair, 3)


class TestWaterfill:
    def test_softmax_case(self):
        nu, xi = waterfill_nu(np.array([0.5, 0.2, -0.3]), 1)
        ref_nu, ref_xi = waterfill_oracle(np.array([0.5, 0.2, -0.3]), 1)
        assert nu == pytest.approx(ref_nu, abs=1e-9)
        assert nu == pytest.approx(-1.283969, abs=1e-6)
        assert np.allclose(xi, [0.45659, 0.33825, 0.20516], atol=1e-5)

    def test_clipped_case(self):
        nu, xi = waterfill_nu(np.array([5.0, 0.0, 0.0]), 2)
        assert nu == pytest.approx(np.log(0.5), abs=1e-9)
        assert np.allclose(xi, [1.0, 0.5, 0.5], atol=1e-9)

    def test_constant_spectrum(self):
        for d, k, c in ((4, 1, 0.0), (5, 3, -2.5), (6, 2, 7.0)):
            nu, xi = waterfill_nu(np.full(d, c), k)
            assert np.allclose(xi, k / d, atol=1e-10)
            assert nu == pytest.approx(np.log(k / d) - c, abs=1e-8)

    def test_against_oracle_1000_cases(self):
        rng = np.random.default_rng(99)
        worst_sum, worst_diff = 0.0, 0.0
        for _ in range(1000):
            d = int(rng.integers(2, 12))
            k = int(rng.integers(1, d))
            lam = rng.normal(scale=rng.uniform(0.1, 4.0), size=d)
            nu, xi = waterfill_nu(lam, k)
            _, ref = waterfill_oracle(lam, k)
            worst_sum = max(worst_sum, abs(xi.sum() - k))
            worst_diff = max(worst_diff, np.abs(xi - ref).max())
        assert worst_sum <= 1e-9
        assert worst_diff <= 1e-9


class TestMirrorUpdates:
    def test_uniform_gradient_shift_is_absorbed(self, rng):
        base = FantopePoint(matrix=np.diag([0.6, 0.3, 0.1]), target_rank=1)
        out = fantope_mirror_update(base, 2.7 * np.eye(3), eta_m=0.5)
        assert np.abs(out.matrix - base.matrix).max() <= 1e-8

    def test_zero_gradient_fixed_point(self):
        d, k = 5, 2
        base = FantopePoint(matrix=(k / d) * np.eye(d), target_rank=k)
        out = fantope_mirror_update(base, np.zeros((d, d)), eta_m=1.0)
        assert np.abs(out.matrix - base.matrix).max() <= 1e-10

    def test_symmetric_crossing_fixed_point(self):
        base = FantopePoint(matrix=0.5 * np.eye(2), target_rank=1)
        out = fantope_mirror_update(base, 1.5 * np.eye(2), eta_m=0.12)
        assert np.abs(out.matrix - 0.5 * np.eye(2)).max() <= 1e-10

    def test_simplex_equal_payoffs(self):
        w = SimplexWeights(weights=np.array([0.2, 0.5, 0.3]))
        out = simplex_mirror_update(w, np.full(3, 4.2), eta_omega=0.7)
        assert np.allclose(out.weights, w.weights, atol=1e-15)

    def test_simplex_ratio(self):
        w = SimplexWeights(weights=np.array([0.5, 0.5]))
        out = simplex_mirror_update(w, np.array([0.0, 10.0]), eta_omega=1.0)
        assert out.weights[0] / out.weights[1] == pytest.approx(np.e ** 10, rel=1e-9)

    def test_simplex_shift_invariance(self):
        w = SimplexWeights(weights=np.array([0.1, 0.6, 0.3]))
        pay = np.array([1.0, -2.0, 0.5])
        a = simplex_mirror_update(w, pay, 0.8).weights
        b = simplex_mirror_update(w, pay + 123.0, 0.8).weights
        assert np.abs(a - b).max() <= 1e-15


class TestSolve:
    def test_classical_reduction_single_source(self):
        m = SecondMomentSet.from_matrices([np.diag([4.0, 2.0, 1.0])])
        report = solve(m, 2, 100)
        assert np.allclose(report.P_rounded.matrix, np.diag([1.0, 1.0, 0.0]))
        assert report.worst_case_ev == pytest.approx(6.0)
        assert report.tau == 0.0
        assert report.iterations == 0

    def test_dominated_pair_matches_grid_oracle(self):
        m = dominated_pair()
        oracle_val, oracle_theta = minimax_angle_grid_oracle(m)
        assert oracle_val == pytest.approx(2.0, abs=1e-5)
        assert min(oracle_theta, np.pi - oracle_theta) <= np.pi / 2000
        report = solve(m, 1, 500)
        assert report.worst_case_ev == pytest.approx(oracle_val, abs=1e-3)
        assert np.linalg.norm(report.P_rounded.matrix - np.diag([1.0, 0.0])) <= 1e-3
        assert report.tau <= 1e-3

    def test_degenerate_crossing_closed_form(self):
        report = solve(crossing_pair(), 1, 500)
        assert np.abs(report.M_avg.matrix - 0.5 * np.eye(2)).max() <= 1e-8
        relaxed = min(float(np.sum(s * report.M_avg.matrix))
                      for s in crossing_pair().matrices)
        assert relaxed == pytest.approx(1.5, abs=1e-9)
        assert report.tau == pytest.approx(0.5, abs=1e-6)
        assert np.allclose(report.P_rounded.matrix, np.diag([1.0, 0.0]), atol=1e-9)
        assert np.allclose(report.omega_avg.weights, [0.5, 0.5], atol=1e-15)

    def test_identical_sources_shortcut(self, rng):
        sigma = np.diag([4.0, 2.0, 1.0])
        m = SecondMomentSet.from_matrices([sigma, sigma.copy(), sigma.copy()])
        report = solve(m, 1, 50)
        assert report.tau == 0.0
        assert report.iterations == 0
        assert np.allclose(report.P_rounded.matrix, np.diag([1.0, 0.0, 0.0]))

    def test_report_consistency(self, rng):
        m = wishart_instance(rng, 5, 3)
        report = solve(m, 2, 60)
        assert report.worst_case_ev == pytest.approx(min(report.per_source_ev), abs=1e-12)
        assert all(g >= -1e-8 for _, g in report.gap_trace)
        assert report.iterations == 60
        # averaged iterates stay feasible
        vals = np.linalg.eigvalsh(report.M_avg.matrix)
        assert vals.min() >= -1e-8 and vals.max() <= 1 + 1e-8
        assert abs(np.trace(report.M_avg.matrix) - 2) <= 1e-6
        w = report.omega_avg.weights
        assert w.min() >= 0 and abs(w.sum() - 1) <= 1e-12

    def test_debug_mode_asserts_feasibility(self, rng):
        for i in range(5):
            m = wishart_instance(np.random.default_rng(300 + i), 4, 3)
            solve(m, 2, 40, debug=True)

    def test_invalid_arguments(self):
        m = dominated_pair()
        with pytest.raises(InvalidArgument):
            solve(m, 1, 0)

    def test_tau_bounded_by_gap(self, rng):
        for i in range(5):
            m = wishart_instance(np.random.default_rng(400 + i), 6, 3)
            report = solve(m, 2, 80)
            gap = duality_gap(m, report.M_avg, report.omega_avg, 2)
            assert gap >= -1e-8
            assert report.tau >= -gap - 1e-8

    def test_scale_equivariance_full_trajectory(self, rng):
        m = wishart_instance(rng, 5, 3, rescaled=False)
        base = solve(m, 2, 150)
        for c in (0.1, 10.0):
            scaled_set = SecondMomentSet.from_matrices(
                [c * s for s in m.matrices], labels=m.labels)
            scaled = solve(scaled_set, 2, 150)
            assert np.abs(scaled.M_avg.matrix - base.M_avg.matrix).max() <= 1e-9
            assert np.abs(scaled.omega_avg.weights - base.omega_avg.weights).max() <= 1e-12
            assert np.abs(scaled.P_rounded.matrix - base.P_rounded.matrix).max() <= 1e-9
            assert scaled.worst_case_ev == pytest.approx(c * base.worst_case_ev, rel=1e-9)

    def test_uniform_shift_argmax_invariance(self, rng):
        m = wishart_instance(rng, 5, 3)
        steps = default_step_sizes(m, 2)
        base = solve(m, 2, 200, steps=steps)
        shifted_set = SecondMomentSet.from_matrices(
            [s + 0.8 * np.eye(5) for s in m.matrices], labels=m.labels)
        shifted = solve(shifted_set, 2, 200, steps=steps)
        assert np.linalg.norm(shifted.P_rounded.matrix - base.P_rounded.matrix) <= 1e-6

    def test_early_stop_on_gap_tolerance(self):
        m = dominated_pair()
        report = solve(m, 1, 5000, gap_stride=10, gap_tol=0.05)
        assert report.iterations < 5000
        assert report.gap_trace[-1][1] <= 0.05


class TestCertificateAndGap:
    def test_certificate_zero_on_projector(self):
        m = dominated_pair()
        p = top_k_projector(np.diag([1.0, 0.0]), 1)
        point = FantopePoint(matrix=p.matrix.copy(), target_rank=1)
        assert certificate(m, point, p) == pytest.approx(0.0, abs=1e-15)

    def test_certificate_on_crossing(self):
        m = crossing_pair()
        point = FantopePoint(matrix=0.5 * np.eye(2), target_rank=1)
        p = top_k_projector(0.5 * np.eye(2), 1)
        assert certificate(m, point, p) == pytest.approx(0.5, abs=1e-12)

    def test_gap_zero_at_saddle(self):
        m = dominated_pair()
        point = FantopePoint(matrix=np.diag([1.0, 0.0]), target_rank=1)
        omega = SimplexWeights(weights=np.array([0.0, 1.0]))
        assert duality_gap(m, point, omega, 1) == pytest.approx(0.0, abs=1e-12)

    def test_gap_positive_at_initialization(self, rng):
        m = wishart_instance(rng, 6, 3)
        point = FantopePoint(matrix=(2 / 6) * np.eye(6), target_rank=2)
        omega = SimplexWeights(weights=np.full(3, 1 / 3))
        assert duality_gap(m, point, omega, 2) > 1e-4


class TestCustomSteps:
    def test_explicit_steps_respected(self):
        m = dominated_pair()
        slow = solve(m, 1, 50, steps=StepSizes(eta=1e-6, eta_M=1e-6, eta_omega=1e-6))
        # with vanishing steps the average stays near the initializer
        assert np.abs(slow.M_avg.matrix - 0.5 * np.eye(2)).max() <= 1e-3

"""Mirror-Prox saddle-point solver for worst-case explained variance.

The solver maximizes min_l <Sigma_l, M> over the rank-k spectrahedron
(symmetric M with eigenvalues in [0,1] and trace k) while an adversary
picks mixture weights on the simplex. Each iteration performs an
entropic mirror step to a midpoint and a corrected step using midpoint
gradients, both based at the current iterate:

    A        = log M_t + eta_M * sum_l omega_l Sigma_l
    M_next   = sum_j min{exp(lambda_j(A) + nu), 1} u_j u_j^T
    omega_l' ~ omega_l * exp(-eta_omega * <Sigma_l, M>)

with nu the water-filling constant making the clipped exponentials sum
to k. Midpoints are averaged, the average is rounded to the nearest
rank-k projector, and the rounding loss is reported as the certificate

    tau = min_l <Sigma_l, M_avg> - min_l <Sigma_l, P>.

Runs are fully deterministic: there is no randomness anywhere in the
iteration, and distinct solves share no state.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInstance, InvalidArgument, InvalidRank, NumericalError, ShapeError
from .moments import SecondMomentSet
from .spectral import SPECTRUM_FLOOR, ProjectionMatrix, log_spectrum, sym_eig, top_k_projector

FANTOPE_EIG_TOL = 1e-8
FANTOPE_TRACE_TOL = 1e-6
SIMPLEX_TOL = 1e-12
STEP_LOG_CLAMP = 0.05
WATERFILL_TOL = 1e-10
WATERFILL_MAX_ITER = 200


@dataclass(frozen=True)
class FantopePoint:
    """Relaxed iterate: symmetric, eigenvalues in [0,1], trace = target_rank."""

    matrix: np.ndarray
    target_rank: int


@dataclass(frozen=True)
class SimplexWeights:
    """Adversarial mixture weights on the probability simplex."""

    weights: np.ndarray


@dataclass(frozen=True)
class StepSizes:
    eta: float
    eta_M: float
    eta_omega: float


@dataclass
class SolveReport:
    M_avg: FantopePoint
    omega_avg: SimplexWeights
    P_rounded: ProjectionMatrix
    tau: float
    gap_trace: list[tuple[int, float]]
    per_source_ev: list[float]
    worst_case_ev: float
    iterations: int
    wall_time: float


def logclamp(x: float) -> float:
    """max(log x, 0.05); keeps the step-size formula finite as d -> k."""
    return max(float(np.log(x)), STEP_LOG_CLAMP)


def default_step_sizes(m: SecondMomentSet, k: int, scale: float = 1.0) -> StepSizes:
    """Step sizes from the O(1/T) convergence guarantee.

    eta = (1 / (4 rho_max)) * sqrt(log L / (k * logclamp(d/k))), split as
    eta_M = eta / log L and eta_omega = eta / (k * logclamp(d/k)).
    ``scale`` multiplies eta (exposed to callers as --eta-scale).
    """
    if m.count < 2 or k >= m.dim:
        raise DegenerateInstance(
            "step-size schedule needs L >= 2 and k < d; use the classical reduction")
    if not 1 <= k:
        raise InvalidRank(f"k={k} must be >= 1")
    if m.rho_max <= 0.0:
        raise DegenerateInstance("rho_max must be positive")
    log_l = float(np.log(m.count))
    fan_radius = k * logclamp(m.dim / k)
    eta = scale / (4.0 * m.rho_max) * np.sqrt(log_l / fan_radius)
    return StepSizes(eta=float(eta), eta_M=float(eta / log_l), eta_omega=float(eta / fan_radius))


def waterfill_nu(lam, k: int) -> tuple[float, np.ndarray]:
    """Solve sum_j min{exp(lam_j + nu), 1} = k for nu by bisection.

    The map is continuous and nondecreasing in nu with range (0, d), so
    a sign-bracketing interval always exists; the initial bracket is
    expanded geometrically as a safety net. Returns (nu, xi).
    """
    lam = np.asarray(lam, dtype=float)
    d = lam.size
    if not 1 <= k < d:
        raise InvalidRank(f"waterfill needs 1 <= k < d, got k={k}, d={d}")
    if not np.all(np.isfinite(lam)):
        raise NumericalError("non-finite exponents in water-filling step")
    buf = np.empty_like(lam)

    def total(nu):
        # min{exp(x), 1} == exp(min(x, 0)): immune to overflow
        np.add(lam, nu, out=buf)
        np.minimum(buf, 0.0, out=buf)
        np.exp(buf, out=buf)
        return buf.sum()

    lo = float(np.log(k / d) - lam.max() - 1.0)
    hi = float(-lam.min() + np.log(k) + 1.0)
    width = hi - lo
    for _ in range(60):
        if total(lo) < k:
            break
        lo -= width
        width *= 2.0
    else:
        raise NumericalError("water-filling bracket expansion failed (lower end)")
    width = hi - lo
    for _ in range(60):
        if total(hi) > k:
            break
        hi += width
        width *= 2.0
    else:
        raise NumericalError("water-filling bracket expansion failed (upper end)")

    nu = 0.5 * (lo + hi)
    for _ in range(WATERFILL_MAX_ITER):
        nu = 0.5 * (lo + hi)
        s = total(nu)
        if abs(s - k) <= WATERFILL_TOL:
            break
        if s < k:
            lo = nu
        else:
            hi = nu
    xi = np.exp(np.minimum(lam + nu, 0.0))
    return float(nu), xi


def fantope_mirror_update(m_base: FantopePoint, grad_dir, eta_m: float) -> FantopePoint:
    """One entropic mirror step on the spectrahedron.

    Eigendecomposes log(M_base) + eta_m * grad_dir and water-fills the
    clipped exponentials of its spectrum back to trace k.
    """
    grad = np.asarray(grad_dir, dtype=float)
    if grad.shape != m_base.matrix.shape:
        raise ShapeError(f"gradient shape {grad.shape} != iterate shape {m_base.matrix.shape}")
    a = log_spectrum(m_base.matrix) + eta_m * 0.5 * (grad + grad.T)
    pairs = sym_eig(a)
    _, xi = waterfill_nu(pairs.values, m_base.target_rank)
    out = (pairs.vectors * xi) @ pairs.vectors.T
    return FantopePoint(matrix=0.5 * (out + out.T), target_rank=m_base.target_rank)


def simplex_mirror_update(omega_base: SimplexWeights, payoffs, eta_omega: float) -> SimplexWeights:
    """Multiplicative-weights step toward low-payoff sources, log-domain stable."""
    base = np.asarray(omega_base.weights, dtype=float)
    pay = np.asarray(payoffs, dtype=float)
    if pay.shape != base.shape:
        raise ShapeError(f"payoff shape {pay.shape} != weight shape {base.shape}")
    with np.errstate(divide="ignore"):
        z = np.log(base) - eta_omega * pay
    z -= z.max()
    w = np.exp(z)
    return SimplexWeights(weights=w / w.sum())


def _payoffs(matrices, m) -> np.ndarray:
    return np.array([float(np.sum(s * m)) for s in matrices])


def certificate(m: SecondMomentSet, m_point: FantopePoint, p: ProjectionMatrix) -> float:
    """Worst-case explained variance lost by rounding M to the projector P.

    Can be negative when the averaged iterate is still short of the
    relaxed optimum.
    """
    ev_m = _payoffs(m.matrices, m_point.matrix)
    ev_p = _payoffs(m.matrices, p.matrix)
    return float(ev_m.min() - ev_p.min())


def duality_gap(m: SecondMomentSet, m_point: FantopePoint, omega: SimplexWeights, k: int) -> float:
    """Ky Fan value at the mixture minus the worst-source payoff of M; >= 0."""
    mix = _mixture(m.matrices, np.asarray(omega.weights, dtype=float))
    pairs = sym_eig(mix)
    if not 1 <= k <= pairs.dim:
        raise InvalidRank(f"k={k} outside [1, {pairs.dim}]")
    return float(pairs.values[:k].sum() - _payoffs(m.matrices, m_point.matrix).min())


def _mixture(matrices, weights) -> np.ndarray:
    out = weights[0] * matrices[0]
    for w, s in zip(weights[1:], matrices[1:]):
        out = out + w * s
    return out


def _assert_fantope(xi, trace_target, matrix):
    assert xi.min() >= -FANTOPE_EIG_TOL, f"fantope eigenvalue {xi.min()} < -{FANTOPE_EIG_TOL}"
    assert xi.max() <= 1.0 + FANTOPE_EIG_TOL, f"fantope eigenvalue {xi.max()} > 1+{FANTOPE_EIG_TOL}"
    assert abs(xi.sum() - trace_target) <= FANTOPE_TRACE_TOL, \
        f"fantope trace {xi.sum()} != {trace_target}"
    assert np.abs(matrix - matrix.T).max() <= 1e-10, "fantope iterate asymmetric"


def _assert_simplex(w):
    assert w.min() >= 0.0, f"negative simplex weight {w.min()}"
    assert abs(w.sum() - 1.0) <= SIMPLEX_TOL, f"simplex sum {w.sum()} != 1"


def _classical_report(m: SecondMomentSet, k: int, started: float) -> SolveReport:
    """Exact reduction when the adversary is irrelevant (L=1, identical
    sources, or k=d): classical top-k of the mixture-invariant moment."""
    if k == m.dim and m.count > 1:
        # the only rank-d projector is I; the adversary picks the min trace
        traces = np.array([float(np.trace(s)) for s in m.matrices])
        weights = np.zeros(m.count)
        weights[int(np.argmin(traces))] = 1.0
    else:
        weights = np.full(m.count, 1.0 / m.count)
    proj = top_k_projector(_mixture(m.matrices, weights), k)
    m_avg = FantopePoint(matrix=proj.matrix.copy(), target_rank=k)
    ev = _payoffs(m.matrices, proj.matrix)
    return SolveReport(
        M_avg=m_avg,
        omega_avg=SimplexWeights(weights=weights),
        P_rounded=proj,
        tau=0.0,
        gap_trace=[(0, 0.0)],
        per_source_ev=[float(v) for v in ev],
        worst_case_ev=float(ev.min()),
        iterations=0,
        wall_time=time.perf_counter() - started,
    )


def _identical_sources(matrices) -> bool:
    first = matrices[0]
    return all(np.array_equal(first, s) for s in matrices[1:])


def solve(m: SecondMomentSet, k: int, T: int, steps: StepSizes | None = None,
          gap_stride: int | None = None, gap_tol: float | None = None,
          debug: bool = False) -> SolveReport:
    """Run the extragradient loop and round the averaged iterate.

    ``gap_stride`` controls how often the duality gap of the running
    averages is recorded (default max(1, T // 50); each evaluation costs
    one eigendecomposition). ``gap_tol`` enables early stopping when the
    recorded gap drops below it (off by default, matching the fixed-T
    protocol). ``debug`` asserts the feasibility invariants of every
    iterate.
    """
    started = time.perf_counter()
    if T < 1:
        raise InvalidArgument(f"T={T} must be >= 1")
    d = m.dim
    if not 1 <= k <= d:
        raise InvalidRank(f"k={k} outside [1, {d}]")
    if m.count == 1 or k == d or _identical_sources(m.matrices):
        return _classical_report(m, k, started)
    if steps is None:
        steps = default_step_sizes(m, k)
    stride = gap_stride if gap_stride is not None else max(1, T // 50)
    if stride < 1:
        raise InvalidArgument(f"gap_stride={gap_stride} must be >= 1")

    matrices = m.matrices
    L = m.count
    # stacked views make payoffs a GEMV and mixtures a GEMM row
    stack = np.ascontiguousarray(np.stack(matrices))
    flat = stack.reshape(L, d * d)
    # spectral form of the current iterate: M_t = U diag(xi) U^T
    xi = np.full(d, k / d)
    basis = np.eye(d)
    m_t = (basis * xi) @ basis.T
    omega = np.full(L, 1.0 / L)
    m_sum = np.zeros((d, d))
    omega_sum = np.zeros(L)
    gap_trace: list[tuple[int, float]] = []
    done = 0

    for t in range(T):
        log_m = (basis * np.log(np.maximum(xi, SPECTRUM_FLOOR))) @ basis.T
        log_m = 0.5 * (log_m + log_m.T)
        pay_t = flat @ m_t.ravel()

        # midpoint from gradients at (M_t, omega_t)
        a_mid = log_m + steps.eta_M * (omega @ flat).reshape(d, d)
        values, vectors = np.linalg.eigh(0.5 * (a_mid + a_mid.T))
        order = np.argsort(-values, kind="stable")
        _, xi_mid = waterfill_nu(values[order], k)
        vec_mid = vectors[:, order]
        m_mid = (vec_mid * xi_mid) @ vec_mid.T
        m_mid = 0.5 * (m_mid + m_mid.T)
        with np.errstate(divide="ignore"):
            z = np.log(omega) - steps.eta_omega * pay_t
        z -= z.max()
        omega_mid = np.exp(z)
        omega_mid /= omega_mid.sum()

        # full step from gradients at the midpoint, still based at (M_t, omega_t)
        a_full = log_m + steps.eta_M * (omega_mid @ flat).reshape(d, d)
        values, vectors = np.linalg.eigh(0.5 * (a_full + a_full.T))
        order = np.argsort(-values, kind="stable")
        _, xi_full = waterfill_nu(values[order], k)
        vec_full = vectors[:, order]
        m_next = (vec_full * xi_full) @ vec_full.T
        m_next = 0.5 * (m_next + m_next.T)
        pay_mid = flat @ m_mid.ravel()
        with np.errstate(divide="ignore"):
            z = np.log(omega) - steps.eta_omega * pay_mid
        z -= z.max()
        omega_next = np.exp(z)
        omega_next /= omega_next.sum()

        if debug:
            _assert_fantope(xi_mid, k, m_mid)
            _assert_fantope(xi_full, k, m_next)
            _assert_simplex(omega_mid)
            _assert_simplex(omega_next)

        m_sum += m_mid
        omega_sum += omega_mid
        xi, basis, m_t, omega = xi_full, vec_full, m_next, omega_next
        done = t + 1

        if done % stride == 0 or done == T:
            # eigenvalues-only gap of the running averages
            mix = ((omega_sum / done) @ flat).reshape(d, d)
            spectrum = np.linalg.eigvalsh(0.5 * (mix + mix.T))
            gap = float(spectrum[d - k:].sum() - (flat @ m_sum.ravel()).min() / done)
            gap_trace.append((done, gap))
            if gap_tol is not None and gap <= gap_tol:
                break

    m_avg_mat = m_sum / done
    m_avg_mat = 0.5 * (m_avg_mat + m_avg_mat.T)
    m_avg = FantopePoint(matrix=m_avg_mat, target_rank=k)
    omega_avg = SimplexWeights(weights=omega_sum / done)
    proj = top_k_projector(m_avg_mat, k)
    ev = _payoffs(matrices, proj.matrix)
    return SolveReport(
        M_avg=m_avg,
        omega_avg=omega_avg,
        P_rounded=proj,
        tau=certificate(m, m_avg, proj),
        gap_trace=gap_trace,
        per_source_ev=[float(v) for v in ev],
        worst_case_ev=float(ev.min()),
        iterations=done,
        wall_time=time.perf_counter() - started,
    )

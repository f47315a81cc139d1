"""Dual route: minimize the Ky Fan value of the mixture over the simplex.

phi(omega) = sum of the k largest eigenvalues of Sigma(omega) is convex
and piecewise smooth; its subgradient at omega is the vector of source
payoffs against the top-k eigenprojector of Sigma(omega). Mirror
descent on the simplex with averaged iterates minimizes it, and an
eigengap at the minimizer certifies that the relaxation is exact (the
optimum is then the top-k eigenprojector itself). The eigengap is
evaluated at the averaged iterate, so the ``tight`` flag is a
heuristic, not a proof.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, InvalidRank
from .mirrorprox import SimplexWeights, _mixture
from .moments import SecondMomentSet
from .spectral import ProjectionMatrix, sym_eig

DUAL_STEP_CONSTANT = 3.0
DEFAULT_GAP_TOL = 1e-6


@dataclass
class DualReport:
    omega_avg: SimplexWeights
    phi_trace: list[tuple[int, float]]
    phi_at_avg: float
    eigengap: float
    tight: bool
    M_candidate: ProjectionMatrix


def phi(m: SecondMomentSet, omega: SimplexWeights, k: int) -> float:
    """Ky Fan top-k value of the weighted mixture."""
    pairs = sym_eig(_mixture(m.matrices, np.asarray(omega.weights, dtype=float)))
    if not 1 <= k <= pairs.dim:
        raise InvalidRank(f"k={k} outside [1, {pairs.dim}]")
    return float(pairs.values[:k].sum())


def phi_subgrad(m: SecondMomentSet, omega: SimplexWeights, k: int) -> np.ndarray:
    """Subgradient: per-source payoff against the mixture's top-k projector."""
    pairs = sym_eig(_mixture(m.matrices, np.asarray(omega.weights, dtype=float)))
    if not 1 <= k <= pairs.dim:
        raise InvalidRank(f"k={k} outside [1, {pairs.dim}]")
    vk = pairs.vectors[:, :k]
    proj = vk @ vk.T
    return np.array([float(np.sum(s * proj)) for s in m.matrices])


def tightness_check(m: SecondMomentSet, omega: SimplexWeights, k: int,
                    gap_tol: float = DEFAULT_GAP_TOL):
    """Eigengap lambda_k - lambda_{k+1} of Sigma(omega) and the top-k projector.

    ``tight`` means the gap exceeds ``gap_tol``, in which case the
    Fantope optimum at this omega is the returned projector.
    """
    if gap_tol <= 0.0:
        raise InvalidArgument(f"gap_tol={gap_tol} must be positive")
    pairs = sym_eig(_mixture(m.matrices, np.asarray(omega.weights, dtype=float)))
    if not 1 <= k < pairs.dim:
        raise InvalidRank(f"eigengap needs 1 <= k < d, got k={k}, d={pairs.dim}")
    eigengap = float(pairs.values[k - 1] - pairs.values[k])
    vk = pairs.vectors[:, :k]
    p = vk @ vk.T
    candidate = ProjectionMatrix(matrix=0.5 * (p + p.T), rank=k)
    return eigengap, eigengap > gap_tol, candidate


def dual_solve(m: SecondMomentSet, k: int, T: int, eta: float | None = None,
               gap_tol: float = DEFAULT_GAP_TOL, eta_scale: float = 1.0) -> DualReport:
    """Subgradient mirror descent on the simplex, averaging all iterates.

    The default schedule is eta_t = 3 / (rho_max * sqrt(t+1)), with
    ``eta_scale`` as a multiplier; an explicit ``eta`` is used as a
    constant step instead. The average runs over omega_0 .. omega_{T-1},
    and phi along the iterates is recorded (phi is not monotone along
    them).
    """
    if T < 1:
        raise InvalidArgument(f"T={T} must be >= 1")
    if eta is not None and eta <= 0.0:
        raise InvalidArgument(f"eta={eta} must be positive")
    if eta_scale <= 0.0:
        raise InvalidArgument(f"eta_scale={eta_scale} must be positive")
    L = m.count
    omega = np.full(L, 1.0 / L)
    omega_sum = np.zeros(L)
    phi_trace: list[tuple[int, float]] = []
    for t in range(T):
        pairs = sym_eig(_mixture(m.matrices, omega))
        if not 1 <= k < pairs.dim:
            raise InvalidRank(f"dual solve needs 1 <= k < d, got k={k}, d={pairs.dim}")
        phi_trace.append((t, float(pairs.values[:k].sum())))
        vk = pairs.vectors[:, :k]
        proj = vk @ vk.T
        grad = np.array([float(np.sum(s * proj)) for s in m.matrices])
        omega_sum += omega
        step = eta if eta is not None else \
            eta_scale * DUAL_STEP_CONSTANT / (m.rho_max * np.sqrt(t + 1.0))
        with np.errstate(divide="ignore"):
            z = np.log(omega) - step * grad
        z -= z.max()
        omega = np.exp(z)
        omega /= omega.sum()
    omega_avg = SimplexWeights(weights=omega_sum / T)
    eigengap, tight, candidate = tightness_check(m, omega_avg, k, gap_tol)
    return DualReport(
        omega_avg=omega_avg,
        phi_trace=phi_trace,
        phi_at_avg=phi(m, omega_avg, k),
        eigengap=eigengap,
        tight=tight,
        M_candidate=candidate,
    )

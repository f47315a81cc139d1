"""Dense symmetric spectral primitives shared by all solvers.

Everything here is a pure function of its inputs. Matrices are
symmetrized as (A + A^T)/2 on entry because eigen backends drift off
symmetry, and eigenvalues are returned in non-increasing order with
ties broken by the original (ascending) index so that degenerate
spectra round deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidMatrix, InvalidRank

SPECTRUM_FLOOR = 1e-12


@dataclass(frozen=True)
class EigenPairs:
    """Full eigendecomposition, values sorted non-increasing.

    ``vectors[:, j]`` is the unit eigenvector for ``values[j]``.
    """

    values: np.ndarray
    vectors: np.ndarray
    dim: int


@dataclass(frozen=True)
class ProjectionMatrix:
    """Rank-k orthogonal projector P = V V^T."""

    matrix: np.ndarray
    rank: int


def _as_symmetric(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("matrix contains non-finite entries")
    return 0.5 * (a + a.T)


def sym_eig(a) -> EigenPairs:
    """Eigendecomposition of a symmetric matrix, descending order.

    Ties are broken by retaining the ascending index order of the
    backend output (stable sort), which makes rounding deterministic
    for degenerate spectra such as c*I.
    """
    sym = _as_symmetric(a)
    values, vectors = np.linalg.eigh(sym)
    order = np.argsort(-values, kind="stable")
    return EigenPairs(values=values[order], vectors=vectors[:, order], dim=sym.shape[0])


def top_k_projector(a, k: int) -> ProjectionMatrix:
    """Projector onto the span of the k leading eigenvectors of ``a``."""
    pairs = sym_eig(a)
    if not 1 <= k <= pairs.dim:
        raise InvalidRank(f"k={k} outside [1, {pairs.dim}]")
    vk = pairs.vectors[:, :k]
    p = vk @ vk.T
    return ProjectionMatrix(matrix=0.5 * (p + p.T), rank=k)


def operator_norm(a) -> float:
    """Largest eigenvalue (the operator norm for PSD input)."""
    return float(sym_eig(a).values[0])


def spectral_radius(a) -> float:
    """Largest absolute eigenvalue; needed for indefinite shifted moments."""
    values = sym_eig(a).values
    return float(max(abs(values[0]), abs(values[-1])))


def ky_fan_value(a, k: int) -> float:
    """Sum of the k largest eigenvalues."""
    pairs = sym_eig(a)
    if not 1 <= k <= pairs.dim:
        raise InvalidRank(f"k={k} outside [1, {pairs.dim}]")
    return float(pairs.values[:k].sum())


def log_spectrum(m, floor: float = SPECTRUM_FLOOR) -> np.ndarray:
    """Matrix logarithm with eigenvalues floored at ``floor``.

    Mirror-Prox iterates live in (0, 1] analytically but can underflow
    numerically; the floor absorbs exact zeros.
    """
    pairs = sym_eig(m)
    logs = np.log(np.maximum(pairs.values, floor))
    out = (pairs.vectors * logs) @ pairs.vectors.T
    return 0.5 * (out + out.T)

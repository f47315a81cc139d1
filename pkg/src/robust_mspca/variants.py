"""Squared-loss and regret (fair) reformulations via spectral shifts.

Both variants reduce to the same saddle problem after subtracting a
per-source multiple of the identity: the squared variant subtracts
trace/k, the fair variant the top-k eigenvalue sum over k. Shifted
matrices are generally indefinite, so downstream step sizes use the
largest absolute eigenvalue. Explained variances in the report are
recomputed against the original matrices for comparability across
variants; tau and the gap trace refer to the shifted objective.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgument, InvalidRank
from .mirrorprox import SolveReport, StepSizes, default_step_sizes, solve
from .moments import SecondMomentSet
from .spectral import sym_eig

VARIANTS = ("stable", "squared", "fair")


def shift_matrices(m: SecondMomentSet, k: int, variant: str) -> SecondMomentSet:
    """Per-source spectral shift defining the variant objective."""
    if variant not in VARIANTS:
        raise InvalidArgument(f"variant {variant!r} not one of {VARIANTS}")
    if not 1 <= k <= m.dim:
        raise InvalidRank(f"k={k} outside [1, {m.dim}]")
    if variant == "stable":
        return m
    eye = np.eye(m.dim)
    shifted = []
    for s in m.matrices:
        values = sym_eig(s).values
        total = values.sum() if variant == "squared" else values[:k].sum()
        shifted.append(s - (total / k) * eye)
    return SecondMomentSet.from_matrices(
        shifted, labels=m.labels, sample_sizes=m.sample_sizes, require_psd=False)


def solve_variant(m: SecondMomentSet, k: int, T: int, variant: str,
                  steps: StepSizes | None = None, gap_stride: int | None = None,
                  gap_tol: float | None = None, debug: bool = False,
                  eta_scale: float = 1.0) -> SolveReport:
    """Run the saddle solver on the shifted instance.

    Default step sizes come from the shifted matrices (their largest
    absolute eigenvalue bounds the gradients).
    """
    if variant not in VARIANTS:
        raise InvalidArgument(f"variant {variant!r} not one of {VARIANTS}")
    target = shift_matrices(m, k, variant)
    if steps is None and target.count >= 2 and k < target.dim:
        steps = default_step_sizes(target, k, scale=eta_scale)
    report = solve(target, k, T, steps=steps, gap_stride=gap_stride,
                   gap_tol=gap_tol, debug=debug)
    if variant == "stable":
        return report
    ev = [float(np.sum(s * report.P_rounded.matrix)) for s in m.matrices]
    report.per_source_ev = ev
    report.worst_case_ev = float(min(ev))
    return report

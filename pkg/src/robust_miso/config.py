"""Numerical tolerances shared by every module.

Tests tighten or loosen these uniformly through :func:`override`.
"""

from contextlib import contextmanager
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    # smallest singular value of Z must exceed rank_rel * sigma_max(Z)
    rank_rel: float = 1e-10
    # allowed slack on sigma_max(A) <= 1 for an uncertainty shape
    shape_norm: float = 1e-9
    # allowed slack on ||w_k||^2 <= P_k
    power: float = 1e-9
    # interior point stopping rules
    gap_abs: float = 1e-9
    gap_rel: float = 1e-9
    feas: float = 1e-9
    max_iter: int = 200
    # acceptance of a returned cone solution
    cone_violation: float = 1e-7
    cone_gap: float = 1e-7
    # relative tolerance of the energy-per-bit fixed point
    bisect_rel: float = 1e-9


TOL = Tolerances()


def get() -> Tolerances:
    return TOL


@contextmanager
def override(**changes):
    """Temporarily replace selected tolerances."""
    global TOL
    saved = TOL
    TOL = replace(TOL, **changes)
    try:
        yield TOL
    finally:
        TOL = saved

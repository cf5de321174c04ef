"""Closed-form worst-case gains and rates under ellipsoidal channel errors.

For an estimate ``h``, a region ``{A d : ||d|| <= eps}`` and a beamformer
``w`` the received amplitude ``|(h + A d)^H w|`` ranges over

    [ (|h^H w| - eps ||A^H w||)_+ ,  |h^H w| + eps ||A^H w|| ].

The lower end is the worst case for the intended link and the upper end the
worst case for interference.
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from .model import BeamformerSet, Ellipsoid, Scenario


def _check(estimate, unc: Ellipsoid, w):
    h = np.asarray(estimate, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if h.shape != w.shape or h.shape[0] != unc.dim:
        raise ValueError(
            f"dimension mismatch: estimate {h.shape}, w {w.shape}, shape {unc.shape.shape}")
    return h, w


def _terms(estimate, unc, w):
    h, w = _check(estimate, unc, w)
    return abs(np.vdot(h, w)), unc.radius * float(np.linalg.norm(unc.shape.conj().T @ w))


def worst_intended_amplitude(estimate, unc: Ellipsoid, w) -> float:
    direct, spread = _terms(estimate, unc, w)
    return max(direct - spread, 0.0)


def worst_interference_amplitude(estimate, unc: Ellipsoid, w) -> float:
    direct, spread = _terms(estimate, unc, w)
    return direct + spread


def extremal_error_vector(estimate, unc: Ellipsoid, w, mode: str) -> np.ndarray:
    """Error vector ``d`` (in the unit-shape coordinates) attaining a bound.

    ``mode="maximize"`` returns the ``d`` with ``|(h + A d)^H w|`` equal to the
    interference amplitude, ``mode="minimize"`` the one reaching
    ``|h^H w| - eps ||A^H w||`` (equal to the intended amplitude whenever that
    difference is nonnegative). ``A^H w = 0`` yields the zero vector.
    """
    if mode not in ("minimize", "maximize"):
        raise ValueError(f"mode must be 'minimize' or 'maximize', got {mode!r}")
    h, w = _check(estimate, unc, w)
    g = unc.shape.conj().T @ w
    ng = np.linalg.norm(g)
    if ng == 0.0:
        return np.zeros_like(g)
    inner = np.vdot(h, w)
    # d enters as d^H A^H w, so the phase is conjugated; angle(0) := 0
    phase = np.conj(inner) / abs(inner) if inner != 0 else 1.0
    sign = 1.0 if mode == "maximize" else -1.0
    return sign * unc.radius * (g / ng) * phase


def zeroing_error_vector(estimate, unc: Ellipsoid, w) -> np.ndarray:
    """Feasible ``d`` with ``(h + A d)^H w = 0`` when the intended amplitude clamps.

    Shrinks the minimizing vector so its contribution cancels ``h^H w``
    exactly. Raises ``ValueError`` if the clamp is inactive.
    """
    h, w = _check(estimate, unc, w)
    direct, spread = _terms(estimate, unc, w)
    if direct > spread:
        raise ValueError("intended amplitude is positive; no zeroing error exists")
    d = extremal_error_vector(h, unc, w, "minimize")
    if spread == 0.0:
        return d
    return d * (direct / spread)


@dataclass(frozen=True)
class GainReport:
    """Worst-case power gains.

    ``intended[l]`` is ``x_ll^2`` and ``interference[k, l]`` is ``x_kl^2`` for
    ``k != l``; the diagonal of ``interference`` is zero.
    """

    intended: np.ndarray
    interference: np.ndarray


def gain_report(s: Scenario, b: BeamformerSet) -> GainReport:
    b.check(s)
    K = s.K
    intended = np.zeros(K)
    interference = np.zeros((K, K))
    for k in range(K):
        for ell in range(K):
            h, u = s.estimate(k, ell), s.uncertainty(k, ell)
            if k == ell:
                intended[k] = worst_intended_amplitude(h, u, b[k]) ** 2
            else:
                interference[k, ell] = worst_interference_amplitude(h, u, b[k]) ** 2
    return GainReport(intended, interference)


def rates_from_gains(intended, interference, noise_power: float) -> np.ndarray:
    """``log2(1 + x_ll^2 / (noise + sum_{k != l} x_kl^2))`` per link.

    Both arguments are gains in power units (squared amplitudes):
    ``intended[l] = x_ll^2`` and ``interference[k, l] = x_kl^2`` with a zero
    diagonal. Leading batch dimensions are allowed on both arguments.
    """
    intended = np.asarray(intended, dtype=float)
    interference = np.asarray(interference, dtype=float)
    total = interference.sum(axis=-2)
    return np.log2(1.0 + intended / (noise_power + total))


def worst_case_rates(s: Scenario, b: BeamformerSet) -> List[float]:
    g = gain_report(s, b)
    return [float(r) for r in rates_from_gains(g.intended, g.interference, s.noise_power)]

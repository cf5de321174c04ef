"""High- and low-SNR behaviour of robust beamforming.

SNR is ``rho = 1 / noise_power``, which assumes unit power budgets.
Rate derivatives at zero SNR are taken of the rate in nats, which is the
form in which ``Eb/N0_min = ln 2 / C'(0)`` holds.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import config
from .model import BeamformerSet, Scenario
from .pareto import failed, pareto_indices, prefilter, solve_candidates
from .robust_design import robust_mrt, zero_forcing
from .worst_case import gain_report, rates_from_gains

log = logging.getLogger(__name__)

STRATEGIES = ("robust_pareto_grid", "zero_forcing", "single_user_mrt", "joint_mrt")
LAW_KINDS = {"constant": 0.0, "inverse_sqrt_snr": 0.5, "inverse_cbrt_snr": 1.0 / 3.0}


# --- high SNR --------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorScalingLaw:
    """``eps(rho) = coefficient * rho ** (-exponent)``."""

    kind: str
    coefficient: float
    exponent: float = 0.0

    def __post_init__(self):
        if not (self.coefficient >= 0 and math.isfinite(self.coefficient)):
            raise ValueError(f"coefficient must be finite and >= 0, got {self.coefficient}")
        if self.kind in LAW_KINDS:
            object.__setattr__(self, "exponent", LAW_KINDS[self.kind])
        elif self.kind != "custom_exponent":
            raise ValueError(f"unknown law kind {self.kind!r}")
        if not math.isfinite(self.exponent):
            raise ValueError("exponent must be finite")

    @classmethod
    def constant(cls, a):
        return cls("constant", float(a))

    @classmethod
    def inverse_sqrt_snr(cls, a):
        return cls("inverse_sqrt_snr", float(a))

    @classmethod
    def inverse_cbrt_snr(cls, a):
        return cls("inverse_cbrt_snr", float(a))

    @classmethod
    def custom(cls, a, exponent):
        return cls("custom_exponent", float(a), float(exponent))

    def epsilon(self, rho: float) -> float:
        return self.coefficient * rho ** (-self.exponent)


def epsilons_at(law, rho: float, K: int) -> np.ndarray:
    """K x K radii at SNR ``rho`` from one law or a K x K nested list of laws."""
    if isinstance(law, ErrorScalingLaw):
        return np.full((K, K), law.epsilon(rho))
    laws = list(law)
    if len(laws) != K or any(len(row) != K for row in laws):
        raise ValueError(f"expected a {K}x{K} table of laws")
    return np.array([[lw.epsilon(rho) for lw in row] for row in laws])


def multiplexing_gain(antennas: Sequence[int]) -> int:
    """Largest ``k`` with ``k`` transmitters holding at least ``k`` antennas each."""
    counts = sorted((int(n) for n in antennas), reverse=True)
    if any(n < 1 for n in counts):
        raise ValueError("antenna counts must be >= 1")
    m = 0
    for k, n in enumerate(counts, start=1):
        if n >= k:
            m = k
        else:
            break
    return m


class SumRatePoint(NamedTuple):
    snr_db: float
    sum_rate: float
    rates: Tuple[float, ...]
    active_links: int
    # (transmitter, levels, status) of failed grid solves at this SNR
    failures: Tuple = ()


def _db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _rates(s: Scenario, b: BeamformerSet) -> np.ndarray:
    g = gain_report(s, b)
    return rates_from_gains(g.intended, g.interference, s.noise_power)


def _active(b: BeamformerSet) -> int:
    return sum(1 for w in b.w if np.any(w != 0))


def _grid_max_sum(s: Scenario, cands) -> Tuple[float, np.ndarray, int]:
    """Max-sum tuple over the product of candidate sets (first maximum wins)."""
    K = s.K
    keep = [prefilter(c, k) for k, c in enumerate(cands)]
    sizes = tuple(len(kp) for kp in keep)
    total = int(np.prod(sizes))
    best, best_rates, best_active = -np.inf, None, 0
    step = 1 << 18
    for start in range(0, total, step):
        local = np.column_stack(np.unravel_index(np.arange(start, min(start + step, total)), sizes))
        picks = np.column_stack([keep[k][local[:, k]] for k in range(K)])
        interf = np.zeros((picks.shape[0], K))
        for k in range(K):
            interf += cands[k].interference[picks[:, k]]
        intended = np.column_stack([cands[k].intended[picks[:, k]] for k in range(K)])
        rates = np.log2(1.0 + intended / (s.noise_power + interf))
        sums = rates.sum(axis=1)
        i = int(np.argmax(sums))
        if sums[i] > best:
            best, best_rates = float(sums[i]), rates[i]
            best_active = sum(1 for k in range(K)
                              if np.any(cands[k].beamformers[picks[i, k]] != 0))
    return best, best_rates, best_active


def sum_rate_sweep_detailed(s: Scenario, law, snr_grid_db: Sequence[float], strategy: str,
                            grid_step: float = 0.001, workers=None) -> List[SumRatePoint]:
    """Sum rate per SNR with the rates and number of transmitting links.

    Parameters
    ----------
    s : Scenario
        Estimates and shapes; its radii and noise power are replaced per SNR.
    law : ErrorScalingLaw or K x K nested list of them
    snr_grid_db : sequence of float
    strategy : {"robust_pareto_grid", "zero_forcing", "single_user_mrt", "joint_mrt"}
    grid_step : float
        Level spacing for ``robust_pareto_grid``.
    workers : int, optional
        Process count for the grid solves.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    snr_grid_db = [float(v) for v in snr_grid_db]
    if not snr_grid_db:
        raise ValueError("SNR grid is empty")
    K = s.K
    cache = {}
    out = []
    for snr_db in snr_grid_db:
        rho = _db_to_linear(snr_db)
        eps = epsilons_at(law, rho, K)
        sr = s.with_epsilons(eps).with_noise_power(1.0 / rho)
        key = eps.tobytes()
        if strategy == "robust_pareto_grid":
            if key not in cache:
                cache.clear()
                cache[key] = solve_candidates(sr, grid_step, workers)
            cands, statuses = cache[key]
            failures = failed(statuses)
            if failures:
                log.warning("snr %.6g dB: %d failed candidate solves", snr_db, len(failures))
            total, rates, active = _grid_max_sum(sr, cands)
        else:
            failures = []
            if strategy == "zero_forcing":
                b = BeamformerSet(tuple(zero_forcing(sr, k) for k in range(K)))
            else:
                if key not in cache:
                    cache.clear()
                    cache[key] = [robust_mrt(sr, k) for k in range(K)]
                mrt = cache[key]
                if strategy == "joint_mrt":
                    b = BeamformerSet(tuple(mrt))
                else:
                    best, b = -np.inf, None
                    for ell in range(K):
                        w = [mrt[k] if k == ell else np.zeros_like(mrt[k]) for k in range(K)]
                        cand = BeamformerSet(tuple(w))
                        r = _rates(sr, cand)[ell]
                        if r > best:
                            best, b = r, cand
            rates = _rates(sr, b)
            total, active = float(rates.sum()), _active(b)
        log.info("snr %.6g dB: strategy %s, sum rate %.12g, active links %d",
                 snr_db, strategy, total, active)
        out.append(SumRatePoint(snr_db, total, tuple(float(r) for r in rates), active,
                                tuple(failures)))
    return out


def sum_rate_sweep(s: Scenario, law, snr_grid_db, strategy: str, grid_step: float = 0.001,
                   workers=None) -> List[Tuple[float, float]]:
    """``(snr_db, sum_rate)`` pairs; see :func:`sum_rate_sweep_detailed`."""
    return [(p.snr_db, p.sum_rate)
            for p in sum_rate_sweep_detailed(s, law, snr_grid_db, strategy, grid_step, workers)]


def high_snr_slope_estimate(sweep, window_db: Optional[Tuple[float, float]] = None) -> float:
    """Least-squares slope of sum rate against ``log2(rho)`` inside ``window_db``.

    The default window is the top 10 dB of the sweep.
    """
    pts = [(float(p[0]), float(p[1])) for p in sweep]
    if not pts:
        raise ValueError("empty sweep")
    snr = np.array([p[0] for p in pts])
    rate = np.array([p[1] for p in pts])
    if window_db is None:
        window_db = (snr.max() - 10.0, snr.max())
    lo, hi = window_db
    if lo > hi or lo < snr.min() - 1e-9 or hi > snr.max() + 1e-9:
        raise ValueError(f"window {window_db} is not inside the sweep")
    sel = (snr >= lo - 1e-9) & (snr <= hi + 1e-9)
    x = snr[sel] * math.log2(10.0) / 10.0
    if np.unique(x).size < 2:
        raise ValueError("window holds fewer than two distinct SNR points")
    slope, _ = np.polyfit(x, rate[sel], 1)
    return float(slope)


# --- low SNR ---------------------------------------------------------------------

@dataclass(frozen=True)
class LowSnrMetrics:
    """Per-link minimum energy per bit (linear) and wideband slope."""

    ebno_min: np.ndarray
    wideband_slope: np.ndarray


def rate_derivatives_at_zero(s: Scenario, b: BeamformerSet) -> Tuple[np.ndarray, np.ndarray]:
    """First and second SNR derivatives at zero SNR of each link's rate in nats."""
    g = gain_report(s, b)
    x = g.intended
    i = g.interference.sum(axis=0)
    return x.copy(), -x * (x + 2.0 * i)


def low_snr_metrics(s: Scenario, b: BeamformerSet) -> LowSnrMetrics:
    g = gain_report(s, b)
    x = g.intended
    i = g.interference.sum(axis=0)
    ebno = np.full(s.K, np.inf)
    slope = np.zeros(s.K)
    on = x > 0
    ebno[on] = math.log(2.0) / x[on]
    slope[on] = 2.0 * x[on] / (x[on] + 2.0 * i[on])
    return LowSnrMetrics(ebno, slope)


class SpectralPoint(NamedTuple):
    ebno: float
    efficiency: float
    below_minimum: bool


def link_rate(intended: float, interference: float, rho: float) -> float:
    """``log2(1 + rho x / (1 + rho i))`` computed without cancellation."""
    return (math.log1p(rho * (intended + interference)) - math.log1p(rho * interference)) / math.log(2.0)


def solve_ebno(intended: float, interference: float, ebno: float) -> Optional[float]:
    """SNR ``rho`` with ``rho / C(rho) = ebno`` or ``None`` below the minimum.

    ``rho / C(rho)`` increases from ``ln 2 / intended`` at zero, so bisection
    on ``[0, rho_hi]`` with ``rho_hi`` doubled until it brackets the target
    converges to the unique root.
    """
    if intended <= 0:
        return None
    ebno_min = math.log(2.0) / intended

    def ratio(rho):
        return ebno_min if rho == 0.0 else rho / link_rate(intended, interference, rho)

    rel = config.get().bisect_rel
    # values within the bisection tolerance of the minimum count as the minimum
    if ebno < ebno_min * (1.0 - rel):
        return None
    if ebno <= ebno_min * (1.0 + rel):
        return 0.0
    lo, hi = 0.0, 1e-12
    while ratio(hi) < ebno:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise ArithmeticError("no bracket for the energy per bit fixed point")
    while hi - lo > rel * hi:
        mid = 0.5 * (lo + hi)
        if ratio(mid) < ebno:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def spectral_efficiency_curve(s: Scenario, b: BeamformerSet, link: int,
                              ebno_grid: Sequence[float]) -> List[SpectralPoint]:
    """Spectral efficiency of ``link`` at each linear ``Eb/N0`` value.

    Values below the link's minimum energy per bit give efficiency 0 with
    ``below_minimum`` set.
    """
    if not 0 <= link < s.K:
        raise ValueError(f"link index {link} out of range")
    g = gain_report(s, b)
    x = float(g.intended[link])
    i = float(g.interference[:, link].sum())
    out = []
    for ebno in ebno_grid:
        rho = solve_ebno(x, i, float(ebno))
        if rho is None:
            out.append(SpectralPoint(float(ebno), 0.0, True))
        else:
            out.append(SpectralPoint(float(ebno), link_rate(x, i, rho) if rho > 0 else 0.0, False))
    return out


@dataclass(frozen=True)
class LowSnrRegion:
    """Per-link metric tuples over the swept efficient beamformers.

    ``points`` holds every finite tuple of the Cartesian product and
    ``boundary`` its extremal subset: the lower-left corner for energy per
    bit, the upper-right one for wideband slopes.
    """

    points: np.ndarray
    boundary: np.ndarray
    joint_mrt: np.ndarray


def _candidate_product(cands):
    K = len(cands)
    sizes = tuple(len(c.beamformers) for c in cands)
    picks = np.column_stack(np.unravel_index(np.arange(int(np.prod(sizes))), sizes))
    intended = np.column_stack([cands[k].intended[picks[:, k]] for k in range(K)])
    interf = np.zeros((picks.shape[0], K))
    for k in range(K):
        interf += cands[k].interference[picks[:, k]]
    return intended, interf


def _mrt_gains(s: Scenario):
    g = gain_report(s, BeamformerSet(tuple(robust_mrt(s, k) for k in range(s.K))))
    return g.intended, g.interference.sum(axis=0)


def ebno_region_sweep(s: Scenario, grid_step: float = 0.001, workers=None,
                      candidates=None) -> LowSnrRegion:
    """Minimum energy per bit tuples of the efficient beamformers.

    Each link's value depends on its own beamformer only, so the lower-left
    boundary collapses to the joint robust MRT tuple up to solver accuracy.
    ``candidates`` reuses the output of :func:`solve_candidates`. With one
    link the boundary is the scalar minimum energy per bit.
    """
    cands = candidates if candidates is not None else solve_candidates(s, grid_step, workers)[0]
    intended, _ = _candidate_product(cands)
    finite = np.all(intended > 0, axis=1)
    pts = math.log(2.0) / intended[finite]
    mrt_x, _ = _mrt_gains(s)
    mrt_pt = np.where(mrt_x > 0, math.log(2.0) / np.where(mrt_x > 0, mrt_x, 1.0), np.inf)
    if np.all(np.isfinite(mrt_pt)):
        pts = np.vstack([pts, mrt_pt])
    boundary = pts[pareto_indices(-pts)] if len(pts) else pts
    return LowSnrRegion(pts, boundary, mrt_pt)


def slope_region_sweep(s: Scenario, grid_step: float = 0.001, workers=None,
                       candidates=None) -> LowSnrRegion:
    """Wideband slope tuples of the efficient beamformers and their upper boundary."""
    cands = candidates if candidates is not None else solve_candidates(s, grid_step, workers)[0]
    intended, interf = _candidate_product(cands)
    with np.errstate(invalid="ignore", divide="ignore"):
        pts = np.where(intended > 0, 2.0 * intended / (intended + 2.0 * interf), 0.0)
    mrt_x, mrt_i = _mrt_gains(s)
    mrt_pt = np.where(mrt_x > 0, 2.0 * mrt_x / np.maximum(mrt_x + 2.0 * mrt_i, 1e-300), 0.0)
    return LowSnrRegion(pts, pts[pareto_indices(pts)], mrt_pt)

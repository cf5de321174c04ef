"""Robust rate region sampling and Pareto filtering.

Each transmitter solves the candidate program on a uniform grid of
interference levels. Rate tuples come from the Cartesian product of the
per-transmitter candidates, and only the maximal tuples are kept.

Ties between identical rate tuples keep the first one in enumeration order
(transmitter 0's grid index varies slowest).
"""

import csv
import itertools
import json
from dataclasses import dataclass, field
from functools import partial
from typing import List, Sequence, Tuple

import numba
import numpy as np

from .model import BeamformerSet, Scenario
from .parallel import ordered_map
from .robust_design import DesignError, interference_caps, pareto_candidate, robust_mrt
from .worst_case import worst_intended_amplitude, worst_interference_amplitude

CSV_DIGITS = 15
_CHUNK_TUPLES = 1 << 18


@dataclass(frozen=True)
class RatePoint:
    """A jointly achievable worst-case rate tuple.

    ``params[k, l]`` is the level used by transmitter ``k`` towards receiver
    ``l``; the diagonal is zero.
    """

    rates: np.ndarray
    params: np.ndarray
    beamformers: BeamformerSet


@dataclass
class RegionSample:
    points: List[RatePoint]
    scenario_digest: str
    grid_step: float
    # (transmitter, levels, status) of every candidate solve in grid order
    statuses: List[Tuple[int, Tuple[float, ...], str]] = field(default_factory=list)

    @property
    def failures(self):
        return failed(self.statuses)


# --- dominance filter ------------------------------------------------------------

def _lex_desc_order(rates: np.ndarray) -> np.ndarray:
    """Stable lexicographically descending order of the rows."""
    order = np.argsort(-rates[:, 0], kind="stable")
    first = rates[order, 0]
    tied = np.zeros(first.shape[0], dtype=bool)
    same = first[1:] == first[:-1]
    tied[1:] |= same
    tied[:-1] |= same
    if rates.shape[1] > 1 and tied.any():
        # tied rows form contiguous blocks; a full lexsort of just those rows
        # keeps the blocks in place and orders each one
        pos = np.flatnonzero(tied)
        sub = rates[order[pos]]
        inner = np.lexsort(tuple(-sub[:, j] for j in range(sub.shape[1] - 1, -1, -1)))
        order[pos] = order[pos][inner]
    return order


@numba.njit(cache=True)
def _sweep3(r2_rank, r3, n_ranks):
    # points arrive lexicographically descending; a point is dropped iff an
    # earlier kept point is >= in every coordinate. Fenwick tree over the
    # reversed rank of coordinate 2 stores the best coordinate 3 seen.
    n = r3.shape[0]
    tree = np.full(n_ranks + 1, -np.inf)
    keep = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        pos = n_ranks - r2_rank[i]
        best = -np.inf
        j = pos
        while j > 0:
            if tree[j] > best:
                best = tree[j]
            j -= j & (-j)
        if best >= r3[i]:
            continue
        keep[i] = True
        j = pos
        while j <= n_ranks:
            if tree[j] < r3[i]:
                tree[j] = r3[i]
            j += j & (-j)
    return keep


@numba.njit(cache=True)
def _sweep_general(sorted_rates):
    n, d = sorted_rates.shape
    keep = np.zeros(n, dtype=np.bool_)
    kept = np.empty((n, d))
    m = 0
    for i in range(n):
        dominated = False
        for a in range(m):
            ok = True
            for j in range(d):
                if kept[a, j] < sorted_rates[i, j]:
                    ok = False
                    break
            if ok:
                dominated = True
                break
        if not dominated:
            keep[i] = True
            kept[m] = sorted_rates[i]
            m += 1
    return keep


def pareto_indices(rates) -> np.ndarray:
    """Indices of the maximal rows of ``rates``, lexicographically descending.

    A row is removed when another row is componentwise ``>=`` and differs in
    at least one coordinate; of several identical rows only the first is kept.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.ndim != 2:
        raise ValueError("rates must be an (n, K) array")
    n, d = rates.shape
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    if not np.all(np.isfinite(rates)):
        raise ValueError("rates must be finite")
    order = _lex_desc_order(rates)
    sr = rates[order]
    if d == 1:
        return order[:1]
    if d == 2:
        prev_best = np.maximum.accumulate(np.concatenate([[-np.inf], sr[:-1, 1]]))
        return order[sr[:, 1] > prev_best]
    if d == 3:
        _, rank = np.unique(sr[:, 1], return_inverse=True)
        keep = _sweep3(rank.astype(np.int64), np.ascontiguousarray(sr[:, 2]), int(rank.max()) + 1)
        return order[keep]
    return order[_sweep_general(np.ascontiguousarray(sr))]


def pareto_filter(points: Sequence[RatePoint]) -> List[RatePoint]:
    """Maximal elements of ``points`` ordered by rates, descending."""
    points = list(points)
    if not points:
        return []
    idx = pareto_indices(np.stack([p.rates for p in points]))
    return [points[i] for i in idx]


# --- sweep -----------------------------------------------------------------------

def level_grid(grid_step: float) -> np.ndarray:
    """``{0, step, 2 step, ..., 1}``; the last value is clamped to 1."""
    if not 0 < grid_step <= 1:
        raise ValueError(f"grid_step must lie in (0, 1], got {grid_step}")
    count = int(np.floor(1.0 / grid_step + 1e-9))
    # rounding keeps exact decimals such as 0.15 instead of 0.15000000000000002
    values = np.round(np.arange(count + 1) * grid_step, 12)
    if values[-1] < 1.0 - 1e-12:
        values = np.append(values, 1.0)
    return np.minimum(values, 1.0)


def _solve_one(s, gamma, job):
    k, levels = job
    try:
        return pareto_candidate(s, k, levels, gamma), "optimal"
    except DesignError as err:
        return None, err.status


@dataclass
class CandidateSet:
    """Solved candidates of one transmitter with their worst-case gains."""

    levels: np.ndarray       # (m, K-1)
    beamformers: List[np.ndarray]
    intended: np.ndarray     # (m,)   x_kk^2
    interference: np.ndarray  # (m, K) x_kl^2, zero at l = k


def solve_candidates(s: Scenario, grid_step: float, workers=None):
    """Solve every grid point of every transmitter.

    Returns ``(candidates, statuses)``; ``candidates[k]`` is a
    :class:`CandidateSet` in grid order with failed solves left out and
    ``statuses`` lists ``(k, levels, status)`` for every grid point.
    """
    K = s.K
    grid = level_grid(grid_step)
    mrt = [robust_mrt(s, k) for k in range(K)]
    gamma = interference_caps(s, mrt)
    jobs = [(k, tuple(float(v) for v in lv))
            for k in range(K) for lv in itertools.product(grid, repeat=K - 1)]
    results = ordered_map(partial(_solve_one, s, gamma), jobs, workers)
    statuses = [(k, lv, status) for (k, lv), (_, status) in zip(jobs, results)]
    candidates = []
    for k in range(K):
        levels, ws = [], []
        for (kk, lv), (w, status) in zip(jobs, results):
            if kk != k:
                continue
            if w is not None:
                levels.append(lv)
                ws.append(w)
        if not ws:
            # keep the region nonempty: a silent transmitter is always feasible
            levels.append(tuple(0.0 for _ in range(K - 1)))
            ws.append(np.zeros(s.links[k].antennas, dtype=complex))
        candidates.append(_gains(s, k, np.array(levels).reshape(len(ws), K - 1), ws))
    return candidates, statuses


def failed(statuses):
    return [st for st in statuses if st[2] != "optimal"]


def _gains(s: Scenario, k: int, levels, ws) -> CandidateSet:
    K = s.K
    intended = np.array([worst_intended_amplitude(s.estimate(k, k), s.uncertainty(k, k), w) ** 2
                         for w in ws])
    interference = np.zeros((len(ws), K))
    for ell in range(K):
        if ell != k:
            interference[:, ell] = [worst_interference_amplitude(
                s.estimate(k, ell), s.uncertainty(k, ell), w) ** 2 for w in ws]
    return CandidateSet(levels, list(ws), intended, interference)


def prefilter(c: CandidateSet, k: int) -> np.ndarray:
    """Indices (grid order) of candidates not dominated in gain space."""
    K = c.interference.shape[1]
    others = [ell for ell in range(K) if ell != k]
    score = np.column_stack([c.intended] + [-c.interference[:, ell] for ell in others])
    return np.sort(pareto_indices(score))


def _tuple_rates(cands, picks, noise_power):
    """Rates for index tuples ``picks`` (n, K) into each transmitter's candidates."""
    K = len(cands)
    total = np.zeros((picks.shape[0], K))
    for k in range(K):
        total += cands[k].interference[picks[:, k]]
    intended = np.column_stack([cands[k].intended[picks[:, k]] for k in range(K)])
    return np.log2(1.0 + intended / (noise_power + total))


def _iter_tuple_chunks(sizes):
    """Index tuples of the Cartesian product in row-major order, in chunks."""
    total = int(np.prod(sizes))
    step = max(1, _CHUNK_TUPLES)
    for start in range(0, total, step):
        flat = np.arange(start, min(start + step, total))
        yield np.column_stack(np.unravel_index(flat, sizes))


def region_tuples(s: Scenario, cands, filtered: bool = True):
    """Rates and index tuples of the product, optionally reduced to the boundary."""
    K = s.K
    if filtered:
        keep = [prefilter(c, k) for k, c in enumerate(cands)]
    else:
        keep = [np.arange(len(c.beamformers)) for c in cands]
    sizes = tuple(len(kp) for kp in keep)
    rate_parts, pick_parts = [], []
    for local in _iter_tuple_chunks(sizes):
        picks = np.column_stack([keep[k][local[:, k]] for k in range(K)])
        rates = _tuple_rates(cands, picks, s.noise_power)
        if filtered:
            idx = np.sort(pareto_indices(rates))
            rates, picks = rates[idx], picks[idx]
        rate_parts.append(rates)
        pick_parts.append(picks)
    rates = np.concatenate(rate_parts)
    picks = np.concatenate(pick_parts)
    if filtered:
        idx = pareto_indices(rates)
        rates, picks = rates[idx], picks[idx]
    return rates, picks


def sweep_region(s: Scenario, grid_step: float = 0.05, filtered: bool = True,
                 workers=None) -> RegionSample:
    """Sample the robust rate region on a uniform level grid.

    Parameters
    ----------
    s : Scenario
    grid_step : float
        Spacing of the levels in ``(0, 1]``.
    filtered : bool
        Return only the maximal tuples (the default). With ``False`` every
        tuple of the Cartesian product is returned in enumeration order.
    workers : int, optional
        Process count for the candidate solves; defaults to the
        ``ROBUST_MISO_THREADS`` environment variable.
    """
    cands, statuses = solve_candidates(s, grid_step, workers)
    rates, picks = region_tuples(s, cands, filtered)
    K = s.K
    points = []
    for r, pk in zip(rates, picks):
        params = np.zeros((K, K))
        for k in range(K):
            others = [ell for ell in range(K) if ell != k]
            params[k, others] = cands[k].levels[pk[k]]
        b = BeamformerSet(tuple(cands[k].beamformers[pk[k]] for k in range(K)))
        points.append(RatePoint(np.array(r), params, b))
    return RegionSample(points, s.digest(), float(grid_step), statuses)


# --- export ----------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.{CSV_DIGITS}g}"


def csv_header(K: int) -> List[str]:
    return [f"R{k + 1}" for k in range(K)] + [
        f"lambda_{k + 1}_{ell + 1}" for k in range(K) for ell in range(K) if ell != k]


def export_region(r: RegionSample, path, format: str = "csv") -> None:
    """Write a region sample as CSV rows or as a JSON document."""
    if not r.points:
        raise ValueError("region sample has no points")
    K = r.points[0].rates.shape[0]
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(csv_header(K))
            for p in r.points:
                lam = [p.params[k, ell] for k in range(K) for ell in range(K) if ell != k]
                writer.writerow([_fmt(v) for v in list(p.rates) + lam])
    elif format == "structured":
        doc = {
            "scenario_digest": r.scenario_digest,
            "grid_step": r.grid_step,
            "failures": [{"transmitter": k, "levels": list(lv), "status": st}
                         for k, lv, st in r.failures],
            "points": [{
                "rates": [float(v) for v in p.rates],
                "params": p.params.tolist(),
                "beamformers": [[[float(z.real), float(z.imag)] for z in w]
                                for w in p.beamformers.w],
            } for p in r.points],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def read_region_csv(path):
    """Return ``(rates, levels)`` arrays from a CSV written by :func:`export_region`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    K = sum(1 for h in header if h.startswith("R"))
    if header != csv_header(K):
        raise ValueError(f"{path}: unexpected header {header}")
    data = np.array([[float(v) for v in row] for row in body]).reshape(len(body), len(header))
    return data[:, :K], data[:, K:]

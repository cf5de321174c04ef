"""Robust beamformer design.

Every transmitter ``k`` trades its worst-case intended amplitude against the
worst-case interference it causes. Fixing an upper limit
``sqrt(lambda_kl * Gamma_kl)`` on each interference amplitude and maximizing
the intended amplitude gives a second-order cone program; sweeping
``lambda_k`` over ``[0, 1]^(K-1)`` produces every beamformer that can appear
at a Pareto optimal rate tuple.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from . import config
from .cone import OPTIMAL, ConeProgram, solve_cone_program
from .model import Scenario
from .numerics import complement_projector, complexify, orth_projector, realify_matrix, realify_row
from .worst_case import worst_intended_amplitude, worst_interference_amplitude


class DesignError(RuntimeError):
    """The cone solver did not return an optimal point."""

    def __init__(self, message, status):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class DesignParams:
    """Interference levels for all transmitters.

    ``lam[k, l]`` in ``[0, 1]`` scales the cap ``gamma[k, l]`` (a power) that
    transmitter ``k`` may cause at receiver ``l``; diagonals are ignored.
    """

    lam: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        off = ~np.eye(lam.shape[0], dtype=bool)
        if np.any(lam[off] < 0) or np.any(lam[off] > 1):
            raise ValueError("lambda must lie in [0, 1]")
        if np.any(gamma[off] < 0):
            raise ValueError("gamma must be nonnegative")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "gamma", gamma)


def _phase_normalize(w: np.ndarray, h: np.ndarray) -> np.ndarray:
    inner = np.vdot(h, w)
    if inner != 0:
        w = w * (np.conj(inner) / abs(inner))
    return w


def _clip_power(w: np.ndarray, power: float) -> np.ndarray:
    nw = np.linalg.norm(w)
    limit = np.sqrt(power)
    return w * (limit / nw) if nw > limit else w


def _solve_candidate(s: Scenario, k: int, caps: Dict[int, float]) -> np.ndarray:
    """Maximize the worst-case intended amplitude of link ``k`` under amplitude caps.

    ``caps`` maps receivers ``l != k`` to an upper bound on
    ``|h_kl^H w| + eps_kl ||A_kl^H w||``. Returns the phase-normalized optimum.
    """
    link = s.links[k]
    n = link.antennas
    h_kk = s.estimate(k, k)
    u_kk = s.uncertainty(k, k)

    # linear equalities; all right-hand sides are zero
    eq_rows = [realify_row(h_kk)[1]]
    cone_caps = {}
    for ell, cap in caps.items():
        if cap < 0:
            raise ValueError(f"cap for receiver {ell} is negative")
        unc = s.uncertainty(k, ell)
        if cap == 0.0:
            if unc.radius > 0:
                # full-rank shape: only w = 0 causes no worst-case interference
                return np.zeros(n, dtype=complex)
            eq_rows.extend(realify_row(s.estimate(k, ell)))
        else:
            cone_caps[ell] = cap
    E = np.vstack(eq_rows)
    _, sv, vt = np.linalg.svd(E)
    rank = int(np.sum(sv > config.get().rank_rel * max(sv[0], 1.0)))
    if rank >= 2 * n:
        return np.zeros(n, dtype=complex)
    E = vt[:rank]

    # variable layout: [Re w, Im w, t?, (u_l, v_l?)...]
    nw = 2 * n
    names = []
    if u_kk.radius > 0:
        names.append(("t", k))
    for ell in cone_caps:
        names.append(("u", ell))
        if s.uncertainty(k, ell).radius > 0:
            names.append(("v", ell))
    pos = {key: nw + i for i, key in enumerate(names)}
    dim = nw + len(names)

    def unit(i):
        e = np.zeros(dim)
        e[i] = 1.0
        return e

    def on_w(M):
        F = np.zeros((M.shape[0], dim))
        F[:, :nw] = M
        return F

    c = np.zeros(dim)
    c[:nw] = realify_row(h_kk)[0]
    socs = []
    if ("t", k) in pos:
        c[pos["t", k]] = -u_kk.radius
        socs.append((on_w(realify_matrix(u_kk.shape.conj().T)), np.zeros(nw),
                     unit(pos["t", k]), 0.0))
    for ell, cap in cone_caps.items():
        unc = s.uncertainty(k, ell)
        row = on_w(realify_row(s.estimate(k, ell)))
        if ("v", ell) in pos:
            socs.append((row, np.zeros(2), unit(pos["u", ell]), 0.0))
            socs.append((on_w(realify_matrix(unc.shape.conj().T)), np.zeros(nw),
                         unit(pos["v", ell]), 0.0))
            socs.append((np.zeros((0, dim)), np.zeros(0),
                         -unit(pos["u", ell]) - unc.radius * unit(pos["v", ell]), cap))
        else:
            socs.append((row, np.zeros(2), unit(pos["u", ell]), 0.0))
            socs.append((np.zeros((0, dim)), np.zeros(0), -unit(pos["u", ell]), cap))
    socs.append((on_w(np.eye(nw)), np.zeros(nw), np.zeros(dim), float(np.sqrt(link.power_budget))))
    eqs = [(on_w(r[None, :])[0], 0.0) for r in E]

    sol = solve_cone_program(ConeProgram(c, socs, eqs))
    if sol.status != OPTIMAL:
        raise DesignError(f"transmitter {k}: cone solver returned {sol.status}", sol.status)
    w = complexify(sol.x[:nw])
    w = _phase_normalize(w, h_kk)
    return _clip_power(w, link.power_budget)


def robust_mrt(s: Scenario, k: int) -> np.ndarray:
    """Beamformer maximizing the worst-case intended amplitude of link ``k``."""
    return _solve_candidate(s, k, {})


def interference_caps(s: Scenario, mrt: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
    """``Gamma[k, l]``: worst-case interference power of robust MRT at receiver ``l``."""
    K = s.K
    if mrt is None:
        mrt = [robust_mrt(s, k) for k in range(K)]
    gamma = np.zeros((K, K))
    for k in range(K):
        for ell in range(K):
            if ell != k:
                gamma[k, ell] = worst_interference_amplitude(
                    s.estimate(k, ell), s.uncertainty(k, ell), mrt[k]) ** 2
    return gamma


def pareto_candidate(s: Scenario, k: int, lambda_k, gamma) -> np.ndarray:
    """Efficient beamformer of transmitter ``k`` for interference levels ``lambda_k``.

    Parameters
    ----------
    s : Scenario
    k : int
        Transmitter index.
    lambda_k : sequence of K-1 floats in [0, 1]
        Levels for the receivers ``l != k`` in ascending order.
    gamma : array_like (K, K)
        Interference caps (powers), normally from :func:`interference_caps`.

    Returns
    -------
    numpy.ndarray
        ``w_k`` with ``h_kk^H w_k`` real and nonnegative.
    """
    K = s.K
    lambda_k = np.atleast_1d(np.asarray(lambda_k, dtype=float))
    others = [ell for ell in range(K) if ell != k]
    if lambda_k.shape != (K - 1,):
        raise ValueError(f"expected {K - 1} levels, got {lambda_k.shape[0]}")
    if np.any(lambda_k < 0) or np.any(lambda_k > 1):
        raise ValueError("levels must lie in [0, 1]")
    gamma = np.asarray(gamma, dtype=float)
    caps = {ell: float(np.sqrt(lam * gamma[k, ell])) for ell, lam in zip(others, lambda_k)}
    return _solve_candidate(s, k, caps)


def candidate_with_caps(s: Scenario, k: int, caps: Dict[int, float]) -> np.ndarray:
    """Same program as :func:`pareto_candidate` with explicit amplitude caps."""
    return _solve_candidate(s, k, dict(caps))


def zero_forcing(s: Scenario, k: int) -> np.ndarray:
    """Full-power beamformer orthogonal to every cross-channel estimate of ``k``.

    Returns the zero vector when transmitter ``k`` has fewer antennas than
    there are receivers.
    """
    link = s.links[k]
    h_kk = s.estimate(k, k)
    if link.antennas < s.K:
        return np.zeros(link.antennas, dtype=complex)
    if s.K == 1:
        direction = h_kk
    else:
        Z = np.stack([s.estimate(k, ell) for ell in range(s.K) if ell != k], axis=1)
        direction = complement_projector(Z) @ h_kk
    nd = np.linalg.norm(direction)
    if nd == 0:
        return np.zeros(link.antennas, dtype=complex)
    return np.sqrt(link.power_budget) * direction / nd


def beta_max(s: Scenario, k: int) -> float:
    """``||P h_kk||^2 / ||h_kk||^2`` with ``P`` the projector onto ``h_kl``."""
    ell = 1 - k
    h_kk = s.estimate(k, k)
    proj = orth_projector(s.estimate(k, ell)) @ h_kk
    return float(np.vdot(proj, proj).real / np.vdot(h_kk, h_kk).real)


def two_user_spherical_candidate(s: Scenario, k: int, xi: float, beta: float) -> np.ndarray:
    """Closed-form efficient beamformer for two users with spherical regions.

    ``w = sqrt(xi P) (sqrt(beta) u_par + sqrt(1 - beta) u_perp)`` where
    ``u_par`` and ``u_perp`` are the normalized projections of ``h_kk`` onto
    ``h_kl`` and its orthogonal complement. When ``h_kk`` is parallel to
    ``h_kl`` the family collapses to ``sqrt(xi P) h_kk / ||h_kk||``.
    """
    if s.K != 2:
        raise ValueError("the closed form applies to two users only")
    for ell in range(2):
        shape = s.uncertainty(k, ell).shape
        if not np.allclose(shape, np.eye(shape.shape[0]), atol=1e-12):
            raise ValueError(f"uncertainty ({k}, {ell}) is not spherical")
    if not 0.0 <= xi <= 1.0:
        raise ValueError("xi must lie in [0, 1]")
    bmax = beta_max(s, k)
    if not 0.0 <= beta <= bmax + 1e-12:
        raise ValueError(f"beta must lie in [0, {bmax:.6g}]")
    beta = min(beta, 1.0)
    link = s.links[k]
    h_kk = s.estimate(k, k)
    h_kl = s.estimate(k, 1 - k)
    par = orth_projector(h_kl) @ h_kk
    perp = h_kk - par
    scale = np.sqrt(xi * link.power_budget)
    n_par, n_perp = np.linalg.norm(par), np.linalg.norm(perp)
    if n_perp <= 1e-12 * np.linalg.norm(h_kk):
        return scale * h_kk / np.linalg.norm(h_kk)
    w = np.sqrt(1.0 - beta) * perp / n_perp
    if n_par > 0:
        w = w + np.sqrt(beta) * par / n_par
    return scale * w


def intended_value(s: Scenario, k: int, w) -> float:
    """Worst-case intended amplitude of link ``k`` under beamformer ``w``."""
    return worst_intended_amplitude(s.estimate(k, k), s.uncertainty(k, k), w)

"""Second-order cone programs and a primal-dual interior point solver.

A :class:`ConeProgram` is stated as

    maximize    c^T x
    subject to  ||F_i x + g_i|| <= d_i^T x + e_i      (i = 1..m)
                a_j^T x = b_j                          (j = 1..p)

A constraint with an empty ``F_i`` is a plain linear inequality.

The solver works on the equivalent minimization ``min -c^T x`` with cone
slacks ``s_i = (d_i^T x + e_i, F_i x + g_i)`` and runs a Mehrotra
predictor-corrector method on the homogeneous self-dual embedding

    A^T y + G^T z + c tau = 0,   -A x + b tau = 0,
    -G x + h tau = s,            -c^T x - b^T y - h^T z = kappa,

with Nesterov-Todd scaling. Solutions with ``tau -> 0`` certify primal or
dual infeasibility; otherwise ``(x, y, z, s) / tau`` is optimal.
"""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import scipy.linalg as sla

from . import config

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class ConeProgram:
    objective: np.ndarray
    soc_constraints: List[Tuple[np.ndarray, np.ndarray, np.ndarray, float]] = field(
        default_factory=list)
    linear_eq: List[Tuple[np.ndarray, float]] = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.shape[0]
        socs = []
        for i, (F, g, d, e) in enumerate(self.soc_constraints):
            F = np.asarray(F, dtype=float).reshape(-1, n)
            g = np.asarray(g, dtype=float).reshape(-1)
            d = np.asarray(d, dtype=float).reshape(-1)
            if F.shape[0] != g.shape[0] or d.shape[0] != n:
                raise ValueError(f"soc_constraints[{i}] has inconsistent dimensions")
            socs.append((F, g, d, float(e)))
        eqs = []
        for j, (a, b) in enumerate(self.linear_eq):
            a = np.asarray(a, dtype=float).reshape(-1)
            if a.shape[0] != n:
                raise ValueError(f"linear_eq[{j}] has dimension {a.shape[0]}, expected {n}")
            eqs.append((a, float(b)))
        self.soc_constraints = socs
        self.linear_eq = eqs
        for arr in [self.objective] + [v for c in socs for v in c[:3]] + [a for a, _ in eqs]:
            if not np.all(np.isfinite(arr)):
                raise ValueError("cone program has non-finite data")

    @property
    def variable_dim(self) -> int:
        return self.objective.shape[0]

    def add_soc(self, F, g, d, e) -> None:
        self.soc_constraints.append((F, g, d, e))
        self.__post_init__()

    def violation(self, x) -> float:
        """Largest violation of any constraint at ``x``."""
        x = np.asarray(x, dtype=float)
        v = 0.0
        for F, g, d, e in self.soc_constraints:
            lhs = np.linalg.norm(F @ x + g) if F.shape[0] else 0.0
            v = max(v, lhs - (d @ x + e))
        for a, b in self.linear_eq:
            v = max(v, abs(a @ x - b))
        return float(v)


@dataclass
class ConeSolution:
    x: np.ndarray
    objective_value: float
    status: str
    certified_gap: float
    iterations: int = 0


# --- cone algebra --------------------------------------------------------------
# Every cone is a second-order cone {u : u0 >= ||u1||}; dimension one gives
# the nonnegative half-line. Vectors over the product cone are flat arrays;
# per-cone reductions go through np.add.reduceat on the cone offsets.

class _Cones:
    def __init__(self, dims):
        self.dims = np.asarray(dims, dtype=int)
        self.heads = np.concatenate([[0], np.cumsum(self.dims)[:-1]]).astype(int)
        self.m = int(self.dims.sum())
        self.cid = np.repeat(np.arange(len(self.dims)), self.dims)
        self.jsign = -np.ones(self.m)
        self.jsign[self.heads] = 1.0
        self.e = np.zeros(self.m)
        self.e[self.heads] = 1.0

    def segsum(self, u):
        return np.add.reduceat(u, self.heads)

    def jdot(self, u, v):
        return self.segsum(u * v * self.jsign)

    def jprod(self, u, v):
        h, cid = self.heads, self.cid
        out = u[h][cid] * v + v[h][cid] * u
        out[h] = self.segsum(u * v)
        return out

    def jsolve(self, lam, r):
        """Solve ``lam o x = r`` for x."""
        h, cid = self.heads, self.cid
        l0 = lam[h]
        x0 = (2.0 * l0 * r[h] - self.segsum(lam * r)) / self.jdot(lam, lam)
        out = (r - x0[cid] * lam) / l0[cid]
        out[h] = x0
        return out

    def min_eig(self, u):
        tail = self.segsum(u * u) - u[self.heads] ** 2
        return u[self.heads] - np.sqrt(np.maximum(tail, 0.0))

    def max_step(self, x, d):
        """Largest t with ``x + t d`` in the cone, for interior ``x``."""
        a = self.jdot(d, d)
        b = 2.0 * self.jdot(x, d)
        c = self.jdot(x, x)
        d0, x0 = d[self.heads], x[self.heads]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            disc = b * b - 4.0 * a * c
            q = -0.5 * (b + np.copysign(np.sqrt(np.maximum(disc, 0.0)), b))
            lin = np.abs(a) <= 1e-14 * np.maximum(np.abs(b), np.abs(c))
            r1 = np.where(lin, np.where(b < 0, -c / b, np.inf),
                          np.where(disc >= 0, q / a, np.inf))
            r2 = np.where(lin | (disc < 0) | (q == 0), np.inf, c / q)
            r3 = np.where(d0 < 0, -x0 / d0, np.inf)
        r = np.concatenate([r1, r2, r3])
        r = r[r > 0]
        return float(r.min()) if r.size else np.inf

    def nt_scaling(self, s, z):
        """Nesterov-Todd point: per-cone ``beta`` and flat ``v``.

        The scaling is ``W = beta (2 v v^T - J)`` on each cone; it is symmetric
        and satisfies ``W z == W^{-1} s``.
        """
        h, cid = self.heads, self.cid
        sn = np.sqrt(np.maximum(self.jdot(s, s), 1e-300))
        zn = np.sqrt(np.maximum(self.jdot(z, z), 1e-300))
        sb = s / sn[cid]
        zb = z / zn[cid]
        gamma = np.sqrt(np.maximum((1.0 + self.segsum(sb * zb)) / 2.0, 1e-300))
        wb = (sb + self.jsign * zb) / (2.0 * gamma[cid])
        v = wb.copy()
        v[h] += 1.0
        v /= np.sqrt(2.0 * (wb[h] + 1.0))[cid]
        return np.sqrt(sn / zn), v

    def apply_w(self, beta, v, u):
        return beta[self.cid] * (2.0 * v * self.segsum(v * u)[self.cid] - self.jsign * u)

    def apply_winv(self, beta, v, u):
        jv = self.jsign * v
        return (2.0 * jv * self.segsum(jv * u)[self.cid] - self.jsign * u) / beta[self.cid]

    def apply_winv_rows(self, beta, v, M):
        """``W^{-1} M`` for a matrix ``M`` with one row per cone coordinate."""
        jv = (self.jsign * v)[:, None]
        seg = np.add.reduceat(jv * M, self.heads, axis=0)[self.cid]
        return (2.0 * jv * seg - self.jsign[:, None] * M) / beta[self.cid][:, None]


# --- solver --------------------------------------------------------------------

def _standard_form(p: ConeProgram):
    n = p.variable_dim
    G_rows, h_rows, dims = [], [], []
    for F, g, d, e in p.soc_constraints:
        G_rows.append(-np.vstack([d[None, :], F]))
        h_rows.append(np.concatenate([[e], g]))
        dims.append(1 + F.shape[0])
    G = np.vstack(G_rows) if G_rows else np.zeros((0, n))
    h = np.concatenate(h_rows) if h_rows else np.zeros(0)
    if p.linear_eq:
        A = np.vstack([a for a, _ in p.linear_eq])
        b = np.array([bb for _, bb in p.linear_eq])
    else:
        A = np.zeros((0, n))
        b = np.zeros(0)
    return -p.objective, G, h, A, b, dims


def _reduce_equalities(A, b, rank_rel):
    """Replace ``A x = b`` by an equivalent system with independent rows.

    Returns ``None`` when the rows are inconsistent.
    """
    if A.shape[0] == 0:
        return A, b
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(sv > rank_rel * max(sv[0], 1.0)))
    coeff = U.T @ b
    scale = max(np.linalg.norm(b), 1.0)
    if np.linalg.norm(coeff[r:]) > 1e-9 * scale or np.linalg.norm(b - U @ coeff) > 1e-9 * scale:
        return None
    # rows diag(sv) V^T scaled to unit norm
    return Vt[:r], coeff[:r] / sv[:r]


def solve_cone_program(p: ConeProgram) -> ConeSolution:
    """Solve ``p`` to the configured duality-gap and feasibility tolerances.

    Returns a :class:`ConeSolution` whose ``status`` is ``"optimal"``,
    ``"infeasible"``, ``"unbounded"`` or ``"numerical_failure"``. An optimal
    status is only reported after the original constraints are rechecked at
    the returned point.
    """
    tol = config.get()
    c, G, h, A, b, dims = _standard_form(p)
    reduced = _reduce_equalities(A, b, tol.rank_rel)
    if reduced is None:
        return ConeSolution(np.full(c.shape[0], np.nan), -np.inf, INFEASIBLE, np.inf, 0)
    A, b = reduced
    n, m, q = c.shape[0], G.shape[0], A.shape[0]
    if m == 0:
        raise ValueError("a cone program needs at least one cone constraint")
    cones = _Cones(dims)
    degree = len(dims)
    e_id = cones.e

    N = n + q + m
    Kmat = np.zeros((N, N))
    Kmat[:n, n:n + q] = A.T
    Kmat[n:n + q, :n] = A
    Kmat[n + q:, n + q:] = -np.eye(m)

    def factor(Gs):
        # KKT system in scaled variables: [[0, A', Gs'], [A, 0, 0], [Gs, 0, -I]]
        Kmat[:n, n + q:] = Gs.T
        Kmat[n + q:, :n] = Gs
        return sla.lu_factor(Kmat, check_finite=False)

    def ksolve(lu, rhs):
        sol = sla.lu_solve(lu, rhs, check_finite=False)
        # one step of iterative refinement
        sol += sla.lu_solve(lu, rhs - Kmat @ sol, check_finite=False)
        return sol

    def shift_into_cone(vec):
        shift = -cones.min_eig(vec).min()
        if shift >= -1e-8 * max(np.linalg.norm(vec), 1.0):
            vec += (1.0 + shift) * e_id

    # initial point: least-squares primal and dual estimates shifted into the cone
    lu = factor(G)
    rhs = np.zeros((N, 2))
    rhs[n:n + q, 0] = b
    rhs[n + q:, 0] = h
    rhs[:n, 1] = -c
    sol = ksolve(lu, rhs)
    x = sol[:n, 0].copy()
    s = -sol[n + q:, 0].copy()
    y = sol[n:n + q, 1].copy()
    z = sol[n + q:, 1].copy()
    shift_into_cone(s)
    shift_into_cone(z)
    tau, kappa = 1.0, 1.0

    resx0 = max(1.0, np.linalg.norm(c))
    resz0 = max(1.0, np.linalg.norm(np.concatenate([b, h])))
    status = NUMERICAL_FAILURE
    gap = np.inf
    it = 0

    for it in range(tol.max_iter + 1):
        rx = A.T @ y + G.T @ z + c * tau
        ry = -A @ x + b * tau
        rz = -G @ x + h * tau - s
        rt = -c @ x - b @ y - h @ z - kappa
        mu = (s @ z + tau * kappa) / (degree + 1)

        # termination tests
        cx, by_hz = c @ x, b @ y + h @ z
        pcost, dcost = cx / tau, -by_hz / tau
        gap = (s @ z) / tau ** 2
        pres = np.linalg.norm(np.concatenate([ry, rz])) / tau / resz0
        dres = np.linalg.norm(rx) / tau / resx0
        if pcost != 0 and dcost != 0 and np.sign(pcost) == np.sign(dcost):
            relgap = gap / min(abs(pcost), abs(dcost))
        else:
            relgap = np.inf
        if pres <= tol.feas and dres <= tol.feas and (gap <= tol.gap_abs or relgap <= tol.gap_rel):
            status = OPTIMAL
            break
        if by_hz < 0 and np.linalg.norm(A.T @ y + G.T @ z) / -by_hz <= tol.feas:
            status = INFEASIBLE
            break
        if cx < 0 and np.linalg.norm(np.concatenate([A @ x, G @ x + s])) / -cx <= tol.feas:
            status = UNBOUNDED
            break
        if it == tol.max_iter:
            break

        beta, v = cones.nt_scaling(s, z)
        lam = cones.apply_w(beta, v, z)
        Gs = cones.apply_winv_rows(beta, v, G)
        if not (np.all(np.isfinite(Gs)) and np.all(np.isfinite(lam))):
            break
        try:
            lu = factor(Gs)
        except (np.linalg.LinAlgError, ValueError):
            break
        lamlam = cones.jprod(lam, lam)
        hs = cones.apply_winv(beta, v, h)
        sol_tau = ksolve(lu, np.concatenate([-c, b, hs]))
        x1, y1, z1 = sol_tau[:n], sol_tau[n:n + q], sol_tau[n + q:]
        denom = kappa / tau - (c @ x1 + b @ y1 + hs @ z1)

        def solve_newton(bx, by, bz, bt, bs, bk):
            # dz and ds come back in scaled form: W dz and W^{-1} ds
            lam_bs = cones.jsolve(lam, bs)
            rhs = np.concatenate([bx, -by, cones.apply_winv(beta, v, -bz) - lam_bs])
            sol = ksolve(lu, rhs)
            x2, y2, z2 = sol[:n], sol[n:n + q], sol[n + q:]
            dtau = (bt + bk / tau + c @ x2 + b @ y2 + hs @ z2) / denom
            dz_sc = z2 + dtau * z1
            return (x2 + dtau * x1, y2 + dtau * y1, dz_sc, lam_bs - dz_sc, dtau,
                    (bk - kappa * dtau) / tau)

        def direction(sigma, bs, bk):
            bx, by, bz, bt = (-(1 - sigma) * r for r in (rx, ry, rz, rt))
            d = solve_newton(bx, by, bz, bt, bs, bk)
            zero_m = np.zeros(m)
            for _ in range(2):
                # refine against the unscaled equations, where W amplifies errors
                dx, dy, dz_sc, ds_sc, dtau, dkappa = d
                dz = cones.apply_winv(beta, v, dz_sc)
                ds = cones.apply_w(beta, v, ds_sc)
                ex = bx - (A.T @ dy + G.T @ dz + c * dtau)
                ey = by - (-A @ dx + b * dtau)
                ez = bz - (-G @ dx + h * dtau - ds)
                et = bt - (-c @ dx - b @ dy - h @ dz - dkappa)
                corr = solve_newton(ex, ey, ez, et, zero_m, 0.0)
                d = tuple(a + e for a, e in zip(d, corr))
            return d

        def step_length(ds_scaled, dz_scaled, dtau, dkappa):
            t = min(cones.max_step(lam, ds_scaled), cones.max_step(lam, dz_scaled))
            if dtau < 0:
                t = min(t, -tau / dtau)
            if dkappa < 0:
                t = min(t, -kappa / dkappa)
            return t

        # predictor
        dx, dy, dz_sc, ds_sc, dtau, dkappa = direction(0.0, -lamlam, -kappa * tau)
        alpha = min(1.0, step_length(ds_sc, dz_sc, dtau, dkappa))
        sigma = (1.0 - alpha) ** 3

        # corrector
        bs = sigma * mu * e_id - lamlam - cones.jprod(ds_sc, dz_sc)
        bk = sigma * mu - kappa * tau - dtau * dkappa
        dx, dy, dz_sc, ds_sc, dtau, dkappa = direction(sigma, bs, bk)
        alpha = min(1.0, 0.99 * step_length(ds_sc, dz_sc, dtau, dkappa))
        if not np.isfinite(alpha) or alpha <= 0:
            break
        dz = cones.apply_winv(beta, v, dz_sc)
        ds = cones.apply_w(beta, v, ds_sc)

        x += alpha * dx
        y += alpha * dy
        z += alpha * dz
        s += alpha * ds
        tau += alpha * dtau
        kappa += alpha * dkappa
        if not (np.all(np.isfinite(x)) and np.isfinite(tau) and tau > 0):
            break

    if status == OPTIMAL:
        xs = x / tau
        objective = float(p.objective @ xs)
        if p.violation(xs) >= tol.cone_violation or gap >= tol.cone_gap:
            status = NUMERICAL_FAILURE
        return ConeSolution(xs, objective, status, float(max(gap, 0.0)), it)
    if status == INFEASIBLE:
        return ConeSolution(np.full(n, np.nan), -np.inf, status, np.inf, it)
    if status == UNBOUNDED:
        return ConeSolution(np.full(n, np.nan), np.inf, status, np.inf, it)
    xs = x / tau if tau > 0 else np.full(n, np.nan)
    obj = float(p.objective @ xs) if np.all(np.isfinite(xs)) else np.nan
    return ConeSolution(xs, obj, NUMERICAL_FAILURE, float(gap), it)

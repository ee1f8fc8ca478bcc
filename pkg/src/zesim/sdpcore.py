"""Standard-form semidefinite programs and a dense primal-dual interior-point solver.

A problem is stated over a list of variable blocks::

    min/max  sum_j <C_j, X_j>
    s.t.     sum_j <A_ij, X_j> = b_i,      i = 1..m
             X_j in cone_j

with ``<A, X> = Re tr(A X)`` for matrix blocks and the dot product for vector
blocks.  Block kinds:

``psd``     Hermitian positive semidefinite ``d x d`` matrix
``nonneg``  nonnegative vector of length ``d``
``free``    unconstrained real vector of length ``d``
``hfree``   unconstrained Hermitian ``d x d`` matrix

For ``min`` problems the conic dual is ``max b.y  s.t.  C_j - sum_i y_i A_ij in cone_j^*``;
for ``max`` problems it is ``min b.y  s.t.  sum_i y_i A_ij - C_j in cone_j^*``.
Free blocks turn into equality constraints in the dual.

Hermitian blocks are solved through the real symmetric embedding
``X -> [[Re X, -Im X], [Im X, Re X]]`` with coefficients halved, so every
reported value refers to the complex program.  The iteration is a
Mehrotra predictor-corrector path-following method with Nesterov-Todd
scaling; the Newton system is reduced to the Schur complement (augmented with
the free variables) and factored densely.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import linalg as la

log = logging.getLogger(__name__)

BLOCK_KINDS = ("psd", "nonneg", "free", "hfree")
STATUSES = ("optimal", "near-optimal", "primal-infeasible", "dual-infeasible",
            "numerical-failure")


class ProblemTooLarge(ValueError):
    """The dense Schur complement would not fit in memory."""


@dataclass(frozen=True)
class Block:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("block dimension must be >= 1")

    @property
    def is_matrix(self) -> bool:
        return self.kind in ("psd", "hfree")


@dataclass
class Constraint:
    """``sum_j <coeffs[j], X_j> = rhs``; blocks not named have zero coefficient."""

    coeffs: dict[int, np.ndarray]
    rhs: float


@dataclass
class SdpProblem:
    blocks: list[Block]
    objective: dict[int, np.ndarray]
    constraints: list[Constraint]
    sense: str = "min"

    def validate(self) -> None:
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if not self.constraints:
            raise ValueError("constraint list is empty")
        for k, c in enumerate(self.constraints):
            for j, a in c.coeffs.items():
                _check_coeff(self.blocks, j, a, f"constraint {k}")
            if not np.isfinite(c.rhs):
                raise ValueError(f"constraint {k} has non-finite rhs")
        for j, a in self.objective.items():
            _check_coeff(self.blocks, j, a, "objective")

    def zero_point(self) -> list[np.ndarray]:
        out = []
        for blk in self.blocks:
            if blk.is_matrix:
                out.append(np.zeros((blk.dim, blk.dim), dtype=complex))
            else:
                out.append(np.zeros(blk.dim))
        return out

    def evaluate(self, point: list[np.ndarray]) -> tuple[float, np.ndarray]:
        """Objective value and constraint left-hand sides at ``point``."""
        obj = sum(_inner(a, point[j]) for j, a in self.objective.items())
        lhs = np.array([sum(_inner(a, point[j]) for j, a in c.coeffs.items())
                        for c in self.constraints])
        return float(obj), lhs


def _check_coeff(blocks, j, a, where):
    if not 0 <= j < len(blocks):
        raise ValueError(f"{where}: block index {j} out of range")
    blk = blocks[j]
    a = np.asarray(a)
    if blk.is_matrix:
        if a.shape != (blk.dim, blk.dim):
            raise ValueError(f"{where}: coefficient shape {a.shape} for block {j} of dim {blk.dim}")
        if not la.is_hermitian(a, 1e-10):
            raise ValueError(f"{where}: coefficient on block {j} is not Hermitian")
    elif a.shape != (blk.dim,) or np.iscomplexobj(a) and np.abs(a.imag).max() > 0:
        raise ValueError(f"{where}: bad vector coefficient for block {j}")


def _inner(a: np.ndarray, x: np.ndarray) -> float:
    a = np.asarray(a)
    if a.ndim == 2:
        return float(np.real(np.vdot(a.conj().T, x)))  # Re tr(A X)
    return float(np.dot(np.real(a), np.real(x)))


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    diverge_window: int = 10
    stall_window: int = 15
    max_constraints: int = 8000
    verbose: bool = False


@dataclass
class SdpSolution:
    status: str
    primal_value: float
    dual_value: float
    primal: list[np.ndarray]
    dual: np.ndarray
    slack: list[np.ndarray]
    iterations: int
    residuals: tuple[float, float, float]
    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def summary(self) -> dict:
        return {
            "status": self.status,
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "iterations": self.iterations,
            "residuals": {"primal": self.residuals[0], "dual": self.residuals[1],
                          "gap": self.residuals[2]},
        }


# ---------------------------------------------------------------------------
# real standard form

def _embed(a: np.ndarray) -> np.ndarray:
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def _unembed(y: np.ndarray, d: int) -> np.ndarray:
    return 0.5 * (y[:d, :d] + y[d:, d:]) + 0.5j * (y[d:, :d] - y[:d, d:])


@dataclass
class _SBlock:
    index: int
    d: int
    n: int
    complex_: bool
    C: np.ndarray
    A: np.ndarray  # m x n*n
    rows: np.ndarray  # constraints with nonzero coefficient on this block


class _RealForm:
    """Real symmetric / orthant / free representation of an :class:`SdpProblem` (min sense)."""

    def __init__(self, p: SdpProblem):
        self.p = p
        self.sign = 1.0 if p.sense == "min" else -1.0
        m = len(p.constraints)
        self.m = m
        self.b = np.array([float(c.rhs) for c in p.constraints])
        self.sblocks: list[_SBlock] = []
        lin_cols, free_cols = [], []
        self.lin_map: list[tuple[int, int, int]] = []  # (block, offset, dim)
        self.free_map: list[tuple[int, int, int]] = []
        c_lin, c_free = [], []
        nl = nf = 0
        for j, blk in enumerate(p.blocks):
            cj = p.objective.get(j)
            col = [c.coeffs.get(j) for c in p.constraints]
            if blk.kind == "psd":
                d = blk.dim
                cplx = any(a is not None and np.iscomplexobj(a) and np.abs(np.imag(a)).max() > 0
                           for a in col + [cj])
                n = 2 * d if cplx else d
                A = np.zeros((m, n * n))
                for i, a in enumerate(col):
                    if a is not None:
                        a = la.hermitize(np.asarray(a, dtype=complex))
                        A[i] = (0.5 * _embed(a) if cplx else a.real).ravel()
                if cj is None:
                    C = np.zeros((n, n))
                else:
                    cj = la.hermitize(np.asarray(cj, dtype=complex))
                    C = 0.5 * _embed(cj) if cplx else cj.real.copy()
                rows = np.flatnonzero(np.abs(A).max(axis=1) > 0)
                self.sblocks.append(_SBlock(j, d, n, cplx, self.sign * C, A, rows))
            else:
                if blk.kind == "hfree":
                    size = blk.dim * blk.dim
                    conv = la.herm_to_vec
                else:
                    size = blk.dim
                    conv = lambda a: np.real(np.asarray(a, dtype=complex))
                A = np.zeros((m, size))
                for i, a in enumerate(col):
                    if a is not None:
                        A[i] = conv(la.hermitize(np.asarray(a)) if blk.kind == "hfree" else a)
                C = np.zeros(size) if cj is None else conv(
                    la.hermitize(np.asarray(cj)) if blk.kind == "hfree" else cj)
                if blk.kind == "nonneg":
                    self.lin_map.append((j, nl, size))
                    lin_cols.append(A)
                    c_lin.append(self.sign * C)
                    nl += size
                else:
                    self.free_map.append((j, nf, size))
                    free_cols.append(A)
                    c_free.append(self.sign * C)
                    nf += size
        self.Al = np.hstack(lin_cols) if lin_cols else np.zeros((m, 0))
        self.Cl = np.concatenate(c_lin) if c_lin else np.zeros(0)
        self.Af = np.hstack(free_cols) if free_cols else np.zeros((m, 0))
        self.Cf = np.concatenate(c_free) if c_free else np.zeros(0)
        self.nf_total = nf
        self.free_keep = np.arange(nf)

    def full_matrix(self) -> np.ndarray:
        parts = [s.A for s in self.sblocks] + [self.Al, self.Af]
        return np.hstack(parts)

    def drop_free_columns(self, keep: np.ndarray) -> None:
        self.free_keep = keep
        self.Af = self.Af[:, keep]
        self.Cf = self.Cf[keep]

    def restrict(self, keep: np.ndarray) -> None:
        self.b = self.b[keep]
        self.m = len(keep)
        for s in self.sblocks:
            s.A = s.A[keep]
            s.rows = np.flatnonzero(np.abs(s.A).max(axis=1) > 0)
        self.Al = self.Al[keep]
        self.Af = self.Af[keep]

    # user-level reconstruction -------------------------------------------------
    def to_user(self, Xs, xl, xf_kept) -> list[np.ndarray]:
        xf = np.zeros(self.nf_total)
        xf[self.free_keep] = xf_kept
        out: list[np.ndarray | None] = [None] * len(self.p.blocks)
        for s, X in zip(self.sblocks, Xs):
            out[s.index] = _unembed(X, s.d) if s.complex_ else X.astype(complex)
        for j, off, size in self.lin_map:
            out[j] = xl[off:off + size].copy()
        for j, off, size in self.free_map:
            v = xf[off:off + size]
            if self.p.blocks[j].kind == "hfree":
                out[j] = la.vec_to_herm(v, self.p.blocks[j].dim)
            else:
                out[j] = v.copy()
        return out  # type: ignore[return-value]


def _presolve(rf: _RealForm, tol: float) -> tuple[np.ndarray, str | None]:
    """Drop unused free variables and linearly dependent constraints.

    Returns the kept constraint rows and, if the problem is detected to be
    infeasible or unbounded, a status message.
    """
    used = np.abs(rf.Af).max(axis=0, initial=0.0) > 0
    if np.any(~used & (np.abs(rf.Cf) > 0)):
        return np.arange(rf.m), "dual-infeasible: free variable with cost but no constraint"
    if not np.all(used):
        rf.drop_free_columns(np.flatnonzero(used))
    A = rf.full_matrix()
    _, r, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return np.arange(0), "primal-infeasible: all constraint rows are zero"
    rank = int(np.sum(diag > 1e-10 * diag[0]))
    keep = np.sort(piv[:rank])
    if rank == rf.m:
        return keep, None
    drop = np.setdiff1d(np.arange(rf.m), keep)
    coef, *_ = np.linalg.lstsq(A[keep].T, A[drop].T, rcond=None)
    resid = rf.b[drop] - coef.T @ rf.b[keep]
    if np.abs(resid).max() > tol * (1.0 + np.abs(rf.b).max()):
        return keep, "primal-infeasible: equality constraints are inconsistent"
    return keep, None


# ---------------------------------------------------------------------------
# interior point iteration

def _jordan(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 0.5 * (a @ b + b @ a)


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _max_step_psd(lam_isqrt: np.ndarray, d: np.ndarray) -> float:
    """Largest a with  Lambda + a*d  PSD, given Lambda^{-1/2} as a vector."""
    g = lam_isqrt[:, None] * d * lam_isqrt[None, :]
    mn = np.linalg.eigvalsh(_sym(g))[0]
    return np.inf if mn >= 0 else -1.0 / mn


def _max_step_lin(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


class _Solver:
    def __init__(self, rf: _RealForm, opts: SolverOptions):
        self.rf = rf
        self.opts = opts

    def initial_point(self):
        rf = self.rf
        Xs, Zs = [], []
        normb = 1.0 + np.abs(rf.b)
        for s in rf.sblocks:
            n = s.n
            na = np.linalg.norm(s.A, axis=1)
            xi = max(10.0, np.sqrt(n), np.sqrt(n) * float(np.max(normb / (1.0 + na))))
            eta = max(10.0, np.sqrt(n), float(na.max(initial=0.0)), np.linalg.norm(s.C))
            Xs.append(xi * np.eye(n))
            Zs.append(eta * np.eye(n))
        nl = rf.Al.shape[1]
        if nl:
            na = np.linalg.norm(rf.Al, axis=0)
            xi = max(10.0, float(np.max(normb)) / (1.0 + float(na.min())))
            eta = max(10.0, float(na.max()), float(np.abs(rf.Cl).max(initial=0.0)))
            xl, zl = xi * np.ones(nl), eta * np.ones(nl)
        else:
            xl, zl = np.zeros(0), np.zeros(0)
        xf = np.zeros(rf.Af.shape[1])
        y = np.zeros(rf.m)
        return Xs, xl, xf, y, Zs, zl

    def residuals(self, Xs, xl, xf, y, Zs, zl):
        rf = self.rf
        Ax = rf.Al @ xl + rf.Af @ xf
        for s, X in zip(rf.sblocks, Xs):
            Ax = Ax + s.A @ X.ravel()
        rp = rf.b - Ax
        Rds = [s.C - (y @ s.A).reshape(s.n, s.n) - Z for s, Z in zip(rf.sblocks, Zs)]
        Rds = [_sym(r) for r in Rds]
        Rdl = rf.Cl - rf.Al.T @ y - zl
        Rdf = rf.Cf - rf.Af.T @ y
        pobj = float(sum(np.vdot(s.C, X) for s, X in zip(rf.sblocks, Xs))
                     + rf.Cl @ xl + rf.Cf @ xf)
        dobj = float(rf.b @ y)
        return rp, Rds, Rdl, Rdf, pobj, dobj

    def run(self):
        rf, opts = self.rf, self.opts
        Xs, xl, xf, y, Zs, zl = self.initial_point()
        nu = sum(s.n for s in rf.sblocks) + xl.size
        normb = 1.0 + np.linalg.norm(rf.b)
        normc = 1.0 + np.sqrt(sum(np.linalg.norm(s.C) ** 2 for s in rf.sblocks)
                              + np.linalg.norm(rf.Cl) ** 2 + np.linalg.norm(rf.Cf) ** 2)
        gamma = 0.9
        loose = np.sqrt(max(opts.feas_tol, opts.gap_tol))
        history: list[tuple[float, float]] = []
        best = None
        status = "numerical-failure"
        messages: list[str] = []
        it = 0
        for it in range(opts.max_iter + 1):
            rp, Rds, Rdl, Rdf, pobj, dobj = self.residuals(Xs, xl, xf, y, Zs, zl)
            dnorm = np.sqrt(sum(np.linalg.norm(r) ** 2 for r in Rds)
                            + np.linalg.norm(Rdl) ** 2 + np.linalg.norm(Rdf) ** 2)
            pres = np.linalg.norm(rp) / normb
            dres = dnorm / normc
            compl = float(sum(np.vdot(X, Z) for X, Z in zip(Xs, Zs)) + xl @ zl)
            gap = max(abs(pobj - dobj), abs(compl)) / (1.0 + abs(pobj) + abs(dobj))
            score = max(pres, dres, gap)
            if best is None or score < best[0]:
                best = (score, [X.copy() for X in Xs], xl.copy(), xf.copy(), y.copy(), it,
                        (pres, dres, gap))
            if opts.verbose:
                log.info("it %3d pobj %+.10e dobj %+.10e pres %.2e dres %.2e gap %.2e",
                         it, pobj, dobj, pres, dres, gap)
            if pres <= opts.feas_tol and dres <= opts.feas_tol and gap <= opts.gap_tol:
                status = "optimal"
                break
            # Farkas-type infeasibility certificates
            aty_norm = np.sqrt(sum(np.linalg.norm(_sym((y @ s.A).reshape(s.n, s.n) + Z)) ** 2
                                   for s, Z in zip(rf.sblocks, Zs))
                               + np.linalg.norm(rf.Al.T @ y + zl) ** 2
                               + np.linalg.norm(rf.Af.T @ y) ** 2)
            if dobj > 0 and aty_norm / dobj < opts.feas_tol and abs(dobj) > 1e6:
                status = "primal-infeasible"
                break
            if pobj < 0 and abs(pobj) > 1e6 and np.linalg.norm(rf.b - rp) / abs(pobj) < opts.feas_tol:
                status = "dual-infeasible"
                break
            history.append((pres, dres))
            w = opts.diverge_window
            if len(history) > w and pres > 1e-6:
                recent = [h[0] for h in history[-w - 1:]]
                if all(b > a for a, b in zip(recent, recent[1:])):
                    status = "primal-infeasible"
                    messages.append("primal residual grew over %d iterations" % w)
                    break
            if len(history) > w and dres > 1e-6:
                recent = [h[1] for h in history[-w - 1:]]
                if all(b > a for a, b in zip(recent, recent[1:])):
                    status = "dual-infeasible"
                    messages.append("dual residual grew over %d iterations" % w)
                    break
            if it == opts.max_iter:
                messages.append("iteration cap reached")
                break
            # stall: no progress on the best score for a while
            if it - best[5] >= opts.stall_window and best[0] <= loose:
                messages.append("stalled at score %.2e" % best[0])
                break
            try:
                step = self.step(Xs, xl, xf, y, Zs, zl, rp, Rds, Rdl, Rdf, nu, gamma)
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, la.EigenError) as exc:
                messages.append(f"linear algebra failure: {exc}")
                break
            if step is None:
                messages.append("step length collapsed")
                break
            Xs, xl, xf, y, Zs, zl, ap, ad = step
            gamma = 0.9 + 0.09 * min(ap, ad)
        if status == "numerical-failure" and best is not None and best[0] <= loose:
            status = "near-optimal"
        return status, best, (Xs, xl, xf, y, Zs, zl), it, messages

    def step(self, Xs, xl, xf, y, Zs, zl, rp, Rds, Rdl, Rdf, nu, gamma):
        rf = self.rf
        m = rf.m
        # NT scaling per PSD block
        scal = []
        M = np.zeros((m, m))
        for s, X, Z in zip(rf.sblocks, Xs, Zs):
            L = np.linalg.cholesky(X)
            Lz = np.linalg.cholesky(Z)
            U, lam, Vt = np.linalg.svd(Lz.T @ L)
            isq = 1.0 / np.sqrt(lam)
            R = (L @ Vt.T) * isq[None, :]
            Rinv = (np.sqrt(lam)[:, None] * Vt) @ scipy.linalg.solve_triangular(
                L, np.eye(s.n), lower=True)
            W = R @ R.T
            scal.append((lam, R, Rinv, W))
            rows = s.rows
            if rows.size:
                Ar = s.A[rows].reshape(-1, s.n, s.n)
                G = np.matmul(np.matmul(W, Ar), W).reshape(rows.size, -1)
                M[np.ix_(rows, rows)] += s.A[rows] @ G.T
        if xl.size:
            dl = np.sqrt(xl / zl)
            laml = np.sqrt(xl * zl)
            M += (rf.Al * (dl * dl)[None, :]) @ rf.Al.T
        else:
            dl = laml = np.zeros(0)
        M = _sym(M)
        nf = rf.Af.shape[1]
        kkt_solve = self._factor(M, rf.Af)

        def direction(rcs, rcl):
            rhs = rp.copy()
            terms = []
            for s, (lam, R, Rinv, W), rc, Rd in zip(rf.sblocks, scal, rcs, Rds):
                H = 2.0 * rc / (lam[:, None] + lam[None, :])
                T = _sym(R @ H @ R.T)
                terms.append(T)
                rhs -= s.A @ (T - W @ Rd @ W).ravel()
            if xl.size:
                tl = dl * (rcl / laml)
                rhs -= rf.Al @ (tl - dl * dl * Rdl)
            else:
                tl = np.zeros(0)
            dy, dxf = kkt_solve(rhs, Rdf)
            dXs, dZs = [], []
            for s, (lam, R, Rinv, W), T, Rd in zip(rf.sblocks, scal, terms, Rds):
                dZ = _sym(Rd - (dy @ s.A).reshape(s.n, s.n))
                dX = _sym(T - W @ dZ @ W)
                dXs.append(dX)
                dZs.append(dZ)
            dzl = Rdl - rf.Al.T @ dy
            dxl = tl - dl * dl * dzl
            return dXs, dxl, dxf, dy, dZs, dzl

        def steplengths(dXs, dxl, dZs, dzl):
            ap = ad = np.inf
            for (lam, R, Rinv, W), dX, dZ in zip(scal, dXs, dZs):
                isq = 1.0 / np.sqrt(lam)
                ap = min(ap, _max_step_psd(isq, Rinv @ dX @ Rinv.T))
                ad = min(ad, _max_step_psd(isq, R.T @ dZ @ R))
            if xl.size:
                ap = min(ap, _max_step_lin(xl, dxl))
                ad = min(ad, _max_step_lin(zl, dzl))
            return ap, ad

        mu = (sum(np.vdot(X, Z) for X, Z in zip(Xs, Zs)) + xl @ zl) / max(nu, 1)
        # predictor
        rcs = [-np.diag(lam * lam) for (lam, *_r) in scal]
        rcl = -laml * laml
        dXa, dxla, dxfa, dya, dZa, dzla = direction(rcs, rcl)
        ap, ad = steplengths(dXa, dxla, dZa, dzla)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = (sum(np.vdot(X + ap * dX, Z + ad * dZ) for X, Z, dX, dZ in zip(Xs, Zs, dXa, dZa))
                  + (xl + ap * dxla) @ (zl + ad * dzla)) / max(nu, 1)
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
        # corrector
        rcs = []
        for (lam, R, Rinv, W), dX, dZ in zip(scal, dXa, dZa):
            dxt = Rinv @ dX @ Rinv.T
            dzt = R.T @ dZ @ R
            rcs.append(sigma * mu * np.eye(lam.size) - np.diag(lam * lam) - _jordan(dxt, dzt))
        if xl.size:
            rcl = sigma * mu - laml * laml - (dxla / dl) * (dzla * dl)
        dXs, dxl, dxf, dy, dZs, dzl = direction(rcs, rcl)
        ap, ad = steplengths(dXs, dxl, dZs, dzl)
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
        if max(ap, ad) < 1e-12:
            return None
        Xs = [_sym(X + ap * dX) for X, dX in zip(Xs, dXs)]
        Zs = [_sym(Z + ad * dZ) for Z, dZ in zip(Zs, dZs)]
        return (Xs, xl + ap * dxl, xf + ap * dxf, y + ad * dy, Zs, zl + ad * dzl, ap, ad)

    @staticmethod
    def _factor(M: np.ndarray, Af: np.ndarray):
        m, nf = Af.shape
        if nf == 0:
            try:
                cho = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
                return lambda r1, r2: (scipy.linalg.cho_solve(cho, r1, check_finite=False),
                                       np.zeros(0))
            except scipy.linalg.LinAlgError:
                pass
        K = np.zeros((m + nf, m + nf))
        K[:m, :m] = M
        K[:m, m:] = Af
        K[m:, :m] = Af.T
        # symmetric diagonal scaling keeps rows of very different size comparable
        dscale = np.sqrt(np.maximum(np.abs(np.diag(K)), 0.0))
        dscale[m:] = 1.0
        dscale[dscale == 0.0] = 1.0
        Ks = K / dscale[:, None] / dscale[None, :]
        try:
            with warnings.catch_warnings():
                # singular pivots are detected below and handled by the fallback
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu = scipy.linalg.lu_factor(Ks, check_finite=False)
            if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) == 0.0:
                raise scipy.linalg.LinAlgError("singular KKT matrix")
            base = lambda r: scipy.linalg.lu_solve(lu, r, check_finite=False)
        except (ValueError, scipy.linalg.LinAlgError):
            pinv = np.linalg.pinv(Ks, rcond=1e-14)
            base = lambda r: pinv @ r

        def solve(r1, r2):
            rhs = np.concatenate([r1, r2]) / dscale
            sol = base(rhs)
            for _ in range(2):
                sol = sol + base(rhs - Ks @ sol)
            sol = sol / dscale
            return sol[:m], sol[m:]

        return solve


def _user_slack(p: SdpProblem, y: np.ndarray) -> list[np.ndarray]:
    """Dual slack per block: ``C - A^T y`` (min) or ``A^T y - C`` (max)."""
    out = []
    sgn = 1.0 if p.sense == "min" else -1.0
    for j, blk in enumerate(p.blocks):
        if blk.is_matrix:
            z = np.zeros((blk.dim, blk.dim), dtype=complex)
        else:
            z = np.zeros(blk.dim)
        c = p.objective.get(j)
        if c is not None:
            z = z + np.asarray(c)
        for yi, con in zip(y, p.constraints):
            a = con.coeffs.get(j)
            if a is not None and yi != 0.0:
                z = z - yi * np.asarray(a)
        z = sgn * z
        if blk.is_matrix:
            z = la.hermitize(z)
        else:
            z = np.real(z)
        out.append(z)
    return out


def solve(p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve ``p``; the returned dual vector follows the sign conventions in the module doc."""
    opts = opts or SolverOptions()
    p.validate()
    if len(p.constraints) > opts.max_constraints:
        raise ProblemTooLarge(f"{len(p.constraints)} constraints exceed the dense solver limit "
                              f"{opts.max_constraints}")
    rf = _RealForm(p)
    m_full = rf.m
    keep, problem = _presolve(rf, opts.feas_tol)
    if problem is not None:
        zero = p.zero_point()
        return SdpSolution(problem.split(":")[0], np.nan, np.nan, zero, np.zeros(m_full),
                           _user_slack(p, np.zeros(m_full)), 0, (np.inf, np.nan, np.nan),
                           [problem])
    if keep.size < m_full:
        rf.restrict(keep)
    solver = _Solver(rf, opts)
    status, best, last, iters, messages = solver.run()
    if status == "optimal":
        Xs, xl, xf, y = last[0], last[1], last[2], last[3]
    elif status in ("primal-infeasible", "dual-infeasible"):
        Xs, xl, xf, y = last[0], last[1], last[2], last[3]
    else:
        _, Xs, xl, xf, y, _, _ = best
    y_full = np.zeros(m_full)
    y_full[keep] = rf.sign * y
    primal = rf.to_user(Xs, xl, xf)
    pval, lhs = p.evaluate(primal)
    dval = float(np.dot([c.rhs for c in p.constraints], y_full))
    slack = _user_slack(p, y_full)
    normb = 1.0 + np.linalg.norm([c.rhs for c in p.constraints])
    pres = float(np.linalg.norm(lhs - np.array([c.rhs for c in p.constraints]))) / normb
    dres = _dual_residual(p, slack)
    gap = abs(pval - dval) / (1.0 + abs(pval) + abs(dval))
    return SdpSolution(status, pval, dval, primal, y_full, slack, iters, (pres, dres, gap),
                       messages)


def _dual_residual(p: SdpProblem, slack: list[np.ndarray]) -> float:
    """Dual infeasibility: free-block slack norm plus cone violation of the others."""
    worst = 0.0
    for blk, z in zip(p.blocks, slack):
        if blk.kind in ("free", "hfree"):
            worst = max(worst, float(np.linalg.norm(z)))
        elif blk.kind == "psd":
            worst = max(worst, -la.min_eigenvalue(z))
        else:
            worst = max(worst, -float(np.min(z)))
    return worst


@dataclass
class FeasibilityReport:
    ok: bool
    max_equality_residual: float
    cone_margins: dict[int, float]
    objective: float

    @property
    def worst_margin(self) -> float:
        return min([-self.max_equality_residual] + list(self.cone_margins.values()))


def verify_feasibility(p: SdpProblem, point: list[np.ndarray], tol: float) -> FeasibilityReport:
    """Evaluate every equality residual and the cone margin of every conic block."""
    if len(point) != len(p.blocks):
        raise ValueError("point has wrong number of blocks")
    for blk, x in zip(p.blocks, point):
        shape = (blk.dim, blk.dim) if blk.is_matrix else (blk.dim,)
        if np.shape(x) != shape:
            raise ValueError(f"block value of shape {np.shape(x)} does not match {shape}")
    obj, lhs = p.evaluate(point)
    rhs = np.array([c.rhs for c in p.constraints])
    eq = float(np.abs(lhs - rhs).max(initial=0.0))
    margins: dict[int, float] = {}
    for j, (blk, x) in enumerate(zip(p.blocks, point)):
        if blk.kind == "psd":
            margins[j] = la.min_eigenvalue(x)
        elif blk.kind == "nonneg":
            margins[j] = float(np.min(np.real(x)))
    ok = eq <= tol and all(v >= -tol for v in margins.values())
    return FeasibilityReport(ok, eq, margins, obj)


def dualize(p: SdpProblem) -> SdpProblem:
    """Lagrangian dual of ``p`` written again in standard form.

    Variables: one free block holding the multipliers ``y`` and one slack block
    per conic block of ``p``.  The result has the opposite sense.
    """
    p.validate()
    m = len(p.constraints)
    blocks = [Block("free", m)]
    slack_index: dict[int, int] = {}
    for j, blk in enumerate(p.blocks):
        if blk.kind in ("psd", "nonneg"):
            slack_index[j] = len(blocks)
            blocks.append(Block(blk.kind, blk.dim))
    sgn = 1.0 if p.sense == "min" else -1.0
    constraints: list[Constraint] = []
    for j, blk in enumerate(p.blocks):
        c = p.objective.get(j)
        if blk.is_matrix:
            basis = la.hermitian_basis(blk.dim)
            units = list(basis)
        else:
            units = list(np.eye(blk.dim))
        for g in units:
            # min: A^T y + Z = C ; max: A^T y - Z = C
            row = np.array([_inner(con.coeffs[j], g) if j in con.coeffs else 0.0
                            for con in p.constraints])
            coeffs: dict[int, np.ndarray] = {0: row}
            if j in slack_index:
                coeffs[slack_index[j]] = sgn * g
            rhs = _inner(c, g) if c is not None else 0.0
            constraints.append(Constraint(coeffs, rhs))
    objective = {0: np.array([c.rhs for c in p.constraints], dtype=float)}
    return SdpProblem(blocks, objective, constraints, "max" if p.sense == "min" else "min")


def dump_problem(p: SdpProblem) -> str:
    """Sparse triplet listing ``constraint block row col re im`` (constraint -1 is the objective)."""
    lines = [f"# sense {p.sense}", "# blocks " + " ".join(f"{b.kind}:{b.dim}" for b in p.blocks)]
    entries = [(-1, p.objective, 0.0)] + [(i, c.coeffs, c.rhs) for i, c in enumerate(p.constraints)]
    for i, coeffs, rhs in entries:
        if i >= 0:
            lines.append(f"# rhs {i} {rhs:.17g}")
        for j in sorted(coeffs):
            a = np.asarray(coeffs[j], dtype=complex)
            a2 = a if a.ndim == 2 else a[:, None]
            for r, c in zip(*np.nonzero(a2)):
                v = a2[r, c]
                lines.append(f"{i} {j} {r} {c} {v.real:.17g} {v.imag:.17g}")
    return "\n".join(lines) + "\n"

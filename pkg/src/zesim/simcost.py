"""No-signalling assisted zero-error simulation cost of channels and graphs.

Every graph program is written on the support of ``P_AB``: a feasible
``V`` with ``V >= 0`` and ``tr (1-P) V = 0`` satisfies ``V = P V P``, so
``V = Q X Q^dagger`` with ``Q`` an orthonormal basis of the support.  The
dual condition ``P (S (x) 1 - U) P <= 0`` becomes ``Q^dagger (U - S (x) 1) Q >= 0``.
This keeps both programs strictly feasible, which the interior-point
solver needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from . import sdpcore
from .graphspace import (Channel, InfeasibleGraphError, NCBGraph, SolverFailure,
                         choi_of_channel, graph_feasibility_report, kalpha, tensor_power)
from .sdpcore import Block, Constraint, SdpProblem, SolverOptions

DEFAULT_SLACK = 1e-6
DIMENSION_CAP = 1296


class DimensionCapError(ValueError):
    """A tensor power would exceed the configured dimension cap."""


@dataclass
class SimCostResult:
    """Optimal value of a simulation-cost program with certificates from both sides.

    ``value`` is the value of the program that was built (``primal`` or
    ``dual`` form); ``dual_value`` comes from the multipliers.  ``V, T``
    certify an upper bound ``tr T`` and ``S, U`` a lower bound ``tr S``.
    """

    value: float
    dual_value: float
    status: str
    S: np.ndarray | None
    U: np.ndarray
    V: np.ndarray
    T: np.ndarray
    solution: sdpcore.SdpSolution = field(repr=False)
    form: str = "dual"

    @property
    def upper(self) -> float:
        return float(np.trace(self.T).real)

    @property
    def lower(self) -> float:
        if self.S is None:
            return float(np.trace(self.V @ self.U).real)
        return float(np.trace(self.S).real)

    def to_json(self, graph: NCBGraph | None = None) -> dict:
        out = {
            "value": self.value,
            "dualValue": self.dual_value,
            "status": self.status,
            "form": self.form,
            "solver": self.solution.summary(),
        }
        if graph is not None and self.S is not None:
            lo = verify_lower_certificate(graph, self.S, self.U, tol=np.inf)
            up = verify_upper_certificate(graph, self.V, self.T, tol=np.inf)
            out["certificates"] = {"lower": {"bound": lo.bound, "margins": lo.margins},
                                   "upper": {"bound": up.bound, "margins": up.margins}}
        return out


def _require_optimal(sol: sdpcore.SdpSolution, what: str, near_ok: bool = False) -> None:
    """Raise unless the solve finished; ``near_ok`` also accepts a stalled near-optimal end."""
    if sol.status == "primal-infeasible" or sol.status == "dual-infeasible":
        raise InfeasibleGraphError(f"{what}: solver reports {sol.status}")
    if near_ok and sol.status == "near-optimal":
        return
    if not sol.ok:
        raise SolverFailure(f"{what}: solver ended with status {sol.status} "
                            f"(residuals {sol.residuals})", sol)


def _ensure_feasible(k: NCBGraph, opts: SolverOptions | None) -> None:
    if graph_feasibility_report(k, opts).channel is None:
        raise InfeasibleGraphError(f"no channel is consistent with graph {k.name or ''}".strip())


def _trace_a_constraints(dim_a: int, dim_b: int, block: int) -> list[Constraint]:
    """``tr_A U = 1_B`` on block ``block``."""
    ia = np.eye(dim_a)
    return [Constraint({block: la.kron(ia, g)}, float(np.trace(g).real))
            for g in la.hermitian_basis(dim_b)]


def _reduced_dual_program(k: NCBGraph, s_psd: bool = False) -> SdpProblem:
    """max tr S  s.t.  U >= 0, tr_A U = 1_B, Q^dag (U - S (x) 1) Q = W >= 0.

    Blocks: 0 = U, 1 = S, 2 = W.
    """
    q = k.support
    ib = np.eye(k.dim_b)
    blocks = [Block("psd", k.dim_a * k.dim_b), Block("psd" if s_psd else "hfree", k.dim_a),
              Block("psd", k.rank)]
    cons = _trace_a_constraints(k.dim_a, k.dim_b, 0)
    for h in la.hermitian_basis(k.rank):
        qhq = la.hermitize(q @ h @ q.conj().T)
        cons.append(Constraint({0: qhq, 1: -la.partial_trace(qhq, k.dims, [0]), 2: -h}, 0.0))
    del ib
    return SdpProblem(blocks, {1: np.eye(k.dim_a)}, cons, "max")


def _reduced_primal_program(k: NCBGraph) -> SdpProblem:
    """min tr T  s.t.  V = Q X Q^dag, X >= 0, tr_B V = 1_A, 1 (x) T - V = Z >= 0.

    Blocks: 0 = X, 1 = T, 2 = Z.
    """
    q = k.support
    n = k.dim_a * k.dim_b
    ib = np.eye(k.dim_b)
    blocks = [Block("psd", k.rank), Block("hfree", k.dim_b), Block("psd", n)]
    cons = []
    for g in la.hermitian_basis(k.dim_a):
        cons.append(Constraint({0: la.hermitize(q.conj().T @ la.kron(g, ib) @ q)},
                               float(np.trace(g).real)))
    for h in la.hermitian_basis(n):
        cons.append(Constraint({0: -la.hermitize(q.conj().T @ h @ q),
                                1: la.partial_trace(h, k.dims, [1]), 2: -h}, 0.0))
    return SdpProblem(blocks, {1: np.eye(k.dim_b)}, cons, "min")


def _dual_from_multipliers_of_dual_form(k: NCBGraph, y: np.ndarray):
    """(V, T) from the multipliers of :func:`_reduced_dual_program`."""
    nb = k.dim_b ** 2
    t = la.vec_to_herm(y[:nb], k.dim_b)
    xm = la.vec_to_herm(y[nb:nb + k.rank ** 2], k.rank)
    v = -k.support @ xm @ k.support.conj().T
    return la.hermitize(v), t


def sigma_graph_dual(k: NCBGraph, opts: SolverOptions | None = None, check: bool = True,
                     s_psd: bool = False) -> SimCostResult:
    """Solve the ``max tr S`` program for the one-shot cost of ``k``."""
    if check:
        _ensure_feasible(k, opts)
    sol = sdpcore.solve(_reduced_dual_program(k, s_psd), opts)
    _require_optimal(sol, "simulation cost (dual form)")
    u, s = sol.primal[0], sol.primal[1]
    v, t = _dual_from_multipliers_of_dual_form(k, sol.dual)
    return SimCostResult(sol.primal_value, sol.dual_value, sol.status, s, u, v, t, sol, "dual")


def sigma_graph_primal(k: NCBGraph, opts: SolverOptions | None = None,
                       check: bool = True) -> SimCostResult:
    """Solve the ``min tr T`` program; ``V`` at the optimum is a cheapest channel's Choi matrix."""
    if check:
        _ensure_feasible(k, opts)
    sol = sdpcore.solve(_reduced_primal_program(k), opts)
    _require_optimal(sol, "simulation cost (primal form)")
    x, t = sol.primal[0], sol.primal[1]
    v = la.hermitize(k.support @ x @ k.support.conj().T)
    na = k.dim_a ** 2
    s = la.vec_to_herm(sol.dual[:na], k.dim_a)
    u = la.vec_to_herm(sol.dual[na:], k.dim_a * k.dim_b)
    return SimCostResult(sol.primal_value, sol.dual_value, sol.status, s, u, v, t, sol, "primal")


def sigma_graph(k: NCBGraph, opts: SolverOptions | None = None, check: bool = True) -> SimCostResult:
    """One-shot cost; the cheaper dual formulation is used."""
    return sigma_graph_dual(k, opts, check)


def sigma_minus(k: NCBGraph, opts: SolverOptions | None = None, check: bool = True) -> SimCostResult:
    """The restricted program with ``S_A >= 0``; never exceeds :func:`sigma_graph`."""
    return sigma_graph_dual(k, opts, check, s_psd=True)


def sigma_channel(ch: Channel, opts: SolverOptions | None = None) -> SimCostResult:
    """``max tr(J U)  s.t.  U >= 0, tr_A U = 1_B``; multipliers give ``T`` with ``J <= 1 (x) T``."""
    j = choi_of_channel(ch)
    p = SdpProblem([Block("psd", ch.dim_a * ch.dim_b)], {0: j},
                   _trace_a_constraints(ch.dim_a, ch.dim_b, 0), "max")
    sol = sdpcore.solve(p, opts)
    _require_optimal(sol, "channel simulation cost")
    t = la.vec_to_herm(sol.dual, ch.dim_b)
    return SimCostResult(sol.primal_value, sol.dual_value, sol.status, None, sol.primal[0], j, t,
                         sol, "channel")


# ---------------------------------------------------------------------------
# certificates

@dataclass
class CertificateCheck:
    ok: bool
    bound: float
    margins: dict[str, float]

    def __iter__(self):
        return iter((self.ok, self.bound))

    @property
    def worst_margin(self) -> float:
        return min(self.margins.values())


STRICT_MARGIN = 1e-9


def verify_lower_certificate(k: NCBGraph, S: np.ndarray, U: np.ndarray, tol: float = 1e-9,
                             strict: bool = False) -> CertificateCheck:
    """Check a feasible point of the ``max tr S`` program; on success ``tr S <= Sigma(k)``.

    Margins are signed so that negative means violated.  ``strict`` demands the
    support-restricted condition ``Q^dag (U - S (x) 1) Q`` to be positive
    definite with margin at least ``STRICT_MARGIN``.
    """
    S = np.asarray(S, dtype=complex)
    U = np.asarray(U, dtype=complex)
    n = k.dim_a * k.dim_b
    if S.shape != (k.dim_a, k.dim_a) or U.shape != (n, n):
        raise ValueError("certificate dimensions do not match the graph")
    p = k.support_projection
    cond = p @ (la.kron(S, np.eye(k.dim_b)) - U) @ p
    q = k.support
    restricted = q.conj().T @ (U - la.kron(S, np.eye(k.dim_b))) @ q
    margins = {
        "U_psd": la.min_eigenvalue(U),
        "trace_A": -float(np.abs(la.partial_trace(U, k.dims, [1]) - np.eye(k.dim_b)).max()),
        "hermitian": -float(max(np.abs(S - S.conj().T).max(), np.abs(U - U.conj().T).max())),
        "condition": -la.max_eigenvalue(cond),
        "condition_on_support": la.min_eigenvalue(restricted),
    }
    margins = {key: float(v) + 0.0 for key, v in margins.items()}
    ok = all(v >= -tol for v in margins.values())
    if strict:
        ok = ok and margins["condition_on_support"] >= STRICT_MARGIN
    return CertificateCheck(ok, float(np.trace(S).real), margins)


def verify_upper_certificate(k: NCBGraph, V: np.ndarray, T: np.ndarray, tol: float = 1e-9,
                             strict: bool = False) -> CertificateCheck:
    """Check a feasible point of the ``min tr T`` program; on success ``Sigma(k) <= tr T``."""
    V = np.asarray(V, dtype=complex)
    T = np.asarray(T, dtype=complex)
    n = k.dim_a * k.dim_b
    if V.shape != (n, n) or T.shape != (k.dim_b, k.dim_b):
        raise ValueError("certificate dimensions do not match the graph")
    p = k.support_projection
    margins = {
        "V_psd": la.min_eigenvalue(V),
        "domination": la.min_eigenvalue(la.kron(np.eye(k.dim_a), T) - V),
        "trace_B": -float(np.abs(la.partial_trace(V, k.dims, [0]) - np.eye(k.dim_a)).max()),
        "support": -abs(float(np.trace((np.eye(n) - p) @ V).real)),
        "hermitian": -float(max(np.abs(V - V.conj().T).max(), np.abs(T - T.conj().T).max())),
    }
    margins = {key: float(v) + 0.0 for key, v in margins.items()}
    ok = all(v >= -tol for v in margins.values())
    if strict:
        ok = ok and margins["domination"] >= STRICT_MARGIN
    return CertificateCheck(ok, float(np.trace(T).real), margins)


@dataclass
class Certificate:
    """A claimed feasible point: ``(S, U)`` for a lower bound or ``(V, T)`` for an upper bound."""

    kind: str
    first: np.ndarray
    second: np.ndarray
    graph: NCBGraph | None = None

    def __post_init__(self):
        if self.kind not in ("lower", "upper"):
            raise ValueError("certificate kind must be 'lower' or 'upper'")

    @property
    def bound(self) -> float:
        return float(np.trace(self.first if self.kind == "lower" else self.second).real)

    def verify(self, k: NCBGraph | None = None, tol: float = 1e-9,
               strict: bool = False) -> CertificateCheck:
        k = k or self.graph
        if k is None:
            raise ValueError("no graph to verify against")
        if self.kind == "lower":
            return verify_lower_certificate(k, self.first, self.second, tol, strict)
        return verify_upper_certificate(k, self.first, self.second, tol, strict)

    def to_json(self) -> dict:
        names = ("S", "U") if self.kind == "lower" else ("V", "T")
        out = {"kind": self.kind,
               names[0]: la.matrix_to_json(self.first),
               names[1]: la.matrix_to_json(self.second)}
        if self.graph is not None:
            from .graphspace import graph_to_json
            out["graph"] = graph_to_json(self.graph)
        return out

    @classmethod
    def from_json(cls, obj: dict | str) -> "Certificate":
        if isinstance(obj, str):
            obj = json.loads(obj)
        kind = obj.get("kind")
        names = {"lower": ("S", "U"), "upper": ("V", "T")}.get(kind)
        if names is None:
            raise ValueError(f"unknown certificate kind {kind!r}")
        graph = None
        if "graph" in obj:
            from .graphspace import graph_from_json
            graph = graph_from_json(obj["graph"])
        return cls(kind, la.matrix_from_json(obj[names[0]]), la.matrix_from_json(obj[names[1]]),
                   graph)


def paper_certificate_pi3() -> Certificate:
    """The reference lower-bound point for ``K_alpha`` at ``alpha = pi/3`` (bound 2.5716)."""
    k = lambda a, b: la.kron(la.ket(a, 2), la.ket(b, 3))
    u1 = (10 / (3 * np.sqrt(33)) * k(0, 0) + (5 / 3) * np.sqrt(2 / 33) * k(0, 1)
          + 7 / (3 * np.sqrt(11)) * k(1, 2))
    u2 = (1 / np.sqrt(51) * k(0, 2) - (5 / 3) * np.sqrt(2 / 17) * k(1, 0)
          + 10 / (3 * np.sqrt(17)) * k(1, 1))
    U = (99 / 50) * la.proj(u1) + (51 / 50) * la.proj(u2)
    S = np.diag([3.1102, -0.5386]).astype(complex)
    return Certificate("lower", S, U, kalpha(np.pi / 3))


# ---------------------------------------------------------------------------
# multiplicativity conditions

def check_theorem1_condition(k: NCBGraph, S: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff ``P (S (x) 1_B) P >= -tol``, the sufficient condition for multiplicativity."""
    p = k.support_projection
    return la.min_eigenvalue(p @ la.kron(S, np.eye(k.dim_b)) @ p) >= -tol


@dataclass
class ConditionSearch:
    """Outcome of searching the optimal dual face for an ``S`` with ``P (S (x) 1) P >= t P``."""

    t: float
    S: np.ndarray | None
    U: np.ndarray | None
    sigma: float
    slack: float

    @property
    def found(self) -> bool:
        return self.S is not None


def search_condition_dual(k: NCBGraph, slack: float = DEFAULT_SLACK, sigma: float | None = None,
                          opts: SolverOptions | None = None) -> ConditionSearch:
    """max t over dual points with ``tr S >= Sigma - slack`` and ``Q^dag (S (x) 1) Q >= t``.

    ``found`` is true when the optimal ``t`` is at least ``-slack``.
    """
    if sigma is None:
        sigma = sigma_graph(k, opts).value
    q = k.support
    r = k.rank
    blocks = [Block("psd", k.dim_a * k.dim_b), Block("hfree", k.dim_a), Block("psd", r),
              Block("free", 1), Block("psd", r), Block("nonneg", 1)]
    cons = _trace_a_constraints(k.dim_a, k.dim_b, 0)
    for h in la.hermitian_basis(r):
        qhq = la.hermitize(q @ h @ q.conj().T)
        ptr = la.partial_trace(qhq, k.dims, [0])
        cons.append(Constraint({0: qhq, 1: -ptr, 2: -h}, 0.0))
        cons.append(Constraint({1: ptr, 3: np.array([-np.trace(h).real]), 4: -h}, 0.0))
    cons.append(Constraint({1: np.eye(k.dim_a), 5: np.array([-1.0])}, sigma - slack))
    sol = sdpcore.solve(SdpProblem(blocks, {3: np.array([1.0])}, cons, "max"), opts)
    _require_optimal(sol, "condition search", near_ok=True)
    t = float(sol.primal[3][0])
    if t >= -slack:
        return ConditionSearch(t, sol.primal[1], sol.primal[0], sigma, slack)
    return ConditionSearch(t, None, None, sigma, slack)


@dataclass
class FullRankCheck:
    full_rank: bool
    t: float
    V: np.ndarray

    def __iter__(self):
        return iter((self.full_rank, self.t, self.V))


def cheapest_full_rank_check(k: NCBGraph, slack: float = DEFAULT_SLACK, sigma: float | None = None,
                             opts: SolverOptions | None = None) -> FullRankCheck:
    """Is there a cheapest channel whose Choi matrix has full rank on the support of ``P``?

    Solves ``max t`` over ``V = Q X Q^dag`` feasible for the ``min tr T`` program
    with ``tr T <= Sigma + slack`` and ``X >= t 1``; answers yes when ``t > 10 slack``.
    """
    if sigma is None:
        sigma = sigma_graph(k, opts).value
    q = k.support
    r = k.rank
    n = k.dim_a * k.dim_b
    ib = np.eye(k.dim_b)
    blocks = [Block("psd", r), Block("free", 1), Block("hfree", k.dim_b), Block("psd", n),
              Block("nonneg", 1)]
    cons = []
    for g in la.hermitian_basis(k.dim_a):
        c = la.hermitize(q.conj().T @ la.kron(g, ib) @ q)
        cons.append(Constraint({0: c, 1: np.array([np.trace(c).real])}, float(np.trace(g).real)))
    for h in la.hermitian_basis(n):
        c = la.hermitize(q.conj().T @ h @ q)
        cons.append(Constraint({0: -c, 1: np.array([-np.trace(c).real]),
                                2: la.partial_trace(h, k.dims, [1]), 3: -h}, 0.0))
    cons.append(Constraint({2: np.eye(k.dim_b), 4: np.array([1.0])}, sigma + slack))
    sol = sdpcore.solve(SdpProblem(blocks, {1: np.array([1.0])}, cons, "max"), opts)
    _require_optimal(sol, "cheapest-full-rank check", near_ok=True)
    t = float(sol.primal[1][0])
    x = sol.primal[0] + t * np.eye(r)
    v = la.hermitize(q @ x @ q.conj().T)
    return FullRankCheck(t > 10 * slack, t, v)


def nontrivial_check(k: NCBGraph, tol: float = la.TOL.rank) -> bool:
    """True iff no constant channel ``rho -> |beta><beta|`` has its Kraus span inside ``k``.

    A constant channel has Kraus operators ``|beta><a|`` for every input basis
    vector ``a``; their Choi vectors are ``|a> (x) |beta>``.  The graph is
    trivial iff some nonzero ``beta`` puts all of them in the support.
    """
    n = k.dim_a * k.dim_b
    comp = np.eye(n) - k.support_projection
    ib = np.eye(k.dim_b)
    stack = np.vstack([comp @ np.kron(la.ket(a, k.dim_a)[:, None], ib) for a in range(k.dim_a)])
    s = np.linalg.svd(stack, compute_uv=False)
    return bool(s.size == k.dim_b and s[-1] > tol)


@dataclass
class Prop3Report:
    w_min_eig: float
    w_norm: float
    tr_wj: float
    tr_uj_minus_tr_s: float
    w_psd: bool

    def lines(self) -> list[str]:
        return [f"W min eigenvalue: {self.w_min_eig:.3e} ({'PSD' if self.w_psd else 'not PSD'})",
                f"||W||_F: {self.w_norm:.3e}",
                f"tr(W J): {self.tr_wj:.3e}",
                f"|tr(U J) - tr S|: {self.tr_uj_minus_tr_s:.3e}"]


def property_prop3_check(k: NCBGraph, result: SimCostResult | None = None, tol: float = 1e-7,
                         opts: SolverOptions | None = None) -> Prop3Report:
    """Compare a dual optimum with a cheapest channel ``J`` taken from the primal optimum."""
    if result is None:
        result = sigma_graph(k, opts)
    p = k.support_projection
    w = -p @ (la.kron(result.S, np.eye(k.dim_b)) - result.U) @ p
    w = la.hermitize(w)
    j = result.V
    wmin = la.min_eigenvalue(w)
    return Prop3Report(
        w_min_eig=wmin,
        w_norm=float(np.linalg.norm(w)),
        tr_wj=float(np.trace(w @ j).real),
        tr_uj_minus_tr_s=abs(float(np.trace(result.U @ j).real - np.trace(result.S).real)),
        w_psd=wmin >= -tol,
    )


# ---------------------------------------------------------------------------
# asymptotic bounds

@dataclass
class BoundsResult:
    lower: float
    upper: float
    power_values: list[tuple[int, float]]


def s0ns_bounds(k: NCBGraph, max_power: int = 2, opts: SolverOptions | None = None,
                cap: int = DIMENSION_CAP) -> BoundsResult:
    """``log2 Sigma^-(k) <= S_0NS(k) <= min_n (1/n) log2 Sigma(k^n)`` over ``n <= max_power``."""
    if max_power < 1:
        raise ValueError("max_power must be >= 1")
    dim = (k.dim_a * k.dim_b) ** max_power
    if dim > cap:
        raise DimensionCapError(f"(dA*dB)^{max_power} = {dim} exceeds the cap {cap}")
    lower = float(np.log2(sigma_minus(k, opts).value))
    values = []
    for n in range(1, max_power + 1):
        kn = tensor_power(k, n)
        val = sigma_graph(kn, opts, check=(n == 1)).value
        values.append((n, float(np.log2(val) / n)))
    return BoundsResult(lower, min(v for _, v in values), values)

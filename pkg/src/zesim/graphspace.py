"""Channels, non-commutative bipartite graphs and no-signalling bipartite maps.

Conventions
-----------
The Choi vector of an operator ``E: A -> B`` is ``(1_A (x) E)|Phi>`` with
``|Phi> = sum_a |aa>``, i.e. ``vec(E)[a*dB + b] = E[b, a]``.  Choi matrices live
on ``A (x) B`` with the input first.  Tensor products of graphs order systems
as ``A1 A2 B1 B2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg as la
from . import sdpcore


class InfeasibleGraphError(ValueError):
    """No channel has its Kraus span inside the given graph."""


class SolverFailure(RuntimeError):
    """The SDP solver did not return an optimal solution."""

    def __init__(self, message: str, solution: sdpcore.SdpSolution | None = None):
        super().__init__(message)
        self.solution = solution


def choi_vector(op: np.ndarray) -> np.ndarray:
    return np.asarray(op, dtype=complex).T.ravel()


def operator_from_choi_vector(v: np.ndarray, dim_a: int, dim_b: int) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(dim_a, dim_b).T


@dataclass(frozen=True)
class Channel:
    """A CPTP map given by Kraus operators of shape ``(dim_b, dim_a)``."""

    dim_a: int
    dim_b: int
    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        object.__setattr__(self, "kraus", ops)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        for k in ops:
            if k.shape != (self.dim_b, self.dim_a):
                raise ValueError(f"Kraus operator of shape {k.shape}, expected "
                                 f"{(self.dim_b, self.dim_a)}")
        s = sum(k.conj().T @ k for k in ops)
        err = float(np.abs(s - np.eye(self.dim_a)).max())
        if err > 1e-9:
            raise ValueError(f"Kraus operators are not trace preserving (error {err:.2e})")

    @classmethod
    def from_choi(cls, choi: np.ndarray, dim_a: int, dim_b: int, tol: float = 1e-12) -> "Channel":
        w, v = la.eig_hermitian(choi)
        keep = w > tol * max(1.0, float(w[-1]))
        ops = [np.sqrt(wi) * operator_from_choi_vector(v[:, i], dim_a, dim_b)
               for i, wi in zip(np.flatnonzero(keep), w[keep])]
        # absorb small normalization drift from numerical optima
        s = sum(k.conj().T @ k for k in ops)
        w_s, v_s = np.linalg.eigh(la.hermitize(s))
        fix = v_s @ np.diag(1.0 / np.sqrt(w_s)) @ v_s.conj().T
        return cls(dim_a, dim_b, tuple(k @ fix for k in ops))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus)


def choi_of_channel(ch: Channel) -> np.ndarray:
    """``J_AB = sum_k (1 (x) E_k)|Phi><Phi|(1 (x) E_k)^dagger``."""
    return sum(la.proj(choi_vector(k)) for k in ch.kraus)


@dataclass(frozen=True)
class NCBGraph:
    """Non-commutative bipartite graph: a subspace ``K`` of operators ``A -> B``.

    ``support`` holds an orthonormal basis (columns) of the support of ``P_AB``,
    the span of the Choi vectors of ``K``.
    """

    dim_a: int
    dim_b: int
    support: np.ndarray
    name: str = ""
    _proj: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = np.asarray(self.support, dtype=complex)
        n = self.dim_a * self.dim_b
        if q.ndim != 2 or q.shape[0] != n:
            raise ValueError(f"support basis must have {n} rows")
        if q.shape[1] == 0:
            raise ValueError("graph is the zero subspace")
        object.__setattr__(self, "support", q)
        object.__setattr__(self, "_proj", la.hermitize(q @ q.conj().T))

    @classmethod
    def from_kraus(cls, dim_a: int, dim_b: int, ops: Sequence[np.ndarray], name: str = "",
                   tol: float = la.TOL.rank) -> "NCBGraph":
        for op in ops:
            if np.shape(op) != (dim_b, dim_a):
                raise ValueError(f"operator of shape {np.shape(op)}, expected {(dim_b, dim_a)}")
        q = la.orthonormal_basis([choi_vector(op) for op in ops], tol=tol, dim=dim_a * dim_b)
        return cls(dim_a, dim_b, q, name)

    @classmethod
    def from_support_vectors(cls, dim_a: int, dim_b: int, vectors: Sequence[np.ndarray],
                             name: str = "", tol: float = la.TOL.rank) -> "NCBGraph":
        q = la.orthonormal_basis(vectors, tol=tol, dim=dim_a * dim_b)
        return cls(dim_a, dim_b, q, name)

    @property
    def dims(self) -> list[int]:
        return [self.dim_a, self.dim_b]

    @property
    def rank(self) -> int:
        return self.support.shape[1]

    @property
    def support_projection(self) -> np.ndarray:
        return self._proj

    @property
    def basis(self) -> list[np.ndarray]:
        """Kraus basis of ``K``, orthonormal in the Hilbert-Schmidt inner product."""
        return [operator_from_choi_vector(self.support[:, i], self.dim_a, self.dim_b)
                for i in range(self.rank)]

    def contains_operator(self, op: np.ndarray, tol: float = 1e-9) -> bool:
        v = choi_vector(op)
        r = v - self.support @ (self.support.conj().T @ v)
        return float(np.linalg.norm(r)) <= tol * max(1.0, float(np.linalg.norm(v)))


def graph_of_channel(ch: Channel) -> NCBGraph:
    return NCBGraph.from_kraus(ch.dim_a, ch.dim_b, ch.kraus)


def kalpha_vectors(alpha: float) -> list[np.ndarray]:
    """The three orthonormal support vectors of the qubit-qutrit family."""
    k = lambda a, b: la.kron(la.ket(a, 2), la.ket(b, 3))
    psi0 = (k(0, 0) + k(0, 1) + k(1, 2)) / np.sqrt(3.0)
    psi1 = np.cos(alpha) * k(0, 2) + np.sin(alpha) * k(1, 1)
    psi2 = k(1, 0)
    return [psi0, psi1, psi2]


def kalpha(alpha: float) -> NCBGraph:
    c2 = float(np.cos(alpha) ** 2)
    if not 1e-12 < c2 < 1.0 - 1e-12:
        raise ValueError(f"cos^2(alpha) = {c2} must lie strictly between 0 and 1")
    q = np.column_stack(kalpha_vectors(alpha))
    return NCBGraph(2, 3, q, name=f"K_alpha({alpha:.10g})")


def kalpha_from_cos2(cos2: float) -> NCBGraph:
    return kalpha(float(np.arccos(np.sqrt(cos2))))


def kalpha_choi(alpha: float, a1: float) -> np.ndarray:
    """Choi matrix ``sum_j a_j |psi_j><psi_j|`` with ``a0, a2`` fixed by trace preservation."""
    c2 = np.cos(alpha) ** 2
    a0 = 1.5 * (1.0 - c2 * a1)
    a2 = (1.0 - (2.0 - 3.0 * c2) * a1) / 2.0
    return sum(a * la.proj(v) for a, v in zip((a0, a1, a2), kalpha_vectors(alpha)))


def delta_ell(ell: int) -> NCBGraph:
    """Graph of the noiseless classical channel on ``ell`` symbols."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    ops = [np.outer(la.ket(k, ell), la.ket(k, ell)) for k in range(ell)]
    return NCBGraph.from_kraus(ell, ell, ops, name=f"Delta_{ell}")


def classical_graph(adjacency: np.ndarray) -> NCBGraph:
    """Graph spanned by ``|b><a|`` for every edge ``adjacency[b, a]``."""
    adj = np.asarray(adjacency, dtype=bool)
    if adj.ndim != 2:
        raise ValueError("adjacency must be a |B| x |A| matrix")
    dim_b, dim_a = adj.shape
    empty = np.flatnonzero(~adj.any(axis=0))
    if empty.size:
        raise ValueError(f"inputs {empty.tolist()} have no admissible output")
    ops = [np.outer(la.ket(b, dim_b), la.ket(a, dim_a)) for b, a in zip(*np.nonzero(adj))]
    return NCBGraph.from_kraus(dim_a, dim_b, ops, name="classical")


def tensor_graph(k1: NCBGraph, k2: NCBGraph) -> NCBGraph:
    """``K1 (x) K2`` as a graph ``A1A2 -> B1B2``."""
    dims = [k1.dim_a, k1.dim_b, k2.dim_a, k2.dim_b]
    q = np.kron(k1.support, k2.support)
    q = np.column_stack([la.permute_systems(q[:, i], dims, [0, 2, 1, 3])
                         for i in range(q.shape[1])])
    name = f"({k1.name} x {k2.name})" if k1.name or k2.name else ""
    return NCBGraph(k1.dim_a * k2.dim_a, k1.dim_b * k2.dim_b, q, name)


def tensor_power(k: NCBGraph, n: int) -> NCBGraph:
    if n < 1:
        raise ValueError("power must be >= 1")
    out = k
    for _ in range(n - 1):
        out = tensor_graph(out, k)
    return out


def random_channel(dim_a: int, dim_b: int, n_kraus: int, rng: np.random.Generator) -> Channel:
    if dim_b * n_kraus < dim_a:
        raise ValueError(f"{n_kraus} Kraus operators of shape {dim_b}x{dim_a} cannot be "
                         "trace preserving")
    v = la.random_isometry(dim_b * n_kraus, dim_a, rng)
    ops = [v[k * dim_b:(k + 1) * dim_b, :] for k in range(n_kraus)]
    return Channel(dim_a, dim_b, tuple(ops))


def random_classical_channel(dim_a: int, dim_b: int, rng: np.random.Generator,
                             density: float = 1.0) -> np.ndarray:
    """Column-stochastic ``N[b, a] = N(b|a)``; ``density < 1`` zeroes random entries."""
    n = rng.random((dim_b, dim_a))
    if density < 1.0:
        mask = rng.random((dim_b, dim_a)) < density
        mask[rng.integers(dim_b, size=dim_a), np.arange(dim_a)] = True
        n = n * mask
    return n / n.sum(axis=0, keepdims=True)


def classical_channel(stochastic: np.ndarray) -> Channel:
    """Quantum realization of a classical channel (Kraus ``sqrt(N(b|a)) |b><a|``)."""
    n = np.asarray(stochastic, dtype=float)
    dim_b, dim_a = n.shape
    ops = [np.sqrt(n[b, a]) * np.outer(la.ket(b, dim_b), la.ket(a, dim_a))
           for b in range(dim_b) for a in range(dim_a) if n[b, a] > 0]
    return Channel(dim_a, dim_b, tuple(ops))


def constant_channel(dim_a: int, beta: np.ndarray) -> Channel:
    beta = np.asarray(beta, dtype=complex)
    beta = beta / np.linalg.norm(beta)
    ops = [np.outer(beta, la.ket(a, dim_a)) for a in range(dim_a)]
    return Channel(dim_a, beta.size, tuple(ops))


# ---------------------------------------------------------------------------
# feasibility

def _feasibility_problem(k: NCBGraph) -> sdpcore.SdpProblem:
    """max t  s.t.  J = Q (X' + t 1) Q^dagger,  tr_B J = 1_A,  X' >= 0."""
    q = k.support
    r = k.rank
    cons = []
    for g in la.hermitian_basis(k.dim_a):
        c = q.conj().T @ la.kron(g, np.eye(k.dim_b)) @ q
        cons.append(sdpcore.Constraint({0: la.hermitize(c), 1: np.array([np.trace(c).real])},
                                       float(np.trace(g).real)))
    return sdpcore.SdpProblem([sdpcore.Block("psd", r), sdpcore.Block("free", 1)],
                              {1: np.array([1.0])}, cons, "max")


@dataclass
class FeasibilityResult:
    channel: Channel | None
    margin: float
    status: str


def graph_feasibility_report(k: NCBGraph, opts: sdpcore.SolverOptions | None = None,
                             tol: float = 1e-7) -> FeasibilityResult:
    sol = sdpcore.solve(_feasibility_problem(k), opts)
    if sol.status == "primal-infeasible":
        return FeasibilityResult(None, -np.inf, sol.status)
    if not sol.ok:
        raise SolverFailure(f"feasibility SDP ended with status {sol.status}", sol)
    t = float(sol.primal[1][0])
    if t < -tol:
        return FeasibilityResult(None, t, sol.status)
    x = sol.primal[0] + t * np.eye(k.rank)
    w, v = la.eig_hermitian(x)
    x = (v * np.clip(w, 0.0, None)) @ v.conj().T
    j = k.support @ x @ k.support.conj().T
    return FeasibilityResult(Channel.from_choi(j, k.dim_a, k.dim_b), t, sol.status)


def graph_feasibility(k: NCBGraph, opts: sdpcore.SolverOptions | None = None) -> Channel | None:
    """A channel whose Kraus span lies in ``k``, or ``None`` if there is none.

    The channel returned has Choi matrix of full rank on the support of ``P``
    whenever such a channel exists.
    """
    return graph_feasibility_report(k, opts).channel


# ---------------------------------------------------------------------------
# no-signalling bipartite maps

@dataclass(frozen=True)
class QnscMap:
    """Bipartite map ``A_i (x) B_i -> A_o (x) B_o`` by its Choi matrix on ``A_i' A_o B_i' B_o``."""

    dim_ai: int
    dim_ao: int
    dim_bi: int
    dim_bo: int
    choi: np.ndarray

    def __post_init__(self):
        n = self.dim_ai * self.dim_ao * self.dim_bi * self.dim_bo
        if np.shape(self.choi) != (n, n):
            raise ValueError(f"Choi matrix must be {n}x{n}")

    @property
    def dims(self) -> list[int]:
        return [self.dim_ai, self.dim_ao, self.dim_bi, self.dim_bo]


def product_qnsc(chan_a: Channel, chan_b: Channel) -> QnscMap:
    """Local map ``Lambda_A (x) Lambda_B``."""
    omega = la.kron(choi_of_channel(chan_a), choi_of_channel(chan_b))
    return QnscMap(chan_a.dim_a, chan_a.dim_b, chan_b.dim_a, chan_b.dim_b, omega)


def identity_channel(d: int) -> Channel:
    return Channel(d, d, (np.eye(d),))


def forwarding_qnsc(d: int, dim_ao: int = 2, dim_bi: int = 2) -> QnscMap:
    """Sends Alice's input straight to Bob's output; ``A_o`` gets ``|0>``, ``B_i`` is discarded."""
    phi = la.proj(la.max_entangled_vector(d))  # on A_i' B_o
    omega = la.kron(phi, la.proj(la.ket(0, dim_ao)), np.eye(dim_bi))  # A_i' B_o A_o B_i'
    omega = la.permute_systems(omega, [d, d, dim_ao, dim_bi], [0, 2, 3, 1])
    return QnscMap(d, dim_ao, dim_bi, d, omega)


def discard_prepare_qnsc(dim_ai: int, dim_ao: int, dim_bi: int, beta: np.ndarray) -> QnscMap:
    """Ignores both inputs; ``A_o`` gets ``|0>`` and ``B_o`` gets ``|beta>``."""
    beta = np.asarray(beta, dtype=complex)
    beta = beta / np.linalg.norm(beta)
    omega = la.kron(np.eye(dim_ai), la.proj(la.ket(0, dim_ao)), np.eye(dim_bi), la.proj(beta))
    return QnscMap(dim_ai, dim_ao, dim_bi, beta.size, omega)


@dataclass
class QnscReport:
    psd_margin: float
    normalization_error: float
    no_signal_a_to_b: float
    no_signal_b_to_a: float
    tol: float

    @property
    def families(self) -> dict[str, bool]:
        return {
            "positivity": self.psd_margin >= -self.tol,
            "normalization": self.normalization_error <= self.tol,
            "no_signal_a_to_b": self.no_signal_a_to_b <= self.tol,
            "no_signal_b_to_a": self.no_signal_b_to_a <= self.tol,
        }

    @property
    def passed(self) -> bool:
        return all(self.families.values())


def qnsc_check(pi: QnscMap, tol: float = 1e-8) -> QnscReport:
    """Evaluate positivity, normalization and both no-signalling families.

    The traceless conditions are tested on the generalized Gell-Mann basis;
    each violation is the largest spectral norm found.
    """
    dims = pi.dims
    om = pi.choi
    psd = la.min_eigenvalue(om)
    norm = float(np.abs(la.partial_trace(om, dims, [0, 2])
                        - np.eye(pi.dim_ai * pi.dim_bi)).max())
    ia, iao, ib, ibo = (np.eye(d) for d in dims)
    a_to_b = 0.0
    for g in la.gell_mann_basis(pi.dim_ai):
        r = la.partial_trace(om @ la.kron(g.T, iao, ib, ibo), dims, [2, 3])
        a_to_b = max(a_to_b, float(np.linalg.norm(r, 2)))
    b_to_a = 0.0
    for g in la.gell_mann_basis(pi.dim_bi):
        r = la.partial_trace(om @ la.kron(ia, iao, g.T, ibo), dims, [0, 1])
        b_to_a = max(b_to_a, float(np.linalg.norm(r, 2)))
    return QnscReport(psd, norm, a_to_b, b_to_a, tol)


def compose_qnsc(pi: QnscMap, e: Channel) -> np.ndarray:
    """Choi matrix on ``A_i (x) B_o`` of the map obtained by wiring ``e: A_o -> B_i`` into ``pi``.

    Link product over the shared systems ``A_o`` and ``B_i``.
    """
    if e.dim_a != pi.dim_ao or e.dim_b != pi.dim_bi:
        raise ValueError(f"channel {e.dim_a}->{e.dim_b} does not fit A_o={pi.dim_ao}, "
                         f"B_i={pi.dim_bi}")
    dims = pi.dims
    om = pi.choi.reshape(dims + dims)
    je = choi_of_channel(e).reshape(pi.dim_ao, pi.dim_bi, pi.dim_ao, pi.dim_bi)
    out = np.einsum("xyab,pxyqrabs->pqrs", je, om)
    n = pi.dim_ai * pi.dim_bo
    return out.reshape(n, n)


# ---------------------------------------------------------------------------
# graph JSON

def graph_to_json(k: NCBGraph) -> dict:
    return {
        "dimA": k.dim_a,
        "dimB": k.dim_b,
        "kraus_basis": [la.matrix_to_json(op) for op in k.basis],
    }


def graph_from_json(obj: dict | str) -> NCBGraph:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        dim_a, dim_b = int(obj["dimA"]), int(obj["dimB"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"graph JSON needs integer dimA and dimB: {exc}") from exc
    if "kraus_basis" in obj:
        ops = [la.matrix_from_json(m) for m in obj["kraus_basis"]]
        return NCBGraph.from_kraus(dim_a, dim_b, ops, name=obj.get("name", ""))
    if "support_vectors" in obj:
        vecs = []
        for v in obj["support_vectors"]:
            arr = np.asarray(v, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise ValueError("support vectors must be lists of [re, im] pairs")
            vecs.append(arr[:, 0] + 1j * arr[:, 1])
        return NCBGraph.from_support_vectors(dim_a, dim_b, vecs, name=obj.get("name", ""))
    raise ValueError("graph JSON needs 'kraus_basis' or 'support_vectors'")

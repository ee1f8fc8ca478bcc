"""Dense complex linear algebra for small composite quantum systems.

Operators are plain ``numpy`` arrays.  Composite spaces are described by a
list of subsystem dimensions; the first subsystem is the most significant
index (``kron`` ordering).
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when subsystem dimensions do not match an operator."""


class EigenError(RuntimeError):
    """Raised when the Hermitian eigensolver fails to converge."""


@dataclass(frozen=True)
class Tolerances:
    """Central numerical thresholds used across the package."""

    hermitian: float = 1e-12
    rank: float = 1e-9
    psd: float = 1e-9
    channel: float = 1e-9


TOL = Tolerances()


def kron(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of matrices (or vectors)."""
    if not ops:
        raise ValueError("kron needs at least one operand")
    return reduce(np.kron, ops)


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def hermitize(m: np.ndarray) -> np.ndarray:
    """Return ``(M + M^dagger) / 2``."""
    m = np.asarray(m)
    return 0.5 * (m + m.conj().T)


def is_hermitian(m: np.ndarray, tol: float = TOL.hermitian) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    return bool(np.abs(m - m.conj().T).max(initial=0.0) <= tol * scale)


def _check_dims(m: np.ndarray, dims: Sequence[int]) -> None:
    if any(int(d) < 1 for d in dims):
        raise DimensionError(f"subsystem dimensions must be >= 1, got {list(dims)}")
    total = int(np.prod(dims))
    if m.ndim != 2 or m.shape != (total, total):
        raise DimensionError(f"operator of shape {m.shape} does not match dims {list(dims)}")


def partial_trace(m: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    The kept subsystems stay in their original relative order.
    """
    m = np.asarray(m)
    dims = [int(d) for d in dims]
    _check_dims(m, dims)
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise DimensionError("keep must name at least one subsystem")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise DimensionError(f"subsystem index out of range: {keep}")
    n = len(dims)
    letters = string.ascii_letters
    if 2 * n > len(letters):
        raise DimensionError("too many subsystems")
    rows = list(letters[:n])
    cols = [rows[k] if k not in keep else letters[n + k] for k in range(n)]
    out = "".join(rows[k] for k in keep) + "".join(cols[k] for k in keep)
    t = m.reshape(dims + dims)
    res = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    dk = int(np.prod([dims[k] for k in keep]))
    return res.reshape(dk, dk)


def permute_systems(m: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: subsystem ``k`` of the result is subsystem ``perm[k]`` of ``m``.

    Works for operators and for vectors.
    """
    m = np.asarray(m)
    dims = [int(d) for d in dims]
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(len(dims))):
        raise DimensionError(f"{perm} is not a permutation of {len(dims)} subsystems")
    total = int(np.prod(dims))
    if m.ndim == 1:
        if m.shape[0] != total:
            raise DimensionError(f"vector of length {m.shape[0]} does not match dims {dims}")
        return m.reshape(dims).transpose(perm).reshape(total)
    _check_dims(m, dims)
    n = len(dims)
    axes = perm + [n + p for p in perm]
    return m.reshape(dims + dims).transpose(axes).reshape(total, total)


def eig_hermitian(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvectors of the Hermitian part of ``m``."""
    try:
        w, v = np.linalg.eigh(hermitize(m))
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"eigh did not converge: {exc}") from exc
    return w, v


def min_eigenvalue(m: np.ndarray) -> float:
    try:
        return float(np.linalg.eigvalsh(hermitize(m))[0])
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"eigvalsh did not converge: {exc}") from exc


def max_eigenvalue(m: np.ndarray) -> float:
    return -min_eigenvalue(-np.asarray(m))


def is_psd(m: np.ndarray, tol: float = TOL.psd) -> bool:
    return min_eigenvalue(m) >= -tol


def orthonormal_basis(vectors: Sequence[np.ndarray] | np.ndarray, tol: float = TOL.rank,
                      dim: int | None = None) -> np.ndarray:
    """Columns form an orthonormal basis of the span of ``vectors``.

    Singular values below ``tol`` times the largest one are dropped.
    """
    vecs = [np.asarray(v, dtype=complex).ravel() for v in vectors]
    if not vecs:
        if dim is None:
            raise ValueError("dimension required for an empty vector family")
        return np.zeros((dim, 0), dtype=complex)
    lengths = {v.shape[0] for v in vecs}
    if len(lengths) != 1:
        raise DimensionError(f"vectors have differing lengths {sorted(lengths)}")
    a = np.column_stack(vecs)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[0], 0), dtype=complex)
    r = int(np.sum(s >= tol * s[0]))
    return u[:, :r]


def projector_onto_span(vectors: Sequence[np.ndarray] | np.ndarray, tol: float = TOL.rank,
                        dim: int | None = None) -> np.ndarray:
    """Orthogonal projector onto the span of ``vectors``.

    An empty family gives the zero matrix of size ``dim``.
    """
    q = orthonormal_basis(vectors, tol=tol, dim=dim)
    return q @ q.conj().T


def numerical_rank(m: np.ndarray, tol: float = TOL.rank) -> int:
    s = np.linalg.svd(np.asarray(m), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s >= tol * s[0]))


def max_entangled_vector(d: int) -> np.ndarray:
    """Unnormalized ``sum_k |kk>`` on ``C^d (x) C^d``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return np.eye(d, dtype=complex).ravel()


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def proj(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    return np.outer(v, v.conj())


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal basis of d x d Hermitian matrices under ``Re tr(A B)``.

    Shape ``(d*d, d, d)``: the diagonal units, then for each ``j < k`` the
    symmetric and antisymmetric pairs.
    """
    basis = np.zeros((d * d, d, d), dtype=complex)
    idx = 0
    for j in range(d):
        basis[idx, j, j] = 1.0
        idx += 1
    r = 1.0 / np.sqrt(2.0)
    for j in range(d):
        for k in range(j + 1, d):
            basis[idx, j, k] = basis[idx, k, j] = r
            idx += 1
            basis[idx, j, k] = -1j * r
            basis[idx, k, j] = 1j * r
            idx += 1
    return basis


def herm_to_vec(m: np.ndarray) -> np.ndarray:
    """Real coordinates of a Hermitian matrix in :func:`hermitian_basis`."""
    m = np.asarray(m)
    d = m.shape[0]
    return np.einsum("kij,ji->k", hermitian_basis(d), m).real


def vec_to_herm(x: np.ndarray, d: int) -> np.ndarray:
    return np.einsum("k,kij->ij", np.asarray(x, dtype=float), hermitian_basis(d))


def gell_mann_basis(d: int) -> list[np.ndarray]:
    """The d*d - 1 generalized Gell-Mann matrices (traceless, ``tr G^2 = 2``)."""
    mats: list[np.ndarray] = []
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1.0
            mats.append(s)
            a = np.zeros((d, d), dtype=complex)
            a[j, k] = -1j
            a[k, j] = 1j
            mats.append(a)
    for l in range(1, d):
        g = np.zeros((d, d), dtype=complex)
        g[np.arange(l), np.arange(l)] = 1.0
        g[l, l] = -l
        mats.append(np.sqrt(2.0 / (l * (l + 1))) * g)
    return mats


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return hermitize(g)


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random isometry ``rows x cols`` (``rows >= cols``)."""
    g = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# matrix JSON interchange: {"rows", "cols", "re", "im"}, row-major

def matrix_to_json(m: np.ndarray) -> dict:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": [float(x) for x in m.real.ravel()],
        "im": [float(x) for x in m.imag.ravel()],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", [0.0] * (rows * cols)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if re.size != rows * cols or im.size != rows * cols:
        raise ValueError(f"matrix JSON entry count does not match {rows}x{cols}")
    m = (re + 1j * im).reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix JSON contains non-finite entries")
    return m

"""Tensor trains (matrix product states) and matrix product operators.

A :class:`TTTensor` stores cores ``C_i`` of shape ``(r_{i-1}, n_i, r_i)``
with ``r_0 = r_d = 1``.  A :class:`TTOperator` stores cores ``W_i`` of shape
``(s_{i-1}, m_i, n_i, s_i)``.  Linearizations are colexicographic throughout,
see :mod:`ttsplit.tensor_core`.
"""

from __future__ import annotations

from math import prod, sqrt
from typing import Iterable, Sequence

import numpy as np

from ._linalg import svd_truncation_rank
from .tensor_core import COMPLEX, REAL, DenseTensor, TensorLike, as_array, field_dtype


class TTTensor:
    """Tensor train with cores ``C_i`` of shape ``(r_{i-1}, n_i, r_i)``."""

    def __init__(self, cores: Iterable[np.ndarray], copy: bool = False):
        cores = [np.array(c, copy=copy) if copy else np.asarray(c) for c in cores]
        if not cores:
            raise ValueError("a tensor train needs at least one core")
        dtype = field_dtype(*cores)
        cores = [c.astype(dtype, copy=False) for c in cores]
        for k, c in enumerate(cores):
            if c.ndim != 3:
                raise ValueError(f"core {k + 1} has {c.ndim} axes, expected 3")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[2] != cores[k + 1].shape[0]:
                raise ValueError(
                    f"rank mismatch between cores {k + 1} and {k + 2}: "
                    f"{cores[k].shape[2]} vs {cores[k + 1].shape[0]}"
                )
        self.cores = cores

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @property
    def dtype(self):
        return self.cores[0].dtype

    @property
    def is_complex(self) -> bool:
        return self.dtype == COMPLEX

    def copy(self) -> "TTTensor":
        return TTTensor([c.copy() for c in self.cores])

    def astype(self, dtype) -> "TTTensor":
        return TTTensor([c.astype(dtype) for c in self.cores])

    def conj(self) -> "TTTensor":
        return TTTensor([c.conj() for c in self.cores])

    def to_dense(self) -> DenseTensor:
        return to_dense(self)

    def norm(self) -> float:
        return tt_norm(self)

    def __add__(self, other: "TTTensor") -> "TTTensor":
        return add(self, other)

    def __sub__(self, other: "TTTensor") -> "TTTensor":
        return add(self, scale(-1.0, other))

    def __neg__(self) -> "TTTensor":
        return scale(-1.0, self)

    def __mul__(self, alpha) -> "TTTensor":
        return scale(alpha, self)

    __rmul__ = __mul__

    def __repr__(self):
        return f"TTTensor(dims={self.dims}, ranks={self.ranks}, dtype={self.dtype})"


class TTOperator:
    """Matrix product operator with cores ``W_i`` of shape ``(s_{i-1}, m_i, n_i, s_i)``.

    Row index ``m_i`` and column index ``n_i`` of each core address the
    operator entry ``A[(l_1..l_d), (k_1..k_d)] = W_1[l_1,k_1] ... W_d[l_d,k_d]``.
    """

    def __init__(self, cores: Iterable[np.ndarray]):
        cores = [np.asarray(c) for c in cores]
        if not cores:
            raise ValueError("an operator needs at least one core")
        dtype = field_dtype(*cores)
        cores = [c.astype(dtype, copy=False) for c in cores]
        for k, c in enumerate(cores):
            if c.ndim != 4:
                raise ValueError(f"operator core {k + 1} has {c.ndim} axes, expected 4")
        if cores[0].shape[0] != 1 or cores[-1].shape[3] != 1:
            raise ValueError("boundary operator ranks must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[3] != cores[k + 1].shape[0]:
                raise ValueError(f"operator rank mismatch between cores {k + 1} and {k + 2}")
        self.cores = cores

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def row_dims(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def col_dims(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[3] for c in self.cores)

    @property
    def dtype(self):
        return self.cores[0].dtype

    @classmethod
    def identity(cls, dims: Sequence[int], dtype=REAL) -> "TTOperator":
        return cls([np.eye(n, dtype=dtype)[None, :, :, None] for n in dims])

    def to_dense(self) -> np.ndarray:
        return operator_to_dense(self)

    def as_tt(self) -> TTTensor:
        """View as a tensor train over fused modes ``m_i * n_i`` (row index fastest)."""
        return TTTensor(
            [c.reshape(c.shape[0], c.shape[1] * c.shape[2], c.shape[3], order="F") for c in self.cores]
        )

    @classmethod
    def from_tt(cls, X: TTTensor, row_dims: Sequence[int], col_dims: Sequence[int]) -> "TTOperator":
        cores = []
        for c, m, n in zip(X.cores, row_dims, col_dims):
            if c.shape[1] != m * n:
                raise ValueError("fused mode size does not match row_dims * col_dims")
            cores.append(c.reshape(c.shape[0], m, n, c.shape[2], order="F"))
        return cls(cores)

    def conj_transpose(self) -> "TTOperator":
        return TTOperator([np.conj(c.transpose(0, 2, 1, 3)) for c in self.cores])

    def __add__(self, other: "TTOperator") -> "TTOperator":
        return operator_add(self, other)

    def __sub__(self, other: "TTOperator") -> "TTOperator":
        return operator_add(self, operator_scale(-1.0, other))

    def __mul__(self, alpha) -> "TTOperator":
        return operator_scale(alpha, self)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, TTOperator):
            return compose(self, other)
        return apply(self, other)

    def __repr__(self):
        return (
            f"TTOperator(row_dims={self.row_dims}, col_dims={self.col_dims}, "
            f"ranks={self.ranks}, dtype={self.dtype})"
        )


# ---------------------------------------------------------------------------
# core unfoldings and evaluation


def left_unfold(C: np.ndarray) -> np.ndarray:
    """``(r_{i-1} n_i) x r_i`` matrix stacking the slices ``C[:, l, :]`` by ``l``."""
    r0, n, r1 = C.shape
    return C.reshape(r0 * n, r1, order="F")


def right_unfold(C: np.ndarray) -> np.ndarray:
    """``(r_i n_i) x r_{i-1}`` matrix stacking ``C[:, :, k].T`` by ``k``."""
    r0, n, r1 = C.shape
    return C.transpose(1, 2, 0).reshape(n * r1, r0, order="F")


def from_left_unfold(M: np.ndarray, r0: int, n: int) -> np.ndarray:
    return M.reshape(r0, n, M.shape[1], order="F")


def from_right_unfold(M: np.ndarray, n: int, r1: int) -> np.ndarray:
    return M.reshape(n, r1, M.shape[1], order="F").transpose(2, 0, 1)


def eval_entry(X: TTTensor, idx: Sequence[int]):
    """Entry ``X(l_1, ..., l_d) = C_1(l_1) ... C_d(l_d)`` (zero-based indices)."""
    if len(idx) != X.d:
        raise IndexError(f"expected {X.d} indices, got {len(idx)}")
    v = np.ones((1, 1), dtype=X.dtype)
    for c, l in zip(X.cores, idx):
        if not 0 <= l < c.shape[1]:
            raise IndexError(f"index {l} out of range for mode of size {c.shape[1]}")
        v = v @ c[:, l, :]
    return v[0, 0]


def left_partial(X: TTTensor, i: int) -> np.ndarray:
    """``X_{<=i}`` as an ``(n_1...n_i) x r_i`` matrix; ``X_{<=0} = [[1]]``."""
    M = np.ones((1, 1), dtype=X.dtype)
    for c in X.cores[:i]:
        # X_{<=i} = (I_{n_i} kron X_{<=i-1}) C_i^<
        T = np.einsum("pa,alb->plb", M, c)
        M = T.reshape(-1, c.shape[2], order="F")
    return M


def right_partial(X: TTTensor, i: int) -> np.ndarray:
    """``X_{>=i}`` as an ``(n_i...n_d) x r_{i-1}`` matrix; ``X_{>=d+1} = [[1]]``."""
    M = np.ones((1, 1), dtype=X.dtype)
    for c in reversed(X.cores[i - 1 :]):
        # X_{>=i} = (X_{>=i+1} kron I_{n_i}) C_i^>
        T = np.einsum("alb,pb->lpa", c, M)
        M = T.reshape(-1, c.shape[0], order="F")
    return M


def partial_products(X: TTTensor, i: int) -> tuple[np.ndarray, np.ndarray]:
    """``(X_{<=i}, X_{>=i+1})`` with ``unfold(X, i) = X_{<=i} X_{>=i+1}^T``."""
    if not 0 <= i <= X.d:
        raise IndexError(f"partial product index {i} outside 0..{X.d}")
    return left_partial(X, i), right_partial(X, i + 1)


def to_dense(X: TTTensor) -> DenseTensor:
    return DenseTensor(left_partial(X, X.d).reshape(X.dims, order="F"))


def from_dense(A: TensorLike, tol: float = 0.0, rank_cap=None) -> TTTensor:
    """TT-SVD: left-to-right sequential truncated SVDs.

    Each edge discards a singular-value tail of norm at most
    ``tol / sqrt(d - 1)`` (absolute), so the total error is at most ``tol``.
    Singular values below the numerical rank threshold are always dropped.
    ``rank_cap`` is an int or a per-edge sequence ``(r_1, ..., r_{d-1})``.
    """
    arr = as_array(A)
    dims = arr.shape
    d = len(dims)
    if d == 1:
        return TTTensor([arr.reshape(1, dims[0], 1)])
    caps = _edge_caps(rank_cap, d)
    edge_tol = tol / sqrt(d - 1)
    cores = []
    C = arr.reshape(-1, order="F")
    r_prev = 1
    for i in range(d - 1):
        M = C.reshape(r_prev * dims[i], -1, order="F")
        U, s, Vh = np.linalg.svd(M, full_matrices=False)
        numeric = s > (max(M.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0))
        keep = max(int(np.count_nonzero(numeric)), 1)
        r = min(svd_truncation_rank(s, edge_tol, caps[i]), keep)
        cores.append(U[:, :r].reshape(r_prev, dims[i], r, order="F"))
        C = s[:r, None] * Vh[:r]
        r_prev = r
    cores.append(C.reshape(r_prev, dims[-1], 1, order="F"))
    return TTTensor(cores)


def _edge_caps(rank_cap, d):
    if rank_cap is None:
        return [None] * (d - 1)
    if np.isscalar(rank_cap):
        return [int(rank_cap)] * (d - 1)
    caps = list(rank_cap)
    if len(caps) == d + 1:
        caps = caps[1:-1]
    if len(caps) != d - 1:
        raise ValueError(f"expected {d - 1} edge rank caps, got {len(caps)}")
    return caps


def rank_one(vectors: Sequence) -> TTTensor:
    """Tensor train of ``v_1 (x) ... (x) v_d`` with all ranks 1."""
    return TTTensor([np.asarray(v).reshape(1, -1, 1) for v in vectors])


def random_tt(dims, ranks, rng=None, complex: bool = False) -> TTTensor:
    """Tensor train with i.i.d. standard normal core entries."""
    rng = np.random.default_rng(rng)
    dims, ranks = tuple(dims), tuple(ranks)
    if len(ranks) != len(dims) + 1 or ranks[0] != 1 or ranks[-1] != 1:
        raise ValueError(f"ranks {ranks} do not fit dims {dims}")
    cores = []
    for i, n in enumerate(dims):
        shape = (ranks[i], n, ranks[i + 1])
        c = rng.standard_normal(shape)
        if complex:
            c = c + 1j * rng.standard_normal(shape)
        cores.append(c)
    return TTTensor(cores)


# ---------------------------------------------------------------------------
# arithmetic


def _check_same_dims(X: TTTensor, Y: TTTensor):
    if X.dims != Y.dims:
        raise ValueError(f"dims mismatch: {X.dims} vs {Y.dims}")


def add(X: TTTensor, Y: TTTensor) -> TTTensor:
    """Block-diagonal sum; ranks add on every inner edge."""
    _check_same_dims(X, Y)
    dtype = field_dtype(X.cores[0], Y.cores[0])
    d = X.d
    if d == 1:
        return TTTensor([X.cores[0].astype(dtype) + Y.cores[0]])
    cores = []
    for i, (a, b) in enumerate(zip(X.cores, Y.cores)):
        n = a.shape[1]
        if i == 0:
            c = np.concatenate([a, b], axis=2).astype(dtype, copy=False)
        elif i == d - 1:
            c = np.concatenate([a, b], axis=0).astype(dtype, copy=False)
        else:
            c = np.zeros((a.shape[0] + b.shape[0], n, a.shape[2] + b.shape[2]), dtype=dtype)
            c[: a.shape[0], :, : a.shape[2]] = a
            c[a.shape[0] :, :, a.shape[2] :] = b
        cores.append(c)
    return TTTensor(cores)


def scale(alpha, X: TTTensor) -> TTTensor:
    cores = [c.copy() for c in X.cores]
    cores[0] = alpha * cores[0]
    return TTTensor(cores)


def linear_combination(terms: Sequence[tuple]) -> TTTensor:
    """``sum_k a_k X_k`` for ``terms = [(a_1, X_1), ...]``."""
    out = None
    for a, X in terms:
        t = scale(a, X)
        out = t if out is None else add(out, t)
    return out


def pad_ranks(X: TTTensor, target_ranks: Sequence[int]) -> TTTensor:
    """Embed the cores of ``X`` into zero-filled cores of larger ranks.

    The dense form is unchanged; this represents ``X + 0`` on a bigger
    rank profile.
    """
    target = tuple(int(r) for r in target_ranks)
    if len(target) != X.d + 1 or target[0] != 1 or target[-1] != 1:
        raise ValueError(f"target ranks {target} do not fit a {X.d}-core train")
    if any(t < r for t, r in zip(target, X.ranks)):
        raise ValueError(f"target ranks {target} smaller than current {X.ranks}")
    cores = []
    for i, c in enumerate(X.cores):
        p = np.zeros((target[i], c.shape[1], target[i + 1]), dtype=X.dtype)
        p[: c.shape[0], :, : c.shape[2]] = c
        cores.append(p)
    return TTTensor(cores)


def inner_tt(X: TTTensor, Y: TTTensor):
    """``<X, Y>``, conjugate-linear in ``X``, by left-to-right contraction."""
    _check_same_dims(X, Y)
    E = np.ones((1, 1), dtype=field_dtype(X.cores[0], Y.cores[0]))
    for a, b in zip(X.cores, Y.cores):
        E = np.einsum("ab,alc,bld->cd", E, a.conj(), b, optimize=True)
    return E[0, 0]


def tt_norm(X: TTTensor) -> float:
    """Norm via a left QR sweep (accurate also for near-cancelling sums)."""
    R = np.ones((1, 1), dtype=X.dtype)
    for c in X.cores:
        M = left_unfold(np.einsum("ab,blc->alc", R, c))
        R = np.linalg.qr(M, mode="r")
    return float(abs(R[0, 0])) if R.size else 0.0


# ---------------------------------------------------------------------------
# operators


def apply(W: TTOperator, X: TTTensor) -> TTTensor:
    """Matrix-vector product ``W X``; ranks multiply, no dense intermediates."""
    if W.col_dims != X.dims:
        raise ValueError(f"operator column dims {W.col_dims} do not match tensor dims {X.dims}")
    cores = []
    for w, c in zip(W.cores, X.cores):
        t = np.einsum("smnt,anb->samtb", w, c, optimize=True)
        s, a, m, tt, b = t.shape
        cores.append(t.reshape(s * a, m, tt * b))
    return TTTensor(cores)


def compose(W: TTOperator, V: TTOperator) -> TTOperator:
    """Operator product ``W V``."""
    if W.col_dims != V.row_dims:
        raise ValueError(f"inner dims mismatch: {W.col_dims} vs {V.row_dims}")
    cores = []
    for w, v in zip(W.cores, V.cores):
        t = np.einsum("smnt,anku->samktu", w, v, optimize=True)
        s, a, m, k, tt, u = t.shape
        cores.append(t.reshape(s * a, m, k, tt * u))
    return TTOperator(cores)


def operator_add(W: TTOperator, V: TTOperator) -> TTOperator:
    if W.row_dims != V.row_dims or W.col_dims != V.col_dims:
        raise ValueError("operator dims mismatch")
    fused = add(W.as_tt(), V.as_tt())
    return TTOperator.from_tt(fused, W.row_dims, W.col_dims)


def operator_scale(alpha, W: TTOperator) -> TTOperator:
    cores = [c.copy() for c in W.cores]
    cores[0] = alpha * cores[0]
    return TTOperator(cores)


def operator_to_dense(W: TTOperator) -> np.ndarray:
    """Dense ``(prod m) x (prod n)`` matrix with colexicographic rows and columns."""
    T = W.as_tt().to_dense().data  # modes (m_i + m_i * n_i) fused per core
    d = W.d
    shape = []
    for m, n in zip(W.row_dims, W.col_dims):
        shape += [m, n]
    T = T.reshape(shape, order="F")
    perm = list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2))
    T = T.transpose(perm)
    return T.reshape(prod(W.row_dims), prod(W.col_dims), order="F")


def operator_from_dense(A: np.ndarray, row_dims, col_dims, tol: float = 0.0) -> TTOperator:
    """Exact (or ``tol``-truncated) MPO of a dense matrix; for small cases."""
    row_dims, col_dims = tuple(row_dims), tuple(col_dims)
    d = len(row_dims)
    T = np.asarray(A).reshape(row_dims + col_dims, order="F")
    perm = []
    for k in range(d):
        perm += [k, d + k]
    T = T.transpose(perm)
    fused = T.reshape([m * n for m, n in zip(row_dims, col_dims)], order="F")
    return TTOperator.from_tt(from_dense(fused, tol=tol), row_dims, col_dims)


def kron_dense(mats: Sequence[np.ndarray]) -> np.ndarray:
    """Dense operator of ``A_1 (x) ... (x) A_d`` in this package's ordering.

    With colexicographic indices the first factor acts on the fastest index,
    so this equals ``numpy.kron(A_d, ..., A_1)``.
    """
    out = np.ones((1, 1))
    for M in mats:
        out = np.kron(M, out)
    return out


class TTSum:
    """Unevaluated linear combination ``sum_k a_k X_k`` of tensor trains.

    Contractions against orthogonal frames are done term by term, so the
    sum is never assembled (its ranks would add up).
    """

    def __init__(self, terms: Sequence[tuple]):
        terms = [(a, X) for a, X in terms]
        if not terms:
            raise ValueError("empty sum")
        dims = terms[0][1].dims
        for _, X in terms:
            if X.dims != dims:
                raise ValueError(f"dims mismatch: {X.dims} vs {dims}")
        self.terms = terms

    @property
    def dims(self) -> tuple[int, ...]:
        return self.terms[0][1].dims

    @property
    def d(self) -> int:
        return len(self.dims)

    def to_tt(self) -> TTTensor:
        return linear_combination(self.terms)

    def to_dense(self) -> DenseTensor:
        out = None
        for a, X in self.terms:
            t = a * X.to_dense().data
            out = t if out is None else out + t
        return DenseTensor(out)

    def __neg__(self) -> "TTSum":
        return TTSum([(-a, X) for a, X in self.terms])

    def __mul__(self, alpha) -> "TTSum":
        return TTSum([(alpha * a, X) for a, X in self.terms])

    __rmul__ = __mul__

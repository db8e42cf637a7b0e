"""Tangent space projector of the fixed-rank TT manifold and its splitting.

Notation: for a frame with left-orthogonal cores ``L_j`` and right-orthogonal
cores ``R_j`` (both of the same tensor ``X``),
``P_{<=i} = Q_{<=i} Q_{<=i}^H`` is built from ``L_1..L_i`` and
``P_{>=i} = conj(Q_{>=i}) Q_{>=i}^T`` from ``R_i..R_d``.  The projectors are
never materialized; everything goes through the contractions

    core_delta(i) = (I (x) Q_{<=i-1}^H) Z^<i> conj(Q_{>=i+1})   (r_{i-1}, n_i, r_i)
    bond_delta(i) = Q_{<=i}^H Z^<i> conj(Q_{>=i+1})            (r_i, r_i)

provided by the contractor classes below for dense, TT and summed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ortho import left_orthogonalize, right_orthogonalize
from .tensor_core import DenseTensor, as_array, field_dtype
from .tt_core import TTSum, TTTensor, from_left_unfold, left_unfold


# ---------------------------------------------------------------------------
# contractions of increments against (partially known) orthogonal frames


class DenseContractor:
    """Contractions of a full tensor; cost ``O(N r)`` per call (small cases only)."""

    def __init__(self, Z, left=None, right=None):
        self.Z = as_array(Z)
        d = self.Z.ndim
        self.left = list(left) if left is not None else [None] * d
        self.right = list(right) if right is not None else [None] * d

    @property
    def d(self):
        return self.Z.ndim

    def set_left(self, i, Q):
        self.left[i - 1] = Q

    def set_right(self, i, Q):
        self.right[i - 1] = Q

    def _contract(self, nleft, first_right):
        E = self.Z[np.newaxis, ..., np.newaxis]
        for j in range(nleft):
            E = np.tensordot(self.left[j].conj(), E, axes=([0, 1], [0, 1]))
        for j in range(self.d - 1, first_right - 2, -1):
            E = np.tensordot(E, self.right[j].conj(), axes=([-2, -1], [1, 2]))
        return E

    def core_delta(self, i):
        return self._contract(i - 1, i + 1)

    def bond_delta(self, i):
        return self._contract(i, i + 1)


class TTContractor:
    """Contractions of a tensor train through cached left/right environments.

    ``LE_i`` has shape ``(r_i, s_i)`` and ``RE_i`` has shape ``(s_{i-1}, r_{i-1})``
    where ``s`` are the ranks of the contracted tensor.  Setting a frame core
    invalidates only the environments that depend on it.
    """

    def __init__(self, A: TTTensor, left=None, right=None, coef=1.0):
        self.A = A
        self.coef = coef
        d = A.d
        self.left = list(left) if left is not None else [None] * d
        self.right = list(right) if right is not None else [None] * d
        dtype = field_dtype(A.cores[0], *(c for c in self.left + self.right if c is not None))
        self._le = [np.ones((1, 1), dtype=dtype)] + [None] * d
        self._re = [None] * (d + 1) + [np.ones((1, 1), dtype=dtype)]

    @property
    def d(self):
        return self.A.d

    def set_left(self, i, Q):
        self.left[i - 1] = Q
        for j in range(i, self.d + 1):
            self._le[j] = None

    def set_right(self, i, Q):
        self.right[i - 1] = Q
        for j in range(1, i + 1):
            self._re[j] = None

    def left_env(self, i):
        if self._le[i] is None:
            Q = self.left[i - 1]
            self._le[i] = np.einsum(
                "ax,alb,xly->by", self.left_env(i - 1), Q.conj(), self.A.cores[i - 1], optimize=True
            )
        return self._le[i]

    def right_env(self, i):
        if self._re[i] is None:
            Q = self.right[i - 1]
            self._re[i] = np.einsum(
                "xly,yb,alb->xa", self.A.cores[i - 1], self.right_env(i + 1), Q.conj(), optimize=True
            )
        return self._re[i]

    def core_delta(self, i):
        out = np.einsum(
            "ax,xly,yb->alb", self.left_env(i - 1), self.A.cores[i - 1], self.right_env(i + 1), optimize=True
        )
        return self.coef * out

    def bond_delta(self, i):
        return self.coef * (self.left_env(i) @ self.right_env(i + 1))


class SumContractor:
    """Term-wise contractions of a :class:`TTSum` (or any list of contractors)."""

    def __init__(self, parts):
        self.parts = list(parts)

    @property
    def d(self):
        return self.parts[0].d

    def set_left(self, i, Q):
        for p in self.parts:
            p.set_left(i, Q)

    def set_right(self, i, Q):
        for p in self.parts:
            p.set_right(i, Q)

    def core_delta(self, i):
        return sum(p.core_delta(i) for p in self.parts)

    def bond_delta(self, i):
        return sum(p.bond_delta(i) for p in self.parts)


def make_contractor(Z, left=None, right=None):
    """Contractor for a dense array or :class:`DenseTensor`, a TT, or a :class:`TTSum`."""
    if isinstance(Z, TTTensor):
        return TTContractor(Z, left, right)
    if isinstance(Z, TTSum):
        return SumContractor([TTContractor(X, left, right, coef=a) for a, X in Z.terms])
    if isinstance(Z, (DenseTensor, np.ndarray)):
        return DenseContractor(Z, left, right)
    raise TypeError(f"cannot contract an increment of type {type(Z).__name__}")


def _dims_of(Z):
    if isinstance(Z, (TTTensor, TTSum)):
        return tuple(Z.dims)
    return tuple(as_array(Z).shape)


# ---------------------------------------------------------------------------
# frame and projections


@dataclass(frozen=True)
class ProjectorFrame:
    """Left- and right-orthogonal cores of the same tensor ``X``."""

    left: tuple
    right: tuple

    @property
    def d(self) -> int:
        return len(self.left)

    @property
    def dims(self):
        return tuple(c.shape[1] for c in self.left)

    @property
    def ranks(self):
        return (1,) + tuple(c.shape[2] for c in self.left)

    def contractor(self, Z):
        if _dims_of(Z) != self.dims:
            raise ValueError(f"dims mismatch: {_dims_of(Z)} vs {self.dims}")
        return make_contractor(Z, self.left, self.right)


def build_frame(X: TTTensor) -> ProjectorFrame:
    L = left_orthogonalize(X)
    R = right_orthogonalize(X)
    return ProjectorFrame(tuple(L.cores), tuple(R.cores))


@dataclass
class TangentVector:
    """``sum_i Q_{<=i-1} dB_i Q_{>=i+1}^T`` with the gauge ``L_i^{<H} dB_i^< = 0`` for ``i < d``."""

    frame: ProjectorFrame
    dB: list

    def component(self, i) -> TTTensor:
        """The ``i``-th summand as a tensor train (1-based)."""
        f = self.frame
        return TTTensor(list(f.left[: i - 1]) + [self.dB[i - 1]] + list(f.right[i:]))

    def to_tt(self) -> TTTensor:
        """Block embedding with ranks ``2 r_i`` (``r_i`` at a single-core train)."""
        f, d = self.frame, self.frame.d
        if d == 1:
            return TTTensor([self.dB[0]])
        cores = []
        for i in range(d):
            L, R, B = f.left[i], f.right[i], self.dB[i]
            r0, n, r1 = L.shape
            dtype = field_dtype(L, R, B)
            if i == 0:
                c = np.concatenate([B, L], axis=2).astype(dtype)
            elif i == d - 1:
                c = np.concatenate([R, B], axis=0).astype(dtype)
            else:
                # state 0..r0-1: increment already placed, r0..: not yet placed
                c = np.zeros((2 * r0, n, 2 * r1), dtype=dtype)
                c[:r0, :, :r1] = R
                c[r0:, :, :r1] = B
                c[r0:, :, r1:] = L
            cores.append(c)
        return TTTensor(cores)

    def to_dense(self) -> DenseTensor:
        return self.to_tt().to_dense()


def project(frame: ProjectorFrame, Z) -> TangentVector:
    """Orthogonal projection of ``Z`` (dense, TT or :class:`TTSum`) onto the tangent space."""
    con = frame.contractor(Z)
    d = frame.d
    dB = []
    for i in range(1, d + 1):
        D = con.core_delta(i)
        if i < d:
            Q = left_unfold(frame.left[i - 1])
            M = left_unfold(D)
            M = M - Q @ (Q.conj().T @ M)
            D = from_left_unfold(M, D.shape[0], D.shape[1])
        dB.append(D)
    return TangentVector(frame, dB)


def _check_index(i, lo, hi):
    if not lo <= i <= hi:
        raise IndexError(f"index {i} outside {lo}..{hi}")


def contract_delta_plus(frame: ProjectorFrame, Z, i: int) -> np.ndarray:
    """Left unfolding of ``(I (x) Q_{<=i-1}^H) Z^<i> conj(Q_{>=i+1})``."""
    _check_index(i, 1, frame.d)
    return left_unfold(frame.contractor(Z).core_delta(i))


def contract_delta_minus(frame: ProjectorFrame, Z, i: int) -> np.ndarray:
    """``Q_{<=i}^H Z^<i> conj(Q_{>=i+1})``, an ``r_i x r_i`` matrix."""
    _check_index(i, 1, frame.d)
    return frame.contractor(Z).bond_delta(i)


def project_plus(frame: ProjectorFrame, Z, i: int):
    """``Ten_i[(I (x) P_{<=i-1}) Z^<i> P_{>=i+1}]``; TT for TT input, dense otherwise."""
    _check_index(i, 1, frame.d)
    D = frame.contractor(Z).core_delta(i)
    X = TTTensor(list(frame.left[: i - 1]) + [D] + list(frame.right[i:]))
    return X if isinstance(Z, (TTTensor, TTSum)) else X.to_dense()


def project_minus(frame: ProjectorFrame, Z, i: int):
    """``Ten_i[P_{<=i} Z^<i> P_{>=i+1}]``; TT for TT input, dense otherwise."""
    _check_index(i, 1, frame.d - 1)
    S = frame.contractor(Z).bond_delta(i)
    nxt = np.einsum("ab,blc->alc", S, frame.right[i])
    X = TTTensor(list(frame.left[:i]) + [nxt] + list(frame.right[i + 1 :]))
    return X if isinstance(Z, (TTTensor, TTSum)) else X.to_dense()

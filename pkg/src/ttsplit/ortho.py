"""Left/right orthogonalization, recursive SVD form and center shifts.

An :class:`OrthTT` with center ``i`` represents
``unfold(X, i) = Q_{<=i} S_i Q_{>=i+1}^T`` where cores ``1..i`` are left
orthogonal and cores ``i+1..d`` are right orthogonal.  Over the complex
field orthogonality is with respect to the conjugate transpose while the
factorization itself uses the plain transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import qr_positive, svd_truncation_rank
from .tt_core import (
    TTTensor,
    from_left_unfold,
    from_right_unfold,
    left_unfold,
    right_unfold,
)


@dataclass
class OrthTT:
    """Q-cores with orthogonality center ``center`` and center factor ``S``.

    ``S`` is ``r_center x r_center``.  Cores are not copied on construction;
    functions in this module always build fresh core lists.
    """

    cores: list
    center: int
    S: np.ndarray

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def dims(self):
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self):
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @property
    def dtype(self):
        return self.cores[0].dtype

    @property
    def base(self) -> TTTensor:
        """The Q-cores as a tensor train (without ``S``)."""
        return TTTensor(self.cores)

    def to_tt(self) -> TTTensor:
        """Tensor train with ``S`` absorbed into a neighbouring core."""
        cores = list(self.cores)
        i = self.center
        if i >= 1:
            cores[i - 1] = np.einsum("alb,bc->alc", cores[i - 1], self.S)
        else:
            # center 0: S is 1x1 and multiplies the first core
            cores[0] = self.S[0, 0] * cores[0]
        return TTTensor(cores)

    def to_dense(self):
        return self.to_tt().to_dense()

    def norm(self) -> float:
        return float(np.linalg.norm(self.S))

    def copy(self) -> "OrthTT":
        return OrthTT([c.copy() for c in self.cores], self.center, self.S.copy())


def _left_qr_core(C):
    r0, n, _ = C.shape
    Q, R = qr_positive(left_unfold(C))
    return from_left_unfold(Q, r0, n), R


def _right_qr_core(C):
    """``C^> = Q^> R`` so that ``C[a,l,b] = sum_c R[c,a] Q[c,l,b]``."""
    _, n, r1 = C.shape
    Q, R = qr_positive(right_unfold(C))
    return from_right_unfold(Q, n, r1), R


def _sweep_left(cores, upto, dtype):
    cores = list(cores)
    R = np.ones((1, 1), dtype=dtype)
    for i in range(upto):
        C = np.einsum("ab,blc->alc", R, cores[i])
        cores[i], R = _left_qr_core(C)
    return cores, R


def _sweep_right(cores, downto, dtype):
    cores = list(cores)
    R = np.ones((1, 1), dtype=dtype)
    for i in range(len(cores) - 1, downto - 1, -1):
        C = np.einsum("alb,cb->alc", cores[i], R)
        cores[i], R = _right_qr_core(C)
    return cores, R


def check_feasible_ranks(dims, ranks):
    """Raise if some core cannot have an orthonormal left and right unfolding."""
    for i, n in enumerate(dims):
        if ranks[i + 1] > ranks[i] * n or ranks[i] > n * ranks[i + 1]:
            raise ValueError(
                f"ranks {tuple(ranks)} are not attainable for dims {tuple(dims)} "
                f"(core {i + 1})"
            )


def left_orthogonalize(X: TTTensor) -> OrthTT:
    """Left-to-right QR sweep, center ``d``; ``S`` is the final ``1 x 1`` R."""
    check_feasible_ranks(X.dims, X.ranks)
    cores, R = _sweep_left(X.cores, X.d, X.dtype)
    return OrthTT(cores, X.d, R)


def right_orthogonalize(X: TTTensor) -> OrthTT:
    """Right-to-left QR sweep, center ``0``.

    The recursion is ``(R_{i+1} (x) I) C_i^> = Q_i^> R_i``.  Since
    ``X_{>=i} = Q_{>=i} R_i`` the center factor is ``R_1^T``.
    """
    check_feasible_ranks(X.dims, X.ranks)
    cores, R = _sweep_right(X.cores, 0, X.dtype)
    return OrthTT(cores, 0, R.T.copy())


def orthogonalize_to(X: TTTensor, i: int) -> OrthTT:
    """Recursive SVD form with center ``i``: ``S_i = R_i R_{i+1}^T``."""
    d = X.d
    if not 0 <= i <= d:
        raise IndexError(f"center {i} outside 0..{d}")
    check_feasible_ranks(X.dims, X.ranks)
    cores, RL = _sweep_left(X.cores, i, X.dtype)
    cores, RR = _sweep_right(cores, i, X.dtype)
    return OrthTT(cores, i, RL @ RR.T)


def shift_center_right(Y: OrthTT) -> OrthTT:
    """Move the center from ``i`` to ``i + 1``: ``(I (x) S_i) Q_{i+1}^< = Q' S'``."""
    i = Y.center
    if i >= Y.d:
        raise IndexError("center already at the right boundary")
    C = np.einsum("ab,blc->alc", Y.S, Y.cores[i])
    Q, S = _left_qr_core(C)
    cores = list(Y.cores)
    cores[i] = Q
    return OrthTT(cores, i + 1, S)


def shift_center_left(Y: OrthTT) -> OrthTT:
    """Move the center from ``i`` to ``i - 1`` via a QR of ``(Q_i S_i)^>``."""
    i = Y.center
    if i <= 0:
        raise IndexError("center already at the left boundary")
    C = np.einsum("alb,bc->alc", Y.cores[i - 1], Y.S)
    Q, R = _right_qr_core(C)
    cores = list(Y.cores)
    cores[i - 1] = Q
    return OrthTT(cores, i - 1, R.T.copy())


def move_center(Y: OrthTT, i: int) -> OrthTT:
    while Y.center < i:
        Y = shift_center_right(Y)
    while Y.center > i:
        Y = shift_center_left(Y)
    return Y


def round_tt(X: TTTensor, tol: float = 0.0, max_rank=None) -> TTTensor:
    """Truncate ranks by a right-to-left QR sweep followed by left-to-right SVDs.

    ``tol`` is relative: the total error is at most ``tol * ||X||``, split
    evenly (in squares) over the ``d - 1`` edges.  Singular values below the
    numerical rank threshold are always dropped.
    """
    d = X.d
    if d == 1:
        return X.copy()
    cores, R = _sweep_right(X.cores, 1, X.dtype)
    cores[0] = np.einsum("alb,cb->alc", cores[0], R)
    nrm = float(np.linalg.norm(cores[0]))
    edge_tol = tol * nrm / np.sqrt(d - 1)
    caps = [max_rank] * (d - 1) if max_rank is None or np.isscalar(max_rank) else list(max_rank)
    for i in range(d - 1):
        C = cores[i]
        r0, n, _ = C.shape
        U, s, Vh = np.linalg.svd(left_unfold(C), full_matrices=False)
        numeric = s > (max(r0 * n, C.shape[2]) * np.finfo(float).eps * max(nrm, s[0]))
        keep = max(int(np.count_nonzero(numeric)), 1)
        r = min(svd_truncation_rank(s, edge_tol, caps[i]), keep)
        cores[i] = from_left_unfold(U[:, :r], r0, n)
        SV = s[:r, None] * Vh[:r]
        cores[i + 1] = np.einsum("ab,blc->alc", SV, cores[i + 1])
    return TTTensor(cores)

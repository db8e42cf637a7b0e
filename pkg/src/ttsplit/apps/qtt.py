"""Quantized TT operators: the Dirichlet finite-difference Laplacian."""

from __future__ import annotations

import numpy as np

from ..ortho import round_tt
from ..tt_core import TTOperator, operator_add, operator_scale


def _shift_cores(d: int):
    """Cores of the lower shift ``S[y, x] = 1`` iff ``y = x + 1`` on ``2**d`` points.

    Bits are least significant first (core 1 varies fastest); the bond carries
    the carry bit of the binary increment, which starts at 1 and must vanish
    after the most significant bit.
    """
    W = np.zeros((2, 2, 2, 2))
    for c in range(2):
        for x in range(2):
            W[c, x ^ c, x, x & c] = 1.0
    cores = [W.copy() for _ in range(d)]
    cores[0] = cores[0][1:2]
    cores[-1] = cores[-1][..., 0:1]
    return cores


def shift_operator(d: int) -> TTOperator:
    return TTOperator(_shift_cores(d))


def laplace_1d(d: int) -> TTOperator:
    """``tridiag(-1, 2, -1)`` of size ``2**d`` as a QTT operator (ranks before rounding 5)."""
    if d < 1:
        raise ValueError("need at least one binary mode")
    S = shift_operator(d)
    eye = TTOperator.identity([2] * d)
    return operator_add(operator_scale(2.0, eye), operator_scale(-1.0, operator_add(S, S.conj_transpose())))


def _kron_chain(blocks):
    cores = []
    for b in blocks:
        cores += list(b.cores)
    return TTOperator(cores)


def build_qtt_laplace(M: int, d: int, tol: float = 1e-12) -> TTOperator:
    """``sum_j I (x) .. (x) L_j (x) .. (x) I`` over ``M`` spatial factors of ``d`` bits each.

    Spatial factor ``j`` occupies cores ``(j-1) d + 1 .. j d``.  The result is
    rounded at relative accuracy ``tol`` on the fused ``(2 x 2)`` modes.
    """
    if M < 1 or d < 1:
        raise ValueError("need M >= 1 and d >= 1")
    L = laplace_1d(d)
    eye = TTOperator.identity([2] * d)
    total = None
    for j in range(M):
        term = _kron_chain([L if k == j else eye for k in range(M)])
        total = term if total is None else operator_add(total, term)
    fused = round_tt(total.as_tt(), tol=tol)
    return TTOperator.from_tt(fused, [2] * (M * d), [2] * (M * d))

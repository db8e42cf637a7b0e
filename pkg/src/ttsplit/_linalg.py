import numpy as np


def qr_positive(A):
    """Reduced Householder QR with diag(R) real and nonnegative.

    Zero columns of ``A`` still give orthonormal columns of ``Q`` (LAPACK
    completes them from the Householder reflectors); nothing is truncated.
    """
    Q, R = np.linalg.qr(A, mode="reduced")
    diag = np.diagonal(R)
    mag = np.abs(diag)
    phase = np.ones_like(diag)
    nz = mag > 0
    phase[nz] = diag[nz] / mag[nz]
    Q = Q * phase[np.newaxis, :]
    R = np.conj(phase)[:, np.newaxis] * R
    return Q, R


def svd_truncation_rank(s, abs_tol, cap=None):
    """Smallest rank whose discarded tail has Euclidean norm <= abs_tol.

    Ties keep the lower index: the tail is always a suffix of the
    descending singular values.
    """
    n = len(s)
    tail = np.sqrt(np.cumsum((s[::-1] ** 2)))[::-1]  # tail[k] = ||s[k:]||
    rank = n
    for k in range(n):
        if tail[k] <= abs_tol:
            rank = k
            break
    rank = max(rank, 1)
    if cap is not None:
        rank = min(rank, int(cap))
    return rank

"""Krylov approximation of ``exp(tau L) v`` for matrix-free linear maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

BREAKDOWN_TOL = 1e-14


class KrylovError(RuntimeError):
    """Raised when the Krylov exponential does not reach the requested tolerance."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass
class LinearMap:
    """Matrix-free linear map on vectors of length ``dim``.

    ``structure`` is ``"general"``, ``"hermitian"`` or ``"antihermitian"``;
    the latter two enable the Lanczos short recurrence.
    """

    matvec: Callable[[np.ndarray], np.ndarray]
    dim: int
    structure: str = "general"

    def __call__(self, v):
        return self.matvec(v)


@dataclass
class KrylovInfo:
    matvecs: int = 0
    substeps: int = 0
    residual: float = 0.0


def _expm_phi1(A, tau):
    """``exp(A)`` and ``tau phi_1(A) e_1`` from one augmented exponential."""
    k = A.shape[0]
    aug = np.zeros((k + 1, k + 1), dtype=np.result_type(A, tau))
    aug[:k, :k] = A
    aug[0, k] = tau
    F = expm(aug)
    return F[:k, :k], F[:k, k]


def _krylov_step(L: LinearMap, v, tau, tol, m_max, info):
    """One Krylov approximation over ``tau``; returns ``(w, error_estimate)``."""
    beta = np.linalg.norm(v)
    if beta == 0.0:
        return np.zeros_like(v), 0.0
    n = v.shape[0]
    m_max = min(m_max, n)
    dtype = np.result_type(v.dtype, complex) if L.structure == "antihermitian" else v.dtype
    V = np.zeros((m_max + 1, n), dtype=np.result_type(dtype, v.dtype))
    H = np.zeros((m_max + 1, m_max), dtype=V.dtype)
    V[0] = v / beta
    short = L.structure in ("hermitian", "antihermitian")
    sign = 1.0 if L.structure == "hermitian" else -1.0
    err = np.inf
    for j in range(m_max):
        w = np.asarray(L(V[j]), dtype=V.dtype)
        info.matvecs += 1
        if short:
            if j > 0:
                H[j - 1, j] = sign * np.conj(H[j, j - 1])
                w = w - H[j - 1, j] * V[j - 1]
            H[j, j] = np.vdot(V[j], w)
            w = w - H[j, j] * V[j]
        else:
            for k in range(j + 1):
                H[k, j] = np.vdot(V[k], w)
                w = w - H[k, j] * V[k]
        # one step of reorthogonalization keeps the basis honest in both modes
        corr = V[: j + 1].conj() @ w
        w = w - corr @ V[: j + 1]
        H[: j + 1, j] += corr
        h = np.linalg.norm(w)
        E, phi = _expm_phi1(tau * H[: j + 1, : j + 1], tau)
        if h < BREAKDOWN_TOL * max(1.0, np.abs(H[: j + 1, : j + 1]).max()):
            return beta * (V[: j + 1].T @ E[:, 0]), 0.0
        H[j + 1, j] = h
        V[j + 1] = w / h
        # residual of the Krylov approximation, integrated over [0, tau]; unlike
        # the bare (j, 0) entry of exp(tau H) it does not underflow for strongly
        # damped projected maps
        err = beta * h * abs(phi[j])
        if err <= tol * beta:
            return beta * (V[: j + 1].T @ E[:, 0]), err
    return beta * (V[:m_max].T @ E[:, 0]), err


def expm_multiply(L, v, tau: float, tol: float = 1e-8, m_max: int = 30, max_halvings: int = 20, info=None):
    """``exp(tau L) v`` by Arnoldi (or Lanczos for (anti-)Hermitian ``L``).

    If the basis cap ``m_max`` is reached before the residual estimate drops
    below ``tol * ||v||``, the interval is split in two and each half is
    solved recursively.  ``L`` may be a :class:`LinearMap`, a dense matrix or
    a callable (then treated as a general map).
    """
    v = np.asarray(v)
    if not isinstance(L, LinearMap):
        if callable(L):
            L = LinearMap(L, v.shape[0])
        else:
            M = np.asarray(L)
            L = LinearMap(lambda x, M=M: M @ x, M.shape[1])
    if L.dim != v.shape[0]:
        raise ValueError(f"map of dimension {L.dim} applied to vector of length {v.shape[0]}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    info = info if info is not None else KrylovInfo()
    return _expm_rec(L, v, tau, tol, m_max, max_halvings, info)


def _expm_rec(L, v, tau, tol, m_max, depth, info):
    w, err = _krylov_step(L, v, tau, tol, m_max, info)
    beta = np.linalg.norm(v)
    if err <= tol * max(beta, np.finfo(float).tiny):
        info.substeps += 1
        info.residual = max(info.residual, err / beta if beta else 0.0)
        return w
    if depth == 0:
        raise KrylovError(
            f"Krylov exponential did not converge (residual {err / beta:.3e}, tol {tol:.1e})", err / beta
        )
    half = _expm_rec(L, v, tau / 2, tol / 2, m_max, depth - 1, info)
    return _expm_rec(L, half, tau / 2, tol / 2, m_max, depth - 1, info)

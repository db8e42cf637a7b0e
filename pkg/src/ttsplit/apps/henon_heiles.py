"""Henon-Heiles Schroedinger dynamics on a finite-difference grid, with an optional CAP."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..integrator import LinearVectorField, StepConfig, step_order2
from ..ortho import right_orthogonalize
from ..tt_core import TTOperator, TTTensor, pad_ranks, rank_one


@dataclass
class HenonHeilesSpec:
    """Model parameters.

    ``domain`` is the interval per mode; grid points are the ``n`` interior
    nodes of a uniform Dirichlet grid on it.  The CAP is
    ``W(q) = i eta sum_k (|q_k - cap_right|_+^b_r + |q_k - cap_left|_-^b_l)``
    and is added to ``H`` when ``cap`` is true.
    """

    f: int = 4
    n: int = 16
    domain: tuple = (-7.0, 7.0)
    lam: float = 0.111803
    cap: bool = False
    eta: float = -1.0
    cap_left: float = -6.0
    cap_right: float = 6.0
    b_l: int = 3
    b_r: int = 3
    center: float = 2.0

    def __post_init__(self):
        if self.n < 8 or self.f < 2:
            raise ValueError("need n >= 8 and f >= 2")
        lo, hi = self.domain
        if not hi > lo:
            raise ValueError("invalid grid domain")
        if int(self.b_l) != self.b_l or int(self.b_r) != self.b_r or self.b_l < 1 or self.b_r < 1:
            raise ValueError("CAP exponents must be positive integers")

    def grid(self) -> np.ndarray:
        lo, hi = self.domain
        dx = (hi - lo) / (self.n + 1)
        return lo + dx * np.arange(1, self.n + 1)


def cap_profile(q, spec: HenonHeilesSpec) -> np.ndarray:
    """Nonnegative absorbing profile; zero on ``[cap_left, cap_right]``."""
    q = np.asarray(q, dtype=float)
    right = np.clip(q - spec.cap_right, 0.0, None) ** spec.b_r
    left = np.clip(spec.cap_left - q, 0.0, None) ** spec.b_l
    return right + left


def one_mode_terms(spec: HenonHeilesSpec):
    """``(kinetic + harmonic, q, q**2)`` as dense ``n x n`` matrices on the grid."""
    q = spec.grid()
    dx = q[1] - q[0]
    lap = (np.diag(np.full(spec.n - 1, 1.0), -1) - 2 * np.eye(spec.n) + np.diag(np.full(spec.n - 1, 1.0), 1)) / dx**2
    h0 = -0.5 * lap + np.diag(0.5 * q**2)
    return h0, np.diag(q), np.diag(q**2)


def build_henon_heiles(spec: HenonHeilesSpec):
    """Hamiltonian MPO (complex, bond dimension 3) and the normalized product initial state.

    Automaton states on each bond: 0 = all terms placed, 1 = a coupling
    ``q_k^2`` waits for its ``q_{k+1}``, 2 = nothing placed yet.
    """
    f, n = spec.f, spec.n
    q = spec.grid()
    h0, Q1, Q2 = one_mode_terms(spec)
    eye = np.eye(n)
    cores = []
    for k in range(f):
        local = h0.astype(complex)
        if k >= 1:
            local = local - (spec.lam / 3.0) * np.diag(q**3)
        if spec.cap:
            local = local + 1j * spec.eta * np.diag(cap_profile(q, spec))
        W = np.zeros((3, n, n, 3), dtype=complex)
        W[0, :, :, 0] = eye
        W[1, :, :, 0] = Q1
        W[2, :, :, 0] = local
        W[2, :, :, 1] = spec.lam * Q2
        W[2, :, :, 2] = eye
        if k == 0:
            W = W[2:3]
        if k == f - 1:
            W = W[..., 0:1]
        cores.append(W)
    H = TTOperator(cores)
    g = np.exp(-((q - spec.center) ** 2) / 2).astype(complex)
    g /= np.linalg.norm(g)
    psi0 = rank_one([g] * f)
    return H, psi0


def dense_hamiltonian(spec: HenonHeilesSpec) -> np.ndarray:
    """Dense assembly from one-mode pieces (test oracle, small ``f`` and ``n`` only)."""
    from ..tt_core import kron_dense

    f, n = spec.f, spec.n
    q = spec.grid()
    h0, Q1, Q2 = one_mode_terms(spec)
    eye = np.eye(n)

    def embed(ops: dict):
        return kron_dense([ops.get(k, eye) for k in range(f)])

    H = np.zeros((n**f, n**f), dtype=complex)
    for k in range(f):
        H += embed({k: h0})
    for k in range(f - 1):
        H += spec.lam * embed({k: Q2, k + 1: Q1})
        H -= (spec.lam / 3.0) * embed({k + 1: np.diag(q**3)})
    if spec.cap:
        for k in range(f):
            H += 1j * spec.eta * embed({k: np.diag(cap_profile(q, spec))})
    return H


@dataclass
class Trajectory:
    t: np.ndarray
    a: np.ndarray
    norms: np.ndarray
    psi: TTTensor | None = None
    reports: list = field(default_factory=list)


def autocorrelation(psi: TTTensor, psi0: TTTensor) -> complex:
    """``a(t) = sum conj(psi0) psi(t)``, so that an eigenstate gives ``exp(-i E t)``."""
    from ..tt_core import inner_tt

    return complex(inner_tt(psi0, psi))


def propagate(H: TTOperator, psi0: TTTensor, T: float, h: float, ranks, cfg: StepConfig | None = None,
              hermitian: bool | None = None, callback=None) -> Trajectory:
    """Second-order splitting for ``i psi' = H psi`` with Krylov local solves.

    ``hermitian`` selects the Lanczos recurrence for ``-iH``; by default it is
    detected from the operator cores (any imaginary diagonal means a CAP).
    """
    if h <= 0:
        raise ValueError("time step must be positive")
    cfg = cfg or StepConfig(order=2, local_solver="krylov_expm")
    nsteps = int(round(T / h))
    if hermitian is None:
        hermitian = _is_hermitian(H)
    field_ = LinearVectorField(H * (-1j), structure="antihermitian" if hermitian else "general")
    Y = right_orthogonalize(pad_ranks(psi0.astype(complex), tuple(ranks)))
    ts = h * np.arange(nsteps + 1)
    a = np.empty(nsteps + 1, dtype=complex)
    norms = np.empty(nsteps + 1)
    a[0] = autocorrelation(Y.to_tt(), psi0)
    norms[0] = Y.norm()
    reports = []
    for k in range(nsteps):
        Y, rep = step_order2(Y, field_, ts[k], ts[k + 1], cfg)
        psi = Y.to_tt()
        a[k + 1] = autocorrelation(psi, psi0)
        norms[k + 1] = Y.norm()
        reports.append(rep)
        if callback is not None:
            callback(k + 1, ts[k + 1], Y)
    return Trajectory(ts, a, norms, Y.to_tt(), reports)


def _is_hermitian(H: TTOperator) -> bool:
    return all(np.allclose(c, np.conj(c.transpose(0, 2, 1, 3))) for c in H.cores)

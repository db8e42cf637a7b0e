"""Projector-splitting time integrators on the fixed-rank TT manifold.

One step of order 1 is a single left-to-right sweep alternating K-substeps
(``+``, node ``i``) and S-substeps (``-``, bond ``i``).  Order 2 composes the
sweep over the first half step with its adjoint (a right-to-left sweep) over
the second half, merging the two K-substeps at the last node.

Increments are either explicit (the change of a given tensor curve, solved
in closed form) or defined by a vector field ``F(t, Y)`` (small local
differential equations for K and S).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._linalg import qr_positive
from .krylov import KrylovInfo, LinearMap, expm_multiply
from .ortho import OrthTT, right_orthogonalize
from .tangent import ProjectorFrame, make_contractor
from .tensor_core import as_array
from .tt_core import (
    TTOperator,
    TTSum,
    TTTensor,
    apply,
    from_left_unfold,
    from_right_unfold,
    left_unfold,
    right_unfold,
)

SOLVERS = ("auto", "closed_form", "rk4", "krylov_expm")


@dataclass
class StepConfig:
    order: int = 2
    local_solver: str = "auto"
    local_tol: float = 1e-8
    substep_rk_steps: int = 1
    krylov_basis: int = 30

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        if self.local_solver not in SOLVERS:
            raise ValueError(f"unknown local solver {self.local_solver!r}")
        if self.local_tol <= 0:
            raise ValueError("local_tol must be positive")
        if self.substep_rk_steps < 1:
            raise ValueError("substep_rk_steps must be at least 1")


@dataclass
class Substep:
    node: int
    kind: str  # "K" or "S"
    direction: str  # "+" or "-"
    sweep: str  # "forward", "middle" or "backward"
    qr_residual: float = 0.0
    iterations: int = 0
    change: float = 0.0
    cond_S: float = float("nan")


@dataclass
class StepReport:
    order: int
    substeps: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.substeps)

    @property
    def max_qr_residual(self) -> float:
        return max((s.qr_residual for s in self.substeps), default=0.0)

    @property
    def max_cond_S(self) -> float:
        vals = [s.cond_S for s in self.substeps if np.isfinite(s.cond_S)]
        return max(vals, default=float("nan"))


# ---------------------------------------------------------------------------
# increment sources


class ExplicitIncrement:
    """A given change ``A(t_1) - A(t_0)``; a second-order step splits it in two equal halves."""

    def __init__(self, delta):
        self.delta = delta

    def increments(self, t0, t1):
        return self.delta

    def half_increments(self, t0, t1):
        return 0.5 * _as_increment(self.delta), 0.5 * _as_increment(self.delta)


class TensorCurve:
    """A callback ``t -> A(t)`` returning a dense array, :class:`DenseTensor` or TT."""

    def __init__(self, func: Callable):
        self.func = func

    def _diff(self, ta, tb):
        a, b = self.func(ta), self.func(tb)
        if isinstance(a, TTTensor) and isinstance(b, TTTensor):
            return TTSum([(1.0, b), (-1.0, a)])
        return as_array(b) - as_array(a)

    def increments(self, t0, t1):
        return self._diff(t0, t1)

    def half_increments(self, t0, t1):
        th = 0.5 * (t0 + t1)
        return self._diff(t0, th), self._diff(th, t1)


def _as_increment(delta):
    if isinstance(delta, (TTTensor, TTSum)):
        return delta if isinstance(delta, TTSum) else TTSum([(1.0, delta)])
    return as_array(delta)


class VectorField:
    """``dA/dt = F(t, A)`` with ``F`` returning a :class:`TTTensor` or :class:`TTSum`."""

    linear = False

    def __init__(self, F: Callable):
        self.F = F

    def __call__(self, t, Y: TTTensor):
        return self.F(t, Y)


class LinearVectorField(VectorField):
    """``F(t, A) = L A + c`` with ``L`` a :class:`TTOperator` and optional constant TT ``c``.

    ``structure`` (``"general"``, ``"hermitian"``, ``"antihermitian"``) is
    passed on to the Krylov solver for the projected maps.
    """

    linear = True

    def __init__(self, op: TTOperator, const: TTTensor | None = None, structure: str = "general"):
        self.op = op
        self.const = const
        self.structure = structure

    def __call__(self, t, Y: TTTensor):
        out = apply(self.op, Y)
        if self.const is None:
            return out
        return TTSum([(1.0, out), (1.0, self.const)])


# ---------------------------------------------------------------------------
# updaters: how K- and S-substeps are computed for each kind of source


class _ExplicitUpdater:
    def __init__(self, deltas: dict, d, right):
        self.cons = {ph: make_contractor(delta, [None] * d, right) for ph, delta in deltas.items()}

    def set_left(self, i, Q):
        for c in self.cons.values():
            c.set_left(i, Q)

    def set_right(self, i, Q):
        for c in self.cons.values():
            c.set_right(i, Q)

    def core(self, i, K, phase):
        if phase == "middle":
            return K + self.cons["first"].core_delta(i) + self.cons["second"].core_delta(i), 0
        return K + self.cons[phase].core_delta(i), 0

    def bond(self, i, S, phase):
        return S - self.cons[phase].bond_delta(i), 0


class _OperatorEnv:
    """Cached environments of a TT operator sandwiched between frame cores."""

    def __init__(self, op: TTOperator, left, right):
        self.op = op
        d = op.d
        self.left = list(left)
        self.right = list(right)
        one = np.ones((1, 1, 1), dtype=np.result_type(op.dtype, *(c.dtype for c in self.right if c is not None)))
        self._lo = [one] + [None] * d
        self._ro = [None] * (d + 1) + [one]

    def set_left(self, i, Q):
        self.left[i - 1] = Q
        for j in range(i, len(self._lo)):
            self._lo[j] = None

    def set_right(self, i, Q):
        self.right[i - 1] = Q
        for j in range(1, i + 1):
            self._ro[j] = None

    def lo(self, i):
        if self._lo[i] is None:
            Q = self.left[i - 1]
            self._lo[i] = np.einsum(
                "asx,alb,slmt,xmy->bty", self.lo(i - 1), Q.conj(), self.op.cores[i - 1], Q, optimize=True
            )
        return self._lo[i]

    def ro(self, i):
        if self._ro[i] is None:
            Q = self.right[i - 1]
            self._ro[i] = np.einsum(
                "alb,slmt,xmy,bty->asx", Q.conj(), self.op.cores[i - 1], Q, self.ro(i + 1), optimize=True
            )
        return self._ro[i]

    def apply_core(self, i, K):
        return np.einsum(
            "asx,slmt,xmy,bty->alb", self.lo(i - 1), self.op.cores[i - 1], K, self.ro(i + 1), optimize=True
        )

    def apply_bond(self, i, S):
        return np.einsum("asx,xy,bsy->ab", self.lo(i), S, self.ro(i + 1), optimize=True)


class _FieldUpdater:
    def __init__(self, src: VectorField, left, right, t0, t1, cfg: StepConfig):
        self.src = src
        self.cfg = cfg
        th = 0.5 * (t0 + t1)
        self.times = {"full": (t0, t1), "first": (t0, th), "second": (th, t1), "middle": (t0, t1)}
        self.left = list(left)
        self.right = list(right)
        solver = cfg.local_solver
        if solver == "closed_form":
            raise ValueError("closed_form local solver needs an explicit increment source")
        if solver == "auto":
            solver = "krylov_expm" if src.linear else "rk4"
        if solver == "krylov_expm" and not src.linear:
            raise ValueError("krylov_expm local solver needs a linear vector field")
        self.solver = solver
        if src.linear:
            self.env = _OperatorEnv(src.op, self.left, self.right)
            self.const = None if src.const is None else make_contractor(src.const, self.left, self.right)

    def set_left(self, i, Q):
        self.left[i - 1] = Q
        if self.src.linear:
            self.env.set_left(i, Q)
            if self.const is not None:
                self.const.set_left(i, Q)

    def set_right(self, i, Q):
        self.right[i - 1] = Q
        if self.src.linear:
            self.env.set_right(i, Q)
            if self.const is not None:
                self.const.set_right(i, Q)

    # right-hand sides of the local equations
    def _rhs_core(self, i):
        if self.src.linear:
            g = 0.0 if self.const is None else self.const.core_delta(i)
            return lambda t, K: self.env.apply_core(i, K) + g, self.env.apply_core, g

        def f(t, K):
            Y = TTTensor(self.left[: i - 1] + [K] + self.right[i:])
            return make_contractor(self.src(t, Y), self.left, self.right).core_delta(i)

        return f, None, None

    def _rhs_bond(self, i):
        if self.src.linear:
            g = 0.0 if self.const is None else self.const.bond_delta(i)
            return lambda t, S: -(self.env.apply_bond(i, S) + g), self.env.apply_bond, g

        def f(t, S):
            nxt = np.einsum("ab,blc->alc", S, self.right[i])
            Y = TTTensor(self.left[:i] + [nxt] + self.right[i + 1 :])
            return -make_contractor(self.src(t, Y), self.left, self.right).bond_delta(i)

        return f, None, None

    def core(self, i, K, phase):
        ta, tb = self.times[phase]
        f, lin, g = self._rhs_core(i)
        if self.solver == "krylov_expm":
            return self._krylov(lambda X: lin(i, X), g, K, tb - ta, sign=1.0)
        return _rk4(f, K, ta, tb, self.cfg.substep_rk_steps)

    def bond(self, i, S, phase):
        ta, tb = self.times[phase]
        f, lin, g = self._rhs_bond(i)
        if self.solver == "krylov_expm":
            return self._krylov(lambda X: lin(i, X), g, S, tb - ta, sign=-1.0)
        return _rk4(f, S, ta, tb, self.cfg.substep_rk_steps)

    def _krylov(self, lin, g, X0, tau, sign):
        """Solve ``X' = sign * (lin(X) + g)`` over ``tau`` with the Krylov exponential."""
        shape = X0.shape
        info = KrylovInfo()
        dtype = np.result_type(X0, self.src.op.dtype)
        x0 = X0.astype(dtype).ravel()
        if np.isscalar(g) and g == 0.0:
            mv = lambda v: sign * lin(v.reshape(shape)).ravel()
            L = LinearMap(mv, x0.size, self.src.structure)
            x = expm_multiply(L, x0, tau, self.cfg.local_tol, self.cfg.krylov_basis, info=info)
        else:
            # affine term via the augmented system [X; s]' = [lin(X) + s g; 0]
            gv = np.asarray(g, dtype=dtype).ravel()
            n = x0.size

            def mv(v):
                out = np.zeros_like(v)
                out[:n] = sign * (lin(v[:n].reshape(shape)).ravel() + v[n] * gv)
                return out

            aug = np.concatenate([x0, np.ones(1, dtype=dtype)])
            x = expm_multiply(LinearMap(mv, n + 1), aug, tau, self.cfg.local_tol, self.cfg.krylov_basis, info=info)[:n]
        return x.reshape(shape), info.matvecs


def _rk4(f, X, ta, tb, steps):
    h = (tb - ta) / steps
    t = ta
    for _ in range(steps):
        k1 = f(t, X)
        k2 = f(t + h / 2, X + (h / 2) * k1)
        k3 = f(t + h / 2, X + (h / 2) * k2)
        k4 = f(t + h, X + h * k3)
        X = X + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return X, 4 * steps


def _make_updater(src, left, right, t0, t1, cfg: StepConfig, order: int):
    d = len(right)
    if isinstance(src, VectorField):
        return _FieldUpdater(src, left, right, t0, t1, cfg)
    if cfg.local_solver not in ("auto", "closed_form"):
        raise ValueError(f"local solver {cfg.local_solver!r} needs a vector field source")
    if not isinstance(src, (ExplicitIncrement, TensorCurve)):
        src = ExplicitIncrement(src)
    if order == 1:
        return _ExplicitUpdater({"full": src.increments(t0, t1)}, d, right)
    first, second = src.half_increments(t0, t1)
    return _ExplicitUpdater({"first": first, "second": second}, d, right)


# ---------------------------------------------------------------------------
# sweeps


def _cond(S):
    s = np.linalg.svd(S, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


def _left_qr(K):
    r0, n, _ = K.shape
    M = left_unfold(K)
    Q, R = qr_positive(M)
    res = np.linalg.norm(M - Q @ R) / max(np.linalg.norm(M), np.finfo(float).tiny)
    return from_left_unfold(Q, r0, n), R, float(res)


def _right_qr(K):
    _, n, r1 = K.shape
    M = right_unfold(K)
    Q, R = qr_positive(M)
    res = np.linalg.norm(M - Q @ R) / max(np.linalg.norm(M), np.finfo(float).tiny)
    return from_right_unfold(Q, n, r1), R, float(res)


def _check_input(Y0: OrthTT):
    if not isinstance(Y0, OrthTT) or Y0.center != 0:
        raise ValueError("step input must be a right-orthogonalized OrthTT (center 0)")


def _forward(cores, K, upd, phase, report, sweep):
    """Left-to-right K/S substeps for nodes ``1..d-1``; returns the new ``K_d`` input."""
    d = len(cores)
    for i in range(1, d):
        Kn, it = upd.core(i, K, phase)
        report.substeps.append(Substep(i, "K", "+", sweep, iterations=it, change=float(np.linalg.norm(Kn - K))))
        Q, R, res = _left_qr(Kn)
        report.substeps[-1].qr_residual = res
        cores[i - 1] = Q
        upd.set_left(i, Q)
        S, it = upd.bond(i, R, phase)
        report.substeps.append(
            Substep(i, "S", "-", sweep, iterations=it, change=float(np.linalg.norm(S - R)), cond_S=_cond(S))
        )
        K = np.einsum("ab,blc->alc", S, cores[i])
    return K


def step_order1(Y0: OrthTT, src, t0: float, t1: float, cfg: StepConfig | None = None):
    """One forward sweep over ``[t0, t1]``.

    Input is right-orthogonal (center 0), output left-orthogonal (center d).
    """
    cfg = cfg or StepConfig(order=1)
    _check_input(Y0)
    d = Y0.d
    cores = list(Y0.cores)
    upd = _make_updater(src, [None] * d, cores, t0, t1, cfg, order=1)
    report = StepReport(order=1)
    K = Y0.S[0, 0] * cores[0]
    K = _forward(cores, K, upd, "full", report, "forward")
    Kn, it = upd.core(d, K, "full")
    report.substeps.append(Substep(d, "K", "+", "forward", iterations=it, change=float(np.linalg.norm(Kn - K))))
    Q, R, res = _left_qr(Kn)
    report.substeps[-1].qr_residual = res
    cores[d - 1] = Q
    return OrthTT(cores, d, R), report


def step_order2(Y0: OrthTT, src, t0: float, t1: float, cfg: StepConfig | None = None):
    """Symmetric back-and-forth sweep; right-orthogonal in and out."""
    cfg = cfg or StepConfig(order=2)
    _check_input(Y0)
    d = Y0.d
    cores = list(Y0.cores)
    upd = _make_updater(src, [None] * d, cores, t0, t1, cfg, order=2)
    report = StepReport(order=2)
    K = Y0.S[0, 0] * cores[0]
    K = _forward(cores, K, upd, "first", report, "forward")
    Kn, it = upd.core(d, K, "middle")
    report.substeps.append(Substep(d, "K", "+", "middle", iterations=it, change=float(np.linalg.norm(Kn - K))))
    K = Kn
    for i in range(d, 1, -1):
        Q, R, res = _right_qr(K)
        report.substeps[-1].qr_residual = res
        cores[i - 1] = Q
        upd.set_right(i, Q)
        S0 = R.T
        S, it = upd.bond(i - 1, S0, "second")
        report.substeps.append(
            Substep(i - 1, "S", "-", "backward", iterations=it, change=float(np.linalg.norm(S - S0)), cond_S=_cond(S))
        )
        K = np.einsum("alb,bc->alc", cores[i - 2], S)
        Kn, it = upd.core(i - 1, K, "second")
        report.substeps.append(
            Substep(i - 1, "K", "+", "backward", iterations=it, change=float(np.linalg.norm(Kn - K)))
        )
        K = Kn
    Q, R, res = _right_qr(K)
    report.substeps[-1].qr_residual = res
    cores[0] = Q
    return OrthTT(cores, 0, R.T.copy()), report


def step(Y0: OrthTT, src, t0, t1, cfg: StepConfig):
    """One step of the configured order, always returning a right-orthogonal state."""
    if cfg.order == 1:
        Y, rep = step_order1(Y0, src, t0, t1, cfg)
        return right_orthogonalize(Y.to_tt()), rep
    return step_order2(Y0, src, t0, t1, cfg)


def integrate(Y0, src, t0: float, t1: float, nsteps: int, cfg: StepConfig | None = None, callback=None):
    """Take ``nsteps`` uniform steps from ``t0`` to ``t1``; returns the final :class:`OrthTT`.

    ``callback(k, t, Y, report)`` is called after every step.
    """
    cfg = cfg or StepConfig()
    Y = Y0 if isinstance(Y0, OrthTT) and Y0.center == 0 else right_orthogonalize(_as_tt(Y0))
    ts = np.linspace(t0, t1, nsteps + 1)
    for k in range(nsteps):
        Y, rep = step(Y, src, ts[k], ts[k + 1], cfg)
        if callback is not None:
            callback(k + 1, ts[k + 1], Y, rep)
    return Y


def _as_tt(Y):
    return Y.to_tt() if isinstance(Y, OrthTT) else Y


# ---------------------------------------------------------------------------
# standalone local solves


def _frame_lists(frame: ProjectorFrame):
    return list(frame.left), list(frame.right)


def solve_local_K(frame: ProjectorFrame, i: int, F: VectorField, K0, t0, t1, cfg: StepConfig | None = None):
    """Evolve ``K_i`` over ``[t0, t1]`` with frame cores ``left[:i-1]`` and ``right[i:]`` frozen.

    Returns ``(K, iterations)``.
    """
    cfg = cfg or StepConfig()
    left, right = _frame_lists(frame)
    upd = _FieldUpdater(F, left, right, t0, t1, cfg)
    return upd.core(i, np.asarray(K0), "full")


def solve_local_S(frame: ProjectorFrame, i: int, F: VectorField, S0, t0, t1, cfg: StepConfig | None = None):
    """Evolve ``S_i`` over ``[t0, t1]`` (note the minus sign of the S equation)."""
    cfg = cfg or StepConfig()
    left, right = _frame_lists(frame)
    upd = _FieldUpdater(F, left, right, t0, t1, cfg)
    return upd.bond(i, np.asarray(S0), "full")


def retract(Z, delta, cfg: StepConfig | None = None) -> TTTensor:
    """One second-order step with increment ``delta`` over a unit pseudo-time.

    ``delta`` may be dense, a :class:`TTTensor` or a :class:`TTSum`; sums are
    contracted term by term and never assembled.  ``cfg.order = 1`` gives a
    single forward sweep instead.
    """
    cfg = cfg or StepConfig(order=2)
    Y0 = Z if isinstance(Z, OrthTT) and Z.center == 0 else right_orthogonalize(_as_tt(Z))
    src = ExplicitIncrement(delta)
    if cfg.order == 1:
        Y, _ = step_order1(Y0, src, 0.0, 1.0, cfg)
    else:
        Y, _ = step_order2(Y0, src, 0.0, 1.0, cfg)
    return Y.to_tt()

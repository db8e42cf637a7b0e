"""Experiment drivers shared by the command line and the acceptance tests."""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .integrator import StepConfig, TensorCurve, integrate, step_order1, step_order2
from .ortho import orthogonalize_to, right_orthogonalize
from .tt_core import TTTensor, from_dense, random_tt


def smooth_tt_curve(dims, ranks, rng, scale: float = 1.0):
    """``t -> TT(C0 + t C1 + sin(t) C2)``: every ``A(t)`` has the given ranks (generically)."""
    base = [random_tt(dims, ranks, rng).cores for _ in range(3)]

    def A(t):
        return TTTensor([c0 + scale * (t * c1 + np.sin(t) * c2) for c0, c1, c2 in zip(*base)])

    return A


def run_exactness(dims, ranks, h=0.1, seed=0, orders=(1, 2)):
    """Relative error of one step on a curve of exactly the configured ranks."""
    rng = np.random.default_rng(seed)
    A = smooth_tt_curve(dims, ranks, rng)
    Y0 = right_orthogonalize(A(0.0))
    ref = A(h).to_dense().data
    out = {}
    for order in orders:
        stepper = step_order1 if order == 1 else step_order2
        Y, _ = stepper(Y0, TensorCurve(A), 0.0, h, StepConfig(order=order))
        out[order] = float(np.linalg.norm(Y.to_dense().data - ref) / np.linalg.norm(ref))
    return out


def quadratic_curve(dims, rng):
    """``A(t) = A0 + t B + t^2 C`` with random dense ``A0, B, C``."""
    A0 = rng.standard_normal(dims)
    B = rng.standard_normal(dims)
    C = rng.standard_normal(dims)
    return lambda t: A0 + t * B + t * t * C


def small_sv_tensor(dims, ranks, small_sv, rng):
    """Dense tensor of TT ranks ``ranks`` with a smallest unfolding singular value near ``small_sv``.

    A random train is orthogonalized to each center in turn and ``S_i`` is
    replaced by ``U diag(s) V^H`` with ``s`` ending in ``small_sv``.  The last
    edge gets the value exactly; earlier edges keep it up to the mixing caused
    by later replacements (same order of magnitude).
    """
    X = random_tt(dims, ranks, rng)
    d = len(dims)
    for i in range(1, d):
        Y = orthogonalize_to(X, i)
        U, _, Vh = np.linalg.svd(Y.S)
        r = Y.S.shape[0]
        s = np.linspace(1.0, 0.5, r)
        s[-1] = small_sv if r > 1 else s[-1]
        Y.S = (U * s) @ Vh
        X = Y.to_tt()
    return X.to_dense().data


def run_convergence(dims, ranks, T=1.0, steps=(8, 16, 32, 64), ref_steps=512, orders=(1, 2), seed=0):
    """Errors against a fine second-order reference and successive error ratios."""
    rng = np.random.default_rng(seed)
    A = quadratic_curve(dims, rng)
    Y0 = from_dense(A(0.0), rank_cap=list(ranks))
    src = TensorCurve(A)
    ref = integrate(Y0, src, 0.0, T, ref_steps, StepConfig(order=2)).to_dense().data
    out = {}
    for order in orders:
        errs = []
        for N in steps:
            Y = integrate(Y0, src, 0.0, T, N, StepConfig(order=order)).to_dense().data
            errs.append(float(np.linalg.norm(Y - ref)))
        ratios = [errs[k] / errs[k + 1] for k in range(len(errs) - 1)]
        out[order] = {"steps": list(steps), "errors": errs, "ratios": ratios}
    return out


def rotating_curve(dims, ranks, small_sv, drift, rng):
    """``A(t) = (exp(t G_1) (x) ... (x) exp(t G_d)) A0 + drift (t B + t^2 C)``.

    The rotations are orthogonal, so all unfolding singular values of the
    first term stay fixed in time, including the tiny one ``small_sv``.
    """
    A0 = small_sv_tensor(dims, ranks, small_sv, rng)
    A0 = A0 / np.linalg.norm(A0)
    gens = []
    for n in dims:
        M = rng.standard_normal((n, n))
        gens.append(M - M.T)
    B = rng.standard_normal(dims)
    C = rng.standard_normal(dims)

    def A(t):
        X = A0
        for k, g in enumerate(gens):
            X = np.moveaxis(np.tensordot(expm(t * g), X, axes=([1], [k])), 0, k)
        return X + drift * (t * B + t * t * C)

    return A


def run_robustness(dims, ranks, small_sv=1e-8, reference_sv=0.25, drift=1e-3, T=1.0, steps=(8, 16, 32, 64),
                   orders=(1, 2), seed=0):
    """Errors ``||Y_N - A(T)||`` for a tiny and a moderate smallest singular value (same seed)."""
    out = {}
    for label, sv in (("small", small_sv), ("reference", reference_sv)):
        rng = np.random.default_rng(seed)
        A = rotating_curve(dims, ranks, sv, drift, rng)
        Y0 = from_dense(A(0.0), rank_cap=list(ranks))
        AT = A(T)
        errs = {}
        for order in orders:
            errs[order] = [
                float(np.linalg.norm(integrate(Y0, TensorCurve(A), 0.0, T, N, StepConfig(order=order)).to_dense().data - AT))
                for N in steps
            ]
        out[label] = errs
    return out

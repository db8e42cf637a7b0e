"""Newton-Schultz inversion ``Y <- 2Y - Y A Y`` on the fixed-rank QTT manifold."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..integrator import StepConfig, retract
from ..ortho import round_tt
from ..tt_core import TTOperator, TTSum, compose, pad_ranks, tt_norm
from .qtt import build_qtt_laplace

RETRACTIONS = ("splitting", "tt_svd")


@dataclass
class NewtonSchultzSpec:
    M: int = 2
    d: int = 5
    r: int = 10
    alpha: float = 1e-2
    retraction: str = "splitting"
    max_iters: int = 20
    divergence_factor: float = 1e3

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.retraction not in RETRACTIONS:
            raise ValueError(f"retraction must be one of {RETRACTIONS}")
        if self.M < 1 or self.d < 2 or self.r < 1 or self.max_iters < 0:
            raise ValueError("invalid Newton-Schultz parameters")


@dataclass
class NSRecord:
    k: int
    residual: float
    max_rank: int
    seconds: float


@dataclass
class NSHistory:
    spec: NewtonSchultzSpec
    records: list = field(default_factory=list)
    aborted: bool = False
    Y: TTOperator | None = None

    @property
    def residuals(self):
        return np.array([r.residual for r in self.records])


def feasible_ranks(dims, r):
    """Ranks ``min(r, prod left dims, prod right dims)`` on every edge."""
    d = len(dims)
    out = [1]
    for i in range(1, d):
        out.append(int(min(r, np.prod(dims[:i]), np.prod(dims[i:]))))
    return tuple(out + [1])


def residual_norm(A: TTOperator, Y: TTOperator) -> float:
    """``||A Y - I||_F`` in TT arithmetic."""
    AY = compose(A, Y).as_tt()
    eye = TTOperator.identity(A.row_dims).as_tt()
    return tt_norm(AY - eye)


def newton_schultz(spec: NewtonSchultzSpec, A: TTOperator | None = None, callback=None) -> NSHistory:
    """Run the iteration and record relative residuals ``||A Y_k - I|| / ||A Y_0 - I||``."""
    if A is None:
        A = build_qtt_laplace(spec.M, spec.d)
    dims = A.row_dims
    fused = [m * n for m, n in zip(A.row_dims, A.col_dims)]
    ranks = feasible_ranks(fused, spec.r)
    Y = TTOperator.identity(dims) * spec.alpha
    Yt = pad_ranks(Y.as_tt(), ranks)
    Y = TTOperator.from_tt(Yt, dims, dims)
    hist = NSHistory(spec)
    cfg = StepConfig(order=2)
    res0 = residual_norm(A, Y)
    start = time.perf_counter()
    hist.records.append(NSRecord(0, 1.0, max(Y.ranks), 0.0))
    for k in range(1, spec.max_iters + 1):
        YAY = compose(compose(Y, A), Y).as_tt()
        if spec.retraction == "splitting":
            delta = TTSum([(1.0, Y.as_tt()), (-1.0, YAY)])
            Yt = retract(Y.as_tt(), delta, cfg)
        else:
            Yt = round_tt(TTSum([(2.0, Y.as_tt()), (-1.0, YAY)]).to_tt(), tol=0.0, max_rank=spec.r)
        Y = TTOperator.from_tt(Yt, dims, dims)
        rel = residual_norm(A, Y) / res0
        hist.records.append(NSRecord(k, rel, max(Y.ranks), time.perf_counter() - start))
        if callback is not None:
            callback(hist.records[-1])
        if not np.isfinite(rel) or rel > spec.divergence_factor:
            hist.aborted = True
            break
    hist.Y = Y
    return hist

"""Tensor trains and projector-splitting integrators for dynamical low-rank approximation."""

from .tensor_core import DenseTensor, inner, norm, refold, unfold
from .tt_core import (
    TTOperator,
    TTSum,
    TTTensor,
    add,
    apply,
    compose,
    eval_entry,
    from_dense,
    inner_tt,
    left_unfold,
    pad_ranks,
    partial_products,
    random_tt,
    right_unfold,
    scale,
    to_dense,
)
from .ortho import (
    OrthTT,
    left_orthogonalize,
    orthogonalize_to,
    right_orthogonalize,
    round_tt,
    shift_center_left,
    shift_center_right,
)

__version__ = "0.1.0"

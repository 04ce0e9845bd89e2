"""Smooth symbolic regression: continuous encoding, optimizer, landscape tools."""

from ._core import (
    Layout,
    __version__,
    auto_correlation,
    build_layout,
    cmaes_minimize,
    correlation_length,
    decode_formula,
    eval_smooth,
    fitness_r2,
    gen_poly10,
    information_analysis,
    op_penalty,
    operator_mix_weights,
    predict,
    var_penalty,
)

__all__ = [
    "Layout",
    "__version__",
    "auto_correlation",
    "build_layout",
    "cmaes_minimize",
    "correlation_length",
    "decode_formula",
    "eval_smooth",
    "fitness_r2",
    "gen_poly10",
    "information_analysis",
    "op_penalty",
    "operator_mix_weights",
    "predict",
    "var_penalty",
]

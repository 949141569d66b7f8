"""Spectral homogenization lab for thin-film differential constraints.

Thin wrapper around the C++ core. All heavy lifting happens in `_filmlab`;
fields cross the boundary as float64 arrays of shape (m, N_1, ..., N_d).
"""

from ._filmlab import (  # noqa: F401
    DifferentialOperator,
    apply_operator,
    builtin_operator,
    check_antisymmetry,
    check_constant_rank,
    construct_quartet,
    evaluate_rescaled_symbol,
    evaluate_symbol,
    h_minus1_norm,
    jump_field,
    jump_residual_analytic,
    kernel_basis,
    l2_norm,
    limit_operator_symbol,
    nonlocality_obstruction,
    operator_from_coeffs,
    oscillation_sample,
    project_afree,
    rescale_xprime,
    sharp_average,
    solve_cell,
    verify_quartet,
)

__all__ = [
    "DifferentialOperator",
    "apply_operator",
    "builtin_operator",
    "check_antisymmetry",
    "check_constant_rank",
    "construct_quartet",
    "evaluate_rescaled_symbol",
    "evaluate_symbol",
    "h_minus1_norm",
    "jump_field",
    "jump_residual_analytic",
    "kernel_basis",
    "l2_norm",
    "limit_operator_symbol",
    "nonlocality_obstruction",
    "operator_from_coeffs",
    "oscillation_sample",
    "project_afree",
    "rescale_xprime",
    "sharp_average",
    "solve_cell",
    "verify_quartet",
]

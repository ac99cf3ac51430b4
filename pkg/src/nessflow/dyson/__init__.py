"""Quantitative ingredients of the Dyson-series convergence certificate."""

from .certificate import Certificate, certify, theorem_bound, time_decay_constant, time_decay_quadrature
from .hermite import (
    hermite_eval,
    hermite_table,
    l1_bound,
    l1_norm,
    l1_norm_bound_check,
    overlap_bound,
    overlap_bound_check,
    propagator_overlap,
    scaled_gauss_hermite,
)
from .norms import (
    HermiteSeries,
    InteractionNorm,
    interaction_norm,
    kernel_norm,
    random_series,
    seminorm_translation_invariant,
    sobolev_norm,
    sobolev_norm_translated,
)
from .trees import incidence_sum_identity, prufer_to_edges, tree_count, tree_enumerate

__all__ = [
    "Certificate",
    "certify",
    "theorem_bound",
    "time_decay_constant",
    "time_decay_quadrature",
    "hermite_eval",
    "hermite_table",
    "l1_bound",
    "l1_norm",
    "l1_norm_bound_check",
    "overlap_bound",
    "overlap_bound_check",
    "propagator_overlap",
    "scaled_gauss_hermite",
    "HermiteSeries",
    "InteractionNorm",
    "interaction_norm",
    "kernel_norm",
    "random_series",
    "seminorm_translation_invariant",
    "sobolev_norm",
    "sobolev_norm_translated",
    "incidence_sum_identity",
    "prufer_to_edges",
    "tree_count",
    "tree_enumerate",
]

"""Uncertainty evaluation for semantic segmentation.

Thin Python veneer over the C++ core: probability-stack validation, pixel
uncertainty measures, image-level aggregation, downstream metrics, the toy
data generator and the prediction simulator. All array arguments are numpy
arrays; stacks are laid out [samples, classes, *spatial].
"""

from ._uqseg import (
    ace,
    al_improvement,
    auroc,
    aurc,
    compute_measure,
    compute_threshold,
    dice,
    e_aurc,
    ged,
    image_sum,
    mean_prediction,
    ncc,
    patch_max,
    plan_scenario,
    platt_scale,
    rater_variance,
    risk_coverage_curve,
    scenario_counts,
    semantics,
    shannon_entropy,
    simulate,
    threshold_mean,
    toy_case,
    validate_stack,
)

__all__ = [
    "ace",
    "al_improvement",
    "auroc",
    "aurc",
    "compute_measure",
    "compute_threshold",
    "dice",
    "e_aurc",
    "ged",
    "image_sum",
    "mean_prediction",
    "ncc",
    "patch_max",
    "plan_scenario",
    "platt_scale",
    "rater_variance",
    "risk_coverage_curve",
    "scenario_counts",
    "semantics",
    "shannon_entropy",
    "simulate",
    "threshold_mean",
    "toy_case",
    "validate_stack",
]

__version__ = "0.1.0"

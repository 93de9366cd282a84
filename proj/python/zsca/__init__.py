"""Zero-shot compositional action recognition: Python bindings for the C++ core."""

from ._zsca import (
    ZscaError,
    canonical_config,
    config_help,
    evaluate_scores,
    make_split,
    make_synth,
    read_report,
    run_all,
    run_stage,
    stage_names,
    trapezoid_auc,
)

__all__ = [
    "ZscaError",
    "canonical_config",
    "config_help",
    "evaluate_scores",
    "make_split",
    "make_synth",
    "read_report",
    "run_all",
    "run_stage",
    "stage_names",
    "trapezoid_auc",
]

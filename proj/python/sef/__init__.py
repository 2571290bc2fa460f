"""Self-ensemble filtering for distantly supervised relation extraction.

Thin wrapper over the C++ core; see the project README for the full CLI.
"""

from sef._core import (
    ConfigError,
    DataError,
    __version__,
    alpha_at,
    apply_threshold,
    combined_loss,
    evaluate,
    evaluate_checkpoint,
    filter_probs,
    generate_synthetic,
    ramp_steps,
    rank_topk,
    select_threshold,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "__version__",
    "alpha_at",
    "apply_threshold",
    "combined_loss",
    "evaluate",
    "evaluate_checkpoint",
    "filter_probs",
    "generate_synthetic",
    "ramp_steps",
    "rank_topk",
    "select_threshold",
    "train",
]

"""Group-robust training with probabilistic group labels."""

from pgdro._core import (
    Error,
    default_config,
    effective_group_sizes,
    env_to_group_probs,
    gdro_risk,
    generate_synthetic,
    pg_dro_risk,
    run_command,
    run_pipeline,
    zero_shot_env_probs,
)

__all__ = [
    "Error",
    "default_config",
    "effective_group_sizes",
    "env_to_group_probs",
    "gdro_risk",
    "generate_synthetic",
    "pg_dro_risk",
    "run_command",
    "run_pipeline",
    "zero_shot_env_probs",
]

__version__ = "0.1.0"

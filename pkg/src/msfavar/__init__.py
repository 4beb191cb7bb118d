"""Bayesian regime-switching factor-augmented VAR for quarterly panels."""

from .core import (DrawStore, ModelSpec, MsfavarError, PriorConfig, Quarter,
                   TimeSeriesPanel, new_model_spec, seeded_stream)

__version__ = "0.1.0"

__all__ = [
    "DrawStore", "ModelSpec", "MsfavarError", "PriorConfig", "Quarter",
    "TimeSeriesPanel", "new_model_spec", "seeded_stream", "__version__",
]

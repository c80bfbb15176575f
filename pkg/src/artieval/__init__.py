"""Evaluation toolkit for acoustic-to-articulatory inversion.

Provides the AFV1 feature format, the signal/preprocessing pipeline,
reconstruction metrics (RMSE, normalized RMSE, PCC), and the DTW-based
ABX phone-discrimination evaluation.
"""

__version__ = "0.1.0"

from .core import FrameSequence, TrajectorySet, UtteranceRecord  # noqa: F401

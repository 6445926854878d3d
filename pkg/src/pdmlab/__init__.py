"""Rule-based trajectory evaluation, pseudo-expert generation and proposal selection tools."""

__version__ = "0.1.0"

from .evaluator import (  # noqa: E402
    DEPLOYMENT, EPDMS_V2, PDMS_V1, EvaluatorConfig, ScoreWeights, SubScores, compose_epdms, compose_pdms,
    compute_subscores, evaluate,
)
from .scene import Centerline, Pose2D, Scene, Trajectory  # noqa: E402

__all__ = [
    "__version__", "Centerline", "DEPLOYMENT", "EPDMS_V2", "EvaluatorConfig", "PDMS_V1", "Pose2D", "Scene",
    "ScoreWeights", "SubScores", "Trajectory", "compose_epdms", "compose_pdms", "compute_subscores", "evaluate",
]

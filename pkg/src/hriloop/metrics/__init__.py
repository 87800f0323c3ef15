from .core import (
    DEFAULT_CONTACT_TAU,
    ContactMetrics,
    contact_from_labels,
    contact_labels,
    contact_metrics,
    mpjpe,
    orie_error,
    pa_mpjpe,
    pa_mpjpe_frames,
    traj_error,
)
from .fid import (
    ExtractorConfig,
    MotionFeatureExtractor,
    fid,
    train_feature_extractor,
)
from .report import (
    MetricsReport,
    evaluate_model,
    evaluate_predictions,
    fit_eval_heads,
    rollout_predictions,
    teacher_forced_predictions,
)
from .rscore import EmbedderConfig, JointEmbedder, r_score, train_joint_embedder

__all__ = [
    "DEFAULT_CONTACT_TAU",
    "ContactMetrics",
    "EmbedderConfig",
    "ExtractorConfig",
    "JointEmbedder",
    "MetricsReport",
    "MotionFeatureExtractor",
    "contact_from_labels",
    "contact_labels",
    "contact_metrics",
    "evaluate_model",
    "evaluate_predictions",
    "fid",
    "fit_eval_heads",
    "mpjpe",
    "orie_error",
    "pa_mpjpe",
    "pa_mpjpe_frames",
    "r_score",
    "rollout_predictions",
    "teacher_forced_predictions",
    "traj_error",
    "train_feature_extractor",
    "train_joint_embedder",
]

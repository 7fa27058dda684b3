"""Online variational inference and changepoint detection for
block-homogeneous Poisson processes on networks."""

from .detect import (DetectorConfig, DetectorConfigError,
                     MembershipChangeDetector, NetworkDetector,
                     RateChangeDetector, js_categorical, kl_gamma,
                     mad_outlier)
from .inference import (BhppEngine, GemEngine, SbmEngine, align_blocks,
                        edge_probability, membership_fixed_point,
                        stick_log_prior, update_mixture, update_rates)
from .metrics import DetectionRecord, ari, ccd_dnf, rate_rmse
from .model import (ConfigError, EventBatch, MembershipPosterior,
                    MixturePosterior, ModelConfig, RatePosterior,
                    stick_to_proportions, validate)
from .simulate import (ChangeSchedule, MembershipChange, RateChange,
                       ScheduleError, SimOutput, batch_events, batch_stream,
                       sample_memberships, sample_sbm_adjacency, simulate,
                       sinusoidal_schedule)

__all__ = [
    "BhppEngine", "SbmEngine", "GemEngine", "ModelConfig", "ConfigError",
    "EventBatch", "RatePosterior", "MembershipPosterior", "MixturePosterior",
    "DetectorConfig", "DetectorConfigError", "NetworkDetector",
    "RateChangeDetector", "MembershipChangeDetector",
    "kl_gamma", "js_categorical", "mad_outlier",
    "simulate", "batch_events", "batch_stream", "sample_memberships",
    "sample_sbm_adjacency", "sinusoidal_schedule", "ChangeSchedule",
    "RateChange", "MembershipChange", "ScheduleError", "SimOutput",
    "ari", "ccd_dnf", "rate_rmse", "DetectionRecord",
    "align_blocks", "membership_fixed_point", "stick_log_prior",
    "update_rates", "update_mixture", "stick_to_proportions", "validate",
]

__version__ = "0.1.0"

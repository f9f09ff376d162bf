"""xG+ soccer analytics: per-second shot and goal probabilities from
tracking data, possession aggregation, and team / player evaluation."""

__version__ = "1.0.0"

from .aggregate import AggRule, METRIC_MENU, aggregate_possession
from .features import FEATURE_NAMES, FEATURE_SETS, compute_feature_vector
from .gbt import GbtParams, fit_gbt
from .logistic import fit_logistic
from .synth import SynthConfig, simulate_match
from .tracking import parse_tracking_file, segment_possessions

__all__ = [
    "AggRule", "METRIC_MENU", "aggregate_possession",
    "FEATURE_NAMES", "FEATURE_SETS", "compute_feature_vector",
    "GbtParams", "fit_gbt", "fit_logistic",
    "SynthConfig", "simulate_match",
    "parse_tracking_file", "segment_possessions",
    "__version__",
]

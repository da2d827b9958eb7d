"""Fingerprinting-based indoor positioning with sub-region and feature selection.

Offline: grid a survey into a reference fingerprint map, segment it into
sub-regions, rank each sub-region's features by randomized-LASSO selection
frequency, and fit per-location Gaussian-kernel density tables. Online:
shortlist candidate sub-regions with a modified Jaccard index over feature
keys and return the MAP candidate location under a naive-Bayes model of
the selected features.
"""

from .density import DensityModel, kde_fit, kde_logpdf
from .evaluate import EvalConfig, EvalReport, cpa_curve, evaluate, mse_vs_h, parse_config
from .features import (
    RandomizedLassoConfig,
    RegressionProblem,
    RelevanceProfile,
    build_problem,
    lambda_max,
    lasso_fit,
    randomized_lasso,
    select_lambda_cv,
    take_relevant,
)
from .gridding import GridSpec, RawRFM, grid_interpolate, ingest
from .model import (
    MISSING_VALUE_DBM,
    Fingerprint,
    GriddedRFM,
    Rect,
    ReferenceRecord,
    SubRegion,
    feature_key,
    feature_vector,
    key_union,
)
from .positioning import (
    KdeConfig,
    PositionEstimate,
    PrecomputedCache,
    locate,
    locate_full,
    precompute,
    predicted_cost,
)
from .simulate import Scene, SceneConfig, generate_survey, generate_testset, sample_rss
from .storage import load_cache, load_rfm, save_cache, save_rfm
from .subregion import CandidateSet, modified_jaccard, select_subregions

__version__ = "0.1.0"

__all__ = [
    "CandidateSet",
    "DensityModel",
    "EvalConfig",
    "EvalReport",
    "Fingerprint",
    "GriddedRFM",
    "GridSpec",
    "KdeConfig",
    "MISSING_VALUE_DBM",
    "PositionEstimate",
    "PrecomputedCache",
    "RandomizedLassoConfig",
    "RawRFM",
    "Rect",
    "ReferenceRecord",
    "RegressionProblem",
    "RelevanceProfile",
    "Scene",
    "SceneConfig",
    "SubRegion",
    "build_problem",
    "cpa_curve",
    "evaluate",
    "feature_key",
    "feature_vector",
    "generate_survey",
    "generate_testset",
    "grid_interpolate",
    "ingest",
    "kde_fit",
    "kde_logpdf",
    "key_union",
    "lambda_max",
    "lasso_fit",
    "load_cache",
    "load_rfm",
    "locate",
    "locate_full",
    "modified_jaccard",
    "mse_vs_h",
    "parse_config",
    "precompute",
    "predicted_cost",
    "randomized_lasso",
    "sample_rss",
    "save_cache",
    "save_rfm",
    "select_lambda_cv",
    "select_subregions",
    "take_relevant",
]

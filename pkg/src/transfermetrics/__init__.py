"""Transferability scoring toolkit.

Estimates how well a pre-trained source model transfers to a target
dataset from embedding dumps: Gaussian class-separability scoring plus
the LEEP, H-score, LogME, and IDS baselines, with rank-correlation
evaluation against reference accuracies.
"""

__version__ = "0.1.0"

from .baselines import MetricScore, hscore, ids, leep, logme
from .config import MetricConfig
from .errors import (
    CorruptionError,
    FormatError,
    NumericalError,
    ToolkitError,
    ValidationError,
)
from .formats import (
    EmbeddingSet,
    PredictionSet,
    ScenarioManifest,
    load_embeddings,
    load_manifest,
    load_predictions,
    save_embeddings,
    save_predictions,
)
from .gaussians import ClassGaussian, CovarianceMode, fit_class_gaussians
from .gbc import GbcScore, PairwiseOverlap, bhattacharyya_distance, gbc_pipeline, gbc_score
from .pca import PcaModel, fit_pca, project
from .ranking import (
    EvalReport,
    ScenarioTable,
    evaluate_scenarios,
    kendall_tau,
    pearson_r,
    top_k_hit,
    weighted_kendall_tau,
)
from .sampling import (
    ClassSubsetSpec,
    PixelObservationSpec,
    sample_class_subsets,
    sample_pixels,
    select_pixels,
)
from .synthetic import SyntheticScenario, bayes_error_estimate, generate, mc_bhattacharyya

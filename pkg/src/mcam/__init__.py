"""Multi-channel appearance mixtures (MCAM) for multi-shot person re-identification."""

__version__ = "0.1.0"

from .config import MetricConfig, PipelineConfig
from .estimator import McamMatcher, SignatureExtractor
from .evaluation import CmcCurve, ProtocolConfig, cmc_curve, run_protocol
from .features import FeatureChannel, extract_descriptor
from .imaging import PersonTrack, build_region_layout, preprocess_frame
from .metric import SimilarityMatrix, rank_gallery, similarity_matrix
from .mixture import AppearanceMixture, McamSignature, build_signature, fit_mixture
from .synthetic import SyntheticSpec, generate_synthetic_tracks

__all__ = [
    "AppearanceMixture",
    "CmcCurve",
    "FeatureChannel",
    "McamMatcher",
    "McamSignature",
    "MetricConfig",
    "PersonTrack",
    "PipelineConfig",
    "ProtocolConfig",
    "SignatureExtractor",
    "SimilarityMatrix",
    "SyntheticSpec",
    "build_region_layout",
    "build_signature",
    "cmc_curve",
    "extract_descriptor",
    "fit_mixture",
    "generate_synthetic_tracks",
    "preprocess_frame",
    "rank_gallery",
    "run_protocol",
    "similarity_matrix",
]

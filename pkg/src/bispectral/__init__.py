"""Spectral clustering for bipartite and symmetric networks.

Data-driven degree regularization, k-truncated SVD, and k-means on one of
three spectral embeddings, plus samplers and metrics to study them.
"""
from .types import (
    BiAdjacency,
    BiclusterError,
    KMeansMatrix,
    Membership,
    SbmSpec,
    TruncatedSvd,
)
from .linalg import dilate, operator_norm, truncated_svd, align_orthogonal
from .models import sample_sbm, population_svd, separation_constants, fig1_spec, fig2_spec
from .regularization import regularize_data_driven, regularize_oracle, concentration_error
from .kmeans import KMeansConfig, lloyd_pp, radius_cover
from .metrics import misclassification, nmi
from .pipelines import PipelineConfig, run_pipeline, sc1, sc_rr, sc_rre, sc_subgaussian

__version__ = "0.1.0"

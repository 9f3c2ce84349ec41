"""Activation detection for BOLD-like voxel time series.

Two interchangeable detectors share one decision surface: a general linear
model that regresses each voxel on the hemodynamically convolved stimulus,
and a Granger-style causality test that asks whether lagged stimulus samples
improve an autoregression of the voxel beyond its own past.  The causality
engine doubles as a pairwise connectivity measure, and the Gini index
quantifies how localized each resulting activation map is.
"""

from .core import (
    BoldSeries,
    HrfKernel,
    StimulusTrain,
    VoxelGrid,
    canonical_hrf,
    convolve_stimulus,
)
from .errors import (
    CausalvoxError,
    FileFormatError,
    InvalidParameterError,
    RankDeficiencyError,
    UndefinedSparsityError,
)
from .glm import DetectionResult, GlmConfig, glm_detect, glm_map
from .granger import (
    CausalityScore,
    GrangerConfig,
    NestingReport,
    causality_strength,
    connectivity,
    fit_ar,
    fit_arx,
    glm_nesting_check,
    granger_detect,
    granger_detect_driver,
    granger_map,
)
from .linmodel import (
    DesignMatrix,
    FTestResult,
    RankSumResult,
    RegressionFit,
    f_cdf,
    f_test_nested,
    least_squares,
    rank_sum_test,
)
from .phantom import Paradigm, PhantomData, PhantomSpec, beta_for_cnr, build_stimulus, generate
from .sparsity import gini_index, map_gini

__version__ = "0.1.0"

__all__ = [
    "BoldSeries",
    "CausalityScore",
    "CausalvoxError",
    "DesignMatrix",
    "DetectionResult",
    "FTestResult",
    "FileFormatError",
    "GlmConfig",
    "GrangerConfig",
    "HrfKernel",
    "InvalidParameterError",
    "NestingReport",
    "Paradigm",
    "PhantomData",
    "PhantomSpec",
    "RankDeficiencyError",
    "RankSumResult",
    "RegressionFit",
    "StimulusTrain",
    "UndefinedSparsityError",
    "VoxelGrid",
    "beta_for_cnr",
    "build_stimulus",
    "canonical_hrf",
    "causality_strength",
    "connectivity",
    "convolve_stimulus",
    "f_cdf",
    "f_test_nested",
    "fit_ar",
    "fit_arx",
    "generate",
    "gini_index",
    "glm_detect",
    "glm_map",
    "glm_nesting_check",
    "granger_detect",
    "granger_detect_driver",
    "granger_map",
    "least_squares",
    "map_gini",
    "rank_sum_test",
]

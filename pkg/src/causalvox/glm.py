"""Per-voxel activation detection with the general linear model.

The activation model regresses the voxel series on an intercept, a linear
trend, and the stimulus train convolved with the hemodynamic response; the
baseline drops the convolved regressor.  A voxel is declared active when the
nested F-test rejects the baseline at the configured level, and the fitted
coefficient on the convolved regressor is reported as the activation
strength.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import BoldSeries, HrfKernel, StimulusTrain, VoxelGrid, convolve_stimulus
from .errors import InvalidParameterError, RankDeficiencyError
from .linmodel import DesignMatrix, RegressionFit, f_test_nested, least_squares

# Diagnostic flags carried on DetectionResult.
DIAG_CONSTANT_SERIES = "constant-series"
DIAG_PERFECT_FIT = "perfect-fit"
DIAG_ILL_CONDITIONED = "ill-conditioned"
DIAG_RANK_DEFICIENT = "rank-deficient"
DIAG_DEGENERATE_NULL = "degenerate-null"

# Flags that veto an "active" decision regardless of p-value.
DISQUALIFYING_DIAGNOSTICS = frozenset(
    {DIAG_CONSTANT_SERIES, DIAG_RANK_DEFICIENT, DIAG_DEGENERATE_NULL}
)


@dataclass(frozen=True, eq=False)
class GlmConfig:
    """Settings for GLM detection."""

    hrf: HrfKernel
    alpha: float = 0.05
    include_trend: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidParameterError(f"alpha must be in (0, 1), got {self.alpha}")


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """Per-voxel detection outcome, shared by the GLM and causality detectors.

    ``statistic`` is the fitted activation coefficient for the GLM and the
    causality strength (zeroed when insignificant) for the causality
    detector.  ``score`` is populated by the causality detector only.
    """

    statistic: float
    p_value: float
    active: bool
    fit_full: RegressionFit | None = None
    fit_null: RegressionFit | None = None
    diagnostics: frozenset[str] = frozenset()
    score: object | None = None

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise InvalidParameterError(f"p_value must be in [0, 1], got {self.p_value}")


def _decide(p_value: float, alpha: float, diagnostics: frozenset[str]) -> bool:
    return p_value < alpha and not (diagnostics & DISQUALIFYING_DIAGNOSTICS)


def glm_detect(y: BoldSeries, stim: StimulusTrain, cfg: GlmConfig) -> DetectionResult:
    """Test one voxel for stimulus-locked activation.

    Raises InvalidParameterError if the series is shorter than
    3 + kernel taps or disagrees with the stimulus in length or sampling
    interval.  A constant series yields an inactive result flagged
    "constant-series"; a rank-deficient activation model (for instance an
    all-zero stimulus) yields an inactive result flagged "rank-deficient".
    """
    n = len(y)
    if len(stim) != n:
        raise InvalidParameterError(
            f"series length {n} != stimulus length {len(stim)}"
        )
    if stim.tr_seconds != y.tr_seconds:
        raise InvalidParameterError(
            f"series tr {y.tr_seconds} != stimulus tr {stim.tr_seconds}"
        )
    if n <= 3 + cfg.hrf.n_taps:
        raise InvalidParameterError(
            f"need more than {3 + cfg.hrf.n_taps} samples, got {n}"
        )
    values = y.values
    if np.ptp(values) == 0.0:
        return DetectionResult(
            statistic=0.0,
            p_value=1.0,
            active=False,
            diagnostics=frozenset({DIAG_CONSTANT_SERIES}),
        )

    response = convolve_stimulus(stim, cfg.hrf).values
    t = np.arange(n, dtype=np.float64)
    # centering the trend decorrelates it from the intercept; the fitted
    # activation coefficient and the F-test are unchanged
    trend = t - t.mean()
    ones = np.ones(n)
    if cfg.include_trend:
        null_cols = [ones, trend]
        null_labels = ("intercept", "linear-trend")
    else:
        null_cols = [ones]
        null_labels = ("intercept",)
    full = DesignMatrix(
        np.column_stack(null_cols + [response]),
        null_labels + ("convolved-regressor",),
    )
    null = DesignMatrix(np.column_stack(null_cols), null_labels)

    diagnostics: set[str] = set()
    try:
        fit_full = least_squares(full, values)
    except RankDeficiencyError:
        return DetectionResult(
            statistic=0.0,
            p_value=1.0,
            active=False,
            diagnostics=frozenset({DIAG_RANK_DEFICIENT}),
        )
    fit_null = least_squares(null, values)
    if fit_full.condition_warning or fit_null.condition_warning:
        diagnostics.add(DIAG_ILL_CONDITIONED)

    ftest = f_test_nested(fit_full, fit_null, n_used=n)
    if ftest.perfect_fit:
        diagnostics.add(DIAG_PERFECT_FIT)
    flags = frozenset(diagnostics)
    return DetectionResult(
        statistic=fit_full.coefficient("convolved-regressor"),
        p_value=ftest.p_value,
        active=_decide(ftest.p_value, cfg.alpha, flags),
        fit_full=fit_full,
        fit_null=fit_null,
        diagnostics=flags,
    )


def map_voxels(detect_one, n_voxels: int, jobs: int = 1) -> list:
    """Apply a per-voxel function over voxel indices with deterministic order.

    Results land at their voxel's position regardless of scheduling, so maps
    are reproducible for any worker count.
    """
    if jobs is None or jobs <= 1:
        return [detect_one(i) for i in range(n_voxels)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(detect_one, range(n_voxels)))


def glm_map(
    grid: VoxelGrid, stim: StimulusTrain, cfg: GlmConfig, jobs: int = 1
) -> list[DetectionResult]:
    """Run glm_detect independently on every voxel of a grid.

    Output order matches the grid's row-major voxel order.  Per-voxel
    failures become inactive results carrying diagnostics; the map itself
    never aborts on a single voxel.
    """
    if grid.n_timepoints != len(stim):
        raise InvalidParameterError(
            f"grid has {grid.n_timepoints} time points, stimulus has {len(stim)}"
        )

    def detect_one(index: int) -> DetectionResult:
        try:
            return glm_detect(grid.series(index), stim, cfg)
        except RankDeficiencyError:
            return DetectionResult(
                statistic=0.0,
                p_value=1.0,
                active=False,
                diagnostics=frozenset({DIAG_RANK_DEFICIENT}),
            )

    return map_voxels(detect_one, grid.n_voxels, jobs=jobs)

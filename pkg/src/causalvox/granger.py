"""Granger-style causality detection of activation and connectivity.

A driver series (the stimulus train, or another voxel's series) is declared
to cause a voxel's signal when lagged copies of the driver improve an
autoregression of the signal beyond its own past.  The strength of the
effect is the fractional residual reduction

    strength = 1 - rss_full / rss_null

between the lagged-driver autoregression (full) and the driver-free
autoregression (null), both fitted over the same observation window.
Significance comes from an empirical null distribution: the driver is
resampled (circular shift by default) to break any driver/signal coupling
while preserving both series' structure, the strength is recomputed per
surrogate, and the percentile p-value (1 + exceedances) / (n_bootstrap + 1)
is thresholded at the configured level.  Insignificant voxels report a
statistic of exactly 0.

Surrogates that reproduce the driver exactly are redrawn (with identical
repeated runs, rotating by a whole run is the identity and carries the full
coupling).  Rotations that land *near* a repeat period are kept: they are
valid null draws, merely partially coupled, so on strongly periodic designs
the test is somewhat conservative at levels near the percentile floor
1 / (n_bootstrap + 1).

Activation and connectivity run through one engine: detecting activation is
this computation with the stimulus as the driver, and pairwise connectivity
is the identical computation with a source voxel's series as the driver.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import BoldSeries, HrfKernel, StimulusTrain, VoxelGrid, convolve_stimulus
from .errors import InvalidParameterError, RankDeficiencyError
from .glm import (
    DIAG_DEGENERATE_NULL,
    DIAG_ILL_CONDITIONED,
    DIAG_RANK_DEFICIENT,
    DetectionResult,
    map_voxels,
)
from .linmodel import DesignMatrix, RegressionFit, least_squares

NULL_SCHEMES = ("circular-shift", "block-bootstrap")

# The clamp keeps the reported strength inside [0, 1) even for a perfect full
# fit (rss_full = 0).
_STRENGTH_CEILING = float(np.nextafter(1.0, 0.0))

# Default kernel support in seconds used to size the stimulus lag count: the
# exogenous lags must span the hemodynamic delay.
_DEFAULT_LAG_SPAN_S = 16.0


@dataclass(frozen=True)
class GrangerConfig:
    """Settings for causality detection.

    stim_lags counts lagged copies of the driver in the full model; auto_lags
    counts lagged copies of the signal present in both models.  The null
    scheme resamples the driver: "circular-shift" rotates it by a random
    offset of at least max(stim_lags, auto_lags) + stim_lags samples,
    "block-bootstrap" rebuilds it from random contiguous blocks of block_len
    samples.
    """

    stim_lags: int
    auto_lags: int = 1
    n_bootstrap: int = 100
    alpha: float = 0.05
    null_scheme: str = "circular-shift"
    block_len: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.stim_lags < 1:
            raise InvalidParameterError(f"stim_lags must be >= 1, got {self.stim_lags}")
        if self.auto_lags < 1:
            raise InvalidParameterError(f"auto_lags must be >= 1, got {self.auto_lags}")
        if self.n_bootstrap < 1:
            raise InvalidParameterError(
                f"n_bootstrap must be >= 1, got {self.n_bootstrap}"
            )
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidParameterError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.null_scheme not in NULL_SCHEMES:
            raise InvalidParameterError(
                f"null_scheme must be one of {NULL_SCHEMES}, got {self.null_scheme!r}"
            )
        if self.block_len < 1:
            raise InvalidParameterError(f"block_len must be >= 1, got {self.block_len}")
        if self.rng_seed < 0:
            raise InvalidParameterError(f"rng_seed must be >= 0, got {self.rng_seed}")

    @classmethod
    def for_tr(cls, tr_seconds: float, **overrides) -> "GrangerConfig":
        """Build a config whose stimulus lags span the hemodynamic delay."""
        if not tr_seconds > 0:
            raise InvalidParameterError(f"tr_seconds must be > 0, got {tr_seconds}")
        overrides.setdefault("stim_lags", default_stim_lags(tr_seconds))
        return cls(**overrides)


def default_stim_lags(tr_seconds: float) -> int:
    return max(1, math.ceil(_DEFAULT_LAG_SPAN_S / tr_seconds))


@dataclass(frozen=True, eq=False)
class CausalityScore:
    """Causality strength with its bootstrap significance context.

    strength is 1 - rss_full/rss_null clamped to [0, 1), or 0 for degenerate
    fits.  null_distribution, p_value and significant are None when no
    significance pass has run; a degenerate observed fit (rank-deficient
    driver) also leaves null_distribution None, with p_value 1 and
    significant False.
    """

    strength: float
    rss_full: float
    rss_null: float
    null_distribution: np.ndarray | None = None
    p_value: float | None = None
    significant: bool | None = None
    diagnostics: frozenset[str] = frozenset()


def _window_rows(n: int, stim_lags: int, auto_lags: int) -> np.ndarray:
    margin = max(stim_lags, auto_lags)
    if n - margin < stim_lags + auto_lags + 3:
        raise InvalidParameterError(
            f"series of length {n} too short for {stim_lags} driver lags and "
            f"{auto_lags} auto lags"
        )
    return np.arange(margin, n)


def _lag_columns(series: np.ndarray, rows: np.ndarray, lags: int) -> np.ndarray:
    return np.column_stack([series[rows - k] for k in range(1, lags + 1)])


def _lag_labels(prefix: str, lags: int) -> tuple[str, ...]:
    return tuple(f"{prefix}-lag-{k}" for k in range(1, lags + 1))


def fit_arx(y: BoldSeries, driver, stim_lags: int, auto_lags: int) -> RegressionFit:
    """Fit the lagged-driver autoregression of a voxel series.

    Design columns: intercept, centered trend, driver lags 1..stim_lags,
    signal auto-lags 1..auto_lags; rows cover t = max(stim_lags, auto_lags)
    .. n-1 so that every lag is observed.  Raises RankDeficiencyError when
    the driver lags carry no information (for example an all-zero driver).
    """
    values = y.values
    drv = np.asarray(driver, dtype=np.float64)
    if drv.ndim != 1 or drv.size != values.size:
        raise InvalidParameterError(
            f"driver length {drv.size} != series length {values.size}"
        )
    if not np.all(np.isfinite(drv)):
        raise InvalidParameterError("driver values must be finite")
    rows = _window_rows(values.size, stim_lags, auto_lags)
    trend = rows - rows.mean()
    design = DesignMatrix(
        np.column_stack(
            [
                np.ones(rows.size),
                trend,
                _lag_columns(drv, rows, stim_lags),
                _lag_columns(values, rows, auto_lags),
            ]
        ),
        ("intercept", "linear-trend")
        + _lag_labels("stimulus", stim_lags)
        + _lag_labels("auto", auto_lags),
    )
    return least_squares(design, values[rows])


def fit_ar(y: BoldSeries, auto_lags: int, window_start: int | None = None) -> RegressionFit:
    """Fit the driver-free autoregression of a voxel series.

    window_start sets the first fitted row so the fit can share its
    observation window with a paired fit_arx (pass max(stim_lags,
    auto_lags)); it defaults to auto_lags for standalone use.
    """
    values = y.values
    if window_start is None:
        window_start = auto_lags
    if window_start < auto_lags:
        raise InvalidParameterError(
            f"window_start {window_start} cannot precede auto_lags {auto_lags}"
        )
    n = values.size
    if n - window_start < auto_lags + 3:
        raise InvalidParameterError(
            f"series of length {n} too short for window start {window_start}"
        )
    rows = np.arange(window_start, n)
    trend = rows - rows.mean()
    design = DesignMatrix(
        np.column_stack(
            [np.ones(rows.size), trend, _lag_columns(values, rows, auto_lags)]
        ),
        ("intercept", "linear-trend") + _lag_labels("auto", auto_lags),
    )
    return least_squares(design, values[rows])


def _clamped_strength(rss_full: float, rss_null: float) -> float:
    if rss_null <= 0.0:
        return 0.0
    return min(max(1.0 - rss_full / rss_null, 0.0), _STRENGTH_CEILING)


def causality_strength(y: BoldSeries, driver, cfg: GrangerConfig) -> CausalityScore:
    """Compute the causality strength of a driver for one voxel series.

    Fit failures (rank deficiency, zero null residual) degrade to strength 0
    with a diagnostic flag rather than raising.
    """
    diagnostics: set[str] = set()
    try:
        full = fit_arx(y, driver, cfg.stim_lags, cfg.auto_lags)
        null = fit_ar(y, cfg.auto_lags, window_start=max(cfg.stim_lags, cfg.auto_lags))
    except RankDeficiencyError:
        return CausalityScore(
            strength=0.0,
            rss_full=float("nan"),
            rss_null=float("nan"),
            diagnostics=frozenset({DIAG_RANK_DEFICIENT}),
        )
    if full.condition_warning or null.condition_warning:
        diagnostics.add(DIAG_ILL_CONDITIONED)
    if null.rss == 0.0:
        diagnostics.add(DIAG_DEGENERATE_NULL)
    return CausalityScore(
        strength=_clamped_strength(full.rss, null.rss),
        rss_full=full.rss,
        rss_null=null.rss,
        diagnostics=frozenset(diagnostics),
    )


def _surrogate_once(
    driver: np.ndarray, cfg: GrangerConfig, rng: np.random.Generator
) -> np.ndarray:
    n = driver.size
    if cfg.null_scheme == "circular-shift":
        # Shifts stay at least max(lags) + stim_lags away from zero in either
        # direction: small rotations leave the hemodynamically smeared
        # coupling intact and would not be null samples.
        min_shift = max(cfg.stim_lags, cfg.auto_lags) + cfg.stim_lags
        lo, hi = min_shift, n - min_shift
        if hi < lo:
            lo, hi = 1, n - 1
        shift = int(rng.integers(lo, hi + 1))
        return np.roll(driver, shift)
    n_blocks = -(-n // cfg.block_len)
    block_len = min(cfg.block_len, n)
    starts = rng.integers(0, n - block_len + 1, size=n_blocks)
    blocks = [driver[s : s + block_len] for s in starts]
    return np.concatenate(blocks)[:n]


def _surrogate_driver(
    driver: np.ndarray, cfg: GrangerConfig, rng: np.random.Generator
) -> np.ndarray:
    # A surrogate that reproduces the driver sample-for-sample carries zero
    # misalignment and is not a null draw.  This happens in practice: with
    # identical repeated runs, rotating by a whole run is the identity.
    # Redraw such copies (bounded, in case every allowed rotation is an
    # identity; the remaining copy is then merely conservative).
    for _ in range(50):
        surrogate = _surrogate_once(driver, cfg, rng)
        if not np.array_equal(surrogate, driver):
            return surrogate
    return surrogate


@dataclass(frozen=True, eq=False)
class _ArxWorkspace:
    """Precomputed pieces of the ARX design reused across bootstrap refits."""

    rows: np.ndarray
    y_window: np.ndarray
    trend: np.ndarray
    auto_cols: np.ndarray
    labels_tail: tuple[str, ...]

    @classmethod
    def build(cls, values: np.ndarray, cfg: GrangerConfig) -> "_ArxWorkspace":
        rows = _window_rows(values.size, cfg.stim_lags, cfg.auto_lags)
        return cls(
            rows=rows,
            y_window=values[rows],
            trend=rows - rows.mean(),
            auto_cols=_lag_columns(values, rows, cfg.auto_lags),
            labels_tail=_lag_labels("auto", cfg.auto_lags),
        )

    def fit_with_driver(self, driver: np.ndarray, cfg: GrangerConfig) -> RegressionFit:
        design = DesignMatrix(
            np.column_stack(
                [
                    np.ones(self.rows.size),
                    self.trend,
                    _lag_columns(driver, self.rows, cfg.stim_lags),
                    self.auto_cols,
                ]
            ),
            ("intercept", "linear-trend")
            + _lag_labels("stimulus", cfg.stim_lags)
            + self.labels_tail,
        )
        return least_squares(design, self.y_window)


def granger_detect_driver(
    y: BoldSeries,
    driver,
    cfg: GrangerConfig,
    rng: np.random.Generator | None = None,
) -> DetectionResult:
    """Causality detection engine shared by activation and connectivity.

    Computes the observed strength, rebuilds the null distribution from
    cfg.n_bootstrap surrogate drivers, and reports the percentile p-value.
    The returned DetectionResult carries the full CausalityScore in its
    ``score`` field; its statistic is the strength when significant and
    exactly 0 otherwise.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    drv = np.asarray(driver, dtype=np.float64)
    values = y.values
    if drv.ndim != 1 or drv.size != values.size:
        raise InvalidParameterError(
            f"driver length {drv.size} != series length {values.size}"
        )
    if not np.all(np.isfinite(drv)):
        raise InvalidParameterError("driver values must be finite")

    diagnostics: set[str] = set()
    try:
        workspace = _ArxWorkspace.build(values, cfg)
        null_fit = fit_ar(y, cfg.auto_lags, window_start=max(cfg.stim_lags, cfg.auto_lags))
        full_fit = workspace.fit_with_driver(drv, cfg)
    except RankDeficiencyError:
        score = CausalityScore(
            strength=0.0,
            rss_full=float("nan"),
            rss_null=float("nan"),
            p_value=1.0,
            significant=False,
            diagnostics=frozenset({DIAG_RANK_DEFICIENT}),
        )
        return DetectionResult(
            statistic=0.0,
            p_value=1.0,
            active=False,
            diagnostics=score.diagnostics,
            score=score,
        )

    if full_fit.condition_warning or null_fit.condition_warning:
        diagnostics.add(DIAG_ILL_CONDITIONED)
    if null_fit.rss == 0.0:
        diagnostics.add(DIAG_DEGENERATE_NULL)
    observed = _clamped_strength(full_fit.rss, null_fit.rss)

    # The null fit is driver-free, so only the full model is refitted per
    # surrogate.
    null_strengths = np.empty(cfg.n_bootstrap)
    for b in range(cfg.n_bootstrap):
        surrogate = _surrogate_driver(drv, cfg, rng)
        try:
            boot_fit = workspace.fit_with_driver(surrogate, cfg)
        except RankDeficiencyError:
            # a surrogate can degenerate (e.g. block resampling drew only
            # rest samples); it contributes no evidence against the observed
            null_strengths[b] = 0.0
            diagnostics.add("degenerate-surrogate")
            continue
        null_strengths[b] = _clamped_strength(boot_fit.rss, null_fit.rss)

    exceedances = int(np.count_nonzero(null_strengths >= observed))
    p_value = (1 + exceedances) / (cfg.n_bootstrap + 1)
    flags = frozenset(diagnostics)
    significant = p_value < cfg.alpha and not (flags & {DIAG_DEGENERATE_NULL})
    score = CausalityScore(
        strength=observed,
        rss_full=full_fit.rss,
        rss_null=null_fit.rss,
        null_distribution=null_strengths,
        p_value=p_value,
        significant=significant,
        diagnostics=flags,
    )
    return DetectionResult(
        statistic=observed if significant else 0.0,
        p_value=p_value,
        active=significant,
        fit_full=full_fit,
        fit_null=null_fit,
        diagnostics=flags,
        score=score,
    )


def granger_detect(y: BoldSeries, stim: StimulusTrain, cfg: GrangerConfig) -> DetectionResult:
    """Detect stimulus-driven activation of one voxel by causality testing."""
    if len(stim) != len(y):
        raise InvalidParameterError(
            f"series length {len(y)} != stimulus length {len(stim)}"
        )
    if stim.tr_seconds != y.tr_seconds:
        raise InvalidParameterError(
            f"series tr {y.tr_seconds} != stimulus tr {stim.tr_seconds}"
        )
    return granger_detect_driver(y, stim.samples, cfg)


def granger_map(
    grid: VoxelGrid, stim: StimulusTrain, cfg: GrangerConfig, jobs: int = 1
) -> list[DetectionResult]:
    """Run granger_detect on every voxel with per-voxel RNG streams.

    Each voxel's stream derives from (cfg.rng_seed, voxel index), so maps are
    deterministic and independent of both iteration order and worker count.
    """
    if grid.n_timepoints != len(stim):
        raise InvalidParameterError(
            f"grid has {grid.n_timepoints} time points, stimulus has {len(stim)}"
        )
    if grid.tr_seconds != stim.tr_seconds:
        raise InvalidParameterError(
            f"grid tr {grid.tr_seconds} != stimulus tr {stim.tr_seconds}"
        )

    def detect_one(index: int) -> DetectionResult:
        rng = np.random.default_rng([cfg.rng_seed, index])
        return granger_detect_driver(grid.series(index), stim.samples, cfg, rng=rng)

    return map_voxels(detect_one, grid.n_voxels, jobs=jobs)


def connectivity(
    grid: VoxelGrid, source: int, target: int, cfg: GrangerConfig
) -> CausalityScore:
    """Measure directed causality from one voxel's series to another's.

    This is granger_detect_driver with the source voxel's series in place of
    the stimulus: the same engine measures activation and connectivity.
    """
    if source == target:
        raise InvalidParameterError("source and target voxels must differ")
    if not (0 <= source < grid.n_voxels and 0 <= target < grid.n_voxels):
        raise InvalidParameterError(
            f"voxel indices ({source}, {target}) outside grid of {grid.n_voxels}"
        )
    result = granger_detect_driver(grid.series(target), grid.values[source], cfg)
    return result.score


@dataclass(frozen=True)
class NestingReport:
    """Result of checking that the zero-auto-lag causality model is the GLM."""

    rss_constrained_full: float
    rss_glm_full: float
    rss_constrained_null: float
    rss_glm_null: float
    max_relative_difference: float
    window_start: int
    rows: int
    passed: bool


def glm_nesting_check(
    y: BoldSeries,
    stim: StimulusTrain,
    hrf: HrfKernel,
    stim_lags: int | None = None,
    auto_lags: int = 1,
    tolerance: float = 1e-8,
) -> NestingReport:
    """Verify that the causality model with auto-lags removed is the GLM.

    Constraining the auto-lag coefficients to zero and tying the driver-lag
    coefficients to a single scale times the kernel taps collapses the full
    causality model onto the GLM activation model.  This check builds both
    designs through their own code paths (lag-matrix contraction vs direct
    convolution), fits each on the shared observation window, and reports the
    largest relative residual difference, which must sit within ``tolerance``.
    """
    if stim_lags is None:
        stim_lags = hrf.n_taps
    if stim_lags != hrf.n_taps:
        raise InvalidParameterError(
            f"tied coefficients need one kernel tap per driver lag: "
            f"{stim_lags} lags vs {hrf.n_taps} taps"
        )
    if len(stim) != len(y):
        raise InvalidParameterError(
            f"series length {len(y)} != stimulus length {len(stim)}"
        )
    values = y.values
    rows = _window_rows(values.size, stim_lags, auto_lags)
    trend = rows - rows.mean()
    ones = np.ones(rows.size)
    y_window = values[rows]

    # constrained causality route: contract the driver lag matrix against the
    # kernel taps (one free scale on the tied columns)
    tied_column = _lag_columns(stim.samples, rows, stim_lags) @ hrf.taps
    constrained_full = least_squares(
        DesignMatrix(
            np.column_stack([ones, trend, tied_column]),
            ("intercept", "linear-trend", "convolved-regressor"),
        ),
        y_window,
    )
    constrained_null = least_squares(
        DesignMatrix(np.column_stack([ones, trend]), ("intercept", "linear-trend")),
        y_window,
    )

    # GLM route: convolve first, then window
    response = convolve_stimulus(stim, hrf).values
    glm_full = least_squares(
        DesignMatrix(
            np.column_stack([ones, trend, response[rows]]),
            ("intercept", "linear-trend", "convolved-regressor"),
        ),
        y_window,
    )
    glm_null = least_squares(
        DesignMatrix(np.column_stack([ones, trend]), ("intercept", "linear-trend")),
        y_window,
    )

    # residuals at the floating-point noise floor (noiseless series) would
    # make a bare relative comparison meaningless; floor the denominator at
    # a tiny fraction of the data scale
    data_scale = max(constrained_null.rss, glm_null.rss)

    def rel_diff(a: float, b: float) -> float:
        scale = max(abs(a), abs(b), 1e-12 * data_scale)
        if scale == 0.0:
            return 0.0
        return abs(a - b) / scale

    max_rel = max(
        rel_diff(constrained_full.rss, glm_full.rss),
        rel_diff(constrained_null.rss, glm_null.rss),
    )
    return NestingReport(
        rss_constrained_full=constrained_full.rss,
        rss_glm_full=glm_full.rss,
        rss_constrained_null=constrained_null.rss,
        rss_glm_null=glm_null.rss,
        max_relative_difference=max_rel,
        window_start=int(rows[0]),
        rows=rows.size,
        passed=max_rel <= tolerance,
    )

"""Synthetic BOLD volumes with known ground truth.

The generator reproduces a block-design finger-tapping paradigm: per run, an
initial rest, then repeated task/rest blocks, padded with trailing rest up to
a target volume count, and runs concatenated end to end.  Each voxel's series
is a linear trend plus (for active voxels) the convolved stimulus response
scaled by a true coefficient, plus AR(1) noise.  AR(1) rather than white
noise gives the causality detector's autoregressive term real work to do.

Noise streams are derived per (seed, voxel index): regenerating with one
voxel's activity changed leaves every other voxel's series bit-identical.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .core import StimulusTrain, VoxelGrid, canonical_hrf, convolve_stimulus
from .errors import InvalidParameterError


@dataclass(frozen=True)
class Paradigm:
    """Block timing of one run, in seconds."""

    initial_rest_s: float = 30.0
    task_s: float = 12.0
    rest_s: float = 30.0
    repetitions: int = 5
    runs: int = 2

    def __post_init__(self):
        for name in ("initial_rest_s", "task_s", "rest_s"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        if self.repetitions < 0:
            raise InvalidParameterError("repetitions must be >= 0")
        if self.runs < 1:
            raise InvalidParameterError("runs must be >= 1")


@dataclass(frozen=True, eq=False)
class PhantomSpec:
    """Everything needed to generate a synthetic volume.

    active_mask marks ground-truth active voxels (row-major flat order); None
    means all inactive.  beta_true is the activation coefficient, a scalar or
    one value per voxel.  Block durations that are not integer multiples of
    tr_seconds round down to whole samples; the dropped remainder is exposed
    as timing_remainder_s.
    """

    dims: tuple[int, int, int] = (8, 8, 1)
    tr_seconds: float = 2.0
    paradigm: Paradigm = field(default_factory=Paradigm)
    n_volumes_per_run: int = 181
    active_mask: np.ndarray | None = None
    beta_true: float | np.ndarray = 1.0
    white_sd: float = 1.0
    ar1_coeff: float = 0.4
    offset: float = 100.0
    slope: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise InvalidParameterError(f"dims must be three positive integers, got {self.dims}")
        if not self.tr_seconds > 0:
            raise InvalidParameterError(f"tr_seconds must be > 0, got {self.tr_seconds}")
        if self.n_volumes_per_run < 1:
            raise InvalidParameterError("n_volumes_per_run must be >= 1")
        if not 0.0 <= self.ar1_coeff < 1.0:
            raise InvalidParameterError(f"ar1_coeff must be in [0, 1), got {self.ar1_coeff}")
        if self.white_sd < 0:
            raise InvalidParameterError(f"white_sd must be >= 0, got {self.white_sd}")
        if self.rng_seed < 0:
            raise InvalidParameterError(f"rng_seed must be >= 0, got {self.rng_seed}")
        n_vox = dims[0] * dims[1] * dims[2]
        if self.active_mask is None:
            mask = np.zeros(n_vox, dtype=bool)
        else:
            mask = np.asarray(self.active_mask, dtype=bool).reshape(-1)
            if mask.size != n_vox:
                raise InvalidParameterError(
                    f"active_mask has {mask.size} entries for {n_vox} voxels"
                )
        beta = np.broadcast_to(
            np.asarray(self.beta_true, dtype=np.float64), (n_vox,)
        ).copy()
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "active_mask", mask)
        object.__setattr__(self, "beta_true", beta)

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def _samples(self, seconds: float) -> int:
        return int(math.floor(seconds / self.tr_seconds + 1e-9))

    @property
    def timing_remainder_s(self) -> float:
        """Seconds dropped per run by rounding block durations to samples."""
        p = self.paradigm
        used = (
            self._samples(p.initial_rest_s)
            + p.repetitions * (self._samples(p.task_s) + self._samples(p.rest_s))
        ) * self.tr_seconds
        nominal = p.initial_rest_s + p.repetitions * (p.task_s + p.rest_s)
        return nominal - used

    @property
    def paradigm_samples_per_run(self) -> int:
        p = self.paradigm
        return self._samples(p.initial_rest_s) + p.repetitions * (
            self._samples(p.task_s) + self._samples(p.rest_s)
        )

    @property
    def pad_samples_per_run(self) -> int:
        """Trailing rest samples appended to reach n_volumes_per_run."""
        return self.n_volumes_per_run - self.paradigm_samples_per_run

    @property
    def task_onset_sample(self) -> int:
        """Index of the first task sample within a run."""
        return self._samples(self.paradigm.initial_rest_s)


def build_stimulus(spec: PhantomSpec) -> StimulusTrain:
    """Binary stimulus train for the spec's paradigm.

    Per run: initial rest, then repetitions x (task block, rest block), then
    trailing rest padding out to n_volumes_per_run; runs are concatenated.
    Raises InvalidParameterError, naming the discrepancy, when the blocks
    alone exceed the per-run volume count.
    """
    p = spec.paradigm
    used = spec.paradigm_samples_per_run
    if used > spec.n_volumes_per_run:
        raise InvalidParameterError(
            f"paradigm needs {used} samples per run but n_volumes_per_run is "
            f"{spec.n_volumes_per_run}"
        )
    rest0 = spec._samples(p.initial_rest_s)
    task = spec._samples(p.task_s)
    rest = spec._samples(p.rest_s)
    run = [0] * rest0
    for _ in range(p.repetitions):
        run.extend([1] * task)
        run.extend([0] * rest)
    run.extend([0] * spec.pad_samples_per_run)
    return StimulusTrain(samples=np.array(run * p.runs), tr_seconds=spec.tr_seconds)


@dataclass(frozen=True, eq=False)
class PhantomData:
    grid: VoxelGrid
    truth: np.ndarray
    stim: StimulusTrain


def generate(spec: PhantomSpec) -> PhantomData:
    """Generate the synthetic volume, its ground truth, and its stimulus.

    Voxel v gets offset + slope * t + beta_true[v] * response_t (when active)
    plus AR(1) noise with stationary start, all from the per-voxel stream
    seeded by (rng_seed, v).
    """
    stim = build_stimulus(spec)
    response = convolve_stimulus(stim, canonical_hrf(spec.tr_seconds)).values
    n = len(stim)
    t = np.arange(n, dtype=np.float64)
    baseline = spec.offset + spec.slope * t
    values = np.empty((spec.n_voxels, n))
    rho = spec.ar1_coeff
    for v in range(spec.n_voxels):
        rng = np.random.default_rng([spec.rng_seed, v])
        white = rng.standard_normal(n) * spec.white_sd
        if rho > 0.0:
            white[0] /= math.sqrt(1.0 - rho * rho)  # stationary start
            noise = lfilter([1.0], [1.0, -rho], white)
        else:
            noise = white
        values[v] = baseline + noise
        if spec.active_mask[v]:
            values[v] += spec.beta_true[v] * response
    grid = VoxelGrid(dims=spec.dims, values=values, tr_seconds=spec.tr_seconds)
    return PhantomData(grid=grid, truth=spec.active_mask.copy(), stim=stim)


def beta_for_cnr(spec: PhantomSpec, cnr: float) -> float:
    """Activation coefficient giving the requested contrast-to-noise ratio.

    CNR is defined as beta * sd(response) / sd(noise), with the stationary
    AR(1) noise standard deviation white_sd / sqrt(1 - ar1_coeff**2).
    """
    if cnr < 0:
        raise InvalidParameterError(f"cnr must be >= 0, got {cnr}")
    if spec.white_sd == 0:
        raise InvalidParameterError("cnr is undefined for noiseless phantoms")
    stim = build_stimulus(spec)
    response = convolve_stimulus(stim, canonical_hrf(spec.tr_seconds)).values
    sd_r = float(response.std())
    if sd_r == 0.0:
        raise InvalidParameterError("stimulus response is constant; cnr undefined")
    sd_noise = spec.white_sd / math.sqrt(1.0 - spec.ar1_coeff**2)
    return cnr * sd_noise / sd_r

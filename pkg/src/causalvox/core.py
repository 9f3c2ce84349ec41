"""Domain types for stimulus trains, voxel time series, and the hemodynamic response.

All types are immutable after construction (backing arrays are marked
read-only) and safe to share across concurrent workers; the operations in
this module are pure functions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

# Canonical impulse-response shape g(t) = t**HRF_POWER * exp(-t / HRF_DECAY_S),
# t in seconds.  Its peak sits at HRF_POWER * HRF_DECAY_S ~ 4.70 s, the usual
# hemodynamic delay.
HRF_POWER = 8.6
HRF_DECAY_S = 0.547

# 16 s of kernel support covers >99.9% of the canonical response mass.
DEFAULT_HRF_DURATION_S = 16.0

HRF_NORMALIZATIONS = ("unit-peak", "unit-sum", "raw")


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StimulusTrain:
    """Binary stimulus indicator, one sample per acquisition time point.

    Parameters
    ----------
    samples : array-like of {0, 1}
        1 where the stimulus is on, 0 elsewhere.
    tr_seconds : float
        Sampling interval (repetition time), > 0.
    """

    samples: np.ndarray
    tr_seconds: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidParameterError("stimulus train must be a non-empty 1-D sequence")
        if not np.all((arr == 0.0) | (arr == 1.0)):
            raise InvalidParameterError("stimulus samples must be exactly 0 or 1")
        if not (np.isfinite(self.tr_seconds) and self.tr_seconds > 0):
            raise InvalidParameterError(f"tr_seconds must be > 0, got {self.tr_seconds}")
        object.__setattr__(self, "samples", _frozen_array(arr))
        object.__setattr__(self, "tr_seconds", float(self.tr_seconds))

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True, eq=False)
class BoldSeries:
    """One voxel's real-valued intensity time series."""

    values: np.ndarray
    tr_seconds: float

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidParameterError("series must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("series values must all be finite")
        if not (np.isfinite(self.tr_seconds) and self.tr_seconds > 0):
            raise InvalidParameterError(f"tr_seconds must be > 0, got {self.tr_seconds}")
        object.__setattr__(self, "values", _frozen_array(arr))
        object.__setattr__(self, "tr_seconds", float(self.tr_seconds))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class HrfKernel:
    """Hemodynamic response sampled at multiples of the repetition time.

    ``taps[i]`` is the response weight at lag ``i + 1`` samples; lag 0 is
    excluded because the canonical shape vanishes at t = 0 and the convolution
    is strictly causal.
    """

    taps: np.ndarray
    normalization: str = "unit-peak"

    def __post_init__(self):
        arr = np.asarray(self.taps, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidParameterError("kernel needs at least one tap")
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("kernel taps must all be finite")
        if self.normalization not in HRF_NORMALIZATIONS:
            raise InvalidParameterError(
                f"normalization must be one of {HRF_NORMALIZATIONS}, got {self.normalization!r}"
            )
        object.__setattr__(self, "taps", _frozen_array(arr))

    @property
    def n_taps(self) -> int:
        return self.taps.size


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """A 3-D grid of voxel time series sharing one sampling interval.

    Series are stored as a 2-D (n_voxels, n_timepoints) array in row-major
    voxel order: voxel (x, y, z) lives at flat index (x * ny + y) * nz + z.
    """

    dims: tuple[int, int, int]
    values: np.ndarray
    tr_seconds: float

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise InvalidParameterError(f"dims must be three positive integers, got {self.dims}")
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise InvalidParameterError("values must be a 2-D (n_voxels, n_timepoints) array")
        nx, ny, nz = dims
        if arr.shape[0] != nx * ny * nz:
            raise InvalidParameterError(
                f"expected {nx * ny * nz} series for dims {dims}, got {arr.shape[0]}"
            )
        if arr.shape[1] < 1:
            raise InvalidParameterError("series must have at least one time point")
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("grid values must all be finite")
        if not (np.isfinite(self.tr_seconds) and self.tr_seconds > 0):
            raise InvalidParameterError(f"tr_seconds must be > 0, got {self.tr_seconds}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", _frozen_array(arr))
        object.__setattr__(self, "tr_seconds", float(self.tr_seconds))

    @property
    def n_voxels(self) -> int:
        return self.values.shape[0]

    @property
    def n_timepoints(self) -> int:
        return self.values.shape[1]

    def flat_index(self, x: int, y: int, z: int) -> int:
        nx, ny, nz = self.dims
        if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
            raise InvalidParameterError(f"voxel ({x}, {y}, {z}) outside dims {self.dims}")
        return (x * ny + y) * nz + z

    def coords(self, index: int) -> tuple[int, int, int]:
        nx, ny, nz = self.dims
        if not 0 <= index < self.n_voxels:
            raise InvalidParameterError(f"voxel index {index} outside grid of {self.n_voxels}")
        x, rem = divmod(index, ny * nz)
        y, z = divmod(rem, nz)
        return x, y, z

    def series(self, index: int) -> BoldSeries:
        if not 0 <= index < self.n_voxels:
            raise InvalidParameterError(f"voxel index {index} outside grid of {self.n_voxels}")
        return BoldSeries(self.values[index], self.tr_seconds)


def canonical_hrf(
    tr_seconds: float,
    duration_seconds: float = DEFAULT_HRF_DURATION_S,
    normalization: str = "unit-peak",
) -> HrfKernel:
    """Sample the canonical hemodynamic response at the acquisition rate.

    Tap ``i`` (1-based) is g(i * tr_seconds) with g(t) = t**8.6 * exp(-t/0.547),
    for i = 1 .. floor(duration_seconds / tr_seconds).  The t = 0 point is
    excluded since g(0) = 0.  Raw g values span many orders of magnitude, so
    the default rescales the kernel to unit peak; regression coefficients
    absorb the scale either way.

    Parameters
    ----------
    tr_seconds : float
        Sampling interval in seconds, > 0.
    duration_seconds : float
        Kernel support in seconds, >= tr_seconds.
    normalization : {"unit-peak", "unit-sum", "raw"}

    Returns
    -------
    HrfKernel
    """
    if not (np.isfinite(tr_seconds) and tr_seconds > 0):
        raise InvalidParameterError(f"tr_seconds must be > 0, got {tr_seconds}")
    if not (np.isfinite(duration_seconds) and duration_seconds >= tr_seconds):
        raise InvalidParameterError(
            f"duration_seconds must be >= tr_seconds, got {duration_seconds}"
        )
    n_taps = int(np.floor(duration_seconds / tr_seconds))
    t = tr_seconds * np.arange(1, n_taps + 1, dtype=np.float64)
    taps = t**HRF_POWER * np.exp(-t / HRF_DECAY_S)
    if normalization == "unit-peak":
        taps = taps / taps.max()
    elif normalization == "unit-sum":
        taps = taps / taps.sum()
    elif normalization != "raw":
        raise InvalidParameterError(
            f"normalization must be one of {HRF_NORMALIZATIONS}, got {normalization!r}"
        )
    return HrfKernel(taps=taps, normalization=normalization)


def convolve_stimulus(stim: StimulusTrain, hrf: HrfKernel) -> BoldSeries:
    """Convolve a stimulus train into its theoretical BOLD response.

    Output sample t is sum_{i=1..p} taps[i-1] * S[t - i]; samples of S before
    the start of the train count as zero (no circular wrap-around).  The
    response at time t therefore depends only on stimulus samples strictly
    before t, and the output has the same length as the input.
    """
    s = stim.samples
    # Leading zero gives lag 0 weight zero: the convolution is strictly causal.
    kernel = np.concatenate([[0.0], hrf.taps])
    response = np.convolve(s, kernel)[: s.size]
    return BoldSeries(values=response, tr_seconds=stim.tr_seconds)

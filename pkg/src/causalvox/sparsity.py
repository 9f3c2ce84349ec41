"""Gini-index sparsity of activation maps.

The Gini index scores how concentrated a nonnegative vector is: 0 for a
perfectly uniform vector, approaching 1 - 1/N as all mass collects in one
component.  Applied to an activation map's per-voxel magnitudes it measures
how localized the detected activation is, which makes maps from different
detectors directly comparable.
"""

import numpy as np

from .errors import InvalidParameterError, UndefinedSparsityError

MAGNITUDE_MODES = ("all-voxels", "statistic", "active-only")


def gini_index(values) -> float:
    """Gini index of a nonnegative vector.

    With components sorted ascending, returns
    1 - 2 * sum_k (v_k / ||v||_1) * ((N - k + 1/2) / N).  The result lies in
    [0, 1 - 1/N] and is invariant to positive rescaling and to permutation.

    Raises
    ------
    InvalidParameterError
        If the vector is empty or has a negative component.
    UndefinedSparsityError
        If every component is zero (the index divides by ||v||_1).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidParameterError("sparsity needs a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise InvalidParameterError("sparsity input must be finite")
    if np.any(v < 0):
        raise InvalidParameterError("sparsity is defined on magnitudes; negatives given")
    n = v.size
    ordered = np.sort(v)
    # summing the sorted array makes the result exactly permutation invariant
    total = float(ordered.sum())
    if total == 0.0:
        raise UndefinedSparsityError("all components are zero; Gini index undefined")
    k = np.arange(1, n + 1, dtype=np.float64)
    weights = (n - k + 0.5) / n
    return float(1.0 - 2.0 * np.sum((ordered / total) * weights))


def map_gini(results, magnitude: str = "all-voxels") -> float:
    """Gini index of an activation map's statistic magnitudes.

    Modes
    -----
    "all-voxels" (default)
        One entry per voxel, |statistic| for active voxels and exactly 0 for
        inactive ones (inactive voxels carry no detected activation).
    "statistic"
        One entry per voxel, raw |statistic| regardless of the decision.
    "active-only"
        Entries only for active voxels.

    Raises UndefinedSparsityError, with voxel counts in the message, when the
    selected magnitudes are all zero or empty.
    """
    if magnitude not in MAGNITUDE_MODES:
        raise InvalidParameterError(
            f"magnitude must be one of {MAGNITUDE_MODES}, got {magnitude!r}"
        )
    results = list(results)
    if not results:
        raise InvalidParameterError("empty activation map")
    n_active = sum(1 for r in results if r.active)
    if magnitude == "all-voxels":
        mags = [abs(r.statistic) if r.active else 0.0 for r in results]
    elif magnitude == "statistic":
        mags = [abs(r.statistic) for r in results]
    else:
        mags = [abs(r.statistic) for r in results if r.active]
    if not mags or not any(m > 0 for m in mags):
        raise UndefinedSparsityError(
            f"no nonzero magnitudes in mode {magnitude!r} "
            f"({n_active} active of {len(results)} voxels)"
        )
    return gini_index(np.asarray(mags))

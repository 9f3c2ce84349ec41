"""Least-squares fitting and the statistical tests shared by both detectors.

The solver runs a column-pivoted QR factorization rather than the textbook
normal equations: trend and convolved-regressor columns can be strongly
correlated, and the pivoted factorization both keeps the solve stable and
exposes the numerical rank.  All functions here are pure and safe to call
concurrently.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr as _pivoted_qr
from scipy.linalg import solve_triangular
from scipy.special import betainc, ndtr

from .errors import InvalidParameterError, RankDeficiencyError

# R-diagonal spread beyond this flags the fit as ill-conditioned.
CONDITION_WARNING_RATIO = 1e8

# Below this many observations in the smaller sample, the rank-sum test uses
# the exact permutation distribution instead of the normal approximation.
RANK_SUM_EXACT_BELOW = 8


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """A regression design: row-major entries plus semantic column labels.

    Labels follow the convention "intercept", "linear-trend",
    "convolved-regressor", "stimulus-lag-k", "auto-lag-k".
    """

    entries: np.ndarray
    column_labels: tuple[str, ...]

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=np.float64)
        if arr.ndim != 2:
            raise InvalidParameterError("design entries must form a 2-D array")
        rows, cols = arr.shape
        if cols < 1:
            raise InvalidParameterError("design needs at least one column")
        if rows < cols:
            raise InvalidParameterError(
                f"under-determined design: {rows} rows < {cols} columns"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("design entries must all be finite")
        labels = tuple(self.column_labels)
        if len(labels) != cols:
            raise InvalidParameterError(
                f"{len(labels)} labels for {cols} columns"
            )
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "column_labels", labels)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True, eq=False)
class RegressionFit:
    """Ordinary-least-squares fit summary."""

    coefficients: np.ndarray
    column_labels: tuple[str, ...]
    rss: float
    dof_residual: int
    fitted: np.ndarray
    condition_warning: bool = False

    def coefficient(self, label: str) -> float:
        try:
            return float(self.coefficients[self.column_labels.index(label)])
        except ValueError:
            raise InvalidParameterError(f"no column labelled {label!r}") from None

    @property
    def n_columns(self) -> int:
        return len(self.column_labels)


@dataclass(frozen=True)
class FTestResult:
    f_stat: float
    p_value: float
    perfect_fit: bool = False


@dataclass(frozen=True)
class RankSumResult:
    u_stat: float
    p_value: float
    exact: bool


def least_squares(design: DesignMatrix, y) -> RegressionFit:
    """Solve min ||y - X b||^2 by column-pivoted QR.

    Parameters
    ----------
    design : DesignMatrix
    y : array-like, length design.rows

    Returns
    -------
    RegressionFit
        Coefficients in design column order, residual sum of squares computed
        directly from the residuals, and a condition warning when the
        R-diagonal spread exceeds 1e8.

    Raises
    ------
    RankDeficiencyError
        If the numerical rank (pivoted R diagonal against
        max(rows, cols) * eps * largest diagonal) is below the column count.
    InvalidParameterError
        On a length mismatch between y and the design.
    """
    yv = np.asarray(y, dtype=np.float64)
    if yv.ndim != 1 or yv.size != design.rows:
        raise InvalidParameterError(
            f"y has length {yv.size}, design has {design.rows} rows"
        )
    if not np.all(np.isfinite(yv)):
        raise InvalidParameterError("y must be finite")

    X = design.entries
    q, r, piv = _pivoted_qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    largest = diag[0]
    tol = max(design.rows, design.cols) * np.finfo(np.float64).eps * largest
    rank = int(np.count_nonzero(diag > tol))
    if rank < design.cols:
        raise RankDeficiencyError(
            f"design is rank deficient: numerical rank {rank} < {design.cols} columns",
            rank=rank,
        )
    condition_warning = bool(largest > CONDITION_WARNING_RATIO * diag[-1])

    beta_piv = solve_triangular(r, q.T @ yv, lower=False)
    beta = np.empty_like(beta_piv)
    beta[piv] = beta_piv

    fitted = X @ beta
    resid = yv - fitted
    rss = float(resid @ resid)
    return RegressionFit(
        coefficients=beta,
        column_labels=design.column_labels,
        rss=rss,
        dof_residual=design.rows - design.cols,
        fitted=fitted,
        condition_warning=condition_warning,
    )


def f_cdf(x: float, d1: int, d2: int) -> float:
    """CDF of the F distribution via the regularized incomplete beta function.

    Returns I_{d1 x / (d1 x + d2)}(d1/2, d2/2); monotone nondecreasing in x.
    """
    d1 = int(d1)
    d2 = int(d2)
    if d1 < 1 or d2 < 1:
        raise InvalidParameterError(f"degrees of freedom must be positive, got ({d1}, {d2})")
    if not np.isfinite(x):
        if x > 0:
            return 1.0
        raise InvalidParameterError(f"x must be finite and >= 0, got {x}")
    if x < 0:
        raise InvalidParameterError(f"x must be >= 0, got {x}")
    if x == 0:
        return 0.0
    return float(betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2)))


def _f_sf(x: float, d1: int, d2: int) -> float:
    # Survival function through the mirrored beta argument, stable for tiny
    # tail probabilities where 1 - f_cdf would cancel.
    if x <= 0:
        return 1.0
    return float(betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x)))


def f_test_nested(full: RegressionFit, restricted: RegressionFit, n_used: int) -> FTestResult:
    """F-test of a full model against a nested restriction.

    f = ((RSS_r - RSS_f) / d1) / (RSS_f / d2) with d1 the number of dropped
    columns and d2 = n_used - cols_full; the statistic is clamped to 0 when
    rounding makes RSS_r < RSS_f.  A numerically zero full-model RSS (at most
    1e-18 of the restricted RSS) short-circuits to p = 0 with the perfect-fit
    flag set; a zero restricted RSS leaves nothing to test (f = 0, p = 1,
    flag set).
    """
    full_labels = set(full.column_labels)
    restricted_labels = set(restricted.column_labels)
    if not restricted_labels < full_labels:
        raise InvalidParameterError(
            "restricted model columns must be a strict subset of the full model's"
        )
    d1 = full.n_columns - restricted.n_columns
    d2 = int(n_used) - full.n_columns
    if d1 <= 0 or d2 <= 0:
        raise InvalidParameterError(
            f"invalid F-test degrees of freedom d1={d1}, d2={d2}"
        )
    if restricted.rss < full.rss - 1e-9 * restricted.rss:
        raise InvalidParameterError(
            "models are not nested: restricted RSS is below the full RSS"
        )
    if restricted.rss == 0.0:
        # even the restriction fits perfectly: nothing left to explain
        return FTestResult(f_stat=0.0, p_value=1.0, perfect_fit=True)
    if full.rss <= 1e-18 * restricted.rss:
        # numerically zero full-model residual
        return FTestResult(f_stat=float("inf"), p_value=0.0, perfect_fit=True)
    f_stat = max(0.0, ((restricted.rss - full.rss) / d1) / (full.rss / d2))
    return FTestResult(f_stat=f_stat, p_value=_f_sf(f_stat, d1, d2))


def _midranks(pooled: np.ndarray) -> np.ndarray:
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(pooled.size, dtype=np.float64)
    sorted_vals = pooled[order]
    i = 0
    while i < pooled.size:
        j = i
        while j + 1 < pooled.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_rank_sum_p(ranks2: np.ndarray, n_a: int, u2_obs: int) -> float:
    """Two-sided exact p over all equally likely group assignments.

    ``ranks2`` holds doubled midranks (integers), so all rank sums are exact
    integer arithmetic.  Counts subsets by a subset-sum dynamic program whose
    cost grows with n * n_a * max_subset_sum, not with C(n, n_a).
    """
    # no n_a-subset can exceed the sum of the n_a largest doubled ranks
    max_sum = int(np.sort(ranks2)[-n_a:].sum())
    # table[j][s] = number of j-subsets with doubled rank sum s
    table = np.zeros((n_a + 1, max_sum + 1), dtype=np.float64)
    table[0, 0] = 1.0
    for w in ranks2:
        w = int(w)
        for j in range(n_a, 0, -1):
            if w <= max_sum:
                table[j, w:] += table[j - 1, : max_sum + 1 - w]
    counts = table[n_a]
    n_subsets = counts.sum()
    offset = n_a * (n_a + 1)  # doubled n_a(n_a+1)/2
    # U (doubled) for a subset with doubled rank sum s is s - offset.
    u2 = np.arange(max_sum + 1) - offset
    p_le = counts[u2 <= u2_obs].sum() / n_subsets
    p_ge = counts[u2 >= u2_obs].sum() / n_subsets
    return min(1.0, 2.0 * min(p_le, p_ge))


def rank_sum_test(sample_a, sample_b) -> RankSumResult:
    """Two-sided Wilcoxon-Mann-Whitney rank-sum test with midrank ties.

    Uses the exact permutation distribution when the smaller sample has fewer
    than 8 observations, and the tie-corrected normal approximation with
    continuity correction otherwise.  The reported u_stat counts (a > b)
    pairs, ties at half weight.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise InvalidParameterError("rank-sum samples must both be non-empty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidParameterError("rank-sum samples must be finite")
    n_a, n_b = a.size, b.size
    n = n_a + n_b
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    rank_sum_a = float(ranks[:n_a].sum())
    u_stat = rank_sum_a - n_a * (n_a + 1) / 2.0

    if min(n_a, n_b) < RANK_SUM_EXACT_BELOW:
        ranks2 = np.rint(2.0 * ranks).astype(np.int64)
        u2_obs = int(round(2.0 * rank_sum_a)) - n_a * (n_a + 1)
        p = _exact_rank_sum_p(ranks2, n_a, u2_obs)
        return RankSumResult(u_stat=u_stat, p_value=p, exact=True)

    mean_u = n_a * n_b / 2.0
    # tie correction to the null variance of U
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts))
    var_u = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var_u <= 0:
        # every pooled value identical: no evidence either way
        return RankSumResult(u_stat=u_stat, p_value=1.0, exact=False)
    diff = u_stat - mean_u
    # continuity correction shrinks |diff| by one half step toward the mean
    z = (abs(diff) - 0.5) / np.sqrt(var_u)
    z = max(z, 0.0)
    p = min(1.0, 2.0 * float(ndtr(-z)))
    return RankSumResult(u_stat=u_stat, p_value=p, exact=False)


def exhaustive_rank_sum_p(sample_a, sample_b) -> float:
    """Brute-force two-sided rank-sum p by enumerating group assignments.

    Independent check for :func:`rank_sum_test`: recomputes the pairwise
    statistic from raw values for every C(n, n_a) assignment.  Only feasible
    for small pooled sizes.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    pooled = np.concatenate([a, b])
    n = pooled.size
    n_a = a.size

    def u_of(group_a, group_b):
        return sum(
            (x > y) + 0.5 * (x == y) for x in group_a for y in group_b
        )

    u_obs = u_of(a, b)
    count_le = 0
    count_ge = 0
    total = 0
    idx_all = set(range(n))
    for combo in itertools.combinations(range(n), n_a):
        rest = idx_all.difference(combo)
        u = u_of(pooled[list(combo)], pooled[list(rest)])
        total += 1
        if u <= u_obs + 1e-12:
            count_le += 1
        if u >= u_obs - 1e-12:
            count_ge += 1
    return min(1.0, 2.0 * min(count_le / total, count_ge / total))

"""Marginal mean model by generalized estimating equations.

Subjects are clusters of one or two binary organ responses.  The mean
model is identity-link, one proportion per group (or a single common
proportion under the homogeneity restriction), with working covariance
V = A^(1/2) R A^(1/2) where A = diag(mu (1 - mu)).  For clusters of at
most two the exchangeable and unstructured working correlations carry
one identical parameter, estimated by the moment method on Pearson
residual cross-products.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .counts import CombinedCounts, ModelKind
from .errors import DataError, InvalidParameterError, NonConvergenceError, \
    SingularInformationError
from .homogeneity import TestKind, TestResult, chi_sq_sf

__all__ = ["CorrelationStructure", "WorkingCorrelation", "Cluster", "GeeClusterSet",
           "stack", "GeeFit", "gee_fit", "gee_score_test"]

MEAN_TOL = 1e-10
MAX_OUTER = 100


class CorrelationStructure(enum.Enum):
    INDEPENDENCE = "independence"
    EXCHANGEABLE = "exchangeable"
    UNSTRUCTURED = "unstructured"


@dataclass(frozen=True)
class WorkingCorrelation:
    """Working correlation choice; ``alpha`` pins the parameter instead of
    estimating it (ignored and fixed at zero under independence)."""

    structure: CorrelationStructure = CorrelationStructure.UNSTRUCTURED
    alpha: float | None = None

    def __post_init__(self):
        if self.alpha is not None and not (-1.0 < float(self.alpha) < 1.0):
            raise InvalidParameterError(f"alpha={self.alpha!r} must lie in (-1, 1)")

    def resolve(self) -> tuple[bool, float]:
        """(fixed?, value) for the kernel layer."""
        if self.structure is CorrelationStructure.INDEPENDENCE:
            return True, 0.0
        if self.alpha is not None:
            return True, float(self.alpha)
        return False, 0.0


@dataclass(frozen=True)
class Cluster:
    """One collapsed subject pattern: group index, organ responses, multiplicity."""

    group: int
    responses: tuple[int, ...]
    weight: int = 1

    def __post_init__(self):
        if len(self.responses) not in (1, 2):
            raise DataError(f"cluster size must be 1 or 2, got {len(self.responses)}")
        if any(r not in (0, 1) for r in self.responses):
            raise DataError(f"responses must be binary, got {self.responses!r}")
        if self.weight < 0:
            raise DataError("cluster weight must be nonnegative")


@dataclass(frozen=True)
class GeeClusterSet:
    """Weighted collapsed clusters plus the group labels they index."""

    clusters: tuple[Cluster, ...]
    labels: tuple[str, ...]

    @property
    def g(self) -> int:
        return len(self.labels)

    def total_clusters(self) -> int:
        return sum(c.weight for c in self.clusters)

    def total_organs(self) -> int:
        return sum(c.weight * len(c.responses) for c in self.clusters)

    def to_counts(self) -> CombinedCounts:
        """Collapse back to the frequency table (inverse of :func:`stack`)."""
        m = np.zeros((self.g, 3), dtype=int)
        n = np.zeros((self.g, 2), dtype=int)
        for c in self.clusters:
            if not 0 <= c.group < self.g:
                raise DataError(f"cluster group index {c.group} out of range")
            if len(c.responses) == 2:
                m[c.group, c.responses[0] + c.responses[1]] += c.weight
            else:
                n[c.group, c.responses[0]] += c.weight
        return CombinedCounts.from_arrays(m, n, self.labels)

    def count_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        data = self.to_counts()
        return data.m_array(), data.n_array()


_BILATERAL_PATTERNS = ((0, 0), (1, 0), (1, 1))


def stack(data: CombinedCounts) -> GeeClusterSet:
    """Expand the frequency table into weighted subject clusters.

    Per group: m0 clusters (0,0), m1 clusters (1,0), m2 clusters (1,1),
    then n0 clusters (0,) and n1 clusters (1,).  Zero-weight patterns are
    kept so the layout is the same for every dataset.
    """
    clusters = []
    for i, gc in enumerate(data.groups):
        for pattern, count in zip(_BILATERAL_PATTERNS, (gc.m0, gc.m1, gc.m2)):
            clusters.append(Cluster(i, pattern, count))
    for i, gc in enumerate(data.groups):
        clusters.append(Cluster(i, (0,), gc.n0))
        clusters.append(Cluster(i, (1,), gc.n1))
    return GeeClusterSet(tuple(clusters), data.labels)


@dataclass(frozen=True)
class GeeFit:
    """A converged GEE solution.

    ``group_means`` always has one entry per group (repeating the common
    value under the restriction); the covariance matrices are sized to
    the free mean parameters, so they are 1 x 1 for a restricted fit.
    """

    group_means: np.ndarray
    alpha_hat: float
    scale: float
    model_cov: np.ndarray
    robust_cov: np.ndarray
    converged: bool
    constrained: bool
    degenerate: bool
    iterations: int


def _fit_arrays(m: np.ndarray, n: np.ndarray, wc: WorkingCorrelation,
                constrain_equal: bool) -> GeeFit:
    fixed, value = wc.resolve()
    means, alpha, phi, iters, conv, degen = _kernels.gee_fit_kernel(
        m, n, constrain_equal, fixed, value, MEAN_TOL, MAX_OUTER)
    means = np.asarray(means)
    if not conv:
        raise NonConvergenceError(
            f"GEE fit did not converge in {iters} outer iterations")
    s_vec, h_vec, meat = _kernels.gee_blocks_kernel(m, n, means, alpha)
    h_vec = np.asarray(h_vec)
    meat = np.asarray(meat)
    if constrain_equal:
        h = np.array([[h_vec.sum()]])
        mt = np.array([[meat.sum()]])
    else:
        h = np.diag(h_vec)
        mt = np.diag(meat)
    bread = np.diag(1.0 / np.diag(h))
    model_cov = phi * bread
    robust_cov = bread @ mt @ bread
    return GeeFit(means, float(alpha), float(phi), model_cov, robust_cov,
                  True, constrain_equal, bool(degen), int(iters))


def gee_fit(clusters: GeeClusterSet, wc: WorkingCorrelation = WorkingCorrelation(),
            constrain_equal: bool = False) -> GeeFit:
    """Solve the estimating equations, alternating with moment updates.

    Step (a) solves the weighted estimating equations for the means at
    the current alpha (closed form for this design); step (b)
    re-estimates alpha from standardized residual cross-products of the
    size-2 clusters, scaled by the Pearson residual mean square.  The
    loop stops when the largest mean change falls below 1e-10.
    """
    m, n = clusters.count_arrays()
    return _fit_arrays(m, n, wc, constrain_equal)


def gee_score_test(clusters: GeeClusterSet,
                   wc: WorkingCorrelation = WorkingCorrelation()) -> TestResult:
    """Generalized score test that all group means are equal.

    The working correlation and scale come from the unrestricted fit;
    the common mean is then re-solved at that alpha, and the statistic
    contrasts the model-projected estimating function against its
    empirical sandwich covariance,

        T = (L B S)' [L B M B L']^-1 (L B S),

    with S the unrestricted estimating function at the restricted
    solution, B the inverse model-based bread, M the empirical meat, and
    L the adjacent-difference contrasts.  T is referred to chi-square
    with g-1 degrees of freedom.
    """
    g = clusters.g
    if g < 2:
        raise InvalidParameterError("the homogeneity test needs at least two groups")
    m, n = clusters.count_arrays()
    fixed, value = wc.resolve()
    stat = _kernels.gee_score_stat_kernel(m, n, fixed, value, MEAN_TOL, MAX_OUTER)
    if np.isnan(stat):
        raise SingularInformationError("empirical score covariance is singular")
    stat = max(float(stat), 0.0)
    return TestResult(TestKind.GEE_SCORE, stat, g - 1, chi_sq_sf(stat, g - 1))

"""Asymptotic homogeneity tests and AIC model comparison.

All three likelihood statistics are referred to the chi-square
distribution with g-1 degrees of freedom.  The Wald form is evaluated at
the unrestricted estimate with the contrast covariance C' I^-1 C (the
restricted estimate would make the statistic identically zero); the
score form uses the restricted estimate with the kappa slot of the score
zeroed.
"""

from __future__ import annotations

from dataclasses import dataclass
import enum

import numpy as np

from . import _kernels
from .counts import CombinedCounts, ModelKind
from .errors import InvalidParameterError, NonConvergenceError, SingularInformationError
from .mle import FitResult, fisher_information, fit_constrained, fit_unconstrained

__all__ = ["TestKind", "TestResult", "AicComparison", "chi_sq_sf", "chi_sq_critical",
           "adjacent_contrasts", "lr_test", "wald_test", "score_test", "aic_compare"]


class TestKind(enum.Enum):
    LR = "lr"
    WALD = "wald"
    SCORE = "score"
    GEE_SCORE = "gee"

    @property
    def label(self) -> str:
        return {"lr": "LR", "wald": "Wald", "score": "Score", "gee": "GEE score"}[self.value]


@dataclass(frozen=True)
class TestResult:
    """A test statistic with its reference distribution outcome."""

    kind: TestKind
    statistic: float
    df: int
    p_value: float


def chi_sq_sf(x: float, df: int) -> float:
    """Upper-tail probability P(chi2_df > x) via the regularized upper
    incomplete gamma function; absolute error below 1e-10."""
    if df < 1 or int(df) != df:
        raise InvalidParameterError(f"df={df!r} must be a positive integer")
    x = float(x)
    if not np.isfinite(x) or x < 0.0:
        raise InvalidParameterError(f"x={x!r} must be a finite nonnegative number")
    return float(_kernels.chi_sq_sf_kernel(x, int(df)))


def chi_sq_critical(alpha: float, df: int) -> float:
    """The 1-alpha quantile of chi2_df, solved by bisection on chi_sq_sf."""
    if not (0.0 < alpha < 1.0):
        raise InvalidParameterError(f"alpha={alpha!r} must lie strictly in (0, 1)")
    lo, hi = 0.0, 1.0
    while chi_sq_sf(hi, df) > alpha:
        hi *= 2.0
        if hi > 1e12:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi_sq_sf(mid, df) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def adjacent_contrasts(g: int) -> np.ndarray:
    """The (g-1) x (g+1) adjacent-difference contrast rows over (pi_1..pi_g, kappa)."""
    c = np.zeros((g - 1, g + 1))
    for i in range(g - 1):
        c[i, i] = 1.0
        c[i, i + 1] = -1.0
    return c


def _require_groups(data: CombinedCounts) -> int:
    if data.g < 2:
        raise InvalidParameterError("homogeneity tests need at least two groups")
    return data.g


def _finish(kind: TestKind, stat: float, g: int) -> TestResult:
    df = g - 1
    return TestResult(kind, float(stat), df, chi_sq_sf(max(stat, 0.0), df))


def lr_test(data: CombinedCounts, kind: ModelKind | str,
            fits: tuple[FitResult, FitResult] | None = None) -> TestResult:
    """Likelihood ratio statistic 2[l(unrestricted) - l(restricted)].

    ``fits`` may supply precomputed (restricted, unrestricted) results to
    avoid refitting.  Values within -1e-9 of zero are clamped to zero.
    """
    g = _require_groups(data)
    con, unc = fits if fits is not None else (
        fit_constrained(data, kind), fit_unconstrained(data, kind))
    stat = 2.0 * (unc.loglik - con.loglik)
    if stat < -1e-9:
        raise NonConvergenceError(
            f"restricted fit beats the unrestricted one by {-stat:.3g}; "
            "a fit has not actually converged", best=unc)
    return _finish(TestKind.LR, max(stat, 0.0), g)


def wald_test(data: CombinedCounts, kind: ModelKind | str,
              fit: FitResult | None = None,
              contrasts: np.ndarray | None = None) -> TestResult:
    """Wald statistic (C'b)' [C' I^-1 C]^-1 (C'b) at the unrestricted estimate.

    ``contrasts`` may replace the adjacent-difference rows with any
    (g-1) x (g+1) matrix spanning the same contrast space; the statistic
    is invariant to that choice.
    """
    g = _require_groups(data)
    unc = fit if fit is not None else fit_unconstrained(data, kind)
    info = fisher_information(unc.params, data.m_plus(), data.n_plus())
    iinv, ok = _kernels.inv_kernel(info)
    if not ok:
        raise SingularInformationError("information matrix at the unrestricted "
                                       "estimate is singular")
    c = adjacent_contrasts(g) if contrasts is None else np.asarray(contrasts, dtype=float)
    if c.shape != (g - 1, g + 1):
        raise InvalidParameterError(f"contrast matrix must be {(g - 1, g + 1)}, got {c.shape}")
    beta = unc.params.as_vector()
    d = c @ beta
    cov = c @ np.asarray(iinv) @ c.T
    x, ok = _kernels.solve_kernel(cov, d)
    if not ok:
        raise SingularInformationError("contrast covariance is singular")
    return _finish(TestKind.WALD, float(d @ np.asarray(x)), g)


def score_test(data: CombinedCounts, kind: ModelKind | str,
               fit: FitResult | None = None) -> TestResult:
    """Score statistic U I^-1 U' at the restricted estimate.

    U carries the per-group proportion derivatives with a zero in the
    kappa slot; I is the expected information at the restricted fit.
    """
    g = _require_groups(data)
    con = fit if fit is not None else fit_constrained(data, kind)
    kind = ModelKind.parse(kind)
    stat = _kernels.score_stat_kernel(
        float(con.params.pis[0]), con.params.kappa, kind.code,
        data.m_array(), data.n_array())
    if np.isnan(stat):
        raise SingularInformationError("information matrix at the restricted "
                                       "estimate is singular")
    if stat < 0.0:
        stat = 0.0
    return _finish(TestKind.SCORE, float(stat), g)


@dataclass(frozen=True)
class AicComparison:
    """AIC gap between the two models fitted without restriction.

    ``delta_aic`` is AIC(ratio model) - AIC(correlation model); both
    models carry g+1 parameters, so it reduces to -2 times the
    log-likelihood difference.  ``aic`` maps each model to its absolute
    AIC computed from the constant-free log-likelihood (the multinomial
    and binomial coefficients are omitted; they would cancel in the
    difference anyway).
    """

    delta_aic: float
    preferred: ModelKind
    aic: dict
    fits: dict


def aic_compare(data: CombinedCounts) -> AicComparison:
    """Fit both models unrestricted and compare their AIC."""
    fits = {k: fit_unconstrained(data, k) for k in ModelKind}
    n_par = data.g + 1
    aic = {k: -2.0 * f.loglik + 2.0 * n_par for k, f in fits.items()}
    delta = aic[ModelKind.ROSNER] - aic[ModelKind.DONNER]
    preferred = ModelKind.ROSNER if delta <= 0.0 else ModelKind.DONNER
    return AicComparison(float(delta), preferred, aic, fits)

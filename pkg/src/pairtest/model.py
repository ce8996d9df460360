"""Closed-form probability and likelihood mathematics for both models.

Under the constant conditional-probability model the nuisance parameter
kappa is the ratio R with within-pair correlation (R-1)pi/(1-pi); under
the shared-correlation model kappa is the correlation rho itself.  The
two are exchangeable through :func:`corr_convert`.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .counts import CombinedCounts, JointProbs, ModelKind, ModelParams
from .errors import BoundaryError, InvalidParameterError

__all__ = ["joint_probs", "valid_region", "corr_convert", "log_likelihood",
           "log_likelihood_constant", "score_vector"]


def _check_pi(pi: float) -> float:
    pi = float(pi)
    if not (0.0 < pi < 1.0) or not np.isfinite(pi):
        raise InvalidParameterError(f"pi={pi!r} must lie strictly in (0, 1)")
    return pi


def valid_region(pi: float, kind: ModelKind | str) -> tuple[float, float]:
    """Closed interval of kappa values keeping all joint probabilities in [0, 1].

    For the ratio model this is [max(0, (2 pi - 1) / pi^2), 1 / pi]; for
    the correlation model [max(-pi/(1-pi), -(1-pi)/pi), 1].
    """
    pi = _check_pi(pi)
    kind = ModelKind.parse(kind)
    lo, hi = _kernels.kappa_bounds_kernel(np.array([pi]), kind.code)
    return float(lo), float(hi)


def joint_probs(pi: float, kappa: float, kind: ModelKind | str) -> JointProbs:
    """Joint probabilities (p0, p1, p2) of 0/1/2 responses per bilateral subject.

    Raises
    ------
    InvalidParameterError
        If (pi, kappa) falls outside the valid region; the message names
        the violated bound.
    """
    pi = _check_pi(pi)
    kind = ModelKind.parse(kind)
    kappa = float(kappa)
    lo, hi = valid_region(pi, kind)
    name = kind.kappa_name
    if not np.isfinite(kappa) or kappa < lo:
        raise InvalidParameterError(
            f"{name}={kappa:.6g} is below the lower bound {lo:.6g} at pi={pi:.6g}")
    if kappa > hi:
        raise InvalidParameterError(
            f"{name}={kappa:.6g} is above the upper bound {hi:.6g} at pi={pi:.6g}")
    p0, p1, p2 = _kernels.joint_probs_kernel(pi, kappa, kind.code)
    return JointProbs(float(p0), float(p1), float(p2))


def corr_convert(pi: float, kappa: float, kind_from: ModelKind | str) -> float:
    """Convert the nuisance parameter between the two model scales.

    From the ratio model, returns the within-pair correlation
    rho = (R - 1) pi / (1 - pi); from the correlation model, the ratio
    R = (1 - pi) rho / pi + 1.  The round trip is exact to ~1e-14.
    """
    pi = _check_pi(pi)
    kind_from = ModelKind.parse(kind_from)
    kappa = float(kappa)
    lo, hi = valid_region(pi, kind_from)
    if kappa < lo or kappa > hi:
        raise InvalidParameterError(
            f"{kind_from.kappa_name}={kappa:.6g} outside [{lo:.6g}, {hi:.6g}] at pi={pi:.6g}")
    if kind_from is ModelKind.ROSNER:
        return (kappa - 1.0) * pi / (1.0 - pi)
    return (1.0 - pi) * kappa / pi + 1.0


def _arrays(params: ModelParams, data: CombinedCounts):
    if params.g != data.g:
        raise InvalidParameterError(
            f"params have {params.g} groups but data has {data.g}")
    return params.pis_array(), data.m_array(), data.n_array()


def log_likelihood(params: ModelParams, data: CombinedCounts) -> float:
    """Log-likelihood of the counts, excluding the combinatorial constant.

    Zero counts contribute nothing even when the matching probability is
    zero; a positive count against a zero probability yields -inf rather
    than an exception.
    """
    pis, m, n = _arrays(params, data)
    return float(_kernels.loglik_kernel(pis, params.kappa, params.kind.code, m, n))


def log_likelihood_constant(data: CombinedCounts) -> float:
    """The data-only additive constant (log multinomial/binomial coefficients).

    Adding this to :func:`log_likelihood` gives the absolute
    log-likelihood; it cancels in every statistic and in AIC differences.
    """
    from math import lgamma

    total = 0.0
    for gc in data.groups:
        total += lgamma(gc.m_plus + 1) - lgamma(gc.m0 + 1) - lgamma(gc.m1 + 1) - lgamma(gc.m2 + 1)
        total += lgamma(gc.n_plus + 1) - lgamma(gc.n0 + 1) - lgamma(gc.n1 + 1)
    return total


def score_vector(params: ModelParams, data: CombinedCounts) -> np.ndarray:
    """Analytic gradient of :func:`log_likelihood` in the order (pi_1..pi_g, kappa).

    Requires parameters strictly interior to the valid region.
    """
    pis, m, n = _arrays(params, data)
    kind = params.kind
    lo, hi = _kernels.kappa_bounds_kernel(pis, kind.code)
    if not (lo < params.kappa < hi):
        raise BoundaryError(
            f"score is undefined on the boundary: {kind.kappa_name}={params.kappa:.6g} "
            f"with interior ({lo:.6g}, {hi:.6g})")
    return np.asarray(_kernels.score_kernel(pis, params.kappa, kind.code, m, n))

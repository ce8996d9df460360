"""Maximum-likelihood fits and the expected information matrix.

Both fits run damped Fisher scoring on the valid parameter region: the
step is I^-1 times the score, halved until the log-likelihood does not
decrease, with iterates re-projected to an interior margin of 1e-10.
The restricted (common-proportion) problem is solved on the pooled
counts, which carries the identical likelihood value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .counts import CombinedCounts, ModelKind, ModelParams
from .errors import BoundaryError, NonConvergenceError

__all__ = ["FitResult", "fisher_information", "fit_unconstrained", "fit_constrained"]

GRAD_TOL = 1e-8
MAX_ITER = 200


@dataclass(frozen=True)
class FitResult:
    """Outcome of one maximum-likelihood fit."""

    params: ModelParams
    loglik: float
    converged: bool
    iterations: int
    gradient_norm: float
    at_boundary: bool = False


def fisher_information(params: ModelParams, m_plus: Sequence[float],
                       n_plus: Sequence[float]) -> np.ndarray:
    """Expected information for the design sizes (m_plus, n_plus) per group.

    The (g+1) x (g+1) matrix is ordered (pi_1, ..., pi_g, kappa); the
    cross-group pi entries are exactly zero because groups are
    independent.

    Raises
    ------
    BoundaryError
        If some joint probability vanishes under a positive bilateral
        weight, where the expectation is undefined.
    """
    m_plus = np.asarray(m_plus, dtype=np.float64)
    n_plus = np.asarray(n_plus, dtype=np.float64)
    if m_plus.shape != (params.g,) or n_plus.shape != (params.g,):
        raise ValueError(f"design sizes must both have length g={params.g}")
    info, ok = _kernels.info_kernel(params.pis_array(), params.kappa,
                                    params.kind.code, m_plus, n_plus)
    if not ok:
        raise BoundaryError(
            "expected information is undefined: a joint probability is zero "
            "under a positive bilateral design weight")
    return np.asarray(info)


def _result(kind: ModelKind, pis, kappa, ll, iters, grad, converged, boundary) -> FitResult:
    params = ModelParams(tuple(float(p) for p in np.atleast_1d(pis)), float(kappa), kind)
    return FitResult(params, float(ll), bool(converged), int(iters),
                     float(grad), bool(boundary))


def fit_unconstrained(data: CombinedCounts, kind: ModelKind | str, *,
                      tol: float = GRAD_TOL, max_iter: int = MAX_ITER) -> FitResult:
    """MLE of (pi_1, ..., pi_g, kappa) over the valid region.

    Interior optima satisfy ||score||_inf <= tol; optima pinned at the
    region boundary are reported converged with ``at_boundary`` set.

    Raises
    ------
    NonConvergenceError
        After ``max_iter`` iterations without meeting the projected
        gradient tolerance; carries the best iterate in ``best``.
    """
    kind = ModelKind.parse(kind)
    pis, kappa, ll, iters, grad, conv, bnd = _kernels.fit_kernel(
        data.m_array(), data.n_array(), kind.code, tol, max_iter)
    result = _result(kind, pis, kappa, ll, iters, grad, conv, bnd)
    if not conv:
        raise NonConvergenceError(
            f"unconstrained {kind.label} fit did not converge in {iters} iterations "
            f"(projected gradient norm {grad:.3g})", best=result)
    return result


def fit_constrained(data: CombinedCounts, kind: ModelKind | str, *,
                    tol: float = GRAD_TOL, max_iter: int = MAX_ITER) -> FitResult:
    """MLE under the restriction that every group shares one proportion.

    The returned params repeat the common proportion across all g slots.
    """
    kind = ModelKind.parse(kind)
    pi0, kappa, ll, iters, grad, conv, bnd = _kernels.fit_constrained_kernel(
        data.m_array(), data.n_array(), kind.code, tol, max_iter)
    result = _result(kind, np.full(data.g, pi0), kappa, ll, iters, grad, conv, bnd)
    if not conv:
        raise NonConvergenceError(
            f"constrained {kind.label} fit did not converge in {iters} iterations "
            f"(projected gradient norm {grad:.3g})", best=result)
    return result

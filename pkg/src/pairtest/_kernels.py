"""Hot numeric kernels.

Everything here operates on plain float64/int64 arrays so the same
source compiles under numba and runs unmodified as pure Python (see
:mod:`pairtest._accel`).  Count matrices use the layout

    m[i] = (m0, m1, m2)   bilateral subjects with 0/1/2 responses, group i
    n[i] = (n0, n1)       unilateral subjects with 0/1 responses, group i

and parameter vectors are ordered (pi_1, ..., pi_g, kappa).  Model codes:
0 selects the constant conditional-probability (Rosner-type) model where
kappa is the ratio R, 1 the shared-correlation (Donner-type) model where
kappa is the correlation rho.
"""

import math

import numpy as np

from ._accel import njit

ROSNER = 0
DONNER = 1

PI_MARGIN = 1e-10
KAPPA_MARGIN = 1e-10
MEAN_CLIP = 1e-8
ALPHA_CLIP = 1.0 - 1e-7


# ---------------------------------------------------------------------------
# joint probabilities and their derivatives
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def joint_probs_kernel(pi, kappa, kind):
    """(p0, p1, p2) for one group; valid parameters give a simplex point."""
    if kind == ROSNER:
        p2 = kappa * pi * pi
        p1 = 2.0 * pi * (1.0 - kappa * pi)
        p0 = 1.0 - 2.0 * pi + kappa * pi * pi
    else:
        q = 1.0 - pi
        p2 = pi * (pi + q * kappa)
        p1 = 2.0 * pi * q * (1.0 - kappa)
        p0 = q * (q + pi * kappa)
    return p0, p1, p2


@njit(cache=True, nogil=True)
def prob_grads_kernel(pi, kappa, kind):
    """Partials of (p0, p1, p2) with respect to pi and kappa."""
    if kind == ROSNER:
        d2p = 2.0 * kappa * pi
        d1p = 2.0 - 4.0 * kappa * pi
        d0p = -2.0 + 2.0 * kappa * pi
        d2k = pi * pi
        d1k = -2.0 * pi * pi
        d0k = pi * pi
    else:
        q = 1.0 - pi
        d2p = 2.0 * pi + (1.0 - 2.0 * pi) * kappa
        d1p = (2.0 - 4.0 * pi) * (1.0 - kappa)
        d0p = -2.0 * q + (1.0 - 2.0 * pi) * kappa
        d2k = pi * q
        d1k = -2.0 * pi * q
        d0k = pi * q
    return d0p, d1p, d2p, d0k, d1k, d2k


@njit(cache=True, nogil=True)
def kappa_bounds_kernel(pis, kind):
    """Intersection over groups of the kappa interval keeping all p_r >= 0."""
    g = pis.shape[0]
    if kind == ROSNER:
        lo = 0.0
        hi = np.inf
        for i in range(g):
            pi = pis[i]
            b = (2.0 * pi - 1.0) / (pi * pi)
            if b > lo:
                lo = b
            u = 1.0 / pi
            if u < hi:
                hi = u
    else:
        lo = -np.inf
        hi = 1.0
        for i in range(g):
            pi = pis[i]
            b1 = -pi / (1.0 - pi)
            b2 = -(1.0 - pi) / pi
            b = b1 if b1 > b2 else b2
            if b > lo:
                lo = b
    return lo, hi


@njit(cache=True, nogil=True)
def project_interior_kernel(pis, kappa, kind):
    """Clamp (pis, kappa) to the interior of the valid region (in place / returned)."""
    g = pis.shape[0]
    for i in range(g):
        if pis[i] < PI_MARGIN:
            pis[i] = PI_MARGIN
        elif pis[i] > 1.0 - PI_MARGIN:
            pis[i] = 1.0 - PI_MARGIN
    lo, hi = kappa_bounds_kernel(pis, kind)
    klo = lo + KAPPA_MARGIN
    khi = hi - KAPPA_MARGIN
    if klo > khi:  # cannot happen for pis in (0,1); kept as a safety net
        mid = 0.5 * (lo + hi)
        klo = mid
        khi = mid
    if kappa < klo:
        kappa = klo
    elif kappa > khi:
        kappa = khi
    return kappa


# ---------------------------------------------------------------------------
# likelihood, score, expected information
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def loglik_kernel(pis, kappa, kind, m, n):
    """Log-likelihood without the combinatorial constant; 0*log(0) := 0."""
    total = 0.0
    g = pis.shape[0]
    for i in range(g):
        p0, p1, p2 = joint_probs_kernel(pis[i], kappa, kind)
        if m[i, 0] > 0.0:
            if p0 <= 0.0:
                return -np.inf
            total += m[i, 0] * math.log(p0)
        if m[i, 1] > 0.0:
            if p1 <= 0.0:
                return -np.inf
            total += m[i, 1] * math.log(p1)
        if m[i, 2] > 0.0:
            if p2 <= 0.0:
                return -np.inf
            total += m[i, 2] * math.log(p2)
        pi = pis[i]
        if n[i, 0] > 0.0:
            if pi >= 1.0:
                return -np.inf
            total += n[i, 0] * math.log(1.0 - pi)
        if n[i, 1] > 0.0:
            if pi <= 0.0:
                return -np.inf
            total += n[i, 1] * math.log(pi)
    return total


@njit(cache=True, nogil=True)
def score_kernel(pis, kappa, kind, m, n):
    """Gradient of the log-likelihood in the order (pi_1..pi_g, kappa)."""
    g = pis.shape[0]
    u = np.zeros(g + 1)
    for i in range(g):
        pi = pis[i]
        p0, p1, p2 = joint_probs_kernel(pi, kappa, kind)
        d0p, d1p, d2p, d0k, d1k, d2k = prob_grads_kernel(pi, kappa, kind)
        upi = 0.0
        uk = 0.0
        if m[i, 0] > 0.0:
            upi += m[i, 0] * d0p / p0
            uk += m[i, 0] * d0k / p0
        if m[i, 1] > 0.0:
            upi += m[i, 1] * d1p / p1
            uk += m[i, 1] * d1k / p1
        if m[i, 2] > 0.0:
            upi += m[i, 2] * d2p / p2
            uk += m[i, 2] * d2k / p2
        upi += n[i, 1] / pi - n[i, 0] / (1.0 - pi)
        u[i] = upi
        u[g] += uk
    return u


@njit(cache=True, nogil=True)
def info_kernel(pis, kappa, kind, m_plus, n_plus):
    """Expected information for the given per-group design sizes.

    Returns (matrix, ok); ok is False when some p_r vanishes under a
    positive bilateral weight, where the expectation is undefined.
    """
    g = pis.shape[0]
    info = np.zeros((g + 1, g + 1))
    ok = True
    for i in range(g):
        pi = pis[i]
        app = 0.0
        apk = 0.0
        if m_plus[i] > 0.0:
            p0, p1, p2 = joint_probs_kernel(pi, kappa, kind)
            if p0 <= 0.0 or p1 <= 0.0 or p2 <= 0.0:
                ok = False
            else:
                d0p, d1p, d2p, d0k, d1k, d2k = prob_grads_kernel(pi, kappa, kind)
                app = m_plus[i] * (d0p * d0p / p0 + d1p * d1p / p1 + d2p * d2p / p2)
                apk = m_plus[i] * (d0p * d0k / p0 + d1p * d1k / p1 + d2p * d2k / p2)
                info[g, g] += m_plus[i] * (d0k * d0k / p0 + d1k * d1k / p1 + d2k * d2k / p2)
        if n_plus[i] > 0.0:
            app += n_plus[i] / (pi * (1.0 - pi))
        info[i, i] = app
        info[i, g] = apk
        info[g, i] = apk
    return info, ok


# ---------------------------------------------------------------------------
# small dense linear algebra (sizes <= g+1, so at most ~10)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def solve_kernel(a, b):
    """Solve a x = b by Gauss-Jordan with partial pivoting; (x, ok)."""
    size = a.shape[0]
    aug = np.empty((size, size + 1))
    scale = 0.0
    for i in range(size):
        for j in range(size):
            aug[i, j] = a[i, j]
            v = abs(a[i, j])
            if v > scale:
                scale = v
        aug[i, size] = b[i]
    if scale == 0.0:
        return np.zeros(size), False
    for col in range(size):
        piv = col
        pv = abs(aug[col, col])
        for r in range(col + 1, size):
            v = abs(aug[r, col])
            if v > pv:
                pv = v
                piv = r
        if pv <= 1e-13 * scale:
            return np.zeros(size), False
        if piv != col:
            for j in range(size + 1):
                tmp = aug[col, j]
                aug[col, j] = aug[piv, j]
                aug[piv, j] = tmp
        inv_p = 1.0 / aug[col, col]
        for r in range(size):
            if r == col:
                continue
            f = aug[r, col] * inv_p
            if f != 0.0:
                for j in range(col, size + 1):
                    aug[r, j] -= f * aug[col, j]
    x = np.empty(size)
    for i in range(size):
        x[i] = aug[i, size] / aug[i, i]
    return x, True


@njit(cache=True, nogil=True)
def inv_kernel(a):
    """Matrix inverse via Gauss-Jordan with partial pivoting; (inv, ok)."""
    size = a.shape[0]
    aug = np.empty((size, 2 * size))
    scale = 0.0
    for i in range(size):
        for j in range(size):
            aug[i, j] = a[i, j]
            aug[i, size + j] = 1.0 if i == j else 0.0
            v = abs(a[i, j])
            if v > scale:
                scale = v
    if scale == 0.0:
        return np.zeros((size, size)), False
    for col in range(size):
        piv = col
        pv = abs(aug[col, col])
        for r in range(col + 1, size):
            v = abs(aug[r, col])
            if v > pv:
                pv = v
                piv = r
        if pv <= 1e-13 * scale:
            return np.zeros((size, size)), False
        if piv != col:
            for j in range(2 * size):
                tmp = aug[col, j]
                aug[col, j] = aug[piv, j]
                aug[piv, j] = tmp
        inv_p = 1.0 / aug[col, col]
        for j in range(2 * size):
            aug[col, j] *= inv_p
        for r in range(size):
            if r == col:
                continue
            f = aug[r, col]
            if f != 0.0:
                for j in range(2 * size):
                    aug[r, j] -= f * aug[col, j]
    return aug[:, size:].copy(), True


# ---------------------------------------------------------------------------
# chi-square upper tail (regularized upper incomplete gamma, half-integer a)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def chi_sq_sf_kernel(x, df):
    """P(chi2_df > x) for integer df >= 1."""
    if x <= 0.0:
        return 1.0
    y = 0.5 * x
    logy = math.log(y)
    if df % 2 == 0:
        # Q(k, y) = exp(-y) * sum_{j<k} y^j / j!
        k = df // 2
        term_log = -y
        total = math.exp(term_log)
        for j in range(1, k):
            term_log += logy - math.log(j)
            total += math.exp(term_log)
    else:
        # Q(1/2, y) = erfc(sqrt(y)); then Q(a+1) = Q(a) + y^a e^-y / Gamma(a+1)
        total = math.erfc(math.sqrt(y))
        a = 0.5
        for _ in range(df // 2):
            total += math.exp(a * logy - y - math.lgamma(a + 1.0))
            a += 1.0
    if total > 1.0:
        total = 1.0
    return total


# ---------------------------------------------------------------------------
# maximum likelihood by damped Fisher scoring
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def init_kappa_kernel(pis, m, m_plus, kind):
    """Moment start for kappa: pooled within-pair correlation, model scale."""
    g = pis.shape[0]
    num = 0.0
    den = 0.0
    for i in range(g):
        if m_plus[i] > 0.0:
            num += m[i, 2] - m_plus[i] * pis[i] * pis[i]
            den += m_plus[i] * pis[i] * (1.0 - pis[i])
    rho = num / den if den > 0.0 else 0.0
    if rho < -0.9:
        rho = -0.9
    elif rho > 0.9:
        rho = 0.9
    if kind == ROSNER:
        pbar = 0.0
        for i in range(g):
            pbar += pis[i]
        pbar /= g
        kappa = (1.0 - pbar) * rho / pbar + 1.0
    else:
        kappa = rho
    lo, hi = kappa_bounds_kernel(pis, kind)
    pad = 1e-3 * (hi - lo)
    if kappa < lo + pad:
        kappa = lo + pad
    elif kappa > hi - pad:
        kappa = hi - pad
    return kappa


@njit(cache=True, nogil=True)
def active_kappa_bound_kernel(pis, kappa, u, kind):
    """Identify an active kappa clamp with outward score pressure.

    Returns (side, group, slope): side is +1 at the upper bound, -1 at
    the lower bound, 0 when inactive.  ``group`` is the index whose
    proportion sets the bound (-1 when the bound is constant) and
    ``slope`` is d(bound)/d(pi_group), the chain term coupling the
    clamped kappa to that proportion.
    """
    g = pis.shape[0]
    lo, hi = kappa_bounds_kernel(pis, kind)
    uk = u[g]
    if kappa >= hi - 2.0 * KAPPA_MARGIN and uk > 0.0:
        if kind == ROSNER:
            a = 0
            for i in range(1, g):
                if pis[i] > pis[a]:
                    a = i
            return 1, a, -1.0 / (pis[a] * pis[a])
        return 1, -1, 0.0  # constant upper bound (correlation = 1)
    if kappa <= lo + 2.0 * KAPPA_MARGIN and uk < 0.0:
        if kind == ROSNER:
            if lo <= 0.0:
                return -1, -1, 0.0  # constant lower bound at zero
            a = 0
            best = (2.0 * pis[0] - 1.0) / (pis[0] * pis[0])
            for i in range(1, g):
                b = (2.0 * pis[i] - 1.0) / (pis[i] * pis[i])
                if b > best:
                    best = b
                    a = i
            return -1, a, (2.0 - 2.0 * pis[a]) / (pis[a] ** 3)
        a = 0
        best = -np.inf
        for i in range(g):
            pi = pis[i]
            b1 = -pi / (1.0 - pi)
            b2 = -(1.0 - pi) / pi
            b = b1 if b1 > b2 else b2
            if b > best:
                best = b
                a = i
        pa = pis[a]
        slope = -1.0 / ((1.0 - pa) * (1.0 - pa)) if pa <= 0.5 else 1.0 / (pa * pa)
        return -1, a, slope
    return 0, -1, 0.0


@njit(cache=True, nogil=True)
def projected_grad_inf_kernel(pis, kappa, u, kind):
    """Sup-norm of the score projected onto the feasible directions.

    Outward components at plain clamps are dropped; when the kappa clamp
    is pi-dependent (its bound moves with one group's proportion) the
    clamped score is chained onto that proportion, which is the
    stationarity condition along the boundary curve.
    """
    g = pis.shape[0]
    side, a, slope = active_kappa_bound_kernel(pis, kappa, u, kind)
    gmax = 0.0
    for i in range(g):
        ui = u[i]
        if side != 0 and i == a:
            ui += u[g] * slope
        if pis[i] <= 2.0 * PI_MARGIN and ui < 0.0:
            ui = 0.0
        elif pis[i] >= 1.0 - 2.0 * PI_MARGIN and ui > 0.0:
            ui = 0.0
        if abs(ui) > gmax:
            gmax = abs(ui)
    if side == 0:
        if abs(u[g]) > gmax:
            gmax = abs(u[g])
    return gmax


@njit(cache=True, nogil=True)
def at_boundary_kernel(pis, kappa, kind):
    g = pis.shape[0]
    for i in range(g):
        if pis[i] <= 2.0 * PI_MARGIN or pis[i] >= 1.0 - 2.0 * PI_MARGIN:
            return True
    lo, hi = kappa_bounds_kernel(pis, kind)
    return kappa <= lo + 2.0 * KAPPA_MARGIN or kappa >= hi - 2.0 * KAPPA_MARGIN


@njit(cache=True, nogil=True)
def fit_kernel(m, n, kind, tol, max_iter):
    """Maximize the log-likelihood over the valid region.

    Damped Fisher scoring: step = I^-1 score, halved until the
    log-likelihood does not decrease, iterates re-projected to the
    interior.  Returns (pis, kappa, loglik, iterations, grad_inf,
    converged, at_boundary); convergence means the projected score
    sup-norm fell below tol.
    """
    g = m.shape[0]
    m_plus = np.empty(g)
    n_plus = np.empty(g)
    for i in range(g):
        m_plus[i] = m[i, 0] + m[i, 1] + m[i, 2]
        n_plus[i] = n[i, 0] + n[i, 1]

    pis = np.empty(g)
    for i in range(g):
        pis[i] = (m[i, 1] + 2.0 * m[i, 2] + n[i, 1] + 0.5) / (2.0 * m_plus[i] + n_plus[i] + 1.0)
    kappa = init_kappa_kernel(pis, m, m_plus, kind)
    kappa = project_interior_kernel(pis, kappa, kind)

    ll = loglik_kernel(pis, kappa, kind, m, n)
    cand = np.empty(g)
    it = 0
    for it in range(1, max_iter + 1):
        u = score_kernel(pis, kappa, kind, m, n)
        if projected_grad_inf_kernel(pis, kappa, u, kind) <= tol:
            break
        info, info_ok = info_kernel(pis, kappa, kind, m_plus, n_plus)
        side, act, slope = active_kappa_bound_kernel(pis, kappa, u, kind)
        on_curve = side != 0
        ok = False
        step = u
        if on_curve:
            # kappa is pinned at its bound: take the Fisher step in the
            # reduced parametrization where kappa follows the bound, so
            # the iterate slides along the boundary instead of crawling
            u_red = np.empty(g)
            for i in range(g):
                u_red[i] = u[i]
            if act >= 0:
                u_red[act] += u[g] * slope
            step_red = u_red
            if info_ok:
                info_red = np.empty((g, g))
                for i in range(g):
                    for j in range(g):
                        v = info[i, j]
                        if j == act:
                            v += slope * info[i, g]
                        if i == act:
                            v += slope * info[g, j]
                        if i == act and j == act:
                            v += slope * slope * info[g, g]
                        info_red[i, j] = v
                step_red, ok = solve_kernel(info_red, u_red)
            if not ok:
                s = 0.0
                for j in range(g):
                    if abs(u_red[j]) > s:
                        s = abs(u_red[j])
                step_red = np.empty(g)
                for j in range(g):
                    step_red[j] = u_red[j] / (s + 1.0)
            step = np.empty(g + 1)
            for j in range(g):
                step[j] = step_red[j]
            step[g] = 0.0
            ud = 0.0
            for j in range(g):
                ud += u_red[j] * step_red[j]
        else:
            if info_ok:
                step, ok = solve_kernel(info, u)
            if not ok:
                # singular or boundary information: normalized ascent direction
                s = 0.0
                for j in range(g + 1):
                    if abs(u[j]) > s:
                        s = abs(u[j])
                step = np.empty(g + 1)
                for j in range(g + 1):
                    step[j] = u[j] / (s + 1.0)
            ud = 0.0
            for j in range(g + 1):
                ud += u[j] * step[j]
        if ud < 0.0:
            ud = 0.0
        # Halve until the increase is a fixed fraction of the directional
        # derivative (plain non-decrease lets marginal overshoots through
        # and the iteration can oscillate without converging); the slack
        # keeps steps acceptable once improvements fall below fp
        # resolution of the total log-likelihood.
        slack = 1e-11 * (1.0 + abs(ll))
        t = 1.0
        accepted = False
        for _ in range(60):
            for i in range(g):
                cand[i] = pis[i] + t * step[i]
            if on_curve:
                # keep kappa glued to its (moving) bound
                for i in range(g):
                    if cand[i] < PI_MARGIN:
                        cand[i] = PI_MARGIN
                    elif cand[i] > 1.0 - PI_MARGIN:
                        cand[i] = 1.0 - PI_MARGIN
                blo, bhi = kappa_bounds_kernel(cand, kind)
                ck = bhi - KAPPA_MARGIN if side > 0 else blo + KAPPA_MARGIN
            else:
                ck = project_interior_kernel(cand, kappa + t * step[g], kind)
            cll = loglik_kernel(cand, ck, kind, m, n)
            if cll >= ll + 0.25 * t * ud - slack:
                for i in range(g):
                    pis[i] = cand[i]
                kappa = ck
                ll = cll
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break

    u = score_kernel(pis, kappa, kind, m, n)
    grad_inf = 0.0
    for j in range(g + 1):
        if abs(u[j]) > grad_inf:
            grad_inf = abs(u[j])
    converged = projected_grad_inf_kernel(pis, kappa, u, kind) <= tol
    boundary = at_boundary_kernel(pis, kappa, kind)
    return pis, kappa, ll, it, grad_inf, converged, boundary


@njit(cache=True, nogil=True)
def pool_counts_kernel(m, n):
    """Collapse all groups into one; exact for the common-pi restricted fit."""
    g = m.shape[0]
    mp = np.zeros((1, 3))
    np_ = np.zeros((1, 2))
    for i in range(g):
        mp[0, 0] += m[i, 0]
        mp[0, 1] += m[i, 1]
        mp[0, 2] += m[i, 2]
        np_[0, 0] += n[i, 0]
        np_[0, 1] += n[i, 1]
    return mp, np_


@njit(cache=True, nogil=True)
def fit_constrained_kernel(m, n, kind, tol, max_iter):
    """Restricted (common-pi) fit; the pooled data carry the same likelihood."""
    mp, np_ = pool_counts_kernel(m, n)
    pis, kappa, ll, it, grad, conv, bnd = fit_kernel(mp, np_, kind, tol, max_iter)
    return pis[0], kappa, ll, it, grad, conv, bnd


# ---------------------------------------------------------------------------
# test statistics
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def wald_stat_kernel(pis, kappa, kind, m_plus, n_plus):
    """Wald statistic for adjacent contrasts at the unrestricted estimate."""
    g = pis.shape[0]
    info, pok = info_kernel(pis, kappa, kind, m_plus, n_plus)
    if not pok:
        return np.nan
    iinv, ok = inv_kernel(info)
    if not ok:
        return np.nan
    d = np.empty(g - 1)
    v = np.empty((g - 1, g - 1))
    for i in range(g - 1):
        d[i] = pis[i] - pis[i + 1]
        for j in range(g - 1):
            v[i, j] = iinv[i, j] - iinv[i, j + 1] - iinv[i + 1, j] + iinv[i + 1, j + 1]
    x, ok = solve_kernel(v, d)
    if not ok:
        return np.nan
    s = 0.0
    for i in range(g - 1):
        s += d[i] * x[i]
    return s


@njit(cache=True, nogil=True)
def score_stat_kernel(pi0, kappa0, kind, m, n):
    """Score statistic U I^-1 U' at the restricted estimate (kappa slot zero)."""
    g = m.shape[0]
    pis = np.empty(g)
    m_plus = np.empty(g)
    n_plus = np.empty(g)
    for i in range(g):
        pis[i] = pi0
        m_plus[i] = m[i, 0] + m[i, 1] + m[i, 2]
        n_plus[i] = n[i, 0] + n[i, 1]
    u = score_kernel(pis, kappa0, kind, m, n)
    u[g] = 0.0
    info, pok = info_kernel(pis, kappa0, kind, m_plus, n_plus)
    if not pok:
        return np.nan
    x, ok = solve_kernel(info, u)
    if not ok:
        return np.nan
    s = 0.0
    for j in range(g + 1):
        s += u[j] * x[j]
    return s


# ---------------------------------------------------------------------------
# GEE on the stacked subject clusters (identity link, exchangeable pairs)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def gee_group_means_kernel(m, n, alpha):
    """Per-group solutions of the weighted estimating equations at fixed alpha."""
    g = m.shape[0]
    means = np.empty(g)
    degenerate = False
    w = 1.0 / (1.0 + alpha)
    for i in range(g):
        mp = m[i, 0] + m[i, 1] + m[i, 2]
        npl = n[i, 0] + n[i, 1]
        s2 = m[i, 1] + 2.0 * m[i, 2]
        mu = (s2 * w + n[i, 1]) / (2.0 * mp * w + npl)
        if mu < MEAN_CLIP:
            mu = MEAN_CLIP
            degenerate = True
        elif mu > 1.0 - MEAN_CLIP:
            mu = 1.0 - MEAN_CLIP
            degenerate = True
        means[i] = mu
    return means, degenerate


@njit(cache=True, nogil=True)
def gee_common_mean_kernel(m, n, alpha):
    """Pooled common-mean solution at fixed alpha."""
    g = m.shape[0]
    w = 1.0 / (1.0 + alpha)
    num = 0.0
    den = 0.0
    for i in range(g):
        mp = m[i, 0] + m[i, 1] + m[i, 2]
        num += (m[i, 1] + 2.0 * m[i, 2]) * w + n[i, 1]
        den += 2.0 * mp * w + (n[i, 0] + n[i, 1])
    mu = num / den
    degenerate = False
    if mu < MEAN_CLIP:
        mu = MEAN_CLIP
        degenerate = True
    elif mu > 1.0 - MEAN_CLIP:
        mu = 1.0 - MEAN_CLIP
        degenerate = True
    return mu, degenerate


@njit(cache=True, nogil=True)
def gee_alpha_phi_kernel(m, n, means, n_params):
    """Moment estimates of working correlation and scale.

    phi is the Pearson residual mean square over all organ records with
    an (N - p) divisor; alpha averages the size-2 cluster residual
    cross-products with a (K - p) divisor, scaled by phi.
    """
    g = m.shape[0]
    se2 = 0.0
    sx = 0.0
    n_obs = 0.0
    k2 = 0.0
    for i in range(g):
        mu = means[i]
        v = mu * (1.0 - mu)
        mu2 = mu * mu
        q2 = (1.0 - mu) * (1.0 - mu)
        mp = m[i, 0] + m[i, 1] + m[i, 2]
        npl = n[i, 0] + n[i, 1]
        se2 += (2.0 * m[i, 0] * mu2 + m[i, 1] * (mu2 + q2) + 2.0 * m[i, 2] * q2
                + n[i, 0] * mu2 + n[i, 1] * q2) / v
        sx += (m[i, 0] * mu2 - m[i, 1] * mu * (1.0 - mu) + m[i, 2] * q2) / v
        n_obs += 2.0 * mp + npl
        k2 += mp
    d_phi = n_obs - n_params
    if d_phi < 1.0:
        d_phi = 1.0
    phi = se2 / d_phi
    if k2 > 0.0 and phi > 0.0:
        d_a = k2 - n_params
        if d_a < 1.0:
            d_a = 1.0
        alpha = (sx / d_a) / phi
        if alpha > ALPHA_CLIP:
            alpha = ALPHA_CLIP
        elif alpha < -ALPHA_CLIP:
            alpha = -ALPHA_CLIP
    else:
        alpha = 0.0
    return alpha, phi


@njit(cache=True, nogil=True)
def gee_fit_kernel(m, n, constrain, alpha_fixed_flag, alpha_fixed, tol, max_iter):
    """Alternate mean solves and moment updates of (alpha, phi).

    Returns (means, alpha, phi, iterations, converged, degenerate);
    means holds the common value in every slot when constrain is set.
    """
    g = m.shape[0]
    n_params = 1.0 if constrain else float(g)
    alpha = alpha_fixed if alpha_fixed_flag else 0.0
    means = np.empty(g)
    degenerate = False
    if constrain:
        mu, degenerate = gee_common_mean_kernel(m, n, alpha)
        for i in range(g):
            means[i] = mu
    else:
        means, degenerate = gee_group_means_kernel(m, n, alpha)
    phi = 1.0
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        if alpha_fixed_flag:
            _, phi = gee_alpha_phi_kernel(m, n, means, n_params)
        else:
            alpha, phi = gee_alpha_phi_kernel(m, n, means, n_params)
        if constrain:
            mu, deg = gee_common_mean_kernel(m, n, alpha)
            delta = abs(mu - means[0])
            for i in range(g):
                means[i] = mu
        else:
            new_means, deg = gee_group_means_kernel(m, n, alpha)
            delta = 0.0
            for i in range(g):
                d = abs(new_means[i] - means[i])
                if d > delta:
                    delta = d
                means[i] = new_means[i]
        degenerate = degenerate or deg
        if delta < tol:
            converged = True
            break
    return means, alpha, phi, it, converged, degenerate


@njit(cache=True, nogil=True)
def gee_blocks_kernel(m, n, means, alpha):
    """Per-group estimating function S, bread diagonal H, meat diagonal M."""
    g = m.shape[0]
    s_vec = np.empty(g)
    h_vec = np.empty(g)
    meat = np.empty(g)
    w = 1.0 / (1.0 + alpha)
    for i in range(g):
        mu = means[i]
        v = mu * (1.0 - mu)
        mp = m[i, 0] + m[i, 1] + m[i, 2]
        npl = n[i, 0] + n[i, 1]
        s2 = m[i, 1] + 2.0 * m[i, 2]
        s_vec[i] = ((s2 - 2.0 * mp * mu) * w + (n[i, 1] - npl * mu)) / v
        h_vec[i] = (2.0 * mp * w + npl) / v
        a = v * (1.0 + alpha)
        bil = (m[i, 0] * (2.0 * mu) * (2.0 * mu)
               + m[i, 1] * (1.0 - 2.0 * mu) * (1.0 - 2.0 * mu)
               + m[i, 2] * (2.0 - 2.0 * mu) * (2.0 - 2.0 * mu))
        uni = n[i, 0] * mu * mu + n[i, 1] * (1.0 - mu) * (1.0 - mu)
        meat[i] = bil / (a * a) + uni / (v * v)
    return s_vec, h_vec, meat


@njit(cache=True, nogil=True)
def gee_score_stat_kernel(m, n, alpha_fixed_flag, alpha_fixed, tol, max_iter):
    """Generalized score statistic for equality of the group means.

    The working correlation is estimated on the unrestricted fit, the
    common mean is re-solved at that alpha, and the statistic contrasts
    the model-projected estimating function with its empirical sandwich
    covariance: T = (L B S)' [L B M B L']^-1 (L B S).
    """
    g = m.shape[0]
    _, alpha, phi, it, conv, degen = gee_fit_kernel(
        m, n, False, alpha_fixed_flag, alpha_fixed, tol, max_iter)
    if not conv:
        return np.nan
    mu0, _ = gee_common_mean_kernel(m, n, alpha)
    means0 = np.empty(g)
    for i in range(g):
        means0[i] = mu0
    s_vec, h_vec, meat = gee_blocks_kernel(m, n, means0, alpha)
    c = np.empty(g)
    d = np.empty(g)
    for i in range(g):
        c[i] = s_vec[i] / h_vec[i]
        d[i] = meat[i] / (h_vec[i] * h_vec[i])
    # adjacent contrasts L: row i is e_i - e_{i+1}
    rhs = np.empty(g - 1)
    cov = np.zeros((g - 1, g - 1))
    for i in range(g - 1):
        rhs[i] = c[i] - c[i + 1]
        cov[i, i] = d[i] + d[i + 1]
        if i + 1 < g - 1:
            cov[i, i + 1] = -d[i + 1]
            cov[i + 1, i] = -d[i + 1]
    x, ok = solve_kernel(cov, rhs)
    if not ok:
        return np.nan
    t = 0.0
    for i in range(g - 1):
        t += rhs[i] * x[i]
    return t


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _binom_inv_up(ntr, p, u):
    # CDF walk from k = 0; safe for p <= 0.5 and ntr up to a few thousand
    q = 1.0 - p
    f = q ** ntr
    c = f
    r = p / q
    k = 0
    while u > c and k < ntr:
        k += 1
        f *= r * (ntr - k + 1.0) / k
        c += f
    return k


@njit(cache=True, nogil=True)
def binom_inv_kernel(ntr, p, u):
    """Binomial draw by CDF inversion of a single uniform."""
    if ntr <= 0:
        return 0
    if p <= 0.0:
        return 0
    if p >= 1.0:
        return ntr
    if p > 0.5:
        return ntr - _binom_inv_up(ntr, 1.0 - p, 1.0 - u)
    return _binom_inv_up(ntr, p, u)


@njit(cache=True, nogil=True)
def sample_counts_kernel(u, pis, kappas, kind, m_plus, n_plus, m_out, n_out):
    """Draw one dataset from 3g uniforms (per group: u_m2, u_m1, u_n1).

    The trinomial is drawn as two sequential conditional binomials:
    m2 ~ Bin(m_plus, p2), then m1 ~ Bin(m_plus - m2, p1 / (p1 + p0)).
    """
    g = pis.shape[0]
    for i in range(g):
        p0, p1, p2 = joint_probs_kernel(pis[i], kappas[i], kind)
        mp = m_plus[i]
        m2 = binom_inv_kernel(mp, p2, u[3 * i])
        rest = mp - m2
        denom = p0 + p1
        cond = p1 / denom if denom > 0.0 else 0.0
        m1 = binom_inv_kernel(rest, cond, u[3 * i + 1])
        m_out[i, 0] = rest - m1
        m_out[i, 1] = m1
        m_out[i, 2] = m2
        n1 = binom_inv_kernel(n_plus[i], pis[i], u[3 * i + 2])
        n_out[i, 0] = n_plus[i] - n1
        n_out[i, 1] = n1


@njit(cache=True, nogil=True)
def sim_block_kernel(u, pis, kappas, kind, m_plus, n_plus,
                     do_lr, do_wald, do_score, do_gee, tol, max_iter, out):
    """Statistics for a block of replicates; NaN marks a failed fit.

    u has one row of 3g uniforms per replicate; out receives columns
    (LR, Wald, score, GEE score).
    """
    nrep = u.shape[0]
    g = pis.shape[0]
    m = np.empty((g, 3))
    n = np.empty((g, 2))
    m_plus_f = np.empty(g)
    n_plus_f = np.empty(g)
    for i in range(g):
        m_plus_f[i] = float(m_plus[i])
        n_plus_f[i] = float(n_plus[i])
    for b in range(nrep):
        sample_counts_kernel(u[b], pis, kappas, kind, m_plus, n_plus, m, n)
        lr = np.nan
        wa = np.nan
        sc = np.nan
        gs = np.nan
        need_con = do_lr or do_score
        need_unc = do_lr or do_wald
        conv0 = False
        conv1 = False
        pi0 = 0.0
        k0 = 0.0
        ll0 = 0.0
        ll1 = 0.0
        if need_con:
            pi0, k0, ll0, _, _, conv0, _ = fit_constrained_kernel(m, n, kind, tol, max_iter)
        if need_unc:
            pis1, k1, ll1, _, _, conv1, _ = fit_kernel(m, n, kind, tol, max_iter)
            if do_wald and conv1:
                wa = wald_stat_kernel(pis1, k1, kind, m_plus_f, n_plus_f)
        if do_lr and conv0 and conv1:
            stat = 2.0 * (ll1 - ll0)
            if stat >= 0.0:
                lr = stat
            elif stat > -1e-9:
                lr = 0.0
        if do_score and conv0:
            sc = score_stat_kernel(pi0, k0, kind, m, n)
            if sc < 0.0:
                sc = 0.0 if sc > -1e-9 else np.nan
        if do_gee:
            gs = gee_score_stat_kernel(m, n, False, 0.0, 1e-10, 100)
        out[b, 0] = lr
        out[b, 1] = wa
        out[b, 2] = sc
        out[b, 3] = gs

"""Independent reference implementations used by the tests.

Each oracle takes a different computational route from the package: exact
tail sums with bisection, extended-precision transcriptions, or scipy's
distribution objects in place of the raw special functions.
"""

import math

import mpmath
from scipy import stats

mpmath.mp.dps = 40


def _binom_tail_ge(x, n, p):
    p = mpmath.mpf(p)
    return mpmath.fsum(mpmath.binomial(n, k) * p**k * (1 - p) ** (n - k) for k in range(x, n + 1))


def _bisect(f, lo, hi, iters=200):
    # f increasing on [lo, hi]; returns the root
    lo, hi = mpmath.mpf(lo), mpmath.mpf(hi)
    for _ in range(iters):
        mid = (lo + hi) / 2
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


def clopper_pearson_oracle(x, n, alpha):
    a2 = mpmath.mpf(alpha) / 2
    lo = 0.0 if x == 0 else _bisect(lambda p: _binom_tail_ge(x, n, p) - a2, 0, 1)
    # P(X <= x) decreasing in p, so bisect its negation
    hi = 1.0 if x == n else _bisect(lambda p: a2 - (1 - _binom_tail_ge(x + 1, n, p)), 0, 1)
    return lo, hi


def lang_reiczigel_oracle(x, n, c_n, m_n, c_p, m_p, alpha, form="source"):
    mp = mpmath.mpf
    z = -mpmath.sqrt(2) * mpmath.erfinv(mp(alpha) - 1)  # upper alpha/2 normal quantile
    z2 = z * z
    mp2, mn2 = mp(m_p) + 2, mp(m_n) + 2
    sens = (mp(c_p) + 1) / mp2
    spec = (mp(m_n - c_n) + 1) / mn2
    app = (mp(x) + z2 / 2) / (mp(n) + z2)
    denom = sens + spec - 1
    b = (app + spec - 1) / denom
    d = 2 * z2 * (b * sens * (1 - sens) / mp2 - (1 - b) * spec * (1 - spec) / mn2)
    if form == "source":
        v = app * (1 - app) / (n + z2) + b**2 * sens * (1 - sens) / mp2 + (1 - b) ** 2 * spec * (1 - spec) / mn2
    else:
        coef = (1 + b) ** 2 if form == "literal" else (1 - b) ** 2
        v = b * (1 - b) / n + b**2 * sens * (1 - sens) / m_p + coef * spec * (1 - spec) / m_n
    v = max(v / denom**2, mp(0))
    half = z * mpmath.sqrt(v)
    clip = lambda t: float(min(max(t, mp(0)), mp(1)))
    return clip(b + d - half), clip(b + d + half)


def _kg_effective(w, n, x):
    pbar = sum(wi * xi / ni for wi, ni, xi in zip(w, n, x))
    D = sum(wi * wi / ni * (xi / ni) for wi, ni, xi in zip(w, n, x))
    n_eff = sum(n) if D == 0 else pbar * (1 - pbar) / D
    return n_eff, n_eff * pbar


def dpac_oracle(w, n, x, alpha):
    z = stats.norm.isf(alpha / 2)
    n_eff, x_eff = _kg_effective(w, n, x)
    nt = n_eff + z * z
    pt = (x_eff + z * z / 2) / nt
    h = z * math.sqrt(pt * (1 - pt) / nt)
    return max(pt - h, 0.0), min(pt + h, 1.0)


def kg_oracle(w, n, x, alpha):
    n_eff, x_eff = _kg_effective(w, n, x)
    lo = 0.0 if x_eff == 0 else stats.beta(x_eff, n_eff - x_eff + 1).ppf(alpha / 2)
    hi = stats.beta(x_eff + 1, n_eff - x_eff).ppf(1 - alpha / 2)
    return lo, hi


def ws_poisson_oracle(w, n, x, alpha):
    y = sum(wi / ni * xi for wi, ni, xi in zip(w, n, x))
    v = sum((wi / ni) ** 2 * xi for wi, ni, xi in zip(w, n, x))
    wm = max(wi / ni for wi, ni in zip(w, n))
    lo = 0.0 if y == 0 else stats.gamma(y * y / v, scale=v / y).ppf(alpha / 2)
    ys, vs = y + wm, v + wm * wm
    hi = stats.gamma(ys * ys / vs, scale=vs / ys).ppf(1 - alpha / 2)
    return lo, min(hi, 1.0)

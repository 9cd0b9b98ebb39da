"""Two- and three-parameter Weibull estimators.

The density is ``f(x) = (a/b) ((x-m)/b)^(a-1) exp(-((x-m)/b)^a)`` for ``x > m``
with shape ``a``, scale ``b`` and location ``m`` (``m = 0`` for the
two-parameter family).

Method codes
------------
Two-parameter: ``greg1 greg2 lm ml mlm moment pm rank reg ustat wml wreg``.
Three-parameter: ``mle mm1 mm2 mm3 mml1 mml2 mml3 mml4 mps tlm wml``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, special

from . import gof
from .distributions import ParameterError
from .errors import ConvergenceError, EstimationError

__all__ = [
    "THREE_PARAM_METHODS",
    "TWO_PARAM_METHODS",
    "WeibullFit",
    "fit_weibull",
    "mps_objective",
    "weibull_loglik",
    "weibull_ml_weighted",
]

TWO_PARAM_METHODS = (
    "greg1", "greg2", "lm", "ml", "mlm", "moment", "pm", "rank", "reg", "ustat", "wml", "wreg",
)
THREE_PARAM_METHODS = (
    "mle", "mm1", "mm2", "mm3", "mml1", "mml2", "mml3", "mml4", "mps", "tlm", "wml",
)

EULER_GAMMA = float(np.euler_gamma)
MAX_ITER = 2000


@dataclass
class WeibullFit:
    alpha: float
    beta: float
    mu: float
    method: str
    location: bool
    measures: gof.GofBlock
    converged: bool = True
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def estimate(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.mu)

    def to_dict(self) -> dict:
        return {
            "estimate": {"alpha": self.alpha, "beta": self.beta, "mu": self.mu},
            "measures": self.measures.to_dict(),
            "method": self.method,
            "location": self.location,
            "converged": self.converged,
            "iterations": self.iterations,
        }


# ---------------------------------------------------------------------------
# likelihood pieces

def weibull_loglik(x, alpha, beta, mu=0.0) -> float:
    x = np.asarray(x, dtype=float)
    t = x - mu
    if alpha <= 0 or beta <= 0 or np.any(t <= 0):
        return -math.inf
    z = t / beta
    n = x.size
    return float(n * math.log(alpha / beta) + (alpha - 1.0) * np.sum(np.log(z)) - np.sum(z**alpha))


def _loglik_grad(x, alpha, beta, mu):
    """Gradient of the log-likelihood in (alpha, beta, mu)."""
    t = x - mu
    z = t / beta
    lz = np.log(z)
    za = z**alpha
    n = x.size
    g_a = n / alpha + np.sum(lz) - np.sum(za * lz)
    g_b = (alpha / beta) * (np.sum(za) - n)
    g_m = -(alpha - 1.0) * np.sum(1.0 / t) + (alpha / beta) * np.sum(za / z)
    return np.array([g_a, g_b, g_m])


def weibull_ml_weighted(x, w=None, shape_weight: float = 1.0) -> tuple[float, float]:
    """Weighted two-parameter ML estimate ``(alpha, beta)``.

    Solves the profile equation for the shape,

        sum w x^a ln x / sum w x^a - shape_weight / a - mean_w(ln x) = 0,

    which has a unique root because its left side increases in ``a``.
    ``shape_weight`` below one deflates the shape score (used by ``wml``).
    """
    x = np.asarray(x, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    keep = w > 0
    x, w = x[keep], w[keep]
    if np.any(x <= 0):
        raise ParameterError("two-parameter Weibull fit needs strictly positive data")
    y = np.log(x)
    W = w.sum()
    ybar = np.sum(w * y) / W
    yc = y - y.max()
    if np.ptp(y) < 1e-12:
        raise EstimationError("all observations are equal; the Weibull shape is unbounded")

    def h(a):
        e = w * np.exp(a * yc)
        return np.sum(e * y) / np.sum(e) - shape_weight / a - ybar

    lo, hi = 1e-3, 1.0
    while h(lo) > 0:
        lo /= 10.0
    while h(hi) < 0:
        hi *= 2.0
        if hi > 1e8:
            raise EstimationError("Weibull shape profile equation has no finite root")
    a = optimize.brentq(h, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500)
    log_b = (special.logsumexp(a * y, b=w) - math.log(W)) / a
    return float(a), float(math.exp(log_b))


# ---------------------------------------------------------------------------
# helpers

def _g(k, a):
    return special.gamma(1.0 + k / a)


def _shape_scan(fn, lo=0.02, hi=200.0, num=400):
    """Roots of ``fn`` on a log grid of shapes, refined with brentq."""
    grid = np.exp(np.linspace(math.log(lo), math.log(hi), num))
    with np.errstate(all="ignore"):
        vals = np.array([fn(a) for a in grid])
    roots = []
    for i in range(num - 1):
        v0, v1 = vals[i], vals[i + 1]
        if not (np.isfinite(v0) and np.isfinite(v1)):
            continue
        if v0 == 0.0:
            roots.append(grid[i])
        elif v0 * v1 < 0:
            roots.append(optimize.brentq(fn, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-14))
    return roots


def _plotting_positions(n):
    i = np.arange(1, n + 1)
    return (i - 0.375) / (n + 0.25)


def _tridiag_bridge_apply(s, v):
    """Apply the precision matrix of a Brownian bridge observed at ``s``."""
    gaps = np.diff(np.concatenate(([0.0], s, [1.0])))
    inv = 1.0 / gaps
    out = (inv[:-1] + inv[1:]) * v
    out[:-1] -= inv[1:-1] * v[1:]
    out[1:] -= inv[1:-1] * v[:-1]
    return out


def _gls(y, X, s, d):
    """GLS with covariance ``D C D``, C the bridge covariance at ``s``."""
    Xt = X / d[:, None]
    yt = y / d
    QX = np.column_stack([_tridiag_bridge_apply(s, Xt[:, j]) for j in range(X.shape[1])])
    A = Xt.T @ QX
    b = QX.T @ yt
    return np.linalg.solve(A, b)


def _sample_tl_moments(xs, t=1, rmax=3):
    n = xs.size
    i = np.arange(1, n + 1)
    out = []
    for r in range(1, rmax + 1):
        coef = np.zeros(n)
        for k in range(r):
            coef += (
                (-1) ** k
                * special.comb(r - 1, k)
                * special.comb(i - 1, r + t - 1 - k)
                * special.comb(n - i, t + k)
            )
        out.append(float(np.sum(coef * xs) / (r * special.comb(n, r + 2 * t))))
    return out


def _weibull_order_mean(j, m, a):
    """E[X_(j:m)] for the standard Weibull with shape ``a``."""
    pref = math.factorial(m) / (math.factorial(j - 1) * math.factorial(m - j))
    s = sum(
        (-1) ** k * math.comb(j - 1, k) * (m - j + k + 1) ** (-1.0 - 1.0 / a)
        for k in range(j)
    )
    return pref * s * _g(1, a)


def _weibull_tl_moments(a, t=1):
    e = lambda j, m: _weibull_order_mean(j, m, a)  # noqa: E731
    l1 = e(1 + t, 1 + 2 * t)
    l2 = 0.5 * (e(2 + t, 2 + 2 * t) - e(1 + t, 2 + 2 * t))
    l3 = (e(3 + t, 3 + 2 * t) - 2 * e(2 + t, 3 + 2 * t) + e(1 + t, 3 + 2 * t)) / 3.0
    return l1, l2, l3


def mps_objective(xs, alpha, beta, mu) -> float:
    """Mean log spacing of the fitted CDF at the sorted sample ``xs``.

    Zero spacings from tied observations are replaced by the log density at
    the tied value.
    """
    if alpha <= 0 or beta <= 0 or xs[0] <= mu:
        return -math.inf
    z = (xs - mu) / beta
    za = z**alpha
    # F(x_{i+1}) - F(x_i) = S(x_i) (1 - exp(-(za_{i+1} - za_i))), kept in
    # log form so spacings far in the upper tail do not underflow to zero.
    logD = np.empty(xs.size + 1)
    with np.errstate(divide="ignore"):
        logD[0] = np.log(-np.expm1(-za[0]))
        logD[1:-1] = -za[:-1] + np.log(-np.expm1(-np.diff(za)))
    logD[-1] = -za[-1]
    tied = np.diff(xs) <= 0
    if np.any(tied):
        k = np.nonzero(tied)[0] + 1
        zt = z[k - 1]
        logD[k] = math.log(alpha / beta) + (alpha - 1) * np.log(zt) - zt**alpha
    return float(np.mean(logD))


# ---------------------------------------------------------------------------
# two-parameter estimators

def _two_param(x, method):
    xs = np.sort(x)
    n = xs.size
    if np.any(xs <= 0):
        raise ParameterError("two-parameter Weibull methods need strictly positive data")
    ly = np.log(xs)
    if method == "ml":
        return weibull_ml_weighted(xs)
    if method == "wml":
        return weibull_ml_weighted(xs, shape_weight=(n - 2.0) / n)
    if method == "moment":
        cv2 = np.var(xs, ddof=1) / np.mean(xs) ** 2
        roots = _shape_scan(lambda a: _g(2, a) / _g(1, a) ** 2 - 1.0 - cv2)
        if not roots:
            raise EstimationError("moment equation has no root")
        a = roots[0]
        return a, float(np.mean(xs) / _g(1, a))
    if method == "mlm":
        a = math.pi / (math.sqrt(6.0) * np.std(ly, ddof=1))
        return a, float(math.exp(np.mean(ly) + EULER_GAMMA / a))
    if method == "lm":
        b0 = np.mean(xs)
        b1 = np.sum(np.arange(n) / (n - 1.0) * xs) / n
        l1, l2 = b0, 2 * b1 - b0
        a = -math.log(2.0) / math.log(1.0 - l2 / l1)
        return a, float(l1 / _g(1, a))
    if method == "pm":
        p1, p2 = 0.25, 0.75
        q1, q2 = np.quantile(xs, [p1, p2], method="weibull")
        a = math.log(math.log1p(-p2) / math.log1p(-p1)) / math.log(q2 / q1)
        return a, float(q1 / (-math.log1p(-p1)) ** (1.0 / a))
    if method == "ustat":
        i = np.arange(1, n + 1)
        gmd = 2.0 * np.sum((2 * i - n - 1) * ly) / (n * (n - 1.0))
        a = 2.0 * math.log(2.0) / gmd
        return a, float(math.exp(np.mean(ly) + EULER_GAMMA / a))

    F = _plotting_positions(n)
    Y = np.log(-np.log1p(-F))
    if method in ("reg", "wreg"):
        w = np.ones(n) if method == "reg" else ((1 - F) * np.log1p(-F)) ** 2
        X = np.column_stack([np.ones(n), ly])
        c0, c1 = np.linalg.solve(X.T @ (w[:, None] * X), X.T @ (w * Y))
        return float(c1), float(math.exp(-c0 / c1))
    if method in ("greg1", "greg2"):
        # Delta-method covariance of Y at the plotting positions.
        # ln x_(i) = ln b + Y_i / a + e_i; greg1 uses the full covariance of e,
        # greg2 only its diagonal.
        d = 1.0 / ((1.0 - F) * (-np.log1p(-F)))
        X = np.column_stack([np.ones(n), Y])
        if method == "greg1":
            c0, c1 = _gls(ly, X, F, d)
        else:
            w = 1.0 / (d * d * F * (1.0 - F))
            c0, c1 = np.linalg.solve(X.T @ (w[:, None] * X), X.T @ (w * ly))
        return float(1.0 / c1), float(math.exp(c0))
    if method == "rank":
        return _ppcc(xs, -np.log1p(-F))
    raise ParameterError(f"unknown two-parameter Weibull method {method!r}")


def _ppcc(xs, e):
    """Shape maximizing the correlation of order statistics with quantiles."""
    le = np.log(e)

    def neg_corr(la):
        q = np.exp(le / math.exp(la))
        return -np.corrcoef(xs, q)[0, 1]

    grid = np.linspace(math.log(0.05), math.log(100.0), 200)
    vals = [neg_corr(g) for g in grid]
    j = int(np.argmin(vals))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(neg_corr, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    a = math.exp(res.x)
    q = e ** (1.0 / a)
    return a, float(np.sum(xs * q) / np.sum(q * q))


# ---------------------------------------------------------------------------
# three-parameter estimators

def _default_starts(xs):
    x1 = xs[0]
    mu0 = 0.9 * x1 if x1 > 0 else x1 - 0.1 * max(np.ptp(xs), 1.0)
    a0, b0 = weibull_ml_weighted(xs - mu0)
    return a0, b0, mu0


def _to_u(xs, start):
    a, b, mu = start
    if a <= 0 or b <= 0:
        raise ParameterError("starts: shape and scale must be positive")
    if mu >= xs[0]:
        raise ParameterError("starts: location must lie below the sample minimum")
    return np.array([math.log(a), math.log(b), math.log(xs[0] - mu)])


def _from_u(xs, u):
    return math.exp(u[0]), math.exp(u[1]), xs[0] - math.exp(u[2])


def _mle3(xs, start, shape_weight=1.0):
    n = xs.size

    def f(u):
        a, b, mu = _from_u(xs, u)
        ll = weibull_loglik(xs, a, b, mu) + (shape_weight - 1.0) * n * math.log(a)
        if not math.isfinite(ll):
            return 1e300, np.zeros(3)
        g = _loglik_grad(xs, a, b, mu)
        g[0] += (shape_weight - 1.0) * n / a
        gu = np.array([a * g[0], b * g[1], -(xs[0] - mu) * g[2]])
        return -ll, -gu

    u0 = _to_u(xs, start)
    res = optimize.minimize(f, u0, jac=True, method="BFGS",
                            options={"maxiter": MAX_ITER, "gtol": 1e-9})
    a, b, mu = _from_u(xs, res.x)
    if a < 1.0 and (xs[0] - mu) < 1e-10 * max(np.ptp(xs), 1.0):
        raise EstimationError("likelihood unbounded: location converged onto the sample minimum")
    g = _loglik_grad(xs, a, b, mu)
    ok = bool(np.all(np.abs(g * np.array([a, b, xs[0] - mu])) < 1e-5 * n))
    if not ok and res.nit >= MAX_ITER:
        raise ConvergenceError("three-parameter ML did not converge", last=(a, b, mu),
                               iterations=res.nit)
    return (a, b, mu), ok, int(res.nit)


def _mps3(xs, start):
    u = _to_u(xs, start)

    def f(v):
        val = mps_objective(xs, *_from_u(xs, v))
        return -val if math.isfinite(val) else 1e300

    best = f(u)
    total = 0
    converged = False
    for _ in range(20):
        res = optimize.minimize(f, u, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": MAX_ITER})
        total += res.nit
        improvement = best - res.fun
        u, best = res.x, res.fun
        if improvement <= 1e-10 * max(1.0, abs(best)) and res.success:
            converged = True
            break
    if not converged:
        raise ConvergenceError("maximum product of spacings did not converge",
                               last=_from_u(xs, u), iterations=total)
    return _from_u(xs, u), True, total


def _moment3(xs, method):
    n = xs.size
    m = float(np.mean(xs))
    s = float(np.std(xs, ddof=1))
    x1 = xs[0]
    if method == "mm1":
        lhs = (m - x1) / s
        rhs = lambda a: _g(1, a) * (1 - n ** (-1.0 / a))  # noqa: E731
    elif method == "mm2":
        lhs = (m - x1) / s
        c = math.log((n + 1.0) / n)
        rhs = lambda a: _g(1, a) - c ** (1.0 / a)  # noqa: E731
    else:
        lhs = (m - float(np.median(xs))) / s
        rhs = lambda a: _g(1, a) - math.log(2.0) ** (1.0 / a)  # noqa: E731
    fn = lambda a: rhs(a) / math.sqrt(_g(2, a) - _g(1, a) ** 2) - lhs  # noqa: E731
    roots = _shape_scan(fn)
    if not roots:
        raise EstimationError(f"{method}: modified moment equation has no root")
    # The moment ratios are not monotone in the shape, so several roots can
    # appear; keep those with a feasible location and take the likeliest.
    cands = []
    for a in roots:
        b = s / math.sqrt(_g(2, a) - _g(1, a) ** 2)
        mu = m - b * _g(1, a)
        if mu < x1:
            cands.append((weibull_loglik(xs, a, b, mu), (a, b, mu)))
    if not cands:
        a = roots[0]
        b = s / math.sqrt(_g(2, a) - _g(1, a) ** 2)
        return a, b, m - b * _g(1, a)
    return max(cands)[1]


def _mml3(xs, method):
    """Two ML equations plus one order-statistic or moment equation.

    For each trial location the ML equations give (shape, scale) in closed
    profile form; the extra equation is then solved for the location.
    """
    n = xs.size
    x1 = xs[0]
    m = float(np.mean(xs))
    s2 = float(np.var(xs, ddof=1))
    c2 = math.log((n + 1.0) / n)
    rng_ = max(np.ptp(xs), 1e-12)

    def extra(mu):
        a, b = weibull_ml_weighted(xs - mu)
        if method == "mml1":
            return mu + b * _g(1, a) * n ** (-1.0 / a) - x1
        if method == "mml2":
            return mu + b * c2 ** (1.0 / a) - x1
        if method == "mml3":
            return mu + b * _g(1, a) - m
        return b * b * (_g(2, a) - _g(1, a) ** 2) - s2

    offsets = rng_ * np.logspace(-6, 2, 240)
    mus = x1 - offsets
    with np.errstate(all="ignore"):
        vals = []
        for mu in mus:
            try:
                vals.append(extra(mu))
            except (EstimationError, FloatingPointError, ValueError):
                vals.append(np.nan)
    vals = np.asarray(vals)
    cands = []
    for i in range(len(mus) - 1):
        if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] < 0:
            mu = optimize.brentq(extra, mus[i + 1], mus[i], xtol=1e-13 * rng_, rtol=1e-14)
            a, b = weibull_ml_weighted(xs - mu)
            cands.append((weibull_loglik(xs, a, b, mu), (a, b, mu)))
    if not cands:
        raise EstimationError(f"{method}: no location satisfies the modified ML equations")
    return max(cands)[1]


def _tlm3(xs):
    l1, l2, l3 = _sample_tl_moments(xs)
    t3 = l3 / l2

    def fn(a):
        p1, p2, p3 = _weibull_tl_moments(a)
        return p3 / p2 - t3

    roots = _shape_scan(fn, lo=0.05, hi=100.0)
    if not roots:
        raise EstimationError("tlm: TL-skewness outside the Weibull range")
    a = roots[0]
    p1, p2, _ = _weibull_tl_moments(a)
    b = l2 / p2
    return a, b, l1 - b * p1


# ---------------------------------------------------------------------------

def _check_data(x, location):
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise ParameterError("data must be a non-empty vector of finite values")
    if np.unique(x).size < 5:
        raise ParameterError("need at least 5 distinct observations")
    if not location and np.any(x <= 0):
        raise ParameterError("two-parameter Weibull data must be strictly positive")
    return x


def fit_weibull(data, location: bool = False, method: str = "ml",
                starts: Optional[tuple] = None) -> WeibullFit:
    """Fit a two- (``location=False``) or three-parameter Weibull distribution.

    Parameters
    ----------
    data : array_like
        Observations.
    location : bool
        Estimate a location parameter as well.
    method : str
        Estimation method code (see the module docstring).
    starts : sequence of 3 floats, optional
        ``(alpha, beta, mu)`` starting values for the iterative
        three-parameter methods; defaulted when omitted.

    Returns
    -------
    WeibullFit
    """
    x = _check_data(data, location)
    method = method.lower()
    xs = np.sort(x)
    n = xs.size
    converged, iters = True, 0
    if not location:
        if method not in TWO_PARAM_METHODS:
            raise ParameterError(
                f"method {method!r} is not a two-parameter method; choose from {TWO_PARAM_METHODS}"
            )
        a, b = _two_param(xs, method)
        mu = 0.0
        k = 2
    else:
        if method not in THREE_PARAM_METHODS:
            raise ParameterError(
                f"method {method!r} is not a three-parameter method; "
                f"choose from {THREE_PARAM_METHODS}"
            )
        k = 3
        if method in ("mle", "mps", "wml"):
            st = tuple(float(v) for v in starts) if starts is not None else _default_starts(xs)
            if len(st) != 3:
                raise ParameterError("starts must hold (alpha, beta, mu)")
            if method == "mps":
                (a, b, mu), converged, iters = _mps3(xs, st)
            else:
                sw = 1.0 if method == "mle" else (n - 3.0) / n
                (a, b, mu), converged, iters = _mle3(xs, st, shape_weight=sw)
        elif method.startswith("mml"):
            a, b, mu = _mml3(xs, method)
        elif method.startswith("mm"):
            a, b, mu = _moment3(xs, method)
        else:
            a, b, mu = _tlm3(xs)
        if not mu < xs[0]:
            raise EstimationError(
                f"{method}: estimated location {mu:.6g} is not below the sample minimum"
            )
    if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
        raise EstimationError(f"{method}: produced invalid estimate ({a}, {b}, {mu})")
    measures = _weibull_measures(xs, a, b, mu, k)
    return WeibullFit(float(a), float(b), float(mu), method, location, measures,
                      converged=converged, iterations=iters)


def _weibull_measures(xs, a, b, mu, k):
    ll = weibull_loglik(xs, a, b, mu)
    block = gof.GofBlock(log_likelihood=ll)
    n = xs.size
    if n > k + 1:
        block.aic, block.caic, block.bic, block.hqic = gof.information_criteria(ll, k, n)
    e = gof.edf_statistics_cdf(xs, lambda t: stats_cdf(t, a, b, mu))
    block.ad, block.cvm, block.ks = e.ad, e.cvm, e.ks
    if e.clamped:
        block.diagnostics["cdf_clamped"] = True
    return block


def stats_cdf(t, a, b, mu):
    z = np.clip((np.asarray(t, dtype=float) - mu) / b, 0.0, None)
    return -np.expm1(-(z**a))


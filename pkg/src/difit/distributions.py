"""Density, distribution, quantile and sampling functions for the diameter families.

Every family is parameterized the way forestry software usually writes it:

==================  =============================  ==========================
tag                 parameters                     notes
==================  =============================  ==========================
birnbaum-saunders   alpha, beta[, mu]              shape, scale, location
burrxii             alpha, beta                    both shapes
chen                alpha, beta
f                   alpha, beta                    degrees of freedom
frechet             alpha, beta                    shape, scale
gamma               alpha, beta[, mu]              shape, *scale*, location
ge                  alpha, beta[, mu]              shape, rate, location
gompertz            alpha, beta
jsb                 delta, gamma, lambda, xi       Johnson's SB
log-logistic        alpha, beta                    shape, scale
log-normal          alpha, beta                    meanlog, sdlog
lomax               alpha, beta                    rate-like, shape
skew-normal         alpha, beta, lambda            location, scale, slant
weibull             alpha, beta[, mu]              shape, scale, location
==================  =============================  ==========================

All functions are vectorized over ``x`` (or ``p``) and return numpy arrays, or
floats for scalar input.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "FAMILIES",
    "Family",
    "ParameterError",
    "cdf",
    "get_family",
    "logpdf",
    "pdf",
    "quantile",
    "sample",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ParameterError(ValueError):
    """Raised for parameter vectors outside a family's domain."""


def _norm_logpdf(z):
    return -0.5 * z * z - _LOG_SQRT_2PI


def _scalar_out(x, value):
    if np.ndim(x) == 0:
        return float(np.asarray(value).reshape(-1)[0])
    return value


class Family:
    """Base class of a univariate family.

    Subclasses fill in the vectorized formulas.  ``logpdf``, ``cdf`` and
    ``ppf`` receive a 1-d float array and an already validated parameter
    tuple and never see points outside the support.
    """

    name = ""
    param_names: tuple[str, ...] = ()
    positive: tuple[str, ...] = ()
    # Families accepting an optional trailing location parameter ``mu``.
    has_location = False
    closed_lower = False

    def normalize(self, params) -> tuple[float, ...]:
        vals = tuple(float(v) for v in np.atleast_1d(np.asarray(params, dtype=float)))
        n = len(self.param_names)
        if self.has_location and len(vals) == n:
            vals = vals + (0.0,)
        names = self.names
        if len(vals) != len(names):
            raise ParameterError(
                f"{self.name}: expected {len(names)} parameters {names}, got {len(vals)}"
            )
        for name, v in zip(names, vals):
            if not math.isfinite(v):
                raise ParameterError(f"{self.name}: parameter {name} must be finite, got {v}")
            if name in self.positive and v <= 0.0:
                raise ParameterError(f"{self.name}: parameter {name} must be > 0, got {v}")
        return vals

    @property
    def names(self) -> tuple[str, ...]:
        return self.param_names + (("mu",) if self.has_location else ())

    def support(self, p) -> tuple[float, float]:
        lo = p[-1] if self.has_location else 0.0
        return lo, math.inf

    def inside(self, x, p):
        lo, hi = self.support(p)
        left = x >= lo if self.closed_lower else x > lo
        return left & (x < hi)

    # subclasses -------------------------------------------------------
    def _logpdf(self, x, p):
        raise NotImplementedError

    def _cdf(self, x, p):
        return _quad_cdf(self, x, p)

    def _ppf(self, q, p):
        return _root_ppf(self, q, p)

    def _rvs(self, n, p, rng):
        return self._ppf(rng.uniform(size=n), p)


def _quad_cdf(fam, x, p):
    lo, _ = fam.support(p)
    out = np.empty_like(x)
    for i, xi in enumerate(x):
        val, _ = integrate.quad(
            lambda t: math.exp(fam._logpdf(np.array([t]), p)[0]),
            lo,
            xi,
            epsabs=1e-10,
            epsrel=1e-10,
            limit=200,
        )
        out[i] = min(max(val, 0.0), 1.0)
    return out


def _root_ppf(fam, q, p):
    lo, hi = fam.support(p)
    out = np.empty_like(q)
    for i, qi in enumerate(q):
        out[i] = _invert_cdf(lambda t: fam._cdf(np.array([t]), p)[0], qi, lo, hi)
    return out


def _invert_cdf(cdf_fn, q, lo=-math.inf, hi=math.inf, start=None, maxiter=200):
    """Bracket expansion followed by Brent's bisection/secant hybrid."""
    if start is None:
        if math.isfinite(lo) and math.isfinite(hi):
            start = 0.5 * (lo + hi)
        elif math.isfinite(lo):
            start = lo + 1.0
        elif math.isfinite(hi):
            start = hi - 1.0
        else:
            start = 0.0
    a = b = start
    step = 1.0
    # Expand to the left until cdf(a) <= q.
    while cdf_fn(a) > q:
        nxt = a - step
        if math.isfinite(lo) and nxt <= lo:
            nxt = 0.5 * (a + lo)
        a = nxt
        step *= 2.0
        if step > 1e300:
            raise ArithmeticError("failed to bracket quantile")
    step = 1.0
    while cdf_fn(b) < q:
        nxt = b + step
        if math.isfinite(hi) and nxt >= hi:
            nxt = 0.5 * (b + hi)
        b = nxt
        step *= 2.0
        if step > 1e300:
            raise ArithmeticError("failed to bracket quantile")
    if a == b:
        return a
    return optimize.brentq(
        lambda t: cdf_fn(t) - q, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=maxiter
    )


class BirnbaumSaunders(Family):
    name = "birnbaum-saunders"
    param_names = ("alpha", "beta")
    positive = ("alpha", "beta")
    has_location = True

    def _logpdf(self, x, p):
        a, b, mu = p
        t = x - mu
        r1 = np.sqrt(t / b)
        r2 = np.sqrt(b / t)
        z = (r1 - r2) / a
        return np.log(r1 + r2) - np.log(2.0 * a * t) + _norm_logpdf(z)

    def _cdf(self, x, p):
        a, b, mu = p
        t = x - mu
        return special.ndtr((np.sqrt(t / b) - np.sqrt(b / t)) / a)

    def _ppf(self, q, p):
        a, b, mu = p
        z = a * special.ndtri(q)
        return mu + b * (0.5 * (z + np.sqrt(z * z + 4.0))) ** 2

    def _rvs(self, n, p, rng):
        a, b, mu = p
        z = a * rng.standard_normal(n)
        return mu + b * (0.5 * (z + np.sqrt(z * z + 4.0))) ** 2


class BurrXII(Family):
    name = "burrxii"
    param_names = ("alpha", "beta")
    positive = ("alpha", "beta")
    closed_lower = True

    def _logpdf(self, x, p):
        a, b = p
        return math.log(a * b) + special.xlogy(a - 1.0, x) - (b + 1.0) * np.log1p(x**a)

    def _cdf(self, x, p):
        a, b = p
        return -np.expm1(-b * np.log1p(x**a))

    def _ppf(self, q, p):
        a, b = p
        return np.expm1(-np.log1p(-q) / b) ** (1.0 / a)


class Chen(Family):
    name = "chen"
    param_names = ("alpha", "beta")
    positive = ("alpha", "beta")
    closed_lower = True

    def _logpdf(self, x, p):
        a, b = p
        xa = x**a
        with np.errstate(over="ignore"):
            return math.log(a * b) + special.xlogy(a - 1.0, x) + xa - b * np.expm1(xa)

    def _cdf(self, x, p):
        a, b = p
        with np.errstate(over="ignore"):
            return -np.expm1(-b * np.expm1(x**a))

    def _ppf(self, q, p):
        a, b = p
        return np.log1p(-np.log1p(-q) / b) ** (1.0 / a)


class Fisher(Family):
    name = "f"
    param_names = ("alpha", "beta")
    positive = ("alpha", "beta")
    closed_lower = True

    def _logpdf(self, x, p):
        a, b = p
        c = (
            special.gammaln(0.5 * (a + b))
            - special.gammaln(0.5 * a)
            - special.gammaln(0.5 * b)
            + 0.5 * a * math.log(a / b)
        )
        return c + special.xlogy(0.5 * a - 1.0, x) - 0.5 * (a + b) * np.log1p(a * x / b)

    def _cdf(self, x, p):
        a, b = p
        return special.betainc(0.5 * a, 0.5 * b, a * x / (a * x + b))

    def _ppf(self, q, p):
        a, b = p
        u = special.betaincinv(0.5 * a, 0.5 * b, q)
        return b * u / (a * (1.0 - u))


class Frechet(Family):
    name = "frechet"
    param_names = ("alpha", "beta")
    positive = ("alpha", "beta")

    def _logpdf(self, x, p):
        a, b = p
        lz = np.log(x / b)
        return math.log(a / b) - (a + 1.0) * lz - np.exp(-a * lz)

    def _cdf(self, x, p):
        a, b = p
        return np.exp(-((x / b) ** -a))

    def _ppf(self, q, p):
        a, b = p
        return b * (-np.log(q)) ** (-1.0 / a)


class Gamma(Family):
    name = "gamma"
    param_names = ("alpha", "beta")
    positive = ("alpha", "beta")
    has_location = True
    closed_lower = True

    def _logpdf(self, x, p):
        a, b, mu = p
        t = x - mu
        return special.xlogy(a - 1.0, t) - t / b - a * math.log(b) - special.gammaln(a)

    def _cdf(self, x, p):
        a, b, mu = p
        return special.gammainc(a, (x - mu) / b)

    def _ppf(self, q, p):
        a, b, mu = p
        return mu + b * special.gammaincinv(a, q)

    def _rvs(self, n, p, rng):
        a, b, mu = p
        return mu + rng.gamma(a, b, size=n)


class GE(Family):
    name = "ge"
    param_names = ("alpha", "beta")
    positive = ("alpha", "beta")
    has_location = True
    closed_lower = True

    def _logpdf(self, x, p):
        a, b, mu = p
        t = x - mu
        with np.errstate(divide="ignore"):
            return math.log(a * b) - b * t + special.xlogy(a - 1.0, -np.expm1(-b * t))

    def _cdf(self, x, p):
        a, b, mu = p
        return (-np.expm1(-b * (x - mu))) ** a

    def _ppf(self, q, p):
        a, b, mu = p
        return mu - np.log1p(-(q ** (1.0 / a))) / b


class Gompertz(Family):
    name = "gompertz"
    param_names = ("alpha", "beta")
    positive = ("alpha", "beta")
    closed_lower = True

    def _logpdf(self, x, p):
        a, b = p
        with np.errstate(over="ignore"):
            return math.log(b) + a * x - b * np.expm1(a * x) / a

    def _cdf(self, x, p):
        a, b = p
        with np.errstate(over="ignore"):
            return -np.expm1(-b * np.expm1(a * x) / a)

    def _ppf(self, q, p):
        a, b = p
        return np.log1p(-a * np.log1p(-q) / b) / a


class JohnsonSB(Family):
    name = "jsb"
    param_names = ("delta", "gamma", "lambda", "xi")
    positive = ("delta", "lambda")

    def support(self, p):
        _, _, lam, xi = p
        return xi, xi + lam

    def _logpdf(self, x, p):
        d, g, lam, xi = p
        u = x - xi
        v = lam + xi - x
        z = g + d * np.log(u / v)
        return math.log(d * lam) - _LOG_SQRT_2PI - np.log(u) - np.log(v) - 0.5 * z * z

    def _cdf(self, x, p):
        d, g, lam, xi = p
        return special.ndtr(g + d * np.log((x - xi) / (lam + xi - x)))

    def _ppf(self, q, p):
        d, g, lam, xi = p
        z = (special.ndtri(q) - g) / d
        return xi + lam * special.expit(z)

    def _rvs(self, n, p, rng):
        d, g, lam, xi = p
        z = (rng.standard_normal(n) - g) / d
        return xi + lam * special.expit(z)


class LogLogistic(Family):
    name = "log-logistic"
    param_names = ("alpha", "beta")
    positive = ("alpha", "beta")
    closed_lower = True

    def _logpdf(self, x, p):
        a, b = p
        r = x / b
        return math.log(a / b) + special.xlogy(a - 1.0, r) - 2.0 * np.log1p(r**a)

    def _cdf(self, x, p):
        a, b = p
        with np.errstate(divide="ignore"):
            return special.expit(a * np.log(x / b))

    def _ppf(self, q, p):
        a, b = p
        return b * (q / (1.0 - q)) ** (1.0 / a)


class LogNormal(Family):
    name = "log-normal"
    param_names = ("alpha", "beta")
    positive = ("beta",)

    def _logpdf(self, x, p):
        a, b = p
        lx = np.log(x)
        return _norm_logpdf((lx - a) / b) - math.log(b) - lx

    def _cdf(self, x, p):
        a, b = p
        return special.ndtr((np.log(x) - a) / b)

    def _ppf(self, q, p):
        a, b = p
        return np.exp(a + b * special.ndtri(q))

    def _rvs(self, n, p, rng):
        a, b = p
        return np.exp(a + b * rng.standard_normal(n))


class Lomax(Family):
    name = "lomax"
    param_names = ("alpha", "beta")
    positive = ("alpha", "beta")
    closed_lower = True

    def _logpdf(self, x, p):
        a, b = p
        return math.log(a * b) - (b + 1.0) * np.log1p(a * x)

    def _cdf(self, x, p):
        a, b = p
        return -np.expm1(-b * np.log1p(a * x))

    def _ppf(self, q, p):
        a, b = p
        return np.expm1(-np.log1p(-q) / b) / a


class SkewNormal(Family):
    name = "skew-normal"
    param_names = ("alpha", "beta", "lambda")
    positive = ("beta",)

    def support(self, p):
        return -math.inf, math.inf

    def inside(self, x, p):
        return np.isfinite(x)

    def _logpdf(self, x, p):
        a, b, lam = p
        z = (x - a) / b
        return math.log(2.0 / b) + _norm_logpdf(z) + special.log_ndtr(lam * z)

    def _cdf(self, x, p):
        a, b, lam = p
        z = (x - a) / b
        return np.clip(special.ndtr(z) - 2.0 * special.owens_t(z, lam), 0.0, 1.0)

    def _ppf(self, q, p):
        a, b, lam = p
        out = np.empty_like(q)
        for i, qi in enumerate(q):
            # Start from the normal quantile of the matching mean/sd.
            d = lam / math.sqrt(1.0 + lam * lam)
            mean = d * math.sqrt(2.0 / math.pi)
            sd = math.sqrt(1.0 - mean * mean)
            z0 = mean + sd * float(special.ndtri(qi))
            z = _invert_cdf(lambda t: self._cdf(np.array([a + b * t]), p)[0], qi, start=z0)
            out[i] = a + b * z
        return out

    def _rvs(self, n, p, rng):
        a, b, lam = p
        d = lam / math.sqrt(1.0 + lam * lam)
        u0 = rng.standard_normal(n)
        v = rng.standard_normal(n)
        return a + b * (d * np.abs(u0) + math.sqrt(1.0 - d * d) * v)


class Weibull(Family):
    name = "weibull"
    param_names = ("alpha", "beta")
    positive = ("alpha", "beta")
    has_location = True
    closed_lower = True

    def _logpdf(self, x, p):
        a, b, mu = p
        r = (x - mu) / b
        return math.log(a / b) + special.xlogy(a - 1.0, r) - r**a

    def _cdf(self, x, p):
        a, b, mu = p
        return -np.expm1(-(((x - mu) / b) ** a))

    def _ppf(self, q, p):
        a, b, mu = p
        return mu + b * (-np.log1p(-q)) ** (1.0 / a)


FAMILIES: dict[str, Family] = {
    f.name: f
    for f in (
        BirnbaumSaunders(),
        BurrXII(),
        Chen(),
        Fisher(),
        Frechet(),
        Gamma(),
        GE(),
        Gompertz(),
        JohnsonSB(),
        LogLogistic(),
        LogNormal(),
        Lomax(),
        SkewNormal(),
        Weibull(),
    )
}

_ALIASES = {"bs": "birnbaum-saunders", "fisher": "f", "lognormal": "log-normal",
            "loglogistic": "log-logistic", "skewnormal": "skew-normal", "johnson-sb": "jsb"}


def get_family(name: str | Family) -> Family:
    if isinstance(name, Family):
        return name
    key = name.lower()
    key = _ALIASES.get(key, key)
    try:
        return FAMILIES[key]
    except KeyError:
        raise ParameterError(
            f"unknown family {name!r}; choose from {sorted(FAMILIES)}"
        ) from None


def logpdf(family, params, x):
    """Log density; ``-inf`` outside the support."""
    fam = get_family(family)
    p = fam.normalize(params)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.full(xa.shape, -np.inf)
    m = fam.inside(xa, p)
    if m.any():
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out[m] = fam._logpdf(xa[m], p)
    out[np.isnan(out)] = -np.inf
    return _scalar_out(x, out)


def pdf(family, params, x):
    """Density of ``family`` with parameter vector ``params`` at ``x``.

    Points outside the support evaluate to 0.

    >>> pdf("weibull", (1, 2, 0), 0.0)
    0.5
    """
    return _scalar_out(x, np.exp(np.atleast_1d(logpdf(family, params, x))))


def cdf(family, params, x):
    """Cumulative distribution function."""
    fam = get_family(family)
    p = fam.normalize(params)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = fam.support(p)
    out = np.where(xa >= hi, 1.0, 0.0).astype(float)
    m = (xa > lo) & (xa < hi)
    if m.any():
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out[m] = fam._cdf(xa[m], p)
    return _scalar_out(x, np.clip(out, 0.0, 1.0))


def quantile(family, params, q):
    """Inverse of :func:`cdf` for ``0 < q < 1``."""
    fam = get_family(family)
    p = fam.normalize(params)
    qa = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any((qa <= 0.0) | (qa >= 1.0) | ~np.isfinite(qa)):
        raise ParameterError("quantile: probabilities must lie strictly inside (0, 1)")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = fam._ppf(qa, p)
    return _scalar_out(q, out)


def sample(family, params, n: int, rng=None):
    """Draw ``n`` i.i.d. variates.

    ``rng`` is a :class:`numpy.random.Generator`, an integer seed, or None.
    """
    fam = get_family(family)
    p = fam.normalize(params)
    n = int(n)
    if n < 1:
        raise ParameterError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(rng)
    with np.errstate(divide="ignore", over="ignore"):
        return np.asarray(fam._rvs(n, p, rng), dtype=float)

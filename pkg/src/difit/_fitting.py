"""Weighted maximum likelihood on unconstrained coordinates.

Shared by the EM M-steps of the grouped and mixture fitters.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize, special

from . import distributions as dist
from .weibull import weibull_ml_weighted

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class Transform:
    """Map a family's parameters to R^k and back.

    Positive parameters go through ``log``; an optional location is written
    as ``upper - exp(s)`` so it always stays below ``upper``.
    """

    def __init__(self, family, location_upper=None):
        self.fam = dist.get_family(family)
        self.location_upper = location_upper
        self.pos = [name in self.fam.positive for name in self.fam.param_names]

    def to_u(self, params):
        p = list(params)
        u = [math.log(v) if pos else v for v, pos in zip(p, self.pos)]
        if self.location_upper is not None:
            gap = self.location_upper - p[len(self.pos)]
            u.append(math.log(gap) if gap > 0 else math.log(1e-8))
        return np.array(u, dtype=float)

    def from_u(self, u):
        k = len(self.pos)
        with np.errstate(over="ignore"):
            vals = [math.exp(min(v, 700.0)) if pos else float(v) for v, pos in zip(u[:k], self.pos)]
        if self.location_upper is not None:
            vals.append(self.location_upper - math.exp(min(u[k], 700.0)))
        return tuple(vals)


def weighted_nll(fam, params, x, w):
    try:
        p = fam.normalize(params)
    except dist.ParameterError:
        return math.inf
    lp = dist.logpdf(fam, p, x)
    if np.any(~np.isfinite(lp[w > 0])):
        return math.inf
    return float(-np.sum(w * lp))


def weighted_mle(family, x, w, start, location_upper=None, method="BFGS", maxiter=500, gtol=1e-9):
    """Maximize ``sum(w * logpdf(x))`` starting from ``start``.

    Closed forms are used where they exist (two-parameter log-normal and
    Weibull without location); otherwise a quasi-Newton search runs on the
    unconstrained coordinates and the result is only accepted when it does
    not lower the objective.
    """
    fam = dist.get_family(family)
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if location_upper is None:
        if fam.name == "log-normal":
            W = w.sum()
            lx = np.log(x)
            a = np.sum(w * lx) / W
            b = math.sqrt(max(np.sum(w * (lx - a) ** 2) / W, 1e-300))
            return (float(a), float(b))
        if fam.name == "weibull":
            return weibull_ml_weighted(x, w)
        if fam.name == "gamma":
            return _gamma_weighted(x, w)
    tr = Transform(fam, location_upper)
    nbase = len(fam.param_names)

    def f(u):
        return weighted_nll(fam, tr.from_u(u), x, w)

    jac = "3-point"
    if fam.name == "skew-normal" and location_upper is None:
        def f(u):
            return _skew_normal_nll_grad(u, x, w)

        jac = True
    elif fam.name == "birnbaum-saunders":
        def f(u):
            return _bs_nll_grad(u, x, w, location_upper)

        jac = True

    start = tuple(float(v) for v in start)
    if location_upper is None:
        start = start[:nbase]
    u0 = tr.to_u(start)
    scalar = (lambda u: f(u)[0]) if jac is True else f
    f0 = scalar(u0)
    with np.errstate(all="ignore"):
        if method.lower() == "nelder-mead":
            res = optimize.minimize(scalar, u0, method="Nelder-Mead",
                                    options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": maxiter * 5})
        else:
            res = optimize.minimize(f, u0, method="BFGS", jac=jac,
                                    options={"gtol": gtol, "maxiter": maxiter})
            if not np.isfinite(res.fun):
                res = optimize.minimize(scalar, u0, method="Nelder-Mead",
                                        options={"xatol": 1e-10, "fatol": 1e-12})
    if fam.name == "skew-normal" and jac is True and abs(res.x[2]) < 0.1:
        # lambda = 0 is a stationary point of the skew-normal likelihood;
        # a search crossing it can stop there.  Retry from the mirror side.
        a, logb, lam = u0
        flipped = np.array([a, logb, -lam if abs(lam) > 0.5 else (1.0 if lam <= 0 else -1.0)])
        with np.errstate(all="ignore"):
            alt = optimize.minimize(f, flipped, method="BFGS", jac=jac,
                                    options={"gtol": gtol, "maxiter": maxiter})
        if np.isfinite(alt.fun) and alt.fun < res.fun:
            res = alt
    if res.fun <= f0:
        return tr.from_u(res.x)
    return tr.from_u(u0)


def _skew_normal_nll_grad(u, x, w):
    """Weighted skew-normal NLL and its gradient in ``(alpha, log beta, lambda)``."""
    a, logb, lam = u
    if not (np.isfinite(u).all() and logb < 700):
        return math.inf, np.zeros(3)
    b = math.exp(logb)
    with np.errstate(all="ignore"):
        z = (x - a) / b
        lc = special.log_ndtr(lam * z)
        nll = -float(np.sum(w * (math.log(2.0) - logb - 0.5 * z * z - _HALF_LOG_2PI + lc)))
        if not math.isfinite(nll):
            return math.inf, np.zeros(3)
        # phi(lam z) / Phi(lam z), stable in the left tail.
        r = np.exp(-0.5 * (lam * z) ** 2 - _HALF_LOG_2PI - lc)
        g = np.array([
            np.sum(w * (z - lam * r)) / b,
            np.sum(w * (-1.0 + z * z - lam * z * r)),
            np.sum(w * z * r),
        ])
    return nll, -g


def _bs_nll_grad(u, x, w, upper=None):
    """Weighted Birnbaum-Saunders NLL and gradient in ``(log alpha, log beta[, log(upper - mu)])``."""
    if not (np.isfinite(u).all() and np.all(np.asarray(u) < 700)):
        return math.inf, np.zeros(len(u))
    a, b = math.exp(u[0]), math.exp(u[1])
    mu = 0.0 if upper is None else upper - math.exp(u[2])
    t = x - mu
    if np.any(t[w > 0] <= 0):
        return math.inf, np.zeros(len(u))
    with np.errstate(all="ignore"):
        q = t / b + b / t - 2.0
        lp = (-math.log(2.0) - _HALF_LOG_2PI - u[0] - 0.5 * u[1] - 0.5 * np.log(t)
              + np.log1p(b / t) - q / (2.0 * a * a))
        nll = -float(np.sum(w * lp))
        if not math.isfinite(nll):
            return math.inf, np.zeros(len(u))
        ga = np.sum(w * (-1.0 / a + q / a**3))
        gb = np.sum(w * (-0.5 / b + 1.0 / (t + b) + (t / b**2 - 1.0 / t) / (2.0 * a * a)))
        g = [a * ga, b * gb]
        if upper is not None:
            gt = w * (-0.5 / t - b / (t * (t + b)) - (1.0 / b - b / t**2) / (2.0 * a * a))
            # d mu / d u2 = -(upper - mu) and d t / d mu = -1.
            g.append(float(np.sum(gt)) * (upper - mu))
    return nll, -np.array(g)


def _gamma_weighted(x, w):
    W = w.sum()
    m = np.sum(w * x) / W
    s = math.log(m) - np.sum(w * np.log(x)) / W
    if s <= 0:
        s = 1e-12
    # Minka's starting point, then Newton on log(a) - digamma(a) = s.
    a = (3 - s + math.sqrt((s - 3) ** 2 + 24 * s)) / (12 * s)
    for _ in range(100):
        g = math.log(a) - special.digamma(a) - s
        h = 1.0 / a - special.polygamma(1, a)
        step = g / h
        a_new = a - step
        if a_new <= 0:
            a_new = a / 2
        if abs(a_new - a) < 1e-14 * a:
            a = a_new
            break
        a = a_new
    return float(a), float(m / a)

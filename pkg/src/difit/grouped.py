"""Fitting three-parameter BS, GE and Weibull models to class-frequency data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, special

from . import distributions as dist
from . import gof
from ._fitting import Transform, weighted_mle
from .errors import ConvergenceError, EstimationError, ParameterError

__all__ = [
    "GROUPED_FAMILIES",
    "GroupedFit",
    "GroupedSample",
    "OPTIMIZERS",
    "fit_grouped",
    "group",
    "grouped_loglik",
    "multinomial_constant",
]

GROUPED_FAMILIES = ("weibull", "birnbaum-saunders", "ge")
OPTIMIZERS = ("nelder-mead", "bfgs", "cg", "l-bfgs-b", "sann")
EM_TOL = 1e-8
EM_MAX_ITER = 5000
N_NODES = 32
_P_FLOOR = 1e-300
_WALL = 1e6

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(N_NODES)


@dataclass
class GroupedSample:
    """Class boundaries ``r[0] < ... < r[m]`` and frequencies ``f[0..m-1]``."""

    r: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float).ravel()
        self.f = np.asarray(self.f, dtype=float).ravel()
        if self.r.size < 2 or self.r.size != self.f.size + 1:
            raise ParameterError(
                f"need len(r) == len(f) + 1 >= 2 (got {self.r.size} boundaries, {self.f.size} frequencies)"
            )
        if np.any(np.diff(self.r) <= 0):
            raise ParameterError("class boundaries must be strictly increasing")
        if np.any(self.f < 0) or np.any(self.f != np.round(self.f)):
            raise ParameterError("frequencies must be non-negative integers")
        if self.f.sum() <= 0:
            raise ParameterError("total frequency must be positive")

    @property
    def m(self) -> int:
        return int(self.f.size)

    @property
    def n(self) -> int:
        return int(self.f.sum())

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.r[:-1] + self.r[1:])


def group(data, m: int, include_lowest: bool = True) -> GroupedSample:
    """Bin ``data`` into ``m`` equal-width classes spanning its range.

    Class ``i`` is the half-open interval ``(r[i-1], r[i]]``.  With
    ``include_lowest`` the sample minimum is counted in the first class;
    without it, points equal to ``r[0]`` are dropped, as R's ``cut()`` does
    by default.
    """
    x = np.asarray(data, dtype=float).ravel()
    if x.size == 0:
        raise ParameterError("cannot group an empty sample")
    if m < 2:
        raise ParameterError("need at least 2 classes")
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        raise ParameterError("all observations are equal; class range is degenerate")
    r = lo + np.arange(m + 1) * ((hi - lo) / m)
    r[-1] = hi
    idx = np.searchsorted(r, x, side="left")
    if include_lowest:
        idx[x == lo] = 1
    f = np.bincount(idx, minlength=m + 1)[1 : m + 1]
    return GroupedSample(r, f)


def class_probabilities(family, params, r) -> np.ndarray:
    F = dist.cdf(family, params, np.asarray(r, dtype=float))
    return np.diff(F)


def multinomial_constant(f) -> float:
    f = np.asarray(f, dtype=float)
    return float(special.gammaln(f.sum() + 1) - np.sum(special.gammaln(f + 1)))


def grouped_loglik(grp: GroupedSample, family, params, constant: bool = True) -> float:
    """Multinomial log-likelihood ``sum f_i log P_i`` of the class frequencies.

    ``P_i = F(r_i) - F(r_{i-1})``.  With ``constant`` the multinomial
    coefficient ``log n! - sum log f_i!`` is added, making the value the log
    probability of the observed frequency table.
    """
    P = class_probabilities(family, params, grp.r)
    pos = grp.f > 0
    with np.errstate(divide="ignore"):
        ll = float(np.sum(grp.f[pos] * np.log(P[pos])))
    if not math.isfinite(ll):
        return -math.inf
    return ll + (multinomial_constant(grp.f) if constant else 0.0)


@dataclass
class GroupedFit:
    family: str
    estimate: tuple
    method: str
    measures: gof.GofBlock
    converged: bool = True
    iterations: int = 0
    loglik_trace: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        names = dist.get_family(self.family).names
        return {
            "family": self.family,
            "method": self.method,
            "estimate": dict(zip(names, self.estimate)),
            "measures": self.measures.to_dict(),
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _class_nodes(r):
    lo, hi = r[:-1], r[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    w = half[:, None] * _GL_WEIGHTS[None, :]
    return x, w


def _family_guess(family, t, w):
    """Rough positive-support parameters for shifted midpoints ``t``."""
    W = w.sum()
    mean = np.sum(w * t) / W
    var = max(np.sum(w * (t - mean) ** 2) / W, 1e-12 * mean * mean)
    if family == "weibull":
        return weibull_start(t, w)
    if family == "birnbaum-saunders":
        cv2 = var / mean**2
        # var/mean^2 = a^2 (1 + 5a^2/4) / (1 + a^2/2)^2, solved for a.
        a = optimize.brentq(lambda a: a * a * (1 + 1.25 * a * a) / (1 + 0.5 * a * a) ** 2 - cv2,
                            1e-6, 1e3) if cv2 < 4.99 else 2.0
        return a, mean / (1 + 0.5 * a * a)
    # GE: shape 1 is exponential with rate 1/mean.
    return 1.0, 1.0 / mean


def weibull_start(t, w):
    from .weibull import weibull_ml_weighted

    return weibull_ml_weighted(t, w)


def _default_start(grp, family):
    width = grp.r[1] - grp.r[0]
    mu0 = grp.r[0] - 0.5 * width
    t = grp.midpoints - mu0
    a, b = _family_guess(family, t, grp.f)
    return (a, b, mu0)


def _check_family(family):
    fam = dist.get_family(family)
    if fam.name not in GROUPED_FAMILIES:
        raise ParameterError(f"grouped fitting supports {GROUPED_FAMILIES}, not {family!r}")
    return fam


def _check_start(grp, fam, starts):
    st = tuple(float(v) for v in starts)
    if len(st) != 3:
        raise ParameterError("starts must hold (alpha, beta, mu)")
    fam.normalize(st)
    if st[2] >= grp.r[0]:
        raise ParameterError("starts: location must lie below the first class boundary")
    return st


def _fit_ml(grp, fam, start, optimizer):
    tr = Transform(fam, location_upper=grp.r[0])
    pos = grp.f > 0
    rel = grp.f[pos] / grp.n

    def nll(u):
        # Per-observation scale, with empty-class probabilities floored so
        # line searches see a finite, steep wall instead of a plateau.
        try:
            P = class_probabilities(fam, tr.from_u(u), grp.r)[pos]
        except ParameterError:
            return _WALL
        val = -float(np.sum(rel * np.log(np.maximum(P, _P_FLOOR))))
        return val if math.isfinite(val) else _WALL

    u0 = tr.to_u(start)
    opt = optimizer.lower()
    if opt == "nelder-mead":
        res = optimize.minimize(nll, u0, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        # Restart once from the optimum; simplex searches can stall.
        res = optimize.minimize(nll, res.x, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    elif opt in ("bfgs", "cg", "l-bfgs-b"):
        method = {"bfgs": "BFGS", "cg": "CG", "l-bfgs-b": "L-BFGS-B"}[opt]
        res = optimize.minimize(nll, u0, method=method, jac="3-point",
                                options={"maxiter": 4000, "gtol": 1e-8})
    elif opt == "sann":
        bounds = [(v - 4.0, v + 4.0) for v in u0]
        res = optimize.dual_annealing(nll, bounds, x0=u0, seed=0, maxiter=500)
        res = optimize.minimize(nll, res.x, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    else:
        raise ParameterError(f"unknown optimizer {optimizer!r}; choose from {OPTIMIZERS}")
    if not math.isfinite(grouped_loglik(grp, fam, tr.from_u(res.x), constant=False)):
        raise ConvergenceError("grouped ML failed to find a finite likelihood",
                               last=tr.from_u(res.x), iterations=int(getattr(res, "nit", 0)))
    return tr.from_u(res.x), bool(res.success), int(getattr(res, "nit", 0))


def _fit_em(grp, fam, start, tol=EM_TOL, max_iter=EM_MAX_ITER):
    """EM treating the exact values inside each class as missing.

    The E-step weights Gauss-Legendre nodes in every class by the current
    density; the M-step is a weighted ML fit on those nodes.
    """
    nodes, qw = _class_nodes(grp.r)
    x = nodes.ravel()
    theta = tuple(start)
    ll = grouped_loglik(grp, fam, theta, constant=False)
    if not math.isfinite(ll):
        raise EstimationError("EM start gives zero probability to an occupied class")
    trace = [ll]
    for it in range(1, max_iter + 1):
        dens = np.exp(dist.logpdf(fam, theta, x)).reshape(nodes.shape) * qw
        tot = dens.sum(axis=1)
        tot[tot <= 0] = 1.0
        w = (grp.f[:, None] * dens / tot[:, None]).ravel()
        new = weighted_mle(fam, x, w, theta, location_upper=grp.r[0])
        new_ll = grouped_loglik(grp, fam, new, constant=False)
        if new_ll < ll:
            # Quadrature noise near the optimum; stay at the better point.
            return theta, True, it, trace
        theta = new
        trace.append(new_ll)
        if new_ll - ll < tol:
            return theta, True, it, trace
        ll = new_ll
    raise ConvergenceError("grouped EM did not converge", last=theta, iterations=max_iter)


def _fit_aml(grp, fam, start):
    mids = grp.midpoints
    theta = weighted_mle(fam, mids, grp.f, start, location_upper=grp.r[0], method="Nelder-Mead")
    return theta, True, 0


def fit_grouped(grp: GroupedSample, family: str = "weibull", method: str = "em",
                starts: Optional[tuple] = None, optimizer: str = "nelder-mead") -> GroupedFit:
    """Fit a three-parameter family to grouped data.

    Parameters
    ----------
    grp : GroupedSample
    family : {"weibull", "birnbaum-saunders", "ge"}
    method : {"ml", "em", "aml"}
        Direct maximization of the grouped likelihood, EM over the
        within-class values, or weighted ML on the class midpoints.
    starts : (alpha, beta, mu), optional
        Required for ``ml`` and ``aml``; ``em`` initializes itself when
        omitted.
    optimizer : str
        One of ``OPTIMIZERS``, used by ``ml``.
    """
    fam = _check_family(family)
    method = method.lower()
    if np.count_nonzero(grp.f) < 2:
        raise EstimationError("only one occupied class; the grouped likelihood is flat")
    if method in ("ml", "aml"):
        if starts is None:
            raise ParameterError(f"method {method!r} needs starting values")
        start = _check_start(grp, fam, starts)
    elif method == "em":
        start = _check_start(grp, fam, starts) if starts is not None else _default_start(grp, fam.name)
    else:
        raise ParameterError(f"unknown grouped method {method!r}; choose from ('aml', 'em', 'ml')")

    trace = []
    if method == "ml":
        theta, ok, iters = _fit_ml(grp, fam, start, optimizer)
    elif method == "em":
        theta, ok, iters, trace = _fit_em(grp, fam, start)
    else:
        theta, ok, iters = _fit_aml(grp, fam, start)
    theta = tuple(float(v) for v in theta)
    measures = grouped_measures(grp, fam, theta, k=3)
    return GroupedFit(fam.name, theta, method, measures, converged=ok, iterations=iters,
                      loglik_trace=trace)


def grouped_measures(grp, family, params_or_cdf, k):
    """Goodness-of-fit block for a grouped fit.

    ``params_or_cdf`` is either a parameter vector of ``family`` or a CDF
    callable (for mixtures, with ``family`` ignored).
    """
    if callable(params_or_cdf):
        cdf_fn = params_or_cdf
    else:
        fam = dist.get_family(family)
        p = fam.normalize(params_or_cdf)
        cdf_fn = lambda t: dist.cdf(fam, p, t)  # noqa: E731
    F = np.asarray(cdf_fn(grp.r), dtype=float)
    P = np.diff(F)
    pos = grp.f > 0
    with np.errstate(divide="ignore"):
        ll = float(np.sum(grp.f[pos] * np.log(P[pos]))) + multinomial_constant(grp.f)
    block = gof.GofBlock(log_likelihood=ll)
    n = grp.n
    if n > k + 1 and math.isfinite(ll):
        block.aic, block.caic, block.bic, block.hqic = gof.information_criteria(ll, k, n)
    chi, merged = gof.grouped_chi_square(grp, cdf_fn)
    block.chi_square = chi
    if merged:
        block.diagnostics["classes_merged"] = True
    e = gof.grouped_edf_statistics(grp, cdf_fn)
    block.ad, block.cvm, block.ks = e.ad, e.cvm, e.ks
    return block

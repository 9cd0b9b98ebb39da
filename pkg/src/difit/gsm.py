"""Gamma shape mixtures: gamma components with shapes 1..K and one shared rate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from . import gof
from .errors import ConvergenceError, ParameterError

__all__ = ["GsmFit", "GsmSpec", "fit_gsm", "gsm_cdf", "gsm_pdf", "gsm_sample"]

EM_TOL = 1e-8
EM_MAX_ITER = 20000
_JUMP_EVERY = 10


@dataclass
class GsmSpec:
    omega: np.ndarray
    beta: float

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float).ravel()
        self.beta = float(self.beta)
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ParameterError(f"gsm: rate beta must be > 0, got {self.beta}")
        if self.omega.size < 1 or np.any(~np.isfinite(self.omega)) or np.any(self.omega < 0):
            raise ParameterError("gsm: weights must be non-negative and finite")
        if abs(self.omega.sum() - 1.0) > 1e-8:
            raise ParameterError(f"gsm: weights must sum to 1 (got {self.omega.sum():.12g})")

    @property
    def K(self) -> int:
        return self.omega.size


def _log_components(x, K, beta):
    """``log gamma(x; j, beta)`` for j = 1..K as an (n, K) array."""
    j = np.arange(1, K + 1)
    with np.errstate(divide="ignore"):
        return (j * math.log(beta) + special.xlogy(j - 1, x[:, None]) - beta * x[:, None]
                - special.gammaln(j))


def gsm_pdf(spec: GsmSpec, x, log: bool = False):
    """Density ``sum_j omega_j beta^j x^(j-1) exp(-beta x) / Gamma(j)``.

    Zero (or ``-inf`` with ``log``) for negative ``x``.
    """
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.full(xa.shape, -np.inf)
    m = xa >= 0
    if m.any():
        lc = _log_components(xa[m], spec.K, spec.beta)
        with np.errstate(divide="ignore"):
            out[m] = special.logsumexp(lc + np.log(spec.omega), axis=1)
    if not log:
        out = np.exp(out)
    return float(out[0]) if np.ndim(x) == 0 else out


def gsm_cdf(spec: GsmSpec, x, log_p: bool = False, lower_tail: bool = True):
    """Distribution function; ``lower_tail=False`` gives the survival function."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    j = np.arange(1, spec.K + 1)
    t = spec.beta * np.maximum(xa, 0.0)[:, None]
    fn = special.gammainc if lower_tail else special.gammaincc
    out = fn(j, t) @ spec.omega
    out = np.clip(out, 0.0, 1.0)
    if log_p:
        with np.errstate(divide="ignore"):
            out = np.log(out)
    return float(out[0]) if np.ndim(x) == 0 else out


def gsm_sample(spec: GsmSpec, n: int, rng=None) -> np.ndarray:
    n = int(n)
    if n < 1:
        raise ParameterError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(rng)
    shapes = rng.choice(np.arange(1, spec.K + 1), size=n, p=spec.omega)
    return rng.gamma(shapes, 1.0 / spec.beta)


@dataclass
class GsmFit:
    estimate: GsmSpec
    measures: gof.GofBlock
    iterations: int
    loglik_trace: list = field(default_factory=list, repr=False)

    @property
    def beta(self) -> float:
        return self.estimate.beta

    @property
    def omega(self) -> np.ndarray:
        return self.estimate.omega

    def to_dict(self) -> dict:
        return {
            "K": self.estimate.K,
            "beta": self.estimate.beta,
            "omega": [float(v) for v in self.estimate.omega],
            "measures": self.measures.to_dict(),
            "iterations": self.iterations,
        }


def _em_step(x, total, j, omega, beta):
    with np.errstate(divide="ignore"):
        a = _log_components(x, j.size, beta) + np.log(omega)
    tau = np.exp(a - special.logsumexp(a, axis=1, keepdims=True))
    omega = tau.mean(axis=0)
    return omega / omega.sum(), float(np.sum(tau @ j) / total)


def _loglik(x, omega, beta):
    with np.errstate(divide="ignore"):
        a = _log_components(x, omega.size, beta) + np.log(omega)
    return float(np.sum(special.logsumexp(a, axis=1)))


def _ridge_jump(x, total, j, omega, beta):
    """Quasi-Newton maximization of the likelihood in (softmax weights, log rate).

    The likelihood is nearly flat along directions that trade weight
    between neighbouring shapes against the rate, where EM steps are tiny.
    """
    K = j.size
    lx = np.log(x)[:, None]

    def f(u):
        eta, lb = u[:K], u[K]
        logw = eta - special.logsumexp(eta)
        b = math.exp(lb)
        a = j * lb + (j - 1) * lx - b * x[:, None] - special.gammaln(j) + logw
        lse = special.logsumexp(a, axis=1, keepdims=True)
        tau = np.exp(a - lse)
        w = np.exp(logw)
        g_eta = tau.sum(axis=0) - x.size * w
        g_lb = float(np.sum(tau @ j) - b * total)
        return -float(lse.sum()), -np.append(g_eta, g_lb)

    # Zero weights are absorbing for EM and for the softmax gradient; floor
    # them so a shape dropped early can come back.
    start = np.maximum(omega, 1e-3 / K)
    eta0 = np.log(start / start.sum())
    u0 = np.append(eta0 - eta0.max(), math.log(beta))
    with np.errstate(all="ignore"):
        res = optimize.minimize(f, u0, jac=True, method="L-BFGS-B",
                                options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-10})
    eta = res.x[:K]
    w = np.exp(eta - special.logsumexp(eta))
    return w / w.sum(), float(math.exp(res.x[K]))


def fit_gsm(data, K: int, tol: float = EM_TOL, max_iter: int = EM_MAX_ITER,
            accelerate: bool = True) -> GsmFit:
    """EM estimate of the weights and common rate of a ``K``-shape GSM.

    Starts from uniform weights and the rate matching the mean.  Plain EM
    crawls here because the weights and the rate trade off against each
    other, so with ``accelerate`` a quasi-Newton jump is attempted every
    ``_JUMP_EVERY`` iterations and kept only if it raises the likelihood.
    Iteration stops once neither an EM step nor a jump gains ``tol``.  The
    reported criteria count ``K + 1`` free parameters.
    """
    x = np.asarray(data, dtype=float).ravel()
    K = int(K)
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    if x.size < 2:
        raise gof.DegenerateSampleError("need at least two observations")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ParameterError("gsm data must be positive and finite")
    j = np.arange(1, K + 1)
    total = x.sum()
    omega = np.full(K, 1.0 / K)
    beta = float(np.dot(omega, j) * x.size / total)

    ll = _loglik(x, omega, beta)
    trace = [ll]
    for it in range(1, max_iter + 1):
        if accelerate and K > 1 and it % _JUMP_EVERY == 0:
            o, b = _ridge_jump(x, total, j, omega, beta)
            cand = _loglik(x, o, b)
            if cand > ll:
                omega, beta, ll = o, b, cand
                trace.append(ll)
        new_o, new_b = _em_step(x, total, j, omega, beta)
        new = _loglik(x, new_o, new_b)
        if new < ll:
            # Rounding-level decrease at the optimum.
            break
        omega, beta = new_o, new_b
        trace.append(new)
        if new - ll < tol:
            ll = new
            if not (accelerate and K > 1):
                break
            # A tiny EM step on the ridge is not convergence; confirm with a jump.
            o, b = _ridge_jump(x, total, j, omega, beta)
            cand = _loglik(x, o, b)
            if cand - ll < tol:
                break
            omega, beta, ll = o, b, cand
            trace.append(ll)
            continue
        ll = new
    else:
        raise ConvergenceError("gsm EM hit the iteration cap",
                               last=GsmSpec(omega, beta), iterations=max_iter)
    spec = GsmSpec(omega, beta)
    block = gof.GofBlock(log_likelihood=ll)
    k = K + 1
    if x.size > k + 1:
        block.aic, block.caic, block.bic, block.hqic = gof.information_criteria(ll, k, x.size)
    e = gof.edf_statistics_cdf(x, lambda t: gsm_cdf(spec, t))
    block.ad, block.cvm, block.ks = e.ad, e.cvm, e.ks
    return GsmFit(spec, block, it, trace)

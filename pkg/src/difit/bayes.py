"""Gibbs samplers for the three-parameter Weibull and Johnson's SB families.

Weibull
    ``theta = beta**alpha`` has an inverse-gamma conditional and is drawn
    exactly; ``alpha`` gets a log-normal random-walk Metropolis step with
    ``beta`` held fixed, and ``mu`` a random-walk step on ``(0, min(x))``.
JSB
    Given ``(lambda, xi)`` the values ``y = logit((x - xi) / lambda)`` are
    normal with mean ``-gamma/delta`` and sd ``1/delta``, so ``(gamma,
    delta)`` are drawn from the normal / inverse-gamma conditionals;
    ``xi`` and the upper end ``xi + lambda`` get random-walk steps.

Proposal scales adapt during burn-in toward an acceptance rate near 0.35
and are frozen for the retained draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import distributions as dist
from . import gof
from .errors import ParameterError
from .weibull import weibull_ml_weighted

__all__ = ["BayesFit", "McmcConfig", "fit_bayes_jsb", "fit_bayes_weibull"]

# Inverse-gamma(shape, rate) prior on variance-like quantities.
PRIOR_IG = (0.001, 0.001)
_TARGET = (0.25, 0.45)
_ADAPT_EVERY = 50
_ACCEPT_WARN = (0.05, 0.95)


@dataclass(frozen=True)
class McmcConfig:
    n_simul: int = 10000
    n_burn: int = 8000
    seed: Optional[int] = None

    def __post_init__(self):
        if not (0 < self.n_burn < self.n_simul):
            raise ParameterError(
                f"need 0 < n_burn < n_simul (got n_burn={self.n_burn}, n_simul={self.n_simul})")


@dataclass
class BayesFit:
    family: str
    estimate: tuple
    measures: gof.GofBlock
    traces: dict = field(repr=False)
    acceptance: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    config: McmcConfig = field(default_factory=McmcConfig)

    def to_dict(self) -> dict:
        names = list(self.traces)
        return {
            "family": self.family,
            "estimate": dict(zip(names, self.estimate)),
            "measures": {k: v for k, v in self.measures.to_dict().items() if v is not None},
            "acceptance": self.acceptance,
            "warnings": list(self.warnings),
            "n_simul": self.config.n_simul,
            "n_burn": self.config.n_burn,
            "seed": self.config.seed,
        }


class _Step:
    """Random-walk proposal scale with burn-in adaptation and acceptance counts."""

    def __init__(self, scale):
        self.scale = scale
        self.window = 0
        self.window_acc = 0
        self.kept = 0
        self.kept_acc = 0

    def record(self, accepted, it, n_burn):
        if it < n_burn:
            self.window += 1
            self.window_acc += accepted
            if self.window == _ADAPT_EVERY:
                rate = self.window_acc / self.window
                if rate < _TARGET[0]:
                    self.scale /= 1.5
                elif rate > _TARGET[1]:
                    self.scale *= 1.5
                self.window = self.window_acc = 0
        else:
            self.kept += 1
            self.kept_acc += accepted

    @property
    def rate(self):
        return float(self.kept_acc) / self.kept if self.kept else float("nan")


def _check(data, positive):
    x = np.asarray(data, dtype=float).ravel()
    if x.size < 10:
        raise ParameterError(f"Bayesian fits need at least 10 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("data contain non-finite values")
    if positive and np.any(x <= 0):
        raise ParameterError("data must be positive")
    if np.ptp(x) == 0:
        raise gof.DegenerateSampleError("all observations are equal")
    return x


def _finish(family, names, draws, steps, x, cfg):
    traces = {k: np.asarray(v) for k, v in zip(names, draws)}
    est = tuple(float(np.mean(t)) for t in traces.values())
    fam = dist.get_family(family)
    ll = float(np.sum(dist.logpdf(fam, est, x)))
    e = gof.edf_statistics_cdf(x, lambda t: dist.cdf(fam, est, t))
    block = gof.GofBlock(log_likelihood=ll, ad=e.ad, cvm=e.cvm, ks=e.ks)
    if not math.isfinite(ll):
        block.diagnostics["estimate_outside_support"] = True
    acc = {k: s.rate for k, s in steps.items()}
    warn = [f"acceptance rate for {k} is {r:.3f}, outside [{_ACCEPT_WARN[0]}, {_ACCEPT_WARN[1]}]"
            for k, r in acc.items() if not (_ACCEPT_WARN[0] <= r <= _ACCEPT_WARN[1])]
    return BayesFit(fam.name, est, block, traces, acc, warn, cfg)


def fit_bayes_weibull(data, cfg: McmcConfig = McmcConfig()) -> BayesFit:
    """Posterior means of ``(alpha, beta, mu)`` for a three-parameter Weibull.

    Priors: flat on ``alpha > 0``, inverse-gamma on ``beta**alpha``, and
    flat on ``0 < mu < min(x)``.
    """
    x = _check(data, positive=True)
    n = x.size
    xmin = float(x.min())
    rng = np.random.default_rng(cfg.seed)
    a0, b0 = PRIOR_IG

    # Start: location just below the minimum, two-parameter ML for the rest.
    mu = xmin - 0.1 * (float(x.max()) - xmin) if xmin > 0.1 * np.ptp(x) else 0.5 * xmin
    alpha, beta = weibull_ml_weighted(x - mu, np.ones(n))
    lt = np.log(x - mu)

    def log_target(alpha, beta, lt):
        # log-likelihood plus log prior density of (alpha, beta) induced by
        # the inverse-gamma prior on theta = beta**alpha.
        la = alpha * math.log(beta)
        ll = n * math.log(alpha) - n * alpha * math.log(beta) + (alpha - 1.0) * lt.sum() \
            - np.sum(np.exp(alpha * (lt - math.log(beta))))
        lp = -(a0 + 1.0) * la - b0 * math.exp(-la) + math.log(alpha) + (alpha - 1.0) * math.log(beta)
        return ll + lp

    s_alpha = _Step(0.1)
    s_mu = _Step(0.1 * xmin)
    keep = cfg.n_simul - cfg.n_burn
    draws = [np.empty(keep) for _ in range(3)]
    cur = log_target(alpha, beta, lt)
    for it in range(cfg.n_simul):
        # alpha | beta, mu
        prop = alpha * math.exp(s_alpha.scale * rng.standard_normal())
        new = log_target(prop, beta, lt)
        # log-normal proposal: Hastings ratio prop/alpha
        acc = math.log(rng.uniform()) < new - cur + math.log(prop / alpha)
        if acc:
            alpha, cur = prop, new
        s_alpha.record(acc, it, cfg.n_burn)

        # theta = beta**alpha | alpha, mu  ~  IG(a0 + n, b0 + sum t**alpha)
        theta = (b0 + np.sum(np.exp(alpha * lt))) / rng.gamma(a0 + n)
        beta = theta ** (1.0 / alpha)
        cur = log_target(alpha, beta, lt)

        # mu | alpha, beta on (0, min x)
        pm = mu + s_mu.scale * rng.standard_normal()
        acc = False
        if 0.0 < pm < xmin:
            plt = np.log(x - pm)
            new = log_target(alpha, beta, plt)
            if math.log(rng.uniform()) < new - cur:
                mu, lt, cur, acc = pm, plt, new, True
        s_mu.record(acc, it, cfg.n_burn)

        if it >= cfg.n_burn:
            i = it - cfg.n_burn
            draws[0][i], draws[1][i], draws[2][i] = alpha, beta, mu
    return _finish("weibull", ("alpha", "beta", "mu"), draws,
                   {"alpha": s_alpha, "mu": s_mu}, x, cfg)


def fit_bayes_jsb(data, cfg: McmcConfig = McmcConfig(),
                  fixed: Optional[tuple] = None) -> BayesFit:
    """Posterior means of ``(delta, gamma, lambda, xi)`` for Johnson's SB.

    Priors: flat on ``xi`` over ``(min - range, min)`` and on the upper end
    ``xi + lambda`` over ``(max, max + range)``; flat on the logit-scale
    mean and inverse-gamma on its variance.  ``fixed=(lambda, xi)`` pins
    the bounds and samples only ``(delta, gamma)``.
    """
    x = _check(data, positive=False)
    n = x.size
    lo, hi = float(x.min()), float(x.max())
    rng_w = hi - lo
    rng = np.random.default_rng(cfg.seed)
    a0, b0 = PRIOR_IG
    fam = dist.get_family("jsb")

    if fixed is not None:
        lam, xi = (float(v) for v in fixed)
        if not (lam > 0 and xi < lo and xi + lam > hi):
            raise ParameterError("fixed (lambda, xi) must bracket the data")
    else:
        xi = lo - 0.05 * rng_w
        lam = rng_w * 1.1

    def logit_y(xi, lam):
        u = (x - xi) / lam
        return np.log(u) - np.log1p(-u)

    def gibbs_dg(y):
        ybar = y.mean()
        ss = float(np.sum((y - ybar) ** 2))
        var = (b0 + 0.5 * ss) / rng.gamma(a0 + 0.5 * (n - 1))
        m = ybar + math.sqrt(var / n) * rng.standard_normal()
        d = 1.0 / math.sqrt(var)
        return d, -m * d

    def loglik(d, g, lam, xi):
        return float(np.sum(dist.logpdf(fam, (d, g, lam, xi), x)))

    delta, gam = gibbs_dg(logit_y(xi, lam))
    s_xi = _Step(0.05 * rng_w)
    s_up = _Step(0.05 * rng_w)
    keep = cfg.n_simul - cfg.n_burn
    draws = [np.empty(keep) for _ in range(4)]
    for it in range(cfg.n_simul):
        delta, gam = gibbs_dg(logit_y(xi, lam))
        if fixed is None:
            cur = loglik(delta, gam, lam, xi)
            up = xi + lam
            # lower end, upper end held fixed
            p = xi + s_xi.scale * rng.standard_normal()
            acc = False
            if lo - rng_w < p < lo:
                new = loglik(delta, gam, up - p, p)
                if math.log(rng.uniform()) < new - cur:
                    xi, lam, cur, acc = p, up - p, new, True
            s_xi.record(acc, it, cfg.n_burn)
            # upper end, lower end held fixed
            p = xi + lam + s_up.scale * rng.standard_normal()
            acc = False
            if hi < p < hi + rng_w:
                new = loglik(delta, gam, p - xi, xi)
                if math.log(rng.uniform()) < new - cur:
                    lam, cur, acc = p - xi, new, True
            s_up.record(acc, it, cfg.n_burn)
        if it >= cfg.n_burn:
            i = it - cfg.n_burn
            draws[0][i], draws[1][i], draws[2][i], draws[3][i] = delta, gam, lam, xi
    steps = {} if fixed is not None else {"xi": s_xi, "upper": s_up}
    return _finish("jsb", ("delta", "gamma", "lambda", "xi"), draws, steps, x, cfg)

"""Finite mixtures: evaluation, sampling and EM fitting on raw or grouped data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from . import distributions as dist
from . import gof
from ._fitting import Transform, weighted_mle
from .errors import ConvergenceError, EstimationError, ParameterError
from .grouped import GroupedSample, _class_nodes, grouped_measures
from .weibull import weibull_ml_weighted

__all__ = [
    "GROUPED_MIXTURE_FAMILIES",
    "MIXTURE_FAMILIES",
    "MixtureFit",
    "MixtureSpec",
    "fit_mixture",
    "fit_mixture_grouped",
    "initial_params",
    "mixture_cdf",
    "mixture_loglik",
    "mixture_pdf",
    "mixture_quantile",
    "mixture_sample",
]

MIXTURE_FAMILIES = (
    "birnbaum-saunders", "burrxii", "chen", "f", "frechet", "gamma", "ge",
    "gompertz", "log-normal", "log-logistic", "lomax", "skew-normal", "weibull",
)
GROUPED_MIXTURE_FAMILIES = ("gamma", "log-normal", "skew-normal", "weibull")

EM_TOL = 1e-8
EM_MAX_ITER = 5000
MAX_RESTARTS = 5
_MIN_WEIGHT = 1e-6


@dataclass
class MixtureSpec:
    """``K`` components of one family with weights summing to one.

    Components hold the family's base parameters (no location), e.g.
    ``(alpha, beta)`` or ``(alpha, beta, lambda)`` for skew-normal.
    """

    family: str
    weights: np.ndarray
    components: list

    def __post_init__(self):
        fam = dist.get_family(self.family)
        self.family = fam.name
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        p = len(fam.param_names)
        comps = []
        for c in self.components:
            c = tuple(float(v) for v in np.atleast_1d(c))
            if len(c) != p:
                raise ParameterError(f"{fam.name}: each component needs {fam.param_names}")
            fam.normalize(c)
            comps.append(c)
        self.components = comps
        if self.weights.size != len(comps) or not comps:
            raise ParameterError("need one weight per component and at least one component")
        if np.any(~np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ParameterError("mixture weights must be non-negative")
        if abs(self.weights.sum() - 1.0) > 1e-8:
            raise ParameterError(f"mixture weights must sum to 1 (got {self.weights.sum():.12g})")

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def fam(self) -> dist.Family:
        return dist.get_family(self.family)

    @classmethod
    def from_flat(cls, family, K, flat) -> "MixtureSpec":
        """Build from ``(w_1..w_K, alpha_1..alpha_K, beta_1..beta_K[, lambda_1..])``."""
        fam = dist.get_family(family)
        flat = np.asarray(flat, dtype=float).ravel()
        p = len(fam.param_names)
        K = int(K)
        if K < 1 or flat.size != K * (1 + p):
            names = ("omega",) + fam.param_names
            raise ParameterError(
                f"{fam.name} with K={K} needs {K * (1 + p)} values laid out as {names} blocks, "
                f"got {flat.size}"
            )
        blocks = flat.reshape(1 + p, K)
        return cls(fam.name, blocks[0], [tuple(blocks[1:, k]) for k in range(K)])

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self.weights, np.array(self.components).T.ravel()])

    def rows(self) -> list[dict]:
        names = ("weight",) + self.fam.param_names
        return [dict(zip(names, (float(w),) + c)) for w, c in zip(self.weights, self.components)]


def _component_matrix(spec, x, fn):
    return np.stack([np.atleast_1d(fn(spec.fam, c, x)) for c in spec.components], axis=1)


def mixture_pdf(spec: MixtureSpec, x):
    """Mixture density ``sum_k w_k f(x | theta_k)``."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    val = _component_matrix(spec, xa, dist.pdf) @ spec.weights
    return float(val[0]) if np.ndim(x) == 0 else val


def mixture_cdf(spec: MixtureSpec, x):
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    val = np.clip(_component_matrix(spec, xa, dist.cdf) @ spec.weights, 0.0, 1.0)
    return float(val[0]) if np.ndim(x) == 0 else val


def mixture_quantile(spec: MixtureSpec, q):
    """Invert the mixture CDF by bracketing between component quantiles."""
    qa = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any((qa <= 0) | (qa >= 1) | ~np.isfinite(qa)):
        raise ParameterError("quantile: probabilities must lie strictly inside (0, 1)")
    fam = spec.fam
    lo, hi = -math.inf, math.inf
    if fam.name not in ("skew-normal",):
        lo = 0.0
    out = np.empty_like(qa)
    live = [c for w, c in zip(spec.weights, spec.components) if w > 0]
    for i, qi in enumerate(qa):
        cq = [float(dist.quantile(fam, c, qi)) for c in live]
        start = float(np.median(cq))
        out[i] = dist._invert_cdf(lambda t: float(mixture_cdf(spec, t)), qi, lo, hi, start=start)
    return float(out[0]) if np.ndim(q) == 0 else out


def mixture_sample(spec: MixtureSpec, n: int, rng=None) -> np.ndarray:
    """Draw component labels with probabilities ``weights``, then each component.

    Labels are drawn first with one ``rng.choice`` call; component draws then
    follow in component order, so a spec with weight 1 on component ``k``
    consumes the stream exactly like ``n`` labels followed by ``n`` draws
    from component ``k``.
    """
    n = int(n)
    if n < 1:
        raise ParameterError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(rng)
    labels = rng.choice(spec.K, size=n, p=spec.weights)
    out = np.empty(n)
    for k, c in enumerate(spec.components):
        idx = np.flatnonzero(labels == k)
        if idx.size:
            out[idx] = dist.sample(spec.fam, c, idx.size, rng)
    return out


def mixture_loglik(spec: MixtureSpec, x) -> float:
    logf = _component_matrix(spec, np.asarray(x, dtype=float), dist.logpdf)
    with np.errstate(divide="ignore"):
        return float(np.sum(special.logsumexp(logf + np.log(spec.weights), axis=1)))


# ----------------------------------------------------------------------------
# starting values


def _median_grid(fam, x, grid, other):
    """Best-likelihood candidate over a shape grid; ``other`` maps shape to the second parameter."""
    best, best_ll = None, -math.inf
    for a in grid:
        with np.errstate(all="ignore"):
            b = other(a)
        if not (np.isfinite(b) and b > 0):
            continue
        ll = float(np.sum(dist.logpdf(fam, (a, b), x)))
        if ll > best_ll:
            best, best_ll = (float(a), float(b)), ll
    return best


def initial_params(family, x) -> tuple:
    """Heuristic base parameters of ``family`` for the sample ``x``.

    Moment or median matching where a simple relation exists, otherwise a
    likelihood grid scan over the shape.
    """
    fam = dist.get_family(family)
    x = np.asarray(x, dtype=float)
    mean = float(np.mean(x))
    sd = float(np.std(x)) or 1e-3 * abs(mean) or 1e-3
    med = float(np.median(x))
    lx = np.log(x[x > 0]) if fam.name != "skew-normal" else None
    sdl = float(np.std(lx)) if lx is not None and lx.size > 1 else 0.5
    sdl = sdl or 0.1
    name = fam.name
    if name == "log-normal":
        return float(np.mean(lx)), sdl
    if name == "gamma":
        return mean**2 / sd**2, sd**2 / mean
    if name == "weibull":
        return weibull_ml_weighted(x, np.ones_like(x))
    if name == "skew-normal":
        return mean, sd, 0.0
    if name == "birnbaum-saunders":
        harm = 1.0 / np.mean(1.0 / x)
        return math.sqrt(max(2.0 * (math.sqrt(mean / harm) - 1.0), 1e-6)), math.sqrt(mean * harm)
    if name == "log-logistic":
        return math.pi / (math.sqrt(3.0) * sdl), med
    if name == "frechet":
        a = math.pi / (math.sqrt(6.0) * sdl)
        return a, med * math.log(2.0) ** (1.0 / a)
    if name == "ge":
        cv2 = (sd / mean) ** 2

        def g(a):
            m = special.digamma(a + 1) - special.digamma(1)
            v = special.polygamma(1, 1) - special.polygamma(1, a + 1)
            return v / m**2 - cv2

        lo, hi = 1e-3, 1e6
        a = 1.0 if g(lo) * g(hi) > 0 else _brent(g, lo, hi)
        return a, float((special.digamma(a + 1) - special.digamma(1)) / mean)
    grid = np.logspace(-3, 2, 60)
    ln2 = math.log(2.0)
    if name == "burrxii":
        return _median_grid(fam, x, grid, lambda a: ln2 / np.log1p(med**a)) or (1.0, 1.0)
    if name == "lomax":
        return _median_grid(fam, x, grid / med, lambda a: ln2 / np.log1p(a * med)) or (1.0, 1.0)
    if name == "chen":
        return _median_grid(fam, x, grid, lambda a: ln2 / np.expm1(med**a)) or (1.0, 1.0)
    if name == "gompertz":
        return _median_grid(fam, x, grid / med, lambda a: a * ln2 / np.expm1(a * med)) or (1.0, 1.0)
    # F: two degrees of freedom and no scale; scan both.
    best, best_ll = (2.0, 2.0), -math.inf
    for a in np.logspace(-1, 3, 25):
        for b in np.logspace(-1, 3, 25):
            ll = float(np.sum(dist.logpdf(fam, (a, b), x)))
            if ll > best_ll:
                best, best_ll = (float(a), float(b)), ll
    return best


def _brent(g, lo, hi):
    from scipy.optimize import brentq

    return float(brentq(g, lo, hi))


def _default_spec(family, x, K) -> MixtureSpec:
    """Equal weights; component ``k`` fitted by ML to the ``k``-th quantile slice."""
    fam = dist.get_family(family)
    xs = np.sort(np.asarray(x, dtype=float))
    slices = np.array_split(xs, K)
    comps = []
    for s in slices:
        start = initial_params(fam, s)
        comps.append(weighted_mle(fam, s, np.ones_like(s), start))
    return MixtureSpec(fam.name, np.full(K, 1.0 / K), comps)


def _perturb(spec: MixtureSpec, rng) -> MixtureSpec:
    fam = spec.fam
    w = spec.weights * np.exp(0.3 * rng.standard_normal(spec.K))
    w = np.maximum(w, 0.05)
    comps = []
    for c in spec.components:
        new = []
        for name, v in zip(fam.param_names, c):
            if name in fam.positive:
                new.append(v * math.exp(0.2 * rng.standard_normal()))
            else:
                new.append(v + 0.2 * (abs(v) + 1.0) * rng.standard_normal())
        comps.append(tuple(new))
    return MixtureSpec(fam.name, w / w.sum(), comps)


# ----------------------------------------------------------------------------
# EM


@dataclass
class MixtureFit:
    estimate: MixtureSpec
    measures: gof.GofBlock
    cluster: Optional[np.ndarray] = None
    iterations: int = 0
    converged: bool = True
    restarts: int = 0
    loglik_trace: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        out = {
            "family": self.estimate.family,
            "K": self.estimate.K,
            "estimate": self.estimate.rows(),
            "measures": self.measures.to_dict(),
            "iterations": self.iterations,
            "converged": self.converged,
            "restarts": self.restarts,
        }
        if self.cluster is not None:
            out["cluster"] = [int(v) for v in self.cluster]
        return out


class _Collapse(Exception):
    pass


def _collapsed(spec, scale_ref):
    if np.any(spec.weights < _MIN_WEIGHT):
        return True
    fam = spec.fam
    if "beta" in fam.positive:
        j = fam.param_names.index("beta")
        floor = 1e-8 if fam.name in ("log-normal",) else 1e-8 * scale_ref
        if any(c[j] < floor for c in spec.components):
            return True
    return False


def _em_ungrouped(x, spec, tol, max_iter, scale_ref):
    fam = spec.fam
    logw = np.log(spec.weights)
    logf = _component_matrix(spec, x, dist.logpdf)
    ll = float(np.sum(special.logsumexp(logf + logw, axis=1)))
    if not math.isfinite(ll):
        raise _Collapse("start assigns zero density to some observation")
    trace = [ll]
    for it in range(1, max_iter + 1):
        a = logf + logw
        tau = np.exp(a - special.logsumexp(a, axis=1, keepdims=True))
        w = tau.mean(axis=0)
        w = w / w.sum()
        comps = []
        for k, c in enumerate(spec.components):
            if w[k] < _MIN_WEIGHT:
                raise _Collapse(f"component {k + 1} weight fell below {_MIN_WEIGHT}")
            comps.append(tuple(weighted_mle(fam, x, tau[:, k], c)))
        new = MixtureSpec(fam.name, w, comps)
        if _collapsed(new, scale_ref):
            raise _Collapse("component scale collapsed")
        logw_new = np.log(new.weights)
        logf_new = _component_matrix(new, x, dist.logpdf)
        new_ll = float(np.sum(special.logsumexp(logf_new + logw_new, axis=1)))
        if not math.isfinite(new_ll):
            raise _Collapse("likelihood became non-finite")
        if new_ll < ll:
            # Inner optimizer noise below tolerance; keep the better iterate.
            return spec, it, True, trace
        spec, logw, logf = new, logw_new, logf_new
        trace.append(new_ll)
        if new_ll - ll < tol:
            return spec, it, True, trace
        ll = new_ll
    raise ConvergenceError("mixture EM hit the iteration cap", last=spec, iterations=max_iter)


def _check_K(K):
    K = int(K)
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    return K


def _start_spec(family, K, starts):
    if isinstance(starts, MixtureSpec):
        if starts.K != K or starts.family != dist.get_family(family).name:
            raise ParameterError("starting spec does not match family/K")
        return starts
    return MixtureSpec.from_flat(family, K, starts)


def _run_with_restarts(run, spec0, seed=0):
    rng = np.random.default_rng(seed)
    spec = spec0
    last_err = None
    for attempt in range(MAX_RESTARTS + 1):
        try:
            return run(spec) + (attempt,)
        except _Collapse as exc:
            last_err = exc
            spec = _perturb(spec0, rng)
    raise EstimationError(f"mixture EM collapsed after {MAX_RESTARTS} restarts: {last_err}")


def fit_mixture(data, family: str, K: int, starts=None, tol: float = EM_TOL,
                max_iter: int = EM_MAX_ITER) -> MixtureFit:
    """Fit a ``K``-component mixture to individual observations by EM.

    Parameters
    ----------
    data : array_like
    family : str
        One of ``MIXTURE_FAMILIES``.
    K : int
    starts : array_like or MixtureSpec, optional
        Flat layout ``(w..., alpha..., beta...[, lambda...])``.  Without it,
        components start from ML fits to ``K`` equal-count quantile slices.

    Returns
    -------
    MixtureFit
        ``cluster`` holds 1-based labels ``argmax_k w_k f(x_i | theta_k)``.
    """
    fam = dist.get_family(family)
    if fam.name not in MIXTURE_FAMILIES:
        raise ParameterError(f"mixture fitting supports {MIXTURE_FAMILIES}, not {family!r}")
    K = _check_K(K)
    x = np.asarray(data, dtype=float).ravel()
    if x.size < 5 * K:
        raise ParameterError(f"need at least 5K = {5 * K} observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("data contain non-finite values")
    if fam.name != "skew-normal" and np.any(x <= 0):
        raise ParameterError(f"{fam.name} mixtures need positive data")
    if np.ptp(x) == 0:
        raise gof.DegenerateSampleError("all observations are equal")
    spec0 = _default_spec(fam, x, K) if starts is None else _start_spec(fam, K, starts)
    scale_ref = float(np.std(x))
    spec, iters, ok, trace, restarts = _run_with_restarts(
        lambda s: _em_ungrouped(x, s, tol, max_iter, scale_ref), spec0)

    a = _component_matrix(spec, x, dist.logpdf) + np.log(spec.weights)
    cluster = np.argmax(a, axis=1) + 1
    ll = float(np.sum(special.logsumexp(a, axis=1)))
    p = len(fam.param_names)
    k = (K - 1) + K * p
    block = gof.GofBlock(log_likelihood=ll)
    if x.size > k + 1:
        block.aic, block.caic, block.bic, block.hqic = gof.information_criteria(ll, k, x.size)
    e = gof.edf_statistics_cdf(x, lambda t: mixture_cdf(spec, t))
    block.ad, block.cvm, block.ks = e.ad, e.cvm, e.ks
    return MixtureFit(spec, block, cluster, iters, ok, restarts, trace)


# ----------------------------------------------------------------------------
# grouped data


def grouped_mixture_loglik(grp: GroupedSample, spec: MixtureSpec) -> float:
    """Kernel ``sum f_i log sum_k w_k P_ik`` without the multinomial constant."""
    P = np.diff(_component_matrix(spec, grp.r, dist.cdf), axis=0) @ spec.weights
    pos = grp.f > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(grp.f[pos] * np.log(P[pos])))


def _grouped_em_step(grp, spec, xn, nodes, qw, scale_ref):
    fam = spec.fam
    dens = _component_matrix(spec, xn, dist.pdf) * spec.weights  # (m*q, K)
    dens = dens.reshape(nodes.shape + (spec.K,)) * qw[:, :, None]
    tot = dens.sum(axis=(1, 2))
    tot[tot <= 0] = 1.0
    wt = grp.f[:, None, None] * dens / tot[:, None, None]
    wk = wt.reshape(-1, spec.K)
    w = wk.sum(axis=0) / grp.f.sum()
    w = w / w.sum()
    comps = []
    for k, c in enumerate(spec.components):
        if w[k] < _MIN_WEIGHT:
            raise _Collapse(f"component {k + 1} weight fell below {_MIN_WEIGHT}")
        comps.append(tuple(weighted_mle(fam, xn, wk[:, k], c, gtol=1e-6)))
    new = MixtureSpec(fam.name, w, comps)
    if _collapsed(new, scale_ref):
        raise _Collapse("component scale collapsed")
    ll = grouped_mixture_loglik(grp, new)
    if not math.isfinite(ll):
        raise _Collapse("likelihood became non-finite")
    return new, ll


def _spec_to_u(spec, tr):
    return np.concatenate([np.log(spec.weights)] + [tr.to_u(c) for c in spec.components])


def _spec_from_u(u, spec, tr):
    K, p = spec.K, len(spec.fam.param_names)
    w = np.exp(u[:K] - u[:K].max())
    comps = [tr.from_u(u[K + k * p: K + (k + 1) * p]) for k in range(K)]
    return MixtureSpec(spec.family, w / w.sum(), comps)


def _em_grouped(grp, spec, tol, max_iter, scale_ref):
    """Grouped EM with SQUAREM extrapolation.

    Each cycle takes two EM steps, extrapolates along them and takes one EM
    step from the extrapolated point.  That result is kept only when its
    likelihood beats the second plain step, so the accepted sequence is
    still monotone.
    """
    nodes, qw = _class_nodes(grp.r)
    xn = nodes.ravel()
    ll = grouped_mixture_loglik(grp, spec)
    if not math.isfinite(ll):
        raise _Collapse("start gives zero probability to an occupied class")
    tr = Transform(spec.fam)
    step = lambda s: _grouped_em_step(grp, s, xn, nodes, qw, scale_ref)  # noqa: E731
    trace = [ll]
    it = 0
    while it < max_iter:
        s1, l1 = step(spec)
        it += 1
        if l1 < ll:
            return spec, it, True, trace
        trace.append(l1)
        if l1 - ll < tol:
            return s1, it, True, trace
        s2, l2 = step(s1)
        it += 1
        if l2 < l1:
            return s1, it, True, trace
        trace.append(l2)
        if l2 - l1 < tol:
            return s2, it, True, trace
        best, lbest = s2, l2
        u0, u1, u2 = (_spec_to_u(s, tr) for s in (spec, s1, s2))
        r, v = u1 - u0, (u2 - u1) - (u1 - u0)
        if np.linalg.norm(v) > 0:
            a = -np.linalg.norm(r) / np.linalg.norm(v)
            try:
                with np.errstate(all="ignore"):
                    s3, l3 = step(_spec_from_u(u0 - 2 * a * r + a * a * v, spec, tr))
                it += 1
                if l3 > l2:
                    best, lbest = s3, l3
                    trace.append(l3)
            except (ParameterError, _Collapse, ValueError, OverflowError):
                pass
        spec, ll = best, lbest
    raise ConvergenceError("grouped mixture EM hit the iteration cap", last=spec, iterations=max_iter)


def _default_grouped_spec(grp, family, K):
    # Expand the table to midpoints, then slice as for raw data.
    x = np.repeat(grp.midpoints, grp.f.astype(int))
    if family != "skew-normal":
        x = x[x > 0]
    return _default_spec(family, x, K)


def fit_mixture_grouped(grp: GroupedSample, family: str, K: int, starts=None,
                        tol: float = EM_TOL, max_iter: int = EM_MAX_ITER) -> MixtureFit:
    """EM fit of a ``K``-component mixture to a frequency table.

    The E-step spreads each class frequency over Gauss-Legendre nodes inside
    the class in proportion to the current component densities; the M-step
    is a weighted ML fit per component.  The reported log-likelihood is the
    multinomial log-probability of the table.
    """
    fam = dist.get_family(family)
    if fam.name not in GROUPED_MIXTURE_FAMILIES:
        raise ParameterError(
            f"grouped mixture fitting supports {GROUPED_MIXTURE_FAMILIES}, not {family!r}")
    K = _check_K(K)
    if np.count_nonzero(grp.f) < max(K, 2):
        raise EstimationError(f"need at least {max(K, 2)} occupied classes for K={K}")
    if fam.name != "skew-normal" and grp.r[0] < 0:
        raise ParameterError(f"{fam.name} mixtures need non-negative class boundaries")
    spec0 = _default_grouped_spec(grp, fam.name, K) if starts is None else _start_spec(fam, K, starts)
    scale_ref = float(grp.r[-1] - grp.r[0])
    spec, iters, ok, trace, restarts = _run_with_restarts(
        lambda s: _em_grouped(grp, s, tol, max_iter, scale_ref), spec0)
    k = (K - 1) + K * len(fam.param_names)
    measures = grouped_measures(grp, None, lambda t: mixture_cdf(spec, t), k)
    return MixtureFit(spec, measures, None, iters, ok, restarts, trace)

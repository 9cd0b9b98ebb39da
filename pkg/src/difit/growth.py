"""Nonlinear least-squares height-diameter curves ``H = 1.3 + h(D; b1, b2, b3)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .errors import ConvergenceError, EstimationError, ParameterError

__all__ = [
    "BREAST_HEIGHT",
    "GROWTH_MODELS",
    "GrowthFit",
    "fit_growth",
    "model_jacobian",
    "predict_height",
]

BREAST_HEIGHT = 1.3
MAX_ITER = 500


def _chapman_richards(d, b1, b2, b3):
    s = d + b3
    h = b1 + b2 / s
    return h, np.stack([np.ones_like(d), 1.0 / s, -b2 / s**2], axis=1)


def _gompertz(d, b1, b2, b3):
    e = np.exp(-b3 * d)
    g = np.exp(-b2 * e)
    return b1 * g, np.stack([g, -b1 * g * e, b1 * g * b2 * e * d], axis=1)


def _hossfeldiv(d, b1, b2, b3):
    db = d**b3
    p = b2 * db
    h = b1 * p / (1.0 + p)
    dp = b1 / (1.0 + p) ** 2
    return h, np.stack([p / (1.0 + p), dp * db, dp * p * np.log(d)], axis=1)


def _korf(d, b1, b2, b3):
    dm = d ** (-b3)
    k = np.exp(-b2 * dm)
    return b1 * k, np.stack([k, -b1 * k * dm, b1 * k * b2 * dm * np.log(d)], axis=1)


def _logistic(d, b1, b2, b3):
    e = np.exp(-b3 * d)
    q = 1.0 + b2 * e
    return b1 / q, np.stack([1.0 / q, -b1 * e / q**2, b1 * b2 * d * e / q**2], axis=1)


def _prodan(d, b1, b2, b3):
    d2 = d * d
    s = b1 * d2 + b2 * d + b3
    c = -d2 / s**2
    return d2 / s, np.stack([c * d2, c * d, c], axis=1)


def _ratkowsky(d, b1, b2, b3):
    s = d + b3
    r = np.exp(-b2 / s)
    return b1 * r, np.stack([r, -b1 * r / s, b1 * r * b2 / s**2], axis=1)


def _sibbesen(d, b1, b2, b3):
    ld = np.log(d)
    dm = d ** (-b3)
    s = np.exp(b2 * dm * ld)
    return b1 * s, np.stack([s, b1 * s * dm * ld, -b1 * s * b2 * dm * ld * ld], axis=1)


def _weibull(d, b1, b2, b3):
    db = d**b3
    w = np.exp(-b2 * db)
    return b1 * (1.0 - w), np.stack([1.0 - w, b1 * w * db, b1 * w * b2 * db * np.log(d)], axis=1)


GROWTH_MODELS = {
    "chapman-richards": _chapman_richards,
    "gompertz": _gompertz,
    "hossfeldiv": _hossfeldiv,
    "korf": _korf,
    "logistic": _logistic,
    "prodan": _prodan,
    "ratkowsky": _ratkowsky,
    "sibbesen": _sibbesen,
    "weibull": _weibull,
}


def _model(name):
    try:
        return GROWTH_MODELS[name.lower()]
    except KeyError:
        raise ParameterError(f"unknown growth model {name!r}; choose from {sorted(GROWTH_MODELS)}") from None


def predict_height(model: str, beta, d) -> np.ndarray:
    """Predicted heights ``1.3 + h(d; beta)``."""
    d = np.asarray(d, dtype=float)
    with np.errstate(all="ignore"):
        h, _ = _model(model)(np.atleast_1d(d), *beta)
    out = BREAST_HEIGHT + h
    return float(out[0]) if d.ndim == 0 else out


def model_jacobian(model: str, beta, d) -> np.ndarray:
    """Analytic ``dH/dbeta`` as an ``(n, 3)`` array."""
    with np.errstate(all="ignore"):
        _, J = _model(model)(np.atleast_1d(np.asarray(d, dtype=float)), *beta)
    return J


@dataclass
class GrowthFit:
    model: str
    estimate: np.ndarray
    std_error: np.ndarray
    t_value: np.ndarray
    p_value: np.ndarray
    residuals: np.ndarray = field(repr=False)
    var_cov: np.ndarray = field(repr=False)
    cov_unscaled: np.ndarray = field(repr=False)
    residual_std_error: float = 0.0
    df: int = 0
    iterations: int = 0

    def summary(self) -> list[dict]:
        return [
            {"parameter": f"beta{i + 1}", "estimate": float(e), "std_error": float(s),
             "t_value": float(t), "p_value": float(p)}
            for i, (e, s, t, p) in enumerate(zip(self.estimate, self.std_error, self.t_value,
                                                 self.p_value))
        ]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "summary": self.summary(),
            "residuals": [float(r) for r in self.residuals],
            "var_cov": self.var_cov.tolist(),
            "cov_unscaled": self.cov_unscaled.tolist(),
            "residual_std_error": self.residual_std_error,
            "df": self.df,
        }


def fit_growth(h, d, model: str = "weibull", starts=(1.0, 1.0, 1.0)) -> GrowthFit:
    """Least-squares fit of a height-diameter model.

    Uses Levenberg-Marquardt with the analytic Jacobian.

    Parameters
    ----------
    h, d : array_like
        Heights and diameters of the same trees, in matching order.
    model : str
        One of ``GROWTH_MODELS``.
    starts : sequence of 3 floats

    Returns
    -------
    GrowthFit
        ``var_cov`` is ``s**2 (J'J)^-1`` with ``s**2 = RSS / (n - 3)``, so
        its diagonal squares the standard errors; ``cov_unscaled`` is
        ``(J'J)^-1``.  ``residuals`` are ``h - H`` in input order.
    """
    fn = _model(model)
    name = model.lower()
    h = np.asarray(h, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    if h.size != d.size:
        raise ParameterError(f"h and d differ in length ({h.size} vs {d.size})")
    if h.size < 4:
        raise ParameterError(f"need at least 4 trees, got {h.size}")
    if np.any(~np.isfinite(h)) or np.any(~np.isfinite(d)):
        raise ParameterError("heights and diameters must be finite")
    if np.any(d <= 0):
        raise ParameterError("diameters must be positive")
    b0 = np.asarray(starts, dtype=float).ravel()
    if b0.size != 3 or not np.all(np.isfinite(b0)):
        raise ParameterError("starts must hold three finite values")

    def resid(b):
        with np.errstate(all="ignore"):
            hh, _ = fn(d, *b)
        r = BREAST_HEIGHT + hh - h
        return np.where(np.isfinite(r), r, 1e150)

    def jac(b):
        with np.errstate(all="ignore"):
            _, J = fn(d, *b)
        return np.where(np.isfinite(J), J, 0.0)

    if not np.all(np.isfinite(resid(b0)) & (np.abs(resid(b0)) < 1e150)):
        raise ParameterError(f"starts {tuple(b0)} give undefined heights for model {name!r}")
    res = optimize.least_squares(resid, b0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15,
                                 gtol=1e-15, max_nfev=MAX_ITER)
    if res.status == 0 or not np.all(np.isfinite(res.x)):
        raise ConvergenceError(f"{name}: no convergence in {MAX_ITER} iterations",
                               last=tuple(res.x), iterations=int(res.nfev))
    b = res.x
    # LM stops on relative cost reduction, which leaves b off by about
    # sqrt(ftol); a few Gauss-Newton steps reach the optimum to rounding.
    f = resid(b)
    for _ in range(5):
        step = np.linalg.lstsq(jac(b), -f, rcond=None)[0]
        cand = b + step
        fc = resid(cand)
        if not fc @ fc <= (f @ f) * (1.0 + 1e-12):
            break
        b, f = cand, fc
        if np.all(np.abs(step) <= 1e-15 * np.maximum(np.abs(b), 1.0)):
            break
    r = -f
    J = jac(b)
    n = h.size
    dof = n - 3
    rss = float(r @ r)
    s2 = rss / dof
    JtJ = J.T @ J
    # Scale columns before the condition check so units do not matter.
    norms = np.sqrt(np.diag(JtJ))
    if np.any(norms == 0) or not np.all(np.isfinite(JtJ)):
        bad = int(np.argmin(norms))
        raise EstimationError(f"{name}: J'J is singular at the optimum (beta{bad + 1} has no effect)")
    C = JtJ / np.outer(norms, norms)
    w, V = np.linalg.eigh(C)
    if w[0] <= 1e-13 * w[-1]:
        bad = int(np.argmax(np.abs(V[:, 0])))
        raise EstimationError(f"{name}: J'J is singular at the optimum (beta{bad + 1} is not identified)")
    cov_u = np.linalg.inv(C) / np.outer(norms, norms)
    cov_u = 0.5 * (cov_u + cov_u.T)
    vc = s2 * cov_u
    se = np.sqrt(np.diag(vc))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = b / se
    p = 2.0 * stats.t.sf(np.abs(t), dof)
    return GrowthFit(name, b, se, t, p, r, vc, cov_u, math.sqrt(s2), dof, int(res.nfev))

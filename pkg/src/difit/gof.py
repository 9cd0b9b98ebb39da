"""Goodness-of-fit measures attached to every fitted model."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import distributions as dist

__all__ = [
    "DegenerateSampleError",
    "EdfStats",
    "GofBlock",
    "edf_statistics",
    "edf_statistics_cdf",
    "grouped_chi_square",
    "grouped_edf_statistics",
    "information_criteria",
]

_CLAMP = 1e-12


class DegenerateSampleError(ValueError):
    """Sample too small (or too uniform) for the requested statistic."""


@dataclass
class GofBlock:
    log_likelihood: float
    aic: Optional[float] = None
    caic: Optional[float] = None
    bic: Optional[float] = None
    hqic: Optional[float] = None
    ad: Optional[float] = None
    cvm: Optional[float] = None
    ks: Optional[float] = None
    chi_square: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("diagnostics")
        return d


class EdfStats(NamedTuple):
    ad: float
    cvm: float
    ks: float
    clamped: bool


def information_criteria(loglik: float, k: int, n: int) -> tuple[float, float, float, float]:
    """Return ``(aic, caic, bic, hqic)``.

    CAIC is the small-sample corrected AIC, ``aic + 2k(k+1)/(n-k-1)``.
    """
    if n <= k + 1:
        raise DegenerateSampleError(f"need n > k + 1 for information criteria (n={n}, k={k})")
    aic = 2.0 * k - 2.0 * loglik
    caic = aic + 2.0 * k * (k + 1) / (n - k - 1)
    bic = k * math.log(n) - 2.0 * loglik
    hqic = 2.0 * k * math.log(math.log(n)) - 2.0 * loglik
    return aic, caic, bic, hqic


def edf_statistics_cdf(data, cdf_fn: Callable, weights=None) -> EdfStats:
    """Anderson-Darling, Cramer-von Mises and Kolmogorov-Smirnov statistics.

    ``cdf_fn`` maps an array of points to the fitted CDF.  Integer
    ``weights`` expand each point into that many tied observations.
    """
    x = np.asarray(data, dtype=float).ravel()
    if weights is not None:
        x = np.repeat(x, np.asarray(weights, dtype=int))
    n = x.size
    if n == 0:
        raise DegenerateSampleError("EDF statistics need at least one observation")
    x = np.sort(x, kind="stable")
    u = np.asarray(cdf_fn(x), dtype=float)
    clamped = bool(np.any((u <= 0.0) | (u >= 1.0)))
    u = np.clip(u, _CLAMP, 1.0 - _CLAMP)
    i = np.arange(1, n + 1)
    ad = -n - np.sum((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1]))) / n
    cvm = 1.0 / (12 * n) + np.sum((u - (2 * i - 1) / (2.0 * n)) ** 2)
    ks = max(np.max(i / n - u), np.max(u - (i - 1) / n))
    return EdfStats(float(ad), float(cvm), float(ks), clamped)


def edf_statistics(data, family, params) -> EdfStats:
    fam = dist.get_family(family)
    p = fam.normalize(params)
    return edf_statistics_cdf(data, lambda t: dist.cdf(fam, p, t))


def _class_probs(r, cdf_fn):
    F = np.asarray(cdf_fn(np.asarray(r, dtype=float)), dtype=float)
    F[0] = 0.0
    F[-1] = 1.0
    return np.diff(F)


def grouped_chi_square(grp, cdf_fn) -> tuple[float, bool]:
    """Pearson chi-square of class frequencies against the fitted model.

    Tail mass below ``r[0]`` and above ``r[-1]`` is folded into the first and
    last class.  Classes with probability below 1e-12 are merged with their
    neighbour; the second return value reports whether that happened.
    """
    f = np.asarray(grp.f, dtype=float)
    n = f.sum()
    if n <= 0:
        raise DegenerateSampleError("grouped data have zero total frequency")
    p = _class_probs(grp.r, cdf_fn)
    merged = False
    p_list, f_list = list(p), list(f)
    i = 0
    while i < len(p_list) and len(p_list) > 1:
        if p_list[i] < _CLAMP:
            pi, fi = p_list.pop(i), f_list.pop(i)
            j = i if i < len(p_list) else i - 1
            p_list[j] += pi
            f_list[j] += fi
            merged = True
            i = 0
            continue
        i += 1
    p = np.array(p_list)
    f = np.array(f_list)
    chi = float(np.sum((f - n * p) ** 2 / (n * p)))
    return chi, merged


def grouped_edf_statistics(grp, cdf_fn) -> EdfStats:
    """EDF statistics for a frequency table.

    AD and CVM treat each observation as sitting at its class midpoint.
    KS compares the cumulative relative frequencies with the fitted CDF at
    the class boundaries, the only points where the empirical CDF is known.
    """
    r = np.asarray(grp.r, dtype=float)
    f = np.asarray(grp.f, dtype=float)
    mids = 0.5 * (r[:-1] + r[1:])
    e = edf_statistics_cdf(mids, cdf_fn, weights=f)
    emp = np.concatenate([[0.0], np.cumsum(f) / f.sum()])
    ks = float(np.max(np.abs(np.asarray(cdf_fn(r), dtype=float) - emp)))
    return EdfStats(e.ad, e.cvm, ks, e.clamped)

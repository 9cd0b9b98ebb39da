"""Diameter-distribution and height-diameter fitting for forest inventory data."""

from .bayes import BayesFit, McmcConfig, fit_bayes_jsb, fit_bayes_weibull
from .distributions import FAMILIES, cdf, get_family, logpdf, pdf, quantile, sample
from .errors import ConvergenceError, EstimationError, ParameterError
from .gof import DegenerateSampleError, GofBlock, information_criteria
from .grouped import GroupedFit, GroupedSample, fit_grouped, group, grouped_loglik
from .growth import GROWTH_MODELS, GrowthFit, fit_growth, predict_height
from .gsm import GsmFit, GsmSpec, fit_gsm, gsm_cdf, gsm_pdf, gsm_sample
from .io import DataError, load_dbh, load_dbh_pairs, load_grouped, load_sample
from .mixture import (
    MixtureFit,
    MixtureSpec,
    fit_mixture,
    fit_mixture_grouped,
    mixture_cdf,
    mixture_pdf,
    mixture_quantile,
    mixture_sample,
)
from .weibull import WeibullFit, fit_weibull

__version__ = "0.1.0"

__all__ = [
    "BayesFit", "ConvergenceError", "DataError", "DegenerateSampleError", "EstimationError",
    "FAMILIES", "GROWTH_MODELS", "GofBlock", "GroupedFit", "GroupedSample", "GrowthFit",
    "GsmFit", "GsmSpec", "McmcConfig", "MixtureFit", "MixtureSpec", "ParameterError",
    "WeibullFit", "cdf", "fit_bayes_jsb", "fit_bayes_weibull", "fit_growth", "fit_grouped",
    "fit_gsm", "fit_mixture", "fit_mixture_grouped", "fit_weibull", "get_family", "group",
    "grouped_loglik", "gsm_cdf", "gsm_pdf", "gsm_sample", "information_criteria",
    "load_dbh", "load_dbh_pairs", "load_grouped", "load_sample", "logpdf", "mixture_cdf",
    "mixture_pdf", "mixture_quantile", "mixture_sample", "pdf", "predict_height", "quantile",
    "sample",
]

import math

import numpy as np
import pytest
from scipy import special

from difit import distributions as dist
from difit.bayes import PRIOR_IG, McmcConfig, fit_bayes_jsb, fit_bayes_weibull
from difit.errors import ParameterError

SHORT = McmcConfig(n_simul=3000, n_burn=2000, seed=1)


@pytest.fixture(scope="module")
def wdata():
    return dist.sample("weibull", (2.0, 10.0, 5.0), 2000, 0)


@pytest.fixture(scope="module")
def jdata():
    return dist.sample("jsb", (1.0, 0.5, 20.0, 5.0), 1000, 0)


def test_config_validation():
    with pytest.raises(ParameterError):
        McmcConfig(n_simul=100, n_burn=100)
    with pytest.raises(ParameterError):
        McmcConfig(n_simul=100, n_burn=0)


def test_weibull_recovery(wdata):
    fit = fit_bayes_weibull(wdata, SHORT)
    np.testing.assert_allclose(fit.estimate, (2.0, 10.0, 5.0), rtol=0.05)
    assert np.all(fit.traces["mu"] < wdata.min())
    assert np.all(fit.traces["mu"] > 0)
    assert not fit.warnings


def test_weibull_estimate_is_trace_mean(wdata):
    fit = fit_bayes_weibull(wdata, SHORT)
    assert len(fit.traces["alpha"]) == SHORT.n_simul - SHORT.n_burn
    np.testing.assert_allclose(fit.estimate, [t.mean() for t in fit.traces.values()], rtol=1e-14)
    assert fit.measures.log_likelihood == pytest.approx(
        float(np.sum(dist.logpdf("weibull", fit.estimate, wdata))))


def test_weibull_same_seed_same_chain(wdata):
    a = fit_bayes_weibull(wdata, SHORT)
    b = fit_bayes_weibull(wdata, SHORT)
    for k in a.traces:
        assert np.array_equal(a.traces[k], b.traces[k])
    c = fit_bayes_weibull(wdata, McmcConfig(3000, 2000, seed=2))
    assert not np.array_equal(a.traces["alpha"], c.traces["alpha"])


def test_jsb_recovery(jdata):
    fit = fit_bayes_jsb(jdata, McmcConfig(4000, 3000, seed=0))
    d, g, lam, xi = fit.estimate
    assert d == pytest.approx(1.0, rel=0.1)
    assert lam == pytest.approx(20.0, rel=0.1)
    assert xi == pytest.approx(5.0, abs=0.5)
    assert g == pytest.approx(0.5, abs=0.15)
    assert np.all(fit.traces["xi"] < jdata.min())
    assert np.all(fit.traces["xi"] + fit.traces["lambda"] > jdata.max())


def test_jsb_fixed_bounds_matches_conjugate_posterior(jdata):
    lam, xi = 20.0, 5.0
    cfg = McmcConfig(n_simul=22000, n_burn=2000, seed=3)
    fit = fit_bayes_jsb(jdata, cfg, fixed=(lam, xi))
    u = (jdata - xi) / lam
    y = np.log(u / (1 - u))
    n = y.size
    a = PRIOR_IG[0] + (n - 1) / 2
    b = PRIOR_IG[1] + np.sum((y - y.mean()) ** 2) / 2
    # sigma^-2 ~ Gamma(a, rate b): E[delta] = Gamma(a + 1/2) / Gamma(a) / sqrt(b).
    e_delta = math.exp(special.gammaln(a + 0.5) - special.gammaln(a)) / math.sqrt(b)
    e_gamma = -y.mean() * e_delta
    draws = cfg.n_simul - cfg.n_burn
    sd_delta = math.sqrt(a / b - e_delta**2)
    assert fit.estimate[0] == pytest.approx(e_delta, abs=5 * sd_delta / math.sqrt(draws))
    assert fit.estimate[1] == pytest.approx(e_gamma, abs=5e-3)
    assert fit.estimate[2:] == (lam, xi)
    assert fit.acceptance == {}


def test_jsb_fixed_bounds_must_bracket(jdata):
    with pytest.raises(ParameterError):
        fit_bayes_jsb(jdata, SHORT, fixed=(1.0, 5.0))


def test_report(wdata):
    d = fit_bayes_weibull(wdata, SHORT).to_dict()
    assert set(d["estimate"]) == {"alpha", "beta", "mu"}
    assert d["seed"] == 1 and d["n_burn"] == 2000
    assert set(d["acceptance"]) == {"alpha", "mu"}


def test_bad_data():
    with pytest.raises(ParameterError):
        fit_bayes_weibull([1.0, 2.0, 3.0], SHORT)
    with pytest.raises(ParameterError):
        fit_bayes_weibull(np.linspace(-1, 5, 20), SHORT)

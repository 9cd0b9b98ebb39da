import numpy as np
import pytest
from scipy import integrate, optimize, special, stats

from difit.errors import ParameterError
from difit.gsm import GsmSpec, fit_gsm, gsm_cdf, gsm_pdf, gsm_sample
from difit.mixture import MixtureSpec, mixture_pdf

SPEC = GsmSpec([0.1, 0.3, 0.0, 0.4, 0.2], 0.8)


def test_exponential_reduction():
    s = GsmSpec([1.0, 0.0, 0.0], 0.25)
    assert gsm_pdf(s, 0.0) == pytest.approx(0.25)
    x = np.linspace(0, 20, 7)
    np.testing.assert_allclose(gsm_cdf(s, x), stats.expon(scale=4).cdf(x), rtol=1e-14)


@pytest.mark.parametrize("spec", [SPEC, GsmSpec(np.full(10, 0.1), 0.25), GsmSpec([1.0], 3.0)])
def test_pdf_normalizes(spec):
    total, _ = integrate.quad(lambda t: gsm_pdf(spec, t), 0, np.inf, limit=400)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_cdf_is_integral_of_pdf():
    for x in (0.3, 2.0, 7.5):
        val, _ = integrate.quad(lambda t: gsm_pdf(SPEC, t), 0, x)
        assert gsm_cdf(SPEC, x) == pytest.approx(val, abs=1e-10)


def test_tails_complement():
    x = np.linspace(0, 30, 50)
    np.testing.assert_allclose(gsm_cdf(SPEC, x) + gsm_cdf(SPEC, x, lower_tail=False), 1.0,
                               atol=1e-12)


def test_log_flags():
    x = np.array([0.5, 3.0, 12.0])
    np.testing.assert_allclose(gsm_pdf(SPEC, x, log=True), np.log(gsm_pdf(SPEC, x)), rtol=1e-12)
    np.testing.assert_allclose(gsm_cdf(SPEC, x, log_p=True), np.log(gsm_cdf(SPEC, x)), rtol=1e-12)
    assert gsm_pdf(SPEC, -1.0) == 0.0
    assert gsm_pdf(SPEC, -1.0, log=True) == -np.inf


def test_equals_gamma_mixture():
    K = SPEC.K
    keep = SPEC.omega > 0
    m = MixtureSpec("gamma", SPEC.omega[keep],
                    [(j, 1 / SPEC.beta) for j in np.arange(1, K + 1)[keep]])
    x = np.linspace(0.01, 25, 60)
    np.testing.assert_allclose(gsm_pdf(SPEC, x), mixture_pdf(m, x), rtol=1e-12)


def test_sampler_matches_cdf():
    x = gsm_sample(SPEC, 4000, 1)
    assert stats.kstest(x, lambda t: gsm_cdf(SPEC, t)).pvalue > 1e-3


def test_spec_validation():
    with pytest.raises(ParameterError):
        GsmSpec([0.5, 0.5], 0.0)
    with pytest.raises(ParameterError):
        GsmSpec([1.2, -0.2], 1.0)
    with pytest.raises(ParameterError):
        GsmSpec([0.5, 0.4], 1.0)


def test_k1_closed_form():
    x = gsm_sample(GsmSpec([1.0], 0.5), 300, 0)
    fit = fit_gsm(x, 1)
    assert fit.beta == pytest.approx(1 / x.mean(), rel=1e-12)
    assert fit.omega.tolist() == [1.0]


@pytest.mark.parametrize("seed", range(20))
def test_em_trace_is_monotone(seed):
    K = 2 + seed % 4
    w = np.random.default_rng(seed).dirichlet(np.ones(K))
    x = gsm_sample(GsmSpec(w, 0.5), 400, seed)
    fit = fit_gsm(x, K)
    trace = np.asarray(fit.loglik_trace)
    assert np.all(np.diff(trace) >= -1e-9)
    assert fit.omega.sum() == pytest.approx(1.0, abs=1e-12)
    assert fit.beta > 0


def test_plain_em_also_monotone():
    x = gsm_sample(SPEC, 300, 3)
    fit = fit_gsm(x, 5, accelerate=False, max_iter=200000, tol=1e-6)
    assert np.all(np.diff(fit.loglik_trace) >= -1e-9)


def test_fit_is_a_likelihood_maximum():
    x = gsm_sample(SPEC, 2000, 2)
    fit = fit_gsm(x, 5)
    j = np.arange(1, 6)

    def nll(u):
        w = special.softmax(u[:5])
        b = np.exp(u[5])
        dens = stats.gamma.pdf(x[:, None], j, scale=1 / b) @ w
        return -np.sum(np.log(dens))

    u0 = np.append(np.log(np.maximum(SPEC.omega, 1e-3)), np.log(SPEC.beta))
    ref = optimize.minimize(nll, u0, method="BFGS", options={"gtol": 1e-8})
    assert fit.measures.log_likelihood >= -ref.fun - 1e-6


def test_recovered_density_is_close():
    truth = GsmSpec(np.full(10, 0.1), 0.25)
    fit = fit_gsm(gsm_sample(truth, 10_000, 0), 10)
    grid = np.linspace(0, 100, 2001)
    assert np.max(np.abs(gsm_pdf(fit.estimate, grid) - gsm_pdf(truth, grid))) < 0.01


def test_measures_use_k_plus_one():
    x = gsm_sample(SPEC, 500, 4)
    m = fit_gsm(x, 5).measures
    assert m.aic == pytest.approx(2 * 6 - 2 * m.log_likelihood)
    assert m.bic == pytest.approx(6 * np.log(500) - 2 * m.log_likelihood)


def test_bad_data():
    with pytest.raises(ParameterError):
        fit_gsm([1.0, -2.0, 3.0], 2)
    with pytest.raises(ParameterError):
        fit_gsm([1.0, 2.0, 3.0], 0)

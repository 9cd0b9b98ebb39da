import math

import numpy as np
import pytest
from scipy import optimize, special, stats

from difit import distributions as dist
from difit.errors import EstimationError, ParameterError
from difit.weibull import (
    THREE_PARAM_METHODS,
    TWO_PARAM_METHODS,
    fit_weibull,
    mps_objective,
    weibull_loglik,
)


@pytest.fixture(scope="module")
def two():
    return dist.sample("weibull", (2.0, 10.0), 300, 11)


@pytest.fixture(scope="module")
def three():
    return dist.sample("weibull", (2.0, 10.0, 3.0), 300, 1)


def g(k, a):
    return special.gamma(1 + k / a)


def test_ml_matches_scipy(two):
    c, _, scale = stats.weibull_min.fit(two, floc=0)
    f = fit_weibull(two, method="ml")
    assert f.alpha == pytest.approx(c, rel=1e-5)
    assert f.beta == pytest.approx(scale, rel=1e-5)
    assert f.measures.log_likelihood == pytest.approx(
        stats.weibull_min(c, scale=scale).logpdf(two).sum(), abs=1e-6)


def test_moment_reproduces_sample_moments(two):
    f = fit_weibull(two, method="moment")
    assert f.beta * g(1, f.alpha) == pytest.approx(two.mean(), rel=1e-9)
    var = f.beta**2 * (g(2, f.alpha) - g(1, f.alpha) ** 2)
    assert var == pytest.approx(two.var(ddof=1), rel=1e-7)


def test_lm_reproduces_l_moments(two):
    xs = np.sort(two)
    n = xs.size
    # Pairwise-difference form of the second sample L-moment.
    l2 = np.sum(np.subtract.outer(xs, xs)[np.triu_indices(n, 1)[::-1]]) / (n * (n - 1))
    f = fit_weibull(two, method="lm")
    assert f.beta * g(1, f.alpha) == pytest.approx(xs.mean(), rel=1e-9)
    assert f.beta * (1 - 2 ** (-1 / f.alpha)) * g(1, f.alpha) == pytest.approx(l2, rel=1e-9)


def test_pm_hits_sample_quartiles(two):
    f = fit_weibull(two, method="pm")
    q = np.quantile(two, [0.25, 0.75], method="weibull")
    np.testing.assert_allclose(dist.cdf("weibull", (f.alpha, f.beta), q), [0.25, 0.75], rtol=1e-9)


def test_reg_is_least_squares_line(two):
    xs = np.sort(two)
    n = xs.size
    F = (np.arange(1, n + 1) - 0.375) / (n + 0.25)
    slope, icpt = np.polyfit(np.log(xs), np.log(-np.log1p(-F)), 1)
    f = fit_weibull(two, method="reg")
    assert f.alpha == pytest.approx(slope, rel=1e-9)
    assert f.beta == pytest.approx(math.exp(-icpt / slope), rel=1e-9)


def test_rank_maximizes_correlation(two):
    xs = np.sort(two)
    n = xs.size
    F = (np.arange(1, n + 1) - 0.375) / (n + 0.25)
    e = -np.log1p(-F)
    f = fit_weibull(two, method="rank")

    def corr(a):
        return np.corrcoef(xs, e ** (1 / a))[0, 1]

    assert corr(f.alpha) >= max(corr(f.alpha * 1.01), corr(f.alpha / 1.01))


@pytest.mark.parametrize("method", TWO_PARAM_METHODS)
def test_two_param_recovery(method):
    x = dist.sample("weibull", (2.0, 10.0), 10_000, 3)
    f = fit_weibull(x, method=method)
    assert f.alpha == pytest.approx(2.0, rel=0.05)
    assert f.beta == pytest.approx(10.0, rel=0.05)
    assert f.mu == 0.0 and f.measures.aic is not None


def _nll(p, x):
    a, b, mu = p
    if a <= 0 or b <= 0 or mu >= x.min():
        return np.inf
    return -stats.weibull_min(a, loc=mu, scale=b).logpdf(x).sum()


def test_three_param_mle_is_a_maximum(three):
    f = fit_weibull(three, location=True, method="mle")
    ref = optimize.minimize(_nll, (2.0, 10.0, 3.0), args=(three,), method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
    assert f.measures.log_likelihood >= -ref.fun - 1e-6
    np.testing.assert_allclose(f.estimate, ref.x, rtol=1e-3)


def _mps_oracle(p, xs):
    a, b, mu = p
    if a <= 0 or b <= 0 or mu >= xs[0]:
        return -np.inf
    F = np.concatenate([[0.0], stats.weibull_min(a, loc=mu, scale=b).cdf(xs), [1.0]])
    return np.mean(np.log(np.diff(F)))


def test_mps_objective_matches_definition(three):
    xs = np.sort(three)
    for p in [(2.0, 10.0, 3.0), (1.5, 8.0, 2.0), (3.0, 12.0, 0.0)]:
        assert mps_objective(xs, *p) == pytest.approx(_mps_oracle(p, xs), rel=1e-10)


def test_mps_is_a_maximum(three):
    xs = np.sort(three)
    f = fit_weibull(three, location=True, method="mps")
    ref = optimize.minimize(lambda p: -_mps_oracle(p, xs), (2.0, 10.0, 3.0), method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 20000})
    assert _mps_oracle(f.estimate, xs) >= -ref.fun - 1e-9


@pytest.mark.parametrize("method", ["mm1", "mm2", "mm3"])
def test_modified_moments_match_mean_and_variance(three, method):
    f = fit_weibull(three, location=True, method=method)
    a, b, mu = f.estimate
    assert mu + b * g(1, a) == pytest.approx(three.mean(), rel=1e-9)
    assert b * b * (g(2, a) - g(1, a) ** 2) == pytest.approx(three.var(ddof=1), rel=1e-7)


def test_mml3_matches_mean(three):
    a, b, mu = fit_weibull(three, location=True, method="mml3").estimate
    assert mu + b * g(1, a) == pytest.approx(three.mean(), rel=1e-8)


def test_mml4_matches_variance(three):
    a, b, mu = fit_weibull(three, location=True, method="mml4").estimate
    assert b * b * (g(2, a) - g(1, a) ** 2) == pytest.approx(three.var(ddof=1), rel=1e-7)


@pytest.mark.parametrize("method", THREE_PARAM_METHODS)
def test_three_param_location_below_minimum(three, method):
    f = fit_weibull(three, location=True, method=method)
    assert f.mu < three.min()
    assert f.alpha == pytest.approx(2.0, rel=0.25)
    assert f.measures.log_likelihood == pytest.approx(weibull_loglik(three, *f.estimate))


def test_three_param_recovery_large_n():
    x = dist.sample("weibull", (2.0, 10.0, 5.0), 10_000, 2)
    f = fit_weibull(x, location=True, method="mle")
    np.testing.assert_allclose(f.estimate, (2.0, 10.0, 5.0), rtol=0.05)


def test_infeasible_root_is_reported():
    x = dist.sample("weibull", (2.0, 10.0, 3.0), 300, 2)
    with pytest.raises(EstimationError, match="mm3"):
        fit_weibull(x, location=True, method="mm3")


def test_bad_inputs():
    with pytest.raises(ParameterError):
        fit_weibull([1, 1, 1, 1, 1, 1])
    with pytest.raises(ParameterError):
        fit_weibull([-1.0, 1, 2, 3, 4, 5])
    with pytest.raises(ParameterError, match="two-parameter"):
        fit_weibull([1.0, 2, 3, 4, 5, 6], method="mps")
    with pytest.raises(ParameterError, match="three-parameter"):
        fit_weibull([1.0, 2, 3, 4, 5, 6], location=True, method="ml")


def test_report_shape(two):
    d = fit_weibull(two).to_dict()
    assert set(d) == {"estimate", "measures", "method", "location", "converged", "iterations"}
    assert set(d["estimate"]) == {"alpha", "beta", "mu"}


def test_mps_from_distant_starts():
    # Starts whose scale puts almost every spacing deep in the upper tail.
    x = dist.sample("weibull", (1.3, 18.0, 12.0), 31, 1)
    far = fit_weibull(x, location=True, method="mps", starts=(2, 2, 3))
    near = fit_weibull(x, location=True, method="mps")
    np.testing.assert_allclose(far.estimate, near.estimate, rtol=1e-6)

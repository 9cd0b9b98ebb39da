import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from difit import gof
from difit.grouped import GroupedSample


@settings(max_examples=50)
@given(ll=st.floats(-1e4, 1e4), k=st.integers(1, 8), extra=st.integers(2, 500))
def test_information_criteria_formulas(ll, k, extra):
    n = k + extra
    aic, caic, bic, hqic = gof.information_criteria(ll, k, n)
    assert aic == pytest.approx(2 * k - 2 * ll)
    assert caic - aic == pytest.approx(2 * k * (k + 1) / (n - k - 1))
    assert bic == pytest.approx(k * math.log(n) - 2 * ll)
    assert hqic == pytest.approx(2 * k * math.log(math.log(n)) - 2 * ll)


def test_information_criteria_needs_room():
    with pytest.raises(gof.DegenerateSampleError):
        gof.information_criteria(-1.0, 3, 4)


def _ad_by_quadrature(u):
    """n * integral of (Fn - F)^2 / (F (1 - F)) dF on the probability scale."""
    u = np.sort(u)
    n = u.size
    knots = np.concatenate([[0.0], u, [1.0]])
    total = 0.0
    for i in range(n + 1):
        fn = i / n
        val, _ = integrate.quad(lambda t: (fn - t) ** 2 / (t * (1 - t)), knots[i], knots[i + 1])
        total += val
    return n * total


def test_edf_statistics_against_independent_oracles():
    rng = np.random.default_rng(0)
    x = rng.gamma(3.0, 2.0, 40)
    ref = stats.gamma(3.2, scale=1.9)
    e = gof.edf_statistics_cdf(x, ref.cdf)
    assert e.ks == pytest.approx(stats.kstest(x, ref.cdf).statistic, rel=1e-12)
    assert e.cvm == pytest.approx(stats.cramervonmises(x, ref.cdf).statistic, rel=1e-10)
    assert e.ad == pytest.approx(_ad_by_quadrature(ref.cdf(x)), rel=1e-6)
    assert not e.clamped


def test_edf_clamps_and_flags():
    e = gof.edf_statistics_cdf([1.0, 2.0, 3.0], lambda t: np.where(t < 2.5, 0.0, 1.0))
    assert e.clamped
    assert math.isfinite(e.ad)


def test_weights_expand_ties():
    cdf = stats.norm.cdf
    a = gof.edf_statistics_cdf([0.1, 0.5], cdf, weights=[2, 3])
    b = gof.edf_statistics_cdf([0.1, 0.1, 0.5, 0.5, 0.5], cdf)
    assert a == b


def test_grouped_chi_square_hand_computed():
    grp = GroupedSample([0.0, 1.0, 2.0, 3.0], [5, 3, 2])
    cdf = stats.expon(scale=1.2).cdf
    p = np.diff(cdf(np.array([0.0, 1.0, 2.0, np.inf])))
    expected = np.sum((np.array([5, 3, 2]) - 10 * p) ** 2 / (10 * p))
    chi, merged = gof.grouped_chi_square(grp, cdf)
    assert chi == pytest.approx(expected, rel=1e-12)
    assert not merged


def test_grouped_chi_square_merges_empty_classes():
    grp = GroupedSample([0.0, 1.0, 2.0, 50.0, 60.0], [5, 3, 2, 0])
    chi, merged = gof.grouped_chi_square(grp, stats.uniform(0, 2.0).cdf)
    assert merged and math.isfinite(chi)


def test_grouped_ks_uses_boundaries():
    grp = GroupedSample([0.0, 1.0, 2.0], [4, 6])
    e = gof.grouped_edf_statistics(grp, stats.uniform(0, 2.0).cdf)
    # Empirical CDF at r = (0, 0.4, 1) against (0, 0.5, 1).
    assert e.ks == pytest.approx(0.1)

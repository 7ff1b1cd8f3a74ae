import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from services.errors import DomainError, HypothesisWarning, RangeError, ShapeError
from services.profile import (
    ConcentrationProfile,
    ProductSpec,
    Regime,
    breakpoints,
    entrywise_product_profile,
    factor_profile,
    hanson_wright_profile,
    high_order_profile,
    indexed_product_profile,
    norm_degree,
    nu_superscript,
    power_profile,
    product_profile,
    regime_dominance,
    xdy_action_profile,
)


def brute_force(nu, k):
    return max((math.prod(s) for s in itertools.combinations(nu, k)), default=1.0)


# ── nu_superscript ────────────────────────────────────────────────────────────


@settings(max_examples=200, deadline=None)
@given(
    nu=st.lists(st.floats(min_value=0.01, max_value=10.0), min_size=1, max_size=8),
    data=st.data(),
)
def test_nu_superscript_matches_subset_enumeration(nu, data):
    k = data.draw(st.integers(min_value=0, max_value=len(nu)))
    expected = brute_force(nu, k)
    assert nu_superscript(nu, k) == pytest.approx(expected, rel=1e-12)


def test_nu_superscript_edges():
    assert nu_superscript([3.0, 2.0], 0) == 1.0
    assert nu_superscript([3.0, 2.0, 5.0], 2) == 15.0
    with pytest.raises(RangeError):
        nu_superscript([1.0, 2.0], 3)
    with pytest.raises(RangeError):
        nu_superscript([1.0], -1)


@settings(max_examples=200, deadline=None)
@given(nu=st.lists(st.floats(min_value=0.01, max_value=10.0), min_size=1, max_size=8))
def test_nu_superscript_telescopes(nu):
    ascending = sorted(nu)
    m = len(nu)
    for k in range(m):
        expected = nu_superscript(nu, k) * ascending[m - k - 1]
        assert nu_superscript(nu, k + 1) == pytest.approx(expected, rel=1e-12)


# ── product profiles ──────────────────────────────────────────────────────────

distinct_mu = st.lists(st.integers(min_value=5, max_value=30), min_size=2, max_size=6, unique=True).map(
    lambda values: tuple(v / 10 for v in values)
)


@settings(max_examples=100, deadline=None)
@given(mu=distinct_mu)
def test_breakpoints_increase_for_distinct_mu(mu):
    t = breakpoints(ProductSpec(len(mu), 2.0, 1.0, mu))
    assert t[0] == 0.0
    assert math.isinf(t[-1])
    assert np.all(np.diff(t) > 0)


@settings(max_examples=100, deadline=None)
@given(mu=distinct_mu)
def test_each_regime_dominates_between_its_breakpoints(mu):
    spec = ProductSpec(len(mu), 2.0, 1.0, mu)
    profile = product_profile(spec)
    assert len(profile.regimes) == spec.m
    t, c = breakpoints(spec), profile.c
    points = [c * t[1] / 2]
    points += [c * math.sqrt(t[l - 1] * t[l]) for l in range(2, spec.m)]
    points += [2 * c * t[spec.m - 1]]
    assert profile.dominant_regime(np.array(points)).tolist() == list(range(spec.m))


def test_product_profile_regimes():
    spec = ProductSpec(3, 2.0, 1.5, (1.0, 2.0, 3.0))
    profile = product_profile(spec, C=3.0, c=0.5)
    assert profile.exponents == pytest.approx((2.0, 1.0, 2.0 / 3.0))
    # σ^l μ^{(m-l)}: 1.5·6, 1.5²·3, 1.5³
    assert profile.scales == pytest.approx((9.0, 6.75, 3.375))
    assert (profile.C, profile.c) == (3.0, 0.5)


def test_equal_mu_prunes_middle_regimes():
    profile = product_profile(ProductSpec(3, 2.0, 1.0, (1.0, 1.0, 1.0)))
    assert profile.exponents == pytest.approx((2.0, 2.0 / 3.0))


def test_product_spec_validation():
    with pytest.raises(RangeError):
        ProductSpec(2, 2.0, 1.0, (1.0,))
    with pytest.raises(RangeError):
        ProductSpec(2, 2.0, 1.0, (1.0, -1.0))
    with pytest.raises(RangeError):
        ProductSpec(0, 2.0, 1.0, ())


def test_high_order_profile_warns_without_hypothesis():
    spec = ProductSpec(2, 2.0, 1.0, (0.5, 0.6))
    with pytest.warns(HypothesisWarning):
        profile = high_order_profile(spec, kappa=1.0)
    assert profile.warnings


def test_high_order_profile_silent_when_hypothesis_holds():
    spec = ProductSpec(2, 2.0, 1.0, (3.0, 4.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        profile = high_order_profile(spec, kappa=2.0)
    assert profile.scales == pytest.approx(tuple(4.0 * s for s in product_profile(spec).scales))


# ── ConcentrationProfile ──────────────────────────────────────────────────────


def test_duplicate_exponents_keep_larger_scale():
    profile = ConcentrationProfile((Regime(1.0, 2.0), Regime(2.0, 1.0), Regime(1.0, 5.0)))
    assert profile.exponents == (2.0, 1.0)
    assert profile.scales == (1.0, 5.0)


@settings(max_examples=100, deadline=None)
@given(
    exponents=st.lists(st.floats(min_value=0.2, max_value=4.0), min_size=1, max_size=4),
    scale=st.floats(min_value=0.1, max_value=10.0),
    C=st.floats(min_value=1.0, max_value=10.0),
)
def test_tail_bound_is_one_at_zero_and_nonincreasing(exponents, scale, C):
    profile = ConcentrationProfile(tuple(Regime(q, scale) for q in exponents), C=C, c=1.0)
    assert profile.tail_bound(0.0) == 1.0
    values = profile.tail_bound(np.geomspace(1e-3, 1e3, 200))
    assert np.all(np.diff(values) <= 1e-15)


def test_tail_bound_rejects_negative_t():
    with pytest.raises(RangeError):
        ConcentrationProfile((Regime(2.0, 1.0),)).tail_bound(-1.0)


regime_lists = st.lists(
    st.tuples(
        st.sampled_from([0.25, 0.5, 2.0 / 3.0, 1.0, 1.5, 2.0, 3.0]),
        st.floats(min_value=0.1, max_value=10.0),
    ),
    min_size=1,
    max_size=5,
)


@settings(max_examples=100, deadline=None)
@given(
    regimes=regime_lists,
    C=st.floats(min_value=1.0, max_value=10.0),
    c=st.floats(min_value=0.2, max_value=5.0),
)
def test_moment_bound_is_log_convex_in_r(regimes, C, c):
    profile = ConcentrationProfile(tuple(Regime(q, s) for q, s in regimes), C=C, c=c)
    r = np.linspace(0.5, 12.0, 60)
    logs = np.array([math.log(profile.moment_bound(float(x))) for x in r])
    assert np.all(np.diff(logs, 2) >= -1e-9)


@settings(max_examples=100, deadline=None)
@given(regimes=regime_lists)
def test_pruning_leaves_the_tail_bound_unchanged(regimes):
    profile = ConcentrationProfile(tuple(Regime(q, s) for q, s in regimes), C=2.0, c=1.0)
    pruned = profile.pruned()
    assert set(pruned.regimes) <= set(profile.regimes)
    t = np.geomspace(1e-3, 1e3, 500)
    np.testing.assert_allclose(pruned.tail_bound(t), profile.tail_bound(t), rtol=0.0, atol=1e-12)


def test_profile_validation():
    with pytest.raises(RangeError):
        ConcentrationProfile(())
    with pytest.raises(RangeError):
        ConcentrationProfile((Regime(2.0, 1.0),), C=0.5)
    with pytest.raises(RangeError):
        Regime(0.0, 1.0)


def test_moment_bound_single_regime():
    profile = ConcentrationProfile((Regime(2.0, 3.0),), C=2.0, c=1.5)
    r = 4.0
    assert profile.moment_bound(r) == pytest.approx(2.0 * (r / 2) ** (r / 2) * (1.5 * 3.0) ** r)


def test_scaled_multiplies_every_scale():
    profile = hanson_wright_profile(3.0, 1.0).scaled(2.0)
    assert profile.scales == (6.0, 2.0)


def test_json_round_trip_is_exact():
    profile = product_profile(ProductSpec(3, 1.7, 0.3, (0.9, 1.1, 2.3)), C=2.5, c=0.7)
    assert ConcentrationProfile.from_json(profile.to_json()) == profile


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(DomainError):
        ConcentrationProfile.from_dict({"regimes": [], "C": 2, "c": 1, "extra": 0})


def test_union_merges_regimes():
    union = ConcentrationProfile((Regime(2.0, 1.0),)).union(ConcentrationProfile((Regime(1.0, 4.0),), C=3.0))
    assert union.exponents == (2.0, 1.0)
    assert union.C == 3.0


# ── catalogue ─────────────────────────────────────────────────────────────────


def test_hanson_wright_profile():
    profile = hanson_wright_profile(5.0, 2.0, K=2.0)
    assert profile.exponents == (2.0, 1.0)
    assert profile.scales == (20.0, 8.0)
    with pytest.raises(RangeError):
        hanson_wright_profile(0.0, 1.0)


def test_power_profile_regimes():
    profile = power_profile(q=2.0, sigma=1.0, mu0=1.0, m=3, epsilon=0.0, kappa=1.0)
    assert profile.exponents == pytest.approx((2.0, 2.0 / 3.0))
    assert profile.scales == pytest.approx((3.0, 1.0))


def test_xdy_action_profile_scales():
    profile = xdy_action_profile(100, 50)
    assert profile.exponents == pytest.approx((2.0, 1.0, 2.0 / 3.0))
    assert profile.scales[0] == pytest.approx(math.sqrt(150 * math.log(50)))


@pytest.mark.parametrize(
    "kind, p, n, expected",
    [
        ("euclidean", 64, 1, 64.0),
        ("linf", 100, 1, math.log(100)),
        ("spectral", 30, 20, 50.0),
        ("frobenius", 30, 20, 600.0),
        ("diag", 16, 16, 16.0),
    ],
)
def test_norm_degree(kind, p, n, expected):
    assert norm_degree(kind, p, n) == pytest.approx(expected)


def test_norm_degree_unknown_kind():
    with pytest.raises(DomainError):
        norm_degree("max", 3)


def test_norm_degree_domain():
    assert norm_degree("linf", 2) == pytest.approx(math.log(2))
    with pytest.raises(RangeError):
        norm_degree("linf", 1)
    with pytest.raises(RangeError):
        norm_degree("euclidean", 0)
    with pytest.raises(ShapeError):
        norm_degree("diag", 5, 1)


def test_indexed_product_profile_reads_mu_off_the_degrees():
    profile = indexed_product_profile(2.0, 1.0, [4.0, 9.0])
    assert profile == product_profile(ProductSpec(2, 2.0, 1.0, (2.0, 3.0)))
    assert profile.scales == pytest.approx((3.0, 1.0))


def test_entrywise_product_profile_uses_log_p():
    mu = math.log(100) ** 0.5
    assert entrywise_product_profile(100, 3) == product_profile(ProductSpec(3, 2.0, 1.0, (mu,) * 3))
    with pytest.raises(RangeError):
        entrywise_product_profile(1, 2)


def test_factor_profile_forms():
    spec = ProductSpec(3, 2.0, 2.0, (1.0, 2.0, 4.0))
    full, bound = factor_profile(spec)
    reduced, _ = factor_profile(spec, reduced=True)
    assert bound == pytest.approx(8.0)
    assert full.exponents == pytest.approx((2.0, 1.0))
    # σ^l μ^{(m-1-l)} and σ^l μ^{(m-l)} / μ_(m)
    assert full.scales == pytest.approx((8.0, 4.0))
    assert reduced.scales == pytest.approx((4.0, 4.0))
    with pytest.raises(RangeError):
        factor_profile(ProductSpec(2, 2.0, 1.0, (0.5, 2.0)))
    with pytest.raises(RangeError):
        factor_profile(ProductSpec(1, 2.0, 1.0, (1.0,)))


def test_regime_dominance_switches_at_the_crossing():
    profile = hanson_wright_profile(3.0, 1.0).with_constants(2.0, 1.0)
    assert regime_dominance(profile, np.array([0.5, 20.0])).tolist() == [0, 1]

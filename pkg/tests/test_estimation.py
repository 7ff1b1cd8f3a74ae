import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import config
from services.errors import DomainError, InsufficientDataError, RangeError, WindowError
from services.estimation import (
    EmpiricalTail,
    ball_norm_mean,
    check_profile,
    chi_square_centered_tail,
    dkw_band,
    empirical_tail,
    fit_piecewise,
    fit_tail_exponent,
    gaussian_norm_mean,
    gaussian_product_tail,
    gaussian_two_sided_tail,
    norm_expectation_check,
    observable_diameter,
    observation_spreads,
)
from services.generators import MatrixModel, VectorModel, sample, sample_matrix
from services.observables import Observation, observe
from services.profile import ConcentrationProfile, Regime


def synthetic_tail(q, scale=1.0, C=1.0, N=10**6):
    t = np.geomspace(0.05, 10.0, 400)
    alpha = np.minimum(1.0, C * np.exp(-((t / scale) ** q)))
    return EmpiricalTail(t, alpha, 0.0, "median", N, dkw_band(N))


# ── oracles ───────────────────────────────────────────────────────────────────


def test_dkw_band_value():
    assert dkw_band(100_000, 0.05) == pytest.approx(math.sqrt(math.log(40.0) / 200_000))
    with pytest.raises(InsufficientDataError):
        dkw_band(0)
    with pytest.raises(DomainError):
        dkw_band(10, 1.5)


@settings(max_examples=100, deadline=None)
@given(N=st.integers(min_value=1, max_value=10**9), confidence=st.floats(min_value=1e-6, max_value=0.5))
def test_dkw_band_halves_when_n_quadruples(N, confidence):
    assert dkw_band(4 * N, confidence) == pytest.approx(dkw_band(N, confidence) / 2, rel=1e-12)


@pytest.mark.parametrize("p", [1, 2, 10, 256])
def test_gaussian_norm_mean_matches_large_sample(p):
    X = sample(VectorModel("gaussian", p), 20_000, 5).data
    assert np.linalg.norm(X, axis=1).mean() == pytest.approx(gaussian_norm_mean(p), rel=0.02)


def test_closed_forms():
    assert gaussian_norm_mean(1) == pytest.approx(math.sqrt(2 / math.pi))
    assert ball_norm_mean(4) == 0.8
    assert gaussian_two_sided_tail(0.0) == pytest.approx(1.0)
    assert gaussian_product_tail(0.0) == pytest.approx(1.0, abs=1e-8)
    # χ²_2 − 2 ≥ t  ⇔  exponential tail exp(−(t + 2)/2)
    assert chi_square_centered_tail(3.0, 2) == pytest.approx(math.exp(-2.5))


# ── empirical tails ───────────────────────────────────────────────────────────


@settings(max_examples=50, deadline=None)
@given(
    values=st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=200),
    t=st.floats(0.0, 2e3),
)
def test_alpha_hat_counts_exactly(values, t):
    v = np.asarray(values)
    tail = empirical_tail(v, "median", t_grid=[t])
    expected = np.mean(np.abs(v - np.median(v)) >= t)
    assert tail.alpha_hat[0] == pytest.approx(expected)


def test_empirical_tail_is_nonincreasing_on_default_grid(rng):
    tail = empirical_tail(rng.standard_normal(10_000))
    assert np.all(np.diff(tail.alpha_hat) <= 0)
    assert np.all(tail.band_lo <= tail.alpha_hat)
    assert len(tail.rows()) == len(tail.t_grid)


def test_center_kinds(rng):
    v = rng.standard_normal(1001) + 3.0
    assert empirical_tail(v, "mean").center == pytest.approx(v.mean())
    copy = empirical_tail(v, "independent_copy")
    assert copy.center == 0.0
    assert copy.N == 500
    with pytest.raises(DomainError):
        empirical_tail(v, "mode")
    with pytest.raises(InsufficientDataError):
        empirical_tail([1.0])


def test_three_centers_agree_up_to_a_shift(rng):
    values = rng.standard_normal(100_000)
    t = np.linspace(0.0, 6.0, 121)
    kinds = ("median", "mean", "independent_copy")
    tails = {kind: empirical_tail(values, kind, t_grid=t) for kind in kinds}
    band = max(tail.dkw_band for tail in tails.values())
    shift = 2 * (float(np.std(values)) + band)
    for a in kinds:
        shifted = empirical_tail(values, a, t_grid=t + shift)
        for b in kinds:
            assert np.all(shifted.alpha_hat <= tails[b].alpha_hat + 2 * band), (a, b)


def test_constant_values_give_a_grid():
    tail = empirical_tail(np.ones(100))
    assert tail.t_grid.size > 0
    assert np.all(tail.alpha_hat == 0.0)


# ── fits ──────────────────────────────────────────────────────────────────────


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0, 3.0])
def test_fit_recovers_exponent_with_known_constant(q):
    fit = fit_tail_exponent(synthetic_tail(q, scale=1.5), window=(1e-4, 0.5), C=1.0)
    assert fit.q_hat == pytest.approx(q, rel=1e-6)
    assert fit.scale_hat == pytest.approx(1.5, rel=1e-6)
    assert fit.method == "loglog"


def test_free_constant_fit_recovers_c():
    fit = fit_tail_exponent(synthetic_tail(2.0, C=2.0), window=(1e-4, 0.5))
    assert fit.method == "free-constant"
    assert fit.q_hat == pytest.approx(2.0, rel=1e-3)
    assert fit.C_hat == pytest.approx(2.0, rel=1e-2)


def test_fit_on_gaussian_sample(rng):
    tail = empirical_tail(rng.standard_normal(200_000), "median")
    fit = fit_tail_exponent(tail)
    assert 1.7 <= fit.q_hat <= 2.3


def test_fit_needs_enough_points():
    tail = synthetic_tail(2.0)
    with pytest.raises(WindowError):
        fit_tail_exponent(tail, window=(0.999, 1.0), C=1.0)
    with pytest.raises(WindowError):
        fit_tail_exponent(tail, mask=np.zeros(tail.t_grid.size, dtype=bool))


def test_fit_needs_min_fit_points():
    tail = synthetic_tail(2.0)
    inside = np.flatnonzero((tail.alpha_hat >= 1e-3) & (tail.alpha_hat <= 0.1))
    mask = np.zeros(tail.t_grid.size, dtype=bool)
    mask[inside[: config.MIN_FIT_POINTS - 1]] = True
    with pytest.raises(WindowError):
        fit_tail_exponent(tail, window=(1e-4, 0.5), C=1.0, mask=mask)
    mask[inside[config.MIN_FIT_POINTS - 1]] = True
    fit = fit_tail_exponent(tail, window=(1e-4, 0.5), C=1.0, mask=mask)
    assert fit.points == config.MIN_FIT_POINTS
    assert fit.q_hat == pytest.approx(2.0, rel=1e-6)


def test_fixed_constant_fit_at_the_configured_c():
    tail = synthetic_tail(2.0, C=config.DEFAULT_C)
    fixed = fit_tail_exponent(tail, window=(1e-4, 0.5), C=config.DEFAULT_C)
    assert fixed.method == "loglog"
    assert fixed.q_hat == pytest.approx(2.0, rel=1e-6)
    assert fixed.scale_hat == pytest.approx(1.0, rel=1e-6)
    assert fit_tail_exponent(tail, window=(1e-4, 0.5)).method == "free-constant"


def test_fit_piecewise_marks_sparse_segments():
    tail = synthetic_tail(1.0)
    segments = fit_piecewise(tail, [0.0, 2.0, 6.0, 6.01], window=(1e-4, 0.5), C=1.0)
    assert segments[0]["fit"].q_hat == pytest.approx(1.0, rel=1e-6)
    assert segments[-1]["fit"] is None


# ── diameters and checks ──────────────────────────────────────────────────────


def test_observable_diameter_of_gaussian_is_one():
    ens = sample(VectorModel("gaussian", 64), 20_000, 3)
    assert observable_diameter(ens, K=8, master_seed=3) == pytest.approx(1.0, abs=0.05)


def test_replicated_vector_has_growing_diameter():
    ens = sample(VectorModel("replicated", 64), 20_000, 3)
    spreads = observation_spreads(observe(ens, [Observation.normalized_sum(64)]))
    assert spreads[0] == pytest.approx(8.0, rel=0.05)


def test_check_profile_accepts_gaussian_envelope(rng):
    values = rng.standard_normal(100_000)
    profile = ConcentrationProfile((Regime(2.0, 1.0),), C=2.0, c=math.sqrt(2.0))
    result = check_profile(values, profile)
    assert result.envelope_ok
    assert result.moments_ok
    assert result.passed
    assert result.q_hat is not None
    assert "PASS" in result.to_dict()["verdict"]
    assert "Envelope" in result.to_markdown()


def test_check_profile_rejects_too_tight_envelope(rng):
    values = 3.0 * rng.standard_normal(100_000)
    profile = ConcentrationProfile((Regime(2.0, 1.0),), C=2.0, c=math.sqrt(2.0))
    result = check_profile(values, profile)
    assert not result.envelope_ok
    assert result.worst_excess > 0


def test_check_profile_lipschitz_constant_scales_envelope(rng):
    values = 3.0 * rng.standard_normal(100_000)
    profile = ConcentrationProfile((Regime(2.0, 1.0),), C=2.0, c=math.sqrt(2.0))
    assert check_profile(values, profile, lipschitz_constant=3.0).passed


def test_check_profile_pass_is_monotone_in_scale(rng):
    values = rng.standard_normal(50_000)
    base = ConcentrationProfile((Regime(2.0, 1.0), Regime(1.0, 0.5)), C=2.0, c=math.sqrt(2.0))
    verdicts = [check_profile(values, base.scaled(lam)).passed for lam in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)]
    assert verdicts[-1]
    first = verdicts.index(True)
    assert all(verdicts[first:])


def test_norm_expectation_check_for_euclidean_norm():
    ensembles = [sample(VectorModel("gaussian", p), 2000, 1) for p in (16, 64, 256)]
    report = norm_expectation_check(ensembles, "euclidean")
    assert report.passed
    assert report.stability < 1.1
    assert [row["p"] for row in report.rows] == [16, 64, 256]


def test_norm_expectation_check_for_spectral_norm():
    ensembles = [sample_matrix(MatrixModel.gaussian(p, p), 100, 1) for p in (20, 40, 80)]
    report = norm_expectation_check(ensembles, "spectral")
    assert report.passed
    assert report.to_dict()["verdict"] == "PASS"


def test_norm_expectation_check_needs_three_dimensions():
    ensembles = [sample(VectorModel("gaussian", p), 100, 1) for p in (16, 64)]
    with pytest.raises(InsufficientDataError):
        norm_expectation_check(ensembles, "euclidean")


def test_norm_expectation_check_rejects_a_degenerate_linf_degree():
    ensembles = [sample(VectorModel("gaussian", p), 50, 1) for p in (1, 4, 16)]
    with pytest.raises(RangeError):
        norm_expectation_check(ensembles, "linf")

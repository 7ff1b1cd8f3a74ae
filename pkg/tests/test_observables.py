import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from services.errors import DomainError, NormModeWarning, RangeError, ShapeError, TrialAlignmentError
from services.generators import (
    DiagonalModel,
    MatrixModel,
    SampleEnsemble,
    VectorModel,
    sample,
    sample_couple,
    sample_diagonal,
    sample_matrix,
)
from services.observables import (
    Observation,
    batch_norm,
    bilinear_form,
    bilinear_form_model,
    diag_seminorm,
    hadamard_chain,
    matrix_chain,
    observe,
    observe_model,
    random_unit_observations,
    trace_pairing,
    transpose,
    xdy_action,
    ydax_diag_stat,
)


def matrices(seed, p, n, N=4):
    return sample_matrix(MatrixModel.gaussian(p, n), N, seed)


def couple(p=3, n=4, N=4, seed=1):
    X, Y = sample_couple(MatrixModel.gaussian(p, n, "independent"), N, seed)
    D = sample_diagonal(DiagonalModel.uniform(-1.0, 1.0), N, n, seed)
    return X, D, Y


# ── observations ──────────────────────────────────────────────────────────────


def test_random_unit_observations_are_unit_and_reproducible():
    first = random_unit_observations(10, 5, 3)
    second = random_unit_observations(10, 5, 3)
    for a, b in zip(first, second):
        assert a.lipschitz_constant == pytest.approx(1.0)
        np.testing.assert_array_equal(a.vector, b.vector)


def test_observe_model_matches_observe_on_sample():
    model = VectorModel("laplace", 6)
    observations = random_unit_observations(6, 3, 1) + [Observation.norm("euclidean")]
    direct = observe(sample(model, 5000, 2), observations)
    streamed = observe_model(model, 5000, 2, observations, threads=3)
    np.testing.assert_allclose(streamed.data, direct.data)


def test_normalized_sum_is_unit_linear_form():
    obs = Observation.normalized_sum(4)
    assert obs.lipschitz_constant == pytest.approx(1.0)
    assert obs.evaluate(np.ones((1, 4)), (4,))[0] == pytest.approx(2.0)


def test_distance_to_ball():
    obs = Observation.distance_to_ball(1.0)
    rows = np.array([[0.5, 0.0], [3.0, 4.0]])
    np.testing.assert_allclose(obs.evaluate(rows, (2,)), [0.0, 4.0])
    with pytest.raises(RangeError):
        Observation.distance_to_ball(-1.0)


def test_custom_observation_and_width_check():
    obs = Observation.custom(lambda t: t.sum(axis=1), lipschitz_constant=math.sqrt(3))
    np.testing.assert_allclose(obs.evaluate(np.ones((2, 3)), (3,)), [3.0, 3.0])
    with pytest.raises(ShapeError):
        Observation.linear(np.ones(2)).evaluate(np.ones((1, 3)), (3,))


def test_nuclear_norm_lipschitz_constant():
    assert Observation.norm("nuclear", (4, 9)).lipschitz_constant == pytest.approx(2.0)
    assert Observation.norm("spectral", (4, 9)).lipschitz_constant == 1.0


def test_unknown_norm_kind_is_rejected():
    with pytest.raises(DomainError):
        Observation.norm("max")


# ── norms ─────────────────────────────────────────────────────────────────────


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 4, 4), elements=st.floats(-10, 10)))
def test_norm_orderings(stack):
    spectral = batch_norm(stack, "spectral")
    frobenius = batch_norm(stack, "frobenius")
    nuclear = batch_norm(stack, "nuclear")
    diag = batch_norm(stack, "diag")
    assert np.all(spectral <= frobenius + 1e-9)
    assert np.all(frobenius <= nuclear + 1e-9)
    assert np.all(diag <= frobenius + 1e-9)


def test_vector_norms():
    rows = np.array([[3.0, -4.0]])
    assert batch_norm(rows, "euclidean")[0] == 5.0
    assert batch_norm(rows, "linf")[0] == 4.0
    with pytest.raises(DomainError):
        batch_norm(rows, "spectral")


def test_diag_seminorm():
    assert diag_seminorm(np.diag([3.0, 4.0]) + np.array([[0.0, 9.0], [9.0, 0.0]])) == 5.0
    with pytest.raises(ShapeError):
        diag_seminorm(np.ones((2, 3)))


# ── chains and forms ──────────────────────────────────────────────────────────


def test_hadamard_chain_multiplies_entrywise():
    a = sample(VectorModel("gaussian", 3), 5, 1, column=0)
    b = sample(VectorModel("gaussian", 3), 5, 1, column=1)
    np.testing.assert_allclose(hadamard_chain([a, b]).data, a.data * b.data)


def test_alignment_is_enforced():
    a = sample(VectorModel("gaussian", 3), 5, 1)
    with pytest.raises(TrialAlignmentError):
        hadamard_chain([a, sample(VectorModel("gaussian", 3), 6, 1)])
    with pytest.raises(TrialAlignmentError):
        hadamard_chain([a, sample(VectorModel("gaussian", 3), 5, 2)])


def test_alignment_rejects_reused_draws():
    a = sample(VectorModel("gaussian", 3), 5, 1)
    with pytest.raises(TrialAlignmentError):
        hadamard_chain([a, sample(VectorModel("laplace", 3), 5, 1)])
    X = matrices(1, 3, 5)
    with pytest.raises(TrialAlignmentError):
        bilinear_form(X, np.eye(3), matrices(1, 3, 5))
    assert bilinear_form(X, np.eye(3), X).shape == (5, 5)


def test_coupled_ensembles_share_draws_on_purpose():
    X, Y = sample_couple(MatrixModel.gaussian(3, 4, "identical"), 4, 1)
    D = sample_diagonal(DiagonalModel.clip(0.5), 4, 4, 1, X=X)
    assert X.draw_key == (X.stream, None)
    assert Y.draw_key is None and D.draw_key is None
    assert xdy_action(X, D, Y, np.zeros(3)).shape == (3,)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1), m=st.integers(min_value=2, max_value=4), data=st.data())
def test_hadamard_variation_bound(seed, m, data):
    i = data.draw(st.integers(min_value=0, max_value=m - 1))
    gen = np.random.default_rng(seed)
    factors = [SampleEnsemble(gen.standard_normal((8, 5)), (5,), None, 0) for _ in range(m)]
    swapped = list(factors)
    swapped[i] = SampleEnsemble(gen.standard_normal((8, 5)), (5,), None, 0)
    gap = np.linalg.norm(hadamard_chain(factors).data - hadamard_chain(swapped).data, axis=1)
    others = np.prod([np.abs(f.data).max(axis=1) for k, f in enumerate(factors) if k != i], axis=0)
    step = np.linalg.norm(factors[i].data - swapped[i].data, axis=1)
    assert np.all(gap <= others * step * (1 + 1e-12))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1), m=st.integers(min_value=2, max_value=4), data=st.data())
def test_matrix_chain_variation_bound(seed, m, data):
    i = data.draw(st.integers(min_value=0, max_value=m - 1))
    gen = np.random.default_rng(seed)
    factors = [SampleEnsemble(gen.standard_normal((6, 9)), (3, 3), None, 0) for _ in range(m)]
    swapped = list(factors)
    swapped[i] = SampleEnsemble(gen.standard_normal((6, 9)), (3, 3), None, 0)
    gap = batch_norm(matrix_chain(factors).trials() - matrix_chain(swapped).trials(), "frobenius")
    others = np.prod([batch_norm(f.trials(), "spectral") for k, f in enumerate(factors) if k != i], axis=0)
    step = batch_norm(factors[i].trials() - swapped[i].trials(), "frobenius")
    assert np.all(gap <= others * step * (1 + 1e-9))


def test_matrix_chain_and_transpose():
    X = matrices(1, 3, 5)
    S = matrix_chain([X, transpose(X)])
    assert S.shape == (3, 3)
    np.testing.assert_allclose(S.trials(), X.trials() @ np.swapaxes(X.trials(), 1, 2))
    with pytest.raises(ShapeError):
        matrix_chain([X, X])


def test_bilinear_form_on_vectors():
    x = sample(VectorModel("gaussian", 3), 4, 1, column=0)
    y = sample(VectorModel("gaussian", 3), 4, 1, column=1)
    A = np.arange(9.0).reshape(3, 3)
    expected = np.array([xi @ A @ yi for xi, yi in zip(x.data, y.data)])
    np.testing.assert_allclose(bilinear_form(x, A, y).values(), expected)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(-10, 10)))
def test_bilinear_form_transposes(A):
    x = sample(VectorModel("gaussian", 3), 6, 2, column=0)
    y = sample(VectorModel("gaussian", 3), 6, 2, column=1)
    np.testing.assert_allclose(
        bilinear_form(x, A, y).values(), bilinear_form(y, A.T, x).values(), rtol=1e-10, atol=1e-9
    )


def test_bilinear_form_on_matrices_with_pairing():
    X, _, Y = couple()
    A = np.eye(3)
    B = np.ones((4, 4))
    gram = bilinear_form(X, A, Y)
    assert gram.shape == (4, 4)
    paired = bilinear_form(X, A, Y, B=B).values()
    np.testing.assert_allclose(paired, gram.trials().sum(axis=(1, 2)))


def test_bilinear_form_model_variance_matches_frobenius():
    A = np.diag([1.0, 2.0, 2.0])
    values = bilinear_form_model(VectorModel("gaussian", 3), [A], 50_000, 4).data[:, 0]
    assert np.var(values) / 9.0 == pytest.approx(1.0, abs=0.05)


# ── XDY^T functionals ─────────────────────────────────────────────────────────


def test_xdy_action_matches_explicit_product():
    X, D, Y = couple()
    u = np.array([0.6, 0.0, 0.8])
    out = xdy_action(X, D, Y, u).trials()
    for t in range(X.N):
        expected = X.trials()[t] @ np.diag(D.data[t]) @ Y.trials()[t].T @ u
        np.testing.assert_allclose(out[t], expected)


def test_xdy_action_rejects_long_u():
    X, D, Y = couple()
    with pytest.raises(RangeError):
        xdy_action(X, D, Y, np.ones(3))


def test_trace_pairing_equals_trace():
    X, D, Y = couple()
    A = np.eye(3) / math.sqrt(3)
    values = trace_pairing(A, X, D, Y).values()
    for t in range(X.N):
        expected = np.trace(A @ X.trials()[t] @ np.diag(D.data[t]) @ Y.trials()[t].T)
        assert values[t] == pytest.approx(expected)


def test_trace_pairing_warns_outside_unit_ball():
    X, D, Y = couple()
    with pytest.warns(NormModeWarning):
        trace_pairing(np.eye(3), X, D, Y)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        trace_pairing(np.eye(3) / 3.0, X, D, Y, mode="nuclear")
    with pytest.raises(DomainError):
        trace_pairing(np.eye(3), X, D, Y, mode="operator")


def test_trace_pairing_with_unit_diagonal_sums_bilinear_forms():
    X, _, Y = couple()
    ones = SampleEnsemble(np.ones((X.N, 4)), (4,), None, X.master_seed)
    A = np.arange(9.0).reshape(3, 3)
    A /= np.linalg.norm(A)
    gram = bilinear_form(Y, A, X).trials()
    expected = np.trace(gram, axis1=1, axis2=2)
    np.testing.assert_allclose(trace_pairing(A, X, ones, Y).values(), expected)


def test_ydax_diag_stat_rescales_a():
    X, _, Y = couple()
    small, mean_small = ydax_diag_stat(X, Y, np.eye(3) / math.sqrt(3))
    large, mean_large = ydax_diag_stat(X, Y, 10 * np.eye(3))
    np.testing.assert_allclose(small.values(), large.values())
    assert mean_small == pytest.approx(mean_large)
    x, y = X.trials()[0], Y.trials()[0]
    assert small.values()[0] == pytest.approx(diag_seminorm(y.T @ x / math.sqrt(3)))


def test_diagonal_width_is_checked():
    X, _, Y = couple()
    D = SampleEnsemble(np.ones((4, 3)), (3,), None, 1)
    with pytest.raises(ShapeError):
        xdy_action(X, D, Y, np.zeros(3))

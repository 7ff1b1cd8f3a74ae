import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from services.errors import DomainError, RangeError, ShapeError
from services.generators import (
    DiagonalModel,
    LipschitzTransform,
    MatrixModel,
    SampleEnsemble,
    VectorModel,
    concat,
    estimate_sigma,
    iter_blocks,
    model_from_dict,
    sample,
    sample_couple,
    sample_diagonal,
    sample_diagonal_marginal,
    sample_matrix,
)
from utils.chunker import split_into_blocks
from utils.seeding import derive_generator, validate_seed


# ── seeding ───────────────────────────────────────────────────────────────────


def test_seed_must_be_u64():
    assert validate_seed(2**64 - 1) == 2**64 - 1
    with pytest.raises(RangeError):
        validate_seed(2**64)
    with pytest.raises(RangeError):
        validate_seed(-1)


def test_derived_generators_differ_by_key():
    a = derive_generator(5, 0, 0, 0).standard_normal(8)
    b = derive_generator(5, 0, 0, 1).standard_normal(8)
    again = derive_generator(5, 0, 0, 0).standard_normal(8)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, again)


def test_split_into_blocks_covers_range():
    blocks = split_into_blocks(10, block_size=4)
    assert [(b.start, b.stop) for b in blocks] == [(0, 4), (4, 8), (8, 10)]
    assert blocks[-1].size == 2
    with pytest.raises(RangeError):
        split_into_blocks(0)


# ── determinism ───────────────────────────────────────────────────────────────


@pytest.mark.parametrize("kind", ["gaussian", "sphere", "ball", "cube", "laplace", "replicated"])
def test_sample_is_identical_across_thread_counts(kind):
    model = VectorModel(kind, 8)
    single = sample(model, 9000, master_seed=42, threads=1)
    many = sample(model, 9000, master_seed=42, threads=4)
    np.testing.assert_array_equal(single.data, many.data)


def test_iter_blocks_matches_sample():
    model = VectorModel("gaussian", 3)
    streamed = np.concatenate([rows for _, rows in iter_blocks(model, 5000, 9)], axis=0)
    np.testing.assert_array_equal(streamed, sample(model, 5000, 9).data)


def test_longer_runs_extend_shorter_ones():
    model = VectorModel("gaussian", 4)
    short = sample(model, 5000, 3).data
    long = sample(model, 6000, 3).data
    np.testing.assert_array_equal(long[:5000], short)


def test_streams_and_columns_are_independent_draws():
    model = VectorModel("gaussian", 4)
    base = sample(model, 100, 3).data
    assert not np.allclose(base, sample(model, 100, 3, stream=1).data)
    assert not np.allclose(base, sample(model, 100, 3, column=1).data)
    assert not np.allclose(base, sample(model, 100, 4).data)


def test_matrix_sample_is_thread_independent():
    model = MatrixModel.gaussian(5, 6)
    one = sample_matrix(model, 300, 8, threads=1)
    four = sample_matrix(model, 300, 8, threads=4)
    np.testing.assert_array_equal(one.data, four.data)
    assert one.trials().shape == (300, 5, 6)


# ── families ──────────────────────────────────────────────────────────────────


def test_sphere_has_radius_sqrt_p():
    X = sample(VectorModel("sphere", 16), 200, 1).data
    np.testing.assert_allclose(np.linalg.norm(X, axis=1), 4.0)


def test_ball_stays_inside_radius_sqrt_p():
    X = sample(VectorModel("ball", 9), 500, 1).data
    assert np.all(np.linalg.norm(X, axis=1) <= 3.0 + 1e-12)


def test_cube_coordinates_lie_in_range():
    X = sample(VectorModel("cube", 25), 500, 1).data
    assert X.min() >= 0.0
    assert X.max() <= 5.0


@settings(max_examples=20, deadline=None)
@given(q=st.floats(min_value=0.5, max_value=4.0), dim=st.integers(min_value=1, max_value=20))
def test_lq_ball_stays_in_unit_ball(q, dim):
    X = sample(VectorModel("lq_ball", dim, q=q), 200, 2).data
    assert np.all(np.sum(np.abs(X) ** q, axis=1) <= 1.0 + 1e-9)


def test_replicated_repeats_one_coordinate():
    X = sample(VectorModel("replicated", 6), 50, 1).data
    np.testing.assert_array_equal(X, np.repeat(X[:, :1], 6, axis=1))


def test_gaussian_moments():
    X = sample(VectorModel("gaussian", 2), 100_000, 7).data
    assert abs(X.mean()) < 0.02
    assert abs(X.var() - 1.0) < 0.02


def test_vector_model_validation():
    with pytest.raises(DomainError):
        VectorModel("cauchy", 3)
    with pytest.raises(RangeError):
        VectorModel("gaussian", 0)
    with pytest.raises(RangeError):
        VectorModel("lq_ball", 3)


def test_declared_profiles():
    assert VectorModel("gaussian", 10).declared_profile.exponents == (2.0,)
    assert VectorModel("laplace", 10).declared_profile.exponents == (1.0,)
    assert VectorModel("replicated", 16).declared_profile.scales == (4.0,)


def test_concat_unions_profiles_and_dimensions():
    model = concat([VectorModel("gaussian", 3), VectorModel("laplace", 2)])
    assert model.dim == 5
    assert model.declared_profile.exponents == (2.0, 1.0)
    X = sample(model, 10, 1).data
    assert X.shape == (10, 5)


def test_model_dict_round_trip():
    model = VectorModel("lq_ball", 4, q=1.5).with_transform(LipschitzTransform.scaling(2.0))
    again = model_from_dict(model.to_dict())
    assert again.to_dict() == model.to_dict()
    matrix = MatrixModel.gaussian(3, 4, "mixed")
    assert model_from_dict(matrix.to_dict()).to_dict() == matrix.to_dict()


# ── transforms ────────────────────────────────────────────────────────────────


def test_affine_transform_scales_profile_by_spectral_norm():
    A = np.diag([3.0, 1.0])
    model = VectorModel("gaussian", 2).with_transform(LipschitzTransform.affine(A, [1.0, -1.0]))
    assert model.declared_profile.scales == pytest.approx((3.0,))
    raw = sample(VectorModel("gaussian", 2), 20, 5).data
    mapped = sample(model, 20, 5).data
    np.testing.assert_allclose(mapped, raw @ A.T + np.array([1.0, -1.0]))


def test_affine_image_spreads_at_most_by_the_spectral_norm(rng):
    raw = sample(VectorModel("gaussian", 4), 20_000, 7)
    worst = math.sqrt(np.linalg.eigvalsh(np.cov(raw.data.T)).max())
    for _ in range(20):
        A = rng.standard_normal((4, 4))
        transform = LipschitzTransform.affine(A, rng.standard_normal(4))
        mapped = sample(VectorModel("gaussian", 4).with_transform(transform), 20_000, 7).data
        # top left singular vector: the worst unit observation of the image
        u = np.linalg.svd(A)[0][:, 0]
        spread = float(np.std(mapped @ u, ddof=1))
        assert spread <= transform.lipschitz_constant * worst * 1.1
        assert spread >= 0.9 * transform.lipschitz_constant


def test_affine_transform_changes_output_dim():
    model = VectorModel("gaussian", 3).with_transform(LipschitzTransform.affine(np.ones((1, 3))))
    assert model.output_dim == 1
    assert sample(model, 7, 1).shape == (1,)


def test_affine_transform_shape_mismatch():
    with pytest.raises(ShapeError):
        VectorModel("gaussian", 3).with_transform(LipschitzTransform.affine(np.ones((2, 4))))


def test_coordinatewise_transform_is_1_lipschitz():
    t = LipschitzTransform.coordinatewise("tanh")
    assert t.lipschitz_constant == 1.0
    X = sample(VectorModel("gaussian", 4).with_transform(t), 100, 1).data
    assert np.all(np.abs(X) < 1.0)
    with pytest.raises(DomainError):
        LipschitzTransform.coordinatewise("exp")


def test_scaling_transform():
    model = VectorModel("laplace", 3).with_transform(LipschitzTransform.scaling(-0.5))
    assert model.declared_profile.scales == (0.5,)
    with pytest.raises(RangeError):
        LipschitzTransform.scaling(0.0)
    with pytest.raises(DomainError):
        model.with_transform(LipschitzTransform.scaling(2.0))


# ── couples and diagonals ─────────────────────────────────────────────────────


def test_identical_coupling_copies_x():
    X, Y = sample_couple(MatrixModel.gaussian(3, 4, "identical"), 10, 1)
    np.testing.assert_array_equal(X.data, Y.data)


def test_mixed_coupling_has_half_correlation():
    X, Y = sample_couple(MatrixModel.gaussian(2, 2, "mixed"), 50_000, 1)
    corr = np.mean(X.data * Y.data)
    assert abs(corr - 1 / math.sqrt(2.0)) < 0.02
    assert abs(np.var(Y.data) - 1.0) < 0.03


def test_independent_coupling_draws_fresh_y():
    X, Y = sample_couple(MatrixModel.gaussian(2, 2, "independent"), 50_000, 1)
    assert abs(np.mean(X.data * Y.data)) < 0.02


def test_sigma_of_gaussian_couplings():
    assert MatrixModel.gaussian(2, 3, "identical").sigma()[0].tolist() == np.eye(2).tolist()
    np.testing.assert_allclose(MatrixModel.gaussian(2, 3, "mixed").sigma()[1], np.eye(2) / math.sqrt(2))
    assert MatrixModel.gaussian(2, 3).sigma()[2].tolist() == np.zeros((2, 2)).tolist()


@pytest.mark.parametrize("coupling, expected", [("identical", 2.0), ("mixed", math.sqrt(2.0)), ("independent", 0.0)])
def test_sigma_is_estimated_without_a_closed_form(coupling, expected):
    model = MatrixModel(3, 5, (VectorModel("laplace", 3),), coupling)
    assert not model.analytic_sigma
    sigmas, error = estimate_sigma(model, 10_000, 4)
    assert len(sigmas) == 5
    assert 0 < error < 0.1
    np.testing.assert_allclose(sigmas[0], expected * np.eye(3), atol=6 * error)
    np.testing.assert_array_equal(model.sigma(4, 10_000)[3], sigmas[0])


def test_marginal_diagonals():
    uniform = sample_diagonal_marginal(DiagonalModel.uniform(-0.2, 0.2), 4000, 6, 1)
    assert uniform.data.shape == (4000, 6)
    assert np.abs(uniform.data).max() <= 0.2
    clipped = sample_diagonal_marginal(DiagonalModel.clip(1.0), 20_000, 3, 1)
    assert clipped.data.mean() == pytest.approx(DiagonalModel.clip(1.0).mean(), abs=0.01)


def test_matrix_model_validation():
    with pytest.raises(ShapeError):
        MatrixModel(3, 2, (VectorModel("gaussian", 4),))
    with pytest.raises(DomainError):
        MatrixModel.gaussian(3, 2, "sideways")


def test_two_point_diagonal_takes_both_values():
    D = sample_diagonal(DiagonalModel.two_point(-1.0, 2.0), 2000, 5, 3).data
    assert set(np.unique(D)) == {-1.0, 2.0}
    assert abs(D.mean() - 0.5) < 0.1


def test_clip_diagonal_reads_first_row_of_x():
    X = sample_matrix(MatrixModel.gaussian(3, 4), 20, 2)
    D = sample_diagonal(DiagonalModel.clip(0.5), 20, 4, 2, X=X)
    np.testing.assert_array_equal(D.data, 0.5 * np.clip(X.trials()[:, 0, :], 0.0, 1.0))
    with pytest.raises(ShapeError):
        sample_diagonal(DiagonalModel.clip(0.5), 20, 4, 2)


def test_diagonal_model_laws():
    assert DiagonalModel.deterministic(0.3).bound == 0.3
    assert DiagonalModel.uniform(-2.0, 1.0).mean() == -0.5
    assert math.isinf(DiagonalModel.gaussian(0.0, 1.0).bound)
    # E[clip(g, 0, 1)] ≈ 0.3156 for standard gaussian g
    assert DiagonalModel.clip(1.0).mean() == pytest.approx(0.3156, abs=1e-3)
    with pytest.raises(RangeError):
        DiagonalModel("two_point", (1.0,))
    with pytest.raises(DomainError):
        DiagonalModel("poisson", (1.0,))


# ── ensembles ─────────────────────────────────────────────────────────────────


def test_ensemble_shape_checks():
    with pytest.raises(ShapeError):
        SampleEnsemble(np.zeros((3, 5)), (2, 2), None, 0)
    scalar = SampleEnsemble(np.arange(4.0), (), None, 0)
    np.testing.assert_array_equal(scalar.values(), np.arange(4.0))
    with pytest.raises(ShapeError):
        SampleEnsemble(np.zeros((3, 2)), (2,), None, 0).values()


def test_derived_ensemble_records_provenance():
    X = sample(VectorModel("gaussian", 2), 5, 1)
    norms = SampleEnsemble.derived(np.linalg.norm(X.data, axis=1), (), "norm", [X])
    assert norms.header()["model"]["op"] == "norm"
    assert norms.master_seed == 1

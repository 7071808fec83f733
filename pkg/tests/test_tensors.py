import numpy as np
import pytest

from cptrank.tensors import (
    CPModel,
    fold,
    frobenius_dist,
    khatri_rao,
    max_abs_diff,
    model_from_json,
    model_to_json,
    rank_one,
    reconstruct,
    tensor_from_flat,
    tensor_from_json,
    tensor_to_json,
    unfold,
)


def brute_force_reconstruct(model):
    """Index-by-index oracle: sum_t w_t * prod_j factors[j][i_j, t]."""
    out = np.zeros(model.dims)
    for idx in np.ndindex(*model.dims):
        total = 0.0
        for t in range(model.rank):
            term = model.weights[t]
            for j, i in enumerate(idx):
                term *= model.factors[j][i, t]
            total += term
        out[idx] = total
    return out


def random_model(dims, rank, seed):
    rng = np.random.default_rng(seed)
    return CPModel(tuple(rng.random((n, rank)) for n in dims))


class TestTensorFromFlat:
    def test_order_one(self):
        t = tensor_from_flat([2], [0.3, 0.7])
        assert t.shape == (2,)
        assert t[0] == 0.3

    def test_identity_pattern(self):
        t = tensor_from_flat([2, 2], [1, 0, 0, 1])
        assert t[1, 1] == 1
        assert t[0, 1] == 0

    def test_hailfinder_shape(self):
        t = tensor_from_flat([3, 3, 4, 3], np.arange(108.0))
        assert t.shape == (3, 3, 4, 3)
        # last index fastest: flat position of (0,0,1,2) is 1*3 + 2
        assert t[0, 0, 1, 2] == 5.0

    def test_length_mismatch_names_both_lengths(self):
        with pytest.raises(ValueError, match="4 entries.*got 3"):
            tensor_from_flat([2, 2], [1.0, 2.0, 3.0])

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            tensor_from_flat([2, 0], [])
        with pytest.raises(ValueError):
            tensor_from_flat([], [])


class TestRankOne:
    def test_indicator_outer_product(self):
        t = rank_one([[1, 0], [1, 0]])
        expected = np.zeros((2, 2))
        expected[0, 0] = 1
        np.testing.assert_array_equal(t, expected)

    def test_scalar_product(self):
        t = rank_one([[2], [3], [4]])
        assert t.shape == (1, 1, 1)
        assert t[0, 0, 0] == 24

    def test_hand_value(self):
        t = rank_one([[0.5, 0.5], [0.2, 0.8]])
        assert t[1, 1] == pytest.approx(0.5 * 0.8, abs=1e-15)

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            rank_one([])
        with pytest.raises(ValueError):
            rank_one([[1.0], []])


class TestReconstruct:
    def test_rank_one_model_matches_outer_product(self):
        vecs = [[0.5, 0.5], [0.2, 0.8]]
        model = CPModel(tuple(np.asarray(v, float)[:, None] for v in vecs))
        np.testing.assert_allclose(reconstruct(model), rank_one(vecs), atol=1e-15)

    def test_zero_factors_give_zero_tensor(self):
        model = CPModel((np.zeros((2, 3)), np.zeros((4, 3))))
        np.testing.assert_array_equal(reconstruct(model), np.zeros((2, 4)))

    def test_against_brute_force_loop(self):
        model = random_model([3, 4, 5], 3, seed=7)
        np.testing.assert_allclose(
            reconstruct(model), brute_force_reconstruct(model), atol=1e-12
        )

    def test_order_one_model(self):
        model = CPModel((np.array([[1.0, 2.0], [3.0, 4.0]]),), np.array([2.0, 1.0]))
        np.testing.assert_allclose(reconstruct(model), [4.0, 10.0])

    def test_sum_of_single_term_reconstructs(self):
        model = random_model([2, 3, 2], 4, seed=11)
        total = np.zeros(model.dims)
        for t in range(model.rank):
            single = CPModel(
                tuple(f[:, t : t + 1] for f in model.factors),
                model.weights[t : t + 1],
            )
            total += reconstruct(single)
        np.testing.assert_allclose(reconstruct(model), total, atol=1e-12)

    def test_weight_column_rescaling_cancels(self):
        model = random_model([3, 3], 2, seed=3)
        c = 7.3
        scaled = CPModel(
            (model.factors[0] * c, model.factors[1]),
            model.weights / c,
        )
        np.testing.assert_allclose(reconstruct(model), reconstruct(scaled), atol=1e-12)


class TestCPModelInvariants:
    def test_column_count_mismatch(self):
        with pytest.raises(ValueError, match="columns"):
            CPModel((np.zeros((2, 2)), np.zeros((2, 3))))

    def test_weights_length_mismatch(self):
        with pytest.raises(ValueError, match="weights"):
            CPModel((np.zeros((2, 2)),), np.ones(3))

    def test_default_weights_are_ones(self):
        model = CPModel((np.ones((2, 2)),))
        np.testing.assert_array_equal(model.weights, [1.0, 1.0])

    def test_reconstruct_dims_match(self):
        model = random_model([2, 5, 3], 2, seed=0)
        assert reconstruct(model).shape == model.dims

    def test_factors_are_immutable(self):
        model = random_model([2, 2], 1, seed=0)
        with pytest.raises(ValueError):
            model.factors[0][0, 0] = 5.0


class TestMetrics:
    def test_identical_tensors(self):
        t = tensor_from_flat([2, 2], [1, 2, 3, 4])
        assert max_abs_diff(t, t) == 0.0
        assert frobenius_dist(t, t) == 0.0

    def test_hand_max_distance(self):
        a = tensor_from_flat([2], [0.2, 0.8])
        b = tensor_from_flat([2], [0.25, 0.75])
        assert max_abs_diff(a, b) == pytest.approx(0.05, abs=1e-15)

    def test_hand_frobenius(self):
        a = tensor_from_flat([2], [1, 0])
        b = tensor_from_flat([2], [0, 1])
        assert frobenius_dist(a, b) == pytest.approx(np.sqrt(2), abs=1e-15)

    def test_frobenius_against_summation_loop(self):
        rng = np.random.default_rng(5)
        a = rng.random((3, 4, 2))
        b = rng.random((3, 4, 2))
        total = 0.0
        for idx in np.ndindex(*a.shape):
            total += (a[idx] - b[idx]) ** 2
        assert frobenius_dist(a, b) == pytest.approx(np.sqrt(total), abs=1e-12)

    def test_dims_mismatch_raises(self):
        a = np.zeros((2, 3))
        b = np.zeros((3, 2))
        with pytest.raises(ValueError, match="dims differ"):
            max_abs_diff(a, b)
        with pytest.raises(ValueError, match="dims differ"):
            frobenius_dist(a, b)

    def test_metric_properties_on_random_triples(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            a, b, c = (rng.random((2, 3, 2)) for _ in range(3))
            for dist in (max_abs_diff, frobenius_dist):
                assert dist(a, b) == pytest.approx(dist(b, a), abs=1e-15)
                assert dist(a, c) <= dist(a, b) + dist(b, c) + 1e-12
                assert dist(a, a) == 0.0

    def test_exact_model_reconstruction_error_is_tiny(self):
        model = random_model([3, 3, 3], 2, seed=23)
        target = brute_force_reconstruct(model)
        assert max_abs_diff(reconstruct(model), target) < 1e-12


class TestUnfoldFold:
    def test_matrix_case(self):
        t = tensor_from_flat([2, 3], [1, 2, 3, 4, 5, 6])
        np.testing.assert_array_equal(unfold(t, 0), [[1, 2, 3], [4, 5, 6]])
        np.testing.assert_array_equal(unfold(t, 1), [[1, 4], [2, 5], [3, 6]])

    def test_round_trip_every_mode(self):
        rng = np.random.default_rng(9)
        t = rng.random((2, 3, 4, 2))
        for m in range(t.ndim):
            np.testing.assert_array_equal(fold(unfold(t, m), m, t.shape), t)

    def test_mode_out_of_range(self):
        t = np.zeros((2, 2))
        with pytest.raises(ValueError, match="out of range"):
            unfold(t, 2)
        with pytest.raises(ValueError, match="out of range"):
            fold(np.zeros((2, 2)), -1, (2, 2))

    def test_unfold_of_rank_one_is_outer_with_khatri_rao(self):
        vecs = [np.array([1.0, 2.0]), np.array([3.0, 4.0, 5.0]), np.array([6.0, 7.0])]
        t = rank_one(vecs)
        for m in range(3):
            others = [vecs[j][:, None] for j in range(3) if j != m]
            expected = vecs[m][:, None] @ khatri_rao(others).T
            np.testing.assert_allclose(unfold(t, m), expected, atol=1e-12)


class TestKhatriRao:
    def test_single_matrix_is_identity_case(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(khatri_rao([m]), m)

    def test_hand_kronecker(self):
        a = np.array([[1.0], [2.0]])
        b = np.array([[3.0], [4.0]])
        np.testing.assert_array_equal(khatri_rao([a, b]), [[3.0], [4.0], [6.0], [8.0]])

    def test_column_count_mismatch(self):
        with pytest.raises(ValueError, match="columns"):
            khatri_rao([np.zeros((2, 2)), np.zeros((2, 3))])

    def test_cp_unfolding_identity(self):
        model = random_model([2, 3, 4], 3, seed=13)
        weights = np.array([0.5, 2.0, 1.5])
        model = CPModel(model.factors, weights)
        t = reconstruct(model)
        for m in range(3):
            others = [model.factors[j] for j in range(3) if j != m]
            expected = model.factors[m] @ (khatri_rao(others) * weights).T
            np.testing.assert_allclose(unfold(t, m), expected, atol=1e-12)


class TestJsonInterchange:
    def test_tensor_round_trip(self):
        t = tensor_from_flat([2, 3], [0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
        back = tensor_from_json(tensor_to_json(t))
        np.testing.assert_array_equal(back, t)

    def test_model_round_trip(self):
        model = random_model([2, 3], 2, seed=31)
        model = CPModel(model.factors, np.array([1.0, 0.25]))
        back = model_from_json(model_to_json(model))
        assert back == model

import numpy as np
import pytest

from cptrank.solvers import (
    FitResult,
    SolverConfig,
    SolverNumericalError,
    _gradient_blocks,
    _normal_matrix,
    als_decompose,
    cp_gradient,
    flatten_factors,
    lm_decompose,
    multi_start_decompose,
    nvec_init,
    random_init,
    unflatten_factors,
)
from cptrank.tensors import (
    CPModel,
    frobenius_dist,
    max_abs_diff,
    rank_one,
    reconstruct,
    unfold,
)

QUICK = SolverConfig(n_random_starts=10, use_nvec_start=True, seed=0)


def random_model(dims, rank, seed):
    return random_init(dims, rank, np.random.default_rng(seed))


def brute_force_jacobian(model):
    """Columns d vec(recon)/d theta built one rank-one tensor at a time."""
    cols = []
    for m, n in enumerate(model.dims):
        for i in range(n):
            for t in range(model.rank):
                vecs = []
                for j, nj in enumerate(model.dims):
                    if j == m:
                        e = np.zeros(nj)
                        e[i] = 1.0
                        vecs.append(e)
                    else:
                        vecs.append(model.factors[j][:, t])
                cols.append(model.weights[t] * rank_one(vecs).ravel())
    return np.column_stack(cols)


class TestSolverConfig:
    def test_defaults_are_valid(self):
        SolverConfig()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"max_iters": 0},
            {"rel_fit_tol": 0.0},
            {"abs_fit_tol": -1.0},
            {"lm_damping_init": 0.0},
            {"lm_damping_grow": 1.0},
            {"lm_damping_shrink": 1.0},
            {"n_random_starts": -1},
            {"seed": -3},
        ],
    )
    def test_invalid_fields(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)


class TestRandomInit:
    def test_shapes(self):
        model = random_init([3, 3, 4, 3], 5, np.random.default_rng(1))
        assert [f.shape for f in model.factors] == [(3, 5), (3, 5), (4, 5), (3, 5)]

    def test_same_seed_identical(self):
        a = random_init([2, 3], 2, np.random.default_rng(9))
        b = random_init([2, 3], 2, np.random.default_rng(9))
        assert a == b

    def test_different_seeds_differ(self):
        a = random_init([2, 3], 2, np.random.default_rng(1))
        b = random_init([2, 3], 2, np.random.default_rng(2))
        assert a != b

    def test_entries_in_unit_interval(self):
        model = random_init([4, 4], 3, np.random.default_rng(3))
        for f in model.factors:
            assert np.all((f >= 0) & (f < 1))


class TestNvecInit:
    def test_rank_one_target_recovers_directions(self):
        vecs = [np.array([3.0, 4.0]), np.array([1.0, 2.0, 2.0])]
        target = rank_one(vecs)
        model = nvec_init(target, 1)
        for f, v in zip(model.factors, vecs):
            unit = v / np.linalg.norm(v)
            col = f[:, 0]
            assert min(
                np.abs(col - unit).max(), np.abs(col + unit).max()
            ) < 1e-12

    def test_padding_when_mode_smaller_than_rank(self):
        rng = np.random.default_rng(4)
        target = rng.random((2, 3, 4))
        model = nvec_init(target, 3, seed=11)
        assert model.factors[0].shape == (2, 3)
        # leading columns are genuine left singular vectors of the unfolding
        u = np.linalg.svd(unfold(target, 0), full_matrices=False)[0]
        for t in range(2):
            col = model.factors[0][:, t]
            assert min(
                np.abs(col - u[:, t]).max(), np.abs(col + u[:, t]).max()
            ) < 1e-10
        # the padded column is unit norm
        assert np.linalg.norm(model.factors[0][:, 2]) == pytest.approx(1.0, abs=1e-12)

    def test_zero_tensor_pads_everything(self):
        model = nvec_init(np.zeros((2, 3)), 2, seed=5)
        for f in model.factors:
            np.testing.assert_allclose(np.linalg.norm(f, axis=0), 1.0, atol=1e-12)
        assert frobenius_dist(np.zeros((2, 3)), np.zeros((2, 3))) == 0.0

    def test_deterministic_given_seed(self):
        target = np.random.default_rng(6).random((2, 3))
        assert nvec_init(target, 3, seed=7) == nvec_init(target, 3, seed=7)


class TestGradientAndNormalMatrix:
    def test_structured_normal_matrix_matches_brute_force(self):
        rng = np.random.default_rng(12)
        for dims, r in [((2, 2), 2), ((2, 3, 4), 3), ((3, 3, 3, 2), 2)]:
            model = CPModel(
                tuple(rng.random((n, r)) for n in dims), rng.random(r) + 0.5
            )
            j = brute_force_jacobian(model)
            h = _normal_matrix(model.factors, model.weights)
            assert np.abs(h - j.T @ j).max() < 1e-10

    def test_gradient_matches_brute_force_jacobian(self):
        rng = np.random.default_rng(13)
        dims, r = (3, 2, 4), 3
        model = CPModel(tuple(rng.random((n, r)) for n in dims), rng.random(r) + 0.5)
        target = rng.random(dims)
        j = brute_force_jacobian(model)
        res = (reconstruct(model) - target).ravel()
        assert np.abs(cp_gradient(target, model) - j.T @ res).max() < 1e-10

    def test_gradient_matches_central_finite_differences(self):
        # 20 random instances, dims up to 4x4x4, rank up to 3
        rng = np.random.default_rng(14)
        step = 1e-6
        for case in range(20):
            order = int(rng.integers(2, 4))
            dims = tuple(int(d) for d in rng.integers(2, 5, size=order))
            r = int(rng.integers(1, 4))
            model = random_init(dims, r, rng)
            target = rng.random(dims)
            grad = cp_gradient(target, model)
            x0 = flatten_factors(model.factors)

            def f(vec):
                m = CPModel(unflatten_factors(vec, dims, r), model.weights)
                d = reconstruct(m) - target
                return 0.5 * float(np.vdot(d, d))

            fd = np.empty_like(x0)
            for p in range(len(x0)):
                e = np.zeros_like(x0)
                e[p] = step
                fd[p] = (f(x0 + e) - f(x0 - e)) / (2 * step)
            rel = np.abs(fd - grad).max() / max(np.abs(grad).max(), 1e-12)
            assert rel < 1e-4, f"case {case}: relative error {rel}"


class TestALS:
    def test_exact_recovery_rank2(self):
        # ALS converges linearly, so give it room: many sweeps, tight rel tol
        truth = random_model([2, 2, 2], 2, seed=20)
        target = reconstruct(truth)
        best = np.inf
        cfg = SolverConfig(max_iters=2000, rel_fit_tol=1e-14)
        for i in range(20):
            fit = als_decompose(target, 2, random_model([2, 2, 2], 2, seed=100 + i), cfg)
            best = min(best, fit.frob_error)
        assert best < 1e-8

    def test_zero_target_zero_factors(self):
        target = np.zeros((2, 3, 2))
        init = CPModel(tuple(np.zeros((n, 2)) for n in (2, 3, 2)))
        fit = als_decompose(target, 2, init, SolverConfig())
        assert fit.frob_error == 0.0

    def test_rank_one_fixed_point(self):
        vecs = [[0.2, 0.8], [0.5, 0.5], [0.9, 0.1]]
        target = rank_one(vecs)
        init = CPModel(tuple(np.asarray(v, float)[:, None] for v in vecs))
        fit = als_decompose(target, 1, init, SolverConfig())
        assert fit.max_error < 1e-10

    def test_monotone_over_sweeps(self):
        # 50 random (target, init) pairs; error never increases per sweep
        rng = np.random.default_rng(21)
        single = SolverConfig(max_iters=1, rel_fit_tol=1e-300)
        for case in range(50):
            dims = tuple(int(d) for d in rng.integers(2, 4, size=3))
            r = int(rng.integers(1, 4))
            target = rng.random(dims)
            model = random_init(dims, r, rng)
            prev = frobenius_dist(reconstruct(model), target)
            for _ in range(5):
                fit = als_decompose(target, r, model, single)
                assert fit.frob_error <= prev + 1e-10, f"case {case}"
                prev = fit.frob_error
                model = fit.model

    def test_dims_mismatch(self):
        with pytest.raises(ValueError, match="dims"):
            als_decompose(np.zeros((2, 2)), 1, random_model([2, 3], 1, 0), SolverConfig())
        with pytest.raises(ValueError, match="rank"):
            als_decompose(np.zeros((2, 3)), 2, random_model([2, 3], 1, 0), SolverConfig())


class TestLM:
    def test_exact_recovery_rank2(self):
        truth = random_model([2, 2, 2], 2, seed=22)
        target = reconstruct(truth)
        fits = [
            lm_decompose(target, 2, random_model([2, 2, 2], 2, seed=200 + i), SolverConfig())
            for i in range(10)
        ]
        assert min(f.frob_error for f in fits) < 1e-8

    def test_usually_faster_than_als_on_recovery(self):
        truth = random_model([2, 2, 2], 2, seed=23)
        target = reconstruct(truth)
        init = random_model([2, 2, 2], 2, seed=30)
        cfg = SolverConfig(max_iters=500)
        lm = lm_decompose(target, 2, init, cfg)
        als = als_decompose(target, 2, init, cfg)
        if lm.frob_error < 1e-8 and als.frob_error < 1e-8:
            assert lm.iterations <= als.iterations

    def test_zero_residual_start_converges_immediately(self):
        truth = random_model([3, 2, 2], 2, seed=24)
        target = reconstruct(truth)
        fit = lm_decompose(target, 2, truth, SolverConfig())
        assert fit.converged
        assert fit.iterations <= 2
        assert fit.frob_error < 1e-12

    def test_never_worse_than_init(self):
        rng = np.random.default_rng(25)
        for _ in range(10):
            dims = tuple(int(d) for d in rng.integers(2, 4, size=3))
            r = int(rng.integers(1, 3))
            target = rng.random(dims)
            init = random_init(dims, r, rng)
            init_err = frobenius_dist(reconstruct(init), target)
            fit = lm_decompose(target, r, init, SolverConfig(max_iters=50))
            assert fit.frob_error <= init_err + 1e-12

    def test_non_finite_target_aborts(self):
        target = np.full((2, 2), np.inf)
        with pytest.raises(SolverNumericalError):
            lm_decompose(target, 1, random_model([2, 2], 1, 0), SolverConfig())

    def test_errors_recomputed_at_return(self):
        rng = np.random.default_rng(26)
        target = rng.random((2, 3, 2))
        fit = lm_decompose(target, 2, random_init(target.shape, 2, rng), SolverConfig())
        recon = reconstruct(fit.model)
        assert fit.frob_error == pytest.approx(frobenius_dist(recon, target), abs=1e-14)
        assert fit.max_error == pytest.approx(max_abs_diff(recon, target), abs=1e-14)


class TestMultiStart:
    def test_recovery_with_paper_budget(self):
        # 10 random + 1 nvec start on a synthetic rank-2 target
        truth = random_model([3, 3, 3], 2, seed=27)
        target = reconstruct(truth)
        fit = multi_start_decompose(target, 2, QUICK)
        assert fit.max_error < 1e-6

    def test_single_nvec_start_equals_direct_call(self):
        rng = np.random.default_rng(28)
        target = rng.random((2, 3, 2))
        cfg = SolverConfig(n_random_starts=0, use_nvec_start=True, seed=5)
        fit = multi_start_decompose(target, 2, cfg)
        direct = lm_decompose(target, 2, nvec_init(target, 2, seed=5), cfg)
        assert fit.model == direct.model
        assert fit.start_kind == "nvec"

    def test_deterministic(self):
        rng = np.random.default_rng(29)
        target = rng.random((2, 2, 3))
        a = multi_start_decompose(target, 2, QUICK)
        b = multi_start_decompose(target, 2, QUICK)
        assert a.model == b.model
        assert (a.max_error, a.frob_error, a.start_kind, a.start_index) == (
            b.max_error,
            b.frob_error,
            b.start_kind,
            b.start_index,
        )

    def test_no_starts_rejected(self):
        cfg = SolverConfig(n_random_starts=0, use_nvec_start=False)
        with pytest.raises(ValueError, match="start"):
            multi_start_decompose(np.zeros((2, 2)), 1, cfg)

    def test_all_aborting_starts_propagate(self):
        target = np.full((2, 2), np.nan)
        with pytest.raises(SolverNumericalError, match="every start"):
            multi_start_decompose(target, 1, QUICK)

    def test_scaling_indeterminacy_changes_no_error(self):
        truth = random_model([2, 3, 2], 2, seed=31)
        target = reconstruct(truth)
        fit = multi_start_decompose(target, 2, QUICK)
        c = 3.7
        rescaled = CPModel(
            (fit.model.factors[0] * c, fit.model.factors[1] / c, fit.model.factors[2]),
            fit.model.weights,
        )
        recon = reconstruct(rescaled)
        assert max_abs_diff(recon, target) == pytest.approx(fit.max_error, abs=1e-9)
        assert frobenius_dist(recon, target) == pytest.approx(fit.frob_error, abs=1e-9)

    def test_unfolding_bound_rank_is_exact(self):
        # stacking one term per column of the largest-mode unfolding is an
        # exact decomposition, so the solver must reach ~0 error there
        rng = np.random.default_rng(32)
        t = rng.random((2, 2, 3))
        t /= t.sum(axis=-1, keepdims=True)
        bound = t.size // max(t.shape)  # 4
        fit = multi_start_decompose(t, bound, QUICK)
        assert fit.max_error < 1e-8

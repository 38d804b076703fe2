import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from bayesrisk.exceptions import DimensionError
from bayesrisk.gaussian import empirical_moments, make_rng, moment_standard_errors
from bayesrisk.problem import (
    LinearForwardModel,
    ProblemInstance,
    RegularizationSpec,
    deconvolution_truth,
    make_deconvolution,
    make_random_instance,
    make_scalar_unit,
    simulate_batch,
    simulate_data,
)


class TestDeconvolution:
    def test_no_blur_limit(self):
        inst = make_deconvolution(16, 1e-6, 0.1, seed=0)
        assert np.max(np.abs(inst.model.forward - np.eye(16))) <= 1e-6

    @pytest.mark.parametrize("n", [4, 7, 32, 64])
    @pytest.mark.parametrize("width", [0.3, 1.0, 3.0, 10.0])
    def test_rows_normalized_and_nonnegative(self, n, width):
        f = make_deconvolution(n, width, 0.1).model.forward
        assert np.all(f >= 0)
        assert_allclose(f.sum(axis=1), 1.0, atol=1e-12)

    def test_circulant(self):
        f = make_deconvolution(12, 1.5, 0.1).model.forward
        for i in range(12):
            assert_allclose(f[i], np.roll(f[0], i), atol=1e-15)

    def test_conditioning_grows_with_width(self):
        wide = np.linalg.svd(make_deconvolution(64, 3.0, 0.1).model.forward, compute_uv=False)
        narrow = np.linalg.svd(make_deconvolution(64, 0.5, 0.1).model.forward, compute_uv=False)
        assert wide[0] / wide[-1] > narrow[0] / narrow[-1]

    def test_noise_and_penalty(self):
        inst = make_deconvolution(8, 1.0, 0.2, beta=0.5)
        assert_allclose(inst.model.noise_cov, 0.04 * np.eye(8))
        assert_array_equal(inst.regularization.reg, np.eye(8))
        assert inst.regularization.beta == 0.5
        assert_array_equal(inst.regularization.reference, np.zeros(8))

    def test_truth(self):
        x = np.arange(10) / 10
        expected = np.exp(-((x - 0.3) ** 2) / 0.01) + (x >= 0.6)
        assert_allclose(deconvolution_truth(10), expected)

    def test_small_grid_rejected(self):
        with pytest.raises(ValueError):
            make_deconvolution(3, 1.0, 0.1)


class TestRandomInstance:
    def test_deterministic(self):
        a, b = make_random_instance(5, 7, seed=3), make_random_instance(5, 7, seed=3)
        assert_array_equal(a.model.forward, b.model.forward)
        assert_array_equal(a.model.noise_cov, b.model.noise_cov)
        assert_array_equal(a.regularization.reg, b.regularization.reg)
        assert_array_equal(a.truth, b.truth)

    def test_scalar_dims(self):
        inst = make_random_instance(1, 1, seed=0)
        assert inst.model.forward.shape == (1, 1)
        assert inst.param_dim == inst.data_dim == 1

    @pytest.mark.parametrize("seed", range(5))
    def test_misfit_hessian_psd(self, seed):
        h = make_random_instance(10, 15, seed=seed).model.misfit_hessian()
        assert_array_equal(h, h.T)
        assert np.linalg.eigvalsh(h).min() >= -1e-10


class TestValidation:
    def test_noise_shape(self):
        with pytest.raises(DimensionError):
            LinearForwardModel(np.ones((3, 2)), np.eye(2))

    def test_beta_positive(self):
        with pytest.raises(ValueError):
            RegularizationSpec(0.0, np.eye(2), np.zeros(2))

    def test_reference_dim(self):
        with pytest.raises(DimensionError):
            RegularizationSpec(1.0, np.eye(2), np.zeros(3))

    def test_instance_dims(self):
        model = LinearForwardModel(np.ones((3, 2)), np.eye(3))
        with pytest.raises(DimensionError):
            ProblemInstance(model, RegularizationSpec.identity(3))
        with pytest.raises(DimensionError):
            ProblemInstance(model, RegularizationSpec.identity(2), truth=np.zeros(3))


class TestSimulateData:
    def test_vanishing_noise(self):
        inst = ProblemInstance(
            LinearForwardModel(np.random.default_rng(0).standard_normal((4, 3)), 1e-12 * np.eye(4)),
            RegularizationSpec.identity(3),
        )
        m = np.array([1.0, -2.0, 0.5])
        assert np.max(np.abs(simulate_data(inst, m, seed=1) - inst.model.forward @ m)) < 1e-4

    def test_scalar_arithmetic(self):
        inst = ProblemInstance(LinearForwardModel([[2.0]], [[1.0]]), RegularizationSpec.identity(1))
        eta0 = make_rng(0).standard_normal(1)
        assert_array_equal(simulate_data(inst, [3.0], seed=0), 6.0 + eta0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            simulate_data(make_scalar_unit(), [1.0, 2.0], seed=0)

    def test_deterministic(self):
        inst = make_random_instance(3, 4, seed=0)
        assert_array_equal(simulate_data(inst, inst.truth, 9), simulate_data(inst, inst.truth, 9))

    def test_standard_noise_over_seeds(self):
        inst = ProblemInstance(LinearForwardModel(np.eye(2), np.eye(2)), RegularizationSpec.identity(2))
        ys = np.array([simulate_data(inst, np.zeros(2), seed=s) for s in range(100_000)])
        _, cov = empirical_moments(ys)
        assert np.max(np.abs(cov - np.eye(2))) < 0.05

    def test_residual_has_noise_law(self):
        inst = make_random_instance(3, 4, seed=1)
        m = inst.truth
        eta = simulate_batch(inst, m, 100_000, seed=2) - inst.model.forward @ m
        mean, cov = empirical_moments(eta)
        se_mean, se_cov = moment_standard_errors(eta)
        assert np.all(np.abs(mean) <= 4 * se_mean)
        assert np.all(np.abs(cov - inst.model.noise_cov) <= 4 * se_cov)

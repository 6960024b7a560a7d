import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from nlstm.core.exceptions import ConfigError, NonFiniteError, ShapeError, TargetIndexError
from nlstm.core.numerics import (
    Activation,
    activate,
    activate_grad,
    glorot_uniform,
    make_rng,
    matmul,
    orthogonal,
    softmax_xent,
    softmax_xent_rows,
)


class TestMatmul:
    """Produit matriciel"""

    def test_identity_left(self, rng):
        m = rng.standard_normal((3, 3))
        assert_array_equal(matmul(np.eye(3), m), m)

    def test_zero_annihilates(self, rng):
        m = rng.standard_normal((3, 3))
        assert_array_equal(matmul(np.zeros((3, 3)), m), np.zeros((3, 3)))

    def test_matches_naive_triple_loop(self, rng):
        a, b = rng.standard_normal((4, 3)), rng.standard_normal((3, 2))
        naive = np.zeros((4, 2))
        for i in range(4):
            for j in range(2):
                for k in range(3):
                    naive[i, j] += a[i, k] * b[k, j]
        assert_allclose(matmul(a, b), naive, rtol=0, atol=1e-12)

    def test_associative(self, rng):
        a, b, c = rng.standard_normal((3, 4)), rng.standard_normal((4, 5)), rng.standard_normal((5, 2))
        assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), rtol=1e-9)

    def test_vector_times_matrix(self, rng):
        v, m = rng.standard_normal(3), rng.standard_normal((3, 2))
        assert matmul(v, m).shape == (2,)

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError) as excinfo:
            matmul(np.zeros((2, 3)), np.zeros((4, 5)))
        assert "(2, 3)" in str(excinfo.value) and "(4, 5)" in str(excinfo.value)
        assert isinstance(excinfo.value, ValueError)

    def test_non_finite_output_raises(self):
        with pytest.raises(NonFiniteError):
            matmul(np.array([[np.inf]]), np.array([[1.0]]))


class TestActivations:
    """Activations élément par élément et leurs dérivées"""

    def test_reference_points(self):
        assert activate(np.array([0.0]), Activation.SIGMOID)[0] == 0.5
        assert activate(np.array([0.0]), Activation.TANH)[0] == 0.0
        assert_array_equal(activate(np.array([-3.0, 7.0]), Activation.IDENTITY), [-3.0, 7.0])

    def test_ranges(self, rng):
        v = rng.standard_normal(1000) * 3
        s = activate(v, Activation.SIGMOID)
        t = activate(v, Activation.TANH)
        assert ((s > 0) & (s < 1)).all()
        assert ((t > -1) & (t < 1)).all()

    def test_sigmoid_keeps_relative_precision_when_negative(self):
        v = np.array([-30.0, -100.0, -700.0])
        out = activate(v, Activation.SIGMOID)
        assert (out > 0).all()
        assert_allclose(out, np.exp(v) / (1.0 + np.exp(v)), rtol=1e-14)

    @pytest.mark.parametrize("kind", [Activation.SIGMOID, Activation.TANH])
    def test_monotone(self, kind):
        v = np.linspace(-20, 20, 2001)
        assert (np.diff(activate(v, kind)) >= 0).all()

    def test_sigmoid_saturation_is_stable(self):
        out = activate(np.array([-1000.0, 1000.0]), Activation.SIGMOID)
        assert_allclose(out, [0.0, 1.0])

    @pytest.mark.parametrize("kind", list(Activation))
    def test_grad_matches_finite_differences(self, rng, kind):
        v = rng.standard_normal(20)
        eps = 1e-6
        numeric = (activate(v + eps, kind) - activate(v - eps, kind)) / (2 * eps)
        assert_allclose(activate_grad(activate(v, kind), kind), numeric, rtol=1e-6, atol=1e-9)


class TestSoftmaxXent:
    """Entropie croisée softmax"""

    def test_uniform_logits_give_log_v(self):
        loss, _ = softmax_xent(np.zeros(50), 3)
        assert loss == pytest.approx(math.log(50), abs=1e-12)

    def test_saturated_logits_do_not_overflow(self):
        loss, dlogits = softmax_xent(np.array([1000.0, 0.0]), 0)
        assert loss == pytest.approx(0.0, abs=1e-12)
        assert np.isfinite(dlogits).all()

    def test_gradient_matches_finite_differences(self, rng):
        logits = rng.standard_normal(5)
        _, dlogits = softmax_xent(logits, 2)
        eps = 1e-6
        numeric = np.zeros(5)
        for k in range(5):
            bumped = logits.copy()
            bumped[k] += eps
            up, _ = softmax_xent(bumped, 2)
            bumped[k] -= 2 * eps
            down, _ = softmax_xent(bumped, 2)
            numeric[k] = (up - down) / (2 * eps)
        assert_allclose(dlogits, numeric, atol=1e-7)

    def test_loss_non_negative_and_gradient_sums_to_zero(self, rng):
        logits = rng.standard_normal((30, 7)) * 4
        targets = rng.integers(0, 7, size=30)
        losses, dlogits = softmax_xent_rows(logits, targets)
        assert (losses >= 0).all()
        assert_allclose(dlogits.sum(axis=1), 0.0, atol=1e-12)

    @pytest.mark.parametrize("target", [-1, 5])
    def test_out_of_range_target(self, target):
        with pytest.raises(TargetIndexError) as excinfo:
            softmax_xent(np.zeros(5), target)
        assert isinstance(excinfo.value, IndexError)


class TestInitializers:
    """Générateur et initialisations Glorot / orthogonale"""

    def test_same_seed_same_stream(self):
        assert_array_equal(make_rng(42).standard_normal(10), make_rng(42).standard_normal(10))

    def test_negative_seed_rejected(self):
        with pytest.raises(ConfigError):
            make_rng(-1)

    def test_glorot_bound(self, rng):
        w = glorot_uniform(rng, 3, 3)
        assert w.shape == (3, 3)
        assert (np.abs(w) <= 1.0).all()

    def test_glorot_variance(self):
        w = glorot_uniform(make_rng(0), 600, 600)
        target = 2.0 / 1200
        assert abs(w.var() - target) / target < 0.1

    def test_glorot_deterministic(self):
        assert_array_equal(glorot_uniform(make_rng(42), 4, 5), glorot_uniform(make_rng(42), 4, 5))

    def test_glorot_zero_fan(self, rng):
        with pytest.raises(ConfigError):
            glorot_uniform(rng, 0, 3)

    def test_orthogonal_square(self, rng):
        q = orthogonal(rng, 4, 4)
        assert np.abs(q.T @ q - np.eye(4)).max() < 1e-10

    def test_orthogonal_tall_has_orthonormal_columns(self, rng):
        q = orthogonal(rng, 6, 4)
        assert q.shape == (6, 4)
        assert np.abs(q.T @ q - np.eye(4)).max() < 1e-10

    def test_orthogonal_wide_has_orthonormal_rows(self, rng):
        q = orthogonal(rng, 3, 7)
        assert np.abs(q @ q.T - np.eye(3)).max() < 1e-10

    def test_orthogonal_singular_values(self, rng):
        singular = np.linalg.svd(orthogonal(rng, 5, 5), compute_uv=False)
        assert_allclose(singular, 1.0, atol=1e-10)

import numpy as np
import pytest

import oracles
from rpolab.errors import ConfigError, InternalError
from rpolab.nn import Adam, Mlp, ParameterStore, clip_grad_norm, orthogonal_init


class TestOrthogonalInit:
    def test_square_gram_is_identity(self, rng):
        w = orthogonal_init(8, 8, 1.0, rng)
        np.testing.assert_allclose(w @ w.T, np.eye(8), atol=1e-10)

    def test_tall_columns_orthonormal(self, rng):
        w = orthogonal_init(64, 8, 1.0, rng)
        np.testing.assert_allclose(w.T @ w, np.eye(8), atol=1e-10)

    def test_wide_rows_orthonormal(self, rng):
        w = orthogonal_init(8, 64, 1.0, rng)
        np.testing.assert_allclose(w @ w.T, np.eye(8), atol=1e-10)

    def test_gain_scales_gram(self, rng):
        w = orthogonal_init(16, 16, 3.0, rng)
        np.testing.assert_allclose(w @ w.T, 9.0 * np.eye(16), atol=1e-9)

    def test_deterministic_given_seed(self):
        a = orthogonal_init(6, 4, 1.0, np.random.default_rng(3))
        b = orthogonal_init(6, 4, 1.0, np.random.default_rng(3))
        assert np.array_equal(a, b)
        c = orthogonal_init(6, 4, 1.0, np.random.default_rng(4))
        assert not np.array_equal(a, c)

    def test_rejects_empty_dims(self, rng):
        with pytest.raises(ConfigError):
            orthogonal_init(0, 4, 1.0, rng)


class TestParameterStore:
    def test_duplicate_name_rejected(self):
        store = ParameterStore()
        store.register("w", np.zeros(2))
        with pytest.raises(ConfigError):
            store.register("w", np.zeros(2))

    def test_zeros_like_matches_shapes(self):
        store = ParameterStore()
        store.register("a", np.ones((2, 3)))
        store.register("b", np.ones(4))
        grads = store.zeros_like()
        assert grads["a"].shape == (2, 3) and grads["b"].shape == (4,)
        assert not grads["a"].any() and not grads["b"].any()

    def test_equals_is_bitwise(self):
        s1, s2 = ParameterStore(), ParameterStore()
        s1.register("a", np.array([1.0, 2.0]))
        s2.register("a", np.array([1.0, 2.0]))
        assert s1.equals(s2)
        s2["a"][1] = np.nextafter(2.0, 3.0)
        assert not s1.equals(s2)

    def test_all_finite(self):
        store = ParameterStore()
        p = store.register("a", np.array([1.0, 2.0]))
        assert store.all_finite()
        p[0] = np.inf
        assert not store.all_finite()


class TestMlpForward:
    @pytest.mark.parametrize("sizes", [[3, 5, 2], [4, 8, 8, 1], [2, 2]])
    def test_matches_naive_recomputation(self, sizes, rng):
        mlp = Mlp(sizes, [1.0] * (len(sizes) - 1), rng)
        x = rng.standard_normal((6, sizes[0]))
        y, _ = mlp.forward(x)
        expected = oracles.naive_mlp_forward(mlp.weights, mlp.biases, x)
        np.testing.assert_allclose(y, expected, atol=1e-12)

    def test_rejects_wrong_input_shape(self, rng):
        mlp = Mlp([3, 2], [1.0], rng)
        with pytest.raises(ConfigError):
            mlp.forward(np.zeros((4, 5)))

    def test_small_gain_output_layer(self, rng):
        mlp = Mlp([4, 8, 2], [np.sqrt(2.0), 0.01], rng)
        norms = np.linalg.norm(mlp.weights[-1], axis=1)
        np.testing.assert_allclose(norms, 0.01, rtol=1e-10)

    def test_biases_start_zero(self, rng):
        mlp = Mlp([3, 5, 2], [1.0, 1.0], rng)
        assert all(not b.any() for b in mlp.biases)


def _loss_of(mlp, x, c):
    y, _ = mlp.forward(x)
    return float((c * y).sum() + np.sin(y).sum())


def mlp_fd_max_rel_err(num_trials: int, seed: int = 0) -> float:
    """Worst relative error of analytic vs finite-difference gradients.

    Random small nets (widths <= 16, depth <= 3 hidden layers), random
    batches, loss L = sum(c * y) + sum(sin(y)). Shared with the
    acceptance suite.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(num_trials):
        depth = int(rng.integers(1, 4))
        sizes = [int(rng.integers(1, 17)) for _ in range(depth + 2)]
        gains = [float(rng.uniform(0.5, 2.0)) for _ in range(depth + 1)]
        mlp = Mlp(sizes, gains, rng)
        x = rng.standard_normal((int(rng.integers(1, 9)), sizes[0]))
        c = rng.standard_normal((x.shape[0], sizes[-1]))

        y, cache = mlp.forward(x)
        layer_grads, dx = mlp.backward(cache, c + np.cos(y))

        for k in range(mlp.n_layers):
            for analytic, param in ((layer_grads[k][0], mlp.weights[k]),
                                    (layer_grads[k][1], mlp.biases[k])):
                numeric = _fd_on_live(mlp, x, c, param)
                worst = max(worst, float(oracles.rel_err(analytic, numeric).max()))
        worst = max(worst, float(oracles.rel_err(dx, _fd_on_live(mlp, x, c, x)).max()))
    return worst


def _fd_on_live(mlp, x, c, param, h=1e-5):
    """Finite differences through the real parameter array, in place.

    Multi-index assignment so the perturbation lands in the live array
    regardless of its memory layout.
    """
    grad = np.zeros_like(param)
    for idx in np.ndindex(param.shape):
        orig = param[idx]
        param[idx] = orig + h
        fp = _loss_of(mlp, x, c)
        param[idx] = orig - h
        fm = _loss_of(mlp, x, c)
        param[idx] = orig
        grad[idx] = (fp - fm) / (2.0 * h)
    return grad


class TestMlpBackward:
    def test_gradients_match_finite_differences(self):
        assert mlp_fd_max_rel_err(num_trials=100) < 1e-4

    def test_stale_cache_detected(self, rng):
        mlp = Mlp([3, 4, 2], [1.0, 1.0], rng)
        _, cache = mlp.forward(rng.standard_normal((5, 3)))
        with pytest.raises(InternalError):
            mlp.backward(cache[:1], np.zeros((5, 2)))


class TestAdam:
    def test_three_steps_match_reference(self):
        store = ParameterStore()
        store.register("w", np.array([1.0, -2.0]))
        store.register("b", np.array([[0.5]]))
        grads_seq = [
            {"w": np.array([0.1, -0.3]), "b": np.array([[1.0]])},
            {"w": np.array([-0.2, 0.05]), "b": np.array([[0.0]])},
            {"w": np.array([0.4, 0.4]), "b": np.array([[-2.0]])},
        ]
        expected = oracles.adam_reference(
            {"w": [1.0, -2.0], "b": [[0.5]]}, grads_seq, lr=0.01)
        opt = Adam(store, lr=0.01)
        for grads in grads_seq:
            opt.step(grads)
        np.testing.assert_allclose(store["w"], expected["w"], atol=1e-12)
        np.testing.assert_allclose(store["b"], expected["b"], atol=1e-12)

    def test_lr_override(self):
        store = ParameterStore()
        store.register("w", np.array([1.0]))
        opt = Adam(store, lr=0.5)
        opt.step({"w": np.array([1.0])}, lr=0.0)
        assert store["w"][0] == 1.0

    def test_non_finite_parameter_raises(self):
        store = ParameterStore()
        store.register("w", np.array([1.0]))
        opt = Adam(store, lr=0.1)
        with pytest.raises(InternalError):
            opt.step({"w": np.array([np.inf])})


class TestClipGradNorm:
    def test_returns_pre_clip_norm_and_rescales(self):
        grads = {"g": np.array([3.0, 4.0])}
        norm = clip_grad_norm(grads, 0.5)
        assert norm == 5.0
        new_norm = np.linalg.norm(grads["g"])
        assert abs(new_norm - 0.5) < 1e-6
        np.testing.assert_allclose(grads["g"], np.array([3.0, 4.0]) * 0.5 / (5.0 + 1e-6))

    def test_below_threshold_untouched(self):
        g = np.array([0.1, 0.2])
        grads = {"g": g.copy()}
        norm = clip_grad_norm(grads, 0.5)
        assert norm == pytest.approx(np.linalg.norm(g), abs=1e-15)
        assert np.array_equal(grads["g"], g)

    def test_norm_spans_multiple_arrays(self):
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        assert clip_grad_norm(grads, 100.0) == 5.0

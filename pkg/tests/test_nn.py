import json
import math

import numpy as np
import pytest

from edlaas.ckks import CKKSBackend, ReferenceBackend, decrypt_values
from edlaas.errors import (
    DepthBudgetError,
    ModelFileError,
    NonFiniteError,
    TrainingStateError,
    UnsupportedOnEncryptedError,
)
from edlaas.nn import (
    SENTINEL_VALUE,
    ActivationSpec,
    ModelWeights,
    Trace,
    TrainState,
    approximation_bound,
    backward,
    forward,
    forward_plain,
    init_graph,
    load_model,
    model_from_dict,
    model_to_dict,
    mse,
    precheck,
    reference_graph,
    save_model,
    sgd_update,
    sigmoid_approx,
    sigmoid_derivative,
    sigmoid_true,
    slot_outputs_plain,
    train,
)

# Max |sigmoid(x) - approx(x)| over [-5, 5] step 0.01, frozen from a
# standalone math.exp loop (see test_bound_oracle_recomputed).
B_STAR = 0.05103077471101358
B_STAR_AT = 3.83


def _window(graph, slots, rng):
    x = rng.uniform(0, 1, (graph.window, graph.n_features))
    steps = np.zeros((graph.window, slots))
    steps[:, :graph.n_features] = x
    steps[:, -1] = SENTINEL_VALUE
    return x, steps


class TestActivation:
    def test_known_values(self):
        assert sigmoid_approx(0.0) == 0.5
        assert sigmoid_approx(1.0) == pytest.approx(0.693)
        assert sigmoid_approx(-1.0) == pytest.approx(0.307)
        assert sigmoid_true(0.0) == 0.5

    def test_true_sigmoid_stable(self):
        out = sigmoid_true(np.array([-800.0, 800.0]))
        assert np.all(np.isfinite(out)) and out[0] == 0.0 and out[1] == 1.0

    def test_bound_oracle_recomputed(self):
        worst, at = 0.0, 0.0
        for i in range(1001):
            x = -5.0 + 0.01 * i
            d = abs(1.0 / (1.0 + math.exp(-x)) - (0.5 + 0.197 * x - 0.004 * x ** 3))
            if d > worst:
                worst, at = d, x
        assert worst == pytest.approx(B_STAR, abs=1e-12)
        assert abs(at) == pytest.approx(B_STAR_AT)

    def test_bound_implementation(self):
        dev, at = approximation_bound()
        assert dev == pytest.approx(B_STAR, abs=1e-12)
        assert abs(at) == pytest.approx(B_STAR_AT)

    def test_inverse_by_roots(self):
        # approx(x) = 0.7 has exactly one real root near 1.038
        roots = np.roots([-0.004, 0.0, 0.197, 0.5 - 0.7])
        real = roots[np.abs(roots.imag) < 1e-12].real
        x = real[np.argmin(np.abs(real - 1))]
        assert x == pytest.approx(1.03793235, abs=1e-8)
        assert sigmoid_approx(x) == pytest.approx(0.7, abs=1e-12)

    def test_derivatives(self):
        x = np.linspace(-3, 3, 13)
        h = 1e-6
        num = (sigmoid_approx(x + h) - sigmoid_approx(x - h)) / (2 * h)
        assert np.allclose(sigmoid_derivative(x, "sigmoid_approx"), num, atol=1e-8)
        s = sigmoid_true(x)
        num = (sigmoid_true(x + h) - sigmoid_true(x - h)) / (2 * h)
        assert np.allclose(sigmoid_derivative(s, "sigmoid_true"), num, atol=1e-8)

    def test_encrypted_matches_plain(self, small_params, small_keys, rng):
        be = CKKSBackend(small_params, small_keys, rng)
        x = rng.uniform(-1, 1, small_params.slot_count)
        out = sigmoid_approx(be.encrypt(x), be)
        assert out.level == small_params.max_level - 3
        assert out.scale == small_params.scale
        got = decrypt_values(out, small_keys.secret_key, small_params)
        assert np.max(np.abs(got - sigmoid_approx(x))) < 1e-3

    def test_true_sigmoid_refuses_ciphertexts(self, small_params):
        ref = ReferenceBackend(small_params)
        with pytest.raises(UnsupportedOnEncryptedError):
            sigmoid_true(ref.encrypt(0.1))
        with pytest.raises(UnsupportedOnEncryptedError):
            sigmoid_derivative(ref.encrypt(0.1))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ActivationSpec("relu")
        assert ActivationSpec().depth == 3
        assert ActivationSpec("sigmoid_true").depth == 0


class TestGraph:
    def test_reference_depth(self):
        g = reference_graph(5)
        assert g.depth_budget == 5
        assert [n for n, _ in g.node_depths] == ["conv1d", "activation", "dense"]

    def test_level_trace(self, small_params, small_keys, rng):
        g = reference_graph(5)
        be = CKKSBackend(small_params, small_keys, rng)
        _, steps = _window(g, small_params.slot_count, rng)
        trace = Trace()
        out = forward(g, [be.encrypt(s) for s in steps], be, trace)
        assert trace.levels() == [("input", 5), ("conv1d", 4), ("activation", 1), ("dense", 0)]
        assert out.scale == small_params.scale

    def test_precheck_names_node(self):
        g = reference_graph(5)
        with pytest.raises(DepthBudgetError) as err:
            precheck(g, 4)
        assert err.value.node == "dense"
        with pytest.raises(DepthBudgetError) as err:
            precheck(g, 2)
        assert err.value.node == "activation"
        precheck(g, 5)

    def test_encrypted_equals_reference_and_plain(self, small_params, small_keys, rng):
        g = reference_graph(5, seed=3)
        be = CKKSBackend(small_params, small_keys, rng)
        ref = ReferenceBackend(small_params)
        x, steps = _window(g, small_params.slot_count, rng)
        enc = decrypt_values(forward(g, [be.encrypt(s) for s in steps], be), small_keys.secret_key, small_params)
        clear = ref.decrypt(forward(g, [ref.encrypt(s) for s in steps], ref))
        assert np.max(np.abs(enc - clear)) < 1e-3
        assert np.allclose(clear[:5], slot_outputs_plain(g, x), atol=1e-12)
        assert clear[:5].sum() == pytest.approx(forward_plain(g, x).y[0], abs=1e-12)
        assert clear[-1] == pytest.approx(g.expected_sentinel(), abs=1e-12)
        assert np.allclose(clear[5:-1], 0.0)

    def test_window_length_checked(self, small_params):
        g = reference_graph(5)
        ref = ReferenceBackend(small_params)
        with pytest.raises(ValueError):
            forward(g, [ref.encrypt(0.1)] * 2, ref)

    def test_true_sigmoid_not_encryptable(self, small_params):
        g = init_graph(3, 2, activation=ActivationSpec("sigmoid_true"))
        ref = ReferenceBackend(small_params)
        with pytest.raises(UnsupportedOnEncryptedError):
            forward(g, [ref.encrypt(0.1)] * 3, ref)

    def test_weight_shapes(self):
        with pytest.raises(ValueError):
            ModelWeights(np.zeros(3), np.zeros(3), np.zeros(3), 0.0)
        w = init_graph(3, 4).weights
        assert np.array_equal(ModelWeights.from_flat(w.flat(), 3, 4).flat(), w.flat())


class TestTraining:
    def _data(self, seed=0, n=64, t=3, f=4):
        rng = np.random.default_rng(seed)
        x = rng.uniform(0, 1, (n, t, f))
        y = 0.3 * x[:, -1, 0] + 0.2 * x[:, 0, 1] + 0.1
        return x, y

    def test_gradients_match_finite_differences(self):
        x, y = self._data(n=8)
        g = init_graph(3, 4, seed=1, scale=0.5)
        cache = forward_plain(g, x)
        grads = backward(g, cache, 2 * (cache.y - y) / len(y)).flat()
        flat = g.weights.flat()
        h = 1e-5
        for i in range(flat.size):
            up, dn = flat.copy(), flat.copy()
            up[i] += h
            dn[i] -= h
            num = (mse(g.with_weights(ModelWeights.from_flat(up, 3, 4)), x, y)
                   - mse(g.with_weights(ModelWeights.from_flat(dn, 3, 4)), x, y)) / (2 * h)
            assert abs(grads[i] - num) <= 1e-4 * max(abs(num), 1e-8) + 1e-10

    def test_train_reduces_loss_and_is_deterministic(self):
        x, y = self._data()
        g1, l1 = train(init_graph(3, 4, seed=0), x, y, 30, 0.5, seed=7)
        g2, l2 = train(init_graph(3, 4, seed=0), x, y, 30, 0.5, seed=7)
        assert l1 == l2
        assert np.array_equal(g1.weights.flat(), g2.weights.flat())
        assert l1[-1] < 0.5 * l1[0]

    def test_frozen_weights(self):
        x, y = self._data()
        g0 = init_graph(3, 4)
        g, _ = train(g0, x, y, 2, 0.5, frozen=("conv_kernel",))
        assert np.array_equal(g.weights.conv_kernel, g0.weights.conv_kernel)
        with pytest.raises(ValueError):
            train(g0, x, y, 1, 0.5, frozen=("nope",))

    def test_sgd_step(self):
        g = init_graph(2, 2)
        grads = ModelWeights(np.ones((2, 2)), np.ones(2), np.ones(2), 1.0)
        state = TrainState(0.1)
        new = sgd_update(g.weights, grads, state)
        assert np.allclose(new.flat(), g.weights.flat() - 0.1)
        assert state.iteration == 1

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite(self):
        g = init_graph(2, 2)
        bad = ModelWeights(np.full((2, 2), np.nan), np.ones(2), np.ones(2), 1.0)
        with pytest.raises(NonFiniteError):
            sgd_update(g.weights, bad, TrainState(0.1))
        x, y = self._data(t=2, f=2)
        with pytest.raises(NonFiniteError):
            train(g, x * 1e6, y, 3, 1e6)

    def test_state_errors(self):
        g = init_graph(3, 4)
        with pytest.raises(TrainingStateError):
            backward(g, None, [1.0])
        with pytest.raises(TrainingStateError):
            train(g, np.zeros((0, 3, 4)), np.zeros(0), 1, 0.1)
        with pytest.raises(ValueError):
            TrainState(0.0)


class TestModelFiles:
    def test_roundtrip(self, tmp_path):
        g = reference_graph(5, seed=2)
        path = save_model(g, tmp_path / "m.json", "ref")
        mid, back = load_model(path)
        assert mid == "ref"
        assert np.array_equal(back.weights.flat(), g.weights.flat())
        assert json.loads(path.read_text())["architecture"]["depth_budget"] == 5

    @pytest.mark.parametrize("mutate", [
        lambda d: d.update(format="other"),
        lambda d: d.update(version=99),
        lambda d: d["architecture"].update(depth_budget=4),
        lambda d: d["weights"].pop("conv_bias"),
        lambda d: d.update(model_id=""),
    ])
    def test_malformed(self, mutate):
        d = model_to_dict(reference_graph(5), "ref")
        mutate(d)
        with pytest.raises(ModelFileError):
            model_from_dict(d)

    def test_garbage_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ModelFileError):
            load_model(p)

"""Encrypted 1D-CNN: conv over timesteps, cubic sigmoid, slot-wise dense.

Each timestep of a window is one ciphertext whose slots hold that timestep's
features (zero padded). The network is applied slot-wise:

    z_f = sum_t w[t, f] * x[t, f] + b[f]
    y_f = v[f] * act(z_f)   (+ c in slot 0)
    prediction = sum_f y_f

The final sum over slots needs rotations, which the scheme does not offer, so
the client performs it after decryption. The last slot is a sentinel: inputs
carry ``SENTINEL_VALUE`` there, the encoded weights pass it through unchanged
(kernel 1/T, dense weight 1), and the decrypted output must show
``act(SENTINEL_VALUE)``. Anything else means the wrong key or corruption.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import (
    DepthBudgetError,
    InvalidParamsError,
    NonFiniteError,
    OutOfLevelsError,
    ParameterMismatchError,
    TrainingStateError,
    UnsupportedOnEncryptedError,
)
from .activation import ActivationSpec, sigmoid_approx

SENTINEL_VALUE = 0.5


@dataclass(frozen=True, eq=False)
class LayerWeights:
    """Slot-level weights: ``kernel[t]`` and ``bias`` are scalars or slot vectors."""

    kernel: tuple
    bias: object = 0.0
    stride: int = 1

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be a positive integer")
        for w in list(self.kernel) + [self.bias]:
            if not np.all(np.isfinite(np.asarray(w, dtype=np.float64))):
                raise ValueError("weights must be finite")

    @property
    def width(self) -> int:
        return len(self.kernel)


@dataclass(frozen=True, eq=False)
class ModelWeights:
    """Trainable parameters at feature level (no padding, no sentinel)."""

    conv_kernel: np.ndarray  # (T, F)
    conv_bias: np.ndarray  # (F,)
    dense_weight: np.ndarray  # (F,)
    dense_bias: float

    def __post_init__(self):
        k = np.array(self.conv_kernel, dtype=np.float64)
        if k.ndim != 2:
            raise ValueError("conv kernel must be (timesteps, features)")
        object.__setattr__(self, "conv_kernel", k)
        object.__setattr__(self, "conv_bias", np.array(self.conv_bias, dtype=np.float64).reshape(k.shape[1]))
        object.__setattr__(self, "dense_weight", np.array(self.dense_weight, dtype=np.float64).reshape(k.shape[1]))
        object.__setattr__(self, "dense_bias", float(self.dense_bias))

    NAMES = ("conv_kernel", "conv_bias", "dense_weight", "dense_bias")

    def items(self):
        return [(name, getattr(self, name)) for name in self.NAMES]

    def flat(self) -> np.ndarray:
        return np.concatenate([np.ravel(v) for _, v in self.items()])

    @classmethod
    def from_flat(cls, vec, window: int, n_features: int) -> "ModelWeights":
        t, f = window, n_features
        vec = np.asarray(vec, dtype=np.float64)
        return cls(vec[: t * f].reshape(t, f), vec[t * f: t * f + f],
                   vec[t * f + f: t * f + 2 * f], vec[t * f + 2 * f])


@dataclass(frozen=True, eq=False)
class ComputeGraph:
    window: int
    n_features: int
    weights: ModelWeights
    activation: ActivationSpec = field(default_factory=ActivationSpec)
    stride: int = 1

    def __post_init__(self):
        if self.weights.conv_kernel.shape != (self.window, self.n_features):
            raise ValueError("kernel shape does not match (window, n_features)")
        if self.stride < 1:
            raise ValueError("stride must be a positive integer")

    NODES = ("conv1d", "activation", "dense")

    @property
    def node_depths(self) -> list[tuple[str, int]]:
        return [("conv1d", 1), ("activation", self.activation.depth), ("dense", 1)]

    @property
    def depth_budget(self) -> int:
        return sum(d for _, d in self.node_depths)

    def input_shape(self, slot_count: int) -> tuple[int, int, int]:
        return (self.window, 1, slot_count)

    @property
    def layers(self) -> list[dict]:
        return [
            {"type": "conv1d", "width": self.window, "features": self.n_features, "stride": self.stride},
            {"type": "activation", "kind": self.activation.kind,
             "coefficients": list(self.activation.coefficients)},
            {"type": "dense", "features": self.n_features},
        ]

    def with_weights(self, weights: ModelWeights) -> "ComputeGraph":
        return replace(self, weights=weights)

    def check_params(self, params) -> None:
        """Static check that the graph fits the chain and slot count."""
        if self.n_features >= params.slot_count:
            raise InvalidParamsError("features must leave the last slot free for the sentinel")
        if self.depth_budget > params.max_level:
            raise DepthBudgetError(
                f"graph needs {self.depth_budget} levels, chain offers {params.max_level}")

    # slot layouts used on the encrypted path
    def slot_weights(self, slot_count: int) -> tuple[LayerWeights, LayerWeights]:
        f = self.n_features
        w = self.weights

        def vec(values, sentinel):
            out = np.zeros(slot_count)
            out[:f] = values
            out[-1] = sentinel
            return out

        conv = LayerWeights(tuple(vec(w.conv_kernel[t], 1.0 / self.window) for t in range(self.window)),
                            vec(w.conv_bias, 0.0), self.stride)
        dense_bias = np.zeros(slot_count)
        dense_bias[0] = w.dense_bias
        dense = LayerWeights((vec(w.dense_weight, 1.0),), dense_bias)
        return conv, dense

    def expected_sentinel(self) -> float:
        return float(self.activation(SENTINEL_VALUE))


def init_graph(window: int, n_features: int, seed: int = 0, scale: float = 0.1,
               activation: ActivationSpec | None = None) -> ComputeGraph:
    rng = np.random.default_rng(seed)
    weights = ModelWeights(
        rng.normal(0.0, scale, size=(window, n_features)),
        np.zeros(n_features),
        rng.normal(0.0, scale, size=n_features),
        0.0,
    )
    return ComputeGraph(window, n_features, weights, activation or ActivationSpec())


def reference_graph(n_features: int, seed: int = 0) -> ComputeGraph:
    """Three-timestep window, one filter, cubic sigmoid, one dense output."""
    return init_graph(3, n_features, seed)


def _plain_scale(backend, ct) -> float:
    """Plaintext scale that makes a rescaled product land on the parameter scale."""
    return backend.params.scale * backend.params.modulus_chain[ct.level] / ct.scale


def conv1d_forward(window, weights: LayerWeights, backend):
    """sum_t ct_t * w_t + b, one multiplicative level regardless of width."""
    if len(window) != weights.width:
        raise ValueError(f"window of {len(window)} timesteps, kernel expects {weights.width}")
    first = window[0]
    for ct in window[1:]:
        if ct.level != first.level or ct.scale != first.scale:
            raise ParameterMismatchError("window ciphertexts must share level and scale")
    acc = None
    for ct, w in zip(window, weights.kernel):
        pt = backend.encode(w, level=ct.level, scale=_plain_scale(backend, ct))
        term = backend.multiply_plain(ct, pt)
        acc = term if acc is None else backend.add(acc, term)
    return backend.add_plain(acc, backend.encode(weights.bias, level=acc.level, scale=acc.scale))


def dense_forward(ct, weights: LayerWeights, backend):
    """Slot-wise w * x + b: one plaintext product and one plaintext sum."""
    (w,) = weights.kernel
    out = backend.multiply_plain(ct, backend.encode(w, level=ct.level, scale=_plain_scale(backend, ct)))
    return backend.add_plain(out, backend.encode(weights.bias, level=out.level, scale=out.scale))


@dataclass
class Trace:
    nodes: list = field(default_factory=list)

    def record(self, node, ct):
        self.nodes.append((node, ct.level, ct.scale))

    def levels(self) -> list[tuple[str, int]]:
        return [(n, lvl) for n, lvl, _ in self.nodes]


def precheck(graph: ComputeGraph, level: int) -> None:
    """Fail before any work if the input level cannot cover the graph."""
    needed = 0
    for node, depth in graph.node_depths:
        needed += depth
        if needed > level:
            raise DepthBudgetError(
                f"graph needs {graph.depth_budget} levels, input has {level}", node=node)


def forward(graph: ComputeGraph, window, backend, trace: Trace | None = None):
    """Encrypted (or reference) forward pass over one window of ciphertexts.

    Returns the per-slot prediction ciphertext; ``trace`` collects
    (node, level, scale) after every node.
    """
    if graph.activation.kind != "sigmoid_approx":
        raise UnsupportedOnEncryptedError("only sigmoid_approx can run on ciphertexts")
    if len(window) != graph.window:
        raise ValueError(f"window of {len(window)} timesteps, graph expects {graph.window}")
    precheck(graph, window[0].level)
    graph.check_params(backend.params)
    trace = trace if trace is not None else Trace()
    conv_w, dense_w = graph.slot_weights(backend.params.slot_count)
    trace.record("input", window[0])
    node = "conv1d"
    try:
        ct = conv1d_forward(window, conv_w, backend)
        trace.record(node, ct)
        node = "activation"
        ct = sigmoid_approx(ct, backend, graph.activation.coefficients)
        trace.record(node, ct)
        node = "dense"
        ct = dense_forward(ct, dense_w, backend)
        trace.record(node, ct)
    except OutOfLevelsError as exc:
        if exc.node is not None:
            raise
        raise OutOfLevelsError(str(exc), node=node) from exc
    return ct


def predictions_from_slots(slots: np.ndarray, n_features: int) -> float:
    return float(np.sum(slots[:n_features]))


# plaintext training path

@dataclass
class ForwardCache:
    x: np.ndarray  # (B, T, F)
    z: np.ndarray  # (B, F)
    a: np.ndarray  # (B, F)
    y: np.ndarray  # (B,)


def forward_plain(graph: ComputeGraph, x) -> ForwardCache:
    """Batched float64 forward pass; ``x`` is (B, T, F) or a single (T, F)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    w = graph.weights
    z = np.einsum("btf,tf->bf", x, w.conv_kernel) + w.conv_bias
    a = np.asarray(graph.activation(z))
    y = a @ w.dense_weight + w.dense_bias
    return ForwardCache(x, z, a, y)


def slot_outputs_plain(graph: ComputeGraph, x) -> np.ndarray:
    """Per-feature outputs y_f for one window (what the slots hold)."""
    c = forward_plain(graph, x)
    out = c.a[0] * graph.weights.dense_weight
    out[0] += graph.weights.dense_bias
    return out


def backward(graph: ComputeGraph, cache: ForwardCache | None, loss_gradient) -> ModelWeights:
    """Chain rule from dL/dy back to every weight, summed over the batch."""
    if cache is None:
        raise TrainingStateError("backward needs the forward cache")
    g = np.asarray(loss_gradient, dtype=np.float64).reshape(-1)
    if g.shape[0] != cache.y.shape[0]:
        raise TrainingStateError("loss gradient does not match the cached batch")
    w = graph.weights
    d_dense_w = g @ cache.a
    d_dense_b = float(np.sum(g))
    d_a = g[:, None] * w.dense_weight[None, :]
    d_z = d_a * graph.activation.derivative(cache.z)
    d_conv_k = np.einsum("bf,btf->tf", d_z, cache.x)
    d_conv_b = d_z.sum(axis=0)
    return ModelWeights(d_conv_k, d_conv_b, d_dense_w, d_dense_b)


@dataclass
class TrainState:
    learning_rate: float
    iteration: int = 0
    gradients: ModelWeights | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")


def sgd_update(weights: ModelWeights, gradients: ModelWeights, state: TrainState,
               frozen: tuple[str, ...] = ()) -> ModelWeights:
    """w <- w - l * dL/dw, then advance the iteration counter."""
    for name, g in gradients.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {name} at iteration {state.iteration}: {g}")
    new = {}
    for name, w in weights.items():
        new[name] = w if name in frozen else w - state.learning_rate * getattr(gradients, name)
    state.gradients = gradients
    state.iteration += 1
    return ModelWeights(**new)


def mse(graph: ComputeGraph, x, targets) -> float:
    y = forward_plain(graph, x).y
    return float(np.mean((y - np.asarray(targets, dtype=np.float64)) ** 2))


def train(graph: ComputeGraph, x, targets, epochs: int, learning_rate: float, *,
          batch_size: int | None = 16, seed: int = 0,
          frozen: tuple[str, ...] = ()) -> tuple[ComputeGraph, list[float]]:
    """Mini-batch gradient descent on MSE.

    Returns the trained graph and the loss curve; entry 0 is the loss before
    the first update, entry ``e`` the loss after epoch ``e``.
    """
    x = np.asarray(x, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if len(x) == 0:
        raise TrainingStateError("empty dataset")
    if len(x) != len(targets):
        raise TrainingStateError("windows and targets differ in length")
    unknown = set(frozen) - set(ModelWeights.NAMES)
    if unknown:
        raise ValueError(f"unknown weight names {sorted(unknown)}")
    rng = np.random.default_rng(seed)
    state = TrainState(learning_rate)
    batch = len(x) if not batch_size else min(batch_size, len(x))
    losses = [mse(graph, x, targets)]
    for epoch in range(epochs):
        order = rng.permutation(len(x))
        for start in range(0, len(x), batch):
            idx = order[start:start + batch]
            cache = forward_plain(graph, x[idx])
            grad_y = 2.0 * (cache.y - targets[idx]) / len(idx)
            grads = backward(graph, cache, grad_y)
            graph = graph.with_weights(sgd_update(graph.weights, grads, state, frozen))
        loss = mse(graph, x, targets)
        if not np.isfinite(loss):
            raise NonFiniteError(f"loss became {loss} in epoch {epoch + 1}")
        losses.append(loss)
    return graph, losses

"""Small dense feed-forward networks with hand-written backprop.

Networks operate on row batches: an input of shape ``(n, in_dim)`` maps to
``(n, out_dim)``. A 1-D input is treated as a single row and a 1-D output is
returned for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "tanh", "linear")
MODEL_HEADER = "GANDI-NET v1"

# sigmoid pre-activations are clipped to this magnitude
SIGMOID_CLIP = 30.0


class ModelFormatError(ValueError):
    """Base class for model-file problems."""


class ModelVersionError(ModelFormatError):
    pass


class TruncatedModelError(ModelFormatError):
    pass


class ModelDimensionError(ModelFormatError):
    pass


def _activate(tag, z):
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "sigmoid":
        return 1.0 / (1.0 + np.exp(-np.clip(z, -SIGMOID_CLIP, SIGMOID_CLIP)))
    if tag == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(tag, z, a, grad_a):
    # grad_a is dL/da; returns dL/dz
    if tag == "relu":
        return grad_a * (z > 0.0)
    if tag == "sigmoid":
        g = grad_a * a * (1.0 - a)
        # clipped region has zero derivative
        return np.where(np.abs(z) > SIGMOID_CLIP, 0.0, g)
    if tag == "tanh":
        return grad_a * (1.0 - a * a)
    return grad_a


class DenseNet:
    """Stack of affine layers, each followed by an activation.

    ``weights[i]`` has shape ``(layer_sizes[i+1], layer_sizes[i])`` (rows are
    outputs) and ``biases[i]`` has shape ``(layer_sizes[i+1],)``.
    """

    def __init__(self, layer_sizes, activations, weights=None, biases=None, rng=None):
        layer_sizes = [int(s) for s in layer_sizes]
        activations = list(activations)
        if len(layer_sizes) < 2 or any(s <= 0 for s in layer_sizes):
            raise ValueError(f"invalid layer sizes {layer_sizes}")
        if len(activations) != len(layer_sizes) - 1:
            raise ValueError(
                f"need {len(layer_sizes) - 1} activation tags, got {len(activations)}"
            )
        for tag in activations:
            if tag not in ACTIVATIONS:
                raise ValueError(f"unknown activation {tag!r}")
        self.layer_sizes = layer_sizes
        self.activations = activations

        if weights is None:
            if rng is None:
                raise ValueError("an rng is required to initialise weights")
            weights, biases = [], []
            for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
                biases.append(np.zeros(fan_out))
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]
        self._check_shapes()

    def _check_shapes(self):
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ModelDimensionError(
                f"{len(self.layer_sizes)} layer sizes need {len(self.layer_sizes) - 1} "
                f"weight matrices, got {len(self.weights)} matrices and {len(self.biases)} biases"
            )
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_sizes[i + 1], self.layer_sizes[i])
            if w.shape != expect or b.shape != (expect[0],):
                raise ModelDimensionError(
                    f"layer {i}: weight {w.shape} / bias {b.shape}, expected {expect} / ({expect[0]},)"
                )

    @property
    def in_dim(self):
        return self.layer_sizes[0]

    @property
    def out_dim(self):
        return self.layer_sizes[-1]

    def parameters(self):
        """Flat list ``[W0, b0, W1, b1, ...]`` of the live parameter arrays."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        return params

    def copy(self):
        return DenseNet(self.layer_sizes, self.activations,
                        [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def all_finite(self):
        return all(np.all(np.isfinite(p)) for p in self.parameters())

    def forward(self, x, return_cache=False):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"expected input width {self.in_dim}, got shape {x.shape}")
        cache = [(None, x)]
        a = x
        for w, b, tag in zip(self.weights, self.biases, self.activations):
            z = a @ w.T + b
            a = _activate(tag, z)
            cache.append((z, a))
        out = a[0] if single else a
        if return_cache:
            return out, cache
        return out

    __call__ = forward

    def backward(self, cache, output_grad):
        """Backpropagate ``dL/d(output)`` through a cached forward pass.

        Returns ``(param_grads, input_grad)`` where ``param_grads`` lines up with
        :meth:`parameters`.
        """
        grad = np.asarray(output_grad, dtype=float)
        if grad.ndim == 1:
            grad = grad[None, :]
        n = cache[0][1].shape[0]
        if grad.shape != (n, self.out_dim):
            raise ValueError(f"output gradient shape {grad.shape} != {(n, self.out_dim)}")
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            z, a = cache[i + 1]
            dz = _activation_grad(self.activations[i], z, a, grad)
            a_prev = cache[i][1]
            grads[2 * i] = dz.T @ a_prev
            grads[2 * i + 1] = dz.sum(axis=0)
            grad = dz @ self.weights[i]
        return grads, grad


def forward(net, x):
    return net.forward(x)


def backward(net, x, output_grad):
    """Parameter gradients of ``sum(output * output_grad)`` at input ``x``."""
    _, cache = net.forward(x, return_cache=True)
    grads, _ = net.backward(cache, output_grad)
    return grads


@dataclass
class OptimizerState:
    kind: str
    lr: float
    buffers: dict = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    rho: float = 0.95
    eps: float = 1e-8

    @classmethod
    def adam(cls, net, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        params = net.parameters()
        return cls("adam", lr, {"m": [np.zeros_like(p) for p in params],
                                "v": [np.zeros_like(p) for p in params]},
                   beta1=beta1, beta2=beta2, eps=eps)

    @classmethod
    def adadelta(cls, net, lr=1.0, rho=0.95, eps=1e-6):
        params = net.parameters()
        return cls("adadelta", lr, {"sq_grad": [np.zeros_like(p) for p in params],
                                    "sq_delta": [np.zeros_like(p) for p in params]},
                   rho=rho, eps=eps)


def _check_grads(net, grads, state, kind):
    if state.kind != kind:
        raise ValueError(f"optimizer state is {state.kind!r}, not {kind!r}")
    params = net.parameters()
    if len(grads) != len(params):
        raise ValueError(f"got {len(grads)} gradients for {len(params)} parameters")
    for p, g in zip(params, grads):
        if np.shape(g) != p.shape:
            raise ValueError(f"gradient shape {np.shape(g)} != parameter shape {p.shape}")
    return params


def adam_step(net, grads, state):
    """In-place Adam update with bias correction. Returns ``(net, state)``."""
    params = _check_grads(net, grads, state, "adam")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.step
    corr2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.buffers["m"], state.buffers["v"]):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
    return net, state


def adadelta_step(net, grads, state):
    """In-place Adadelta update scaled by ``state.lr``. Returns ``(net, state)``."""
    params = _check_grads(net, grads, state, "adadelta")
    state.step += 1
    rho, eps = state.rho, state.eps
    for p, g, sg, sd in zip(params, grads, state.buffers["sq_grad"], state.buffers["sq_delta"]):
        sg *= rho
        sg += (1.0 - rho) * g * g
        delta = np.sqrt(sd + eps) / np.sqrt(sg + eps) * g
        sd *= rho
        sd += (1.0 - rho) * delta * delta
        p -= state.lr * delta
    return net, state


def optimizer_step(net, grads, state):
    if state.kind == "adam":
        return adam_step(net, grads, state)
    return adadelta_step(net, grads, state)


# -- model files -------------------------------------------------------------

def _fmt(values):
    return " ".join(f"{v:.17g}" for v in np.ravel(values))


def format_model(net):
    lines = [MODEL_HEADER,
             " ".join(str(s) for s in net.layer_sizes),
             " ".join(net.activations)]
    for w, b in zip(net.weights, net.biases):
        lines.extend(_fmt(row) for row in w)
        lines.append(_fmt(b))
    return "\n".join(lines) + "\n"


def parse_model(text):
    lines = text.splitlines()
    if not lines or lines[0].strip() != MODEL_HEADER:
        found = lines[0].strip() if lines else ""
        raise ModelVersionError(f"expected header {MODEL_HEADER!r}, found {found!r}")
    if len(lines) < 3:
        raise TruncatedModelError("model file ends before the layer description")
    try:
        sizes = [int(tok) for tok in lines[1].split()]
    except ValueError as exc:
        raise ModelFormatError(f"bad layer-size line: {lines[1]!r}") from exc
    tags = lines[2].split()
    if len(tags) != len(sizes) - 1:
        raise ModelDimensionError(f"{len(sizes)} layer sizes but {len(tags)} activation tags")
    body = [ln for ln in lines[3:] if ln.strip()]
    need = sum(sizes[1:]) + len(sizes) - 1
    if len(body) < need:
        raise TruncatedModelError(f"expected {need} weight/bias rows, found {len(body)}")
    if len(body) > need:
        raise ModelDimensionError(
            f"{len(sizes)} layer sizes account for {need} rows, file has {len(body)}")
    weights, biases, pos = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        rows = [np.array(body[pos + r].split(), dtype=float) for r in range(fan_out)]
        pos += fan_out
        bias = np.array(body[pos].split(), dtype=float)
        pos += 1
        if any(r.shape != (fan_in,) for r in rows) or bias.shape != (fan_out,):
            raise ModelDimensionError(f"row widths do not match layer {fan_in}->{fan_out}")
        weights.append(np.vstack(rows))
        biases.append(bias)
    return DenseNet(sizes, tags, weights, biases)


def save_model(net, path):
    Path(path).write_text(format_model(net), encoding="utf-8")


def load_model(path):
    return parse_model(Path(path).read_text(encoding="utf-8"))

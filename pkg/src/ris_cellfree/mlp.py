"""Dense networks with hand-rolled backprop, Adam, and soft target updates.

Kept deliberately small: every actor and critic in this package is a stack
of leaky-ReLU hidden layers (slope 0.01) with a tanh or linear head, so an
explicit forward/backward pair is simpler to audit than an autodiff
dependency and lets the gradient tests compare against finite differences.

Inputs may be a single vector ``(d,)`` or a batch ``(B, d)``.  Parameter
gradients returned by :func:`backward` are summed over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LEAKY_SLOPE = 0.01


@dataclass
class MlpParams:
    weights: list            # layer i: (fan_in, fan_out)
    biases: list             # layer i: (fan_out,)
    output_activation: str   # "tanh" | "linear"
    leaky_slope: float = LEAKY_SLOPE

    @property
    def widths(self) -> list:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]


@dataclass
class MlpGrads:
    d_weights: list
    d_biases: list

    def scaled(self, c: float) -> "MlpGrads":
        return MlpGrads([c * g for g in self.d_weights], [c * g for g in self.d_biases])


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m_weights: list = field(default_factory=list)
    m_biases: list = field(default_factory=list)
    v_weights: list = field(default_factory=list)
    v_biases: list = field(default_factory=list)


def init_mlp(widths, output_activation: str, rng: np.random.Generator) -> MlpParams:
    """He-uniform weights (limit sqrt(6/fan_in)), zero biases."""
    if output_activation not in ("tanh", "linear"):
        raise ValueError(f"unknown output activation {output_activation!r}")
    if len(widths) < 2:
        raise ValueError("need at least input and output widths")
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, output_activation)


def init_adam(params: MlpParams, lr: float = 1e-3) -> AdamState:
    st = AdamState(lr=lr)
    st.m_weights = [np.zeros_like(w) for w in params.weights]
    st.m_biases = [np.zeros_like(b) for b in params.biases]
    st.v_weights = [np.zeros_like(w) for w in params.weights]
    st.v_biases = [np.zeros_like(b) for b in params.biases]
    return st


def _leaky(a: np.ndarray, slope: float) -> np.ndarray:
    return np.where(a > 0, a, slope * a)


def forward(params: MlpParams, x: np.ndarray):
    """Returns (output, cache); the cache feeds :func:`backward`."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != params.weights[0].shape[0]:
        raise ValueError(
            f"input width {h.shape[1]} != expected {params.weights[0].shape[0]}"
        )
    inputs, preacts = [], []
    n = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        a = h @ w + b
        preacts.append(a)
        if i < n - 1:
            h = _leaky(a, params.leaky_slope)
        elif params.output_activation == "tanh":
            h = np.tanh(a)
        else:
            h = a
    cache = (inputs, preacts, squeeze)
    return (h[0] if squeeze else h), cache


def backward(params: MlpParams, cache, output_grad: np.ndarray):
    """Exact gradients of sum(output * output_grad) w.r.t. params and input.

    Returns ``(MlpGrads, input_grad)``; parameter gradients are summed over
    the batch, the input gradient keeps the batch shape.
    """
    inputs, preacts, squeeze = cache
    g = np.asarray(output_grad, dtype=float)
    if squeeze:
        g = g[None, :]
    if g.shape != preacts[-1].shape:
        raise ValueError("output_grad shape does not match the cached forward pass")

    n = len(params.weights)
    d_weights = [None] * n
    d_biases = [None] * n
    for i in range(n - 1, -1, -1):
        a = preacts[i]
        if i == n - 1:
            if params.output_activation == "tanh":
                g = g * (1.0 - np.tanh(a) ** 2)
        else:
            g = g * np.where(a > 0, 1.0, params.leaky_slope)
        d_weights[i] = inputs[i].T @ g
        d_biases[i] = g.sum(axis=0)
        g = g @ params.weights[i].T
    input_grad = g[0] if squeeze else g
    return MlpGrads(d_weights, d_biases), input_grad


def adam_step(params: MlpParams, grads: MlpGrads, state: AdamState):
    """One bias-corrected Adam update; returns (new params, new state)."""
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_w, new_b = [], []
    mw, mb, vw, vb = [], [], [], []

    def upd(p, g, m, v, out_p, out_m, out_v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        out_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        out_m.append(m)
        out_v.append(v)

    for p, g, m, v in zip(params.weights, grads.d_weights, state.m_weights, state.v_weights):
        upd(p, g, m, v, new_w, mw, vw)
    for p, g, m, v in zip(params.biases, grads.d_biases, state.m_biases, state.v_biases):
        upd(p, g, m, v, new_b, mb, vb)

    new_params = MlpParams(new_w, new_b, params.output_activation, params.leaky_slope)
    new_state = AdamState(state.lr, b1, b2, state.eps, t, mw, mb, vw, vb)
    return new_params, new_state


def soft_update(target: MlpParams, online: MlpParams, tau: float,
                swap_convention: bool = False) -> MlpParams:
    """Blend target toward online: theta' <- tau*theta' + (1-tau)*theta.

    ``swap_convention=True`` uses theta' <- tau*theta + (1-tau)*theta'
    instead (the common slow-target convention).
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if [w.shape for w in target.weights] != [w.shape for w in online.weights]:
        raise ValueError("target/online shapes differ")
    a, b = (tau, 1.0 - tau) if not swap_convention else (1.0 - tau, tau)
    weights = [a * wt + b * wo for wt, wo in zip(target.weights, online.weights)]
    biases = [a * bt + b * bo for bt, bo in zip(target.biases, online.biases)]
    return MlpParams(weights, biases, online.output_activation, online.leaky_slope)


def clone(params: MlpParams) -> MlpParams:
    return MlpParams([w.copy() for w in params.weights],
                     [b.copy() for b in params.biases],
                     params.output_activation, params.leaky_slope)


CHECKPOINT_VERSION = 1


def save_mlp(params: MlpParams, path) -> None:
    """Checkpoint: npz with version, widths, activation, and row-major arrays."""
    payload = {
        "version": np.array(CHECKPOINT_VERSION),
        "widths": np.array(params.widths),
        "output_activation": np.array(params.output_activation),
        "leaky_slope": np.array(params.leaky_slope),
    }
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        payload[f"W{i}"] = np.ascontiguousarray(w)
        payload[f"b{i}"] = np.ascontiguousarray(b)
    np.savez(path, **payload)


def load_mlp(path) -> MlpParams:
    with np.load(path) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        widths = data["widths"]
        n = len(widths) - 1
        weights = [data[f"W{i}"] for i in range(n)]
        biases = [data[f"b{i}"] for i in range(n)]
        return MlpParams(weights, biases, str(data["output_activation"]),
                         float(data["leaky_slope"]))

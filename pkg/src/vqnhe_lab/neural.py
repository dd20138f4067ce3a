"""Two-layer perceptron over bit strings, with hand-written backprop and Adam.

The output head depends on ``mode``:

* ``amp_bounded``  -> ``exp(ln(r) * tanh(z))`` in ``(1/r, r)``
* ``amp_positive`` -> ``exp(z)`` clamped to ``[1e-12, 1e12]``
* ``phase``        -> ``pi * tanh(z)``

Bits are fed as ``+1`` for 0 and ``-1`` for 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .simulator import basis_inputs

MODES = ("amp_bounded", "amp_positive", "phase")
POS_MIN, POS_MAX = 1e-12, 1e12
PARAM_NAMES = ("W1", "b1", "W2", "b2")


def _act(name: str, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Activation value and its derivative."""
    if name == "tanh":
        h = np.tanh(a)
        return h, 1.0 - h * h
    if name == "relu":
        return np.maximum(a, 0.0), (a > 0).astype(float)
    if name == "sigmoid":
        h = 0.5 * (1.0 + np.tanh(0.5 * a))
        return h, h * (1.0 - h)
    raise ValueError(f"unknown activation {name!r}")


def encode(bits) -> np.ndarray:
    """0/1 array (or bit string) -> +/-1 inputs."""
    if isinstance(bits, str):
        bits = [int(c) for c in bits]
    return 1.0 - 2.0 * np.asarray(bits, dtype=float)


@dataclass
class NeuralNet:
    n_in: int
    hidden: int = 64
    mode: str = "amp_bounded"
    r: float | None = 3.0
    activation: str = "tanh"
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "amp_bounded" and (self.r is None or self.r < 1.0):
            raise ValueError("amp_bounded needs r >= 1")
        _act(self.activation, np.zeros(1))
        if not self.params:
            self.params = {
                "W1": np.zeros((self.hidden, self.n_in)),
                "b1": np.zeros(self.hidden),
                "W2": np.zeros(self.hidden),
                "b2": np.zeros(()),
            }
        for k, shape in self.shapes.items():
            self.params[k] = np.asarray(self.params[k], dtype=float).reshape(shape)

    @classmethod
    def init(cls, n_in: int, rng: np.random.Generator, *, hidden: int = 64, mode: str = "amp_bounded",
             r: float | None = 3.0, activation: str = "tanh", zero_output: bool = True) -> "NeuralNet":
        """Xavier-uniform weights. With ``zero_output`` the head starts at ``z = 0``,
        i.e. ``f = 1`` or ``g = 0``, so training begins from the bare circuit."""
        lim1 = np.sqrt(6.0 / (n_in + hidden))
        lim2 = np.sqrt(6.0 / (hidden + 1))
        params = {
            "W1": rng.uniform(-lim1, lim1, size=(hidden, n_in)),
            "b1": np.zeros(hidden),
            "W2": np.zeros(hidden) if zero_output else rng.uniform(-lim2, lim2, size=hidden),
            "b2": np.zeros(()),
        }
        return cls(n_in, hidden, mode, r, activation, params)

    @property
    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {"W1": (self.hidden, self.n_in), "b1": (self.hidden,), "W2": (self.hidden,), "b2": ()}

    def copy(self) -> "NeuralNet":
        return NeuralNet(self.n_in, self.hidden, self.mode, self.r, self.activation,
                         {k: v.copy() for k, v in self.params.items()})

    def with_params(self, params: dict[str, np.ndarray]) -> "NeuralNet":
        return NeuralNet(self.n_in, self.hidden, self.mode, self.r, self.activation, params)

    # -- forward / backward over a batch of +/-1 inputs ----------------------

    def _head(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.mode == "amp_bounded":
            t = np.tanh(z)
            # r ** t rather than exp(t ln r): the endpoints come out exactly r and 1/r
            out = np.power(float(self.r), t)
            return out, out * np.log(self.r) * (1.0 - t * t)
        if self.mode == "amp_positive":
            raw = np.exp(np.clip(z, np.log(POS_MIN) - 1, np.log(POS_MAX) + 1))
            out = np.clip(raw, POS_MIN, POS_MAX)
            inside = (raw > POS_MIN) & (raw < POS_MAX)
            return out, np.where(inside, out, 0.0)
        t = np.tanh(z)
        return np.pi * t, np.pi * (1.0 - t * t)

    def forward_batch(self, x: np.ndarray, return_cache: bool = False):
        p = self.params
        a = x @ p["W1"].T + p["b1"]
        h, dh = _act(self.activation, a)
        z = h @ p["W2"] + p["b2"]
        out, dout = self._head(z)
        if return_cache:
            return out, (x, h, dh, dout)
        return out

    def backward_batch(self, cache, upstream: np.ndarray) -> dict[str, np.ndarray]:
        """Gradient of ``sum_i upstream[i] * out[i]`` w.r.t. every parameter."""
        x, h, dh, dout = cache
        gz = np.asarray(upstream, dtype=float) * dout
        ga = np.outer(gz, self.params["W2"]) * dh
        return {
            "W1": ga.T @ x,
            "b1": ga.sum(axis=0),
            "W2": h.T @ gz,
            "b2": np.asarray(gz.sum()),
        }

    def basis_values(self, return_cache: bool = False):
        """Outputs on every bit string, indexed like statevector amplitudes."""
        return self.forward_batch(encode(basis_inputs(self.n_in)), return_cache)

    # -- checkpoints ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "r": self.r, "activation": self.activation,
            "n_in": self.n_in, "hidden": self.hidden,
            "shapes": {k: list(s) for k, s in self.shapes.items()},
            "params": {k: self.params[k].ravel().tolist() for k in PARAM_NAMES},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "NeuralNet":
        params = {k: np.asarray(d["params"][k], dtype=float).reshape(d["shapes"][k]) for k in PARAM_NAMES}
        return cls(int(d["n_in"]), int(d["hidden"]), d["mode"], d.get("r"), d.get("activation", "tanh"), params)


def forward(net: NeuralNet, s) -> float:
    """Network output for one bit string (``"0101"`` or a 0/1 sequence)."""
    x = encode(s)
    if x.shape != (net.n_in,):
        raise ValueError(f"input has {x.size} bits, network expects {net.n_in}")
    return float(net.forward_batch(x[None, :])[0])


def backward(net: NeuralNet, s, upstream: float) -> dict[str, np.ndarray]:
    """Gradient of ``upstream * forward(net, s)`` w.r.t. the parameters."""
    x = encode(s)
    if x.shape != (net.n_in,):
        raise ValueError(f"input has {x.size} bits, network expects {net.n_in}")
    _, cache = net.forward_batch(x[None, :], return_cache=True)
    return net.backward_batch(cache, np.array([upstream]))


# --- Adam -------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new parameters and state."""
    if set(params) != set(grads):
        raise ValueError("parameter and gradient keys differ")
    for k in params:
        if np.shape(params[k]) != np.shape(grads[k]):
            raise ValueError(f"shape mismatch for {k}: {np.shape(params[k])} vs {np.shape(grads[k])}")
        if k in state.m and np.shape(state.m[k]) != np.shape(params[k]):
            raise ValueError(f"moment shape mismatch for {k}")
    t = state.step + 1
    m, v, new = {}, {}, {}
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=float)
        m[k] = state.beta1 * state.m.get(k, np.zeros_like(g)) + (1 - state.beta1) * g
        v[k] = state.beta2 * state.v.get(k, np.zeros_like(g)) + (1 - state.beta2) * g * g
        mhat = m[k] / (1 - state.beta1 ** t)
        vhat = v[k] / (1 - state.beta2 ** t)
        new[k] = p - state.lr * mhat / (np.sqrt(vhat) + state.eps)
    return new, AdamState(state.lr, state.beta1, state.beta2, state.eps, t, m, v)

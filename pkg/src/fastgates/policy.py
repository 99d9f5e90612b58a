"""Small softmax MLP policy with hand-rolled gradients.

Forward pass: input -> tanh hidden layers -> linear logits -> softmax.
Training entry points are the discounted policy-gradient update on a
trajectory and an MSE step toward a grid-shaped Gaussian target used for
pre-training. Gradients are exact (verified against finite differences).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class NumericError(RuntimeError):
    """A gradient or reward came out non-finite."""


CHECKPOINT_SCHEMA = "fastgates-policy-v1"


class PolicyNet:
    """Feed-forward policy; parameters live in .weights / .biases lists."""

    def __init__(
        self,
        input_dim: int,
        n_actions: int,
        hidden: tuple[int, ...] = (32, 32),
        seed=0,
    ):
        if input_dim < 1 or n_actions < 2:
            raise ValueError("need input_dim >= 1 and n_actions >= 2")
        self.input_dim = input_dim
        self.n_actions = n_actions
        self.hidden = tuple(hidden)
        rng = np.random.default_rng(seed)
        sizes = (input_dim, *hidden, n_actions)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def forward(self, state: np.ndarray) -> np.ndarray:
        return self.forward_batch(np.asarray(state, dtype=float)[None, :])[0]

    def forward_batch(self, states: np.ndarray) -> np.ndarray:
        probs, _ = self._forward_cached(states)
        return probs

    def _forward_cached(self, states: np.ndarray):
        x = np.atleast_2d(np.asarray(states, dtype=float))
        if x.shape[1] != self.input_dim:
            raise ValueError(f"state dim {x.shape[1]}, expected {self.input_dim}")
        activations = [x]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            x = np.tanh(x @ w.T + b)
            activations.append(x)
        logits = x @ self.weights[-1].T + self.biases[-1]
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        probs = e / e.sum(axis=1, keepdims=True)
        return probs, activations

    def _backward(self, activations, grad_logits):
        """Parameter gradients given d(objective)/d(logits) per row."""
        grads_w = [np.zeros_like(w) for w in self.weights]
        grads_b = [np.zeros_like(b) for b in self.biases]
        delta = grad_logits
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = delta.T @ activations[layer]
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer]) * (1.0 - activations[layer] ** 2)
        return grads_w, grads_b

    def clone(self) -> "PolicyNet":
        dup = PolicyNet.__new__(PolicyNet)
        dup.input_dim = self.input_dim
        dup.n_actions = self.n_actions
        dup.hidden = self.hidden
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup


@dataclass(frozen=True)
class Trajectory:
    """Ordered (state, action, reward) records from one training iteration."""

    states: tuple[tuple[float, ...], ...]
    actions: tuple[int, ...]
    rewards: tuple[float, ...]

    def __post_init__(self) -> None:
        n = len(self.states)
        if n == 0:
            raise ValueError("trajectory is empty")
        if len(self.actions) != n or len(self.rewards) != n:
            raise ValueError("states, actions, rewards must have equal length")
        if not np.isfinite(self.rewards).all():
            raise ValueError("non-finite reward in trajectory")
        object.__setattr__(
            self, "states", tuple(tuple(float(v) for v in s) for s in self.states)
        )
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))

    def __len__(self) -> int:
        return len(self.actions)


def returns_to_go(rewards, beta: float) -> np.ndarray:
    """Discounted suffix sums G_j = sum_m beta^(m-j) r_m."""
    out = np.zeros(len(rewards))
    acc = 0.0
    for j in range(len(rewards) - 1, -1, -1):
        acc = rewards[j] + beta * acc
        out[j] = acc
    return out


def reinforce_gradient(net: PolicyNet, traj: Trajectory, beta: float):
    """Ascent gradient sum_j (G_j - mean G) grad log pi(u_j | s_j)."""
    states = np.array(traj.states, dtype=float)
    actions = np.array(traj.actions)
    g = returns_to_go(traj.rewards, beta)
    # mean baseline would zero out a single-step trajectory entirely
    coeff = g - g.mean() if len(g) > 1 else g
    probs, activations = net._forward_cached(states)
    grad_logits = -probs * coeff[:, None]
    grad_logits[np.arange(len(actions)), actions] += coeff
    return net._backward(activations, grad_logits)


def reinforce_update(
    net: PolicyNet,
    traj: Trajectory,
    beta: float,
    learning_rate: float,
    optimizer=None,
) -> PolicyNet:
    """Apply one policy-gradient ascent step in place and return the net."""
    grads_w, grads_b = reinforce_gradient(net, traj, beta)
    for g in (*grads_w, *grads_b):
        if not np.isfinite(g).all():
            raise NumericError("non-finite policy gradient, update rejected")
    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads.extend((gw, gb))
    if optimizer is None:
        optimizer = Sgd()
    optimizer.step(net.parameters(), grads, learning_rate)
    return net


def sample_action(policy: np.ndarray, rng) -> int:
    """Categorical draw from a probability vector."""
    p = np.asarray(policy, dtype=float)
    if abs(p.sum() - 1.0) > 1e-6 or p.min() < 0:
        raise ValueError("not a probability vector")
    u = rng.random()
    return int(min(np.searchsorted(np.cumsum(p), u), len(p) - 1))


def pretrain_target(grid_values, center: float, width: float) -> np.ndarray:
    """Normalized Gaussian over grid values, centered on the wanted amplitude.

    width -> 0 collapses onto the nearest grid point.
    """
    g = np.asarray(grid_values, dtype=float)
    if width <= 0:
        t = np.zeros(len(g))
        t[np.argmin(np.abs(g - center))] = 1.0
        return t
    t = np.exp(-((g - center) ** 2) / (2.0 * width**2))
    return t / t.sum()


def mse_loss(probs: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((probs - target) ** 2))


def mse_pretrain_step(
    net: PolicyNet,
    state,
    target_center: float,
    grid_values,
    width: float,
    learning_rate: float,
    optimizer=None,
) -> float:
    """One MSE descent step toward the grid Gaussian; returns the prior loss."""
    target = pretrain_target(grid_values, target_center, width)
    if len(target) != net.n_actions:
        raise ValueError("grid size does not match the action count")
    states = np.asarray(state, dtype=float)[None, :]
    probs, activations = net._forward_cached(states)
    p = probs[0]
    dl_dp = 2.0 * (p - target) / net.n_actions
    grad_logits = (p * (dl_dp - float(dl_dp @ p)))[None, :]
    grads_w, grads_b = net._backward(activations, grad_logits)
    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads.extend((-gw, -gb))
    if optimizer is None:
        optimizer = Sgd()
    optimizer.step(net.parameters(), grads, learning_rate)
    return mse_loss(p, target)


class Sgd:
    """Plain ascent steps, optional momentum."""

    def __init__(self, momentum: float = 0.0):
        self.momentum = momentum
        self._velocity = None

    def step(self, params, grads, learning_rate: float) -> None:
        if self.momentum == 0.0:
            for p, g in zip(params, grads):
                p += learning_rate * g
            return
        if self._velocity is None:
            self._velocity = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self._velocity):
            v *= self.momentum
            v += g
            p += learning_rate * v


class Adam:
    """Adaptive-moment ascent."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = None
        self._v = None
        self._t = 0

    def step(self, params, grads, learning_rate: float) -> None:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self._t += 1
        b1t = 1.0 - self.beta1**self._t
        b2t = 1.0 - self.beta2**self._t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p += learning_rate * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def make_optimizer(name: str, momentum: float = 0.9):
    if name == "sgd":
        return Sgd(momentum=momentum)
    if name == "adam":
        return Adam()
    raise ValueError(f"unknown optimizer {name!r}")


# ---------------------------------------------------------------------------
# Checkpoints.


def checkpoint_dict(net: PolicyNet, grid_values, normalization: dict | None = None) -> dict:
    payload = {
        "schema": CHECKPOINT_SCHEMA,
        "input_dim": net.input_dim,
        "grid": [float(v) for v in grid_values],
        "layers": [
            {"w": w.tolist(), "b": b.tolist()}
            for w, b in zip(net.weights, net.biases)
        ],
    }
    if normalization is not None:
        payload["normalization"] = normalization
    return payload


def net_from_checkpoint(payload: dict) -> tuple[PolicyNet, dict]:
    if payload.get("schema") != CHECKPOINT_SCHEMA:
        raise ValueError(f"unsupported checkpoint schema {payload.get('schema')!r}")
    layers = payload["layers"]
    hidden = tuple(len(layer["b"]) for layer in layers[:-1])
    net = PolicyNet(
        input_dim=int(payload["input_dim"]),
        n_actions=len(layers[-1]["b"]),
        hidden=hidden,
    )
    net.weights = [np.array(layer["w"], dtype=float) for layer in layers]
    net.biases = [np.array(layer["b"], dtype=float) for layer in layers]
    return net, payload


def save_checkpoint(
    net: PolicyNet, grid_values, path, normalization: dict | None = None
) -> None:
    with open(path, "w") as fh:
        json.dump(checkpoint_dict(net, grid_values, normalization), fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> tuple[PolicyNet, dict]:
    with open(path) as fh:
        return net_from_checkpoint(json.load(fh))

"""Tabular Q-learning with a value-iteration oracle on finite MDPs.

Q-tables are plain (n_states, n_actions) float arrays. The learner uses
epsilon-greedy exploration with periodic uniform restarts and a per-pair
learning rate that decays with the pair's visit count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FiniteMdp:
    """Finite MDP with tabular kernel and reward.

    transition : (S, A, S') row-stochastic array, rows sum to 1 +- 1e-12
    reward     : (S, A, S') array, r(s, u, s')
    beta       : discount in [0, 1); 0 is the myopic limit
    """

    n_states: int
    n_actions: int
    transition: np.ndarray
    reward: np.ndarray
    beta: float

    def __post_init__(self) -> None:
        t = np.asarray(self.transition, dtype=float)
        r = np.asarray(self.reward, dtype=float)
        shape = (self.n_states, self.n_actions, self.n_states)
        if t.shape != shape:
            raise ValueError(f"transition shape {t.shape}, expected {shape}")
        if r.shape != shape:
            raise ValueError(f"reward shape {r.shape}, expected {shape}")
        if t.min() < 0:
            raise ValueError("negative transition probability")
        rowsums = t.sum(axis=2)
        if np.abs(rowsums - 1.0).max() > 1e-12:
            raise ValueError("transition rows must sum to 1")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")
        object.__setattr__(self, "transition", t)
        object.__setattr__(self, "reward", r)

    def mean_reward(self) -> np.ndarray:
        """Expected immediate reward per (s, u)."""
        return np.einsum("sat,sat->sa", self.transition, self.reward)


def random_mdp(
    n_states: int,
    n_actions: int,
    seed,
    deterministic: bool = False,
) -> FiniteMdp:
    """Random test MDP; deterministic kernels have one-hot transition rows."""
    rng = np.random.default_rng(seed)
    if deterministic:
        t = np.zeros((n_states, n_actions, n_states))
        nxt = rng.integers(0, n_states, size=(n_states, n_actions))
        for s in range(n_states):
            for a in range(n_actions):
                t[s, a, nxt[s, a]] = 1.0
    else:
        t = rng.uniform(0.1, 1.0, size=(n_states, n_actions, n_states))
        t /= t.sum(axis=2, keepdims=True)
    r = rng.uniform(0.0, 1.0, size=(n_states, n_actions, n_states))
    return FiniteMdp(n_states, n_actions, t, r, beta=0.9)


def q_zeros(mdp: FiniteMdp) -> np.ndarray:
    return np.zeros((mdp.n_states, mdp.n_actions))


def q_update(
    q: np.ndarray, s: int, u: int, r: float, s_next: int, alpha: float, beta: float
) -> np.ndarray:
    """One Bellman update on a copy of the table; other entries unchanged."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    out = q.copy()
    out[s, u] += alpha * (r + beta * q[s_next].max() - q[s, u])
    return out


@dataclass(frozen=True)
class LearningSchedule:
    """Per-pair rate alpha0 / (1 + visits / tau_decay).

    tau_decay = inf keeps the rate constant; finite tau_decay satisfies the
    usual sum/sum-of-squares conditions per visited pair.
    """

    alpha0: float = 1.0
    tau_decay: float = float("inf")

    def rate(self, visits: int) -> float:
        return self.alpha0 / (1.0 + visits / self.tau_decay)


@dataclass(frozen=True)
class EpsilonGreedy:
    """Exploration policy: uniform action with probability epsilon.

    restart_every > 0 teleports the walk to a uniform random state at that
    period so every state keeps being visited even when greedy actions
    trap the chain.
    """

    epsilon: float = 1.0
    restart_every: int = 50

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")


def q_learn(
    mdp: FiniteMdp,
    schedule: LearningSchedule = LearningSchedule(),
    exploration: EpsilonGreedy = EpsilonGreedy(),
    n_steps: int = 100_000,
    seed=0,
) -> np.ndarray:
    """Run tabular Q-learning and return the learned table."""
    rng = np.random.default_rng(seed)
    q = q_zeros(mdp)
    visits = np.zeros((mdp.n_states, mdp.n_actions), dtype=np.int64)
    # cumulative transition rows make next-state draws a searchsorted
    cum = np.cumsum(mdp.transition, axis=2)
    s = int(rng.integers(mdp.n_states))
    explore = rng.random(n_steps)
    uniform_actions = rng.integers(0, mdp.n_actions, size=n_steps)
    next_draws = rng.random(n_steps)
    for j in range(n_steps):
        if exploration.restart_every and j % exploration.restart_every == 0:
            s = int(rng.integers(mdp.n_states))
        if explore[j] < exploration.epsilon:
            u = int(uniform_actions[j])
        else:
            u = int(q[s].argmax())
        s_next = int(np.searchsorted(cum[s, u], next_draws[j]))
        r = mdp.reward[s, u, s_next]
        alpha = schedule.rate(int(visits[s, u]))
        visits[s, u] += 1
        q[s, u] += alpha * (r + mdp.beta * q[s_next].max() - q[s, u])
        s = s_next
    return q


def value_iteration(mdp: FiniteMdp, tol: float = 1e-12) -> np.ndarray:
    """Iterate the Bellman optimality operator to its fixed point.

    Stops when the sup-norm change is below tol * (1 - beta) / beta, which
    bounds the remaining distance to the fixed point by tol. At beta = 0
    the fixed point is the expected immediate reward.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    rbar = mdp.mean_reward()
    if mdp.beta == 0.0:
        return rbar
    q = np.zeros_like(rbar)
    threshold = tol * (1.0 - mdp.beta) / mdp.beta
    while True:
        v = q.max(axis=1)
        q_next = rbar + mdp.beta * np.einsum("sat,t->sa", mdp.transition, v)
        if np.abs(q_next - q).max() < threshold:
            return q_next
        q = q_next


def greedy_policy(q: np.ndarray) -> np.ndarray:
    return q.argmax(axis=1)


def bellman_residual(mdp: FiniteMdp, q: np.ndarray) -> float:
    """Sup-norm defect of q under the Bellman optimality operator."""
    v = q.max(axis=1)
    q_op = mdp.mean_reward() + mdp.beta * np.einsum("sat,t->sa", mdp.transition, v)
    return float(np.abs(q_op - q).max())

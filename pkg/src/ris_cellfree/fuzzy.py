"""Fuzzy agent layer: membership mapping between physical and fuzzy agents.

``n`` fuzzy agents stand in for ``P`` physical agents.  Each fuzzy agent
owns an anchor state; per-dimension memberships
``xi = exp(-|s - s_anchor| / (d_a * n))`` multiply across state dimensions
into a mapping matrix ``Xi`` (n x P), whose columns are normalized to sum
to one (``Xi_bar``).  States fuzzify and actions defuzzify through
``Xi_bar`` as weighted sums, so every physical action stays inside the
convex hull of the fuzzy actions.

Anchors are fixed at initialization; only the memberships are recomputed
as physical states evolve.  Because raw observation coordinates span
orders of magnitude, the map can standardize each dimension with running
mean/variance statistics before measuring distances (``standardize``);
the statistics merge exactly, so re-presenting the same states leaves the
map unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

_VAR_EPS = 1e-8


@dataclass(frozen=True)
class RunningStats:
    """Exact pooled mean/variance over every batch seen so far."""

    count: float
    mean: np.ndarray  # (d,)
    m2: np.ndarray    # (d,) sum of squared deviations

    @staticmethod
    def from_batch(x: np.ndarray) -> "RunningStats":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mean = x.mean(axis=0)
        return RunningStats(float(x.shape[0]), mean, ((x - mean) ** 2).sum(axis=0))

    def merged(self, x: np.ndarray) -> "RunningStats":
        other = RunningStats.from_batch(x)
        total = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / total)
        m2 = self.m2 + other.m2 + delta ** 2 * (self.count * other.count / total)
        return RunningStats(total, mean, m2)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.m2 / self.count + _VAR_EPS)


@dataclass(frozen=True)
class FuzzyMap:
    anchors: np.ndarray      # (n, d_s) raw anchor states
    action_dim: int          # d_a, sets the membership length scale with n
    xi: np.ndarray           # (n, P) raw membership products
    xi_bar: np.ndarray       # (n, P) column-normalized mapping
    standardize: bool = False
    stats: RunningStats | None = None

    @property
    def n(self) -> int:
        return self.anchors.shape[0]


def membership(s: float, s_anchor: float, d_a: int, n: int) -> float:
    """Scalar membership exp(-|s - s_anchor| / (d_a * n))."""
    scale = d_a * n
    if scale <= 0:
        raise ValueError("d_a * n must be positive")
    return float(np.exp(-abs(s - s_anchor) / scale))


def _log_xi(anchors: np.ndarray, states: np.ndarray, d_a: int,
            stats: RunningStats | None) -> np.ndarray:
    n = anchors.shape[0]
    a, s = anchors, np.atleast_2d(states)
    if s.shape[1] != a.shape[1]:
        raise ValueError("state dimension does not match anchors")
    if stats is not None:
        a = (a - stats.mean) / stats.std
        s = (s - stats.mean) / stats.std
    dist = np.abs(a[:, None, :] - s[None, :, :]).sum(axis=2)  # (n, P)
    return -dist / (d_a * n)


def mapping_matrix(fm: FuzzyMap, states: np.ndarray):
    """Recompute (Xi, Xi_bar) for the given physical states.

    Normalization is done against the per-column maximum in log space, so
    columns always sum to one even when every raw product underflows.
    """
    log_xi = _log_xi(fm.anchors, states, fm.action_dim,
                     fm.stats if fm.standardize else None)
    xi = np.exp(log_xi)
    shifted = np.exp(log_xi - log_xi.max(axis=0, keepdims=True))
    xi_bar = shifted / shifted.sum(axis=0, keepdims=True)
    return xi, xi_bar


def init_fuzzy_agents(observed_states: np.ndarray, n: int, rng: np.random.Generator,
                      action_dim: int, standardize: bool = False) -> FuzzyMap:
    """Pick n anchors uniformly from the observed states (no replacement
    when n <= P) and compute the initial mapping."""
    states = np.atleast_2d(np.asarray(observed_states, dtype=float))
    P = states.shape[0]
    if P == 0:
        raise ValueError("cannot initialize fuzzy agents from an empty observation set")
    if n < 1:
        raise ValueError("need at least one fuzzy agent")
    idx = rng.choice(P, size=n, replace=n > P)
    fm = FuzzyMap(
        anchors=states[idx].copy(),
        action_dim=action_dim,
        xi=np.zeros((n, P)),
        xi_bar=np.zeros((n, P)),
        standardize=standardize,
        stats=RunningStats.from_batch(states) if standardize else None,
    )
    xi, xi_bar = mapping_matrix(fm, states)
    return replace(fm, xi=xi, xi_bar=xi_bar)


def identity_fuzzy_map(states: np.ndarray, action_dim: int) -> FuzzyMap:
    """Anchors equal to the states in order (n = P); diagnostic pass-through."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    fm = FuzzyMap(anchors=states.copy(), action_dim=action_dim,
                  xi=np.zeros((states.shape[0],) * 2),
                  xi_bar=np.zeros((states.shape[0],) * 2))
    xi, xi_bar = mapping_matrix(fm, states)
    return replace(fm, xi=xi, xi_bar=xi_bar)


def update_membership(fm: FuzzyMap, new_states: np.ndarray) -> FuzzyMap:
    """New map for this step's states; anchors stay fixed."""
    stats = fm.stats.merged(new_states) if fm.standardize else None
    fm = replace(fm, stats=stats)
    xi, xi_bar = mapping_matrix(fm, new_states)
    return replace(fm, xi=xi, xi_bar=xi_bar)


def defuzzify_action(fm: FuzzyMap, fuzzy_actions: np.ndarray) -> np.ndarray:
    """Physical actions A (P, d_a): A_p = sum_i Xi_bar[i, p] * A_hat_i."""
    fa = np.atleast_2d(np.asarray(fuzzy_actions, dtype=float))
    if fa.shape[0] != fm.n:
        raise ValueError("one action row per fuzzy agent required")
    return fm.xi_bar.T @ fa


def fuzzify_reward(fm: FuzzyMap, rewards: np.ndarray) -> np.ndarray:
    """Fuzzy rewards r_hat (n,): r_hat_i = sum_k Xi_bar[i, k] * r_k."""
    r = np.asarray(rewards, dtype=float)
    if r.shape != (fm.xi_bar.shape[1],):
        raise ValueError("one reward per physical agent required")
    return fm.xi_bar @ r


def fuzzify_state(fm: FuzzyMap, states: np.ndarray) -> np.ndarray:
    """Fuzzy states (n, d_s): same weighted sum applied per dimension."""
    s = np.atleast_2d(np.asarray(states, dtype=float))
    if s.shape[0] != fm.xi_bar.shape[1]:
        raise ValueError("one state row per physical agent required")
    return fm.xi_bar @ s

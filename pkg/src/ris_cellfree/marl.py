"""MADDPG and FL-MADDPG trainers for joint precoding and phase control.

Agent layout (centralized training, decentralized execution):
  - one precoding agent per AP (MADDPG) or per fuzzy agent (FL-MADDPG),
    action = the AP's complex precoder, flattened to 2*M*K reals in [-1, 1];
  - one phase controller driving all RIS elements (R*N reals), acting on
    the concatenated physical states (the CPU sees everything).
Every critic scores the same global (state, joint action) pair; the
shared reward is the network sum-SE.

The FL-MADDPG loop runs the fuzzy pipeline each step: actors act on fuzzy
states, actions defuzzify to the APs, rewards and next states fuzzify
back, memberships refresh, and the fuzzy experience is what enters the
replay buffers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fuzzy as fz
from .fuzzy import FuzzyMap, RunningStats
from .mlp import (
    AdamState,
    MlpParams,
    adam_step,
    backward,
    clone,
    forward,
    init_adam,
    init_mlp,
    save_mlp,
    soft_update,
)
from .system import (
    ChannelSet,
    PhaseShiftConfig,
    PrecodingSet,
    SystemConfig,
    Topology,
    quantize_phases,
    sample_channels,
    sample_topology,
)
from .baselines import random_phases


class TrainingDiverged(RuntimeError):
    """Raised when a loss goes non-finite or past the abort threshold."""


@dataclass(frozen=True)
class TrainerConfig:
    episodes: int = 100
    steps_per_episode: int = 100
    discount: float = 0.99
    tau_precoding: float = 1e-4
    tau_phase: float = 1e-3
    swap_tau_convention: bool = False
    batch_size: int = 32
    buffer_precoding: int = 4096
    buffer_phase: int = 2048
    actor_hidden: tuple = (512,)
    critic_hidden: tuple = (256,)
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    noise_std: float = 0.2
    noise_decay: float = 0.999
    fuzzy_agents: int = 2
    fuzzy_standardize: bool = True
    fuzzy_identity_anchors: bool = False
    normalize_obs: bool = True
    discrete_bits: int | None = None
    agent_obs_offset: float = 0.0
    loss_abort: float = 1e6

    def __post_init__(self):
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if self.batch_size > min(self.buffer_precoding, self.buffer_phase):
            raise ValueError("batch_size exceeds a buffer capacity")
        if self.episodes < 1 or self.steps_per_episode < 1:
            raise ValueError("episodes and steps_per_episode must be >= 1")
        if self.fuzzy_agents < 1:
            raise ValueError("need at least one fuzzy agent")


# ---------------------------------------------------------------------------
# Observations and action decoding
# ---------------------------------------------------------------------------

def _interleave(a: np.ndarray) -> np.ndarray:
    """Complex array -> flat real vector, (re, im) per entry, C order."""
    out = np.empty(2 * a.size)
    flat = np.ravel(a)
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out


def state_dim(cfg: SystemConfig) -> int:
    """Length of one AP observation; see :func:`build_env_state` for the layout."""
    L, K, R = cfg.num_aps, cfg.num_ues, cfg.num_ris
    M, U, N = cfg.ap_antennas, cfg.ue_antennas, cfg.ris_elements
    return 2 * K * U * M + 2 * R * K * U * N + 2 * R * N * M + K + 2 * K * M + 2 * R * N + K


def build_env_state(
    ch: ChannelSet,
    phases: PhaseShiftConfig,
    prec: PrecodingSet,
    topo: Topology,
    last_sinr: np.ndarray,
    l: int,
) -> np.ndarray:
    """Flatten the local observation of AP l, in this fixed order:

    1. direct channels to every UE, ``direct[l]``      (2*K*U*M reals)
    2. all RIS-to-UE channels ``ris_ue``               (2*R*K*U*N)
    3. local AP-to-RIS channels ``ap_ris[l]``          (2*R*N*M)
    4. distances from AP l to every UE                 (K)
    5. current local precoder ``w[l]``                 (2*K*M)
    6. global reflection coefficients ``theta``        (2*R*N)
    7. previous per-UE SINRs                           (K)
    Complex blocks are interleaved (re, im).
    """
    return np.concatenate([
        _interleave(ch.direct[l]),
        _interleave(ch.ris_ue),
        _interleave(ch.ap_ris[l]),
        topo.d_ap_ue[l],
        _interleave(prec.w[l]),
        _interleave(phases.theta),
        np.asarray(last_sinr, dtype=float),
    ])


def precoder_action_dim(cfg: SystemConfig) -> int:
    return 2 * cfg.ap_antennas * cfg.num_ues


def phase_action_dim(cfg: SystemConfig) -> int:
    return cfg.num_ris * cfg.ris_elements


def decode_precoding_action(a: np.ndarray, p_max: float, num_ues: int,
                            ap_antennas: int) -> np.ndarray:
    """One AP's action in [-1, 1]^(2*M*K) -> feasible (K, M) precoder.

    De-interleaves to complex, reshapes (K, M), and scales the whole AP
    onto its power budget if the raw block exceeds it.
    """
    a = np.asarray(a, dtype=float)
    w = (a[0::2] + 1j * a[1::2]).reshape(num_ues, ap_antennas)
    power = float(np.sum(np.abs(w) ** 2))
    if power > p_max:
        w = w * np.sqrt(p_max / power)
    return w


def encode_precoding_action(w_l: np.ndarray) -> np.ndarray:
    """Inverse of the decode reshape (no power handling)."""
    return _interleave(w_l)


def decode_phase_action(a: np.ndarray, num_ris: int, ris_elements: int,
                        bits: int | None = None) -> PhaseShiftConfig:
    """Action in [-1, 1]^(R*N) -> unit-modulus phases, angle = pi*(a + 1)."""
    angles = np.pi * (np.asarray(a, dtype=float) + 1.0)
    phases = PhaseShiftConfig(theta=np.exp(1j * angles).reshape(num_ris, ris_elements))
    return quantize_phases(phases, bits) if bits is not None else phases


def joint_precoding(actions: np.ndarray, cfg: SystemConfig) -> PrecodingSet:
    """Stack per-AP decoded actions into one PrecodingSet."""
    w = np.stack([
        decode_precoding_action(actions[l], cfg.max_power, cfg.num_ues, cfg.ap_antennas)
        for l in range(actions.shape[0])
    ])
    return PrecodingSet(w)


def _effective_all(ch: ChannelSet, phases: PhaseShiftConfig) -> np.ndarray:
    """(L, K, U, M) effective channels in one einsum."""
    cascaded = np.einsum("rkun,rn,lrnm->lkum", ch.ris_ue, phases.theta,
                         ch.ap_ris, optimize=True)
    return ch.direct + cascaded


def _sinr_all(eff: np.ndarray, prec: PrecodingSet, noise_power: float) -> np.ndarray:
    """Per-UE SINRs from precomputed effective channels (U = 1)."""
    t = np.einsum("lkm,ljm->kj", eff[:, :, 0, :], prec.w, optimize=True)
    power = np.abs(t) ** 2
    desired = np.diagonal(power).copy()
    interference = power.sum(axis=1) - desired
    return desired / (interference + noise_power)


def reward(ch: ChannelSet, phases: PhaseShiftConfig, prec: PrecodingSet,
           noise_power: float, num_agents: int) -> np.ndarray:
    """Shared cooperative reward: every agent receives the network sum-SE."""
    sinrs = _sinr_all(_effective_all(ch, phases), prec, noise_power)
    return np.full(num_agents, float(np.sum(np.log2(1.0 + sinrs))))


# ---------------------------------------------------------------------------
# Agents, replay, updates
# ---------------------------------------------------------------------------

ROLE_PRECODER = "ap_precoder"
ROLE_PHASE = "ris_phase_controller"


@dataclass
class AgentSpec:
    role: str
    obs_dim: int
    action_dim: int
    actor: MlpParams
    actor_target: MlpParams
    critic: MlpParams
    critic_target: MlpParams
    actor_opt: AdamState
    critic_opt: AdamState
    obs_stats: RunningStats | None = None  # None disables normalization


@dataclass
class JointAgents:
    precoders: list
    phase: AgentSpec

    @property
    def num_precoders(self) -> int:
        return len(self.precoders)


def _make_agent(role: str, obs_dim: int, action_dim: int, critic_in: int,
                tcfg: TrainerConfig, rng: np.random.Generator) -> AgentSpec:
    actor = init_mlp([obs_dim, *tcfg.actor_hidden, action_dim], "tanh", rng)
    critic = init_mlp([critic_in, *tcfg.critic_hidden, 1], "linear", rng)
    return AgentSpec(
        role=role, obs_dim=obs_dim, action_dim=action_dim,
        actor=actor, actor_target=clone(actor),
        critic=critic, critic_target=clone(critic),
        actor_opt=init_adam(actor, tcfg.actor_lr),
        critic_opt=init_adam(critic, tcfg.critic_lr),
        obs_stats=None,
    )


def build_agents(cfg: SystemConfig, tcfg: TrainerConfig, num_precoders: int,
                 rng: np.random.Generator) -> JointAgents:
    d_s = state_dim(cfg)
    d_a = precoder_action_dim(cfg)
    d_p = phase_action_dim(cfg)
    critic_in = num_precoders * (d_s + d_a) + d_p
    precoders = [_make_agent(ROLE_PRECODER, d_s, d_a, critic_in, tcfg, rng)
                 for _ in range(num_precoders)]
    phase = _make_agent(ROLE_PHASE, cfg.num_aps * d_s, d_p, critic_in, tcfg, rng)
    return JointAgents(precoders, phase)


def _normalize(agent: AgentSpec, x: np.ndarray) -> np.ndarray:
    if agent.obs_stats is None:
        return x
    return (x - agent.obs_stats.mean) / agent.obs_stats.std


def _track(agent: AgentSpec, x: np.ndarray, enabled: bool) -> None:
    if enabled:
        batch = np.atleast_2d(x)
        agent.obs_stats = (RunningStats.from_batch(batch) if agent.obs_stats is None
                           else agent.obs_stats.merged(batch))


def act(agents: JointAgents, states: np.ndarray, phase_obs: np.ndarray,
        noise_std: float, rng: np.random.Generator):
    """Greedy actor outputs plus clipped Gaussian exploration noise.

    Noise is always drawn (then scaled), so a shared seed gives aligned
    draws regardless of the std value.
    """
    actions = np.empty((agents.num_precoders, agents.precoders[0].action_dim))
    for i, agent in enumerate(agents.precoders):
        a, _ = forward(agent.actor, _normalize(agent, states[i]))
        a = a + noise_std * rng.standard_normal(agent.action_dim)
        actions[i] = np.clip(a, -1.0, 1.0)
    pa, _ = forward(agents.phase.actor, _normalize(agents.phase, phase_obs))
    pa = pa + noise_std * rng.standard_normal(agents.phase.action_dim)
    return actions, np.clip(pa, -1.0, 1.0)


@dataclass(frozen=True)
class Transition:
    states: np.ndarray        # (P, d_s) agent states (fuzzy for FL-MADDPG)
    actions: np.ndarray       # (P, d_a)
    phase_obs: np.ndarray     # (L*d_s,)
    phase_action: np.ndarray  # (R*N,)
    rewards: np.ndarray       # (P,) per-agent rewards
    global_reward: float      # shared sum-SE (phase agent reward)
    next_states: np.ndarray
    next_phase_obs: np.ndarray


@dataclass(frozen=True)
class Batch:
    states: np.ndarray        # (B, P, d_s)
    actions: np.ndarray       # (B, P, d_a)
    phase_obs: np.ndarray     # (B, L*d_s)
    phase_actions: np.ndarray  # (B, R*N)
    rewards: np.ndarray       # (B, P)
    global_rewards: np.ndarray  # (B,)
    next_states: np.ndarray
    next_phase_obs: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring with uniform without-replacement minibatches."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items = []
        self._next = 0

    def __len__(self):
        return len(self._items)

    def add(self, tr: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(tr)
        else:
            self._items[self._next] = tr
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if batch_size > len(self._items):
            raise ValueError("not enough transitions to sample")
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        items = [self._items[i] for i in idx]
        return Batch(
            states=np.stack([t.states for t in items]),
            actions=np.stack([t.actions for t in items]),
            phase_obs=np.stack([t.phase_obs for t in items]),
            phase_actions=np.stack([t.phase_action for t in items]),
            rewards=np.stack([t.rewards for t in items]),
            global_rewards=np.array([t.global_reward for t in items]),
            next_states=np.stack([t.next_states for t in items]),
            next_phase_obs=np.stack([t.next_phase_obs for t in items]),
        )


def _critic_input(agents: JointAgents, states: np.ndarray, actions: np.ndarray,
                  phase_actions: np.ndarray) -> np.ndarray:
    """(B, P*d_s + P*d_a + R*N): normalized states, then actions, then phases."""
    B = states.shape[0]
    cols = [_normalize(agent, states[:, i])
            for i, agent in enumerate(agents.precoders)]
    return np.concatenate(cols + [actions.reshape(B, -1), phase_actions], axis=1)


def _target_joint_actions(agents: JointAgents, next_states: np.ndarray,
                          next_phase_obs: np.ndarray):
    cols = []
    for i, agent in enumerate(agents.precoders):
        a, _ = forward(agent.actor_target, _normalize(agent, next_states[:, i]))
        cols.append(a)
    pa, _ = forward(agents.phase.actor_target,
                    _normalize(agents.phase, next_phase_obs))
    return np.stack(cols, axis=1), pa


def _agent_reward(batch: Batch, index: int | None) -> np.ndarray:
    return batch.global_rewards if index is None else batch.rewards[:, index]


def critic_update(agents: JointAgents, batches: list, gamma: float) -> list:
    """One Adam step per critic on the squared TD error; returns the losses.

    ``batches`` holds one minibatch per precoding agent followed by the
    phase agent's.  Targets use the target actors and target critics:
    y = r + gamma * Q'(s', a').
    """
    losses = []
    specs = list(agents.precoders) + [agents.phase]
    for i, (agent, batch) in enumerate(zip(specs, batches)):
        reward_idx = i if agent.role == ROLE_PRECODER else None
        na, npa = _target_joint_actions(agents, batch.next_states, batch.next_phase_obs)
        next_q, _ = forward(agent.critic_target,
                            _critic_input(agents, batch.next_states, na, npa))
        y = _agent_reward(batch, reward_idx) + gamma * next_q[:, 0]
        q, cache = forward(agent.critic,
                           _critic_input(agents, batch.states, batch.actions,
                                         batch.phase_actions))
        diff = q[:, 0] - y
        loss = float(np.mean(diff ** 2))
        grads, _ = backward(agent.critic, cache, (2.0 * diff / diff.size)[:, None])
        agent.critic, agent.critic_opt = adam_step(agent.critic, grads, agent.critic_opt)
        losses.append(loss)
    return losses


def actor_update(agents: JointAgents, batches: list) -> list:
    """Deterministic-policy-gradient ascent on each agent's own critic.

    The agent's batch action is replaced by its current actor output;
    every other agent's action is held from the batch.  Returns the
    pre-update objective estimates mean Q.
    """
    d_s_total = sum(a.obs_dim for a in agents.precoders)
    d_a = agents.precoders[0].action_dim if agents.precoders else 0
    objectives = []
    specs = list(agents.precoders) + [agents.phase]
    for i, (agent, batch) in enumerate(zip(specs, batches)):
        B = batch.states.shape[0]
        if agent.role == ROLE_PRECODER:
            obs = _normalize(agent, batch.states[:, i])
            col_start = d_s_total + i * d_a
        else:
            obs = _normalize(agent, batch.phase_obs)
            col_start = d_s_total + len(agents.precoders) * d_a
        a_new, a_cache = forward(agent.actor, obs)

        actions = batch.actions
        phase_actions = batch.phase_actions
        if agent.role == ROLE_PRECODER:
            actions = actions.copy()
            actions[:, i] = a_new
        else:
            phase_actions = a_new
        q, q_cache = forward(agent.critic,
                             _critic_input(agents, batch.states, actions, phase_actions))
        objectives.append(float(np.mean(q)))

        _, input_grad = backward(agent.critic, q_cache, np.full((B, 1), 1.0 / B))
        action_grad = input_grad[:, col_start:col_start + agent.action_dim]
        grads, _ = backward(agent.actor, a_cache, action_grad)
        agent.actor, agent.actor_opt = adam_step(agent.actor, grads.scaled(-1.0),
                                                 agent.actor_opt)
    return objectives


def soft_update_agents(agents: JointAgents, tcfg: TrainerConfig) -> None:
    swap = tcfg.swap_tau_convention
    for agent in agents.precoders:
        agent.actor_target = soft_update(agent.actor_target, agent.actor,
                                         tcfg.tau_precoding, swap)
        agent.critic_target = soft_update(agent.critic_target, agent.critic,
                                          tcfg.tau_precoding, swap)
    agents.phase.actor_target = soft_update(agents.phase.actor_target,
                                            agents.phase.actor, tcfg.tau_phase, swap)
    agents.phase.critic_target = soft_update(agents.phase.critic_target,
                                             agents.phase.critic, tcfg.tau_phase, swap)


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceRow:
    episode: int
    step: int
    reward: float
    sum_se: float
    critic_loss: float
    actor_obj: float
    fuzzy_colmax: float  # mean over APs of max membership weight; nan for MADDPG


@dataclass
class TrainResult:
    algo: str
    trace: list
    agents: JointAgents
    fuzzy_map: FuzzyMap | None
    system: SystemConfig
    trainer: TrainerConfig


class _Env:
    """One channel realization driven by decoded joint actions."""

    def __init__(self, cfg: SystemConfig, tcfg: TrainerConfig,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.topo = sample_topology(cfg, rng)
        self.ch = sample_channels(cfg, self.topo, rng)
        phases = random_phases(cfg, rng)
        if tcfg.discrete_bits is not None:
            phases = quantize_phases(phases, tcfg.discrete_bits)
        self.phases = phases
        self.prec = PrecodingSet(np.zeros(
            (cfg.num_aps, cfg.num_ues, cfg.ap_antennas), dtype=complex))
        self.last_sinr = np.zeros(cfg.num_ues)

    def observe(self, obs_offset: float) -> np.ndarray:
        """(L, d_s) physical states; row l optionally shifted by l*offset."""
        rows = [build_env_state(self.ch, self.phases, self.prec, self.topo,
                                self.last_sinr, l)
                for l in range(self.cfg.num_aps)]
        states = np.stack(rows)
        if obs_offset != 0.0:
            states = states + obs_offset * np.arange(self.cfg.num_aps)[:, None]
        return states

    def step(self, phys_actions: np.ndarray, phase_action: np.ndarray,
             bits: int | None) -> float:
        self.prec = joint_precoding(phys_actions, self.cfg)
        self.phases = decode_phase_action(phase_action, self.cfg.num_ris,
                                          self.cfg.ris_elements, bits)
        eff = _effective_all(self.ch, self.phases)
        self.last_sinr = _sinr_all(eff, self.prec, self.cfg.noise_power)
        return float(np.sum(np.log2(1.0 + self.last_sinr)))


def _spawn_streams(rng: np.random.Generator, n_agents: int):
    """Independent child generators; order fixed so both trainers align."""
    seeds = rng.integers(0, 2 ** 63 - 1, size=4 + n_agents)
    make = lambda s: np.random.default_rng(int(s))
    return {
        "env": make(seeds[0]),
        "init": make(seeds[1]),
        "noise": make(seeds[2]),
        "fuzzy": make(seeds[3]),
        "sample": [make(s) for s in seeds[4:]],
    }


def _check_finite(values: list, kind: str, episode: int, step: int,
                  limit: float) -> None:
    for i, v in enumerate(values):
        if not math.isfinite(v) or abs(v) > limit:
            raise TrainingDiverged(
                f"{kind} for agent {i} hit {v!r} at episode {episode}, step {step}"
            )


def _train(cfg: SystemConfig, tcfg: TrainerConfig, rng: np.random.Generator,
           use_fuzzy: bool) -> TrainResult:
    n_prec = tcfg.fuzzy_agents if use_fuzzy else cfg.num_aps
    streams = _spawn_streams(rng, n_prec + 1)
    agents = build_agents(cfg, tcfg, n_prec, streams["init"])
    buffers = [ReplayBuffer(tcfg.buffer_precoding) for _ in range(n_prec)]
    buffers.append(ReplayBuffer(tcfg.buffer_phase))

    d_a = precoder_action_dim(cfg)
    fm: FuzzyMap | None = None
    noise_std = tcfg.noise_std
    trace = []

    for episode in range(tcfg.episodes):
        env = _Env(cfg, tcfg, streams["env"])
        phys_states = env.observe(tcfg.agent_obs_offset)
        if use_fuzzy:
            if fm is None:
                if tcfg.fuzzy_identity_anchors:
                    if n_prec != cfg.num_aps:
                        raise ValueError("identity anchors require fuzzy_agents == num_aps")
                    fm = fz.identity_fuzzy_map(phys_states, d_a)
                else:
                    fm = fz.init_fuzzy_agents(phys_states, n_prec, streams["fuzzy"],
                                              d_a, standardize=tcfg.fuzzy_standardize)
            else:
                fm = fz.update_membership(fm, phys_states)
            states = fz.fuzzify_state(fm, phys_states)
        else:
            states = phys_states
        phase_obs = phys_states.ravel()
        for i, agent in enumerate(agents.precoders):
            _track(agent, states[i], tcfg.normalize_obs)
        _track(agents.phase, phase_obs, tcfg.normalize_obs)

        for step in range(tcfg.steps_per_episode):
            actions, phase_action = act(agents, states, phase_obs,
                                        noise_std, streams["noise"])
            phys_actions = fz.defuzzify_action(fm, actions) if use_fuzzy else actions
            se = env.step(phys_actions, phase_action, tcfg.discrete_bits)
            phys_rewards = np.full(cfg.num_aps, se)
            rewards = fz.fuzzify_reward(fm, phys_rewards) if use_fuzzy else phys_rewards

            next_phys = env.observe(tcfg.agent_obs_offset)
            if use_fuzzy:
                next_states = fz.fuzzify_state(fm, next_phys)
                fm = fz.update_membership(fm, next_phys)
            else:
                next_states = next_phys
            next_phase_obs = next_phys.ravel()
            for i, agent in enumerate(agents.precoders):
                _track(agent, next_states[i], tcfg.normalize_obs)
            _track(agents.phase, next_phase_obs, tcfg.normalize_obs)

            tr = Transition(states, actions, phase_obs, phase_action,
                            rewards, se, next_states, next_phase_obs)
            for buf in buffers:
                buf.add(tr)

            critic_loss = actor_obj = math.nan
            if all(len(b) >= tcfg.batch_size for b in buffers):
                batches = [buf.sample(tcfg.batch_size, srng)
                           for buf, srng in zip(buffers, streams["sample"])]
                losses = critic_update(agents, batches, tcfg.discount)
                _check_finite(losses, "critic loss", episode, step, tcfg.loss_abort)
                objs = actor_update(agents, batches)
                _check_finite(objs, "actor objective", episode, step, tcfg.loss_abort)
                soft_update_agents(agents, tcfg)
                critic_loss = float(np.mean(losses))
                actor_obj = float(np.mean(objs))

            colmax = float(np.mean(fm.xi_bar.max(axis=0))) if use_fuzzy else math.nan
            trace.append(TraceRow(episode, step, float(np.mean(rewards)), se,
                                  critic_loss, actor_obj, colmax))
            states, phase_obs = next_states, next_phase_obs

        noise_std *= tcfg.noise_decay

    return TrainResult("fl_maddpg" if use_fuzzy else "maddpg", trace, agents,
                       fm, cfg, tcfg)


def train_maddpg(cfg: SystemConfig, tcfg: TrainerConfig,
                 rng: np.random.Generator) -> TrainResult:
    """Plain CTDE baseline: L precoding agents plus the phase controller."""
    return _train(cfg, tcfg, rng, use_fuzzy=False)


def train_fl_maddpg(cfg: SystemConfig, tcfg: TrainerConfig,
                    rng: np.random.Generator) -> TrainResult:
    """Fuzzy-layer trainer: N_F precoding agents plus the phase controller."""
    return _train(cfg, tcfg, rng, use_fuzzy=True)


def evaluate_policy(result: TrainResult, cfg: SystemConfig, realizations: int,
                    rng: np.random.Generator, eval_steps: int | None = None) -> np.ndarray:
    """Frozen greedy rollouts on fresh realizations; per-realization final sum-SE.

    Normalizer statistics and fuzzy anchors stay frozen; memberships are
    still refreshed per step since they are part of the policy pipeline.
    """
    tcfg = result.trainer
    steps = eval_steps if eval_steps is not None else tcfg.steps_per_episode
    agents = result.agents
    out = np.empty(realizations)
    for i in range(realizations):
        env = _Env(cfg, tcfg, rng)
        fm = result.fuzzy_map
        se = 0.0
        for _ in range(steps):
            phys_states = env.observe(tcfg.agent_obs_offset)
            if fm is not None:
                xi, xi_bar = fz.mapping_matrix(fm, phys_states)
                fm = replace(fm, xi=xi, xi_bar=xi_bar)
                states = fz.fuzzify_state(fm, phys_states)
            else:
                states = phys_states
            actions = np.empty((agents.num_precoders, agents.precoders[0].action_dim))
            for j, agent in enumerate(agents.precoders):
                actions[j], _ = forward(agent.actor, _normalize(agent, states[j]))
            phase_action, _ = forward(agents.phase.actor,
                                      _normalize(agents.phase, phys_states.ravel()))
            phys_actions = fz.defuzzify_action(fm, actions) if fm is not None else actions
            se = env.step(np.clip(phys_actions, -1.0, 1.0),
                          np.clip(phase_action, -1.0, 1.0), tcfg.discrete_bits)
        out[i] = se
    return out


def save_checkpoints(result: TrainResult, out_dir) -> list:
    """Write one npz per network plus the fuzzy anchors; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, agent in enumerate(result.agents.precoders):
        for name, params in (("actor", agent.actor), ("critic", agent.critic)):
            p = out / f"{result.algo}_prec{i}_{name}.npz"
            save_mlp(params, p)
            paths.append(p)
    for name, params in (("actor", result.agents.phase.actor),
                         ("critic", result.agents.phase.critic)):
        p = out / f"{result.algo}_phase_{name}.npz"
        save_mlp(params, p)
        paths.append(p)
    if result.fuzzy_map is not None:
        p = out / f"{result.algo}_fuzzy_map.npz"
        np.savez(p, anchors=result.fuzzy_map.anchors,
                 action_dim=np.array(result.fuzzy_map.action_dim))
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# Printed complexity products
# ---------------------------------------------------------------------------

def sum_se_flops(cfg: SystemConfig) -> int:
    """Operation-count estimate of one sum-SE evaluation."""
    L, K, R = cfg.num_aps, cfg.num_ues, cfg.num_ris
    M, N = cfg.ap_antennas, cfg.ris_elements
    effective = L * K * (R * (N + N * M) + M)
    inner = K * K * L * M
    per_user = K * (K + 2)
    return effective + inner + per_user


def _sum_sq(sizes) -> int:
    return int(sum(int(s) ** 2 for s in sizes))


def complexity_estimate(cfg: SystemConfig, tcfg: TrainerConfig,
                        layer_sizes: dict | None = None) -> dict:
    """Evaluate the printed complexity products for both trainers.

    ``layer_sizes`` may override the per-network layer output sizes with
    keys actor_precoding / critic_precoding / actor_phase / critic_phase;
    by default they follow the trainer config and the action dims.
    """
    if layer_sizes is None:
        layer_sizes = {
            "actor_precoding": [*tcfg.actor_hidden, precoder_action_dim(cfg)],
            "critic_precoding": [*tcfg.critic_hidden, 1],
            "actor_phase": [*tcfg.actor_hidden, phase_action_dim(cfg)],
            "critic_phase": [*tcfg.critic_hidden, 1],
        }
    sqa_low = _sum_sq(layer_sizes["actor_precoding"])
    sqc_low = _sum_sq(layer_sizes["critic_precoding"])
    sqa_high = _sum_sq(layer_sizes["actor_phase"])
    sqc_high = _sum_sq(layer_sizes["critic_phase"])

    L, K = cfg.num_aps, cfg.num_ues
    M, N = cfg.ap_antennas, cfg.ris_elements
    nf = tcfg.fuzzy_agents
    q_se = sum_se_flops(cfg)

    terms = {
        "maddpg_low_actor": L * L * M * K * N * N * sqa_low,
        "maddpg_low_critic": L * L * M * K * sqc_low,
        "maddpg_high_actor": L * L * M * K * N * N * sqa_high,
        "maddpg_high_critic": L * N * sqc_high,
        "maddpg_high_se": L ** 3 * q_se,
        "fl_low_actor": L * nf * M * K * N * N * sqa_low,
        "fl_low_critic": L * nf * M * K * sqc_low,
        "fl_high_actor": L * nf * M * K * N * N * sqa_high,
        "fl_high_critic": L * N * sqc_high,
        "fl_high_se": L * L * nf * q_se,
    }
    maddpg = ((terms["maddpg_low_actor"] + terms["maddpg_low_critic"])
              * (terms["maddpg_high_actor"] + terms["maddpg_high_critic"]
                 + terms["maddpg_high_se"]))
    fl = ((terms["fl_low_actor"] + terms["fl_low_critic"])
          * (terms["fl_high_actor"] + terms["fl_high_critic"]
             + terms["fl_high_se"]))
    return {
        "maddpg": float(maddpg),
        "fl_maddpg": float(fl),
        "ratio": fl / maddpg,
        "sum_se_flops": q_se,
        "terms": terms,
    }

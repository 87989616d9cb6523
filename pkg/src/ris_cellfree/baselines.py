"""Classical precoders and an alternating-optimization joint design.

All baselines are centralized: they consume the aggregated effective
channel (global CSI), unlike the learned agents.  Every precoder follows
the same normalization pipeline so comparisons are fair: unit-norm
per-user directions, equal per-user share of the total budget L*P_max,
then the per-AP power projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system import (
    ChannelSet,
    PhaseShiftConfig,
    PrecodingSet,
    SystemConfig,
    effective_channel,
    project_power,
    quantize_phases,
    sum_se,
)


def aggregate_channel(ch: ChannelSet, phases: PhaseShiftConfig) -> np.ndarray:
    """K x (L*M) matrix: row k stacks the effective channels of UE k across APs."""
    L, K, U, M = ch.direct.shape
    if U != 1:
        raise ValueError("aggregated channel requires single-antenna UEs")
    H = np.empty((K, L * M), dtype=complex)
    for k in range(K):
        for l in range(L):
            H[k, l * M:(l + 1) * M] = effective_channel(ch, phases, l, k)[0]
    return H


def _stacked_to_precoding(W: np.ndarray, m_antennas: int, p_max: float) -> PrecodingSet:
    """(L*M, K) stacked columns -> per-AP (L, K, M) precoders, power-projected."""
    LM, K = W.shape
    L = LM // m_antennas
    w = W.T.reshape(K, L, m_antennas).transpose(1, 0, 2)
    return project_power(PrecodingSet(w.copy()), p_max)


def _normalize_columns(W: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(W, axis=0)
    out = W.copy()
    nz = norms > 0
    out[:, nz] /= norms[nz]
    return out


def mrt_direction(H: np.ndarray) -> np.ndarray:
    """Unit-norm maximum-ratio columns: w_k proportional to the channel itself."""
    return _normalize_columns(H.conj().T)


def zf_direction(H: np.ndarray) -> np.ndarray:
    """Unit-norm right-pseudo-inverse columns; H @ W is diagonal."""
    K = H.shape[0]
    if H.shape[1] < K:
        raise np.linalg.LinAlgError("need at least as many transmit antennas as UEs")
    gram = H @ H.conj().T
    if np.linalg.matrix_rank(gram) < K:
        raise np.linalg.LinAlgError("rank-deficient channel: interference cannot be nulled")
    return _normalize_columns(H.conj().T @ np.linalg.inv(gram))


def mmse_direction(H: np.ndarray, noise_power: float, p_total: float) -> np.ndarray:
    """Unit-norm regularized-inverse columns, regularizer K*noise/p_total."""
    K = H.shape[0]
    reg = K * noise_power / p_total
    return _normalize_columns(H.conj().T @ np.linalg.inv(H @ H.conj().T + reg * np.eye(K)))


def _apply_budget(direction: np.ndarray, m_antennas: int, p_max: float) -> PrecodingSet:
    LM, K = direction.shape
    L = LM // m_antennas
    per_user = np.sqrt(L * p_max / K)
    return _stacked_to_precoding(per_user * direction, m_antennas, p_max)


def mrt_precoder(H: np.ndarray, m_antennas: int, p_max: float) -> PrecodingSet:
    return _apply_budget(mrt_direction(H), m_antennas, p_max)


def zf_precoder(H: np.ndarray, m_antennas: int, p_max: float) -> PrecodingSet:
    return _apply_budget(zf_direction(H), m_antennas, p_max)


def mmse_precoder(H: np.ndarray, m_antennas: int, p_max: float,
                  noise_power: float) -> PrecodingSet:
    LM = H.shape[1]
    p_total = (LM // m_antennas) * p_max
    return _apply_budget(mmse_direction(H, noise_power, p_total), m_antennas, p_max)


def random_phases(cfg: SystemConfig, rng: np.random.Generator) -> PhaseShiftConfig:
    """Unit-magnitude coefficients with i.i.d. uniform angles in [0, 2*pi)."""
    angles = rng.uniform(0.0, 2.0 * np.pi, size=(cfg.num_ris, cfg.ris_elements))
    return PhaseShiftConfig(theta=np.exp(1j * angles))


@dataclass(frozen=True)
class AoResult:
    precoding: PrecodingSet
    phases: PhaseShiftConfig
    trace: np.ndarray  # objective after every accepted update


class _SinrTableau:
    """Incremental sum-SE evaluation under single-element phase changes.

    For a fixed precoder, the inner products t[k, j] = sum_l h_eff(l,k) w_{l,j}
    are affine in each reflection coefficient:
        t = base + sum_{r,n} theta[r, n] * c[r, n]
    so a candidate angle for one element is scored in O(K^2).
    """

    def __init__(self, ch: ChannelSet, prec: PrecodingSet, noise_power: float):
        # base[k, j] = sum_l direct[l, k] w_{l, j}
        self.base = np.einsum("lkum,ljm->kj", ch.direct, prec.w, optimize=True)
        # g_w[r, n, j] = sum_l ap_ris[l, r, n, :] @ w_{l, j}
        g_w = np.einsum("lrnm,ljm->rnj", ch.ap_ris, prec.w, optimize=True)
        # c[r, n, k, j] = ris_ue[r, k, 0, n] * g_w[r, n, j]
        self.c = np.einsum("rkn,rnj->rnkj", ch.ris_ue[:, :, 0, :], g_w, optimize=True)
        self.noise_power = noise_power

    def inner(self, theta: np.ndarray) -> np.ndarray:
        return self.base + np.einsum("rn,rnkj->kj", theta, self.c)

    def objective(self, t: np.ndarray) -> float:
        power = np.abs(t) ** 2
        desired = np.diagonal(power)
        interference = power.sum(axis=1) - desired
        return float(np.sum(np.log2(1.0 + desired / (interference + self.noise_power))))

    def candidate_objectives(self, t: np.ndarray, theta_rn: complex,
                             r: int, n: int, candidates: np.ndarray) -> np.ndarray:
        tt = t[None, :, :] + (candidates - theta_rn)[:, None, None] * self.c[r, n]
        power = np.abs(tt) ** 2
        desired = np.diagonal(power, axis1=1, axis2=2)
        interference = power.sum(axis=2) - desired
        return np.log2(1.0 + desired / (interference + self.noise_power)).sum(axis=1)


def ao_optimize(
    ch: ChannelSet,
    cfg: SystemConfig,
    iters: int = 5,
    grid_size: int = 16,
    rng: np.random.Generator | None = None,
    init_phases: PhaseShiftConfig | None = None,
) -> AoResult:
    """Alternate MMSE precoding with per-element phase coordinate descent.

    Both the precoder step and every coordinate step accept a candidate
    only if it improves the sum-SE, so the returned trace is
    nondecreasing (every trace value comes from the same incremental
    evaluation, keeping the comparison exact).  Stops after ``iters``
    outer rounds or once an outer round improves the objective by less
    than 1e-4 relative.
    """
    if iters < 1 or grid_size < 2:
        raise ValueError("need iters >= 1 and grid_size >= 2")
    if init_phases is None:
        if rng is None:
            raise ValueError("provide either init_phases or an rng")
        init_phases = random_phases(cfg, rng)

    def fit_precoder(th):
        return mmse_precoder(aggregate_channel(ch, PhaseShiftConfig(th)),
                             cfg.ap_antennas, cfg.max_power, cfg.noise_power)

    theta = init_phases.theta.copy()
    grid = np.exp(2j * np.pi * np.arange(grid_size) / grid_size)
    prec = fit_precoder(theta)
    tableau = _SinrTableau(ch, prec, cfg.noise_power)
    t = tableau.inner(theta)
    best = tableau.objective(t)
    trace = [best]

    for _ in range(iters):
        round_start = best

        # (a) precoder refresh at the current phases, kept only if it helps
        candidate = fit_precoder(theta)
        cand_tab = _SinrTableau(ch, candidate, cfg.noise_power)
        cand_t = cand_tab.inner(theta)
        cand_obj = cand_tab.objective(cand_t)
        if cand_obj > best:
            prec, tableau, t, best = candidate, cand_tab, cand_t, cand_obj
        trace.append(best)

        # (b) coordinate descent over every reflection coefficient
        for r in range(cfg.num_ris):
            for n in range(cfg.ris_elements):
                objs = tableau.candidate_objectives(t, theta[r, n], r, n, grid)
                j = int(np.argmax(objs))
                if objs[j] > best:
                    t = t + (grid[j] - theta[r, n]) * tableau.c[r, n]
                    theta[r, n] = grid[j]
                    best = float(objs[j])
                trace.append(best)

        if round_start > 0 and (best - round_start) / round_start < 1e-4:
            break

    return AoResult(prec, PhaseShiftConfig(theta), np.asarray(trace))


def ao_optimize_discrete(ch: ChannelSet, cfg: SystemConfig, bits: int,
                         **kwargs) -> AoResult:
    """AO followed by phase quantization and a final precoder refresh."""
    cont = ao_optimize(ch, cfg, **kwargs)
    phases = quantize_phases(cont.phases, bits)
    prec = mmse_precoder(aggregate_channel(ch, phases), cfg.ap_antennas,
                         cfg.max_power, cfg.noise_power)
    obj = sum_se(ch, phases, prec, cfg.noise_power)
    return AoResult(prec, phases, np.append(cont.trace, obj))

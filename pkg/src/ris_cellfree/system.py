"""Network geometry, channel generation, and the downlink signal model.

Conventions used throughout:
  - ``direct[l, k]``  is the U x M direct channel from AP l to UE k,
    already in "receive = channel @ transmit" orientation.
  - ``ap_ris[l, r]``  is the N x M channel from AP l to RIS r.
  - ``ris_ue[r, k]``  is the U x N channel from RIS r to UE k.
  - RIS r applies ``diag(theta[r])`` to the incident signal, so the
    cascaded contribution of RIS r on link (l, k) is
    ``ris_ue[r, k] @ diag(theta[r]) @ ap_ris[l, r]``.
All powers are linear (watts); path loss is computed in dB internally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# dBm -> watts for the paper defaults (0 dBm transmit, -96 dBm noise)
DEFAULT_MAX_POWER_W = 1e-3
DEFAULT_NOISE_POWER_W = 10 ** ((-96.0 - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions and physical constants of one network instance."""

    num_aps: int = 4            # L
    num_ues: int = 4            # K
    num_ris: int = 4            # R
    ap_antennas: int = 8        # M
    ue_antennas: int = 1        # U
    ris_elements: int = 16      # N
    max_power: float = DEFAULT_MAX_POWER_W      # per-AP budget, watts
    noise_power: float = DEFAULT_NOISE_POWER_W  # watts
    area_side: float = 50.0     # meters
    pathloss_offset_db: float = -30.5
    pathloss_slope_db: float = 36.7
    min_separation: float = 1.0  # meters, floor on every link distance
    rng_seed: int = 0

    def __post_init__(self):
        counts = (self.num_aps, self.num_ues, self.num_ris,
                  self.ap_antennas, self.ue_antennas, self.ris_elements)
        if any(int(c) != c or c < 1 for c in counts):
            raise ValueError(f"all counts must be integers >= 1, got {counts}")
        if self.max_power <= 0:
            raise ValueError("max_power must be positive")
        if self.noise_power <= 0:
            raise ValueError("noise_power must be positive")
        if self.area_side <= 0:
            raise ValueError("area_side must be positive")
        if self.min_separation <= 0:
            raise ValueError("min_separation must be positive")


@dataclass(frozen=True)
class Topology:
    """Positions (meters, 2-D) and link distances for one drop.

    Distances are floor-clamped at ``SystemConfig.min_separation`` so
    colocated nodes (the default drop puts APs and RISs on the same grid
    points) never produce a path-loss singularity.
    """

    ap_positions: np.ndarray   # (L, 2)
    ue_positions: np.ndarray   # (K, 2)
    ris_positions: np.ndarray  # (R, 2)
    d_ap_ue: np.ndarray        # (L, K)
    d_ap_ris: np.ndarray       # (L, R)
    d_ris_ue: np.ndarray       # (R, K)


@dataclass(frozen=True)
class ChannelSet:
    """One realization of every link in the network."""

    direct: np.ndarray       # (L, K, U, M) complex
    ap_ris: np.ndarray       # (L, R, N, M) complex
    ris_ue: np.ndarray       # (R, K, U, N) complex
    beta_direct: np.ndarray  # (L, K) large-scale gains
    beta_ap_ris: np.ndarray  # (L, R)
    beta_ris_ue: np.ndarray  # (R, K)


@dataclass(frozen=True)
class PhaseShiftConfig:
    """Reflection coefficients of all RIS elements.

    ``bits is None`` means continuous phases; otherwise every phase angle
    lies on the uniform grid {2*pi*q / 2**bits}.
    """

    theta: np.ndarray        # (R, N) complex, unit magnitude
    bits: int | None = None

    def __post_init__(self):
        if np.any(np.abs(self.theta) > 1.0 + 1e-9):
            raise ValueError("reflection coefficients must satisfy |theta| <= 1")


@dataclass(frozen=True)
class PrecodingSet:
    """Per-AP, per-UE precoding vectors; ``w[l, k]`` has length M."""

    w: np.ndarray  # (L, K, M) complex


def _grid_points(area_side: float, grid: int) -> np.ndarray:
    """Centers of a grid x grid partition of the square, x-major order."""
    step = area_side / grid
    centers = step / 2.0 + step * np.arange(grid)
    pts = [(x, y) for x in centers for y in centers]
    return np.asarray(pts, dtype=float)


def ap_grid(cfg: SystemConfig) -> np.ndarray:
    """AP positions: ceil(sqrt(L)) x ceil(sqrt(L)) sub-square centers, truncated to L."""
    g = int(np.ceil(np.sqrt(cfg.num_aps)))
    return _grid_points(cfg.area_side, g)[: cfg.num_aps]


def ris_grid(cfg: SystemConfig) -> np.ndarray:
    """RIS positions: centers of the four equal squares, cycled if R != 4."""
    quads = _grid_points(cfg.area_side, 2)
    idx = np.arange(cfg.num_ris) % 4
    return quads[idx]


def _pairwise_dist(a: np.ndarray, b: np.ndarray, floor: float) -> np.ndarray:
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return np.maximum(d, floor)


def sample_topology(cfg: SystemConfig, rng: np.random.Generator) -> Topology:
    """Drop APs and RISs on their grids and UEs uniformly at random.

    UE positions are re-drawn until every UE is at least
    ``cfg.min_separation`` away from all APs and RISs; more than 1000
    rejections raises, signalling a degenerate geometry config.
    """
    aps = ap_grid(cfg)
    riss = ris_grid(cfg)
    obstacles = np.vstack([aps, riss])

    ues = np.empty((cfg.num_ues, 2))
    rejections = 0
    for k in range(cfg.num_ues):
        while True:
            p = rng.uniform(0.0, cfg.area_side, size=2)
            if np.min(np.linalg.norm(obstacles - p, axis=1)) >= cfg.min_separation:
                ues[k] = p
                break
            rejections += 1
            if rejections > 1000:
                raise RuntimeError(
                    "UE placement rejected more than 1000 times; "
                    "area_side vs min_separation leaves no feasible region"
                )

    floor = cfg.min_separation
    return Topology(
        ap_positions=aps,
        ue_positions=ues,
        ris_positions=riss,
        d_ap_ue=_pairwise_dist(aps, ues, floor),
        d_ap_ris=_pairwise_dist(aps, riss, floor),
        d_ris_ue=_pairwise_dist(riss, ues, floor),
    )


def large_scale_fading(distance, offset_db: float = -30.5, slope_db: float = 36.7):
    """Linear power gain beta = 10^((offset - slope*log10(d)) / 10), d in meters."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    beta = 10.0 ** ((offset_db - slope_db * np.log10(d)) / 10.0)
    return float(beta) if np.isscalar(distance) else beta


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """I.i.d. CN(0, 1) entries."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(cfg: SystemConfig, topo: Topology, rng: np.random.Generator) -> ChannelSet:
    """Rayleigh-fade every link: entry = sqrt(beta(distance)) * CN(0, 1).

    Draw order is fixed (direct, then AP-RIS, then RIS-UE) so a seeded
    generator reproduces the realization bit for bit.
    """
    L, K, R = cfg.num_aps, cfg.num_ues, cfg.num_ris
    M, U, N = cfg.ap_antennas, cfg.ue_antennas, cfg.ris_elements
    pl = lambda d: large_scale_fading(d, cfg.pathloss_offset_db, cfg.pathloss_slope_db)

    beta_direct = pl(topo.d_ap_ue)
    beta_ap_ris = pl(topo.d_ap_ris)
    beta_ris_ue = pl(topo.d_ris_ue)

    direct = np.sqrt(beta_direct)[:, :, None, None] * _cn(rng, (L, K, U, M))
    ap_ris = np.sqrt(beta_ap_ris)[:, :, None, None] * _cn(rng, (L, R, N, M))
    ris_ue = np.sqrt(beta_ris_ue)[:, :, None, None] * _cn(rng, (R, K, U, N))

    return ChannelSet(direct, ap_ris, ris_ue, beta_direct, beta_ap_ris, beta_ris_ue)


def effective_channel(ch: ChannelSet, phases: PhaseShiftConfig, l: int, k: int) -> np.ndarray:
    """U x M equivalent link: direct path plus every RIS-cascaded path."""
    F = ch.ris_ue[:, k]    # (R, U, N)
    G = ch.ap_ris[l]       # (R, N, M)
    if F.shape[-1] != G.shape[-2] or phases.theta.shape != G.shape[:2]:
        raise ValueError("channel/phase dimensions are inconsistent")
    cascaded = np.einsum("run,rn,rnm->um", F, phases.theta, G)
    return ch.direct[l, k] + cascaded


def transmit_signal(prec: PrecodingSet, symbols: np.ndarray, l: int) -> np.ndarray:
    """Precoded antenna signal of AP l: x_l = sum_k w_{l,k} s_k."""
    s = np.asarray(symbols)
    if s.shape != (prec.w.shape[1],):
        raise ValueError(f"expected {prec.w.shape[1]} symbols, got {s.shape}")
    return prec.w[l].T @ s


def received_signal(
    ch: ChannelSet,
    phases: PhaseShiftConfig,
    prec: PrecodingSet,
    symbols: np.ndarray,
    noise: np.ndarray,
) -> np.ndarray:
    """(K, U) received samples: y_k = sum_l h_eff(l,k) x_l + z_k."""
    L, K = ch.direct.shape[:2]
    x = np.stack([transmit_signal(prec, symbols, l) for l in range(L)])  # (L, M)
    y = np.empty((K, ch.direct.shape[2]), dtype=complex)
    for k in range(K):
        acc = 0.0
        for l in range(L):
            acc = acc + effective_channel(ch, phases, l, k) @ x[l]
        y[k] = acc
    return y + np.asarray(noise)


def sinr(
    ch: ChannelSet,
    phases: PhaseShiftConfig,
    prec: PrecodingSet,
    k: int,
    noise_power: float,
) -> float:
    """Downlink SINR of UE k under per-user precoders w_{l,k}; requires U = 1."""
    if ch.direct.shape[2] != 1:
        raise ValueError("sinr supports single-antenna UEs only (U = 1)")
    if noise_power <= 0:
        raise ValueError("noise_power must be positive")
    L, K = ch.direct.shape[:2]
    # t[j] = sum_l h_eff(l,k) w_{l,j}
    t = np.zeros(K, dtype=complex)
    for l in range(L):
        h = effective_channel(ch, phases, l, k)[0]
        t += prec.w[l] @ h
    power = np.abs(t) ** 2
    interference = float(np.sum(power) - power[k])
    return float(power[k] / (interference + noise_power))


def user_se(gamma: float) -> float:
    """Spectral efficiency log2(1 + gamma), bits/s/Hz."""
    if gamma < 0:
        raise ValueError("SINR must be nonnegative")
    return float(np.log2(1.0 + gamma))


def sum_se(
    ch: ChannelSet,
    phases: PhaseShiftConfig,
    prec: PrecodingSet,
    noise_power: float,
) -> float:
    """Network objective: sum over UEs of log2(1 + SINR_k)."""
    K = ch.direct.shape[1]
    return float(sum(user_se(sinr(ch, phases, prec, k, noise_power)) for k in range(K)))


def project_power(prec: PrecodingSet, p_max: float) -> PrecodingSet:
    """Scale each AP that exceeds its budget back onto sum_k ||w_{l,k}||^2 = p_max."""
    w = prec.w.copy()
    power = np.sum(np.abs(w) ** 2, axis=(1, 2))  # (L,)
    over = power > p_max
    if np.any(over):
        scale = np.sqrt(p_max / power[over])
        w[over] *= scale[:, None, None]
    return PrecodingSet(w)


def quantize_phases(phases: PhaseShiftConfig, bits: int) -> PhaseShiftConfig:
    """Snap each phase angle to the nearest point of {2*pi*q / 2**bits}.

    Ties go to the smaller angle; magnitudes are preserved.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    step = 2.0 * np.pi / (2 ** bits)
    angle = np.mod(np.angle(phases.theta), 2.0 * np.pi)
    ratio = angle / step
    lower = np.floor(ratio)
    q = np.mod(lower + (ratio - lower > 0.5), 2 ** bits)
    return PhaseShiftConfig(theta=np.abs(phases.theta) * np.exp(1j * q * step), bits=bits)


# ---------------------------------------------------------------------------
# Replay format: JSON with complex numbers as [re, im] pairs.
# ---------------------------------------------------------------------------

def _c2l(a: np.ndarray):
    """Complex array -> nested lists of [re, im] pairs."""
    stacked = np.stack([a.real, a.imag], axis=-1)
    return stacked.tolist()


def _l2c(lst) -> np.ndarray:
    a = np.asarray(lst, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def topology_to_json(topo: Topology) -> str:
    payload = {
        "format": "ris-cellfree/topology/v1",
        "ap_positions": topo.ap_positions.tolist(),
        "ue_positions": topo.ue_positions.tolist(),
        "ris_positions": topo.ris_positions.tolist(),
        "d_ap_ue": topo.d_ap_ue.tolist(),
        "d_ap_ris": topo.d_ap_ris.tolist(),
        "d_ris_ue": topo.d_ris_ue.tolist(),
    }
    return json.dumps(payload)


def topology_from_json(text: str) -> Topology:
    d = json.loads(text)
    if d.get("format") != "ris-cellfree/topology/v1":
        raise ValueError("not a topology document")
    arr = lambda k: np.asarray(d[k], dtype=float)
    return Topology(arr("ap_positions"), arr("ue_positions"), arr("ris_positions"),
                    arr("d_ap_ue"), arr("d_ap_ris"), arr("d_ris_ue"))


def channelset_to_json(ch: ChannelSet) -> str:
    payload = {
        "format": "ris-cellfree/channels/v1",
        "direct": _c2l(ch.direct),
        "ap_ris": _c2l(ch.ap_ris),
        "ris_ue": _c2l(ch.ris_ue),
        "beta_direct": ch.beta_direct.tolist(),
        "beta_ap_ris": ch.beta_ap_ris.tolist(),
        "beta_ris_ue": ch.beta_ris_ue.tolist(),
    }
    return json.dumps(payload)


def channelset_from_json(text: str) -> ChannelSet:
    d = json.loads(text)
    if d.get("format") != "ris-cellfree/channels/v1":
        raise ValueError("not a channel-set document")
    return ChannelSet(
        _l2c(d["direct"]), _l2c(d["ap_ris"]), _l2c(d["ris_ue"]),
        np.asarray(d["beta_direct"], dtype=float),
        np.asarray(d["beta_ap_ris"], dtype=float),
        np.asarray(d["beta_ris_ue"], dtype=float),
    )

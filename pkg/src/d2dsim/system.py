"""Scenario constants, cell topology and link-budget primitives.

Everything SNR-like is linear here; dB only shows up in the ``*_db`` helpers
and in config parsing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_REDRAWS = 10**6


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_mw(dbm):
    return db_to_linear(dbm)


@dataclass(frozen=True)
class SystemParams:
    """Single-cell constants. Defaults are the evaluation scenario (K=M=5 cell)."""

    alpha: float = 4.0
    rho: float = 1.0  # CUE target SNR at the BS, linear
    theta: float = 1.0  # decoding threshold, linear
    vartheta: float | None = None  # warning threshold; None means theta
    noise_power: float = 1e-9  # mW (-90 dBm)
    blockage_W: int = 1
    epoch_len: int = 100
    cell_radius: float = 200.0
    d2d_max_len: float = 100.0

    def __post_init__(self):
        if not self.alpha > 2:
            raise ValueError(f"alpha must exceed 2, got {self.alpha}")
        for name in ("rho", "theta", "noise_power"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.vartheta is not None and not self.vartheta > 0:
            raise ValueError("vartheta must be positive")
        if int(self.blockage_W) != self.blockage_W or self.blockage_W < 1:
            raise ValueError(f"blockage_W must be an integer >= 1, got {self.blockage_W}")
        if self.epoch_len < 1:
            raise ValueError("epoch_len must be >= 1")
        if not 0 < self.d2d_max_len <= self.cell_radius:
            raise ValueError("need 0 < d2d_max_len <= cell_radius")

    @property
    def warning_threshold(self) -> float:
        return self.theta if self.vartheta is None else self.vartheta

    @property
    def cue_alone_rate(self) -> float:
        """Success probability of a CUE with no interferer, exp(-theta/rho)."""
        return float(np.exp(-self.theta / self.rho))


@dataclass(frozen=True)
class Topology:
    cues: np.ndarray  # (K, 2)
    sources: np.ndarray  # (M, 2)
    dests: np.ndarray  # (M, 2)
    bs_pos: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def n_cues(self) -> int:
        return len(self.cues)

    @property
    def n_dues(self) -> int:
        return len(self.sources)

    @property
    def due_pairs(self):
        return list(zip(self.sources, self.dests))

    def d_ub(self, i):
        return dist(self.cues[i], self.bs_pos)

    def d_sd(self, j):
        return dist(self.sources[j], self.dests[j])

    def d_sb(self, j):
        return dist(self.sources[j], self.bs_pos)

    def d_ud(self, i, j):
        return dist(self.cues[i], self.dests[j])


def dist(a, b) -> float:
    return float(np.hypot(*(np.asarray(a, float) - np.asarray(b, float))))


def _uniform_disk(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    phi = 2 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def generate_topology(rng: np.random.Generator, n_cues: int, n_dues: int,
                      params: SystemParams) -> Topology:
    """Drop CUEs and DUE sources uniformly in the cell, each destination
    uniformly within ``d2d_max_len`` of its source (redrawn until inside)."""
    if n_cues < 0 or n_dues < 0:
        raise ValueError("counts must be non-negative")
    cues = _uniform_disk(rng, n_cues, params.cell_radius)
    sources = _uniform_disk(rng, n_dues, params.cell_radius)
    dests = np.empty_like(sources)
    for j in range(n_dues):
        for _ in range(MAX_REDRAWS):
            d = sources[j] + _uniform_disk(rng, 1, params.d2d_max_len)[0]
            if np.hypot(*d) <= params.cell_radius:
                dests[j] = d
                break
        else:
            raise RuntimeError(f"could not place destination of DUE {j} inside the cell")
    return Topology(cues=cues, sources=sources, dests=dests)


def cue_tx_power(d_ub: float, params: SystemParams) -> float:
    """Channel-inversion power that puts the mean SNR at the BS on ``rho``."""
    if d_ub <= 0:
        raise ValueError("d_ub must be positive")
    return params.rho * d_ub**params.alpha * params.noise_power


def target_power(snr: float, d: float, params: SystemParams) -> float:
    """Power giving mean SNR ``snr`` at distance ``d``."""
    return snr * d**params.alpha * params.noise_power


def link_gamma(power: float, d: float, params: SystemParams) -> float:
    """Normalised mean SNR P d^-alpha / N0."""
    return power * d ** (-params.alpha) / params.noise_power


def sinr_at_receiver(signal_gamma, signal_fade, interference):
    """``interference`` is already normalised by the noise power."""
    return signal_gamma * signal_fade / (1.0 + interference)


def sample_fading(rng: np.random.Generator, size=None):
    """|h|^2 of a unit-variance Rayleigh channel, i.e. Exp(1)."""
    return rng.exponential(1.0, size)

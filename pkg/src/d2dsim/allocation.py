"""Epoch-level channel and mode selection.

The BS fills a CUE x DUE matrix with the expected channel throughput of every
possible pairing, then picks a maximum-weight one-to-one matching. A channel
left without a DUE carries its CUE alone; a DUE left without a channel is idle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .policy import PolicyContext
from .system import SystemParams, Topology, cue_tx_power, link_gamma, target_power
from .throughput import SEARCH_QUAD, QuadratureSpec, lambda_star


@dataclass(frozen=True)
class PowerPlan:
    """DUE power set. With ``xi`` given (N=1 only) the single level is set by
    channel inversion so the mean SNR at D equals xi; otherwise the N levels
    are ``max_power * 2**-i`` for every DUE."""

    n_levels: int = 1
    xi: float | None = None
    max_power: float = 200.0  # mW

    def __post_init__(self):
        if self.n_levels < 1:
            raise ValueError("n_levels must be >= 1")
        if self.xi is not None and (self.n_levels != 1 or not self.xi > 0):
            raise ValueError("xi-targeted power needs n_levels == 1 and xi > 0")
        if not self.max_power > 0:
            raise ValueError("max_power must be positive")

    def lowest_power(self, d_sd: float, params: SystemParams) -> float:
        if self.xi is not None:
            return target_power(self.xi, d_sd, params)
        return self.max_power * 2.0 ** -(self.n_levels - 1)


@dataclass(frozen=True)
class ThroughputMatrix:
    entries: np.ndarray  # (K, M) packets/slot
    mode_flags: np.ndarray  # (K, M) True where D2D beats D2B
    lambda_stars: np.ndarray  # (K, M)
    tau: np.ndarray  # (K, M) DUE rate in D2D mode
    sigma: np.ndarray  # (K, M) CUE rate in D2D mode
    idle_weight: float  # CUE-alone channel throughput

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class Assignment:
    pairing: tuple  # per channel: DUE index or None
    mode: tuple  # per channel: 1 for D2D, 0 otherwise
    total_weight: float

    def __post_init__(self):
        used = [j for j in self.pairing if j is not None]
        if len(used) != len(set(used)):
            raise ValueError("a DUE is paired with two channels")
        for j, x in zip(self.pairing, self.mode):
            if x and j is None:
                raise ValueError("D2D mode on a channel without a DUE")


@dataclass(frozen=True)
class GeoParams:
    kappa: float = 0.8

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")


def d2b_throughput(params: SystemParams) -> float:
    """Per-terminal rate when CUE and DUE split the channel in time."""
    return 0.5 * math.exp(-params.theta / params.rho)


def pair_context(topology: Topology, params: SystemParams, power: PowerPlan,
                 i: int, j: int, lam: float = 1.0) -> PolicyContext:
    """Link gammas of CUE i sharing its channel with DUE j."""
    p_min = power.lowest_power(topology.d_sd(j), params)
    p_cue = cue_tx_power(topology.d_ub(i), params)
    return PolicyContext(
        gamma_sd=link_gamma(p_min, topology.d_sd(j), params),
        gamma_sb=link_gamma(p_min, topology.d_sb(j), params),
        gamma_ud=link_gamma(p_cue, topology.d_ud(i, j), params),
        gamma_ub=params.rho,
        theta=params.theta,
        lam=lam,
        n_levels=power.n_levels,
    )


def build_matrix(topology: Topology, params: SystemParams, power: PowerPlan,
                 quad: QuadratureSpec = SEARCH_QUAD) -> ThroughputMatrix:
    K, M = topology.n_cues, topology.n_dues
    if K < 1 or M < 1:
        raise ValueError("need at least one CUE and one DUE")
    W = params.blockage_W
    floor = params.cue_alone_rate
    tau_bar = d2b_throughput(params)
    entries = np.full((K, M), floor)
    flags = np.zeros((K, M), bool)
    lams = np.zeros((K, M))
    taus = np.zeros((K, M))
    sigmas = np.zeros((K, M))
    for i in range(K):
        for j in range(M):
            ls = lambda_star(pair_context(topology, params, power, i, j), W, quad)
            lams[i, j], taus[i, j], sigmas[i, j] = ls.lam, ls.tau, ls.sigma
            if ls.tau > tau_bar:
                entries[i, j] = ls.tau + ls.sigma
                flags[i, j] = True
    return ThroughputMatrix(entries=entries, mode_flags=flags, lambda_stars=lams,
                            tau=taus, sigma=sigmas, idle_weight=floor)


def hungarian_match(weights, idle_weight: float = 0.0) -> Assignment:
    """Maximum-weight matching of channels (rows) to DUEs (columns).

    Rows left unmatched score ``idle_weight`` (the CUE transmits alone),
    columns left unmatched score 0. Every returned mode is 0; see
    ``select_allocation`` for the D2D flags.
    """
    w = np.asarray(weights, float)
    if w.ndim != 2 or not np.all(np.isfinite(w)):
        raise ValueError("weights must be a finite 2-D array")
    K, M = w.shape
    # square padding: K dummy DUE columns (idle channel), M dummy channel rows (idle DUE)
    big = np.zeros((K + M, M + K))
    big[:K, :M] = w
    big[:K, M:] = idle_weight
    rows, cols = linear_sum_assignment(big, maximize=True)
    pairing = [None] * K
    for r, c in zip(rows, cols):
        if r < K and c < M:
            pairing[r] = int(c)
    total = sum(w[i, j] if j is not None else idle_weight for i, j in enumerate(pairing))
    return Assignment(pairing=tuple(pairing), mode=(0,) * K, total_weight=float(total))


def select_allocation(matrix: ThroughputMatrix) -> Assignment:
    base = hungarian_match(matrix.entries, matrix.idle_weight)
    mode = tuple(int(j is not None and matrix.mode_flags[i, j]) for i, j in enumerate(base.pairing))
    return Assignment(pairing=base.pairing, mode=mode, total_weight=base.total_weight)


def allocation_objective(matrix: ThroughputMatrix, assignment: Assignment) -> float:
    """Cell throughput of an allocation, summed channel by channel."""
    total = 0.0
    for i, (j, x) in enumerate(zip(assignment.pairing, assignment.mode)):
        if x:
            total += matrix.tau[i, j] + matrix.sigma[i, j]
        else:
            # CUE alone, or CUE and DUE each getting half of that rate
            total += matrix.idle_weight
    return total


def geo_mode_select(topology: Topology, params: SystemParams, geo: GeoParams = GeoParams()):
    """Per-DUE D2D flag: kappa * d_SD^-alpha <= d_SB^-alpha, as stated."""
    a = params.alpha
    return np.array([geo.kappa * topology.d_sd(j) ** -a <= topology.d_sb(j) ** -a
                     for j in range(topology.n_dues)], dtype=bool)


def geo_expected_pair_throughput(topology: Topology, params: SystemParams, i: int, j: int,
                                 d2d: bool) -> tuple[float, float]:
    """(CUE rate, DUE rate) of CUE i sharing with DUE j under GEO.

    In D2D mode both transmitters aim at mean SNR rho at their own receiver and
    each sees a single Rayleigh interferer; otherwise the pair splits the slot.
    """
    if not d2d:
        r = d2b_throughput(params)
        return r, r
    th, rho = params.theta, params.rho
    p_src = target_power(rho, topology.d_sd(j), params)
    g_sb = link_gamma(p_src, topology.d_sb(j), params)
    g_ud = link_gamma(cue_tx_power(topology.d_ub(i), params), topology.d_ud(i, j), params)
    base = math.exp(-th / rho)
    return base / (1 + th * g_sb / rho), base / (1 + th * g_ud / rho)


@dataclass(frozen=True)
class GeoMatrix:
    entries: np.ndarray
    mode_flags: np.ndarray
    cue_rate: np.ndarray
    due_rate: np.ndarray
    idle_weight: float


def geo_matrix(topology: Topology, params: SystemParams, geo: GeoParams = GeoParams()) -> GeoMatrix:
    d2d = geo_mode_select(topology, params, geo)
    K, M = topology.n_cues, topology.n_dues
    cue = np.zeros((K, M))
    due = np.zeros((K, M))
    for i in range(K):
        for j in range(M):
            cue[i, j], due[i, j] = geo_expected_pair_throughput(topology, params, i, j, bool(d2d[j]))
    flags = np.broadcast_to(d2d[None, :], (K, M)).copy()
    return GeoMatrix(entries=cue + due, mode_flags=flags, cue_rate=cue, due_rate=due,
                     idle_weight=params.cue_alone_rate)


def select_geo_allocation(matrix: GeoMatrix) -> Assignment:
    base = hungarian_match(matrix.entries, matrix.idle_weight)
    mode = tuple(int(j is not None and matrix.mode_flags[i, j]) for i, j in enumerate(base.pairing))
    return Assignment(pairing=base.pairing, mode=mode, total_weight=base.total_weight)

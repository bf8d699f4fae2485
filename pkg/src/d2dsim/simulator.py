"""Slot-level Monte Carlo of one cell: fading, MR decisions, blockage, TDMA.

Each topology draws its own fades from a stream derived from (seed, index),
and fades are drawn for every channel whether or not it is used, so the CMP,
GEO and NONE runs of one seed see the same channels.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .allocation import (GeoParams, PowerPlan, build_matrix, geo_matrix,
                         pair_context, select_allocation, select_geo_allocation)
from .policy import PolicyContext, policy_argmax
from .system import (SystemParams, Topology, cue_tx_power, db_to_linear, dbm_to_mw,
                     generate_topology, link_gamma, target_power)
from .throughput import SEARCH_QUAD, QuadratureSpec

D2D, D2B, CUE_ONLY = "D2D", "D2B", "CUE"
SCHEMES = ("CMP", "GEO", "NONE")


@dataclass(frozen=True)
class Quantizer:
    """Fade values the DUE acts on: rounded to ``step``, capped at ``cap``."""

    step: float | None = 0.01
    cap: float = 5.0

    def __post_init__(self):
        if self.step is not None and not self.step > 0:
            raise ValueError("quantisation step must be positive (or None)")
        if not self.cap > 0:
            raise ValueError("quantisation cap must be positive")

    def __call__(self, h):
        if self.step is None:
            return h
        return np.minimum(np.floor(np.asarray(h) / self.step + 0.5) * self.step, self.cap)

    def kernel_args(self):
        return (-1.0, math.inf) if self.step is None else (self.step, self.cap)


NO_QUANT = Quantizer(step=None)


@dataclass(frozen=True)
class ChannelSetup:
    """How one channel is used for the whole epoch.

    For D2D channels ``ctx`` carries the gammas (lowest DUE level) and lam.
    ``policy=False`` means the DUE always transmits at level 1 and no
    blockage applies (GEO).
    """

    mode: str
    due: int | None = None
    ctx: PolicyContext | None = None
    policy: bool = True


@dataclass
class ChannelSlotState:
    mode: str
    h_d: float = 0.0
    h_b: float = 0.0
    blockage_remaining: int = 0
    tdma_phase: int = 0


@dataclass(frozen=True)
class SlotOutcome:
    cue_success: bool
    due_success: bool
    blockage_triggered: bool
    level: int = 0


def _d2d_slot(state: ChannelSlotState, setup: ChannelSetup, fades, params: SystemParams,
              quant: Quantizer) -> SlotOutcome:
    h_sd, h_sb, h_ud, h_ub = fades
    c = setup.ctx
    state.h_d, state.h_b = float(quant(h_ud)), float(quant(h_ub))
    if state.blockage_remaining > 0:
        state.blockage_remaining -= 1
        return SlotOutcome(c.gamma_ub * h_ub >= c.theta, False, False, 0)
    if setup.policy:
        level = int(policy_argmax(c, state.h_d, state.h_b))
    else:
        level = 1
    if level == 0:
        return SlotOutcome(c.gamma_ub * h_ub >= c.theta, False, False, 0)
    f = 2.0 ** (level - 1)
    sinr_b = c.gamma_ub * h_ub / (1 + f * c.gamma_sb * h_sb)
    sinr_d = f * c.gamma_sd * h_sd / (1 + c.gamma_ud * h_ud)
    trig = setup.policy and sinr_b < params.warning_threshold
    if trig:
        state.blockage_remaining = params.blockage_W
    return SlotOutcome(sinr_b >= c.theta, sinr_d >= c.theta, bool(trig), level)


def simulate_slot(states, setups, params: SystemParams, rng=None, fades=None,
                  quant: Quantizer = Quantizer()):
    """Advance every channel by one slot.

    ``fades`` has shape (4, K) holding (h_sd, h_sb, h_ud, h_ub) per channel;
    drawn from ``rng`` when omitted. The states are updated in place.
    """
    if fades is None:
        fades = rng.exponential(1.0, (4, len(states)))
    out = []
    for k, (st, su) in enumerate(zip(states, setups)):
        h_sd, h_sb, h_ud, h_ub = fades[:, k]
        if su.mode == D2D:
            out.append(_d2d_slot(st, su, fades[:, k], params, quant))
        elif su.mode == D2B:
            # CUE on even phases, DUE (aimed at rho at the BS) on odd ones
            ok_cue = st.tdma_phase == 0 and params.rho * h_ub >= params.theta
            ok_due = st.tdma_phase == 1 and params.rho * h_sb >= params.theta
            st.tdma_phase ^= 1
            out.append(SlotOutcome(bool(ok_cue), bool(ok_due), False))
        else:
            out.append(SlotOutcome(bool(params.rho * h_ub >= params.theta), False, False))
    return out


@dataclass(frozen=True)
class EpochResult:
    cue_rates: np.ndarray  # (K,)
    due_rates: np.ndarray  # (M,)
    triggers: int
    silent_slots: int


def draw_epoch_fades(rng: np.random.Generator, n_channels: int, n_slots: int):
    """(4, K, T) array of (h_sd, h_sb, h_ud, h_ub)."""
    return rng.exponential(1.0, (4, n_channels, n_slots))


def run_channel(setup: ChannelSetup, fades, params: SystemParams, quant: Quantizer = Quantizer()):
    """Per-slot (cue_ok, due_ok, level, silent, trigger) of one channel over ``fades`` (4, T)."""
    h_sd, h_sb, h_ud, h_ub = (np.ascontiguousarray(f) for f in fades)
    T = h_sd.shape[0]
    if setup.mode == D2D:
        c = setup.ctx
        q_step, q_cap = quant.kernel_args()
        return _kernels.run_d2d_channel(
            h_sd, h_sb, h_ud, h_ub, c.gamma_sd, c.gamma_sb, c.gamma_ud, c.gamma_ub, c.theta,
            params.warning_threshold, c.lam, c.n_levels,
            params.blockage_W if setup.policy else 0, q_step, q_cap, 0 if setup.policy else 1)
    zeros = np.zeros(T, np.int8)
    cue_ok = (params.rho * h_ub >= params.theta).astype(np.int8)
    if setup.mode == D2B:
        even = np.arange(T) % 2 == 0
        due_ok = ((~even) & (params.rho * h_sb >= params.theta)).astype(np.int8)
        return cue_ok * even, due_ok, zeros, zeros, zeros
    return cue_ok, zeros, zeros, zeros, zeros


def simulate_epoch(topology: Topology, setups, params: SystemParams, rng: np.random.Generator,
                   n_slots: int | None = None, quant: Quantizer = Quantizer()) -> EpochResult:
    """Run one epoch; ``setups[i]`` describes channel i (the channel of CUE i)."""
    T = params.epoch_len if n_slots is None else n_slots
    K, M = topology.n_cues, topology.n_dues
    fades = draw_epoch_fades(rng, K, T)
    cue = np.zeros(K)
    due = np.zeros(M)
    trig = silent = 0
    for i, su in enumerate(setups):
        cue_ok, due_ok, _, sil, tr = run_channel(su, fades[:, i, :], params, quant)
        cue[i] = cue_ok.mean()
        if su.due is not None:
            due[su.due] = due_ok.mean()
        silent += int(sil.sum())
        trig += int(tr.sum())
    return EpochResult(cue_rates=cue, due_rates=due, triggers=trig, silent_slots=silent)


@dataclass(frozen=True)
class PairEstimate:
    tau: float
    tau_se: float
    sigma: float
    sigma_se: float
    triggers: int
    silent_slots: int
    n_slots: int


def _batch_mean_se(x, n_batches):
    b = np.asarray(x, float)[: len(x) // n_batches * n_batches].reshape(n_batches, -1).mean(axis=1)
    return float(np.mean(x)), float(b.std(ddof=1) / math.sqrt(n_batches))


def simulate_pair(ctx: PolicyContext, params: SystemParams, n_slots: int, rng: np.random.Generator,
                  quant: Quantizer = NO_QUANT, n_batches: int = 100) -> PairEstimate:
    """Long run of a single D2D pair; standard errors by batch means."""
    fades = rng.exponential(1.0, (4, n_slots))
    cue_ok, due_ok, _, silent, trig = run_channel(ChannelSetup(D2D, 0, ctx), fades, params, quant)
    tau, tau_se = _batch_mean_se(due_ok, n_batches)
    sigma, sigma_se = _batch_mean_se(cue_ok, n_batches)
    return PairEstimate(tau=tau, tau_se=tau_se, sigma=sigma, sigma_se=sigma_se,
                        triggers=int(trig.sum()), silent_slots=int(silent.sum()), n_slots=n_slots)


@dataclass(frozen=True)
class CampaignConfig:
    """One parameter point of a campaign. Powers in mW, SNRs in dB."""

    scheme: str = "CMP"
    W: int = 1
    xi_db: float = 4.0
    n_levels: int = 1
    max_power_mw: float = 200.0
    n_topologies: int = 1000
    epoch_len: int = 100
    seed: int = 0
    quant_step: float = 0.01
    quant_cap: float = 5.0
    n_cues: int = 5
    n_dues: int = 5
    cell_radius: float = 200.0
    d2d_max_len: float = 100.0
    alpha: float = 4.0
    rho_db: float = 0.0
    theta_db: float = 0.0
    noise_dbm: float = -90.0
    kappa: float = 0.8
    workers: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        for name in ("W", "n_levels", "n_topologies", "epoch_len", "n_cues", "n_dues", "workers"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
        if not (self.quant_step > 0 and self.quant_cap > 0 and self.max_power_mw > 0):
            raise ValueError("quant_step, quant_cap and max_power_mw must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        # raises on bad geometry / alpha
        self.params

    @property
    def params(self) -> SystemParams:
        return SystemParams(alpha=self.alpha, rho=float(db_to_linear(self.rho_db)),
                            theta=float(db_to_linear(self.theta_db)),
                            noise_power=float(dbm_to_mw(self.noise_dbm)),
                            blockage_W=int(self.W), epoch_len=int(self.epoch_len),
                            cell_radius=self.cell_radius, d2d_max_len=self.d2d_max_len)

    @property
    def power_plan(self) -> PowerPlan:
        if self.n_levels == 1:
            return PowerPlan(n_levels=1, xi=float(db_to_linear(self.xi_db)))
        return PowerPlan(n_levels=int(self.n_levels), max_power=self.max_power_mw)

    @property
    def quantizer(self) -> Quantizer:
        return Quantizer(step=self.quant_step, cap=self.quant_cap)


@dataclass(frozen=True)
class Metrics:
    omega_c: float
    omega_d: float
    omega_total: float
    stderr_c: float
    stderr_d: float
    stderr_total: float
    n_topologies: int
    n_slots: int
    triggers: int = 0
    silent_slots: int = 0


def cmp_setups(topology: Topology, params: SystemParams, power: PowerPlan,
               quad: QuadratureSpec = SEARCH_QUAD):
    matrix = build_matrix(topology, params, power, quad)
    a = select_allocation(matrix)
    setups = []
    for i, (j, x) in enumerate(zip(a.pairing, a.mode)):
        if j is None:
            setups.append(ChannelSetup(CUE_ONLY))
        elif x:
            ctx = pair_context(topology, params, power, i, j, lam=matrix.lambda_stars[i, j])
            setups.append(ChannelSetup(D2D, j, ctx))
        else:
            setups.append(ChannelSetup(D2B, j))
    return setups, a


def geo_setups(topology: Topology, params: SystemParams, geo: GeoParams = GeoParams()):
    matrix = geo_matrix(topology, params, geo)
    a = select_geo_allocation(matrix)
    setups = []
    for i, (j, x) in enumerate(zip(a.pairing, a.mode)):
        if j is None:
            setups.append(ChannelSetup(CUE_ONLY))
        elif x:
            p_src = target_power(params.rho, topology.d_sd(j), params)
            ctx = PolicyContext(
                gamma_sd=params.rho,
                gamma_sb=link_gamma(p_src, topology.d_sb(j), params),
                gamma_ud=link_gamma(cue_tx_power(topology.d_ub(i), params), topology.d_ud(i, j), params),
                gamma_ub=params.rho, theta=params.theta, lam=0.0)
            setups.append(ChannelSetup(D2D, j, ctx, policy=False))
        else:
            setups.append(ChannelSetup(D2B, j))
    return setups, a


def none_setups(topology: Topology):
    """No spectrum reuse: the first min(K, M) DUEs time-share with a CUE."""
    return [ChannelSetup(D2B, i) if i < topology.n_dues else ChannelSetup(CUE_ONLY)
            for i in range(topology.n_cues)]


def simulate_topology(config: CampaignConfig, index: int) -> EpochResult:
    """One topology of a campaign; depends only on (config, index)."""
    params = config.params
    topo_ss, fade_ss = np.random.SeedSequence([config.seed, index]).spawn(2)
    topology = generate_topology(np.random.default_rng(topo_ss), config.n_cues, config.n_dues, params)
    if config.scheme == "CMP":
        setups, _ = cmp_setups(topology, params, config.power_plan)
    elif config.scheme == "GEO":
        setups, _ = geo_setups(topology, params, GeoParams(config.kappa))
    else:
        setups = none_setups(topology)
    return simulate_epoch(topology, setups, params, np.random.default_rng(fade_ss),
                          quant=config.quantizer)


def _sim_one(args):
    return simulate_topology(*args)


def run_campaign(config: CampaignConfig) -> Metrics:
    """Average over ``n_topologies`` independent single-epoch topologies.

    The result does not depend on ``workers``: each topology has its own
    stream and the reduction runs in index order.
    """
    jobs = [(config, k) for k in range(config.n_topologies)]
    if config.workers == 1:
        results = [_sim_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            results = list(ex.map(_sim_one, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    cue = np.array([r.cue_rates.mean() for r in results])
    due = np.array([r.due_rates.mean() for r in results])
    tot = cue + due
    n = len(results)

    def se(x):
        return float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan

    omega_c, omega_d = float(cue.mean()), float(due.mean())
    return Metrics(omega_c=omega_c, omega_d=omega_d, omega_total=omega_c + omega_d,
                   stderr_c=se(cue), stderr_d=se(due), stderr_total=se(tot), n_topologies=n,
                   n_slots=n * config.epoch_len,
                   triggers=sum(r.triggers for r in results),
                   silent_slots=sum(r.silent_slots for r in results))

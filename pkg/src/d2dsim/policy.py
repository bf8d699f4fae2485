"""Maximum-Reward (MR) power allocation for one CUE-DUE pair.

A DUE observing the fades ``h_d`` (CUE -> D) and ``h_b`` (CUE -> BS) picks the
level i in 0..N maximising ``p_i(h_d) - lam * q_i(h_b)``, where level i > 0
transmits with power ``2**(i-1) * P_S``. ``policy_argmax`` is the reference;
``policy_closed_form`` rebuilds the same map from the region boundary curves.

All state-taking functions broadcast over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .system import SystemParams, dist, link_gamma

LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class PolicyContext:
    """Link gammas of one pair; gamma_sd/gamma_sb are taken at the lowest level P_S."""

    gamma_sd: float
    gamma_sb: float
    gamma_ud: float
    gamma_ub: float
    theta: float
    lam: float
    n_levels: int = 1

    def __post_init__(self):
        for name in ("gamma_sd", "gamma_sb", "gamma_ud", "gamma_ub", "theta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.n_levels < 1:
            raise ValueError("n_levels must be >= 1")

    def with_lambda(self, lam: float) -> "PolicyContext":
        return replace(self, lam=float(lam))

    @property
    def switch_lambda(self) -> float:
        """exp(-theta / (2^(N-1) gamma_sd)): above it h* < 0."""
        return math.exp(-self.theta / (2 ** (self.n_levels - 1) * self.gamma_sd))

    @classmethod
    def from_positions(cls, params: SystemParams, cue, src, dst, p_min: float,
                       p_cue: float, n_levels: int = 1, lam: float = 1.0,
                       bs=(0.0, 0.0)) -> "PolicyContext":
        return cls(
            gamma_sd=link_gamma(p_min, dist(src, dst), params),
            gamma_sb=link_gamma(p_min, dist(src, bs), params),
            gamma_ud=link_gamma(p_cue, dist(cue, dst), params),
            gamma_ub=link_gamma(p_cue, dist(cue, bs), params),
            theta=params.theta,
            lam=lam,
            n_levels=n_levels,
        )


@dataclass(frozen=True)
class SystemState:
    h_d: float
    h_b: float

    def __post_init__(self):
        if not (np.isfinite(self.h_d) and np.isfinite(self.h_b)) or self.h_d < 0 or self.h_b < 0:
            raise ValueError("fades must be finite and non-negative")


def _check_level(ctx, i, allow_zero=True):
    lo = 0 if allow_zero else 1
    if not lo <= i <= ctx.n_levels:
        raise ValueError(f"level {i} outside {lo}..{ctx.n_levels}")


def decode_prob(ctx: PolicyContext, i: int, h_d):
    """P[SINR at D >= theta | h_d, level i]."""
    _check_level(ctx, i)
    h_d = np.asarray(h_d, dtype=float)
    if i == 0:
        return np.zeros_like(h_d)
    return np.exp(-ctx.theta * (ctx.gamma_ud * h_d + 1) / (2 ** (i - 1) * ctx.gamma_sd))


def blockage_prob(ctx: PolicyContext, i: int, h_b):
    """P[SINR at B < theta | h_b, level i]; equals 1 when h_b < theta/gamma_ub."""
    _check_level(ctx, i)
    h_b = np.asarray(h_b, dtype=float)
    if i == 0:
        return np.zeros_like(h_b)
    expo = (ctx.gamma_ub * h_b - ctx.theta) / (ctx.theta * 2 ** (i - 1) * ctx.gamma_sb)
    return np.exp(-np.maximum(expo, 0.0))


def utility(ctx: PolicyContext, i: int, h_d, h_b):
    return decode_prob(ctx, i, h_d) - ctx.lam * blockage_prob(ctx, i, h_b)


def utilities(ctx: PolicyContext, h_d, h_b):
    """Stack of utilities for levels 0..N, shape (N+1, *broadcast shape)."""
    h_d, h_b = np.broadcast_arrays(np.asarray(h_d, float), np.asarray(h_b, float))
    return np.stack([utility(ctx, i, h_d, h_b) for i in range(ctx.n_levels + 1)])


def policy_argmax(ctx: PolicyContext, h_d, h_b):
    """MR level; exact ties go to the lowest index (np.argmax keeps the first)."""
    return np.argmax(utilities(ctx, h_d, h_b), axis=0)


def h_star(ctx: PolicyContext) -> float:
    """h_d below which level N beats silence when h_b < theta/gamma_ub.
    Infinite for lam == 0 (always transmit)."""
    if ctx.lam == 0:
        return math.inf
    return (-(2 ** (ctx.n_levels - 1)) * ctx.gamma_sd / (ctx.theta * ctx.gamma_ud) * math.log(ctx.lam)
            - 1 / ctx.gamma_ud)


def _half_minus_root(a):
    # (1 - sqrt(1 - a)) / 2 without cancellation for small a
    return a / (2 * (1 + np.sqrt(np.maximum(1 - a, 0.0))))


@dataclass(frozen=True)
class RegionBoundaries:
    ctx: PolicyContext
    h_star: float
    slope_M: float
    nus: np.ndarray  # intercepts nu_1..nu_N
    Q: float

    @property
    def lam_ge_1(self) -> bool:
        return self.ctx.lam >= 1

    def g0(self, h_d):
        return self.slope_M * np.asarray(h_d, float) + self.Q

    def g0_tilde(self, h_d):
        h_d = np.asarray(h_d, float)
        return np.where(h_d >= self.h_star, self.g0(h_d), 0.0)

    def f0_tilde(self, h_b):
        return np.maximum((np.asarray(h_b, float) - self.Q) / self.slope_M, self.h_star)

    def _g(self, i, h_d, plus):
        c = self.ctx
        v = decode_prob(c, i + 1, h_d)
        a = 4.0 / c.lam * v * (-np.expm1(np.log(np.maximum(v, LOG_FLOOR))))
        if plus:
            u = _half_minus_root(a)
        else:
            u = 0.5 + 0.5 * np.sqrt(np.maximum(1 - a, 0.0))
        return c.theta / c.gamma_ub - c.theta * c.gamma_sb / c.gamma_ub * 2**i * np.log(np.maximum(u, LOG_FLOOR))

    def _f(self, i, h_b, plus):
        c = self.ctx
        u = blockage_prob(c, i + 1, h_b)
        a = 4.0 * c.lam * u * (1 - u)
        if plus:
            v = 0.5 + 0.5 * np.sqrt(np.maximum(1 - a, 0.0))
        else:
            v = _half_minus_root(a)
        return -1 / c.gamma_ud - c.gamma_sd / (c.theta * c.gamma_ud) * 2**i * np.log(np.maximum(v, LOG_FLOOR))

    def g_plus(self, i, h_d):
        """Boundary between levels i and i+1 as h_b(h_d); meaningful for lam >= 1."""
        return self._g(i, h_d, True)

    def g_minus(self, i, h_d):
        return self._g(i, h_d, False)

    def f_plus(self, i, h_b):
        """Boundary between levels i and i+1 as h_d(h_b); meaningful for lam < 1."""
        return self._f(i, h_b, True)

    def f_minus(self, i, h_b):
        return self._f(i, h_b, False)


def region_boundaries(ctx: PolicyContext) -> RegionBoundaries:
    if ctx.lam <= 0:
        raise ValueError("region boundaries need lam > 0")
    t, gsb, gub, gsd, gud = ctx.theta, ctx.gamma_sb, ctx.gamma_ub, ctx.gamma_sd, ctx.gamma_ud
    slope = t**2 * gsb * gud / (gsd * gub)
    lvl = np.arange(1, ctx.n_levels + 1)
    nus = t * gsb / gub * (1 / gsb + t / gsd + 2.0 ** (lvl - 1) * math.log(ctx.lam))
    Q = nus[0] if ctx.lam >= 1 else nus[-1]
    return RegionBoundaries(ctx=ctx, h_star=h_star(ctx), slope_M=slope, nus=nus, Q=float(Q))


def policy_closed_form(ctx: PolicyContext, h_d, h_b, rb: RegionBoundaries | None = None):
    """MR level from the ordered boundary curves instead of an argmax."""
    rb = rb or region_boundaries(ctx)
    h_d, h_b = np.broadcast_arrays(np.asarray(h_d, float), np.asarray(h_b, float))
    level = np.ones(h_d.shape, dtype=int)
    if rb.lam_ge_1:
        for i in range(1, ctx.n_levels):
            level += h_b > rb.g_plus(i, h_d)
        silent = h_b < rb.g0_tilde(h_d)
    else:
        for i in range(1, ctx.n_levels):
            level += h_d > rb.f_plus(i, h_b)
        silent = h_d > rb.f0_tilde(h_b)
    return np.where(silent, 0, level)


def region_grid(h_max: float, n: int):
    """Square n x n grid on [0, h_max]^2, returned as (h_d, h_b) meshes (ij order)."""
    axis = np.linspace(0.0, h_max, n)
    return np.meshgrid(axis, axis, indexing="ij")


def census_window(ctx: PolicyContext) -> float:
    """Side of a square window [0, h]^2 that reaches past the silence border.

    Large enough to contain the point where the first transmitting region
    starts (along h_b for lam >= 1, along h_d otherwise), with some margin.
    """
    scale = ctx.theta / ctx.gamma_ub
    if ctx.lam > 0:
        rb = region_boundaries(ctx)
        hs = max(rb.h_star, 0.0) if math.isfinite(rb.h_star) else 0.0
        scale = max(scale, rb.Q, rb.Q + rb.slope_M * hs, hs)
    return 1.5 * max(5.0, scale)


def region_census(ctx: PolicyContext, h_max: float | None = None, n: int = 500) -> int:
    """Number of distinct levels the MR policy uses on an n x n grid
    (over ``census_window`` when h_max is None)."""
    hd, hb = region_grid(census_window(ctx) if h_max is None else h_max, n)
    return len(np.unique(policy_argmax(ctx, hd, hb)))


def adjacent_ok(ctx: PolicyContext, a: int, b: int) -> bool:
    """Whether regions a and b may share a border: nonzero levels differ by
    one, and silence touches only level 1 (lam >= 1) or level N (lam < 1)."""
    if a == b:
        return True
    if a > 0 and b > 0:
        return abs(a - b) == 1
    other = a or b
    return other == (1 if ctx.lam >= 1 else ctx.n_levels)


def level_sequence(ctx: PolicyContext, start, end, n: int = 500, tol: float = 1e-9):
    """Distinct MR levels met along the segment start -> end, in order.

    The segment is sampled at n points; any jump between samples that is not
    a legal adjacency is bisected until the regions in between are resolved
    (down to length ``tol``), so thin regions are not skipped over.
    """
    start, end = np.asarray(start, float), np.asarray(end, float)

    def level(t):
        p = start + t * (end - start)
        return int(policy_argmax(ctx, p[0], p[1]))

    def refine(t0, l0, t1, l1, out):
        if l0 == l1:
            return
        if adjacent_ok(ctx, l0, l1) or (t1 - t0) * np.hypot(*(end - start)) < tol:
            out.append(l1)
            return
        tm = 0.5 * (t0 + t1)
        lm = level(tm)
        refine(t0, l0, tm, lm, out)
        refine(tm, lm, t1, l1, out)

    ts = np.linspace(0.0, 1.0, n)
    pts = start[None, :] + ts[:, None] * (end - start)[None, :]
    lv = policy_argmax(ctx, pts[:, 0], pts[:, 1])
    out = [int(lv[0])]
    for k in range(n - 1):
        refine(ts[k], int(lv[k]), ts[k + 1], int(lv[k + 1]), out)
    return out


def gain_curve_peak(ctx: PolicyContext, h_d: float, h_b: float):
    """Stationary point x_M of x -> p_1^(2^(1-x)) - lam q_1^(2^(1-x)).

    Returns None when the curve has no stationary point (strictly monotonic).
    Note that the stationary point is a maximum only when p_1 > q_1.
    """
    p1 = float(decode_prob(ctx, 1, h_d))
    q1 = float(blockage_prob(ctx, 1, h_b))
    if not (0 < p1 < 1 and 0 < q1 < 1):
        raise ValueError("need p_1 and q_1 strictly inside (0, 1)")
    a, b = math.log(p1), math.log(q1)
    denom = math.log(-b) - math.log(-a) + math.log(ctx.lam)
    if denom == 0 or (a - b) / denom <= 0:
        return None
    return 1 + math.log2((a - b) / denom)


def gain_curve(ctx: PolicyContext, x, h_d: float, h_b: float):
    """The continuous-level gain curve itself, for any real level x."""
    p1 = float(decode_prob(ctx, 1, h_d))
    q1 = float(blockage_prob(ctx, 1, h_b))
    t = 2.0 ** (1 - np.asarray(x, float))
    return p1**t - ctx.lam * q1**t


def region_map_text(ctx: PolicyContext, h_max: float = 5.0, n: int = 101) -> str:
    """Level matrix, rows h_b descending, columns h_d ascending."""
    hd, hb = region_grid(h_max, n)
    levels = policy_argmax(ctx, hd, hb)  # [d, b]
    rows = [" ".join(str(v) for v in levels[:, k]) for k in range(n - 1, -1, -1)]
    return "\n".join(rows) + "\n"


def four_node_preset(lam: float) -> PolicyContext:
    """Four-node preset: B=(0,0), S=(100,0), D=(100,80), U=(0,120), N=4,
    P_i = 0.4 * 2^(i-1) mW, P_U = 2 mW, alpha=4, N0=-90 dBm, theta=0 dB."""
    params = SystemParams()
    return PolicyContext.from_positions(params, cue=(0, 120), src=(100, 0), dst=(100, 80),
                                        p_min=0.4, p_cue=2.0, n_levels=4, lam=lam)

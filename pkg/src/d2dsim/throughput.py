"""Expected DUE/CUE throughput of a pair running the MR policy.

The state plane is split at h_b = theta/gamma_ub. Below it every transmission
triggers a blockage and the policy is a threshold on h_d, so that strip is
integrated in closed form. Above it a midpoint grid is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from . import _kernels
from .policy import PolicyContext, h_star

LAMBDA_WINDOW = (1e-4, 10.0)
LAMBDA_GRID_POINTS = 64


@dataclass(frozen=True)
class QuadratureSpec:
    h_max: float = 12.0
    step: float = 0.005

    def __post_init__(self):
        if not (self.h_max > 0 and self.step > 0 and self.step < self.h_max / 10):
            raise ValueError("need h_max > 0 and 0 < step << h_max")

    def nodes(self):
        n = int(round(self.h_max / self.step))
        t = (np.arange(n) + 0.5) * self.step
        return t, np.exp(-t) * self.step


DEFAULT_QUAD = QuadratureSpec()
# coarse grid used when lam* has to be searched for many pairs
SEARCH_QUAD = QuadratureSpec(h_max=10.0, step=0.04)


@dataclass(frozen=True)
class ThroughputResult:
    lam: float
    tau: float
    sigma: float
    p_del: float
    p_blo: float
    p_tx: float
    reward: float


def _case2_tables(ctx: PolicyContext, quad: QuadratureSpec):
    t, w = quad.nodes()
    lvl = 2.0 ** np.arange(ctx.n_levels)[:, None]
    ax = np.exp(-ctx.theta * (ctx.gamma_ud * t[None, :] + 1) / (lvl * ctx.gamma_sd))
    by = np.exp(-ctx.gamma_ub * t[None, :] / (ctx.theta * lvl * ctx.gamma_sb))
    wy = w * math.exp(-ctx.theta / ctx.gamma_ub)
    return np.ascontiguousarray(ax), w, np.ascontiguousarray(by), wy


def _case1(ctx: PolicyContext, lam: float):
    """Exact (p_del, p_blo, p_tx) contributions of the strip h_b < theta/gamma_ub."""
    hs = h_star(ctx.with_lambda(lam))
    if hs <= 0:
        return 0.0, 0.0, 0.0
    mass_b = -math.expm1(-ctx.theta / ctx.gamma_ub)
    g = 2 ** (ctx.n_levels - 1) * ctx.gamma_sd
    rate = 1 + ctx.theta * ctx.gamma_ud / g
    p_del = mass_b * math.exp(-ctx.theta / g) * -math.expm1(-rate * hs) / rate
    p_tx = mass_b * -math.expm1(-hs)
    return p_del, p_tx, p_tx


def integrate_del_blo(ctx: PolicyContext, quad: QuadratureSpec = DEFAULT_QUAD):
    """(p_del, p_blo, p_tx) of the MR policy at ctx.lam."""
    ax, wx, by, wy = _case2_tables(ctx, quad)
    d2, b2, t2 = _kernels.case2_direct(ax, wx, by, wy, float(ctx.lam))
    d1, b1, t1 = _case1(ctx, ctx.lam)
    return d1 + d2, b1 + b2, t1 + t2


def tau_from_probs(p_del, p_blo, W):
    return p_del / (1 + W * p_blo)


def sigma_from_probs(ctx: PolicyContext, lam: float, p_blo: float, W: int) -> float:
    """CUE throughput from the blockage probability (two-branch renewal formula).
    lam equal to the switch value goes to the second branch."""
    e_b = math.exp(-ctx.theta / ctx.gamma_ub)
    den = 1 + p_blo * W
    if lam < ctx.switch_lambda:
        e_h = math.exp(-h_star(ctx.with_lambda(lam)))
        return (e_h * (e_b - 1) + 1 - p_blo + p_blo * W * e_b) / den
    return e_b - p_blo / den


def tau_of_lambda(ctx: PolicyContext, W: int, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    p_del, p_blo, _ = integrate_del_blo(ctx, quad)
    return tau_from_probs(p_del, p_blo, W)


def sigma_of_lambda(ctx: PolicyContext, W: int, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    _, p_blo, _ = integrate_del_blo(ctx, quad)
    return sigma_from_probs(ctx, ctx.lam, p_blo, W)


def analyze(ctx: PolicyContext, W: int, quad: QuadratureSpec = DEFAULT_QUAD) -> ThroughputResult:
    p_del, p_blo, p_tx = integrate_del_blo(ctx, quad)
    return _result(ctx, ctx.lam, W, p_del, p_blo, p_tx)


def _result(ctx, lam, W, p_del, p_blo, p_tx):
    return ThroughputResult(lam=lam, tau=tau_from_probs(p_del, p_blo, W),
                            sigma=sigma_from_probs(ctx, lam, p_blo, W),
                            p_del=p_del, p_blo=p_blo, p_tx=p_tx, reward=p_del - lam * p_blo)


def p_succ(ctx: PolicyContext, quad: QuadratureSpec = DEFAULT_QUAD, p_tx: float | None = None) -> float:
    """P[gamma_ub h_b > theta | the policy stays silent]."""
    if p_tx is None:
        p_tx = integrate_del_blo(ctx, quad)[2]
    if p_tx >= 1:
        raise ZeroDivisionError("p_tx = 1: the policy is never silent")
    e_b = math.exp(-ctx.theta / ctx.gamma_ub)
    if ctx.lam >= ctx.switch_lambda:
        return (e_b - p_tx) / (1 - p_tx)
    e_h = math.exp(-h_star(ctx))
    return (1 - p_tx - e_h * (1 - e_b)) / (1 - p_tx)


def reward_C(ctx: PolicyContext, policy, quad: QuadratureSpec = QuadratureSpec(12.0, 0.02)) -> float:
    """Expected utility of an arbitrary policy ``policy(h_d, h_b) -> levels``
    on the full [0, h_max]^2 midpoint grid."""
    t, w = quad.nodes()
    total = 0.0
    for start in range(0, len(t), 256):
        hd = t[start:start + 256, None]
        lv = np.asarray(policy(np.broadcast_to(hd, (hd.shape[0], len(t))),
                               np.broadcast_to(t[None, :], (hd.shape[0], len(t)))))
        r = np.zeros(lv.shape)
        for i in range(1, ctx.n_levels + 1):
            mask = lv == i
            if mask.any():
                p = np.exp(-ctx.theta * (ctx.gamma_ud * hd + 1) / (2 ** (i - 1) * ctx.gamma_sd))
                expo = (ctx.gamma_ub * t[None, :] - ctx.theta) / (ctx.theta * 2 ** (i - 1) * ctx.gamma_sb)
                q = np.exp(-np.maximum(expo, 0.0))
                r = np.where(mask, p - ctx.lam * q, r)
        total += float(w[start:start + 256] @ r @ w)
    return total


class ThroughputProfile:
    """p_del, p_blo, p_tx of one pair as functions of lam.

    The gridded part is an exact step function in lam (each cell's MR level
    only decreases as lam grows), so after one pass over the grid any lam is
    a binary search away.
    """

    def __init__(self, ctx: PolicyContext, W: int, quad: QuadratureSpec = SEARCH_QUAD):
        self.ctx = ctx
        self.W = W
        self.quad = quad
        base, bp, d_del, d_blo, d_tx = _kernels.case2_events(*_case2_tables(ctx, quad))
        order = np.argsort(bp, kind="stable")
        self._bp = bp[order]
        self._base = base
        self._cum = np.vstack([np.zeros(3), np.cumsum(
            np.column_stack([d_del[order], d_blo[order], d_tx[order]]), axis=0)])

    def probs(self, lam: float):
        k = np.searchsorted(self._bp, lam, side="right")
        grid = self._base + self._cum[k]
        c1 = _case1(self.ctx, lam)
        return (max(grid[0], 0.0) + c1[0], max(grid[1], 0.0) + c1[1], max(grid[2], 0.0) + c1[2])

    def tau(self, lam: float) -> float:
        p_del, p_blo, _ = self.probs(lam)
        return tau_from_probs(p_del, p_blo, self.W)

    def result(self, lam: float) -> ThroughputResult:
        return _result(self.ctx, lam, self.W, *self.probs(lam))


@dataclass(frozen=True)
class ClosedFormN1:
    """On/off (N=1) constants; xi is the mean SNR of S at D, rho that of U at B.

    The low branch is written through E(lam) = exp(-h*(lam)) = e^(1/gamma_ud)
    lam^(1/z2), which stays in [0, 1] there, so ``c2 = n2 / e^(1/gamma_ud)``
    and ``c4 = n4 / e^(1/gamma_ud)`` are kept instead of the raw constants.
    """

    theta: float
    rho: float
    xi: float
    gamma_ud: float
    W: int
    z1: float
    z2: float
    n1: float
    c2: float
    n3: float
    c4: float

    @classmethod
    def from_context(cls, ctx: PolicyContext, W: int) -> "ClosedFormN1":
        if ctx.n_levels != 1:
            raise ValueError("closed form only exists for a single power level")
        th, rho, xi = ctx.theta, ctx.gamma_ub, ctx.gamma_sd
        z1 = th * ctx.gamma_sb / rho
        z2 = th * ctx.gamma_ud / xi
        e_r = math.exp(-th / rho)
        shared = 1 - (1 + z2) / (1 + z2 + z1 * z2) * e_r
        return cls(theta=th, rho=rho, xi=xi, gamma_ud=ctx.gamma_ud, W=W, z1=z1, z2=z2,
                   n1=math.exp(-th / xi) / (1 + z2),
                   c2=shared / (1 + z2),
                   n3=1 + W * (1 - e_r / (1 + z1)),
                   c4=W * shared)

    def _e_ud(self):
        return math.exp(min(1 / self.gamma_ud, 700.0))

    @property
    def n2(self) -> float:
        return self._e_ud() * self.c2

    @property
    def n4(self) -> float:
        return self._e_ud() * self.c4

    def e_h(self, lam):
        """exp(-h*) at lam; 0 at lam = 0."""
        if lam <= 0:
            return 0.0
        return math.exp(min(1 / self.gamma_ud + math.log(lam) / self.z2, 700.0))

    @property
    def switch_lambda(self) -> float:
        return math.exp(-self.theta / self.xi)

    @property
    def big_w_threshold(self) -> float:
        """lam* = lam_M exactly when W exceeds this."""
        z1, z2 = self.z1, self.z2
        return math.exp(self.theta / self.rho) * (1 + z1) * (1 + z2 + z1 * z2)

    def tau_low(self, lam):
        e = self.e_h(lam)
        return (self.n1 - self.c2 * lam * e) / (self.n3 - self.c4 * e)

    def tau_high(self, lam):
        z1, z2, th = self.z1, self.z2, self.theta
        if lam <= 0:
            return 0.0
        log_a = (math.log(1 + z2 + z1 * z2) + th / self.rho + th / self.xi * (z1 + 1)
                 + (z1 + 1) * math.log(lam))
        if log_a > 700:
            return 0.0
        return lam / (math.exp(log_a) + z1 * self.W / (1 + z1))

    def stationarity(self, lam):
        """Left side of the lam* equation for the low branch, unscaled."""
        z2 = self.z2
        return (lam ** (1 / z2 + 1) - self.n3 / self.n4 * (1 + z2) / z2 * lam
                + self.n1 / (z2 * self.n2))

    def stationarity_scaled(self, lam):
        """``stationarity`` times e^(1/gamma_ud): same roots, no overflow."""
        z2 = self.z2
        return (lam * self.e_h(lam) - self.n3 / self.c4 * (1 + z2) / z2 * lam
                + self.n1 / (z2 * self.c2))

    def stationarity_min(self) -> float:
        """Where the (convex) stationarity function is smallest."""
        a = 1 / self.z2
        b = self.n3 / self.c4 * (1 + self.z2) / self.z2
        # (a + 1) E(lam) = b
        expo = self.z2 * (math.log(b / (a + 1)) - 1 / self.gamma_ud)
        return math.inf if expo > 700 else math.exp(expo)

    def probs(self, lam: float):
        """Closed-form (p_del, p_blo, p_tx)."""
        z1, z2, th = self.z1, self.z2, self.theta
        e_r = math.exp(-th / self.rho)
        if lam >= self.switch_lambda:
            L = math.log(lam) + th / self.xi
            D = 1 + z2 + z1 * z2
            p_del = e_r * math.exp(-th / self.xi - z1 * L) / D
            p_blo = z1 / (1 + z1) * e_r * math.exp(-(1 + z1) * L) / D
            p_tx = e_r * math.exp(-z1 * L) / (1 + z1 * z2)
            return p_del, p_blo, p_tx
        e_h = self.e_h(lam)
        p_del = self.n1 - self.c2 * lam * e_h
        p_blo = (self.n3 - 1 - self.c4 * e_h) / self.W
        p_tx = 1 - e_h + e_r * e_h / (1 + z1 * z2)
        return p_del, p_blo, p_tx


def closed_form_tau(cf: ClosedFormN1, lam: float) -> float:
    return cf.tau_low(lam) if lam < cf.switch_lambda else cf.tau_high(lam)


def lambda_m(cf: ClosedFormN1) -> float:
    z1, z2, th = cf.z1, cf.z2, cf.theta
    inner = cf.W * math.exp(-th / cf.rho) / ((1 + z1) * (1 + z2 + z1 * z2))
    return math.exp(-th / cf.xi) * inner ** (1 / (z1 + 1))


@dataclass(frozen=True)
class LambdaStar:
    lam: float
    tau: float
    sigma: float
    interior: bool = True  # False when the optimum sits on an end of the search range


def _closed_form_lambda_star(ctx: PolicyContext, W: int) -> LambdaStar:
    cf = ClosedFormN1.from_context(ctx, W)
    interior = True
    if W > cf.big_w_threshold:
        lam = lambda_m(cf)
    else:
        hi = min(cf.switch_lambda, cf.stationarity_min())
        if cf.stationarity_scaled(hi) < 0:
            lam = bisect(cf.stationarity_scaled, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=2000)
        else:
            interior = False
            ends = [0.0, cf.switch_lambda]
            lam = max(ends, key=lambda x: closed_form_tau(cf, x))
    p_del, p_blo, _ = cf.probs(lam)
    return LambdaStar(lam=lam, tau=tau_from_probs(p_del, p_blo, W),
                      sigma=sigma_from_probs(ctx, lam, p_blo, W), interior=interior)


def golden_section_max(f, a: float, b: float, tol: float = 1e-6):
    """Maximiser of a unimodal f on [a, b] to within tol."""
    inv_phi = (math.sqrt(5) - 1) / 2
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def search_lambda_star(profile: ThroughputProfile, window=LAMBDA_WINDOW,
                       n_grid: int = LAMBDA_GRID_POINTS, tol: float = 1e-6) -> LambdaStar:
    """Log-grid scan of tau followed by golden-section refinement."""
    grid = np.geomspace(window[0], window[1], n_grid)
    taus = np.array([profile.tau(x) for x in grid])
    k = int(np.argmax(taus))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    lam, tau = golden_section_max(profile.tau, lo, hi, tol)
    if taus[k] > tau:
        lam, tau = grid[k], taus[k]
    res = profile.result(lam)
    return LambdaStar(lam=lam, tau=res.tau, sigma=res.sigma, interior=0 < k < n_grid - 1)


def fixed_point_lambda_star(ctx: PolicyContext, W: int, quad: QuadratureSpec = SEARCH_QUAD,
                            tol: float = 1e-12, max_iter: int = 200) -> LambdaStar:
    """Iterate lam <- W * tau(lam) from lam = 0.

    The MR policy at lam maximises p_del - lam * p_blo over all policies, so
    this is Dinkelbach's method for the ratio p_del / (1 + W p_blo): tau never
    decreases and the limit satisfies lam* = W tau(lam*).
    """
    lam = 0.0
    res = _result(ctx, lam, W, *integrate_del_blo(ctx.with_lambda(lam), quad))
    for _ in range(max_iter):
        nxt = W * res.tau
        if abs(nxt - lam) <= tol * max(nxt, 1e-300):
            break
        lam = nxt
        res = _result(ctx, lam, W, *integrate_del_blo(ctx.with_lambda(lam), quad))
    return LambdaStar(lam=lam, tau=res.tau, sigma=res.sigma, interior=lam > 0)


def lambda_star(ctx: PolicyContext, W: int, quad: QuadratureSpec = SEARCH_QUAD,
                method: str = "auto") -> LambdaStar:
    """lam maximising the DUE throughput.

    ``auto`` picks the closed form for N=1 and the fixed-point iteration
    otherwise; ``search`` is the log-grid plus golden-section scan.
    """
    if method == "closed" or (method == "auto" and ctx.n_levels == 1):
        return _closed_form_lambda_star(ctx, W)
    if method in ("auto", "fixed_point"):
        return fixed_point_lambda_star(ctx, W, quad)
    if method == "search":
        return search_lambda_star(ThroughputProfile(ctx, W, quad))
    raise ValueError(f"unknown method {method!r}")

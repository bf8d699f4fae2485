"""Numba kernels shared by the quadrature and the slot simulator."""

import numpy as np
from numba import njit


@njit(cache=True)
def mr_level(gsd, gsb, gud, gub, theta, lam, n_levels, h_d, h_b):
    """Scalar MR decision; same rule and tie-break as policy.policy_argmax."""
    e_d = theta * (gud * h_d + 1.0) / gsd
    e_b = (gub * h_b - theta) / (theta * gsb)
    best = 0
    best_val = 0.0
    scale = 1.0
    for i in range(1, n_levels + 1):
        p = np.exp(-e_d / scale)
        q = 1.0 if e_b <= 0.0 else np.exp(-e_b / scale)
        val = p - lam * q
        if val > best_val:
            best_val = val
            best = i
        scale *= 2.0
    return best


@njit(cache=True)
def case2_direct(ax, wx, by, wy, lam):
    """Midpoint sums of p_del, p_blo, p_tx over the h_b >= theta/gamma_ub part.

    ax[i, k]: decode prob of level i+1 at x-node k; by[i, l]: blockage prob of
    level i+1 at y-node l; wx, wy: node weights (density times step).
    """
    n, nx = ax.shape
    ny = by.shape[1]
    s_del = 0.0
    s_blo = 0.0
    s_tx = 0.0
    for k in range(nx):
        col_del = 0.0
        col_blo = 0.0
        col_tx = 0.0
        for l in range(ny):
            best = -1
            best_val = 0.0
            for i in range(n):
                val = ax[i, k] - lam * by[i, l]
                if val > best_val:
                    best_val = val
                    best = i
            if best >= 0:
                col_del += wy[l] * ax[best, k]
                col_blo += wy[l] * by[best, l]
                col_tx += wy[l]
        s_del += wx[k] * col_del
        s_blo += wx[k] * col_blo
        s_tx += wx[k] * col_tx
    return s_del, s_blo, s_tx


@njit(cache=True)
def _next_level(a, b, cur):
    """Level that takes over from ``cur`` as lam grows, and the crossing lam.
    Index 0 is silence (a = b = 0); returns (-1, inf) if none does."""
    best_j = -1
    best_lam = np.inf
    for j in range(cur):
        if b[j] < b[cur]:
            lam = (a[cur] - a[j]) / (b[cur] - b[j])
            if lam < best_lam:
                best_lam = lam
                best_j = j
            elif lam == best_lam and (b[j] < b[best_j] or (b[j] == b[best_j] and a[j] > a[best_j])):
                best_j = j
    return best_j, best_lam


@njit(cache=True)
def case2_events(ax, wx, by, wy):
    """Per-cell lam breakpoints of the MR level over the h_b >= theta/gamma_ub part.

    Returns base sums at lam = 0 and, per breakpoint, (lam, d_del, d_blo, d_tx).
    The MR level of a cell is non-increasing in lam, so each cell contributes
    at most N breakpoints.
    """
    n, nx = ax.shape
    ny = by.shape[1]
    a = np.zeros(n + 1)
    b = np.zeros(n + 1)
    # pass 1: count
    count = 0
    for k in range(nx):
        for l in range(ny):
            for i in range(n):
                a[i + 1] = ax[i, k]
                b[i + 1] = by[i, l]
            cur = n if a[n] > 0.0 else 0
            while cur > 0:
                j, lam = _next_level(a, b, cur)
                if j < 0:
                    break
                count += 1
                cur = j
    bp = np.empty(count)
    d_del = np.empty(count)
    d_blo = np.empty(count)
    d_tx = np.empty(count)
    base = np.zeros(3)
    m = 0
    for k in range(nx):
        for l in range(ny):
            w = wx[k] * wy[l]
            for i in range(n):
                a[i + 1] = ax[i, k]
                b[i + 1] = by[i, l]
            cur = n if a[n] > 0.0 else 0
            if cur > 0:
                base[0] += w * a[cur]
                base[1] += w * b[cur]
                base[2] += w
            while cur > 0:
                j, lam = _next_level(a, b, cur)
                if j < 0:
                    break
                bp[m] = lam
                d_del[m] = w * (a[j] - a[cur])
                d_blo[m] = w * (b[j] - b[cur])
                d_tx[m] = -w if j == 0 else 0.0
                m += 1
                cur = j
    return base, bp, d_del, d_blo, d_tx


@njit(cache=True)
def run_d2d_channel(h_sd, h_sb, h_ud, h_ub, gsd, gsb, gud, gub, theta, vartheta,
                    lam, n_levels, W, q_step, q_cap, forced_level=0):
    """Slot loop of one D2D-mode channel under the MR policy with blockage.

    gsd/gsb are gammas at the lowest level. Decisions use fades quantised to
    ``q_step`` and capped at ``q_cap`` (q_step <= 0 disables quantisation);
    outcomes use the exact fades. ``forced_level > 0`` bypasses the policy and
    transmits at that level in every free slot. W = 0 disables blockage.
    Returns per-slot (cue_ok, due_ok, level, silent, trigger) arrays.
    """
    T = h_sd.shape[0]
    cue_ok = np.zeros(T, np.int8)
    due_ok = np.zeros(T, np.int8)
    level = np.zeros(T, np.int8)
    silent = np.zeros(T, np.int8)
    trigger = np.zeros(T, np.int8)
    blocked = 0
    for t in range(T):
        hd = h_ud[t]
        hb = h_ub[t]
        if blocked > 0:
            blocked -= 1
            silent[t] = 1
            lvl = 0
        elif forced_level > 0:
            lvl = forced_level
        else:
            if q_step > 0.0:
                od = min(np.floor(hd / q_step + 0.5) * q_step, q_cap)
                ob = min(np.floor(hb / q_step + 0.5) * q_step, q_cap)
            else:
                od = hd
                ob = hb
            lvl = mr_level(gsd, gsb, gud, gub, theta, lam, n_levels, od, ob)
        level[t] = lvl
        if lvl > 0:
            f = 2.0 ** (lvl - 1)
            sinr_b = gub * hb / (1.0 + f * gsb * h_sb[t])
            sinr_d = f * gsd * h_sd[t] / (1.0 + gud * hd)
            if sinr_d >= theta:
                due_ok[t] = 1
            if sinr_b >= theta:
                cue_ok[t] = 1
            if W > 0 and sinr_b < vartheta:
                blocked = W
                trigger[t] = 1
        else:
            if gub * hb >= theta:
                cue_ok[t] = 1
    return cue_ok, due_ok, level, silent, trigger

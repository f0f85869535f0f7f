"""Pure-numpy fallback for the path kernel.

Vectorised across paths: every live path advances one Euler step per loop
iteration.  Random numbers come from the same counter-based hash as the
compiled kernel, so per-path results match it up to libm rounding.
"""
from __future__ import annotations

import numpy as np

_U64 = np.uint64
GOLDEN = _U64(0x9E3779B97F4A7C15)
_M1 = _U64(0xBF58476D1CE4E5B9)
_M2 = _U64(0x94D049BB133111EB)
TWO_PI = 6.283185307179586
INV_2_53 = 1.1102230246251565e-16
BRIDGE_CUTOFF = 38.0


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _M1
        z = (z ^ (z >> _U64(27))) * _M2
    return z ^ (z >> _U64(31))


def uniform(key, stream: int, idx):
    idx = np.asarray(idx, dtype=np.uint64)
    with np.errstate(over="ignore"):
        ctr = ((idx << _U64(3)) | _U64(stream)) + GOLDEN
    r = mix64(key ^ mix64(ctr))
    return ((r >> _U64(11)).astype(np.float64) + 0.5) * INV_2_53


def path_key(seed: int, path_ids):
    ids = np.asarray(path_ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(mix64(_U64(seed)) ^ ((ids + _U64(1)) * GOLDEN))


def bridge_hit_time(a, v, h, sigma, key, k, acc):
    """First zero of a Brownian bridge from ``a`` to ``+-v`` that is known to touch 0.

    A time change turns it into an inverse Gaussian variable (mean ``a/(h v)``,
    shape ``a^2/(h sigma)^2``), drawn by the Michael-Schucany-Haas transform.
    """
    lam = a * a / (h * h * sigma * sigma)
    z = np.sqrt(-2.0 * np.log(uniform(key, 6, k))) * np.cos(TWO_PI * uniform(key, 7, k))
    y = z * z
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = np.sqrt(1.0 + 4.0 * a * v / (h * sigma * sigma * y))
        x = 4.0 * lam / (y * (1.0 + r) * (1.0 + r))
        x = np.where(acc * x * h * v > (1.0 - acc) * a, a * a / (h * h * v * v * x), x)
        out = h * (x * h) / (1.0 + x * h)
    return np.where(y == 0.0, h * a / (a + v), out)


def simulate_paths(x0, b, c, sigma, delta, q, phase_cdf, phase_rate, lam_total,
                   dt, t_max, seed, first_path, bridge, div_out, creep_out, tau_out, cls_out):
    n = div_out.shape[0]
    ids = np.arange(n)
    key = path_key(seed, first_path + ids)
    phase_cdf = np.asarray(phase_cdf, dtype=float)
    phase_rate = np.asarray(phase_rate, dtype=float)
    e_dt = -np.expm1(-q * dt) / q
    d_dt = np.exp(-q * dt)
    sq_dt = np.sqrt(dt)

    if x0 <= 0.0:
        div_out[:] = 0.0
        creep_out[:] = 1.0
        tau_out[:] = 0.0
        cls_out[:] = 1
        return

    u = np.full(n, float(x0))
    t = np.zeros(n)
    div = np.zeros(n)
    disc = np.ones(n)
    k = np.zeros(n, dtype=np.uint64)
    j = np.zeros(n, dtype=np.uint64)
    if lam_total > 0:
        t_next = -np.log(uniform(key, 3, j)) / lam_total
    else:
        t_next = np.full(n, np.inf)

    def finish(mask, tau, creep, cls):
        idx = ids[mask]
        div_out[idx] = div[mask]
        tau_out[idx] = tau
        creep_out[idx] = creep
        cls_out[idx] = cls

    while ids.size:
        t_end = t + dt
        jump_now = t_next <= t_end
        t_end = np.where(jump_now, t_next, t_end)
        over = t_end > t_max
        t_end = np.where(over, t_max, t_end)
        jump_now &= ~over
        h = t_end - t
        above = u > b
        drift = np.where(above, c - delta, c)
        half = k >> _U64(1)
        rad = np.sqrt(-2.0 * np.log(uniform(key, 0, half)))
        ang = TWO_PI * uniform(key, 1, half)
        z = np.where((k & _U64(1)).astype(bool), rad * np.sin(ang), rad * np.cos(ang))
        full = h == dt
        u2 = u + drift * h + sigma * np.where(full, sq_dt, np.sqrt(h)) * z
        rate = np.where(above, delta * disc, 0.0)

        def creep(mask, s):
            # dividends stop at the ruin time inside the step
            tau = t[mask] + s
            div[mask] += rate[mask] * (-np.expm1(-q * s) / q)
            finish(mask, tau, np.exp(-q * tau), 1)

        done = np.zeros(ids.size, dtype=bool)
        crossed = u2 <= 0.0
        if crossed.any():
            c_ = crossed
            acc = uniform(key[c_], 2, k[c_])
            creep(c_, bridge_hit_time(u[c_], -u2[c_], h[c_], sigma, key[c_], k[c_], acc))
            done |= crossed
        if bridge:
            with np.errstate(divide="ignore", invalid="ignore"):
                w = 2.0 * u * u2 / (sigma * sigma * h)
            cand = ~done & (w < BRIDGE_CUTOFF)
            if cand.any():
                hit = np.zeros_like(cand)
                pc = np.exp(-w[cand])
                acc = uniform(key[cand], 2, k[cand])
                hit[cand] = acc < pc
                if hit.any():
                    acc = (acc / pc)[hit[cand]]
                    creep(hit, bridge_hit_time(u[hit], u2[hit], h[hit], sigma, key[hit], k[hit], acc))
                    done |= hit
        div = div + np.where(done, 0.0, rate * np.where(full, e_dt, -np.expm1(-q * h) / q))

        k = k + _U64(1)
        disc = np.where(full, disc * d_dt, disc * np.exp(-q * h))
        t = t_end
        u = u2
        jmask = jump_now & ~done
        if jmask.any():
            w = uniform(key[jmask], 4, j[jmask])
            phase = np.minimum(np.searchsorted(phase_cdf, w, side="left"), phase_rate.size - 1)
            u[jmask] -= -np.log(uniform(key[jmask], 5, j[jmask])) / phase_rate[phase]
            j[jmask] += _U64(1)
            brutal = jmask & (u < 0.0)
            if brutal.any():
                finish(brutal, t[brutal], 0.0, 2)
                done |= brutal
            alive_jump = jmask & ~brutal
            t_next[alive_jump] += -np.log(uniform(key[alive_jump], 3, j[alive_jump])) / lam_total
        survived = ~done & (t >= t_max)
        if survived.any():
            finish(survived, np.nan, 0.0, 0)
            done |= survived
        if done.any():
            keep = ~done
            ids, u, t, div, disc, k, j, t_next, key = (a[keep] for a in (ids, u, t, div, disc, k, j, t_next, key))

"""NumPy implementation of the hot loops; mirrors the compiled ``_kernels`` module."""

from __future__ import annotations

import numpy as np

from .errors import StepUnderflow

NAME = "python"
_LOG_MAX = 600.0


def _capture_ratio(a):
    # (1 - exp(-a)) / a, which tends to 1 for a -> 0
    out = np.ones_like(a)
    big = a > 1e-8
    out[big] = -np.expm1(-a[big]) / a[big]
    small = ~big
    out[small] = 1.0 - 0.5 * a[small]
    return out


def sweep(gen, n2m, n_total, dx, coef, direction, i_lo, i_hi, p_local, rate_out):
    """Sweep-and-capture over one frozen configuration.

    ``gen`` is in holes um^-2 s^-1, cells ``[i_lo, i_hi)`` are the gap.  Writes
    the per-site capture rate (s^-1) into ``rate_out`` and returns the hole
    rates (per um of strip) ``(collected, local, discarded)``.
    """
    n = gen.size
    gdx = gen * dx
    rate_out[:] = 0.0
    if direction == 0:
        ok = n_total > 0
        rate_out[ok] = gen[ok] * p_local / n_total[ok]
        local = float(np.sum(rate_out * n2m * dx))
        return 0.0, local, float(gdx.sum()) - local

    if direction > 0:
        path = slice(0, i_hi)
        direct = float(gdx[i_hi:].sum())
    else:
        path = slice(n - 1, i_lo - 1 if i_lo > 0 else None, -1)
        direct = float(gdx[:i_lo].sum())
    g = gdx[path]
    a = coef * n2m[path] * dx[path]
    cum = np.cumsum(a)
    if cum[-1] < _LOG_MAX:
        prev = np.concatenate(([0.0], cum[:-1]))
        # carry_in[j] = sum_{i<=j} g[i] * exp(-(cum[j-1] - cum[i-1]))
        carry_in = np.exp(-prev) * np.cumsum(g * np.exp(prev))
    else:
        carry_in = np.empty_like(g)
        c = 0.0
        s = np.exp(-a)
        for j in range(g.size):
            c += g[j]
            carry_in[j] = c
            c *= s[j]
    rate_out[path] = carry_in * coef * _capture_ratio(a)
    captured = carry_in * -np.expm1(-a)
    collected = float(carry_in[-1] - captured[-1]) + direct
    return collected, 0.0, 0.0


def run_segment(n_minus, n_total, gen, dx, k_off, emit, det, coef, inv_tau, direction,
                i_lo, i_hi, p_local, t_edges, dt_cap, tol, dt_min, pl_out, coll_out, nm_out):
    """Advance ``n_minus`` in place through consecutive bins with exact stepping.

    Within a macro-step the transport result is frozen and each cell follows
    its closed-form exponential.  Accumulates per-bin integrals of detected
    photons, collected holes and SiV- content.  Returns the macro-step count.
    """
    rate = np.empty_like(n_minus)
    has = n_total > 0
    safe_tot = np.where(has, n_total, 1.0)
    steps = 0
    for b in range(t_edges.size - 1):
        width = t_edges[b + 1] - t_edges[b]
        remaining = width
        pl_acc = coll_acc = nm_acc = 0.0
        while remaining > 0.0:
            n2m = n_total - n_minus
            collected, _, _ = sweep(gen, n2m, n_total, dx, coef, direction, i_lo, i_hi, p_local, rate)
            k_on = rate + inv_tau
            kappa = k_on + k_off
            pos = kappa > 0
            n_eq = np.where(pos, n_total * k_on / np.where(pos, kappa, 1.0), n_minus)
            drift = float(np.max(np.where(has, kappa * np.abs(n_eq - n_minus) / safe_tot, 0.0)))
            h = min(dt_cap, remaining)
            if drift > 0.0:
                h_tol = tol / drift
                if h_tol < h:
                    if h_tol < dt_min:
                        raise StepUnderflow(f"macro-step {h_tol:.3g} s fell below {dt_min:.3g} s")
                    h = h_tol
            decay = np.exp(-kappa * h)
            frac = np.where(pos, -np.expm1(-kappa * h) / np.where(pos, kappa, 1.0), h)
            int_nm = n_eq * h + (n_minus - n_eq) * frac
            pl_acc += float(np.dot(emit, int_nm) + np.dot(det * rate, n_total * h - int_nm))
            coll_acc += collected * h
            nm_acc += float(np.dot(dx, int_nm))
            n_minus[:] = np.clip(n_eq + (n_minus - n_eq) * decay, 0.0, n_total)
            remaining -= h
            if remaining <= 1e-12 * width:
                remaining = 0.0
            steps += 1
        pl_out[b] += pl_acc
        coll_out[b] += coll_acc
        nm_out[b] += nm_acc
    return steps

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sweep-and-capture and macro-stepping loops."""

from libc.math cimport exp, expm1, fabs

import numpy as np

from .errors import StepUnderflow

NAME = "cython"


cdef inline double _ratio(double a) noexcept nogil:
    if a > 1e-8:
        return -expm1(-a) / a
    return 1.0 - 0.5 * a


cdef double _sweep(const double[::1] gen, const double[::1] n2m, const double[::1] n_total,
                   const double[::1] dx, double coef, int direction, Py_ssize_t i_lo,
                   Py_ssize_t i_hi, double p_local, double[::1] rate,
                   double* local, double* discarded) noexcept nogil:
    cdef Py_ssize_t n = gen.shape[0]
    cdef Py_ssize_t j
    cdef double carry = 0.0, a, g, collected = 0.0, total = 0.0, loc = 0.0
    for j in range(n):
        rate[j] = 0.0
    local[0] = 0.0
    discarded[0] = 0.0
    if direction == 0:
        for j in range(n):
            g = gen[j] * dx[j]
            total += g
            if n_total[j] > 0:
                rate[j] = gen[j] * p_local / n_total[j]
                loc += rate[j] * n2m[j] * dx[j]
        local[0] = loc
        discarded[0] = total - loc
        return 0.0
    if direction > 0:
        for j in range(i_hi):
            carry += gen[j] * dx[j]
            a = coef * n2m[j] * dx[j]
            rate[j] = carry * coef * _ratio(a)
            carry -= carry * -expm1(-a)
        for j in range(i_hi, n):
            collected += gen[j] * dx[j]
    else:
        for j in range(n - 1, i_lo - 1, -1):
            carry += gen[j] * dx[j]
            a = coef * n2m[j] * dx[j]
            rate[j] = carry * coef * _ratio(a)
            carry -= carry * -expm1(-a)
        for j in range(i_lo):
            collected += gen[j] * dx[j]
    return collected + carry


def sweep(const double[::1] gen, const double[::1] n2m, const double[::1] n_total,
          const double[::1] dx, double coef, int direction, Py_ssize_t i_lo, Py_ssize_t i_hi,
          double p_local, double[::1] rate_out):
    """Sweep-and-capture over one frozen configuration; see the Python fallback."""
    cdef double local, discarded, collected
    collected = _sweep(gen, n2m, n_total, dx, coef, direction, i_lo, i_hi, p_local,
                       rate_out, &local, &discarded)
    return collected, local, discarded


def run_segment(double[::1] n_minus, const double[::1] n_total, const double[::1] gen,
                const double[::1] dx, const double[::1] k_off, const double[::1] emit,
                const double[::1] det, double coef, double inv_tau, int direction,
                Py_ssize_t i_lo, Py_ssize_t i_hi, double p_local, const double[::1] t_edges,
                double dt_cap, double tol, double dt_min, double[::1] pl_out,
                double[::1] coll_out, double[::1] nm_out):
    """Advance ``n_minus`` in place through consecutive bins; see the Python fallback."""
    cdef Py_ssize_t n = n_minus.shape[0]
    cdef Py_ssize_t nb = t_edges.shape[0] - 1
    cdef Py_ssize_t b, j
    cdef long steps = 0
    cdef double[::1] rate = np.empty(n)
    cdef double[::1] n2m = np.empty(n)
    cdef double[::1] n_eq = np.empty(n)
    cdef double[::1] kap = np.empty(n)
    cdef double width, remaining, h, h_tol, drift, d, k_on, decay, frac, int_nm
    cdef double pl_acc, coll_acc, nm_acc, collected, local, discarded
    for b in range(nb):
        width = t_edges[b + 1] - t_edges[b]
        remaining = width
        pl_acc = 0.0
        coll_acc = 0.0
        nm_acc = 0.0
        while remaining > 0.0:
            for j in range(n):
                n2m[j] = n_total[j] - n_minus[j]
            collected = _sweep(gen, n2m, n_total, dx, coef, direction, i_lo, i_hi, p_local,
                               rate, &local, &discarded)
            drift = 0.0
            for j in range(n):
                k_on = rate[j] + inv_tau
                kap[j] = k_on + k_off[j]
                if kap[j] > 0:
                    n_eq[j] = n_total[j] * k_on / kap[j]
                else:
                    n_eq[j] = n_minus[j]
                if n_total[j] > 0:
                    d = kap[j] * fabs(n_eq[j] - n_minus[j]) / n_total[j]
                    if d > drift:
                        drift = d
            h = dt_cap if dt_cap < remaining else remaining
            if drift > 0.0:
                h_tol = tol / drift
                if h_tol < h:
                    if h_tol < dt_min:
                        raise StepUnderflow(f"macro-step {h_tol:.3g} s fell below {dt_min:.3g} s")
                    h = h_tol
            for j in range(n):
                if kap[j] > 0:
                    decay = exp(-kap[j] * h)
                    frac = -expm1(-kap[j] * h) / kap[j]
                else:
                    decay = 1.0
                    frac = h
                int_nm = n_eq[j] * h + (n_minus[j] - n_eq[j]) * frac
                pl_acc += emit[j] * int_nm + det[j] * rate[j] * (n_total[j] * h - int_nm)
                nm_acc += dx[j] * int_nm
                d = n_eq[j] + (n_minus[j] - n_eq[j]) * decay
                if d < 0.0:
                    d = 0.0
                elif d > n_total[j]:
                    d = n_total[j]
                n_minus[j] = d
            coll_acc += collected * h
            remaining -= h
            if remaining <= 1e-12 * width:
                remaining = 0.0
            steps += 1
        pl_out[b] += pl_acc
        coll_out[b] += coll_acc
        nm_out[b] += nm_acc
    return steps

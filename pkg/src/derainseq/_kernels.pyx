# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled hot kernels: block-matching SSD grid and the ADMM inner sweep.

Bit-parity contract: every floating-point chain mirrors the numpy fallback
in _kernels_py.py (same intermediate roundings, sequential reductions).
The extension is built with -ffp-contract=off so the compiler cannot fuse
multiply-adds and break that contract.
"""

import numpy as np

cimport cython

COMPILED = True


def ssd_grid(double[:, :, ::1] frames, int t_lo, int t_len, int r0, int c0,
             int r_lo, int c_lo, int n_rows, int n_cols, int patch,
             double[:, ::1] out):
    """Tube SSD between the reference patch and every candidate position."""
    cdef int ir, ic, t, pi, pj
    cdef int rr, cc
    cdef double acc, d
    with nogil:
        for ir in range(n_rows):
            rr = r_lo + ir
            for ic in range(n_cols):
                cc = c_lo + ic
                acc = 0.0
                for t in range(t_lo, t_lo + t_len):
                    for pi in range(patch):
                        for pj in range(patch):
                            d = frames[t, rr + pi, cc + pj] - frames[t, r0 + pi, c0 + pj]
                            acc = acc + d * d
                out[ir, ic] = acc / t_len
    return np.asarray(out)


def admm_sweep(double[:, :, ::1] y, double[:, :, ::1] est, double[:, :, ::1] m,
               double[:, :, ::1] u1, double[:, :, ::1] u2, double[:, :, ::1] g,
               double[:, :, ::1] rhs, double[::1] off, double[::1] cprime,
               double[::1] denom, double rho, double thr):
    """Steps (b)-(d) of one ADMM iteration; mutates est, u1, u2, g (rhs is scratch).

    Returns the squared primal residuals (sum (est-m)^2, sum (D_t est - g)^2),
    accumulated sequentially in C order.
    """
    cdef Py_ssize_t n0 = y.shape[0]
    cdef Py_ssize_t t_len = y.shape[1]
    cdef Py_ssize_t n2 = y.shape[2]
    cdef Py_ssize_t i, t, k
    cdef double v, s, hv, hprev, base, d1, d2, r1sq = 0.0, r2sq = 0.0

    with nogil:
        # sparsified temporal gradient from the current estimate
        if t_len > 1:
            for i in range(n0):
                for t in range(t_len - 1):
                    for k in range(n2):
                        v = est[i, t + 1, k] - est[i, t, k]
                        s = v + u2[i, t, k]
                        if s > thr:
                            g[i, t, k] = s - thr
                        elif s < -thr:
                            g[i, t, k] = s + thr
                        else:
                            g[i, t, k] = 0.0

        # right-hand side: y + rho*(m - u1) + rho * D_t^T (g - u2)
        for i in range(n0):
            for t in range(t_len):
                for k in range(n2):
                    base = y[i, t, k] + rho * (m[i, t, k] - u1[i, t, k])
                    if t_len > 1:
                        if t == 0:
                            hv = g[i, 0, k] - u2[i, 0, k]
                            base = base - rho * hv
                        elif t == t_len - 1:
                            hv = g[i, t_len - 2, k] - u2[i, t_len - 2, k]
                            base = base + rho * hv
                        else:
                            hprev = g[i, t - 1, k] - u2[i, t - 1, k]
                            hv = g[i, t, k] - u2[i, t, k]
                            base = base + rho * (hprev - hv)
                    rhs[i, t, k] = base

        # Thomas solve along mode 2, forward sweep in place on rhs
        for i in range(n0):
            for t in range(1, t_len):
                for k in range(n2):
                    rhs[i, t, k] = rhs[i, t, k] - cprime[t - 1] * rhs[i, t - 1, k]
        for i in range(n0):
            for k in range(n2):
                est[i, t_len - 1, k] = rhs[i, t_len - 1, k] / denom[t_len - 1]
            for t in range(t_len - 2, -1, -1):
                for k in range(n2):
                    est[i, t, k] = (rhs[i, t, k] - off[t] * est[i, t + 1, k]) / denom[t]

        # dual updates and sequential residual sums
        for i in range(n0):
            for t in range(t_len):
                for k in range(n2):
                    d1 = est[i, t, k] - m[i, t, k]
                    u1[i, t, k] = u1[i, t, k] + d1
                    r1sq = r1sq + d1 * d1
        if t_len > 1:
            for i in range(n0):
                for t in range(t_len - 1):
                    for k in range(n2):
                        d2 = (est[i, t + 1, k] - est[i, t, k]) - g[i, t, k]
                        u2[i, t, k] = u2[i, t, k] + d2
                        r2sq = r2sq + d2 * d2
    return r1sq, r2sq

"""Pure-numpy twins of the compiled hot kernels.

Selected at import time by :mod:`derainseq._backend` when the Cython
extension is unavailable (or explicitly disabled). Every floating-point
operation here is sequenced to round exactly like the compiled code:
elementwise chains use the same intermediate expressions, and reductions go
through ``np.cumsum`` (strictly left-to-right) instead of ``np.sum`` (pairwise).
Cross-backend outputs are bit-identical up to the sign of exact zeros.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

COMPILED = False


def ssd_grid(frames, t_lo, t_len, r0, c0, r_lo, c_lo, n_rows, n_cols, patch, out):
    """Tube SSD between the reference patch and every candidate position.

    frames is the (F, H, W) matching plane. The tube at position (r, c)
    stacks the patch at that position across frames [t_lo, t_lo + t_len).
    out[ir, ic] receives sum((tube(r_lo+ir, c_lo+ic) - tube(r0, c0))^2) / t_len
    accumulated frame-major then pixel row-major.
    """
    p = patch
    win = sliding_window_view(frames, (p, p), axis=(1, 2))
    acc = np.zeros((n_rows, n_cols))
    for t in range(t_lo, t_lo + t_len):
        ref = frames[t, r0 : r0 + p, c0 : c0 + p]
        cand = win[t, r_lo : r_lo + n_rows, c_lo : c_lo + n_cols]
        diff = cand - ref
        sq = (diff * diff).reshape(n_rows, n_cols, p * p)
        # seed cumsum with the running accumulator: exact sequential order
        chain = np.concatenate((acc[:, :, None], sq), axis=2)
        acc = np.cumsum(chain, axis=2)[:, :, -1]
    out[:, :] = acc / t_len
    return out


def _seq_sq_sum(x):
    """Strictly sequential sum of squares in C order."""
    if x.size == 0:
        return 0.0
    sq = (x * x).ravel()
    return float(np.cumsum(sq)[-1])


def admm_sweep(y, est, m, u1, u2, g, rhs, off, cprime, denom, rho, thr):
    """Steps (b)-(d) of one ADMM iteration, after the low-rank step.

    In place: computes the sparsified temporal gradient g, rebuilds the
    right-hand side, solves the tridiagonal mode-2 system into est, and
    advances both dual variables. rhs is scratch. Returns the squared
    primal residuals (sum (est-m)^2, sum (D_t est - g)^2) accumulated
    sequentially in C order.
    """
    t_len = y.shape[1]

    if t_len > 1:
        dte = est[:, 1:, :] - est[:, :-1, :]
        s = dte + u2
        g[:, :, :] = np.sign(s) * np.maximum(np.abs(s) - thr, 0.0)

    rhs[:, :, :] = y + rho * (m - u1)
    if t_len > 1:
        h = g - u2
        rhs[:, 0, :] = rhs[:, 0, :] - rho * h[:, 0, :]
        if t_len > 2:
            rhs[:, 1:-1, :] = rhs[:, 1:-1, :] + rho * (h[:, :-1, :] - h[:, 1:, :])
        rhs[:, -1, :] = rhs[:, -1, :] + rho * h[:, -1, :]

    # Thomas solve, forward sweep in place on rhs, backward into est
    for t in range(1, t_len):
        rhs[:, t, :] = rhs[:, t, :] - cprime[t - 1] * rhs[:, t - 1, :]
    est[:, -1, :] = rhs[:, -1, :] / denom[-1]
    for t in range(t_len - 2, -1, -1):
        est[:, t, :] = (rhs[:, t, :] - off[t] * est[:, t + 1, :]) / denom[t]

    d1 = est - m
    u1[:, :, :] = u1 + d1
    r1sq = _seq_sq_sum(d1)

    r2sq = 0.0
    if t_len > 1:
        d2 = (est[:, 1:, :] - est[:, :-1, :]) - g
        u2[:, :, :] = u2 + d2
        r2sq = _seq_sq_sum(d2)
    return r1sq, r2sq

"""Dense third-order tensor algebra for the group solver.

Tensors are float64 ndarrays of shape (d, T, K): d pixels per patch, T
temporal samples, K grouped patches. The unfolding convention is fixed so
that results are reproducible across implementations:

    mode 1: row i, column t + T*k
    mode 2: row t, column i + d*k
    mode 3: row k, column i + d*t

Mode 3 (the patch-group axis) is the only mode that ever receives a
nuclear-norm operation; modes 1 and 2 are plain rearrangements.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Dimension mismatch between a matrix/tensor and the requested operation."""


def _require_tensor3(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"expected a third-order tensor, got ndim={x.ndim}")
    return x


def unfold(tensor, mode):
    """Mode-n unfolding of a (d, T, K) tensor into a matrix."""
    x = _require_tensor3(tensor)
    if mode == 1:
        return x.transpose(0, 2, 1).reshape(x.shape[0], -1)
    if mode == 2:
        return x.transpose(1, 2, 0).reshape(x.shape[1], -1)
    if mode == 3:
        return x.transpose(2, 1, 0).reshape(x.shape[2], -1)
    raise ShapeError(f"mode must be 1, 2 or 3, got {mode!r}")


def fold(matrix, mode, dims):
    """Inverse of :func:`unfold`; bitwise exact (pure index rearrangement)."""
    d, t, k = dims
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a matrix, got ndim={m.ndim}")
    if m.size != d * t * k:
        raise ShapeError(
            f"matrix with {m.size} elements cannot fold into dims {tuple(dims)}"
        )
    if mode == 1:
        if m.shape != (d, k * t):
            raise ShapeError(f"mode-1 fold needs shape {(d, k * t)}, got {m.shape}")
        return m.reshape(d, k, t).transpose(0, 2, 1)
    if mode == 2:
        if m.shape != (t, k * d):
            raise ShapeError(f"mode-2 fold needs shape {(t, k * d)}, got {m.shape}")
        return m.reshape(t, k, d).transpose(2, 0, 1)
    if mode == 3:
        if m.shape != (k, t * d):
            raise ShapeError(f"mode-3 fold needs shape {(k, t * d)}, got {m.shape}")
        return m.reshape(k, t, d).transpose(2, 1, 0)
    raise ShapeError(f"mode must be 1, 2 or 3, got {mode!r}")


def _svd_econ(mat):
    """Economy SVD; runs LAPACK on the tall orientation (faster for wide inputs)."""
    rows, cols = mat.shape
    if rows <= cols:
        u2, s, vt2 = np.linalg.svd(mat.T, full_matrices=False)
        return vt2.T, s, u2.T
    return np.linalg.svd(mat, full_matrices=False)


def svt(matrix, tau, weights=None):
    """Singular value thresholding: prox of tau * (weighted) nuclear norm.

    Parameters
    ----------
    matrix : 2-D array
        Input matrix; must be finite.
    tau : float
        Threshold, >= 0.
    weights : 1-D array, optional
        Per-singular-value weights, nondecreasing in rank order, length at
        least min(rows, cols). Defaults to all ones.

    Returns
    -------
    2-D array, U * max(S - tau*w, 0) * V^T from a full (exact) SVD.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"svt expects a matrix, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ValueError("svt input must be finite")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    n_sv = min(m.shape)
    if weights is None:
        w = np.ones(n_sv)
    else:
        w = np.asarray(weights, dtype=np.float64)[:n_sv]
        if w.size < n_sv:
            raise ShapeError(f"need at least {n_sv} weights, got {w.size}")
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
        if (np.diff(w) < 0).any():
            raise ValueError("weights must be nondecreasing in rank order")
    u, s, vt = _svd_econ(m)
    shrunk = np.maximum(s - tau * w, 0.0)
    return (u * shrunk) @ vt


def svt_with_values(matrix, tau, reweight_eps=None):
    """SVT variant used by the ADMM loop; also returns the shrunk spectrum.

    With reweight_eps set, weights are recomputed from the input's own
    singular values as w_i = (s_0 + eps) / (s_i + eps), i.e. normalized so
    the leading weight is 1; large singular values are barely touched while
    the noise tail is shrunk aggressively.

    Returns (result, shrunk_singular_values, weights).
    """
    u, s, vt = _svd_econ(np.asarray(matrix, dtype=np.float64))
    if reweight_eps is None:
        w = np.ones_like(s)
    else:
        w = (s[0] + reweight_eps) / (s + reweight_eps)
    shrunk = np.maximum(s - tau * w, 0.0)
    return (u * shrunk) @ vt, shrunk, w


def soft_threshold(tensor, lam):
    """Elementwise sign(v) * max(|v| - lam, 0)."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    x = np.asarray(tensor, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def temporal_diff(tensor):
    """Forward difference along mode 2: (d, T, K) -> (d, T-1, K)."""
    x = _require_tensor3(tensor)
    if x.shape[1] < 2:
        raise ShapeError("temporal_diff needs T >= 2")
    return x[:, 1:, :] - x[:, :-1, :]


def temporal_diff_adjoint(grad, t_out):
    """Exact adjoint of :func:`temporal_diff`, mapping (d, T-1, K) -> (d, T, K)."""
    g = _require_tensor3(grad)
    if g.shape[1] != t_out - 1:
        raise ShapeError(
            f"adjoint input has mode-2 length {g.shape[1]}, expected {t_out - 1}"
        )
    d, _, k = g.shape
    out = np.zeros((d, t_out, k))
    out[:, 0, :] = -g[:, 0, :]
    if t_out > 2:
        out[:, 1:-1, :] = g[:, :-1, :] - g[:, 1:, :]
    out[:, -1, :] += g[:, -1, :]
    return out


def mode2_factor(t_len, a, rho):
    """Thomas factorization of a*I + rho*D^T D for mode-2 fibers of length t_len.

    D is the forward-difference matrix, so D^T D is tridiagonal with diagonal
    [1, 2, ..., 2, 1] and off-diagonals -1. Returns (off, cprime, denom) for
    the forward/backward sweeps; all three are reused across fibers and
    iterations.
    """
    if a <= 0:
        raise ValueError("a must be > 0")
    if rho < 0:
        raise ValueError("rho must be >= 0")
    diag = np.full(t_len, float(a))
    if t_len > 1:
        diag[0] += rho
        diag[-1] += rho
        diag[1:-1] += 2.0 * rho
        off = np.full(t_len - 1, -float(rho))
    else:
        off = np.zeros(0)
    cprime = np.zeros(max(t_len - 1, 0))
    denom = np.zeros(t_len)
    denom[0] = diag[0]
    for t in range(1, t_len):
        cprime[t - 1] = off[t - 1] / denom[t - 1]
        denom[t] = diag[t] - off[t - 1] * cprime[t - 1]
    return off, cprime, denom


def solve_mode2_system(rhs, a, rho):
    """Solve (a*I + rho*D^T D) x = rhs independently along every mode-2 fiber.

    Direct tridiagonal (Thomas) elimination, vectorized across the (d, K)
    fibers; the sweep along T is sequential, which pins the floating-point
    evaluation order.
    """
    x = _require_tensor3(rhs)
    t_len = x.shape[1]
    factor = mode2_factor(t_len, a, rho)
    return _solve_mode2_factored(x, factor)


def _solve_mode2_factored(rhs, factor):
    off, cprime, denom = factor
    t_len = rhs.shape[1]
    fwd = np.empty_like(rhs)
    fwd[:, 0, :] = rhs[:, 0, :]
    for t in range(1, t_len):
        fwd[:, t, :] = rhs[:, t, :] - cprime[t - 1] * fwd[:, t - 1, :]
    out = np.empty_like(rhs)
    out[:, -1, :] = fwd[:, -1, :] / denom[-1]
    for t in range(t_len - 2, -1, -1):
        out[:, t, :] = (fwd[:, t, :] - off[t] * out[:, t + 1, :]) / denom[t]
    return out

"""ADMM solver for grouped tubes and the sequence-level derain orchestration.

Per group, the model is

    minimize over L:  1/2 ||y - L||_F^2  +  tau * ||M_(3)||_(w,*)  +  lambda * ||G||_1
    subject to        M = L,   G = D_t(L)

where D_t is the forward temporal difference. The nuclear-norm penalty is
unidirectional: it touches only the mode-3 (patch-group) unfolding. ADMM
alternates a singular-value-thresholding step for M, a soft-thresholding
step for G, a tridiagonal mode-2 solve for L, and dual ascent; the fixed
penalty keeps every run deterministic.

Sequence restoration regroups on the current estimate each outer pass,
solves every group (per channel, with matching coordinates shared via the
luma plane), aggregates by weighted averaging, and optionally feeds a
fraction of the residual back before the next pass.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._backend import admm_sweep, backend_name
from .grouping import (
    GroupingConfig,
    clip_window,
    gather_group_tensor,
    grid_positions,
    match_coords,
    scatter_group,
)
from .io_pnm import sequence_from_array
from .tensor_ops import fold, mode2_factor, svt_with_values, temporal_diff, unfold

ANCHOR_CHUNK = 64  # fixed chunk size: merge order must not depend on thread count


class SolverError(ValueError):
    pass


class SolverAbort(RuntimeError):
    """Non-finite intermediate encountered; `report` holds the partial diagnostics."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SolverConfig:
    tau: float = 0.08
    lam: float = 0.02
    rho: float = 1.0
    tol: float = 1e-4
    max_iter: int = 100
    use_weighted_nuclear: bool = True
    weight_eps: float = 1e-6
    outer_iters: int = 2
    delta: float = 0.1

    def validate(self):
        if self.tau < 0 or self.lam < 0:
            raise SolverError("tau and lambda must be >= 0")
        if self.rho <= 0:
            raise SolverError("rho must be > 0")
        if self.tol <= 0:
            raise SolverError("tol must be > 0")
        if self.max_iter < 1 or self.outer_iters < 1:
            raise SolverError("max_iter and outer_iters must be >= 1")
        if not 0.0 <= self.delta < 1.0:
            raise SolverError("delta must lie in [0, 1)")
        if self.weight_eps <= 0:
            raise SolverError("weight_eps must be > 0")
        return self


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    objective_trace: tuple


def solve_group(y, cfg):
    """Restore one grouped tube tensor; returns (estimate, SolveReport)."""
    cfg.validate()
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.ndim != 3:
        raise SolverError(f"group tensor must be 3-D, got ndim={y.ndim}")
    if not np.isfinite(y).all():
        raise SolverError("group tensor must be finite")
    d, t_len, k = y.shape
    if cfg.lam > 0 and t_len < 2:
        raise SolverError("temporal gradient term needs T >= 2")

    rho = cfg.rho
    thr = cfg.lam / rho
    tau_eff = cfg.tau / rho
    eps = cfg.weight_eps if cfg.use_weighted_nuclear else None

    est = y.copy()
    u1 = np.zeros_like(y)
    grad_len = max(t_len - 1, 0)
    u2 = np.zeros((d, grad_len, k))
    g = np.zeros((d, grad_len, k))
    rhs = np.empty_like(y)
    off, cprime, denom = mode2_factor(t_len, 1.0 + rho, rho)

    # previous feasible point for the dual residual
    m_prev = est.copy()
    g_prev = temporal_diff(est) if t_len > 1 else g.copy()

    trace = []
    iterations = 0
    primal = np.inf
    dual = np.inf
    converged = False
    for iterations in range(1, cfg.max_iter + 1):
        mat = unfold(est + u1, 3)
        m_mat, shrunk, weights = svt_with_values(mat, tau_eff, eps)
        m = np.ascontiguousarray(fold(m_mat, 3, (d, t_len, k)))
        r1sq, r2sq = admm_sweep(y, est, m, u1, u2, g, rhs, off, cprime, denom, rho, thr)

        norm_est = max(float(np.linalg.norm(est)), 1e-12)
        primal = max(np.sqrt(r1sq), np.sqrt(r2sq)) / norm_est
        dual = rho * (np.linalg.norm(m - m_prev) + np.linalg.norm(g - g_prev)) / norm_est
        fidelity = 0.5 * float(np.linalg.norm(y - est)) ** 2
        objective = fidelity + cfg.tau * float(weights @ shrunk) + cfg.lam * float(
            np.abs(g).sum()
        )
        trace.append(objective)

        if not (np.isfinite(primal) and np.isfinite(dual) and np.isfinite(objective)):
            report = SolveReport(iterations, float(primal), float(dual), False, tuple(trace))
            raise SolverAbort("non-finite intermediate in group solve", report)

        m_prev = m
        g_prev = g.copy()
        if max(primal, dual) < cfg.tol:
            converged = True
            break

    report = SolveReport(
        iterations=iterations,
        primal_residual=float(primal),
        dual_residual=float(dual),
        converged=converged,
        objective_trace=tuple(trace),
    )
    return est, report


@dataclass(frozen=True)
class DerainReport:
    outer_iters: int
    groups: int
    solves: int
    iterations_total: int
    converged_solves: int
    padded_groups: int
    primal_residual_mean: float
    dual_residual_mean: float
    backend: str

    @property
    def iterations_mean(self):
        return self.iterations_total / max(self.solves, 1)

    @property
    def converged_fraction(self):
        return self.converged_solves / max(self.solves, 1)


def _luma_stack(cur):
    if cur.shape[1] == 1:
        return np.ascontiguousarray(cur[:, 0])
    r, g, b = cur[:, 0], cur[:, 1], cur[:, 2]
    return np.ascontiguousarray(0.299 * r + 0.587 * g + 0.114 * b)


def _process_chunk(cur, luma, gcfg, scfg, anchors):
    """Match, solve and locally aggregate one chunk of anchors.

    Returns per-channel sum canvases, the shared weight canvas, and solver
    statistics. Pure function of its arguments, so chunks may run on any
    worker; the caller merges results in chunk order.
    """
    n_frames, n_chan, height, width = cur.shape
    p = gcfg.patch_size
    sums = np.zeros((n_chan, n_frames, height, width))
    weights = np.zeros((n_frames, height, width))
    stats = {
        "groups": 0, "solves": 0, "iterations": 0,
        "converged": 0, "padded": 0, "primal": 0.0, "dual": 0.0,
    }
    for anchor in anchors:
        coords, window, _, padded = match_coords(luma, anchor, gcfg)
        stats["groups"] += 1
        stats["padded"] += int(padded)
        for c in range(n_chan):
            tensor = gather_group_tensor(cur[:, c], coords, window, p)
            restored, rep = solve_group(tensor, scfg)
            scatter_group(sums[c], weights, restored, coords, window, p,
                          with_weights=(c == 0))
            stats["solves"] += 1
            stats["iterations"] += rep.iterations
            stats["converged"] += int(rep.converged)
            stats["primal"] += rep.primal_residual
            stats["dual"] += rep.dual_residual
    return sums, weights, stats


_WORKER_PAYLOAD = None


def _worker_init(payload):
    global _WORKER_PAYLOAD
    _WORKER_PAYLOAD = payload


def _worker_chunk(anchors):
    cur, luma, gcfg, scfg = _WORKER_PAYLOAD
    return _process_chunk(cur, luma, gcfg, scfg, anchors)


def derain_sequence(seq, gcfg=None, scfg=None, threads=1):
    """Restore a degraded sequence; returns (sequence, DerainReport).

    Output is clamped to [0, 1] and is bit-identical for any thread count:
    anchors are processed in fixed-size chunks and the partial canvases are
    merged in chunk order regardless of which worker produced them.
    """
    gcfg = (gcfg or GroupingConfig()).validate()
    scfg = (scfg or SolverConfig()).validate()
    if len(seq) < 2:
        raise SolverError(
            "deraining needs at least 2 frames; provide a sequence with T >= 2"
        )
    p = gcfg.patch_size
    if seq.height < p or seq.width < p:
        raise SolverError(f"frames {seq.width}x{seq.height} smaller than patch {p}")

    orig = seq.as_array()
    cur = orig.copy()
    n_frames, n_chan, height, width = cur.shape
    rows = grid_positions(height, p, gcfg.stride)
    cols = grid_positions(width, p, gcfg.stride)
    anchors = [(f, r, c) for f in range(n_frames) for r in rows for c in cols]
    chunks = [anchors[i : i + ANCHOR_CHUNK] for i in range(0, len(anchors), ANCHOR_CHUNK)]

    totals = {"groups": 0, "solves": 0, "iterations": 0,
              "converged": 0, "padded": 0, "primal": 0.0, "dual": 0.0}
    for outer in range(scfg.outer_iters):
        luma = _luma_stack(cur)
        payload = (cur, luma, gcfg, scfg)
        if threads <= 1 or len(chunks) == 1:
            results = (_process_chunk(*payload, ch) for ch in chunks)
            sums, weights = _merge_chunks(results, cur.shape, totals)
        else:
            with ProcessPoolExecutor(
                max_workers=threads, initializer=_worker_init, initargs=(payload,)
            ) as pool:
                sums, weights = _merge_chunks(
                    pool.map(_worker_chunk, chunks), cur.shape, totals
                )
        covered = weights > 0
        result = cur.copy()
        for c in range(n_chan):
            plane = result[:, c]
            plane[covered] = sums[c][covered] / weights[covered]
        # iterative regularization feeds the next pass; the last pass is final
        if outer < scfg.outer_iters - 1 and scfg.delta > 0:
            cur = result + scfg.delta * (orig - result)
        else:
            cur = result

    out = sequence_from_array(np.clip(cur, 0.0, 1.0), manifest=seq.manifest)
    report = DerainReport(
        outer_iters=scfg.outer_iters,
        groups=totals["groups"],
        solves=totals["solves"],
        iterations_total=totals["iterations"],
        converged_solves=totals["converged"],
        padded_groups=totals["padded"],
        primal_residual_mean=totals["primal"] / max(totals["solves"], 1),
        dual_residual_mean=totals["dual"] / max(totals["solves"], 1),
        backend=backend_name(),
    )
    return out, report


def _merge_chunks(results, shape, totals):
    n_frames, n_chan, height, width = shape
    sums = np.zeros((n_chan, n_frames, height, width))
    weights = np.zeros((n_frames, height, width))
    for chunk_sums, chunk_weights, stats in results:
        sums += chunk_sums
        weights += chunk_weights
        for key in totals:
            totals[key] += stats[key]
    return sums, weights

"""Non-local self-similarity engine: reference grid, tube matching, aggregation.

A group collects the K patch tubes most similar to a reference tube. A tube
is one p x p patch position tracked across the temporal window centered on
the anchor frame (clipped at sequence ends), so matching exploits temporal
redundancy without explicit motion estimation. Candidates are the in-bounds
positions within a Chebyshev search radius of the anchor; their distance is
the tube SSD against the reference averaged over the window.

The selected group is deterministic: member 0 is always the reference tube
itself (distance exactly 0); the remaining members take the K-1 smallest
distances with ties broken by raster order (frame, row, col).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import ssd_grid
from .io_pnm import VideoSequence, sequence_from_array


class GroupingError(ValueError):
    pass


@dataclass(frozen=True)
class GroupingConfig:
    patch_size: int = 6
    stride: int = 4
    search_radius: int = 15
    temporal_window: int = 5
    group_size: int = 30

    def validate(self):
        if self.patch_size < 2:
            raise GroupingError("patch_size must be >= 2")
        if self.stride < 1:
            raise GroupingError("stride must be >= 1")
        if self.search_radius < 0:
            raise GroupingError("search_radius must be >= 0")
        if self.group_size < 1:
            raise GroupingError("group_size must be >= 1")
        if self.temporal_window < 1 or self.temporal_window % 2 == 0:
            raise GroupingError("temporal_window must be odd and >= 1")
        return self


@dataclass(frozen=True)
class PatchGroup:
    """Matched group: tensor (p*p, T, K), member coords, and provenance.

    coords[k] = (frame, row, col) of member k's top-left corner at the anchor
    frame; window = (first_frame, length) of the clipped temporal span shared
    by every tube; distances are the selection distances (member 0 is 0);
    padded marks groups that had fewer than K candidates and were filled by
    cycling the best ones.
    """

    tensor: np.ndarray
    coords: tuple
    anchor: tuple
    window: tuple
    distances: np.ndarray
    padded: bool = False


def grid_positions(extent, patch, stride):
    """Anchor offsets along one axis: stride grid plus a clamped last anchor."""
    last = extent - patch
    if last < 0:
        raise GroupingError(f"extent {extent} smaller than patch size {patch}")
    xs = list(range(0, last + 1, stride))
    if xs[-1] != last:
        xs.append(last)
    return xs


def extract_ref_grid(seq, cfg):
    """Reference anchors (frame, row, col) in raster order, covering every pixel."""
    cfg.validate()
    rows = grid_positions(seq.height, cfg.patch_size, cfg.stride)
    cols = grid_positions(seq.width, cfg.patch_size, cfg.stride)
    return [
        (f, r, c)
        for f in range(len(seq))
        for r in rows
        for c in cols
    ]


def clip_window(frame, n_frames, temporal_window):
    """Clipped temporal span [t_lo, t_lo + t_len) centered on `frame`."""
    half = (temporal_window - 1) // 2
    t_lo = max(0, frame - half)
    t_hi = min(n_frames - 1, frame + half)
    return t_lo, t_hi - t_lo + 1


def match_coords(planes, anchor, cfg):
    """Select the group for one anchor on a (F, H, W) matching plane.

    Returns (coords, window, distances, padded). The heavy SSD scan runs on
    the active kernel backend; selection happens here so both backends share
    the identical ordering rule.
    """
    f0, r0, c0 = anchor
    p = cfg.patch_size
    n_frames, height, width = planes.shape
    t_lo, t_len = clip_window(f0, n_frames, cfg.temporal_window)

    r_lo = max(0, r0 - cfg.search_radius)
    r_hi = min(height - p, r0 + cfg.search_radius)
    c_lo = max(0, c0 - cfg.search_radius)
    c_hi = min(width - p, c0 + cfg.search_radius)
    n_rows = r_hi - r_lo + 1
    n_cols = c_hi - c_lo + 1

    dists = np.empty((n_rows, n_cols))
    ssd_grid(planes, t_lo, t_len, r0, c0, r_lo, c_lo, n_rows, n_cols, p, dists)

    rows = (np.arange(n_rows) + r_lo).repeat(n_cols)
    cols = np.tile(np.arange(n_cols) + c_lo, n_rows)
    flat = dists.ravel()
    ref_idx = (r0 - r_lo) * n_cols + (c0 - c_lo)

    # member 0 is the reference; rank the rest by (distance, row, col)
    mask = np.ones(flat.size, dtype=bool)
    mask[ref_idx] = False
    order = np.lexsort((cols[mask], rows[mask], flat[mask]))
    sel_rows = np.concatenate(([r0], rows[mask][order]))
    sel_cols = np.concatenate(([c0], cols[mask][order]))
    sel_dist = np.concatenate(([0.0], flat[mask][order]))

    k = cfg.group_size
    padded = sel_rows.size < k
    if padded:
        reps = np.arange(k) % sel_rows.size
        sel_rows, sel_cols, sel_dist = sel_rows[reps], sel_cols[reps], sel_dist[reps]
    coords = tuple((f0, int(r), int(c)) for r, c in zip(sel_rows[:k], sel_cols[:k]))
    return coords, (t_lo, t_len), sel_dist[:k].copy(), padded


def gather_group_tensor(planes, coords, window, patch):
    """Assemble the (p*p, T, K) tensor for a group from a (F, H, W) plane stack."""
    t_lo, t_len = window
    rows = np.array([r for _, r, _ in coords])
    cols = np.array([c for _, _, c in coords])
    k = len(coords)
    tube = np.empty((patch * patch, t_len, k))
    for ti in range(t_len):
        plane = planes[t_lo + ti]
        # (K, p, p) gather, pixels row-major
        patches = np.stack([plane[r : r + patch, c : c + patch] for r, c in zip(rows, cols)])
        tube[:, ti, :] = patches.reshape(k, patch * patch).T
    return np.ascontiguousarray(tube)


def match_group(seq, anchor, cfg):
    """Match one anchor of a VideoSequence; the tensor holds the matching plane.

    Matching runs on the luma plane for color sequences (the coordinates are
    then reused for every channel by the derain pipeline) and on the single
    plane for gray sequences.
    """
    cfg.validate()
    p = cfg.patch_size
    if seq.height < p or seq.width < p:
        raise GroupingError(
            f"frames {seq.width}x{seq.height} smaller than patch size {p}"
        )
    planes = np.stack([f.luma() for f in seq.frames])
    coords, window, dist, padded = match_coords(planes, anchor, cfg)
    tensor = gather_group_tensor(planes, coords, window, p)
    return PatchGroup(
        tensor=tensor, coords=coords, anchor=tuple(anchor), window=window,
        distances=dist, padded=padded,
    )


def scatter_group(sums, weights, tensor, coords, window, patch, with_weights=True):
    """Accumulate one restored group into (F, H, W) sum/weight canvases.

    Fixed order: member k, then window frame t; each patch is a single slice
    add, so the accumulation is deterministic.
    """
    t_lo, t_len = window
    for k, (_, r, c) in enumerate(coords):
        for ti in range(t_len):
            sums[t_lo + ti, r : r + patch, c : c + patch] += tensor[:, ti, k].reshape(
                patch, patch
            )
            if with_weights:
                weights[t_lo + ti, r : r + patch, c : c + patch] += 1.0


def aggregate(groups, base):
    """Weighted-average restored groups back into a sequence.

    Every patch lands at its source location with weight 1; covered pixels
    become sum/weight, never-covered pixels keep the base sequence's value.
    Accumulation follows the deterministic (group, member, frame, pixel)
    order. Color aggregation happens per channel inside the derain pipeline;
    this entry point takes the single-plane case.
    """
    if base.channels != 1:
        raise GroupingError(
            "aggregate operates on single-channel sequences; "
            "derain_sequence handles color internally"
        )
    stack = base.as_array()[:, 0]
    sums = np.zeros_like(stack)
    weights = np.zeros_like(stack)
    patch = None
    for grp in groups:
        d = grp.tensor.shape[0]
        patch = int(round(d ** 0.5))
        if patch * patch != d:
            raise GroupingError(f"group tensor first dim {d} is not a square patch")
        scatter_group(sums, weights, grp.tensor, grp.coords, grp.window, patch)
    covered = weights > 0
    out = stack.copy()
    out[covered] = sums[covered] / weights[covered]
    return sequence_from_array(out[:, None], manifest=base.manifest)

"""Deterministic synthetic degradations: Gaussian noise and rain streaks.

Provides clean/degraded pairs with known ground truth for verifying the
derainer. Everything is a pure function of (inputs, seed); channel c of an
output depends only on channel c of the input and the SplitMix64 stream
seeded with seed + c.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .io_pnm import Frame, VideoSequence
from .rng import MASK64, SplitMix64, gaussian_array, splitmix64_array


@dataclass(frozen=True)
class RainParams:
    """Streak field parameters; density is streaks per 1000 pixels."""

    density: float = 5.0
    length: float = 12.0
    angle_deg: float = 8.0
    intensity: float = 0.6
    jitter: float = 4.0
    seed: int = 0

    def validate(self):
        if self.density < 0:
            raise ValueError("density must be >= 0")
        if self.length < 1:
            raise ValueError("length must be >= 1 pixel")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError("intensity must lie in [0, 1]")
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")
        return self


def gaussian_field(shape, sigma, seed):
    """The unclamped N(0, sigma^2) field added by add_gaussian_noise."""
    n = int(np.prod(shape))
    return gaussian_array(seed, n, sigma).reshape(shape)


def add_gaussian_noise(frame, sigma, seed):
    """Add i.i.d. Gaussian noise per sample, clamp to [0, 1]."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return frame
    planes = frame.planes.copy()
    for c in range(frame.channels):
        noise = gaussian_field(planes[c].shape, sigma, (seed + c) & MASK64)
        planes[c] = np.clip(planes[c] + noise, 0.0, 1.0)
    return Frame(planes)


def streak_count(params, width, height):
    """round(density * W * H / 1000), half away from zero."""
    x = params.density * width * height / 1000.0
    return int(np.floor(x + 0.5))


def _render_streaks(height, width, params, seed):
    """Additive streak layer for one channel.

    Each streak draws (row, col, jitter) from the stream, in that order, and
    splats an anti-aliased segment of the requested length by stepping at
    quarter-pixel resolution and bilinearly depositing intensity/4 per step.
    """
    layer = np.zeros((height, width))
    count = streak_count(params, width, height)
    if count == 0 or params.intensity == 0.0:
        return layer, count
    rng = SplitMix64(seed)
    step = 0.25
    n_steps = max(int(round(params.length / step)), 1)
    offsets = (np.arange(n_steps) - (n_steps - 1) / 2.0) * step
    for _ in range(count):
        row = rng.next_unit() * height
        col = rng.next_unit() * width
        ang = params.angle_deg + (rng.next_unit() * 2.0 - 1.0) * params.jitter
        theta = np.deg2rad(ang)
        dr = np.cos(theta)  # angle measured from vertical
        dc = np.sin(theta)
        rr = row + offsets * dr
        cc = col + offsets * dc
        r0 = np.floor(rr).astype(np.int64)
        c0 = np.floor(cc).astype(np.int64)
        fr = rr - r0
        fc = cc - c0
        deposit = params.intensity * step
        for dr_i, dc_i, w_r, w_c in (
            (0, 0, 1.0 - fr, 1.0 - fc),
            (0, 1, 1.0 - fr, fc),
            (1, 0, fr, 1.0 - fc),
            (1, 1, fr, fc),
        ):
            r_idx = r0 + dr_i
            c_idx = c0 + dc_i
            ok = (r_idx >= 0) & (r_idx < height) & (c_idx >= 0) & (c_idx < width)
            np.add.at(layer, (r_idx[ok], c_idx[ok]), deposit * (w_r * w_c)[ok])
    return layer, count


def add_rain_streaks(frame, params):
    """Overlay additive anti-aliased rain streaks, clamp to [0, 1]."""
    params.validate()
    if params.density == 0 or params.intensity == 0.0:
        return frame
    planes = frame.planes.copy()
    for c in range(frame.channels):
        layer, _ = _render_streaks(frame.height, frame.width, params, (params.seed + c) & MASK64)
        planes[c] = np.clip(planes[c] + layer, 0.0, 1.0)
    return Frame(planes)


def make_test_sequence(n_frames, width, height, motion, seed):
    """Procedural gray sequence: sum of low-frequency sinusoids, translated.

    The scene is continuous, so per-frame translation by `motion` pixels is
    evaluated exactly (no resampling); adjacent frames stay highly redundant,
    which is the structure the derainer exploits. Returns (sequence, meta).
    """
    if n_frames < 1 or width < 1 or height < 1:
        raise ValueError("frame count and dimensions must be positive")
    rng = SplitMix64(seed)
    n_waves = 6
    amps = np.array([0.5 + rng.next_unit() for _ in range(n_waves)])
    amps *= 0.35 / amps.sum()
    fx = np.array([0.5 + 2.5 * rng.next_unit() for _ in range(n_waves)])
    fy = np.array([0.5 + 2.5 * rng.next_unit() for _ in range(n_waves)])
    phase = np.array([2.0 * np.pi * rng.next_unit() for _ in range(n_waves)])
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    frames = []
    for t in range(n_frames):
        shift = motion * t
        value = np.full((height, width), 0.5)
        for w in range(n_waves):
            value = value + amps[w] * np.sin(
                2.0 * np.pi * (fx[w] * (xs + shift) / width + fy[w] * (ys + shift) / height)
                + phase[w]
            )
        frames.append(Frame(np.clip(value, 0.0, 1.0)[None]))
    meta = {
        "amplitudes": amps,
        "freq_x": fx,
        "freq_y": fy,
        "phases": phase,
        "motion": motion,
        "seed": seed,
    }
    seq = VideoSequence(
        frames=tuple(frames),
        manifest=tuple((i, f"synthetic:{seed}:{i}") for i in range(n_frames)),
    )
    return seq, meta


def degrade_sequence(seq, sigma, rain, seed):
    """Apply streaks then noise frame by frame; frame t uses stream seed + 1000003*t."""
    out = []
    for t, frame in enumerate(seq.frames):
        frame_seed = (seed + 1000003 * t) & MASK64
        g = frame
        if rain is not None and rain.density > 0 and rain.intensity > 0:
            g = add_rain_streaks(g, RainParams(
                density=rain.density, length=rain.length, angle_deg=rain.angle_deg,
                intensity=rain.intensity, jitter=rain.jitter, seed=frame_seed,
            ))
        if sigma > 0:
            g = add_gaussian_noise(g, sigma, (frame_seed + 500009) & MASK64)
        out.append(g)
    return VideoSequence(frames=tuple(out), manifest=seq.manifest)

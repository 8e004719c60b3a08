"""Deterministic training-data preprocessing for segmentation pairs.

Chain: bilinear resize (nearest for labels), random crop, random horizontal
flip, color jitter, and channel normalization on the 0-255 scale. Every
random choice comes from a per-sample SplitMix64 stream with a normative
draw order (crop top, crop left, flip, brightness, contrast), so the chain
is reproducible bit-for-bit from (inputs, config, seed).

Label maps only ever pass through crop / flip / nearest resize; no operation
here accepts a LabelMap for jitter or normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .io_pnm import Frame, LabelMap
from .rng import MASK64, SplitMix64


class PrepError(ValueError):
    pass


@dataclass(frozen=True)
class PreprocessConfig:
    resize_w: int = 1024
    resize_h: int = 256
    crop: int = 256
    flip_prob: float = 0.5
    brightness: float = 0.125
    contrast_lo: float = 0.5
    contrast_hi: float = 1.5
    mean: tuple = (103.336, 104.443, 100.035)
    std: tuple = (39.329, 38.147, 42.803)
    seed: int = 0

    def validate(self):
        if self.resize_w < 1 or self.resize_h < 1:
            raise PrepError("resize targets must be positive")
        if self.crop < 1 or self.crop > min(self.resize_w, self.resize_h):
            raise PrepError(
                f"crop {self.crop} must fit inside the resize target "
                f"{self.resize_w}x{self.resize_h}"
            )
        if not 0.0 <= self.flip_prob <= 1.0:
            raise PrepError("flip_prob must lie in [0, 1]")
        if self.brightness < 0:
            raise PrepError("brightness delta must be >= 0")
        if self.contrast_lo > self.contrast_hi:
            raise PrepError("contrast range is inverted")
        if any(s <= 0 for s in self.std):
            raise PrepError("std components must be > 0")
        if len(self.mean) != len(self.std):
            raise PrepError("mean and std must have the same length")
        return self


def _source_coords(dst_len, src_len):
    """Half-pixel-center source coordinates, edge-clamped."""
    scale = src_len / dst_len
    coords = (np.arange(dst_len) + 0.5) * scale - 0.5
    return np.clip(coords, 0.0, src_len - 1)


def resize_bilinear(frame, width, height):
    """Bilinear resize with half-pixel centers; constant inputs stay constant."""
    if width < 1 or height < 1:
        raise PrepError("resize targets must be positive")
    if width == frame.width and height == frame.height:
        return frame
    sx = _source_coords(width, frame.width)
    sy = _source_coords(height, frame.height)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, frame.width - 1)
    y1 = np.minimum(y0 + 1, frame.height - 1)
    fx = sx - x0
    fy = sy - y0
    wx0, wx1 = (1.0 - fx)[None, :], fx[None, :]
    wy0, wy1 = (1.0 - fy)[:, None], fy[:, None]
    out = np.empty((frame.channels, height, width))
    for c in range(frame.channels):
        p = frame.planes[c]
        out[c] = (
            p[np.ix_(y0, x0)] * (wy0 * wx0)
            + p[np.ix_(y0, x1)] * (wy0 * wx1)
            + p[np.ix_(y1, x0)] * (wy1 * wx0)
            + p[np.ix_(y1, x1)] * (wy1 * wx1)
        )
    return Frame(np.clip(out, 0.0, 1.0))


def resize_nearest(labels, width, height):
    """Nearest-neighbor resize under the same half-pixel mapping (ids never mix)."""
    if width < 1 or height < 1:
        raise PrepError("resize targets must be positive")
    if width == labels.width and height == labels.height:
        return labels
    sx = _source_coords(width, labels.width)
    sy = _source_coords(height, labels.height)
    ix = np.minimum(np.floor(sx + 0.5).astype(np.int64), labels.width - 1)
    iy = np.minimum(np.floor(sy + 0.5).astype(np.int64), labels.height - 1)
    return LabelMap(labels.data[np.ix_(iy, ix)].copy())


def random_crop(frame, labels, size, rng):
    """Identical random window from frame and labels: top drawn first, then left."""
    if frame.height < size or frame.width < size:
        raise PrepError(
            f"frame {frame.width}x{frame.height} smaller than crop size {size}"
        )
    if (labels.height, labels.width) != (frame.height, frame.width):
        raise PrepError("frame and label dimensions differ")
    top = rng.next_below(frame.height - size + 1)
    left = rng.next_below(frame.width - size + 1)
    cropped = Frame(frame.planes[:, top : top + size, left : left + size].copy())
    clabels = LabelMap(labels.data[top : top + size, left : left + size].copy())
    return cropped, clabels


def random_hflip(frame, labels, prob, rng):
    """One draw u in [0,1); mirror both horizontally iff u < prob."""
    u = rng.next_unit()
    if u < prob:
        frame = Frame(frame.planes[:, :, ::-1].copy())
        labels = LabelMap(labels.data[:, ::-1].copy())
    return frame, labels


def color_jitter(frame, cfg, rng):
    """Brightness shift then contrast about the per-channel mean; labels untouched."""
    b = (rng.next_unit() * 2.0 - 1.0) * cfg.brightness
    c = cfg.contrast_lo + rng.next_unit() * (cfg.contrast_hi - cfg.contrast_lo)
    planes = frame.planes + b
    means = planes.mean(axis=(1, 2), keepdims=True)
    planes = (planes - means) * c + means
    return Frame(np.clip(planes, 0.0, 1.0))


def normalize(frame, mean=None, std=None):
    """(255*v - mean) / std per channel; output is unbounded (not a Frame)."""
    defaults = PreprocessConfig()
    mean = defaults.mean if mean is None else mean
    std = defaults.std if std is None else std
    if frame.channels != len(mean) or len(mean) != len(std):
        raise PrepError(
            f"channel count {frame.channels} does not match mean/std of length "
            f"{len(mean)}/{len(std)}"
        )
    m = np.asarray(mean, dtype=np.float64)[:, None, None]
    s = np.asarray(std, dtype=np.float64)[:, None, None]
    return (255.0 * frame.planes - m) / s


def denormalize(planes, mean=None, std=None):
    """Inverse of :func:`normalize`, back to the [0,1] value scale."""
    defaults = PreprocessConfig()
    mean = defaults.mean if mean is None else mean
    std = defaults.std if std is None else std
    m = np.asarray(mean, dtype=np.float64)[:, None, None]
    s = np.asarray(std, dtype=np.float64)[:, None, None]
    return (np.asarray(planes) * s + m) / 255.0


def sample_seed(seed, sample_index):
    """Per-sample stream seed: seed XOR sample index (documented, recorded)."""
    return (int(seed) ^ int(sample_index)) & MASK64


def preprocess_sample(frame, labels, cfg, sample_index):
    """Run the full chain on one (image, labels) pair.

    Returns (frame, labels, derived_seed). Normalization is not applied here;
    it is a separate training-time step because its output leaves [0, 1].
    """
    cfg.validate()
    derived = sample_seed(cfg.seed, sample_index)
    rng = SplitMix64(derived)
    frame = resize_bilinear(frame, cfg.resize_w, cfg.resize_h)
    labels = resize_nearest(labels, cfg.resize_w, cfg.resize_h)
    frame, labels = random_crop(frame, labels, cfg.crop, rng)
    frame, labels = random_hflip(frame, labels, cfg.flip_prob, rng)
    frame = color_jitter(frame, cfg, rng)
    return frame, labels, derived

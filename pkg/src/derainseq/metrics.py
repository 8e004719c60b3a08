"""Restoration metrics (PSNR, SSIM) and segmentation scoring (confusion, mIoU)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


class MetricsError(ValueError):
    pass


def psnr(a, b):
    """10*log10(1/MSE) on the [0,1] scale over all samples; equal inputs -> inf."""
    if a.planes.shape != b.planes.shape:
        raise MetricsError(f"shape mismatch: {a.planes.shape} vs {b.planes.shape}")
    mse = np.mean((a.planes - b.planes) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_kernel():
    half = (SSIM_WINDOW - 1) / 2.0
    x = np.arange(SSIM_WINDOW) - half
    k = np.exp(-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
    return k / k.sum()


def _windowed_mean(img, kernel):
    # separable Gaussian, valid positions only
    tmp = sliding_window_view(img, SSIM_WINDOW, axis=0) @ kernel
    return sliding_window_view(tmp, SSIM_WINDOW, axis=1) @ kernel


def _ssim_plane(x, y):
    k = _gaussian_kernel()
    mu_x = _windowed_mean(x, k)
    mu_y = _windowed_mean(y, k)
    var_x = _windowed_mean(x * x, k) - mu_x * mu_x
    var_y = _windowed_mean(y * y, k) - mu_y * mu_y
    cov = _windowed_mean(x * y, k) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float(np.mean(num / den))


def ssim(a, b):
    """Mean SSIM over valid 11x11 Gaussian windows; channels averaged."""
    if a.planes.shape != b.planes.shape:
        raise MetricsError(f"shape mismatch: {a.planes.shape} vs {b.planes.shape}")
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        raise MetricsError(
            f"image {a.width}x{a.height} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    scores = [_ssim_plane(a.planes[c], b.planes[c]) for c in range(a.channels)]
    return float(np.mean(scores))


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[g][p] = pixels with ground truth g predicted p; `ignored` excluded."""

    counts: np.ndarray
    ignored: int = 0

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise MetricsError(f"counts must be square, got shape {c.shape}")
        if (c < 0).any() or self.ignored < 0:
            raise MetricsError("counts must be nonnegative")
        c = np.ascontiguousarray(c)
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @property
    def num_classes(self):
        return self.counts.shape[0]

    def __add__(self, other):
        if self.num_classes != other.num_classes:
            raise MetricsError("class count mismatch")
        return ConfusionMatrix(self.counts + other.counts, self.ignored + other.ignored)


@dataclass(frozen=True)
class IouReport:
    """per_class holds (class id, IoU or None); miou averages the defined ones."""

    per_class: tuple
    miou: float


def confusion(pred, gt, num_classes, ignore_id=255):
    """Count (gt, pred) pixel pairs, skipping pixels whose gt is the ignore id.

    Prediction ids must be < num_classes everywhere; ground-truth ids must be
    < num_classes or equal to the ignore id. The first offending pixel is
    named in the error.
    """
    if pred.data.shape != gt.data.shape:
        raise MetricsError(f"shape mismatch: {pred.data.shape} vs {gt.data.shape}")
    if num_classes < 1 or num_classes > 255:
        raise MetricsError(f"num_classes must be in [1, 255], got {num_classes}")
    p = pred.data.astype(np.int64)
    g = gt.data.astype(np.int64)
    bad = p >= num_classes
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise MetricsError(
            f"prediction id {int(p[r, c])} out of range [0, {num_classes}) at pixel ({r}, {c})"
        )
    bad = (g >= num_classes) & (g != ignore_id)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise MetricsError(
            f"ground-truth id {int(g[r, c])} out of range [0, {num_classes}) at pixel ({r}, {c})"
        )
    keep = g != ignore_id
    ignored = int(g.size - keep.sum())
    joint = g[keep] * num_classes + p[keep]
    counts = np.bincount(joint, minlength=num_classes * num_classes)
    return ConfusionMatrix(counts.reshape(num_classes, num_classes), ignored)


def miou(cm):
    """Per-class IoU and its mean; zero-union classes are excluded, not scored 0.

    The mean is accumulated in exact rational arithmetic and rounded once,
    so results like 7/12 come out as the correctly rounded float.
    """
    counts = cm.counts
    diag = np.diag(counts)
    union = counts.sum(axis=1) + counts.sum(axis=0) - diag
    per_class = []
    defined = []
    for c in range(cm.num_classes):
        if union[c] == 0:
            per_class.append((c, None))
        else:
            per_class.append((c, float(diag[c] / union[c])))
            defined.append(Fraction(int(diag[c]), int(union[c])))
    if not defined:
        raise MetricsError("mIoU undefined: every class has zero union")
    mean = sum(defined, Fraction(0)) / len(defined)
    return IouReport(per_class=tuple(per_class), miou=float(mean))

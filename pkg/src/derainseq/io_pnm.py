"""Bit-exact sequence I/O: binary PNM (P5/P6, maxval 255) and manifests.

Frames hold per-channel float64 planes in [0, 1]; label maps hold raw uint8
class ids (255 reserved as the ignore id). Quantization on write rounds
half away from zero, so decode/encode roundtrips are byte-stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class PnmError(ValueError):
    """Malformed PNM data; `offset` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class SequenceError(ValueError):
    """Manifest or sequence-level contract violation."""


@dataclass(frozen=True)
class Frame:
    """One image: planes shaped (channels, height, width), float64 in [0, 1]."""

    planes: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.planes, dtype=np.float64)
        if p.ndim != 3 or p.shape[0] not in (1, 3):
            raise ValueError(f"planes must be (1|3, H, W), got shape {p.shape}")
        if p.shape[1] < 1 or p.shape[2] < 1:
            raise ValueError("frame dimensions must be positive")
        if not np.isfinite(p).all():
            raise ValueError("frame values must be finite")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("frame values must lie in [0, 1]")
        p = np.ascontiguousarray(p)
        p.flags.writeable = False
        object.__setattr__(self, "planes", p)

    @property
    def channels(self):
        return self.planes.shape[0]

    @property
    def height(self):
        return self.planes.shape[1]

    @property
    def width(self):
        return self.planes.shape[2]

    def luma(self):
        """Matching plane: Rec.601 luma for color frames, the plane itself for gray."""
        if self.channels == 1:
            return self.planes[0]
        r, g, b = self.planes
        return 0.299 * r + 0.587 * g + 0.114 * b


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class ids, uint8; 255 is the conventional ignore id."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise ValueError(f"label data must be 2-D, got shape {d.shape}")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("label dimensions must be positive")
        if d.dtype != np.uint8:
            if d.min() < 0 or d.max() > 255:
                raise ValueError("label ids must lie in [0, 255]")
            d = d.astype(np.uint8)
        d = np.ascontiguousarray(d)
        d.flags.writeable = False
        object.__setattr__(self, "data", d)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class VideoSequence:
    """Ordered frames of uniform size plus (index, source path) provenance."""

    frames: tuple
    manifest: tuple = field(default_factory=tuple)

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise SequenceError("a sequence needs at least one frame")
        f0 = frames[0]
        for i, f in enumerate(frames):
            if (f.channels, f.height, f.width) != (f0.channels, f0.height, f0.width):
                raise SequenceError(
                    f"frame {i} has shape {(f.channels, f.height, f.width)}, "
                    f"expected {(f0.channels, f0.height, f0.width)}"
                )
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "manifest", tuple(self.manifest))

    def __len__(self):
        return len(self.frames)

    @property
    def channels(self):
        return self.frames[0].channels

    @property
    def height(self):
        return self.frames[0].height

    @property
    def width(self):
        return self.frames[0].width

    def as_array(self):
        """Stack into a writable (frames, channels, height, width) float64 array."""
        return np.stack([f.planes for f in self.frames]).copy()


def quantize_u8(values):
    """Float [0,1] -> uint8 by round-half-away-from-zero of v*255, clamped."""
    v = np.asarray(values, dtype=np.float64)
    q = np.sign(v) * np.floor(np.abs(v) * 255.0 + 0.5)
    return np.clip(q, 0.0, 255.0).astype(np.uint8)


_WHITESPACE = b" \t\r\n\f\v"


def _next_token(data, pos):
    """Scan the next header token, skipping whitespace and # comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in (b"#",):
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    if pos >= n:
        raise PnmError("unexpected end of header", pos)
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    return data[start:pos], start, pos


def _header_int(data, pos, what):
    tok, start, pos = _next_token(data, pos)
    try:
        value = int(tok)
    except ValueError:
        raise PnmError(f"bad {what} token {tok!r}", start) from None
    if value <= 0 and what != "maxval":
        raise PnmError(f"{what} must be positive, got {value}", start)
    return value, pos


def read_pnm(data, as_labels=False):
    """Decode binary P5/P6 bytes into a Frame, or a LabelMap when requested.

    P6 gives a 3-channel Frame with v/255 scaling; P5 gives a gray Frame, or
    raw unscaled ids as a LabelMap with as_labels=True. Only maxval 255 is
    accepted. Header comments (#) and arbitrary whitespace are allowed.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise TypeError("read_pnm expects bytes")
    data = bytes(data)
    magic, magic_at, pos = _next_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise PnmError(f"unsupported magic {magic!r}, need binary P5 or P6", magic_at)
    width, pos = _header_int(data, pos, "width")
    height, pos = _header_int(data, pos, "height")
    maxval, pos = _header_int(data, pos, "maxval")
    if maxval != 255:
        raise PnmError(f"unsupported maxval {maxval}, only 255", pos)
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise PnmError("expected single whitespace before pixel payload", pos)
    pos += 1
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise PnmError(
            f"truncated pixel payload: need {need} bytes, have {len(payload)}",
            pos + len(payload),
        )
    raw = np.frombuffer(payload, dtype=np.uint8)
    if as_labels:
        if magic != b"P5":
            raise PnmError("label maps must be P5 graymaps", magic_at)
        return LabelMap(raw.reshape(height, width).copy())
    if channels == 1:
        planes = raw.reshape(1, height, width).astype(np.float64) / 255.0
    else:
        planes = raw.reshape(height, width, 3).transpose(2, 0, 1).astype(np.float64) / 255.0
    return Frame(planes)


def write_pnm(image):
    """Encode a Frame or LabelMap as canonical binary PNM bytes."""
    if isinstance(image, LabelMap):
        header = b"P5\n%d %d\n255\n" % (image.width, image.height)
        return header + image.data.tobytes()
    if isinstance(image, Frame):
        q = quantize_u8(image.planes)
        if image.channels == 1:
            header = b"P5\n%d %d\n255\n" % (image.width, image.height)
            return header + q[0].tobytes()
        header = b"P6\n%d %d\n255\n" % (image.width, image.height)
        return header + q.transpose(1, 2, 0).tobytes()
    raise TypeError(f"cannot encode {type(image).__name__} as PNM")


def read_pnm_file(path, as_labels=False):
    return read_pnm(Path(path).read_bytes(), as_labels=as_labels)


def parse_manifest(text):
    """Manifest lines -> list of path strings; blank lines and # comments skipped."""
    paths = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        paths.append(line)
    return paths


def load_sequence(manifest_path):
    """Load the sequence listed in a manifest file, in listed (temporal) order.

    Relative entries resolve against the manifest's directory. All frames
    must share dimensions and channel count; the offending manifest index is
    reported otherwise.
    """
    manifest_path = Path(manifest_path)
    entries = parse_manifest(manifest_path.read_text(encoding="utf-8"))
    if not entries:
        raise SequenceError(f"manifest {manifest_path} lists no images")
    base = manifest_path.parent
    frames = []
    manifest = []
    for i, entry in enumerate(entries):
        path = Path(entry)
        if not path.is_absolute():
            path = base / path
        frame = read_pnm_file(path)
        if frames and (
            frame.channels,
            frame.height,
            frame.width,
        ) != (frames[0].channels, frames[0].height, frames[0].width):
            raise SequenceError(
                f"manifest line {i + 1} ({entry}): size "
                f"{frame.width}x{frame.height}x{frame.channels} does not match "
                f"frame 0 ({frames[0].width}x{frames[0].height}x{frames[0].channels})"
            )
        frames.append(frame)
        manifest.append((i, str(path)))
    return VideoSequence(frames=tuple(frames), manifest=tuple(manifest))


def sequence_from_array(stack, manifest=()):
    """Wrap a (frames, channels, H, W) array (clamped to [0,1]) as a VideoSequence."""
    stack = np.clip(np.asarray(stack, dtype=np.float64), 0.0, 1.0)
    frames = tuple(Frame(stack[i]) for i in range(stack.shape[0]))
    return VideoSequence(frames=frames, manifest=tuple(manifest))

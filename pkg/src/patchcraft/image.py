"""Planar float images, bursts, bit-exact file I/O, mirror padding and PSNR.

Images are float64 throughout; 8-bit only exists at the PGM/PPM boundary.
Noisy data (out of 8-bit range) travels in the PCRF container: the magic
bytes "PCRF", a 32-bit little-endian version, rank, the shape entries and a
row-major float32 payload.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Burst",
    "FormatError",
    "Image",
    "PCRF_MAGIC",
    "PCRF_VERSION",
    "load_image",
    "load_tensor",
    "mirror_pad",
    "psnr",
    "save_image",
    "save_tensor",
]

PCRF_MAGIC = b"PCRF"
PCRF_VERSION = 1


class FormatError(ValueError):
    """Malformed image or tensor file; `offset` is the failing byte position."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class Image:
    """Planar (channels, height, width) float64 image, all samples finite."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"image data must be 3D (C, H, W), got shape {data.shape}")
        if data.shape[0] not in (1, 3):
            raise ValueError(f"image must have 1 or 3 channels, got {data.shape[0]}")
        if not np.all(np.isfinite(data)):
            raise ValueError("image samples must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def __eq__(self, other) -> bool:
        return isinstance(other, Image) and np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class Burst:
    """Ordered co-registered frames; frames[input_index] is the denoiser input."""

    frames: tuple
    input_index: int

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) < 2:
            raise ValueError("burst needs at least 2 frames")
        if not 0 <= self.input_index < len(frames):
            raise ValueError(f"input_index {self.input_index} out of range for {len(frames)} frames")
        shape = frames[0].data.shape
        for i, frame in enumerate(frames):
            if frame.data.shape != shape:
                raise ValueError(f"frame {i} shape {frame.data.shape} differs from {shape}")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def input_frame(self) -> Image:
        return self.frames[self.input_index]

    def reference_frames(self):
        """Frames of the search set (the burst minus the input shot), with original indices."""
        return [(i, f) for i, f in enumerate(self.frames) if i != self.input_index]


# ---------------------------------------------------------------------------
# PGM / PPM
# ---------------------------------------------------------------------------


def _read_header_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-delimited header token, skipping '#' comments."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise FormatError("unexpected end of file in header", pos)
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
        pos += 1
    return buf[start:pos], pos


def _read_header_int(buf: bytes, pos: int, what: str) -> tuple[int, int]:
    token, end = _read_header_token(buf, pos)
    if not token.isdigit():
        raise FormatError(f"invalid {what} {token!r}", pos)
    return int(token), end


def load_image(path) -> Image:
    """Load a binary PGM (P5) or PPM (P6) file with maxval 255.

    Byte values map to floats exactly; no rescaling. Color payloads are
    interleaved on disk and stored planar in memory.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, pos = _read_header_token(buf, 0)
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise FormatError(f"unsupported magic {magic!r}", 0)
    width, pos = _read_header_int(buf, pos, "width")
    height, pos = _read_header_int(buf, pos, "height")
    maxval, pos = _read_header_int(buf, pos, "maxval")
    if width < 1 or height < 1:
        raise FormatError(f"invalid dimensions {width}x{height}", pos)
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}", pos)
    if pos >= len(buf) or not buf[pos : pos + 1].isspace():
        raise FormatError("missing whitespace after maxval", pos)
    pos += 1
    expected = channels * height * width
    payload = buf[pos : pos + expected]
    if len(payload) < expected:
        raise FormatError(f"truncated payload: expected {expected} bytes, got {len(payload)}", pos + len(payload))
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    if channels == 1:
        data = pixels.reshape(1, height, width)
    else:
        data = np.moveaxis(pixels.reshape(height, width, 3), 2, 0)
    return Image(data)


def save_image(img: Image, path) -> None:
    """Write P5 (1 channel) or P6 (3 channels), maxval 255.

    Samples are clamped to [0, 255] and rounded half-away-from-zero.
    """
    clamped = np.clip(img.data, 0.0, 255.0)
    rounded = np.floor(clamped + 0.5).astype(np.uint8)  # half-away == half-up after clamping to >= 0
    magic = b"P5" if img.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, img.width, img.height)
    if img.channels == 1:
        payload = rounded[0].tobytes()
    else:
        payload = np.moveaxis(rounded, 0, 2).tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


# ---------------------------------------------------------------------------
# PCRF tensors
# ---------------------------------------------------------------------------


def save_tensor(tensor: np.ndarray, path) -> None:
    """Write a float tensor in the PCRF container (float32 payload)."""
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim == 0:
        raise FormatError("rank-0 tensors are not supported")
    header = PCRF_MAGIC + struct.pack("<II", PCRF_VERSION, tensor.ndim)
    header += struct.pack(f"<{tensor.ndim}I", *tensor.shape)
    payload = np.ascontiguousarray(tensor, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


def load_tensor(path) -> np.ndarray:
    """Read a PCRF tensor; returns float64 (float32 values are exact in it)."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != PCRF_MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}", 0)
    if len(buf) < 12:
        raise FormatError("truncated header", len(buf))
    version, rank = struct.unpack_from("<II", buf, 4)
    if version != PCRF_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if rank == 0:
        raise FormatError("rank-0 tensors are not supported", 8)
    if len(buf) < 12 + 4 * rank:
        raise FormatError("truncated shape", len(buf))
    shape = struct.unpack_from(f"<{rank}I", buf, 12)
    offset = 12 + 4 * rank
    count = int(np.prod(shape))
    expected = offset + 4 * count
    if len(buf) != expected:
        raise FormatError(f"payload length mismatch: expected {expected} bytes, got {len(buf)}", len(buf))
    data = np.frombuffer(buf, dtype="<f4", count=count, offset=offset)
    return data.astype(np.float64).reshape(shape)


# ---------------------------------------------------------------------------
# Padding and metrics
# ---------------------------------------------------------------------------


def mirror_pad_array(data: np.ndarray, pad_top: int, pad_bottom: int, pad_left: int, pad_right: int) -> np.ndarray:
    """Reflect-without-edge-repeat padding of the trailing two axes."""
    h, w = data.shape[-2:]
    for pad, dim, name in ((pad_top, h, "top"), (pad_bottom, h, "bottom"), (pad_left, w, "left"), (pad_right, w, "right")):
        if pad < 0:
            raise ValueError(f"negative {name} pad")
        if pad >= dim:
            raise ValueError(f"{name} pad {pad} must be smaller than dimension {dim}")
    width = [(0, 0)] * (data.ndim - 2) + [(pad_top, pad_bottom), (pad_left, pad_right)]
    return np.pad(data, width, mode="reflect")


def mirror_pad(img: Image, pad_top: int, pad_bottom: int, pad_left: int, pad_right: int) -> Image:
    """Mirror-pad an image; the edge pixel is not duplicated."""
    return Image(mirror_pad_array(img.data, pad_top, pad_bottom, pad_left, pad_right))


def psnr(a: Image, b: Image, peak: float = 255.0) -> float:
    """10*log10(peak^2 / MSE) over all samples; math.inf when identical."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)

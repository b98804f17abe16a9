"""Dense image types, grayscale reduction and bit-exact netpbm I/O.

Images are stored as C-contiguous ``(height, width, channels)`` float64
arrays with every intensity in [0, 1], which is exactly "row-major,
channel-interleaved". Files are 8-bit (PGM P5 / PPM P6, maxval 255);
quantization happens only when saving, so all in-memory processing runs
in continuous [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PNMFormatError

__all__ = [
    "Image",
    "GrayMap",
    "to_grayscale",
    "load_image",
    "save_image",
    "linf_distance",
    "l2_distance",
    "l0_count",
]


def _validate_raster(data, channels_allowed):
    if not isinstance(data, np.ndarray):
        raise TypeError("data must be a numpy array")
    if data.dtype != np.float64:
        raise TypeError(f"data must be float64, got {data.dtype}")
    if data.ndim != 3 or data.shape[2] not in channels_allowed:
        raise ValueError(f"bad raster shape {data.shape}")
    if data.size == 0:
        raise ValueError("empty raster")
    lo, hi = float(data.min()), float(data.max())
    if lo < 0.0 or hi > 1.0:
        raise ValueError(f"intensities outside [0, 1]: min={lo}, max={hi}")


@dataclass(frozen=True)
class Image:
    """Immutable w*h*c raster of intensities in [0, 1] (float64)."""

    data: np.ndarray  # (height, width, channels), channels in {1, 3}

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        _validate_raster(data, channels_allowed=(1, 3))
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_array(cls, arr) -> "Image":
        """Build an Image from an (h, w) or (h, w, c) array-like."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        return cls(arr)


@dataclass(frozen=True)
class GrayMap:
    """Single-channel intensity raster in [0, 1]."""

    data: np.ndarray  # (height, width)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise ValueError(f"bad gray raster shape {data.shape}")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("gray intensities outside [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def to_grayscale(img: Image, weights=None) -> GrayMap:
    """Reduce an image to one channel.

    The default reduction is the unweighted mean of the channels; pass
    ``weights`` (one per channel, summing to 1) for e.g. luminance
    weighting. Single-channel input is copied unchanged.
    """
    if img.channels == 1:
        return GrayMap(img.data[:, :, 0].copy())
    if weights is None:
        return GrayMap(img.data.mean(axis=2))
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (img.channels,):
        raise ValueError(f"need {img.channels} weights, got shape {w.shape}")
    if abs(float(w.sum()) - 1.0) > 1e-9 or (w < 0).any():
        raise ValueError("weights must be nonnegative and sum to 1")
    return GrayMap(np.clip(img.data @ w, 0.0, 1.0))


# --------------------------------------------------------------------------
# netpbm (PGM P5 / PPM P6) reader and writer
# --------------------------------------------------------------------------


class _TokenScanner:
    """Pulls whitespace-delimited header tokens, skipping '#' comments."""

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def skip_separators(self):
        buf, n = self.buf, len(self.buf)
        while self.pos < n:
            b = buf[self.pos]
            if b in b" \t\r\n\x0b\x0c":
                self.pos += 1
            elif b == ord("#"):
                while self.pos < n and buf[self.pos] not in b"\r\n":
                    self.pos += 1
            else:
                return

    def next_token(self, what: str) -> tuple[bytes, int]:
        self.skip_separators()
        if self.pos >= len(self.buf):
            raise PNMFormatError(f"truncated header: missing {what}", self.pos)
        start = self.pos
        buf, n = self.buf, len(self.buf)
        while self.pos < n and buf[self.pos] not in b" \t\r\n\x0b\x0c#":
            self.pos += 1
        return buf[start:self.pos], start

    def next_int(self, what: str) -> int:
        token, start = self.next_token(what)
        if not token.isdigit():
            raise PNMFormatError(f"non-numeric {what} {token!r}", start)
        return int(token)


def _read_pnm(buf: bytes) -> np.ndarray:
    scanner = _TokenScanner(buf)
    magic, off = scanner.next_token("magic")
    if magic not in (b"P5", b"P6"):
        raise PNMFormatError(f"unsupported magic {magic!r}", off)
    channels = 1 if magic == b"P5" else 3
    width = scanner.next_int("width")
    height = scanner.next_int("height")
    maxval_off = scanner.pos
    maxval = scanner.next_int("maxval")
    if width <= 0 or height <= 0:
        raise PNMFormatError(f"degenerate dimensions {width}x{height}", maxval_off)
    if maxval != 255:
        raise PNMFormatError(f"unsupported maxval {maxval}; only 255", maxval_off)
    # exactly one whitespace byte separates the header from the raster
    if scanner.pos >= len(buf) or buf[scanner.pos] not in b" \t\r\n\x0b\x0c":
        raise PNMFormatError("missing raster separator", scanner.pos)
    raster_start = scanner.pos + 1
    expected = width * height * channels
    raster = buf[raster_start:raster_start + expected]
    if len(raster) < expected:
        raise PNMFormatError(
            f"truncated raster: expected {expected} bytes, got {len(raster)}",
            raster_start + len(raster),
        )
    pixels = np.frombuffer(raster, dtype=np.uint8).astype(np.float64) / 255.0
    return pixels.reshape(height, width, channels)


def load_image(path) -> Image:
    """Load a binary PGM/PPM (or, optionally, PNG) file.

    Byte value b maps to intensity b/255 exactly.
    """
    path = Path(path)
    if path.suffix.lower() == ".png":
        return _load_png(path)
    return Image(_read_pnm(path.read_bytes()))


def save_image(img: Image, path) -> None:
    """Write a binary PGM (1 channel) or PPM (3 channels), maxval 255.

    Intensities are rounded to the nearest of 256 levels, ties upward,
    so save/load round-trips already-quantized images bit-exactly.
    """
    path = Path(path)
    if path.suffix.lower() == ".png":
        _save_png(img, path)
        return
    magic = b"P5" if img.channels == 1 else b"P6"
    header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    raster = quantize_bytes(img.data)
    path.write_bytes(header + raster.tobytes())


def quantize_bytes(data: np.ndarray) -> np.ndarray:
    """[0,1] float -> uint8 via round-half-up onto the 256-level grid."""
    return np.floor(np.asarray(data) * 255.0 + 0.5).astype(np.uint8)


def _load_png(path) -> Image:
    from PIL import Image as PILImage

    with PILImage.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if im.mode in ("RGBA", "P") else "L")
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return Image(arr.astype(np.float64) / 255.0)


def _save_png(img: Image, path) -> None:
    from PIL import Image as PILImage

    arr = quantize_bytes(img.data)
    if img.channels == 1:
        PILImage.fromarray(arr[:, :, 0], mode="L").save(path)
    else:
        PILImage.fromarray(arr, mode="RGB").save(path)


# --------------------------------------------------------------------------
# perturbation norms
# --------------------------------------------------------------------------

L0_TOLERANCE = 1e-12


def _diff(a: Image, b: Image) -> np.ndarray:
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    return a.data - b.data


def linf_distance(a: Image, b: Image) -> float:
    return float(np.abs(_diff(a, b)).max())


def l2_distance(a: Image, b: Image) -> float:
    return float(np.linalg.norm(_diff(a, b).ravel()))


def l0_count(a: Image, b: Image) -> int:
    """Number of positions differing by more than 1e-12."""
    return int((np.abs(_diff(a, b)) > L0_TOLERANCE).sum())

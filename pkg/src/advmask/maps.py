"""Per-pixel attack-magnitude maps and everything that produces them.

A strength map holds an update magnitude in [0, 1] for every pixel of the
image it will be applied to. The central producer here is the local
Shannon entropy of the grayscale image, mapped through a nonlinearity so
that perturbations land in visually busy regions; pseudo-random noise maps
and plain morphology are provided for controlled experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import KappaUnreachableError, MapFormatError
from .image import GrayMap, quantize_bytes

__all__ = [
    "StrengthMap",
    "EntropyMap",
    "local_histogram",
    "local_entropy",
    "phi",
    "kappa",
    "scale_brightness",
    "dilate",
    "erode",
    "perlin_map",
    "adjust_to_kappa",
    "binarize_to_kappa",
    "save_map",
    "load_strength_map",
    "load_entropy_map",
    "map_to_pgm",
]


@dataclass(frozen=True)
class StrengthMap:
    """w*h map of per-pixel update magnitudes in [0, 1]."""

    data: np.ndarray  # (height, width) float64

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise ValueError(f"bad map shape {data.shape}")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("strength values outside [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def is_binary(self) -> bool:
        return bool(((self.data == 0.0) | (self.data == 1.0)).all())


@dataclass(frozen=True)
class EntropyMap:
    """w*h map of local Shannon entropies in bits.

    ``radius`` and ``bins`` record how the map was computed; they bound the
    attainable maximum entropy log2(min(bins, window pixel count)).
    """

    data: np.ndarray  # (height, width) float64, nonnegative
    radius: int
    bins: int

    def __post_init__(self):
        _check_entropy_params(self.radius, self.bins)
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise ValueError(f"bad map shape {data.shape}")
        if data.min() < 0.0:
            raise ValueError("entropies must be nonnegative")
        if data.max() > self.max_entropy + 1e-9:
            raise ValueError("entropy above the attainable maximum")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def max_entropy(self) -> float:
        """log2(min(bins, full window pixel count))."""
        window = (2 * self.radius + 1) ** 2
        return float(np.log2(min(self.bins, window)))


# --------------------------------------------------------------------------
# local entropy
# --------------------------------------------------------------------------


def quantize_levels(values: np.ndarray, bins: int) -> np.ndarray:
    """Quantize [0,1] intensities into equal-width bins; 1.0 lands in the top bin."""
    q = np.floor(np.asarray(values) * bins).astype(np.int64)
    return np.minimum(q, bins - 1)


def local_histogram(g: GrayMap, row: int, col: int, radius: int, bins: int) -> np.ndarray:
    """Occurrence ratios of quantized intensities in one pixel's window.

    The window is the square of side 2*radius+1 centered on (row, col),
    truncated at the image borders. Ratios are nonnegative and sum to 1.
    """
    if not (0 <= row < g.height and 0 <= col < g.width):
        raise ValueError(f"pixel ({row}, {col}) outside {g.height}x{g.width} map")
    _check_entropy_params(radius, bins)
    r0, r1 = max(row - radius, 0), min(row + radius, g.height - 1)
    c0, c1 = max(col - radius, 0), min(col + radius, g.width - 1)
    window = g.data[r0:r1 + 1, c0:c1 + 1]
    counts = np.bincount(quantize_levels(window.ravel(), bins), minlength=bins)
    return counts / counts.sum()


def _check_entropy_params(radius, bins):
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")


def local_entropy(g: GrayMap, radius: int = 5, bins: int = 256) -> EntropyMap:
    """Shannon entropy (bits) of the quantized window histogram at every pixel.

    Windows are squares of side 2*radius+1 truncated at the borders, so
    border entropies use only real pixels. Computed with one clipped
    integral image per occupied bin; O(bins * w * h).
    """
    _check_entropy_params(radius, bins)
    h, w = g.data.shape
    q = quantize_levels(g.data, bins)

    rows = np.arange(h)
    cols = np.arange(w)
    r0 = np.maximum(rows - radius, 0)
    r1 = np.minimum(rows + radius, h - 1)
    c0 = np.maximum(cols - radius, 0)
    c1 = np.minimum(cols + radius, w - 1)
    heights = (r1 - r0 + 1)[:, None].astype(np.float64)
    widths = (c1 - c0 + 1)[None, :].astype(np.float64)
    totals = heights * widths

    entropy = np.zeros((h, w), dtype=np.float64)
    for level in np.unique(q):
        mask = (q == level).astype(np.float64)
        integral = np.zeros((h + 1, w + 1), dtype=np.float64)
        np.cumsum(np.cumsum(mask, axis=0), axis=1, out=integral[1:, 1:])
        counts = (
            integral[r1 + 1][:, c1 + 1]
            - integral[r0][:, c1 + 1]
            - integral[r1 + 1][:, c0]
            + integral[r0][:, c0]
        )
        ratio = counts / totals
        nz = ratio > 0.0
        entropy[nz] -= ratio[nz] * np.log2(ratio[nz])
    np.maximum(entropy, 0.0, out=entropy)
    return EntropyMap(entropy, radius=radius, bins=bins)


# --------------------------------------------------------------------------
# entropy -> strength nonlinearity, and map arithmetic
# --------------------------------------------------------------------------


def phi(S: EntropyMap, mode: str = "binarize", threshold: float = 4.2,
        gamma: float = 1.0) -> StrengthMap:
    """Map an entropy map to a strength map.

    ``binarize``: 1 where S > threshold, else 0.
    ``normalize-gamma``: (S / S_max) ** gamma, with S_max the attainable
    maximum for the map's window and bin count.
    """
    if mode == "binarize":
        return StrengthMap((S.data > threshold).astype(np.float64))
    if mode == "normalize-gamma":
        if gamma <= 0:
            raise ValueError(f"gamma must be positive, got {gamma}")
        return StrengthMap((S.data / S.max_entropy) ** gamma)
    raise ValueError(f"unknown phi mode {mode!r}")


def kappa(E: StrengthMap) -> float:
    """Relative total strength: the mean of the map.

    For binary maps this is the ratio of attacked (white) pixels.
    """
    return float(E.data.mean())


def scale_brightness(E: StrengthMap, c: float) -> StrengthMap:
    """Pointwise multiply by c in [0, 1]; scales kappa exactly linearly."""
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"brightness factor must be in [0, 1], got {c}")
    return StrengthMap(E.data * c)


def _require_binary(E: StrengthMap, op: str):
    if not E.is_binary():
        raise ValueError(f"{op} requires a binary map (values in {{0, 1}})")


def _window_extreme(data, se_radius, outside, reducer):
    side = 2 * se_radius + 1
    padded = np.pad(data, se_radius, mode="constant", constant_values=outside)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (side, side))
    return reducer(windows, axis=(2, 3))


def dilate(E: StrengthMap, se_radius: int = 1, outside: float = 0.0) -> StrengthMap:
    """Binary dilation with a square structuring element of side 2r+1.

    Pixels outside the image count as ``outside`` (0 by default), so
    dilation never decreases kappa.
    """
    _require_binary(E, "dilate")
    if se_radius < 1:
        raise ValueError("structuring element radius must be >= 1")
    return StrengthMap(_window_extreme(E.data, se_radius, outside, np.max))


def erode(E: StrengthMap, se_radius: int = 1, outside: float = 0.0) -> StrengthMap:
    """Binary erosion with a square structuring element of side 2r+1.

    With the outside-is-0 convention border pixels always erode away;
    erosion never increases kappa.
    """
    _require_binary(E, "erode")
    if se_radius < 1:
        raise ValueError("structuring element radius must be >= 1")
    return StrengthMap(_window_extreme(E.data, se_radius, outside, np.min))


# --------------------------------------------------------------------------
# Perlin noise maps
# --------------------------------------------------------------------------


def _smoothstep(t):
    return t * t * (3.0 - 2.0 * t)


def perlin_map(width: int, height: int, cell_size: float = 8.0,
               octaves: int = 1, seed: int = 0) -> StrengthMap:
    """Classic gradient-lattice noise, rescaled to [0, 1].

    Each octave doubles the lattice frequency and halves the amplitude;
    interpolation uses the smoothstep polynomial. Deterministic per seed.
    """
    if width < 2 or height < 2:
        raise ValueError(f"degenerate dimensions {width}x{height}")
    if cell_size < 2:
        raise ValueError(f"cell_size must be >= 2, got {cell_size}")
    if octaves < 1:
        raise ValueError(f"octaves must be >= 1, got {octaves}")

    rng = np.random.default_rng(seed)
    total = np.zeros((height, width), dtype=np.float64)
    amplitude = 1.0
    for octave in range(octaves):
        scale = (2.0 ** octave) / cell_size
        total += amplitude * _perlin_octave(width, height, scale, rng)
        amplitude *= 0.5

    lo, hi = float(total.min()), float(total.max())
    if hi - lo < 1e-15:
        return StrengthMap(np.zeros_like(total))
    return StrengthMap((total - lo) / (hi - lo))


def _perlin_octave(width, height, scale, rng):
    ys = np.arange(height, dtype=np.float64) * scale
    xs = np.arange(width, dtype=np.float64) * scale
    gy, gx = int(np.floor(ys[-1])) + 2, int(np.floor(xs[-1])) + 2
    angles = rng.uniform(0.0, 2.0 * np.pi, size=(gy, gx))
    grad_x, grad_y = np.cos(angles), np.sin(angles)

    j0 = np.floor(ys).astype(np.int64)[:, None]
    i0 = np.floor(xs).astype(np.int64)[None, :]
    fy = ys[:, None] - j0
    fx = xs[None, :] - i0
    j1, i1 = j0 + 1, i0 + 1

    def corner_dot(jj, ii, dy, dx):
        return grad_x[jj, ii] * dx + grad_y[jj, ii] * dy

    n00 = corner_dot(j0, i0, fy, fx)
    n01 = corner_dot(j0, i1, fy, fx - 1.0)
    n10 = corner_dot(j1, i0, fy - 1.0, fx)
    n11 = corner_dot(j1, i1, fy - 1.0, fx - 1.0)

    sx, sy = _smoothstep(fx), _smoothstep(fy)
    top = n00 + sx * (n01 - n00)
    bottom = n10 + sx * (n11 - n10)
    return top + sy * (bottom - top)


# --------------------------------------------------------------------------
# tuning a map to a target relative total strength
# --------------------------------------------------------------------------

_BISECTION_STEPS = 64


def adjust_to_kappa(E: StrengthMap, target: float, tol: float = 0.005) -> StrengthMap:
    """Rescale a map's brightness so that kappa hits ``target`` within tol.

    Bisects the brightness factor c of min(1, c*E); for targets at or below
    kappa(E) this reduces to exact linear scaling. Raises
    KappaUnreachableError (naming the achievable range) when the target
    exceeds what any brightness can reach, e.g. for a zero map.
    """
    if not 0.0 < target <= 1.0:
        raise ValueError(f"target kappa must be in (0, 1], got {target}")
    data = E.data
    kappa_max = float((data > 0.0).mean())
    if target > kappa_max + tol:
        raise KappaUnreachableError(target, (0.0, kappa_max))

    current = float(data.mean())
    if current > 0.0:
        c = target / current
        if c * float(data.max()) <= 1.0:
            # no clipping: kappa scales exactly linearly with brightness
            return StrengthMap(c * data)

    lo, hi = 0.0, 1.0
    while float(np.minimum(1.0, hi * data).mean()) < target and hi < 1e12:
        lo, hi = hi, hi * 2.0
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        k = float(np.minimum(1.0, mid * data).mean())
        if abs(k - target) <= tol * 0.5:
            lo = hi = mid
            break
        if k < target:
            lo = mid
        else:
            hi = mid
    c = 0.5 * (lo + hi)
    result = StrengthMap(np.minimum(1.0, c * data))
    if abs(kappa(result) - target) > tol:
        raise KappaUnreachableError(target, (0.0, kappa_max))
    return result


def binarize_to_kappa(source: EntropyMap | StrengthMap, target: float,
                      tol: float = 0.005) -> StrengthMap:
    """Binarize a continuous map at the threshold whose kappa hits ``target``.

    Bisects the binarization threshold of ``source``; use this to tune
    binary masks, whose kappa cannot be adjusted by brightness alone.
    """
    if not 0.0 < target <= 1.0:
        raise ValueError(f"target kappa must be in (0, 1], got {target}")
    data = np.asarray(source.data, dtype=np.float64)

    lo = float(data.min()) - 1.0  # threshold below min -> all ones
    hi = float(data.max())        # threshold at max -> all zeros (strict >)
    best_t, best_err = lo, abs(1.0 - target)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        k = float((data > mid).mean())
        err = abs(k - target)
        if err < best_err:
            best_t, best_err = mid, err
        if k > target:
            lo = mid
        else:
            hi = mid
    if best_err > tol:
        achievable = np.unique(np.concatenate([[0.0], _reachable_kappas(data)]))
        nearest = achievable[np.argmin(np.abs(achievable - target))]
        raise KappaUnreachableError(target, (float(nearest), float(nearest)))
    return StrengthMap((data > best_t).astype(np.float64))


def _reachable_kappas(data):
    # kappa of (data > t) jumps at each distinct value; enumerate the levels
    n = data.size
    counts = np.unique(data, return_counts=True)[1]
    return np.cumsum(counts[::-1]) / n


# --------------------------------------------------------------------------
# map file I/O
# --------------------------------------------------------------------------

_MAGIC = b"EMAP1\n"


def save_map(m: StrengthMap | EntropyMap, path) -> None:
    """Write magic "EMAP1\\n", ASCII "w h\\n", then w*h little-endian float64."""
    path = Path(path)
    header = _MAGIC + f"{m.width} {m.height}\n".encode("ascii")
    payload = m.data.astype("<f8").tobytes()
    path.write_bytes(header + payload)


def _read_map(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if not buf.startswith(_MAGIC):
        raise MapFormatError(f"bad magic in {path}")
    rest = buf[len(_MAGIC):]
    nl = rest.find(b"\n")
    if nl < 0:
        raise MapFormatError(f"missing dimension line in {path}")
    try:
        w, h = (int(t) for t in rest[:nl].split())
    except ValueError as exc:
        raise MapFormatError(f"bad dimension line in {path}") from exc
    payload = rest[nl + 1:]
    expected = w * h * 8
    if len(payload) != expected:
        raise MapFormatError(
            f"payload length mismatch in {path}: expected {expected} bytes,"
            f" got {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f8").reshape(h, w).astype(np.float64)


def load_strength_map(path) -> StrengthMap:
    return StrengthMap(_read_map(path))


def load_entropy_map(path, radius: int = 5, bins: int = 256) -> EntropyMap:
    """Load an entropy map; radius/bins must match how it was produced."""
    return EntropyMap(_read_map(path), radius=radius, bins=bins)


def map_to_pgm(m: StrengthMap | EntropyMap, path) -> None:
    """Export for visualization: strength scaled by 255, entropy by 255/S_max."""
    if isinstance(m, EntropyMap):
        scaled = m.data / m.max_entropy
    else:
        scaled = m.data
    header = b"P5\n%d %d\n255\n" % (m.width, m.height)
    Path(path).write_bytes(header + quantize_bytes(scaled).tobytes())

"""Signal toolbox: global-coordinate Fourier features, windowed-sinc FIR
low-pass design, anti-aliased resampling, positional encodings, and bilinear
feature sampling.

All grids here are (H, W, C) float64 arrays wrapped with a world->grid
transform; operations are pure. Half-pixel centers throughout: pixel
[i, j] sits at grid coordinate (j + 0.5, i + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .bevmap import WindowSpec, WorldToGrid
from .container import GRID_MAGIC, read_container, write_container


class SignalError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureGrid:
    data: np.ndarray  # (H, W, C) float64
    world_to_grid: WorldToGrid

    def __post_init__(self):
        if self.data.ndim != 3:
            raise SignalError(f"grid must be (H, W, C), got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise SignalError("grid contains non-finite values")


@dataclass(frozen=True)
class FourierConfig:
    amplitudes: tuple[float, ...]
    frequencies: tuple[tuple[float, float], ...]  # cycles per world unit

    def __post_init__(self):
        if len(self.amplitudes) != len(self.frequencies) or len(self.amplitudes) < 1:
            raise SignalError("need len(amplitudes) == len(frequencies) >= 1")

    @property
    def n_channels(self) -> int:
        return 2 * len(self.amplitudes)


def isotropic_fourier_config(m: int, f_min: float, f_max: float) -> FourierConfig:
    """m unit-amplitude frequencies, log-spaced magnitudes, directions spread
    by the golden angle. Deterministic given (m, f_min, f_max)."""
    mags = np.geomspace(f_min, f_max, m)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    angles = golden * np.arange(m)
    freqs = tuple((float(r * np.cos(t)), float(r * np.sin(t))) for r, t in zip(mags, angles))
    return FourierConfig(tuple(1.0 for _ in range(m)), freqs)


@dataclass(frozen=True)
class PeConfig:
    n_freqs: int = 4
    base: float = 1.0

    def __post_init__(self):
        if self.n_freqs < 1:
            raise SignalError("n_freqs must be >= 1")

    @property
    def out_dim(self) -> int:
        return 2 * self.n_freqs


@dataclass(frozen=True)
class FirFilter:
    taps: np.ndarray  # odd length, symmetric, sums to 1
    cutoff_frac: float
    design: dict

    def __post_init__(self):
        n = len(self.taps)
        if n % 2 != 1:
            raise SignalError("taps must have odd length")
        if not np.allclose(self.taps, self.taps[::-1], atol=0, rtol=0):
            raise SignalError("taps must be symmetric")
        if abs(float(np.sum(self.taps)) - 1.0) > 1e-12:
            raise SignalError("taps must sum to 1")

    @property
    def half_support(self) -> int:
        return len(self.taps) // 2

    def response_at(self, freq: float) -> float:
        """DFT magnitude at a normalized frequency (cycles/sample)."""
        n = np.arange(len(self.taps)) - self.half_support
        return float(np.abs(np.sum(self.taps * np.exp(-2j * np.pi * freq * n))))


def fourier_grid(cfg: FourierConfig, window: WindowSpec, world_to_grid: WorldToGrid) -> FeatureGrid:
    """Sinusoidal channels a_i cos/sin(2*pi b_i . v) over the window's GLOBAL
    world coordinates, so crops at different origins come out phase-shifted."""
    nyq = world_to_grid.scale / 2.0
    for i, b in enumerate(cfg.frequencies):
        if abs(b[0]) > nyq or abs(b[1]) > nyq:
            raise SignalError(f"frequency b_{i}={b} exceeds Nyquist rate {nyq} cycles/world-unit")
    h, w = window.size
    w2g = world_to_grid.shifted(dcol=window.origin[1], drow=window.origin[0])
    wx, wy = w2g.pixel_centers(h, w)
    out = np.empty((h, w, cfg.n_channels), dtype=np.float64)
    for i, (a, b) in enumerate(zip(cfg.amplitudes, cfg.frequencies)):
        phase = 2.0 * np.pi * (b[0] * wx + b[1] * wy)
        out[:, :, 2 * i] = a * np.cos(phase)
        out[:, :, 2 * i + 1] = a * np.sin(phase)
    return FeatureGrid(out, w2g)


def design_lowpass(cutoff_frac: float, half_width: int = 6, shape_param: float = 8.0) -> FirFilter:
    """Kaiser-windowed sinc, unit DC gain. Support widens as cutoff drops so
    stopband behavior is roughly cutoff-independent."""
    if not (0.0 < cutoff_frac <= 0.5):
        raise SignalError(f"cutoff_frac must be in (0, 0.5], got {cutoff_frac}")
    if half_width < 1:
        raise SignalError("half_width must be >= 1")
    radius = int(np.ceil(half_width * 0.5 / cutoff_frac))
    n = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = 2.0 * cutoff_frac * np.sinc(2.0 * cutoff_frac * n)
    taps *= np.kaiser(2 * radius + 1, shape_param)
    taps /= taps.sum()
    # enforce exact symmetry after rounding noise
    taps = 0.5 * (taps + taps[::-1])
    taps /= taps.sum()
    return FirFilter(taps, cutoff_frac, {"window_kind": "kaiser", "beta": shape_param,
                                         "half_width": half_width})


def _filter_array(data: np.ndarray, taps: np.ndarray) -> np.ndarray:
    out = convolve1d(data, taps, axis=0, mode="constant", cval=0.0)
    out = convolve1d(out, taps, axis=1, mode="constant", cval=0.0)
    return out


def filter2d(g: FeatureGrid, f: FirFilter) -> FeatureGrid:
    """Separable zero-padded convolution, per channel."""
    h, w, _ = g.data.shape
    if len(f.taps) > h or len(f.taps) > w:
        raise SignalError(f"grid {h}x{w} smaller than filter support {len(f.taps)}")
    return FeatureGrid(_filter_array(g.data, f.taps), g.world_to_grid)


def _downsampled_w2g(w2g: WorldToGrid, factor: int) -> WorldToGrid:
    s = w2g.scale / factor
    off = tuple((o - 0.5) / factor + 0.5 for o in w2g.offset)
    return WorldToGrid(s, off)  # type: ignore[arg-type]


def _upsampled_w2g(w2g: WorldToGrid, factor: int) -> WorldToGrid:
    s = w2g.scale * factor
    off = tuple(factor * (o - 0.5) + 0.5 for o in w2g.offset)
    return WorldToGrid(s, off)  # type: ignore[arg-type]


def downsample(g: FeatureGrid, factor: int, lowpass: bool = True,
               fir: FirFilter | None = None) -> FeatureGrid:
    """Anti-aliased decimation: low-pass at cutoff 0.5/factor, then stride.

    factor 1 is a filter-only pass. lowpass=False skips the filter (the
    aliasing-prone ablation path).
    """
    h, w, _ = g.data.shape
    if factor < 1:
        raise SignalError("factor must be >= 1")
    if h % factor or w % factor:
        raise SignalError(f"dims ({h}, {w}) not divisible by factor {factor}")
    data = g.data
    if lowpass:
        f = fir if fir is not None else design_lowpass(0.5 / factor)
        if len(f.taps) > h or len(f.taps) > w:
            raise SignalError(f"grid {h}x{w} smaller than filter support {len(f.taps)}")
        data = _filter_array(data, f.taps)
    if factor > 1:
        data = data[::factor, ::factor, :]
    return FeatureGrid(np.ascontiguousarray(data), _downsampled_w2g(g.world_to_grid, factor))


def upsample(g: FeatureGrid, factor: int) -> FeatureGrid:
    """Bilinear upsampling, no post-filter. Output index o samples input
    coordinate o/factor, so source pixels reproduce exactly at o = k*factor."""
    if factor < 1:
        raise SignalError("factor must be >= 1")
    if factor == 1:
        return g
    h, w, c = g.data.shape
    out = np.empty((h * factor, w * factor, c), dtype=np.float64)
    src_r = np.arange(h * factor, dtype=np.float64) / factor
    src_c = np.arange(w * factor, dtype=np.float64) / factor
    r0 = np.clip(np.floor(src_r).astype(int), 0, h - 1)
    c0 = np.clip(np.floor(src_c).astype(int), 0, w - 1)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (src_r - r0)[:, None, None]
    fc = (src_c - c0)[None, :, None]
    d = g.data
    top = d[r0][:, c0] * (1 - fc) + d[r0][:, c1] * fc
    bot = d[r1][:, c0] * (1 - fc) + d[r1][:, c1] * fc
    out = top * (1 - fr) + bot * fr
    return FeatureGrid(out, _upsampled_w2g(g.world_to_grid, factor))


def pe(z, cfg: PeConfig) -> np.ndarray:
    """Interleaved [sin(2^l pi base z), cos(2^l pi base z)], l = 0..L-1.

    z may be scalar or any array; output appends a trailing 2L axis.
    """
    z = np.asarray(z, dtype=np.float64)
    scales = (2.0 ** np.arange(cfg.n_freqs)) * np.pi * cfg.base
    arg = z[..., None] * scales
    out = np.empty(z.shape + (2 * cfg.n_freqs,), dtype=np.float64)
    out[..., 0::2] = np.sin(arg)
    out[..., 1::2] = np.cos(arg)
    return out


def bilinear_sample(g: FeatureGrid, x, y) -> np.ndarray:
    """Sample world points; outside coordinates clamp to the border pixel.

    x, y scalars or arrays of equal shape; returns shape + (C,).
    """
    h, w, c = g.data.shape
    gx = np.asarray(x, dtype=np.float64) * g.world_to_grid.scale + g.world_to_grid.offset[0]
    gy = np.asarray(y, dtype=np.float64) * g.world_to_grid.scale + g.world_to_grid.offset[1]
    u = np.clip(gx - 0.5, 0.0, w - 1.0)
    v = np.clip(gy - 0.5, 0.0, h - 1.0)
    c0 = np.clip(np.floor(u).astype(int), 0, w - 1)
    r0 = np.clip(np.floor(v).astype(int), 0, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    r1 = np.minimum(r0 + 1, h - 1)
    fu = (u - c0)[..., None]
    fv = (v - r0)[..., None]
    d = g.data
    top = d[r0, c0] * (1 - fu) + d[r0, c1] * fu
    bot = d[r1, c0] * (1 - fu) + d[r1, c1] * fu
    return top * (1 - fv) + bot * fv


def save_grid(g: FeatureGrid, path) -> None:
    h, w, c = g.data.shape
    header = {"h": h, "w": w, "c": c,
              "world_to_grid": {"scale": g.world_to_grid.scale,
                                "offset": list(g.world_to_grid.offset)}}
    write_container(path, GRID_MAGIC, header, g.data)


def load_grid(path) -> FeatureGrid:
    header, payload = read_container(path, GRID_MAGIC)
    data = payload.reshape(header["h"], header["w"], header["c"]).astype(np.float64)
    w2g = WorldToGrid(header["world_to_grid"]["scale"], tuple(header["world_to_grid"]["offset"]))
    return FeatureGrid(data, w2g)

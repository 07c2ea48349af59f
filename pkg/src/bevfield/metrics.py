"""PSNR and the translation-equivariance score (EQT).

EQT protocol: the scene content is translated in BEV space while the
generator's coordinate window slides along with it, so the same content is
synthesized under different local coordinates; the rendered images of a
perfectly equivariant pipeline then differ by a pure image-space translation.
The score is a PSNR over the residual after undoing that translation,
averaged over random latents and shifts, with images remapped to [-1, 1]
(dynamic range I_max = 2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bevmap import BevMap, WindowSpec, translate
from .generator import GeneratorConfig, GeneratorParams, LatentCode, neural_field
from .renderer import RadianceField, bev_procedural_field, render_topdown

DEFAULT_CAP_DB = 80.0


class MetricError(ValueError):
    pass


def psnr(a: np.ndarray, b: np.ndarray, i_max: float = 2.0, cap_db: float = DEFAULT_CAP_DB) -> float:
    """10*log10(i_max^2 / MSE); MSE over all pixels/channels. MSE = 0 (or tiny
    enough to exceed the ceiling) returns the cap."""
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((np.asarray(a, float) - np.asarray(b, float)) ** 2))
    if mse == 0.0:
        return cap_db
    return min(10.0 * np.log10(i_max**2 / mse), cap_db)


@dataclass
class EqtReport:
    eqt_db: float
    n_latents: int
    n_shifts: int
    shift_range: int
    per_sample_mse: list[float]
    crop_border: int
    capped: bool
    i_max: float = 2.0
    cap_db: float = DEFAULT_CAP_DB
    mapping: float = 1.0
    seed: int = 0
    shifts: tuple[int, ...] = ()

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["shifts"] = list(self.shifts)
        return json.dumps(d, indent=2)


def _shifted_overlap_mse(img_base: np.ndarray, img_shifted: np.ndarray,
                         px: int, crop_border: int) -> float:
    """MSE between img_shifted and img_base translated by +px columns, over
    the valid overlap minus crop_border on all sides, in [-1, 1] range."""
    h, w, _ = img_base.shape
    if px >= 0:
        a = img_shifted[:, px:]
        b = img_base[:, : w - px]
    else:
        a = img_shifted[:, :px] if px else img_shifted
        b = img_base[:, -px:]
    cb = crop_border
    if a.shape[1] <= 2 * cb or h <= 2 * cb:
        raise MetricError(f"empty valid region (shift {px}, crop {cb}, image {h}x{w})")
    a = a[cb : h - cb, cb : a.shape[1] - cb]
    b = b[cb : h - cb, cb : b.shape[1] - cb]
    return float(np.mean((2.0 * a - 2.0 * b) ** 2))  # [0,1] -> [-1,1] remap


def eqt(
    gen,
    b: BevMap,
    window: WindowSpec,
    shifts: list[int],
    n_latents: int,
    latent_dim: int,
    mapping: float = 1.0,
    crop_border: int = 8,
    seed: int = 0,
    i_max: float = 2.0,
    cap_db: float = DEFAULT_CAP_DB,
) -> EqtReport:
    """Monte Carlo EQT.

    gen(bev, latent_vector, window) -> image (H, W, 3) in [0, 1]. For each
    shift x the content is translated by x and the window slid by -x, leaving
    the scene fixed in global coordinates; the base render must then
    reproduce, shifted by mapping*x image pixels.
    """
    for x in shifts:
        if abs(x) > b.margin_px:
            raise MetricError(f"shift {x} exceeds BEV margin {b.margin_px}")
    rng = np.random.default_rng(seed)
    latents = [rng.standard_normal(latent_dim) for _ in range(n_latents)]
    mses: list[float] = []
    for s in latents:
        base = gen(b, s, window)
        for x in shifts:
            bx = translate(b, x, 0)
            wx = window.shifted(0, -x)
            img = gen(bx, s, wx)
            px = int(round(mapping * x))
            mses.append(_shifted_overlap_mse(base, img, px, crop_border))
    mean_mse = float(np.mean(mses))
    capped = bool(mean_mse == 0.0 or 10.0 * np.log10(i_max**2 / max(mean_mse, 1e-300)) >= cap_db)
    db = cap_db if capped else float(10.0 * np.log10(i_max**2 / mean_mse))
    return EqtReport(
        eqt_db=db,
        n_latents=n_latents,
        n_shifts=len(shifts),
        shift_range=max((abs(x) for x in shifts), default=0),
        per_sample_mse=mses,
        crop_border=crop_border,
        capped=capped,
        i_max=i_max,
        cap_db=cap_db,
        mapping=mapping,
        seed=seed,
        shifts=tuple(shifts),
    )


# --- ready-made generator callbacks for the harness ---


def _window_world_origin(b: BevMap, window: WindowSpec) -> tuple[float, float]:
    """World coordinates of the window's top-left grid corner (global frame:
    the canvas is placed at the window's origin)."""
    s = b.world_to_grid.scale
    ox, oy = b.world_to_grid.offset
    r0, c0 = window.origin
    return (c0 - ox) / s, (r0 - oy) / s


def _render_window(field: RadianceField, b: BevMap, window: WindowSpec,
                   n_samples: int, z_top: float, ssaa: int = 1) -> np.ndarray:
    x0, y0 = _window_world_origin(b, window)
    h, w = window.size
    return render_topdown(field, x0, y0, b.world_to_grid.scale, w, h,
                          n_samples, z_top=z_top, ssaa=ssaa)


def procedural_generator(n_samples: int = 32, z_top: float = 20.0):
    """Oracle generator: analytic field rendered top-down over the window.
    Exactly equivariant; the latent is ignored."""

    def gen(b: BevMap, latent: np.ndarray, window: WindowSpec) -> np.ndarray:
        field = bev_procedural_field(b)
        s = b.world_to_grid.scale
        shifted = _ShiftedField(field, window.origin[1] / s, window.origin[0] / s)
        return _render_window(shifted, b, window, n_samples, z_top)

    return gen


class _ShiftedField(RadianceField):
    """Places a canvas-frame field at its global window position."""

    def __init__(self, inner: RadianceField, dx: float, dy: float):
        self.inner = inner
        self.offset = np.array([dx, dy, 0.0])

    def query(self, points, dirs=None):
        return self.inner.query(np.asarray(points, float) - self.offset, dirs)


def neural_generator(params: GeneratorParams, cfg: GeneratorConfig,
                     n_samples: int = 32, z_top: float | None = None):
    """Neural generator: U-Net plane + field MLP rendered top-down over the
    window's global footprint."""
    zt = cfg.z_range[1] if z_top is None else z_top

    def gen(b: BevMap, latent: np.ndarray, window: WindowSpec) -> np.ndarray:
        field = neural_field(params, cfg, b, LatentCode(latent), window)
        return _render_window(field, b, window, n_samples, zt)

    return gen

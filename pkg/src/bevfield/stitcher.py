"""Divide-and-conquer panorama synthesis.

A window slides along the global BEV map in steps of n_step pixels; each
local window is synthesized and rendered with a camera rigidly attached to
the window; the central n_loc columns of each frame are concatenated into an
unbounded panorama (n_loc = round(n_step / f_norm)). n_step = 1 with
f_norm = 1 is the one-middle-column-per-frame case; larger steps trade strip
width for render count and introduce serration at strip seams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bevmap import BevMap, WindowSpec, crop_window
from .renderer import Camera, RadianceField, render_camera, render_topdown


class StitchError(ValueError):
    pass


@dataclass(frozen=True)
class StitchConfig:
    window: tuple[int, int]  # (h, w) px on the BEV
    n_step: int
    frame_w: int
    frame_h: int
    f_norm: float = 1.0
    axis: str = "x"  # traversal axis (columns)

    def __post_init__(self):
        if self.n_step < 1:
            raise StitchError("n_step must be >= 1")
        if self.axis != "x":
            raise StitchError("only horizontal traversal is supported")
        if not (1 <= self.n_loc <= self.frame_w):
            raise StitchError(
                f"n_loc {self.n_loc} out of range [1, frame_w={self.frame_w}]"
            )

    @property
    def n_loc(self) -> int:
        return max(1, int(round(self.n_step / self.f_norm)))


@dataclass(frozen=True)
class CameraRig:
    """Camera pose relative to the current window; 'topdown' is the exact
    orthographic rig, 'pinhole' a perspective rig behind the window center."""

    mode: str = "topdown"
    height: float = 24.0
    standoff: float = 40.0  # pinhole: distance behind the window center (-y)
    n_samples: int = 32
    z_top: float = 20.0
    ssaa: int = 1

    def render_frame(self, field: RadianceField, b: BevMap, w: WindowSpec,
                     cfg: StitchConfig) -> np.ndarray:
        s = b.world_to_grid.scale
        ox, oy = b.world_to_grid.offset
        r0, c0 = w.origin
        wh, ww = w.size
        if self.mode == "topdown":
            x0 = (c0 - ox) / s
            y0 = (r0 - oy) / s
            ppw = s * cfg.frame_w / ww
            return render_topdown(field, x0, y0, ppw, cfg.frame_w, cfg.frame_h,
                                  self.n_samples, z_top=self.z_top, ssaa=self.ssaa)
        if self.mode == "pinhole":
            cx = (c0 + ww / 2.0 - ox) / s
            cy = (r0 + wh / 2.0 - oy) / s
            cam = Camera(
                position=(cx, cy - self.standoff, self.height),
                look_at=(cx, cy, 0.0),
                f_norm=cfg.f_norm,
                near=1.0,
                far=self.standoff + wh / s + 10.0,
            )
            return render_camera(field, cam, cfg.frame_w, cfg.frame_h,
                                 self.n_samples, ssaa=self.ssaa)
        raise StitchError(f"unknown rig mode {self.mode!r}")


def slide(global_map: BevMap, cfg: StitchConfig) -> list[WindowSpec]:
    """Window origins at k * n_step for k = 0..K-1 along the traversal axis."""
    h, w, _ = global_map.grid.shape
    wh, ww = cfg.window
    if ww > w or wh > h:
        raise StitchError(f"window {cfg.window} larger than global map ({h}, {w})")
    k = (w - ww) // cfg.n_step + 1
    return [WindowSpec((0, i * cfg.n_step), (wh, ww)) for i in range(k)]


def traverse(field_factory, global_map: BevMap, cfg: StitchConfig,
             rig: CameraRig = CameraRig()) -> list[np.ndarray]:
    """One frame per window; camera rigidly attached to each window.

    field_factory(local_bev, window) -> RadianceField in the GLOBAL frame.
    """
    frames = []
    for w in slide(global_map, cfg):
        local = crop_window(global_map, w)
        field = field_factory(local, w)
        frames.append(rig.render_frame(field, global_map, w, cfg))
    return frames


def strip_start(cfg: StitchConfig) -> int:
    """First of the n_loc central columns (left-biased for even counts)."""
    return cfg.frame_w // 2 - cfg.n_loc // 2


def stitch(frames: list[np.ndarray], cfg: StitchConfig) -> np.ndarray:
    """Concatenate the n_loc central columns of every frame."""
    if not frames:
        raise StitchError("no frames to stitch")
    h, w, _ = frames[0].shape
    for f in frames:
        if f.shape != frames[0].shape:
            raise StitchError("frames must share a single size")
    if cfg.n_loc > w:
        raise StitchError(f"n_loc {cfg.n_loc} exceeds frame width {w}")
    lo = strip_start(cfg)
    return np.concatenate([f[:, lo : lo + cfg.n_loc] for f in frames], axis=1)


def stitch_report(cfg: StitchConfig, k: int, panorama: np.ndarray) -> dict:
    return {
        "K": k,
        "n_step": cfg.n_step,
        "n_loc": cfg.n_loc,
        "f_norm": cfg.f_norm,
        "frame_w": cfg.frame_w,
        "frame_h": cfg.frame_h,
        "panorama_w": panorama.shape[1],
        "panorama_h": panorama.shape[0],
    }


def panorama_global_start(cfg: StitchConfig) -> float:
    """Global BEV column of the panorama's first strip column, assuming frame
    columns map linearly onto window columns (exact for the topdown rig)."""
    ww = cfg.window[1]
    return strip_start(cfg) * ww / cfg.frame_w


def compare_panoramas(pano_a: np.ndarray, cfg_a: StitchConfig,
                      pano_b: np.ndarray, cfg_b: StitchConfig) -> float:
    """Mean abs diff between two panoramas of the same scene over the global
    columns both cover; strip columns are mapped to global BEV columns by the
    linear frame->window correspondence."""
    bev_per_col_a = cfg_a.window[1] / cfg_a.frame_w
    bev_per_col_b = cfg_b.window[1] / cfg_b.frame_w

    def global_cols(cfg, width, bev_per_col):
        ks = np.arange(width) // cfg.n_loc
        offs = np.arange(width) % cfg.n_loc
        return ks * cfg.n_step + panorama_global_start(cfg) + offs * bev_per_col

    ga = global_cols(cfg_a, pano_a.shape[1], bev_per_col_a)
    gb = global_cols(cfg_b, pano_b.shape[1], bev_per_col_b)
    lookup = {round(g, 6): i for i, g in enumerate(gb)}
    pairs = [(i, lookup[round(g, 6)]) for i, g in enumerate(ga) if round(g, 6) in lookup]
    if not pairs:
        raise StitchError("panoramas share no aligned global columns")
    ia, ib = zip(*pairs)
    return float(np.mean(np.abs(pano_a[:, list(ia)] - pano_b[:, list(ib)])))


def save_stitch_outputs(frames, panorama, cfg: StitchConfig, out_dir) -> dict:
    from pathlib import Path

    from .renderer import save_png

    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(frames):
        save_png(f, out / "frames" / f"{i:05d}.png")
    save_png(panorama, out / "panorama.png")
    report = stitch_report(cfg, len(frames), panorama)
    (out / "stitch_report.json").write_text(json.dumps(report, indent=2))
    return report

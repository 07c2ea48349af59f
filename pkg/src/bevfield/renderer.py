"""Volume rendering: cameras, ray sampling, compositing, SSAA, and the
procedural oracle field.

The procedural field is an analytic stand-in for a trained generator. It is
exactly covariant with scene translation by construction, which makes it the
ground-truth reference for every equivariance harness in the suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bevmap import DEFAULT_PALETTE_RGB, BevMap, SceneObject
from .container import IMAGE_MAGIC, read_container, write_container
from .dsp import FeatureGrid, design_lowpass, downsample
from .bevmap import WorldToGrid


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    up: tuple[float, float, float] = (0.0, 0.0, 1.0)
    f_norm: float = 1.0  # focal / half image width
    near: float = 0.5
    far: float = 60.0

    def __post_init__(self):
        if not (0 < self.near < self.far):
            raise RenderError(f"need 0 < near < far, got {self.near}, {self.far}")
        if self.f_norm <= 0:
            raise RenderError("f_norm must be > 0")

    def rotation(self) -> np.ndarray:
        """World-from-camera rotation; camera looks along +z, x right, y down."""
        fwd = np.asarray(self.look_at, float) - np.asarray(self.position, float)
        n = np.linalg.norm(fwd)
        if n == 0:
            raise RenderError("camera position equals look_at")
        fwd = fwd / n
        up = np.asarray(self.up, float)
        right = np.cross(fwd, up)
        rn = np.linalg.norm(right)
        if rn < 1e-12:
            raise RenderError("up vector parallel to view direction")
        right /= rn
        down = np.cross(fwd, right)
        return np.stack([right, down, fwd], axis=1)


def make_rays(cam: Camera, w: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    """Pinhole rays through pixel centers; returns origins (h,w,3), dirs (h,w,3)."""
    if w < 1 or h < 1:
        raise RenderError("image dims must be >= 1")
    u = (2.0 * (np.arange(w) + 0.5) / w) - 1.0
    v = (2.0 * (np.arange(h) + 0.5) / h) - 1.0
    uu, vv = np.meshgrid(u, v)
    d_cam = np.stack(
        [uu / cam.f_norm, vv / cam.f_norm * (h / w), np.ones_like(uu)], axis=-1
    )
    rot = cam.rotation()
    d_world = d_cam @ rot.T
    d_world /= np.linalg.norm(d_world, axis=-1, keepdims=True)
    origins = np.broadcast_to(np.asarray(cam.position, float), d_world.shape).copy()
    return origins, d_world


def make_topdown_rays(
    x0: float, y0: float, px_per_world: float, w: int, h: int, z0: float = 40.0
) -> tuple[np.ndarray, np.ndarray]:
    """Orthographic straight-down rays over a world-aligned rectangle.

    Pixel (i, j) looks down at world (x0 + (j+0.5)/ppw, y0 + (i+0.5)/ppw).
    Gives an exact world<->image translation correspondence.
    """
    xs = x0 + (np.arange(w) + 0.5) / px_per_world
    ys = y0 + (np.arange(h) + 0.5) / px_per_world
    xx, yy = np.meshgrid(xs, ys)
    origins = np.stack([xx, yy, np.full_like(xx, z0)], axis=-1)
    dirs = np.zeros_like(origins)
    dirs[..., 2] = -1.0
    return origins, dirs


def sample_along(
    origins: np.ndarray,
    dirs: np.ndarray,
    near: float,
    far: float,
    n: int,
    jitter_seed: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform bins along each ray; midpoints, or stratified-jittered if seeded.

    Returns points (..., n, 3) and deltas (n,) with sum(deltas) == far - near.
    """
    if n < 1:
        raise RenderError("need n >= 1 samples")
    width = (far - near) / n
    if jitter_seed is None:
        offsets = np.full(n, 0.5)
    else:
        offsets = np.random.default_rng(jitter_seed).uniform(0.0, 1.0, n)
    t = near + (np.arange(n) + offsets) * width
    pts = origins[..., None, :] + t[:, None] * dirs[..., None, :]
    deltas = np.full(n, width)
    return pts, deltas


def composite(
    colors: np.ndarray,
    sigmas: np.ndarray,
    deltas: np.ndarray,
    background: tuple[float, float, float] = (0.0, 0.0, 0.0),
    paper_exact: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Front-to-back alpha compositing along the last sample axis.

    colors (..., N, 3), sigmas (..., N), deltas (N,) or (..., N).
    Standard transmittance T_i = prod_{j<i} exp(-sigma_j delta_j);
    paper_exact=True runs the product through j = i instead (the formula as
    printed in the source material, kept for comparison).
    Returns (rgb (..., 3), weights (..., N)). Residual transmittance falls on
    the background color.
    """
    if np.any(sigmas < 0):
        raise RenderError("densities must be >= 0")
    tau = sigmas * deltas
    alpha = 1.0 - np.exp(-tau)
    trans_in = np.exp(-np.cumsum(tau, axis=-1))
    if paper_exact:
        trans = trans_in
    else:
        trans = np.concatenate(
            [np.ones_like(trans_in[..., :1]), trans_in[..., :-1]], axis=-1
        )
    weights = trans * alpha
    rgb = np.sum(weights[..., None] * colors, axis=-2)
    residual = 1.0 - np.sum(weights, axis=-1)
    rgb = rgb + residual[..., None] * np.asarray(background, float)
    return rgb, weights


class RadianceField:
    """Queryable field: points (N, 3) [+ dirs (N, 3)] -> (colors (N,3), sigma (N,))."""

    def query(self, points: np.ndarray, dirs: np.ndarray | None = None):
        raise NotImplementedError


def render(
    field: RadianceField,
    rays: tuple[np.ndarray, np.ndarray],
    near: float,
    far: float,
    n_samples: int,
    ssaa: int = 1,
    jitter_seed: int | None = None,
    background: tuple[float, float, float] = (0.0, 0.0, 0.0),
    paper_exact: bool = False,
) -> np.ndarray:
    """Ray-march every ray and composite; rays are pre-built (see render_camera
    / make_topdown_rays for the two camera models)."""
    origins, dirs = rays
    pts, deltas = sample_along(origins, dirs, near, far, n_samples, jitter_seed)
    flat_pts = pts.reshape(-1, 3)
    flat_dirs = np.repeat(dirs.reshape(-1, 3), n_samples, axis=0)
    colors, sigmas = field.query(flat_pts, flat_dirs)
    shape = pts.shape[:-1]
    colors = colors.reshape(shape + (3,))
    sigmas = sigmas.reshape(shape)
    rgb, _ = composite(colors, sigmas, deltas, background, paper_exact)
    if ssaa > 1:
        g = FeatureGrid(rgb.astype(np.float64), WorldToGrid())
        # short filter: keeps zero-padding border effects to a few output px
        fir = design_lowpass(0.5 / ssaa, half_width=3)
        rgb = downsample(g, ssaa, fir=fir).data
    return np.clip(rgb, 0.0, 1.0)


def render_camera(
    field: RadianceField,
    cam: Camera,
    w: int,
    h: int,
    n_samples: int,
    ssaa: int = 1,
    **kw,
) -> np.ndarray:
    """Pinhole render at (w, h) with k-times supersampling anti-aliasing."""
    if ssaa < 1:
        raise RenderError("ssaa factor must be >= 1")
    rays = make_rays(cam, w * ssaa, h * ssaa)
    return render(field, rays, cam.near, cam.far, n_samples, ssaa=ssaa, **kw)


def render_topdown(
    field: RadianceField,
    x0: float,
    y0: float,
    px_per_world: float,
    w: int,
    h: int,
    n_samples: int,
    z_top: float = 40.0,
    z_bottom: float = -1.0,
    ssaa: int = 1,
    **kw,
) -> np.ndarray:
    """Orthographic top-down render; exact image<->world translation mapping."""
    if ssaa < 1:
        raise RenderError("ssaa factor must be >= 1")
    rays = make_topdown_rays(x0, y0, px_per_world * ssaa, w * ssaa, h * ssaa, z_top)
    return render(field, rays, 0.0, z_top - z_bottom, n_samples, ssaa=ssaa, **kw)


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _object_sdf(obj: SceneObject, p: np.ndarray) -> np.ndarray:
    dx = p[:, 0] - obj.center[0]
    dy = p[:, 1] - obj.center[1]
    z = p[:, 2]
    r = obj.footprint_radius
    if obj.shape == "sphere":
        cz = min(r, obj.height / 2.0)
        return np.sqrt(dx * dx + dy * dy + (z - cz) ** 2) - r
    if obj.shape == "cube":
        hz = obj.height / 2.0
        qx = np.abs(dx) - r
        qy = np.abs(dy) - r
        qz = np.abs(z - hz) - hz
        outside = np.sqrt(
            np.maximum(qx, 0) ** 2 + np.maximum(qy, 0) ** 2 + np.maximum(qz, 0) ** 2
        )
        inside = np.minimum(np.maximum(qx, np.maximum(qy, qz)), 0.0)
        return outside + inside
    # cylinder
    dr = np.sqrt(dx * dx + dy * dy) - r
    hz = obj.height / 2.0
    dz = np.abs(z - hz) - hz
    outside = np.sqrt(np.maximum(dr, 0) ** 2 + np.maximum(dz, 0) ** 2)
    inside = np.minimum(np.maximum(dr, dz), 0.0)
    return outside + inside


@dataclass
class ProceduralField(RadianceField):
    """Analytic SDF-based field: density-weighted palette colors over a ground
    plane at z = 0. Pure function of point-minus-center, hence exactly
    translation covariant."""

    objects: tuple[SceneObject, ...]
    palette: np.ndarray = field(default_factory=lambda: DEFAULT_PALETTE_RGB.copy())
    sigma_max: float = 20.0
    edge_width: float = 0.5
    ground_albedo: tuple[float, float, float] = (0.35, 0.35, 0.35)
    ground: bool = True

    def query(self, points: np.ndarray, dirs: np.ndarray | None = None):
        p = np.asarray(points, dtype=np.float64)
        n = p.shape[0]
        sig = np.zeros(n)
        col_acc = np.zeros((n, 3))
        for obj in self.objects:
            sd = _object_sdf(obj, p)
            occ = _smoothstep((-sd) / self.edge_width)
            s = self.sigma_max * occ
            sig += s
            col_acc += s[:, None] * self.palette[obj.color % len(self.palette)]
        if self.ground:
            occ = _smoothstep((-p[:, 2]) / self.edge_width)
            s = self.sigma_max * occ
            sig += s
            col_acc += s[:, None] * np.asarray(self.ground_albedo)
        colors = np.where(sig[:, None] > 1e-12, col_acc / np.maximum(sig[:, None], 1e-12), 0.0)
        return colors, sig


@dataclass
class CheckerField(RadianceField):
    """High-frequency opaque checker slab for anti-aliasing experiments."""

    period: float = 1.0
    z_top: float = 1.0
    sigma: float = 50.0

    def query(self, points: np.ndarray, dirs: np.ndarray | None = None):
        p = np.asarray(points, dtype=np.float64)
        parity = (np.floor(p[:, 0] / self.period) + np.floor(p[:, 1] / self.period)) % 2
        colors = np.repeat(parity[:, None], 3, axis=1)
        inside = (p[:, 2] <= self.z_top) & (p[:, 2] >= 0.0)
        return colors, np.where(inside, self.sigma, 0.0)


def bev_procedural_field(b: BevMap, **kw) -> ProceduralField:
    """Oracle field for a BevMap's object list, in the map's world coordinates."""
    return ProceduralField(tuple(b.objects), **kw)


def save_image_f32(img: np.ndarray, path) -> None:
    h, w, c = img.shape
    write_container(path, IMAGE_MAGIC, {"h": h, "w": w, "c": c}, img)


def load_image_f32(path) -> np.ndarray:
    header, payload = read_container(path, IMAGE_MAGIC)
    return payload.reshape(header["h"], header["w"], header["c"]).astype(np.float64)


def to_png_bytes(img: np.ndarray, srgb: bool = False) -> bytes:
    from io import BytesIO

    from PIL import Image

    arr = np.clip(img, 0.0, 1.0)
    if srgb:
        arr = np.where(arr <= 0.0031308, 12.92 * arr, 1.055 * arr ** (1 / 2.4) - 0.055)
    data = (arr * 255.0 + 0.5).astype(np.uint8)
    buf = BytesIO()
    Image.fromarray(data).save(buf, format="PNG")
    return buf.getvalue()


def save_png(img: np.ndarray, path, srgb: bool = False) -> None:
    with open(path, "wb") as f:
        f.write(to_png_bytes(img, srgb))

"""Bird's-eye-view semantic maps.

A BevMap is a rasterized top-down occupancy/semantics grid plus the object
list it was rasterized from. The object list is the source of truth: every
edit re-rasterizes from scratch, so edits are exactly invertible and raster
artifacts never accumulate.

Conventions:
  * world -> grid is an affine map: grid = world * scale + offset, with
    grid x running along columns and grid y along rows.
  * pixel [row i, col j] has its center at grid coordinate (j + 0.5, i + 0.5).
  * the outermost ``margin_px`` pixels of the grid (the margin band) are
    always zero; rasterization rejects objects that would touch it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .container import BEV_MAGIC, read_container, write_container

SHAPES = ("cube", "sphere", "cylinder")
N_SHAPES = len(SHAPES)
DEFAULT_N_COLORS = 8

# RGB used by the procedural renderer; indices are the palette indices.
DEFAULT_PALETTE_RGB = np.array(
    [
        [0.85, 0.15, 0.15],
        [0.15, 0.45, 0.85],
        [0.15, 0.70, 0.25],
        [0.90, 0.80, 0.15],
        [0.60, 0.25, 0.70],
        [0.90, 0.50, 0.15],
        [0.20, 0.75, 0.75],
        [0.75, 0.75, 0.75],
    ],
    dtype=np.float64,
)


class BevError(ValueError):
    pass


@dataclass(frozen=True)
class WorldToGrid:
    """Affine world->grid map: grid = world * scale + offset (per axis)."""

    scale: float = 1.0
    offset: tuple[float, float] = (0.0, 0.0)

    def world_to_grid(self, xy: np.ndarray) -> np.ndarray:
        return np.asarray(xy, dtype=np.float64) * self.scale + np.asarray(self.offset)

    def grid_to_world(self, gxy: np.ndarray) -> np.ndarray:
        return (np.asarray(gxy, dtype=np.float64) - np.asarray(self.offset)) / self.scale

    def pixel_centers(self, h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
        """World (x, y) coordinates of every pixel center, each (h, w)."""
        gx = np.arange(w, dtype=np.float64) + 0.5
        gy = np.arange(h, dtype=np.float64) + 0.5
        wx = (gx - self.offset[0]) / self.scale
        wy = (gy - self.offset[1]) / self.scale
        return np.broadcast_to(wx[None, :], (h, w)), np.broadcast_to(wy[:, None], (h, w))

    def shifted(self, dcol: float, drow: float) -> "WorldToGrid":
        """Transform for a sub-grid whose pixel (0,0) is global pixel (drow, dcol)."""
        return WorldToGrid(self.scale, (self.offset[0] - dcol, self.offset[1] - drow))


@dataclass(frozen=True)
class SceneObject:
    shape: str
    color: int
    center: tuple[float, float]
    footprint_radius: float
    height: float

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise BevError(f"unknown shape {self.shape!r}")
        if self.footprint_radius <= 0:
            raise BevError("footprint_radius must be > 0")
        if self.height <= 0:
            raise BevError("height must be > 0")
        if self.color < 0:
            raise BevError("color index must be >= 0")


@dataclass(frozen=True)
class WindowSpec:
    origin: tuple[int, int]  # (row, col) in the global map
    size: tuple[int, int]  # (h, w)

    def validate_inside(self, h: int, w: int) -> None:
        r0, c0 = self.origin
        wh, ww = self.size
        if r0 < 0 or c0 < 0 or r0 + wh > h or c0 + ww > w:
            raise BevError(
                f"window origin={self.origin} size={self.size} exceeds map extents ({h}, {w})"
            )

    def shifted(self, drow: int, dcol: int) -> "WindowSpec":
        return WindowSpec((self.origin[0] + drow, self.origin[1] + dcol), self.size)


@dataclass(frozen=True)
class BevMap:
    grid: np.ndarray  # (H, W, C) float32 in [0, 1]
    schema: str  # 'onehot_color_shape' | 'occupancy'
    world_to_grid: WorldToGrid
    margin_px: int
    objects: tuple[SceneObject, ...] = field(default_factory=tuple)
    n_colors: int = DEFAULT_N_COLORS

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.grid.shape  # type: ignore[return-value]

    def channel_count(self) -> int:
        return self.grid.shape[2]


def _footprint_mask(obj: SceneObject, w2g: WorldToGrid, h: int, w: int) -> np.ndarray:
    wx, wy = w2g.pixel_centers(h, w)
    dx = wx - obj.center[0]
    dy = wy - obj.center[1]
    if obj.shape == "cube":
        return np.maximum(np.abs(dx), np.abs(dy)) <= obj.footprint_radius
    return dx * dx + dy * dy <= obj.footprint_radius**2


def _margin_band(h: int, w: int, margin_px: int) -> np.ndarray:
    band = np.ones((h, w), dtype=bool)
    if margin_px == 0:
        return np.zeros((h, w), dtype=bool)
    band[margin_px : h - margin_px, margin_px : w - margin_px] = False
    return band


def rasterize(
    objects,
    schema: str,
    dims: tuple[int, int],
    world_to_grid: WorldToGrid = WorldToGrid(),
    margin_px: int = 0,
    n_colors: int = DEFAULT_N_COLORS,
) -> BevMap:
    """Rasterize an object list into a fresh BevMap.

    Overlapping footprints: the later object in the list wins per pixel.
    Any object touching the margin band is rejected (error names the index).
    """
    h, w = dims
    if schema == "onehot_color_shape":
        c = n_colors + N_SHAPES
    elif schema == "occupancy":
        c = 1
    else:
        raise BevError(f"unknown schema {schema!r}")
    if 2 * margin_px >= min(h, w):
        raise BevError(f"margin {margin_px} leaves no interior in dims {dims}")

    grid = np.zeros((h, w, c), dtype=np.float32)
    band = _margin_band(h, w, margin_px)
    objects = tuple(objects)
    for idx, obj in enumerate(objects):
        if schema == "onehot_color_shape" and obj.color >= n_colors:
            raise BevError(f"object {idx}: color {obj.color} >= palette size {n_colors}")
        mask = _footprint_mask(obj, world_to_grid, h, w)
        if np.any(mask & band):
            raise BevError(f"object {idx} footprint intersects the {margin_px}px margin band")
        if schema == "occupancy":
            grid[mask, 0] = 1.0
        else:
            grid[mask, :] = 0.0  # later object wins
            grid[mask, obj.color] = 1.0
            grid[mask, n_colors + SHAPES.index(obj.shape)] = 1.0
    return BevMap(grid, schema, world_to_grid, margin_px, objects, n_colors)


def sample_scene(
    seed: int,
    n_min: int = 3,
    n_max: int = 8,
    n_colors: int = DEFAULT_N_COLORS,
    extent: tuple[tuple[float, float], tuple[float, float]] = ((10.0, 54.0), (10.0, 54.0)),
    radius_range: tuple[float, float] = (2.0, 4.5),
    height_range: tuple[float, float] = (3.0, 8.0),
    max_tries: int = 2000,
) -> list[SceneObject]:
    """Randomly place n_min..n_max non-overlapping objects (seed-deterministic)."""
    if n_min > n_max:
        raise BevError(f"n_min {n_min} > n_max {n_max}")
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    objs: list[SceneObject] = []
    tries = 0
    while len(objs) < n:
        if tries >= max_tries:
            raise BevError(
                f"rejection budget exhausted (seed={seed}, placed {len(objs)}/{n})"
            )
        tries += 1
        r = float(rng.uniform(*radius_range))
        cx = float(rng.uniform(extent[0][0] + r, extent[0][1] - r))
        cy = float(rng.uniform(extent[1][0] + r, extent[1][1] - r))
        shape = SHAPES[int(rng.integers(len(SHAPES)))]
        color = int(rng.integers(n_colors))
        hgt = float(rng.uniform(*height_range))
        if any(
            np.hypot(cx - o.center[0], cy - o.center[1]) < (r + o.footprint_radius)
            for o in objs
        ):
            continue
        objs.append(SceneObject(shape, color, (cx, cy), r, hgt))
    return objs


def crop_window(b: BevMap, w: WindowSpec) -> BevMap:
    """Crop a window; the crop's pixels keep their global world coordinates.

    The crop is a raw sub-grid (no re-rasterization); objects intersecting
    the window are retained, others dropped. The crop declares margin 0.
    """
    h, wid, _ = b.grid.shape
    w.validate_inside(h, wid)
    r0, c0 = w.origin
    wh, ww = w.size
    sub = b.grid[r0 : r0 + wh, c0 : c0 + ww, :].copy()
    w2g = b.world_to_grid.shifted(dcol=c0, drow=r0)
    kept = []
    for o in b.objects:
        gx, gy = b.world_to_grid.world_to_grid(np.asarray(o.center))
        rpx = o.footprint_radius * b.world_to_grid.scale
        if gx + rpx >= c0 and gx - rpx <= c0 + ww and gy + rpx >= r0 and gy - rpx <= r0 + wh:
            kept.append(o)
    return BevMap(sub, b.schema, w2g, 0, tuple(kept), b.n_colors)


def translate(b: BevMap, dx: int, dy: int) -> BevMap:
    """Shift content by (dx cols, dy rows) with zero fill.

    The shift must fit in the margin so content is never clipped. The
    declared margin is kept: it is a canvas property, and shifted content
    may enter the band (pixel sums are preserved, nothing is lost).
    """
    if abs(dx) > b.margin_px or abs(dy) > b.margin_px:
        raise BevError(f"shift ({dx}, {dy}) exceeds margin {b.margin_px}px (would clip content)")
    g = np.zeros_like(b.grid)
    h, w, _ = b.grid.shape
    src_r = slice(max(0, -dy), min(h, h - dy))
    dst_r = slice(max(0, dy), min(h, h + dy))
    src_c = slice(max(0, -dx), min(w, w - dx))
    dst_c = slice(max(0, dx), min(w, w + dx))
    g[dst_r, dst_c, :] = b.grid[src_r, src_c, :]
    s = b.world_to_grid.scale
    objs = tuple(
        replace(o, center=(o.center[0] + dx / s, o.center[1] + dy / s)) for o in b.objects
    )
    return BevMap(g, b.schema, b.world_to_grid, b.margin_px, objs, b.n_colors)


def _rerasterize(b: BevMap, objects) -> BevMap:
    h, w, _ = b.grid.shape
    return rasterize(objects, b.schema, (h, w), b.world_to_grid, b.margin_px, b.n_colors)


def insert(b: BevMap, obj: SceneObject) -> BevMap:
    return _rerasterize(b, b.objects + (obj,))


def remove(b: BevMap, obj_id: int) -> BevMap:
    _check_id(b, obj_id)
    return _rerasterize(b, b.objects[:obj_id] + b.objects[obj_id + 1 :])


def move(b: BevMap, obj_id: int, delta: tuple[float, float]) -> BevMap:
    _check_id(b, obj_id)
    o = b.objects[obj_id]
    moved = replace(o, center=(o.center[0] + delta[0], o.center[1] + delta[1]))
    return _rerasterize(b, b.objects[:obj_id] + (moved,) + b.objects[obj_id + 1 :])


def restyle(b: BevMap, obj_id: int, color: int | None = None, shape: str | None = None) -> BevMap:
    _check_id(b, obj_id)
    o = b.objects[obj_id]
    o = replace(o, color=o.color if color is None else color, shape=o.shape if shape is None else shape)
    return _rerasterize(b, b.objects[:obj_id] + (o,) + b.objects[obj_id + 1 :])


def _check_id(b: BevMap, obj_id: int) -> None:
    if not (0 <= obj_id < len(b.objects)):
        raise BevError(f"unknown object id {obj_id} (have {len(b.objects)} objects)")


def apply_edit(b: BevMap, op: dict) -> BevMap:
    """Dispatch a JSON-style edit payload; see service module."""
    kind = op.get("op")
    if kind == "insert":
        o = op["object"]
        return insert(
            b,
            SceneObject(o["shape"], int(o["color"]), tuple(o["center"]),
                        float(o["footprint_radius"]), float(o["height"])),
        )
    if kind == "remove":
        return remove(b, int(op["id"]))
    if kind == "move":
        return move(b, int(op["id"]), tuple(op["delta"]))
    if kind == "restyle":
        return restyle(b, int(op["id"]), op.get("color"), op.get("shape"))
    raise BevError(f"unknown edit op {kind!r}")


def save_bev(b: BevMap, path) -> None:
    header = {
        "h": b.grid.shape[0],
        "w": b.grid.shape[1],
        "c": b.grid.shape[2],
        "schema": b.schema,
        "world_to_grid": {"scale": b.world_to_grid.scale, "offset": list(b.world_to_grid.offset)},
        "margin_px": b.margin_px,
        "n_colors": b.n_colors,
        "objects": [
            {
                "shape": o.shape,
                "color": o.color,
                "center": list(o.center),
                "footprint_radius": o.footprint_radius,
                "height": o.height,
            }
            for o in b.objects
        ],
    }
    write_container(path, BEV_MAGIC, header, b.grid)


def load_bev(path) -> BevMap:
    header, payload = read_container(path, BEV_MAGIC)
    h, w, c = header["h"], header["w"], header["c"]
    grid = payload.reshape(h, w, c).astype(np.float32)
    w2g = WorldToGrid(header["world_to_grid"]["scale"], tuple(header["world_to_grid"]["offset"]))
    objs = tuple(
        SceneObject(o["shape"], int(o["color"]), tuple(o["center"]),
                    float(o["footprint_radius"]), float(o["height"]))
        for o in header["objects"]
    )
    return BevMap(grid, header["schema"], w2g, int(header["margin_px"]), objs,
                  int(header.get("n_colors", DEFAULT_N_COLORS)))


def bev_json_summary(b: BevMap) -> dict:
    return {
        "h": b.grid.shape[0],
        "w": b.grid.shape[1],
        "c": b.grid.shape[2],
        "schema": b.schema,
        "margin_px": b.margin_px,
        "n_objects": len(b.objects),
        "objects": [
            {
                "id": i,
                "shape": o.shape,
                "color": o.color,
                "center": list(o.center),
                "footprint_radius": o.footprint_radius,
                "height": o.height,
            }
            for i, o in enumerate(b.objects)
        ],
    }

"""BEV-conditioned equivariant U-Net generator and field MLP.

The generator turns (Fourier position features, BEV map, latent style code)
into a 2D feature plane; the plane is lifted to 3D with a positional encoding
of height and decoded pointwise into (color, density) by a small MLP.

Pure numpy forward pass with seeded weights: there is no training here, the
architecture's equivariance properties are the object of study and they hold
(or fail, for the ablation switches) regardless of the weight values.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .bevmap import BevMap, WindowSpec
from .container import WEIGHTS_MAGIC
from .dsp import (
    FeatureGrid,
    FirFilter,
    FourierConfig,
    PeConfig,
    bilinear_sample,
    design_lowpass,
    downsample,
    fourier_grid,
    isotropic_fourier_config,
    pe,
    upsample,
)
from .renderer import RadianceField

LEAKY_SLOPE = 0.2


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    input_res: int = 64
    input_channels: int = 64  # Fourier channels (2m)
    n_levels: int = 4
    out_channels: int = 32
    hidden_channels: int = 64
    bev_channels: int = 11
    bev_feat_channels: int = 32
    modconv_kernel: int = 3
    sel_kernel: int = 1
    latent_dim: int = 64
    mlp_hidden: int = 64
    pe_n_freqs: int = 4
    pe_base: float = 0.125
    lift_mode: str = "outer_product"  # | "concat"
    use_lowpass: bool = True
    use_sel: bool = True
    use_view_dirs: bool = False
    lowpass_half_width: int = 2
    fourier_f_min: float = 0.015
    fourier_f_max: float = 0.25
    z_range: tuple[float, float] = (0.0, 16.0)
    pad_px: int = 0  # zero-padding ring around the BEV canvas before the U-Net

    def __post_init__(self):
        if self.input_res % (2**self.n_levels) != 0:
            raise GeneratorError(
                f"input_res {self.input_res} not divisible by 2^{self.n_levels}"
            )
        if self.pad_px < 0 or (2 * self.pad_px) % (2**self.n_levels) != 0:
            raise GeneratorError(
                f"pad_px {self.pad_px} must keep the padded canvas divisible "
                f"by 2^{self.n_levels}"
            )
        if self.input_channels % 2 != 0:
            raise GeneratorError("input_channels must be even (cos/sin pairs)")
        if self.lift_mode not in ("outer_product", "concat"):
            raise GeneratorError(f"unknown lift_mode {self.lift_mode!r}")

    @property
    def bottleneck_res(self) -> int:
        return self.input_res // (2**self.n_levels)

    @property
    def pe_cfg(self) -> PeConfig:
        return PeConfig(self.pe_n_freqs, self.pe_base)

    @property
    def lift_dim(self) -> int:
        d = 2 * self.pe_n_freqs
        if self.lift_mode == "outer_product":
            return self.out_channels * d
        return self.out_channels + d

    def fourier_config(self) -> FourierConfig:
        return isotropic_fourier_config(
            self.input_channels // 2, self.fourier_f_min, self.fourier_f_max
        )

    @staticmethod
    def desk_scale(**overrides) -> "GeneratorConfig":
        return GeneratorConfig(**overrides)

    @staticmethod
    def paper_scale(**overrides) -> "GeneratorConfig":
        base = dict(input_res=256, input_channels=256, hidden_channels=256,
                    latent_dim=512, mlp_hidden=64)
        base.update(overrides)
        return GeneratorConfig(**base)


@dataclass(frozen=True)
class LatentCode:
    s: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.s)):
            raise GeneratorError("latent code must be finite")


def sample_latent(cfg: GeneratorConfig, seed: int) -> LatentCode:
    return LatentCode(np.random.default_rng(seed).standard_normal(cfg.latent_dim))


@dataclass
class GeneratorParams:
    config: GeneratorConfig
    tensors: dict[str, np.ndarray]
    init_seed: int


def _enc_in_channels(cfg: GeneratorConfig, level: int) -> int:
    return cfg.input_channels if level == 0 else cfg.hidden_channels


def _skip_channels(cfg: GeneratorConfig, dec_level: int) -> int:
    # dec level i (0 = lowest res) concatenates enc output (n_levels-2-i),
    # except the last decoder which reuses the Fourier input as its skip
    if dec_level == cfg.n_levels - 1:
        return cfg.input_channels
    return cfg.hidden_channels


def init_params(cfg: GeneratorConfig, seed: int) -> GeneratorParams:
    """Fan-in-scaled random init; deterministic given (cfg, seed).

    Tensors are float32 so weight files round-trip bit-exactly.
    """
    rng = np.random.default_rng(seed)
    t: dict[str, np.ndarray] = {}

    def conv(name, kh, kw, cin, cout, gain=2.0):
        std = np.sqrt(gain / (kh * kw * cin))
        t[f"{name}.w"] = (rng.standard_normal((kh, kw, cin, cout)) * std).astype(np.float32)
        t[f"{name}.b"] = np.zeros(cout, dtype=np.float32)

    def modconv(name, cin, cout):
        k = cfg.modconv_kernel
        t[f"{name}.w"] = rng.standard_normal((k, k, cin, cout)).astype(np.float32)
        t[f"{name}.b"] = np.zeros(cout, dtype=np.float32)
        std = 1.0 / np.sqrt(cfg.latent_dim)
        t[f"{name}.affine_w"] = (rng.standard_normal((cfg.latent_dim, cin)) * std).astype(np.float32)
        t[f"{name}.affine_b"] = np.ones(cin, dtype=np.float32)

    def sel(name, c):
        k = cfg.sel_kernel
        std = 0.2 / np.sqrt(k * k * cfg.bev_feat_channels)
        for head in ("gamma", "beta"):
            t[f"{name}.{head}_w"] = (
                rng.standard_normal((k, k, cfg.bev_feat_channels, c)) * std
            ).astype(np.float32)
            t[f"{name}.{head}_b"] = np.zeros(c, dtype=np.float32)

    conv("bev_enc.conv0", 3, 3, cfg.bev_channels, cfg.bev_feat_channels)
    conv("bev_enc.conv1", 3, 3, cfg.bev_feat_channels, cfg.bev_feat_channels)
    for i in range(cfg.n_levels):
        cin = _enc_in_channels(cfg, i)
        sel(f"enc{i}.sel", cin)
        modconv(f"enc{i}.conv0", cin, cfg.hidden_channels)
        modconv(f"enc{i}.conv1", cfg.hidden_channels, cfg.hidden_channels)
    for i in range(cfg.n_levels):
        cin = cfg.hidden_channels + _skip_channels(cfg, i)
        sel(f"dec{i}.sel", cin)
        modconv(f"dec{i}.conv0", cin, cfg.hidden_channels)
        modconv(f"dec{i}.conv1", cfg.hidden_channels, cfg.hidden_channels)
    conv("proj", 1, 1, cfg.hidden_channels, cfg.out_channels, gain=1.0)

    def dense(name, cin, cout, gain=2.0):
        std = np.sqrt(gain / cin)
        t[f"{name}.w"] = (rng.standard_normal((cin, cout)) * std).astype(np.float32)
        t[f"{name}.b"] = np.zeros(cout, dtype=np.float32)

    dense("mlp.fc0", cfg.lift_dim, cfg.mlp_hidden)
    dense("mlp.fc1", cfg.mlp_hidden, cfg.mlp_hidden)
    dense("mlp.sigma", cfg.mlp_hidden, 1, gain=1.0)
    color_in = cfg.mlp_hidden + (3 if cfg.use_view_dirs else 0)
    dense("mlp.color", color_in, 3, gain=1.0)
    return GeneratorParams(cfg, t, seed)


# --- primitive layers ---


def leaky_relu(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, x, LEAKY_SLOPE * x)


def conv2d_same(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """'same' zero-padded convolution; x (H, W, Cin), w (kh, kw, Cin, Cout)."""
    kh, kw, cin, cout = w.shape
    if x.shape[2] != cin:
        raise GeneratorError(f"channel mismatch: input {x.shape[2]} vs weights {cin}")
    ph, pw = kh // 2, kw // 2
    if kh == 1 and kw == 1:
        y = x @ w.reshape(cin, cout)
    else:
        xp = np.pad(x, ((ph, ph), (pw, pw), (0, 0)))
        win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(0, 1))
        # win: (H, W, Cin, kh, kw) -> align with w as (Cin, kh, kw, Cout)
        h_, w_ = x.shape[0], x.shape[1]
        patches = win.reshape(h_ * w_, cin * kh * kw)
        wmat = w.transpose(2, 0, 1, 3).reshape(cin * kh * kw, cout)
        y = (patches @ wmat).reshape(h_, w_, cout)
    if b is not None:
        y = y + b
    return y


def instance_norm(x: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    mean = x.mean(axis=(0, 1), keepdims=True)
    std = x.std(axis=(0, 1), keepdims=True)
    return (x - mean) / (std + eps)


def bev_encode(params: GeneratorParams, b: BevMap) -> FeatureGrid:
    """Two 3x3 convolutions with a leaky nonlinearity between; dims preserved."""
    t = params.tensors
    x = b.grid.astype(np.float64)
    x = leaky_relu(conv2d_same(x, t["bev_enc.conv0.w"], t["bev_enc.conv0.b"]))
    x = conv2d_same(x, t["bev_enc.conv1.w"], t["bev_enc.conv1.b"])
    return FeatureGrid(x, b.world_to_grid)


def sel(a: np.ndarray, bev_feat: np.ndarray, t: dict, name: str) -> np.ndarray:
    """Instance-normalize a, then scale/shift per pixel from the BEV features:
    out = (1 + gamma(B)) * norm(a) + beta(B)."""
    if a.shape[:2] != bev_feat.shape[:2]:
        raise GeneratorError(
            f"SEL resolution mismatch: {a.shape[:2]} vs {bev_feat.shape[:2]}"
        )
    gamma = conv2d_same(bev_feat, t[f"{name}.gamma_w"], t[f"{name}.gamma_b"])
    beta = conv2d_same(bev_feat, t[f"{name}.beta_w"], t[f"{name}.beta_b"])
    return (1.0 + gamma) * instance_norm(a) + beta


def modconv(a: np.ndarray, s: LatentCode, t: dict, name: str) -> np.ndarray:
    """Style-modulated, demodulated convolution with bias and leaky relu."""
    style = s.s @ t[f"{name}.affine_w"] + t[f"{name}.affine_b"]  # (Cin,)
    w = t[f"{name}.w"].astype(np.float64) * style[None, None, :, None]
    denom = np.sqrt(np.sum(w * w, axis=(0, 1, 2), keepdims=True) + 1e-8)
    w = w / denom
    return leaky_relu(conv2d_same(a, w, t[f"{name}.b"]))


def _level_fir(cfg: GeneratorConfig, dim: int) -> FirFilter:
    """Factor-2 low-pass whose support fits the grid being filtered."""
    hw = cfg.lowpass_half_width
    while hw > 1 and 4 * hw + 1 > dim:
        hw -= 1
    return design_lowpass(0.25, half_width=hw)


def _down2(g: FeatureGrid, cfg: GeneratorConfig) -> FeatureGrid:
    if cfg.use_lowpass:
        return downsample(g, 2, lowpass=True, fir=_level_fir(cfg, g.data.shape[0]))
    return downsample(g, 2, lowpass=False)


def unet_forward(
    params: GeneratorParams,
    cfg: GeneratorConfig,
    b: BevMap,
    s: LatentCode,
    window: WindowSpec,
) -> FeatureGrid:
    """Full generator forward pass -> (input_res, input_res, out_channels).

    The Fourier input is evaluated over the window's GLOBAL coordinates, so
    sliding the window phase-shifts the input; everything downstream is
    (approximately) shift-equivariant, exactly to the degree the config's
    anti-aliasing switches allow.
    """
    h, w, c = b.grid.shape
    if (h, w) != (cfg.input_res, cfg.input_res):
        raise GeneratorError(f"BEV dims {(h, w)} != input_res {cfg.input_res}")
    if c != cfg.bev_channels:
        raise GeneratorError(f"BEV channels {c} != configured {cfg.bev_channels}")
    if window.size != (cfg.input_res, cfg.input_res):
        raise GeneratorError(f"window size {window.size} != input_res")
    t = params.tensors

    if cfg.pad_px:
        # widen the canvas with a zero ring so the convolutions' implicit
        # boundary (fixed in canvas coordinates, hence equivariance-breaking)
        # sits away from the content; the output plane simply covers more area
        p = cfg.pad_px
        grid = np.pad(b.grid, ((p, p), (p, p), (0, 0)))
        b = BevMap(grid, b.schema, b.world_to_grid.shifted(dcol=-p, drow=-p),
                   b.margin_px + p, b.objects, b.n_colors)
        # in padded pixel coordinates the ring's top-left lands at the old
        # window origin (old pixel k is padded pixel k + p)
        window = WindowSpec(window.origin, (h + 2 * p, w + 2 * p))

    gamma_in = fourier_grid(cfg.fourier_config(), window, b.world_to_grid)
    plane_w2g = gamma_in.world_to_grid

    bev_feat = bev_encode(params, b)
    pyramid = {bev_feat.data.shape[0]: bev_feat}
    g = bev_feat
    for _ in range(cfg.n_levels):
        g = _down2(g, cfg)
        pyramid[g.data.shape[0]] = g

    x = gamma_in
    skips: list[np.ndarray] = [gamma_in.data]
    for i in range(cfg.n_levels):
        x = _down2(x, cfg)
        a = x.data
        if cfg.use_sel:
            a = sel(a, pyramid[a.shape[0]].data, t, f"enc{i}.sel")
        a = modconv(a, s, t, f"enc{i}.conv0")
        a = modconv(a, s, t, f"enc{i}.conv1")
        x = FeatureGrid(a, x.world_to_grid)
        if i < cfg.n_levels - 1:
            skips.append(a)

    for i in range(cfg.n_levels):
        x = upsample(x, 2)
        a = np.concatenate([x.data, skips[cfg.n_levels - 1 - i]], axis=2)
        if cfg.use_sel:
            a = sel(a, pyramid[a.shape[0]].data, t, f"dec{i}.sel")
        a = modconv(a, s, t, f"dec{i}.conv0")
        a = modconv(a, s, t, f"dec{i}.conv1")
        x = FeatureGrid(a, x.world_to_grid)

    out = conv2d_same(x.data, t["proj.w"], t["proj.b"])
    return FeatureGrid(out, plane_w2g)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60, 60)))


def lift_and_query(
    plane: FeatureGrid,
    params: GeneratorParams,
    x,
    y,
    z,
    dirs: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample the plane at (x, y), combine with pe(z), decode with the MLP.

    Returns (colors in [0,1]^3, densities >= 0), leading shape of x.
    """
    cfg = params.config
    t = params.tensors
    feats = bilinear_sample(plane, x, y)  # (..., C)
    pz = pe(np.asarray(z, dtype=np.float64), cfg.pe_cfg)  # (..., 2L)
    if cfg.lift_mode == "outer_product":
        f = (feats[..., :, None] * pz[..., None, :]).reshape(feats.shape[:-1] + (-1,))
    else:
        f = np.concatenate([feats, pz], axis=-1)
    h = leaky_relu(f @ t["mlp.fc0.w"] + t["mlp.fc0.b"])
    h = leaky_relu(h @ t["mlp.fc1.w"] + t["mlp.fc1.b"])
    sigma = _softplus(h @ t["mlp.sigma.w"] + t["mlp.sigma.b"])[..., 0]
    if cfg.use_view_dirs:
        if dirs is None:
            raise GeneratorError("config uses view dirs but none were given")
        h = np.concatenate([h, np.asarray(dirs, dtype=np.float64)], axis=-1)
    color = _sigmoid(h @ t["mlp.color.w"] + t["mlp.color.b"])
    return color, sigma


@dataclass
class NeuralField(RadianceField):
    """RadianceField over a generated feature plane; the plane is computed
    once and shared read-only across queries."""

    plane: FeatureGrid
    params: GeneratorParams

    def query(self, points: np.ndarray, dirs: np.ndarray | None = None):
        p = np.asarray(points, dtype=np.float64)
        return lift_and_query(self.plane, self.params, p[:, 0], p[:, 1], p[:, 2], dirs)


def neural_field(
    params: GeneratorParams,
    cfg: GeneratorConfig,
    b: BevMap,
    s: LatentCode,
    window: WindowSpec,
) -> NeuralField:
    return NeuralField(unet_forward(params, cfg, b, s, window), params)


# --- weight serialization ---


def save_params(params: GeneratorParams, path) -> None:
    names = sorted(params.tensors)
    manifest = {
        "config": asdict(params.config),
        "init_seed": params.init_seed,
        "tensors": [],
    }
    offset = 0
    for n in names:
        arr = params.tensors[n]
        manifest["tensors"].append({"name": n, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
    hdr = json.dumps(manifest).encode("utf-8")
    import struct

    with open(path, "wb") as f:
        f.write(WEIGHTS_MAGIC)
        f.write(struct.pack("<I", len(hdr)))
        f.write(hdr)
        for n in names:
            f.write(np.ascontiguousarray(params.tensors[n], dtype="<f4").tobytes())


def load_params(path) -> GeneratorParams:
    import struct

    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != WEIGHTS_MAGIC:
            raise GeneratorError(f"bad weight-file magic {magic!r}")
        (hlen,) = struct.unpack("<I", f.read(4))
        manifest = json.loads(f.read(hlen).decode("utf-8"))
        payload = np.frombuffer(f.read(), dtype="<f4")
    cfg_d = manifest["config"]
    cfg_d["z_range"] = tuple(cfg_d["z_range"])
    cfg = GeneratorConfig(**cfg_d)
    tensors = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape))
        tensors[entry["name"]] = payload[entry["offset"] : entry["offset"] + n].reshape(shape).copy()
    return GeneratorParams(cfg, tensors, manifest["init_seed"])

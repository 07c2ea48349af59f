import numpy as np
import pytest

from bevfield import bevmap as bm
from bevfield import generator as gen
from bevfield.bevmap import WindowSpec
from bevfield.dsp import FeatureGrid, pe
from bevfield.bevmap import WorldToGrid

CFG = gen.GeneratorConfig.desk_scale()


def small_cfg(**kw):
    base = dict(input_res=32, input_channels=16, hidden_channels=16,
                bev_feat_channels=8, latent_dim=16, mlp_hidden=16, n_levels=3)
    base.update(kw)
    return gen.GeneratorConfig(**base)


def make_bev(cfg, margin=6, seed=3):
    objs = bm.sample_scene(seed, n_max=4,
                           extent=((margin + 2.0, cfg.input_res - margin - 2.0),) * 2,
                           radius_range=(1.5, 2.5))
    return bm.rasterize(objs, "onehot_color_shape", (cfg.input_res, cfg.input_res),
                        margin_px=margin)


def test_init_params_deterministic_and_seed_sensitivity():
    cfg = small_cfg()
    a = gen.init_params(cfg, 0)
    b = gen.init_params(cfg, 0)
    assert set(a.tensors) == set(b.tensors)
    for k in a.tensors:
        assert np.array_equal(a.tensors[k], b.tensors[k])
    c = gen.init_params(cfg, 1)
    assert any(not np.array_equal(a.tensors[k], c.tensors[k]) for k in a.tensors)


def test_params_roundtrip(tmp_path):
    cfg = small_cfg()
    p = gen.init_params(cfg, 7)
    f = tmp_path / "w.berf"
    gen.save_params(p, f)
    q = gen.load_params(f)
    assert q.config == cfg and q.init_seed == 7
    for k in p.tensors:
        assert np.array_equal(p.tensors[k], q.tensors[k])
    gen.save_params(q, tmp_path / "w2.berf")
    assert (tmp_path / "w2.berf").read_bytes() == f.read_bytes()


def test_bev_encode_zero_input_bias_response():
    cfg = small_cfg()
    params = gen.init_params(cfg, 0)
    b = bm.rasterize([], "onehot_color_shape", (cfg.input_res, cfg.input_res), margin_px=4)
    out = gen.bev_encode(params, b)
    assert out.data.shape == (cfg.input_res, cfg.input_res, cfg.bev_feat_channels)
    interior = out.data[2:-2, 2:-2]
    assert np.max(np.abs(interior - interior[0, 0])) < 1e-9


def test_bev_encode_shift_equivariant_interior():
    cfg = small_cfg()
    params = gen.init_params(cfg, 0)
    b = make_bev(cfg)
    t = bm.translate(b, 3, 0)
    e0 = gen.bev_encode(params, b).data
    e1 = gen.bev_encode(params, t).data
    assert np.max(np.abs(e1[4:-4, 7:-4] - e0[4:-4, 4:-7])) < 1e-5


def test_sel_zero_heads_and_constant_bev():
    cfg = small_cfg()
    params = gen.init_params(cfg, 0)
    t = dict(params.tensors)
    for head in ("gamma", "beta"):
        t[f"enc0.sel.{head}_w"] = np.zeros_like(t[f"enc0.sel.{head}_w"])
        t[f"enc0.sel.{head}_b"] = np.zeros_like(t[f"enc0.sel.{head}_b"])
    rng = np.random.default_rng(0)
    a = rng.standard_normal((16, 16, cfg.input_channels))
    bf = rng.standard_normal((16, 16, cfg.bev_feat_channels))
    out = gen.sel(a, bf, t, "enc0.sel")
    assert np.array_equal(out, gen.instance_norm(a))
    # spatially constant bev features -> spatially constant gamma/beta
    t2 = params.tensors
    bf_const = np.tile(rng.standard_normal((1, 1, cfg.bev_feat_channels)), (16, 16, 1))
    g = gen.conv2d_same(bf_const, t2["enc0.sel.gamma_w"], t2["enc0.sel.gamma_b"])
    assert np.max(np.abs(g - g[0, 0])) < 1e-12


def test_sel_instance_norm_stats():
    cfg = small_cfg()
    params = gen.init_params(cfg, 1)
    rng = np.random.default_rng(5)
    a = rng.standard_normal((32, 32, cfg.input_channels)) * 3 + 1
    bf = rng.standard_normal((32, 32, cfg.bev_feat_channels))
    t = params.tensors
    out = gen.sel(a, bf, t, "enc0.sel")
    gamma = gen.conv2d_same(bf, t["enc0.sel.gamma_w"], t["enc0.sel.gamma_b"])
    beta = gen.conv2d_same(bf, t["enc0.sel.beta_w"], t["enc0.sel.beta_b"])
    n = gen.instance_norm(a)
    assert np.max(np.abs(out - ((1 + gamma) * n + beta))) < 1e-12
    assert abs(n.mean()) < 1e-3 and abs(n.std() - 1) < 1e-3


def test_sel_resolution_mismatch():
    cfg = small_cfg()
    params = gen.init_params(cfg, 0)
    with pytest.raises(gen.GeneratorError, match="resolution"):
        gen.sel(np.zeros((8, 8, cfg.input_channels)),
                np.zeros((4, 4, cfg.bev_feat_channels)), params.tensors, "enc0.sel")


def test_modconv_identity_modulation():
    cfg = small_cfg()
    params = gen.init_params(cfg, 2)
    t = dict(params.tensors)
    # force affine output to all-ones and unit-norm weights per out channel
    t["enc0.conv0.affine_w"] = np.zeros_like(t["enc0.conv0.affine_w"])
    t["enc0.conv0.affine_b"] = np.ones_like(t["enc0.conv0.affine_b"])
    w = t["enc0.conv0.w"].astype(np.float64)
    w = w / np.sqrt(np.sum(w * w, axis=(0, 1, 2), keepdims=True))
    t["enc0.conv0.w"] = w
    rng = np.random.default_rng(0)
    a = rng.standard_normal((16, 16, cfg.input_channels))
    s = gen.sample_latent(cfg, 0)
    out = gen.modconv(a, s, t, "enc0.conv0")
    # demodulation divides by sqrt(1 + eps): nearly plain convolution
    plain = gen.leaky_relu(gen.conv2d_same(a, w, t["enc0.conv0.b"]))
    assert np.max(np.abs(out - plain)) < 1e-6


def test_modconv_style_scale_invariance():
    cfg = small_cfg()
    params = gen.init_params(cfg, 2)
    t = dict(params.tensors)
    t["enc0.conv0.affine_b"] = np.zeros_like(t["enc0.conv0.affine_b"])  # proportional styles
    rng = np.random.default_rng(1)
    a = rng.standard_normal((16, 16, cfg.input_channels))
    s1 = gen.LatentCode(rng.standard_normal(cfg.latent_dim))
    s2 = gen.LatentCode(3.7 * s1.s)
    o1 = gen.modconv(a, s1, t, "enc0.conv0")
    o2 = gen.modconv(a, s2, t, "enc0.conv0")
    assert np.max(np.abs(o1 - o2)) < 1e-6


def test_modconv_shift_equivariant_interior():
    cfg = small_cfg()
    params = gen.init_params(cfg, 2)
    rng = np.random.default_rng(3)
    a = np.zeros((24, 24, cfg.input_channels))
    a[8:16, 8:16] = rng.standard_normal((8, 8, cfg.input_channels))
    s = gen.sample_latent(cfg, 0)
    o0 = gen.modconv(a, s, params.tensors, "enc0.conv0")
    a1 = np.zeros_like(a)
    a1[:, 2:] = a[:, :-2]
    o1 = gen.modconv(a1, s, params.tensors, "enc0.conv0")
    assert np.max(np.abs(o1[2:-2, 4:-2] - o0[2:-2, 2:-4])) < 1e-5


def test_unet_forward_shape_and_purity():
    cfg = small_cfg()
    params = gen.init_params(cfg, 0)
    b = make_bev(cfg)
    s = gen.sample_latent(cfg, 0)
    w = WindowSpec((0, 0), (cfg.input_res, cfg.input_res))
    out1 = gen.unet_forward(params, cfg, b, s, w)
    out2 = gen.unet_forward(params, cfg, b, s, w)
    assert out1.data.shape == (cfg.input_res, cfg.input_res, cfg.out_channels)
    assert np.array_equal(out1.data, out2.data)


def test_unet_ablation_switches_preserve_shape():
    b = None
    for flags in ((True, True), (False, True), (True, False)):
        cfg = small_cfg(use_lowpass=flags[0], use_sel=flags[1])
        params = gen.init_params(cfg, 0)
        if b is None:
            b = make_bev(cfg)
        s = gen.sample_latent(cfg, 0)
        w = WindowSpec((0, 0), (cfg.input_res, cfg.input_res))
        out = gen.unet_forward(params, cfg, b, s, w)
        assert out.data.shape == (cfg.input_res, cfg.input_res, cfg.out_channels)


def test_unet_window_shift_equivariance_improves_with_lowpass():
    # sliding the window over identical content should ideally reproduce the
    # same local plane; low-pass filtering must shrink the deviation
    res = {}
    for lp in (True, False):
        cfg = small_cfg(use_lowpass=lp)
        params = gen.init_params(cfg, 0)
        b = make_bev(cfg)
        s = gen.sample_latent(cfg, 0)
        w0 = WindowSpec((0, 0), (cfg.input_res, cfg.input_res))
        k = 8
        out0 = gen.unet_forward(params, cfg, b, s, w0).data
        out1 = gen.unet_forward(params, cfg, b, s, WindowSpec((0, k), (cfg.input_res, cfg.input_res))).data
        border = 8
        res[lp] = np.sqrt(np.mean((out1 - out0)[border:-border, border:-border] ** 2))
    assert res[True] < res[False]


def test_lift_and_query_activations():
    cfg = small_cfg()
    params = gen.init_params(cfg, 0)
    rng = np.random.default_rng(0)
    plane = FeatureGrid(rng.standard_normal((8, 8, cfg.out_channels)), WorldToGrid())
    xs, ys = rng.uniform(0, 8, 500), rng.uniform(0, 8, 500)
    zs = rng.uniform(*cfg.z_range, 500)
    color, sigma = gen.lift_and_query(plane, params, xs, ys, zs)
    assert color.shape == (500, 3) and sigma.shape == (500,)
    assert np.all((color >= 0) & (color <= 1))
    assert np.all(sigma >= 0)
    # softplus(0) = ln 2 identity
    assert np.isclose(gen._softplus(np.array([0.0]))[0], np.log(2.0))


def test_lift_query_pe_period_alignment():
    cfg = small_cfg()
    params = gen.init_params(cfg, 0)
    rng = np.random.default_rng(1)
    plane = FeatureGrid(rng.standard_normal((8, 8, cfg.out_channels)), WorldToGrid())
    z0 = 1.3
    z1 = z0 + 2.0 / cfg.pe_base  # exact pe period at every band
    assert np.max(np.abs(pe(z0, cfg.pe_cfg) - pe(z1, cfg.pe_cfg))) < 1e-9
    c0, s0 = gen.lift_and_query(plane, params, 3.0, 3.0, z0)
    c1, s1 = gen.lift_and_query(plane, params, 3.0, 3.0, z1)
    assert np.max(np.abs(c0 - c1)) < 1e-9 and abs(s0 - s1) < 1e-9


def test_neural_field_consistency_and_clamping():
    cfg = small_cfg()
    params = gen.init_params(cfg, 0)
    b = make_bev(cfg)
    s = gen.sample_latent(cfg, 1)
    w = WindowSpec((0, 0), (cfg.input_res, cfg.input_res))
    f1 = gen.neural_field(params, cfg, b, s, w)
    f2 = gen.neural_field(params, cfg, b, s, w)
    pts = np.random.default_rng(0).uniform(0, 32, (50, 3))
    c1, g1 = f1.query(pts)
    c2, g2 = f2.query(pts)
    assert np.array_equal(c1, c2) and np.array_equal(g1, g2)
    # far outside the plane footprint: clamped-border behavior
    far = np.array([[-1e6, -1e6, 2.0]])
    corner = np.array([[-1e3, -1e3, 2.0]])
    cf, sf = f1.query(far)
    cc, sc = f1.query(corner)
    assert np.allclose(cf, cc) and np.allclose(sf, sc)


def test_config_validation():
    with pytest.raises(gen.GeneratorError):
        gen.GeneratorConfig(input_res=60)
    with pytest.raises(gen.GeneratorError):
        gen.GeneratorConfig(lift_mode="tensor")
    assert gen.GeneratorConfig.paper_scale().bottleneck_res == 16
    assert CFG.bottleneck_res == 4


def test_lift_modes_dimensions():
    for mode in ("outer_product", "concat"):
        cfg = small_cfg(lift_mode=mode)
        params = gen.init_params(cfg, 0)
        assert params.tensors["mlp.fc0.w"].shape[0] == cfg.lift_dim

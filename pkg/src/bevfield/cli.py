"""Batch entry points: scene generation, rendering, traversal/stitching,
equivariance scoring, ablation sweeps, and the studio server.

Every command resolves its parameters (flags, optionally overridden by a
--config JSON file), runs, and writes a run manifest next to its outputs.
Re-running a command with `--config <manifest>` reproduces the run exactly:
all randomness flows from explicit seeds, never from the environment.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import bevmap as bm
from . import stitcher as st
from .generator import (GeneratorConfig, init_params, load_params, neural_field,
                        sample_latent, save_params)
from .metrics import eqt, neural_generator, procedural_generator
from .renderer import bev_procedural_field, render_topdown, save_png


def _resolve(command: str, flags: dict, config_path: str | None) -> dict:
    """Flag values, overridden by a --config JSON file (or a prior manifest)."""
    params = dict(flags)
    if config_path:
        doc = json.loads(Path(config_path).read_text())
        if "params" in doc and "command" in doc:  # a manifest from a prior run
            if doc["command"] != command:
                raise click.ClickException(
                    f"manifest is for {doc['command']!r}, not {command!r}")
            doc = doc["params"]
        unknown = set(doc) - set(params)
        if unknown:
            raise click.ClickException(f"unknown config keys: {sorted(unknown)}")
        params.update(doc)
    return params


def _write_manifest(command: str, params: dict, outputs: list, t0: float, out_dir: Path):
    manifest = {
        "command": command,
        "params": params,
        "engine_version": __version__,
        "outputs": [str(o) for o in outputs],
        "elapsed_s": round(time.time() - t0, 3),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def _load_bev_checked(path: str) -> bm.BevMap:
    try:
        return bm.load_bev(path)
    except Exception as e:
        raise click.ClickException(f"cannot read BEV file {path}: {e}")


def _gen_config_for(res: int) -> GeneratorConfig:
    n_levels = int(np.clip(int(np.log2(res)) - 3, 1, 4))
    return GeneratorConfig(input_res=res, n_levels=n_levels)


def _field_for(bev: bm.BevMap, mode: str, weights: str | None, init_seed: int,
               latent_seed: int, window: bm.WindowSpec | None = None):
    if mode == "procedural":
        return bev_procedural_field(bev), 20.0
    if mode != "neural":
        raise click.ClickException(f"unknown mode {mode!r}")
    h, w, _ = bev.grid.shape
    if window is None:
        window = bm.WindowSpec((0, 0), (h, w))
    if weights:
        params = load_params(weights)
        cfg = params.config
    else:
        cfg = _gen_config_for(window.size[0])
        params = init_params(cfg, init_seed)
    latent = sample_latent(cfg, latent_seed)
    return neural_field(params, cfg, bev, latent, window), cfg.z_range[1]


@click.group()
def main():
    """BEV-conditioned radiance field toolkit."""


common_seed = click.option("--seed", type=int, default=0, show_default=True)
common_out = click.option("--out", type=click.Path(), required=True)
common_threads = click.option("--threads", type=int, default=1, show_default=True,
                              help="worker cap (commands are single-process)")
common_config = click.option("--config", "config_path", type=click.Path(exists=True),
                             default=None, help="JSON overrides (or a prior manifest)")


@main.command("gen-bev")
@common_seed
@common_out
@common_threads
@common_config
@click.option("--n-min", type=int, default=3, show_default=True)
@click.option("--n-max", type=int, default=8, show_default=True)
@click.option("--height", "h", type=int, default=64, show_default=True)
@click.option("--width", "w", type=int, default=64, show_default=True)
@click.option("--margin", type=int, default=8, show_default=True)
@click.option("--schema", default="onehot_color_shape", show_default=True)
@click.option("--r-min", type=float, default=2.0, show_default=True)
@click.option("--r-max", type=float, default=4.5, show_default=True)
def gen_bev(seed, out, threads, config_path, n_min, n_max, h, w, margin, schema,
            r_min, r_max):
    """Sample a random scene and write it as a .bev file."""
    t0 = time.time()
    p = _resolve("gen-bev", dict(seed=seed, out=out, threads=threads, n_min=n_min,
                                 n_max=n_max, h=h, w=w, margin=margin, schema=schema,
                                 r_min=r_min, r_max=r_max),
                 config_path)
    lo = p["margin"] + p["r_max"] + 0.5
    try:
        objs = bm.sample_scene(p["seed"], n_min=p["n_min"], n_max=p["n_max"],
                               extent=((lo, p["w"] - lo), (lo, p["h"] - lo)),
                               radius_range=(p["r_min"], p["r_max"]))
        bev = bm.rasterize(objs, p["schema"], (p["h"], p["w"]), margin_px=p["margin"])
        out_path = Path(p["out"])
        out_path.parent.mkdir(parents=True, exist_ok=True)
        bm.save_bev(bev, out_path)
    except (bm.BevError, OSError) as e:
        raise click.ClickException(str(e))
    m = _write_manifest("gen-bev", p, [out_path], t0, out_path.parent)
    click.echo(f"wrote {out_path} ({len(objs)} objects); manifest {m}")


@main.command("render")
@common_seed
@common_out
@common_threads
@common_config
@click.option("--bev", "bev_path", type=click.Path(exists=True), required=True)
@click.option("--mode", type=click.Choice(["procedural", "neural"]),
              default="procedural", show_default=True)
@click.option("--weights", type=click.Path(exists=True), default=None)
@click.option("--init-seed", type=int, default=None,
              help="initialize fresh weights (neural mode without --weights)")
@click.option("--width", "w", type=int, default=256, show_default=True)
@click.option("--height", "h", type=int, default=256, show_default=True)
@click.option("--ssaa", type=int, default=1, show_default=True)
@click.option("--n-samples", type=int, default=32, show_default=True)
def render(seed, out, threads, config_path, bev_path, mode, weights, init_seed,
           w, h, ssaa, n_samples):
    """Render a .bev top-down to PNG (procedural oracle or neural field)."""
    t0 = time.time()
    p = _resolve("render", dict(seed=seed, out=out, threads=threads, bev=bev_path,
                                mode=mode, weights=weights, init_seed=init_seed,
                                w=w, h=h, ssaa=ssaa, n_samples=n_samples), config_path)
    if p["mode"] == "neural" and not p["weights"] and p["init_seed"] is None:
        raise click.ClickException("neural mode needs --weights or --init-seed")
    bev = _load_bev_checked(p["bev"])
    field, z_top = _field_for(bev, p["mode"], p["weights"], p["init_seed"] or 0,
                              p["seed"])
    gh, gw, _ = bev.grid.shape
    w2g = bev.world_to_grid
    x0, y0 = w2g.grid_to_world(np.array([0.0, 0.0]))
    ppw = p["w"] / (gw / w2g.scale)
    img = render_topdown(field, float(x0), float(y0), ppw, p["w"], p["h"],
                         p["n_samples"], z_top=z_top, ssaa=p["ssaa"])
    out_path = Path(p["out"])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_png(img, out_path)
    m = _write_manifest("render", p, [out_path], t0, out_path.parent)
    click.echo(f"wrote {out_path}; manifest {m}")


def _stitch_run(command, seed, out, threads, config_path, bev_path, mode, weights,
                init_seed, window_w, n_step, frame_w, frame_h, f_norm, rig_mode,
                n_samples, do_stitch):
    t0 = time.time()
    p = _resolve(command, dict(seed=seed, out=out, threads=threads, bev=bev_path,
                               mode=mode, weights=weights, init_seed=init_seed,
                               window_w=window_w, n_step=n_step, frame_w=frame_w,
                               frame_h=frame_h, f_norm=f_norm, rig=rig_mode,
                               n_samples=n_samples), config_path)
    bev = _load_bev_checked(p["bev"])
    gh = bev.grid.shape[0]
    try:
        cfg = st.StitchConfig(window=(gh, p["window_w"]), n_step=p["n_step"],
                              frame_w=p["frame_w"], frame_h=p["frame_h"],
                              f_norm=p["f_norm"])
        rig = st.CameraRig(mode=p["rig"], n_samples=p["n_samples"])

        def factory(local, win):
            field, _ = _field_for(local, p["mode"], p["weights"],
                                  p["init_seed"] or 0, p["seed"], window=win)
            return field

        frames = st.traverse(factory, bev, cfg, rig)
    except (st.StitchError, bm.BevError) as e:
        raise click.ClickException(str(e))
    out_dir = Path(p["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    if do_stitch:
        pano = st.stitch(frames, cfg)
        st.save_stitch_outputs(frames, pano, cfg, out_dir)
        outputs = [out_dir / "panorama.png", out_dir / "stitch_report.json"]
    else:
        (out_dir / "frames").mkdir(exist_ok=True)
        for i, f in enumerate(frames):
            save_png(f, out_dir / "frames" / f"{i:05d}.png")
    outputs.append(out_dir / "frames")
    m = _write_manifest(command, p, outputs, t0, out_dir)
    click.echo(f"{len(frames)} frames -> {out_dir}; manifest {m}")


def _stitch_options(f):
    for opt in reversed([
        common_seed, common_out, common_threads, common_config,
        click.option("--bev", "bev_path", type=click.Path(exists=True), required=True),
        click.option("--mode", type=click.Choice(["procedural", "neural"]),
                     default="procedural", show_default=True),
        click.option("--weights", type=click.Path(exists=True), default=None),
        click.option("--init-seed", type=int, default=None),
        click.option("--window-w", type=int, default=64, show_default=True),
        click.option("--n-step", type=int, default=1, show_default=True),
        click.option("--frame-w", type=int, default=64, show_default=True),
        click.option("--frame-h", type=int, default=64, show_default=True),
        click.option("--f-norm", type=float, default=1.0, show_default=True),
        click.option("--rig", "rig_mode", type=click.Choice(["topdown", "pinhole"]),
                     default="topdown", show_default=True),
        click.option("--n-samples", type=int, default=16, show_default=True),
    ]):
        f = opt(f)
    return f


@main.command("traverse")
@_stitch_options
def traverse(**kw):
    """Slide a window along a .bev and render one frame per stop."""
    _stitch_run("traverse", do_stitch=False, **kw)


@main.command("stitch")
@_stitch_options
def stitch(**kw):
    """Traverse a .bev and concatenate central strips into a panorama."""
    _stitch_run("stitch", do_stitch=True, **kw)


@main.command("eqt")
@common_seed
@common_out
@common_threads
@common_config
@click.option("--bev", "bev_path", type=click.Path(exists=True), required=True)
@click.option("--mode", type=click.Choice(["procedural", "neural"]),
              default="procedural", show_default=True)
@click.option("--weights", type=click.Path(exists=True), default=None)
@click.option("--init-seed", type=int, default=None)
@click.option("--shifts", default="1,2,4", show_default=True)
@click.option("--latents", type=int, default=2, show_default=True)
@click.option("--crop-border", type=int, default=8, show_default=True)
@click.option("--n-samples", type=int, default=16, show_default=True)
def eqt_cmd(seed, out, threads, config_path, bev_path, mode, weights, init_seed,
            shifts, latents, crop_border, n_samples):
    """Score translation equivariance; writes eqt_report.json."""
    t0 = time.time()
    p = _resolve("eqt", dict(seed=seed, out=out, threads=threads, bev=bev_path,
                             mode=mode, weights=weights, init_seed=init_seed,
                             shifts=shifts, latents=latents,
                             crop_border=crop_border, n_samples=n_samples),
                 config_path)
    bev = _load_bev_checked(p["bev"])
    shift_list = [int(x) for x in str(p["shifts"]).split(",") if x.strip()]
    if p["mode"] == "neural":
        if p["weights"]:
            params = load_params(p["weights"])
            cfg = params.config
        else:
            cfg = _gen_config_for(bev.grid.shape[0])
            params = init_params(cfg, p["init_seed"] or 0)
        gen = neural_generator(params, cfg, n_samples=p["n_samples"])
        latent_dim = cfg.latent_dim
    else:
        gen = procedural_generator(n_samples=p["n_samples"])
        latent_dim = 8
    window = bm.WindowSpec((0, 0), bev.grid.shape[:2])
    try:
        rep = eqt(gen, bev, window, shift_list, p["latents"], latent_dim,
                  crop_border=p["crop_border"], seed=p["seed"])
    except Exception as e:
        raise click.ClickException(str(e))
    out_path = Path(p["out"])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(rep.to_json())
    m = _write_manifest("eqt", p, [out_path], t0, out_path.parent)
    click.echo(f"EQT {rep.eqt_db:.2f} dB -> {out_path}; manifest {m}")


ABLATION_CONFIGS = ("full", "no_lowpass", "no_sel", "no_padding")


def ablation_eqt(config: str, weight_seed: int, *, res: int = 32, latents: int = 2,
                 shifts: tuple[int, ...] = (1, 2, 4), n_samples: int = 8,
                 scene_seed: int | None = None) -> float:
    """One ablation cell: EQT of an untrained generator on a sampled scene.

    'no_padding' drops the zero ring the full model places around the BEV
    canvas before the U-Net (pad_px=0), so the convolutions' canvas-fixed
    zero boundary sits right at the content region; 'no_lowpass'/'no_sel'
    disable the corresponding architectural pieces. All rows share scenes
    and weight shapes, so comparisons are paired per seed.
    """
    if config not in ABLATION_CONFIGS:
        raise ValueError(f"unknown ablation config {config!r}")
    margin = 2 * max(shifts)
    n_levels = int(np.clip(int(np.log2(res)) - 3, 1, 4))
    gcfg = GeneratorConfig(input_res=res, input_channels=16, hidden_channels=16,
                           bev_feat_channels=8, latent_dim=16, mlp_hidden=16,
                           n_levels=n_levels,
                           use_lowpass=config != "no_lowpass",
                           use_sel=config != "no_sel",
                           pad_px=0 if config == "no_padding" else 2 ** (n_levels - 1) * 2)
    params = init_params(gcfg, weight_seed)
    ss = weight_seed if scene_seed is None else scene_seed
    lo, hi = margin + 3.0, res - margin - 3.0
    objs = bm.sample_scene(ss, n_max=3, extent=((lo, hi), (lo, hi)),
                           radius_range=(1.5, 2.5))
    bev = bm.rasterize(objs, "onehot_color_shape", (res, res), margin_px=margin)
    gen = neural_generator(params, gcfg, n_samples=n_samples)
    rep = eqt(gen, bev, bm.WindowSpec((0, 0), (res, res)), list(shifts), latents,
              gcfg.latent_dim, crop_border=6, seed=weight_seed)
    return rep.eqt_db


def format_ablation_table(rows: dict[str, list[float]], seeds: list[int]) -> str:
    """Aligned text table: config rows x seed columns, plus a median column."""
    cols = ["config"] + [f"seed={s}" for s in seeds] + ["median"]
    lines = [[c for c in cols]]
    for name in ABLATION_CONFIGS:
        vals = rows[name]
        lines.append([name] + [f"{v:.2f}" for v in vals]
                     + [f"{float(np.median(vals)):.2f}"])
    widths = [max(len(r[i]) for r in lines) for i in range(len(cols))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in lines)


@main.command("ablate")
@common_seed
@common_out
@common_threads
@common_config
@click.option("--seeds", default="0,1,2", show_default=True,
              help="comma-separated weight seeds, one sweep per seed")
@click.option("--res", type=int, default=32, show_default=True)
@click.option("--latents", type=int, default=2, show_default=True)
@click.option("--shifts", default="1,2,4", show_default=True)
def ablate(seed, out, threads, config_path, seeds, res, latents, shifts):
    """EQT ablation sweep over {full, no_lowpass, no_sel, no_padding}."""
    t0 = time.time()
    p = _resolve("ablate", dict(seed=seed, out=out, threads=threads, seeds=seeds,
                                res=res, latents=latents, shifts=shifts), config_path)
    seed_list = [int(x) for x in str(p["seeds"]).split(",") if x.strip()]
    shift_list = tuple(int(x) for x in str(p["shifts"]).split(",") if x.strip())
    rows = {name: [ablation_eqt(name, s, res=p["res"], latents=p["latents"],
                                shifts=shift_list) for s in seed_list]
            for name in ABLATION_CONFIGS}
    table = format_ablation_table(rows, seed_list)
    out_dir = Path(p["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablation.json").write_text(json.dumps(
        {"seeds": seed_list, "shifts": list(shift_list), "eqt_db": rows}, indent=2))
    (out_dir / "ablation.txt").write_text(table + "\n")
    m = _write_manifest("ablate", p, [out_dir / "ablation.json",
                                      out_dir / "ablation.txt"], t0, out_dir)
    click.echo(table)
    click.echo(f"manifest {m}")


@main.command("init-weights")
@common_seed
@common_out
@common_config
@click.option("--res", type=int, default=64, show_default=True)
def init_weights(seed, out, config_path, res):
    """Initialize generator weights and save them to a weight file."""
    t0 = time.time()
    p = _resolve("init-weights", dict(seed=seed, out=out, res=res), config_path)
    cfg = _gen_config_for(p["res"])
    params = init_params(cfg, p["seed"])
    out_path = Path(p["out"])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_params(params, out_path)
    m = _write_manifest("init-weights", p, [out_path], t0, out_path.parent)
    click.echo(f"wrote {out_path}; manifest {m}")


@main.command("serve")
@click.option("--bind", default=None, help="host:port (default $BEVFIELD_ADDR)")
def serve(bind):
    """Run the studio HTTP service."""
    from .service import main as service_main

    service_main(bind)


if __name__ == "__main__":
    sys.exit(main())

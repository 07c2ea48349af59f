"""HTTP facade for the interactive studio.

Session-scoped BEV editing, rendering, stitching, and equivariance scoring
over JSON/PNG. Sessions live in memory; edits to one session are serialized
under a per-session lock and bump a version counter, while reads operate on
the immutable BevMap snapshot taken at request start. Long stitches run as
polled background jobs. All routes are versioned under /v1; a static route
serves the studio frontend when its build output is present.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Query, Response

from . import bevmap as bm
from . import stitcher as st
from .generator import GeneratorConfig, init_params, neural_field, sample_latent
from .metrics import eqt, neural_generator, procedural_generator
from .renderer import bev_procedural_field, render_topdown, to_png_bytes

BIND_ENV_VAR = "BEVFIELD_ADDR"
DEFAULT_BIND = "127.0.0.1:8000"
STATIC_DIR = Path(__file__).resolve().parents[2] / "frontend" / "dist"


@dataclass
class Session:
    id: str
    bev: bm.BevMap
    version: int = 0
    field_mode: str = "procedural"
    latent_seed: int = 0
    gen_config: GeneratorConfig | None = None
    gen_params: object = None
    created_at: float = field(default_factory=time.time)
    last_modified: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def summary(self) -> dict:
        return {
            "id": self.id,
            "version": self.version,
            "field_mode": self.field_mode,
            "latent_seed": self.latent_seed,
            "created_at": self.created_at,
            "last_modified": self.last_modified,
            "bev": bm.bev_json_summary(self.bev),
        }


@dataclass
class Job:
    id: str
    session_id: str
    status: str = "pending"  # pending | running | done | error
    progress: float = 0.0
    report: dict | None = None
    error: str | None = None
    panorama: np.ndarray | None = None

    def summary(self) -> dict:
        return {
            "id": self.id,
            "session_id": self.session_id,
            "status": self.status,
            "progress": self.progress,
            "report": self.report,
            "error": self.error,
        }


class Registry:
    def __init__(self):
        self.sessions: dict[str, Session] = {}
        self.jobs: dict[str, Job] = {}
        self.lock = threading.Lock()

    def session(self, sid: str) -> Session:
        with self.lock:
            s = self.sessions.get(sid)
        if s is None:
            raise HTTPException(404, f"unknown session {sid}")
        return s

    def job(self, jid: str) -> Job:
        with self.lock:
            j = self.jobs.get(jid)
        if j is None:
            raise HTTPException(404, f"unknown job {jid}")
        return j


def _session_field(s: Session, bev: bm.BevMap, seed: int,
                   window: bm.WindowSpec | None = None):
    if s.field_mode == "neural":
        latent = sample_latent(s.gen_config, seed)
        if window is None:
            window = bm.WindowSpec((0, 0), bev.grid.shape[:2])
        return neural_field(s.gen_params, s.gen_config, bev, latent, window)
    return bev_procedural_field(bev)


def _neural_setup(dims: tuple[int, int], seed: int):
    h, w = dims
    if h != w:
        raise HTTPException(400, "neural mode requires square dims")
    # keep the coarsest pyramid level at >= 8 px so the per-level filters fit
    n_levels = int(np.clip(int(np.log2(h)) - 3, 1, 4))
    cfg = GeneratorConfig(input_res=h, n_levels=n_levels)
    return cfg, init_params(cfg, seed)


def create_app(registry: Registry | None = None) -> FastAPI:
    app = FastAPI(title="bevfield studio service")
    reg = registry or Registry()
    app.state.registry = reg

    @app.post("/v1/sessions")
    def create_session(payload: dict = Body(default={})):
        schema = payload.get("schema", "onehot_color_shape")
        dims = tuple(payload.get("dims", (64, 64)))
        seed = payload.get("seed")
        mode = payload.get("mode", "procedural")
        margin = int(payload.get("margin_px", 8))
        if mode not in ("procedural", "neural"):
            raise HTTPException(400, f"unknown field mode {mode!r}")
        try:
            if seed is None:
                objs = []
            else:
                # scale object count and size down on small canvases so the
                # rejection sampler has room to place everything
                interior = min(dims) - 2 * margin
                rmax = float(np.clip(interior / 8.0, 1.0, 3.5))
                n_hi = 8 if interior >= 32 else 3
                lo, hi = margin + rmax + 0.5, min(dims) - margin - rmax - 0.5
                objs = bm.sample_scene(int(seed), n_min=min(3, n_hi), n_max=n_hi,
                                       extent=((lo, hi), (lo, hi)),
                                       radius_range=(rmax / 2.0, rmax))
            bev = bm.rasterize(objs, schema, dims, margin_px=margin)
        except bm.BevError as e:
            raise HTTPException(400, str(e))
        s = Session(id=uuid.uuid4().hex, bev=bev, field_mode=mode,
                    latent_seed=int(payload.get("latent_seed", 0)))
        if mode == "neural":
            s.gen_config, s.gen_params = _neural_setup(dims, s.latent_seed)
        with reg.lock:
            reg.sessions[s.id] = s
        return s.summary()

    @app.get("/v1/sessions/{sid}")
    def get_session(sid: str):
        return reg.session(sid).summary()

    @app.put("/v1/sessions/{sid}/edits")
    def put_edit(sid: str, payload: dict = Body(...)):
        s = reg.session(sid)
        with s.lock:
            try:
                s.bev = bm.apply_edit(s.bev, payload)
            except (bm.BevError, KeyError, TypeError) as e:
                raise HTTPException(400, f"invalid edit: {e}")
            s.version += 1
            s.last_modified = time.time()
            return s.summary()

    @app.get("/v1/sessions/{sid}/render")
    def render(
        sid: str,
        w: int = Query(default=256, ge=1, le=2048),
        h: int = Query(default=256, ge=1, le=2048),
        ssaa: int = Query(default=1, ge=1, le=8),
        seed: int = Query(default=0),
    ):
        s = reg.session(sid)
        with s.lock:
            bev, version = s.bev, s.version
        t0 = time.time()
        field_ = _session_field(s, bev, seed)
        gh, gw, _ = bev.grid.shape
        w2g = bev.world_to_grid
        x0, y0 = w2g.grid_to_world(np.array([0.0, 0.0]))
        ppw = w / (gw / w2g.scale)
        z_top = 20.0 if s.field_mode == "procedural" else s.gen_config.z_range[1]
        img = render_topdown(field_, float(x0), float(y0), ppw, w, h, 32,
                             z_top=z_top, ssaa=ssaa)
        meta = {
            "session_version": version,
            "w": w, "h": h, "ssaa": ssaa, "seed": seed,
            "field_mode": s.field_mode,
            "elapsed_ms": round(1000 * (time.time() - t0), 3),
        }
        return Response(content=to_png_bytes(img), media_type="image/png",
                        headers={"X-Render-Meta": json.dumps(meta)})

    @app.post("/v1/sessions/{sid}/stitch")
    def start_stitch(sid: str, payload: dict = Body(default={})):
        s = reg.session(sid)
        with s.lock:
            bev = s.bev
        gh, gw, _ = bev.grid.shape
        try:
            cfg = st.StitchConfig(
                window=tuple(payload.get("window", (gh, min(gw, gh)))),
                n_step=int(payload.get("n_step", 1)),
                frame_w=int(payload.get("frame_w", 64)),
                frame_h=int(payload.get("frame_h", 64)),
                f_norm=float(payload.get("f_norm", 1.0)),
            )
            rig = st.CameraRig(
                mode=payload.get("rig", "topdown"),
                n_samples=int(payload.get("n_samples", 16)),
            )
            windows = st.slide(bev, cfg)
        except st.StitchError as e:
            raise HTTPException(400, str(e))
        seed = int(payload.get("seed", 0))
        job = Job(id=uuid.uuid4().hex, session_id=sid)
        with reg.lock:
            reg.jobs[job.id] = job

        def run():
            job.status = "running"
            try:
                frames = []
                for i, win in enumerate(windows):
                    local = bm.crop_window(bev, win)
                    field_ = _session_field(s, local, seed, window=win)
                    frames.append(rig.render_frame(field_, bev, win, cfg))
                    job.progress = (i + 1) / len(windows)
                pano = st.stitch(frames, cfg)
                job.panorama = pano
                job.report = st.stitch_report(cfg, len(frames), pano)
                job.status = "done"
            except Exception as e:  # surfaced to the poller
                job.error = str(e)
                job.status = "error"

        threading.Thread(target=run, daemon=True).start()
        return {"job_id": job.id}

    @app.get("/v1/jobs/{jid}")
    def get_job(jid: str):
        return reg.job(jid).summary()

    @app.get("/v1/jobs/{jid}/panorama")
    def get_panorama(jid: str):
        j = reg.job(jid)
        if j.status != "done":
            raise HTTPException(409, f"job is {j.status}, panorama not ready")
        return Response(content=to_png_bytes(j.panorama), media_type="image/png")

    @app.get("/v1/sessions/{sid}/eqt")
    def run_eqt(
        sid: str,
        shifts: str = Query(default="1,2,4"),
        latents: int = Query(default=2, ge=1, le=64),
        seed: int = Query(default=0),
        crop_border: int = Query(default=4, ge=0),
    ):
        s = reg.session(sid)
        with s.lock:
            bev = s.bev
        try:
            shift_list = [int(x) for x in shifts.split(",") if x.strip()]
        except ValueError:
            raise HTTPException(400, f"bad shifts list {shifts!r}")
        if s.field_mode == "neural":
            gen = neural_generator(s.gen_params, s.gen_config, n_samples=8)
            latent_dim = s.gen_config.latent_dim
        else:
            gen = procedural_generator(n_samples=16)
            latent_dim = 8
        window = bm.WindowSpec((0, 0), bev.grid.shape[:2])
        try:
            rep = eqt(gen, bev, window, shift_list, latents, latent_dim,
                      crop_border=crop_border, seed=seed)
        except Exception as e:
            raise HTTPException(400, str(e))
        return json.loads(rep.to_json())

    if STATIC_DIR.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=STATIC_DIR, html=True), name="studio")

    return app


def main(bind: str | None = None):
    """Run the service under uvicorn; bind address from arg or $BEVFIELD_ADDR."""
    import os

    import uvicorn

    addr = bind or os.environ.get(BIND_ENV_VAR, DEFAULT_BIND)
    host, _, port = addr.partition(":")
    uvicorn.run(create_app(), host=host or "127.0.0.1", port=int(port or 8000))


if __name__ == "__main__":
    main()

"""Scripting the studio HTTP API without a browser.

Spins the service up in-process (no network needed) and walks the same
endpoints the web UI uses: create a session, edit the layout, fetch renders,
run a polled stitch job, and ask for an equivariance score.

Run:  python3 demos/05_studio_api.py
"""

import time
from pathlib import Path

from fastapi.testclient import TestClient

from bevfield.service import Registry, create_app

OUT = Path(__file__).parent / "out" / "studio_api"
OUT.mkdir(parents=True, exist_ok=True)

client = TestClient(create_app(Registry()))

session = client.post("/v1/sessions", json={"dims": [64, 128], "seed": 5,
                                            "margin_px": 8}).json()
sid = session["id"]
print(f"session {sid[:8]}: {session['bev']['n_objects']} objects, "
      f"version {session['version']}")

# edits go through PUT and bump the version counter atomically
edit = {"op": "insert", "object": {"shape": "cube", "color": 2,
                                   "center": [90.0, 32.0],
                                   "footprint_radius": 3.0, "height": 6.0}}
after = client.put(f"/v1/sessions/{sid}/edits", json=edit).json()
print(f"after insert: {after['bev']['n_objects']} objects, version {after['version']}")

png = client.get(f"/v1/sessions/{sid}/render", params={"w": 256, "h": 128}).content
(OUT / "render.png").write_bytes(png)
print(f"render: {len(png)} bytes -> {OUT / 'render.png'}")

job = client.post(f"/v1/sessions/{sid}/stitch",
                  json={"n_step": 10, "n_samples": 8}).json()
while True:
    status = client.get(f"/v1/jobs/{job['job_id']}").json()
    print(f"  stitch {status['status']}: {status['progress']:.0%}")
    if status["status"] in ("done", "error"):
        break
    time.sleep(0.2)
pano = client.get(f"/v1/jobs/{job['job_id']}/panorama").content
(OUT / "panorama.png").write_bytes(pano)
print(f"panorama {status['report']['panorama_w']}x{status['report']['panorama_h']} "
      f"from {status['report']['K']} frames -> {OUT / 'panorama.png'}")

eqt = client.get(f"/v1/sessions/{sid}/eqt",
                 params={"shifts": "1,4", "latents": 1}).json()
print(f"EQT: {eqt['eqt_db']:.1f} dB (capped={eqt['capped']})")

// bev-studio entry point: wires the API client, the grid editor, and the
// render/stitch panels together. All engine access goes through StudioApi.

import { StudioApi } from "./api.js";
import { GridEditor } from "./editor.js";
import {
  initialState,
  N_STEP_CHOICES,
  snapNStep,
  StudioState,
  Tool,
  withError,
  withSnapshot,
} from "./state.js";

const api = new StudioApi("");
let state: StudioState = initialState();

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const editorCanvas = $<HTMLCanvasElement>("editor");
const renderImg = $<HTMLImageElement>("render-img");
const panoImg = $<HTMLImageElement>("pano-img");
const statusLine = $<HTMLElement>("status");

function setStatus(msg: string): void {
  statusLine.textContent = msg;
}

function refreshRender(): void {
  if (!state.session) return;
  state.pending.render = true;
  setStatus("rendering...");
  // version in the query busts the browser cache after each edit
  renderImg.src = api.renderUrl(state.session.id, {
    w: 256,
    h: 256,
    ssaa: state.ssaa ? 4 : 1,
    v: state.session.version,
  });
  renderImg.onload = () => {
    state.pending.render = false;
    setStatus(`session v${state.session?.version ?? "?"}`);
  };
}

const editor = new GridEditor(editorCanvas, () => state, async (edit) => {
  if (!state.session) return;
  state.pending.edit = true;
  try {
    state = withSnapshot(state, await api.applyEdit(state.session.id, edit));
  } catch (err) {
    state = withError(state, err);
    setStatus(`edit rejected: ${state.lastError}`);
  } finally {
    state.pending.edit = false;
  }
  editor.redraw();
  refreshRender();
});

async function startStitch(): Promise<void> {
  if (!state.session || state.pending.stitch) return;
  state.pending.stitch = true;
  const bar = $<HTMLProgressElement>("stitch-progress");
  try {
    const { job_id } = await api.startStitch(state.session.id, {
      n_step: state.nStep,
      n_samples: 8,
    });
    state.stitchJobId = job_id;
    const job = await api.waitForJob(job_id, (j) => {
      state.stitchProgress = j.progress;
      bar.value = j.progress;
    });
    if (job.status === "error") throw new Error(job.error ?? "stitch failed");
    panoImg.src = api.panoramaUrl(job_id) + `?v=${Date.now()}`;
    setStatus(`panorama: ${job.report?.panorama_w}x${job.report?.panorama_h}, K=${job.report?.K}`);
  } catch (err) {
    state = withError(state, err);
    setStatus(`stitch failed: ${state.lastError}`);
  } finally {
    state.pending.stitch = false;
  }
}

function bindControls(): void {
  for (const tool of ["insert", "move", "restyle", "delete"] as Tool[]) {
    $<HTMLButtonElement>(`tool-${tool}`).addEventListener("click", () => {
      state.tool = tool;
      document.querySelectorAll(".tool").forEach((b) => b.classList.remove("active"));
      $<HTMLButtonElement>(`tool-${tool}`).classList.add("active");
    });
  }
  $<HTMLSelectElement>("insert-shape").addEventListener("change", (e) => {
    state.insertShape = (e.target as HTMLSelectElement).value as StudioState["insertShape"];
  });
  $<HTMLInputElement>("insert-color").addEventListener("change", (e) => {
    state.insertColor = Number((e.target as HTMLInputElement).value);
  });
  $<HTMLInputElement>("ssaa-toggle").addEventListener("change", (e) => {
    state.ssaa = (e.target as HTMLInputElement).checked;
    refreshRender();
  });
  const slider = $<HTMLInputElement>("n-step");
  slider.addEventListener("change", () => {
    state.nStep = snapNStep(Number(slider.value));
    slider.value = String(state.nStep);
    $<HTMLElement>("n-step-label").textContent = `n_step = ${state.nStep}`;
  });
  $<HTMLButtonElement>("stitch-go").addEventListener("click", () => void startStitch());
  $<HTMLButtonElement>("render-go").addEventListener("click", refreshRender);
}

async function boot(): Promise<void> {
  bindControls();
  // reuse the session across reloads so the view reconstructs from the server
  const saved = sessionStorage.getItem("bev-session");
  try {
    if (saved) {
      state = withSnapshot(state, await api.getSession(saved));
    } else {
      const snap = await api.createSession({ dims: [64, 128], seed: 5, margin_px: 8 });
      sessionStorage.setItem("bev-session", snap.id);
      state = withSnapshot(state, snap);
    }
  } catch {
    // saved session gone (server restart); start fresh
    const snap = await api.createSession({ dims: [64, 128], seed: 5, margin_px: 8 });
    sessionStorage.setItem("bev-session", snap.id);
    state = withSnapshot(state, snap);
  }
  $<HTMLInputElement>("n-step").value = String(state.nStep);
  $<HTMLElement>("n-step-label").textContent = `n_step = ${state.nStep}`;
  editor.redraw();
  refreshRender();
  setStatus(`session ${state.session?.id.slice(0, 8)} ready (steps: ${N_STEP_CHOICES.join("/")})`);
}

void boot();

// Typed client for the studio service's /v1 HTTP API. This module is the
// frontend's only link to the engine; everything else works off the JSON
// snapshots and image blobs it returns.

export interface SceneObject {
  id: number;
  shape: "cube" | "sphere" | "cylinder";
  color: number;
  center: [number, number];
  footprint_radius: number;
  height: number;
}

export interface BevSummary {
  h: number;
  w: number;
  c: number;
  schema: string;
  margin_px: number;
  n_objects: number;
  objects: SceneObject[];
}

export interface SessionSnapshot {
  id: string;
  version: number;
  field_mode: string;
  bev: BevSummary;
}

export interface StitchReport {
  K: number;
  n_step: number;
  n_loc: number;
  panorama_w: number;
  panorama_h: number;
}

export interface JobStatus {
  id: string;
  status: "pending" | "running" | "done" | "error";
  progress: number;
  report: StitchReport | null;
  error: string | null;
}

export type EditPayload =
  | { op: "insert"; object: Omit<SceneObject, "id"> }
  | { op: "remove"; id: number }
  | { op: "move"; id: number; delta: [number, number] }
  | { op: "restyle"; id: number; color?: number; shape?: string };

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      detail = (await resp.json()).detail ?? detail;
    } catch {
      /* non-JSON error body */
    }
    throw new Error(`${resp.status}: ${detail}`);
  }
  return resp.json() as Promise<T>;
}

export class StudioApi {
  constructor(private base: string = "") {}

  createSession(opts: {
    dims?: [number, number];
    seed?: number;
    mode?: string;
    margin_px?: number;
  } = {}): Promise<SessionSnapshot> {
    return fetch(`${this.base}/v1/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(opts),
    }).then((r) => asJson<SessionSnapshot>(r));
  }

  getSession(id: string): Promise<SessionSnapshot> {
    return fetch(`${this.base}/v1/sessions/${id}`).then((r) => asJson<SessionSnapshot>(r));
  }

  applyEdit(id: string, edit: EditPayload): Promise<SessionSnapshot> {
    return fetch(`${this.base}/v1/sessions/${id}/edits`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(edit),
    }).then((r) => asJson<SessionSnapshot>(r));
  }

  // render is fetched as a URL so <img> and tests can share the addressing
  renderUrl(id: string, opts: { w?: number; h?: number; ssaa?: number; seed?: number; v?: number } = {}): string {
    const q = new URLSearchParams();
    for (const [k, val] of Object.entries(opts)) {
      if (val !== undefined) q.set(k, String(val));
    }
    return `${this.base}/v1/sessions/${id}/render?${q.toString()}`;
  }

  async renderPng(id: string, opts: { w?: number; h?: number; ssaa?: number; seed?: number } = {}): Promise<ArrayBuffer> {
    const resp = await fetch(this.renderUrl(id, opts));
    if (!resp.ok) throw new Error(`render failed: ${resp.status}`);
    return resp.arrayBuffer();
  }

  startStitch(id: string, opts: Record<string, unknown>): Promise<{ job_id: string }> {
    return fetch(`${this.base}/v1/sessions/${id}/stitch`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(opts),
    }).then((r) => asJson<{ job_id: string }>(r));
  }

  getJob(jobId: string): Promise<JobStatus> {
    return fetch(`${this.base}/v1/jobs/${jobId}`).then((r) => asJson<JobStatus>(r));
  }

  panoramaUrl(jobId: string): string {
    return `${this.base}/v1/jobs/${jobId}/panorama`;
  }

  async panoramaPng(jobId: string): Promise<ArrayBuffer> {
    const resp = await fetch(this.panoramaUrl(jobId));
    if (!resp.ok) throw new Error(`panorama not ready: ${resp.status}`);
    return resp.arrayBuffer();
  }

  // poll a stitch job until it settles; onProgress fires per poll
  async waitForJob(
    jobId: string,
    onProgress?: (j: JobStatus) => void,
    intervalMs = 1000,
    timeoutMs = 120000,
  ): Promise<JobStatus> {
    const t0 = Date.now();
    for (;;) {
      const j = await this.getJob(jobId);
      onProgress?.(j);
      if (j.status === "done" || j.status === "error") return j;
      if (Date.now() - t0 > timeoutMs) throw new Error("stitch job timed out");
      await new Promise((res) => setTimeout(res, intervalMs));
    }
  }
}

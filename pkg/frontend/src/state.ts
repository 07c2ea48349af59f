// Studio state and the pure functions that evolve it. The rendered UI is a
// function of (latest server snapshot, local uncommitted gesture), so a page
// reload that refetches the snapshot reconstructs an equivalent view.

import type { BevSummary, EditPayload, SceneObject, SessionSnapshot } from "./api.js";

export type Tool = "insert" | "move" | "restyle" | "delete";

export interface CameraState {
  x: number; // position along the traversal axis, BEV columns
  height: number;
  yaw: number;
  fNorm: number;
}

export interface StudioState {
  session: SessionSnapshot | null;
  tool: Tool;
  insertShape: SceneObject["shape"];
  insertColor: number;
  camera: CameraState;
  ssaa: boolean;
  nStep: number;
  pending: { edit: boolean; render: boolean; stitch: boolean };
  stitchJobId: string | null;
  stitchProgress: number;
  lastError: string | null;
}

export const N_STEP_CHOICES = [1, 10, 20, 30, 40] as const;

export function initialState(): StudioState {
  return {
    session: null,
    tool: "insert",
    insertShape: "cube",
    insertColor: 2,
    camera: { x: 0, height: 24, yaw: 0, fNorm: 1.0 },
    ssaa: false,
    nStep: 10,
    pending: { edit: false, render: false, stitch: false },
    stitchJobId: null,
    stitchProgress: 0,
    lastError: null,
  };
}

// map a pointer position on the editor canvas to BEV world coordinates
export function canvasToWorld(
  px: number,
  py: number,
  canvasW: number,
  canvasH: number,
  bev: BevSummary,
): [number, number] {
  return [(px / canvasW) * bev.w, (py / canvasH) * bev.h];
}

// nearest object whose footprint contains the point, or null
export function hitTest(bev: BevSummary, wx: number, wy: number): SceneObject | null {
  let best: SceneObject | null = null;
  let bestD = Infinity;
  for (const o of bev.objects) {
    const d = Math.hypot(wx - o.center[0], wy - o.center[1]);
    if (d <= o.footprint_radius && d < bestD) {
      best = o;
      bestD = d;
    }
  }
  return best;
}

// the margin band rejects rasterization; clamp proposed centers inside it
export function clampToInterior(
  bev: BevSummary,
  wx: number,
  wy: number,
  radius: number,
): [number, number] {
  const lo = bev.margin_px + radius;
  const clamp = (v: number, hi: number) => Math.min(Math.max(v, lo), hi);
  return [clamp(wx, bev.w - lo), clamp(wy, bev.h - lo)];
}

export interface Gesture {
  kind: "down" | "up";
  world: [number, number];
  startWorld?: [number, number];
  target?: SceneObject | null;
}

// turn a completed editor gesture into the edit payload to send, or null
// when the gesture doesn't amount to an edit (e.g. a miss with the move tool)
export function gestureToEdit(state: StudioState, g: Gesture): EditPayload | null {
  const bev = state.session?.bev;
  if (!bev || g.kind !== "up") return null;
  const [wx, wy] = g.world;
  switch (state.tool) {
    case "insert": {
      const radius = 3.0;
      const [cx, cy] = clampToInterior(bev, wx, wy, radius);
      return {
        op: "insert",
        object: {
          shape: state.insertShape,
          color: state.insertColor,
          center: [cx, cy],
          footprint_radius: radius,
          height: 6.0,
        },
      };
    }
    case "delete": {
      const hit = hitTest(bev, wx, wy);
      return hit ? { op: "remove", id: hit.id } : null;
    }
    case "restyle": {
      const hit = hitTest(bev, wx, wy);
      return hit ? { op: "restyle", id: hit.id, color: state.insertColor } : null;
    }
    case "move": {
      if (!g.startWorld) return null;
      const hit = g.target ?? hitTest(bev, g.startWorld[0], g.startWorld[1]);
      if (!hit) return null;
      const [cx, cy] = clampToInterior(
        bev,
        hit.center[0] + (wx - g.startWorld[0]),
        hit.center[1] + (wy - g.startWorld[1]),
        hit.footprint_radius,
      );
      const delta: [number, number] = [cx - hit.center[0], cy - hit.center[1]];
      if (delta[0] === 0 && delta[1] === 0) return null;
      return { op: "move", id: hit.id, delta };
    }
  }
}

export function withSnapshot(state: StudioState, snap: SessionSnapshot): StudioState {
  return { ...state, session: snap, lastError: null };
}

export function withError(state: StudioState, err: unknown): StudioState {
  return { ...state, lastError: err instanceof Error ? err.message : String(err) };
}

// slider positions snap to the supported sweep values
export function snapNStep(raw: number): number {
  let best = N_STEP_CHOICES[0] as number;
  for (const v of N_STEP_CHOICES) {
    if (Math.abs(v - raw) < Math.abs(best - raw)) best = v;
  }
  return best;
}

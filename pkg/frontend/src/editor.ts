// Canvas grid editor: draws the BEV object layout and turns pointer events
// into edit payloads via the pure gesture logic in state.ts.

import type { BevSummary, EditPayload, SceneObject } from "./api.js";
import { canvasToWorld, Gesture, gestureToEdit, hitTest, StudioState } from "./state.js";

// mirror of the engine's default palette so the editor preview matches renders
export const PALETTE = [
  "#e64545", "#45b545", "#4545e6", "#e6c845", "#45c8e6",
  "#c845e6", "#e68a45", "#8a8a8a",
];

export function drawBev(ctx: CanvasRenderingContext2D, bev: BevSummary, selected: number | null): void {
  const { width, height } = ctx.canvas;
  const sx = width / bev.w;
  const sy = height / bev.h;
  ctx.fillStyle = "#1c1f26";
  ctx.fillRect(0, 0, width, height);

  // margin band where placement is rejected
  ctx.fillStyle = "rgba(255,255,255,0.06)";
  const m = bev.margin_px;
  ctx.fillRect(0, 0, width, m * sy);
  ctx.fillRect(0, height - m * sy, width, m * sy);
  ctx.fillRect(0, 0, m * sx, height);
  ctx.fillRect(width - m * sx, 0, m * sx, height);

  for (const o of bev.objects) {
    const cx = o.center[0] * sx;
    const cy = o.center[1] * sy;
    const r = o.footprint_radius * Math.min(sx, sy);
    ctx.fillStyle = PALETTE[o.color % PALETTE.length];
    ctx.beginPath();
    if (o.shape === "cube") {
      ctx.rect(cx - r, cy - r, 2 * r, 2 * r);
    } else {
      ctx.arc(cx, cy, r, 0, 2 * Math.PI);
    }
    ctx.fill();
    if (o.shape === "cylinder") {
      ctx.strokeStyle = "#ffffff88";
      ctx.stroke();
    }
    if (o.id === selected) {
      ctx.strokeStyle = "#ffd166";
      ctx.lineWidth = 2;
      ctx.strokeRect(cx - r - 3, cy - r - 3, 2 * r + 6, 2 * r + 6);
      ctx.lineWidth = 1;
    }
  }
}

export class GridEditor {
  private downWorld: [number, number] | null = null;
  private downTarget: SceneObject | null = null;
  selected: number | null = null;

  constructor(
    private canvas: HTMLCanvasElement,
    private getState: () => StudioState,
    private onEdit: (edit: EditPayload) => void,
  ) {
    canvas.addEventListener("pointerdown", (e) => this.pointer(e, "down"));
    canvas.addEventListener("pointerup", (e) => this.pointer(e, "up"));
  }

  redraw(): void {
    const bev = this.getState().session?.bev;
    const ctx = this.canvas.getContext("2d");
    if (bev && ctx) drawBev(ctx, bev, this.selected);
  }

  private pointer(e: PointerEvent, kind: "down" | "up"): void {
    const state = this.getState();
    const bev = state.session?.bev;
    if (!bev || state.pending.edit) return;
    const rect = this.canvas.getBoundingClientRect();
    const world = canvasToWorld(
      e.clientX - rect.left,
      e.clientY - rect.top,
      rect.width,
      rect.height,
      bev,
    );
    if (kind === "down") {
      this.downWorld = world;
      this.downTarget = hitTest(bev, world[0], world[1]);
      this.selected = this.downTarget?.id ?? null;
      this.redraw();
      return;
    }
    const gesture: Gesture = {
      kind,
      world,
      startWorld: this.downWorld ?? undefined,
      target: this.downTarget,
    };
    this.downWorld = null;
    this.downTarget = null;
    const edit = gestureToEdit(state, gesture);
    if (edit) this.onEdit(edit);
  }
}

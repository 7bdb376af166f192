import { Overlay, SessionState } from "./types.js";

/** One overlay rectangle per object, straight from the server-reported bboxes. */
export function computeOverlays(state: SessionState): Overlay[] {
  return state.objects.map((o) => ({
    objectId: o.object_id,
    classId: o.class_id,
    x: o.bbox.col_min,
    y: o.bbox.row_min,
    width: o.bbox.col_max - o.bbox.col_min + 1,
    height: o.bbox.row_max - o.bbox.row_min + 1,
  }));
}

const CLASS_COLORS = ["#e74c3c", "#2ecc71", "#3498db", "#f1c40f", "#9b59b6", "#1abc9c"];

/**
 * Draws the latest canvas PNG and, when enabled, one outline per object.
 * Pixels come only from the server; nothing is drawn optimistically.
 */
export class CanvasView {
  showOverlays = true;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly displayScale = 4,
  ) {}

  async render(png: Uint8Array, state: SessionState, selected: string | null): Promise<void> {
    const scale = this.displayScale;
    this.canvas.width = state.width * scale;
    this.canvas.height = state.height * scale;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;

    const blob = new Blob([png.slice().buffer], { type: "image/png" });
    const bitmap = await createImageBitmap(blob);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(bitmap, 0, 0, this.canvas.width, this.canvas.height);
    bitmap.close();

    if (!this.showOverlays) return;
    for (const overlay of computeOverlays(state)) {
      ctx.strokeStyle = CLASS_COLORS[overlay.classId % CLASS_COLORS.length];
      ctx.lineWidth = overlay.objectId === selected ? 3 : 1;
      ctx.strokeRect(overlay.x * scale, overlay.y * scale,
                     overlay.width * scale, overlay.height * scale);
    }
  }
}

import { encodeRle } from "./rle.js";
import { BBoxDto } from "./types.js";

const clampInt = (v: number, lo: number, hi: number): number =>
  Math.min(hi, Math.max(lo, Math.round(v)));

/** Clamp a dragged rectangle to integer coordinates inside the frame. */
export function clampBBox(
  raw: { row_min: number; col_min: number; row_max: number; col_max: number },
  size: number,
): BBoxDto {
  const r0 = clampInt(Math.min(raw.row_min, raw.row_max), 0, size - 1);
  const r1 = clampInt(Math.max(raw.row_min, raw.row_max), 0, size - 1);
  const c0 = clampInt(Math.min(raw.col_min, raw.col_max), 0, size - 1);
  const c1 = clampInt(Math.max(raw.col_min, raw.col_max), 0, size - 1);
  return { row_min: r0, col_min: c0, row_max: r1, col_max: c1 };
}

/**
 * Binary mask editor over a grid at the session resolution. Strokes and
 * template shapes set cells to 1; masks stay binary, no smoothing.
 */
export class MaskTool {
  readonly size: number;
  private grid: Uint8Array;

  constructor(size: number) {
    if (!Number.isInteger(size) || size <= 0) {
      throw new Error(`mask size must be a positive integer, got ${size}`);
    }
    this.size = size;
    this.grid = new Uint8Array(size * size);
  }

  clear(): void {
    this.grid.fill(0);
  }

  cells(): Uint8Array {
    return this.grid.slice();
  }

  at(row: number, col: number): number {
    return this.grid[row * this.size + col];
  }

  /** Circular brush stroke; value 0 erases. */
  paint(row: number, col: number, radius = 1, value: 0 | 1 = 1): void {
    const r = Math.max(0, radius);
    const r2 = r * r;
    const lo = (v: number) => Math.max(0, Math.ceil(v - r));
    const hi = (v: number) => Math.min(this.size - 1, Math.floor(v + r));
    for (let i = lo(row); i <= hi(row); i++) {
      for (let j = lo(col); j <= hi(col); j++) {
        if ((i - row) * (i - row) + (j - col) * (j - col) <= r2) {
          this.grid[i * this.size + j] = value;
        }
      }
    }
  }

  placeRect(box: BBoxDto): void {
    const b = clampBBox(box, this.size);
    for (let i = b.row_min; i <= b.row_max; i++) {
      this.grid.fill(1, i * this.size + b.col_min, i * this.size + b.col_max + 1);
    }
  }

  placeEllipse(centerRow: number, centerCol: number, radiusRow: number, radiusCol: number): void {
    const rr = Math.max(0.5, radiusRow);
    const rc = Math.max(0.5, radiusCol);
    for (let i = 0; i < this.size; i++) {
      for (let j = 0; j < this.size; j++) {
        const dr = (i - centerRow) / rr;
        const dc = (j - centerCol) / rc;
        if (dr * dr + dc * dc <= 1) this.grid[i * this.size + j] = 1;
      }
    }
  }

  pixelCount(): number {
    let n = 0;
    for (const v of this.grid) if (v) n += 1;
    return n;
  }

  /** Submit stays disabled while this is false. */
  hasForeground(): boolean {
    return this.grid.some((v) => v !== 0);
  }

  toRle(): string {
    if (!this.hasForeground()) {
      throw new Error("empty mask cannot be submitted");
    }
    return encodeRle(this.grid, this.size, this.size);
  }
}

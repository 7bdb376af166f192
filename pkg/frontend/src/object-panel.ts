import { UiSessionModel } from "./model.js";
import { TransformParams } from "./types.js";

export const TRANSFORM_LIMITS = {
  rot: { min: -180, max: 180 },
  scale: { min: 0.25, max: 4 },
} as const;

export function moveIndex<T>(items: T[], from: number, to: number): T[] {
  if (from < 0 || from >= items.length || to < 0 || to >= items.length) {
    throw new Error(`move ${from} -> ${to} out of range for ${items.length} items`);
  }
  const out = items.slice();
  const [item] = out.splice(from, 1);
  out.splice(to, 0, item);
  return out;
}

/** Clamp slider values into the ranges the service accepts. */
export function clampTransform(params: TransformParams, frameSize: number): TransformParams {
  const clamp = (v: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, v));
  const shift = frameSize - 1;
  return {
    dx: Math.round(clamp(params.dx, -shift, shift)),
    dy: Math.round(clamp(params.dy, -shift, shift)),
    rot: clamp(params.rot, TRANSFORM_LIMITS.rot.min, TRANSFORM_LIMITS.rot.max),
    scale: clamp(params.scale, TRANSFORM_LIMITS.scale.min, TRANSFORM_LIMITS.scale.max),
  };
}

/**
 * Drag-to-reorder, resample, and transform actions for the object list.
 * Every action goes through the session model, so the canvas is refetched
 * on acknowledgment and a second action while one is pending is rejected.
 */
export class ObjectPanel {
  constructor(private readonly model: UiSessionModel) {}

  ids(): string[] {
    return this.model.objects.map((o) => o.object_id);
  }

  /** Drop handler: move the object at `from` to position `to`, then PUT the full order. */
  async moveObject(from: number, to: number): Promise<string[]> {
    const ids = moveIndex(this.ids(), from, to);
    const previous = this.ids();
    const response = await this.model.mutate(
      () => this.model.client.reorder(this.model.sessionId, ids),
      {
        label: "reorder",
        revert: () => this.model.client.reorder(this.model.sessionId, previous),
      },
    );
    return response.order;
  }

  async resample(objectId: string, seed: number): Promise<void> {
    if (!Number.isInteger(seed) || seed < 0) {
      throw new Error(`seed must be a non-negative integer, got ${seed}`);
    }
    const previous = this.model.objects.find((o) => o.object_id === objectId)?.seed;
    await this.model.mutate(
      () => this.model.client.resampleObject(this.model.sessionId, objectId, seed),
      previous === undefined ? undefined : {
        label: "resample",
        revert: () =>
          this.model.client.resampleObject(this.model.sessionId, objectId, previous),
      },
    );
  }

  /** Slider values outside the allowed ranges are clamped before the request. */
  async applyTransform(objectId: string, params: TransformParams): Promise<void> {
    for (const [key, value] of Object.entries(params)) {
      if (!Number.isFinite(value)) {
        throw new Error(`transform ${key} must be a finite number`);
      }
    }
    const frame = this.model.state?.width ?? 1;
    const safe = clampTransform(params, frame);
    const inverse: TransformParams = { dx: -safe.dx, dy: -safe.dy, rot: -safe.rot,
                                       scale: 1 / safe.scale };
    await this.model.mutate(
      () => this.model.client.transformObject(this.model.sessionId, objectId, safe),
      {
        label: "transform",
        revert: () =>
          this.model.client.transformObject(this.model.sessionId, objectId, inverse),
      },
    );
  }
}

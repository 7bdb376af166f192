export interface BBoxDto {
  row_min: number;
  col_min: number;
  row_max: number;
  col_max: number;
}

export interface ObjectDto {
  object_id: string;
  class_id: number;
  seed: number;
  bbox: BBoxDto;
}

export type BackgroundSpec =
  | { kind: "generate"; seed: number }
  | { kind: "upload"; image: string };

export interface CreateSessionBody {
  width: number;
  height: number;
  mode: "hard" | "raw";
  background: BackgroundSpec;
}

export interface CreateSessionResponse {
  session_id: string;
  canvas_url: string;
  canvas_version: number;
}

export interface SessionState {
  session_id: string;
  mode: "hard" | "raw";
  width: number;
  height: number;
  n_classes: number;
  canvas_version: number;
  objects: ObjectDto[];
}

export interface AddObjectBody {
  class_id: number;
  mask_rle?: string;
  bbox?: BBoxDto;
  seed?: number;
}

export interface AddObjectResponse {
  object_id: string;
  canvas_version: number;
  seed: number;
  mask_rle: string;
  bbox: BBoxDto;
}

export interface TransformParams {
  dx: number;
  dy: number;
  rot: number;
  scale: number;
}

export interface MutationAck {
  canvas_version: number;
}

export interface Overlay {
  objectId: string;
  classId: number;
  x: number;
  y: number;
  width: number;
  height: number;
}

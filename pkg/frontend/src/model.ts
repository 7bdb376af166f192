import { ComposerClient } from "./client.js";
import { CreateSessionBody, ObjectDto, SessionState } from "./types.js";

export type ToolKind = "brush" | "rect" | "ellipse" | "bbox";

export interface UndoEntry {
  label: string;
  revert: () => Promise<unknown>;
}

/**
 * Client-side mirror of one composition session.
 *
 * The mirror is rebuilt from the server after every acknowledged mutation
 * (state JSON plus canvas PNG), so local object order always matches the
 * last server-acknowledged order and a forced refresh() reconciles exactly.
 * Generation calls are never applied optimistically. One mutation may be in
 * flight at a time; starting a second one while busy is an error.
 */
export class UiSessionModel {
  state: SessionState | null = null;
  canvasPng: Uint8Array | null = null;
  selectedTool: ToolKind = "brush";
  selectedObject: string | null = null;

  private inFlight = false;
  private undoStack: UndoEntry[] = [];

  constructor(readonly client: ComposerClient) {}

  get sessionId(): string {
    if (this.state === null) throw new Error("no session open");
    return this.state.session_id;
  }

  get objects(): ObjectDto[] {
    return this.state?.objects ?? [];
  }

  get canvasVersion(): number {
    return this.state?.canvas_version ?? 0;
  }

  isBusy(): boolean {
    return this.inFlight;
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  async create(body: CreateSessionBody): Promise<void> {
    const created = await this.client.createSession(body);
    await this.open(created.session_id);
  }

  async open(sessionId: string): Promise<void> {
    this.state = await this.client.getState(sessionId);
    this.canvasPng = await this.client.fetchCanvas(sessionId);
    this.undoStack = [];
    this.selectedObject = null;
  }

  /** Re-pull state and canvas; local edits in flight are never kept over server truth. */
  async refresh(): Promise<void> {
    const id = this.sessionId;
    this.state = await this.client.getState(id);
    this.canvasPng = await this.client.fetchCanvas(id);
    if (this.selectedObject !== null &&
        !this.objects.some((o) => o.object_id === this.selectedObject)) {
      this.selectedObject = null;
    }
  }

  /**
   * Run one mutating service call, then refetch state and canvas. Enforces
   * the single-in-flight rule client-side.
   */
  async mutate<T>(action: () => Promise<T>, undo?: UndoEntry): Promise<T> {
    if (this.inFlight) {
      throw new Error("a mutation is already in flight for this session");
    }
    this.inFlight = true;
    try {
      const result = await action();
      if (undo) this.undoStack.push(undo);
      await this.refresh();
      return result;
    } finally {
      this.inFlight = false;
    }
  }

  /** Issue the compensating call for the most recent undoable mutation. */
  async undo(): Promise<void> {
    const entry = this.undoStack.pop();
    if (!entry) return;
    await this.mutate(entry.revert);
  }
}

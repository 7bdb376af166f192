import { CanvasView } from "./canvas-view.js";
import { ComposerClient } from "./client.js";
import { MaskTool, clampBBox } from "./mask-tool.js";
import { UiSessionModel } from "./model.js";
import { ObjectPanel } from "./object-panel.js";
import { ToolKind } from "./model.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const serviceUrl = new URLSearchParams(location.search).get("service")
  ?? "http://127.0.0.1:8765";

const client = new ComposerClient(serviceUrl);
const model = new UiSessionModel(client);
const panel = new ObjectPanel(model);

const view = new CanvasView($<HTMLCanvasElement>("canvas"));
const maskCanvas = $<HTMLCanvasElement>("mask-editor");
const statusLine = $<HTMLSpanElement>("status");
const objectList = $<HTMLUListElement>("object-list");
const submitButton = $<HTMLButtonElement>("add-object");

let tool: MaskTool | null = null;
let dragFrom: number | null = null;
let bboxStart: { row: number; col: number } | null = null;

function setStatus(text: string): void {
  statusLine.textContent = text;
}

function classId(): number {
  return Number($<HTMLSelectElement>("class-select").value);
}

/** Empty seed box means "let the server pick"; 0 is a valid seed. */
function seedValue(): number | undefined {
  const raw = $<HTMLInputElement>("seed").value.trim();
  return raw === "" ? undefined : Number(raw);
}

function redrawMask(): void {
  if (!tool) return;
  const ctx = maskCanvas.getContext("2d");
  if (!ctx) return;
  const scale = maskCanvas.width / tool.size;
  ctx.clearRect(0, 0, maskCanvas.width, maskCanvas.height);
  ctx.fillStyle = "rgba(231, 76, 60, 0.6)";
  for (let r = 0; r < tool.size; r++) {
    for (let c = 0; c < tool.size; c++) {
      if (tool.at(r, c)) ctx.fillRect(c * scale, r * scale, scale, scale);
    }
  }
  submitButton.disabled = !tool.hasForeground();
}

async function redrawAll(): Promise<void> {
  if (!model.state || !model.canvasPng) return;
  await view.render(model.canvasPng, model.state, model.selectedObject);
  objectList.innerHTML = "";
  model.objects.forEach((obj, index) => {
    const li = document.createElement("li");
    li.draggable = true;
    li.textContent = `#${index + 1} class ${obj.class_id} seed ${obj.seed}`;
    li.dataset.objectId = obj.object_id;
    if (obj.object_id === model.selectedObject) li.classList.add("selected");
    li.addEventListener("click", () => {
      model.selectedObject = obj.object_id;
      void redrawAll();
    });
    li.addEventListener("dragstart", () => { dragFrom = index; });
    li.addEventListener("dragover", (ev) => ev.preventDefault());
    li.addEventListener("drop", (ev) => {
      ev.preventDefault();
      if (dragFrom !== null && dragFrom !== index) {
        void runAction(() => panel.moveObject(dragFrom!, index), "reordered");
      }
      dragFrom = null;
    });
    objectList.appendChild(li);
  });
  setStatus(`canvas v${model.canvasVersion}, ${model.objects.length} object(s)`);
}

async function runAction(action: () => Promise<unknown>, done: string): Promise<void> {
  if (model.isBusy()) {
    setStatus("busy: one mutation at a time");
    return;
  }
  try {
    setStatus("working...");
    await action();
    await redrawAll();
    setStatus(done);
  } catch (err) {
    setStatus(err instanceof Error ? err.message : String(err));
  }
}

function maskCell(ev: MouseEvent): { row: number; col: number } {
  const rect = maskCanvas.getBoundingClientRect();
  const size = tool?.size ?? 1;
  const col = Math.floor(((ev.clientX - rect.left) / rect.width) * size);
  const row = Math.floor(((ev.clientY - rect.top) / rect.height) * size);
  return { row: Math.min(size - 1, Math.max(0, row)),
           col: Math.min(size - 1, Math.max(0, col)) };
}

maskCanvas.addEventListener("mousedown", (ev) => {
  if (!tool) return;
  const { row, col } = maskCell(ev);
  const kind = model.selectedTool;
  if (kind === "brush") {
    tool.paint(row, col, Number($<HTMLInputElement>("brush-size").value));
  } else if (kind === "rect" || kind === "bbox") {
    bboxStart = { row, col };
  } else if (kind === "ellipse") {
    tool.placeEllipse(row, col, 6, 6);
  }
  redrawMask();
});

maskCanvas.addEventListener("mousemove", (ev) => {
  if (!tool || model.selectedTool !== "brush" || ev.buttons !== 1) return;
  const { row, col } = maskCell(ev);
  tool.paint(row, col, Number($<HTMLInputElement>("brush-size").value));
  redrawMask();
});

maskCanvas.addEventListener("mouseup", (ev) => {
  if (!tool || !bboxStart) return;
  const { row, col } = maskCell(ev);
  const box = clampBBox({ row_min: bboxStart.row, col_min: bboxStart.col,
                          row_max: row, col_max: col }, tool.size);
  if (model.selectedTool === "rect") {
    tool.placeRect(box);
    redrawMask();
  } else if (model.selectedTool === "bbox") {
    void runAction(
      () => model.mutate(() => client.addObject(model.sessionId, {
        class_id: classId(), bbox: box, seed: seedValue(),
      })),
      "object added from box",
    );
  }
  bboxStart = null;
});

$<HTMLButtonElement>("new-session").addEventListener("click", () => {
  void runAction(async () => {
    const size = Number($<HTMLInputElement>("frame-size").value);
    await model.create({
      width: size, height: size, mode: "hard",
      background: { kind: "generate",
                    seed: Number($<HTMLInputElement>("bg-seed").value) || 0 },
    });
    tool = new MaskTool(size);
    maskCanvas.width = size * 4;
    maskCanvas.height = size * 4;
    redrawMask();
  }, "session created");
});

for (const kind of ["brush", "rect", "ellipse", "bbox"] as ToolKind[]) {
  $<HTMLButtonElement>(`tool-${kind}`).addEventListener("click", () => {
    model.selectedTool = kind;
    setStatus(`tool: ${kind}`);
  });
}

submitButton.addEventListener("click", () => {
  if (!tool?.hasForeground()) return;
  const rle = tool.toRle();
  void runAction(
    () => model.mutate(() => client.addObject(model.sessionId, {
      class_id: classId(), mask_rle: rle, seed: seedValue(),
    })).then(() => tool?.clear()),
    "object added",
  ).then(redrawMask);
});

$<HTMLButtonElement>("clear-mask").addEventListener("click", () => {
  tool?.clear();
  redrawMask();
});

$<HTMLButtonElement>("resample").addEventListener("click", () => {
  if (!model.selectedObject) return;
  void runAction(
    () => panel.resample(model.selectedObject!,
                         Math.floor(Math.random() * 2 ** 31)),
    "resampled",
  );
});

$<HTMLButtonElement>("apply-transform").addEventListener("click", () => {
  if (!model.selectedObject) return;
  void runAction(
    () => panel.applyTransform(model.selectedObject!, {
      dx: Number($<HTMLInputElement>("slider-dx").value),
      dy: Number($<HTMLInputElement>("slider-dy").value),
      rot: Number($<HTMLInputElement>("slider-rot").value),
      scale: Number($<HTMLInputElement>("slider-scale").value),
    }),
    "transformed",
  );
});

$<HTMLButtonElement>("undo").addEventListener("click", () => {
  if (model.canUndo()) void runAction(() => model.undo(), "undone");
});

$<HTMLInputElement>("show-overlays").addEventListener("change", (ev) => {
  view.showOverlays = (ev.target as HTMLInputElement).checked;
  void redrawAll();
});

setStatus(`ready, service at ${serviceUrl}`);

import { beforeEach, describe, expect, it } from "vitest";

import { computeOverlays } from "../src/canvas-view.js";
import { ComposerClient } from "../src/client.js";
import { MaskTool } from "../src/mask-tool.js";
import { UiSessionModel } from "../src/model.js";
import { MockService } from "./mock-service.js";

let mock: MockService;
let model: UiSessionModel;

beforeEach(async () => {
  mock = new MockService(16);
  model = new UiSessionModel(new ComposerClient("http://mock", mock.fetch));
  await model.open(mock.sessionId);
});

describe("canvas refetch reconciliation", () => {
  it("fresh session mirrors background-only server state", () => {
    expect(model.objects).toEqual([]);
    expect(model.canvasVersion).toBe(1);
    expect(model.canvasPng).toEqual(mock.canvasBytes());
  });

  it("refetches state and pixels after every acknowledged mutation", async () => {
    const tool = new MaskTool(16);
    tool.placeRect({ row_min: 2, col_min: 3, row_max: 6, col_max: 9 });
    await model.mutate(() => model.client.addObject(model.sessionId, {
      class_id: 1, mask_rle: tool.toRle(), seed: 5,
    }));
    expect(model.canvasVersion).toBe(2);
    expect(model.objects.length).toBe(1);
    expect(model.objects[0].bbox).toEqual({ row_min: 2, col_min: 3,
                                            row_max: 6, col_max: 9 });
    expect(model.canvasPng).toEqual(mock.canvasBytes());

    await model.mutate(() => model.client.resampleObject(
      model.sessionId, model.objects[0].object_id, 99));
    expect(model.canvasVersion).toBe(3);
    expect(model.objects[0].seed).toBe(99);
    expect(model.canvasPng).toEqual(mock.canvasBytes());
  });

  it("local mirror equals server state exactly after each mutation", async () => {
    const tool = new MaskTool(16);
    tool.paint(8, 8, 3);
    await model.mutate(() => model.client.addObject(model.sessionId, {
      class_id: 0, mask_rle: tool.toRle(), seed: 1,
    }));
    await model.mutate(() => model.client.addObject(model.sessionId, {
      class_id: 2, bbox: { row_min: 1, col_min: 1, row_max: 5, col_max: 5 },
      seed: 2,
    }));
    expect(model.state).toEqual(mock.state());
  });

  it("a forced refresh reconciles external changes", async () => {
    mock.addObject(0, { row_min: 0, row_max: 3, col_min: 0, col_max: 3 }, 8);
    mock.addObject(1, { row_min: 5, row_max: 8, col_min: 5, col_max: 8 }, 9);
    expect(model.objects.length).toBe(0); // not seen yet

    await model.refresh();
    expect(model.state).toEqual(mock.state());
    expect(model.canvasPng).toEqual(mock.canvasBytes());

    // Someone else reorders behind our back; refresh adopts their order.
    mock.objects.reverse();
    mock.canvasVersion += 1;
    await model.refresh();
    expect(model.objects.map((o) => o.object_id)).toEqual(["obj-2", "obj-1"]);
    expect(model.canvasVersion).toBe(mock.canvasVersion);
  });

  it("drops the selection when the object vanishes server-side", async () => {
    const obj = mock.addObject(0, { row_min: 0, row_max: 2, col_min: 0, col_max: 2 }, 1);
    await model.refresh();
    model.selectedObject = obj.object_id;
    mock.objects = [];
    mock.canvasVersion += 1;
    await model.refresh();
    expect(model.selectedObject).toBeNull();
  });
});

describe("overlays", () => {
  it("renders one rectangle per object, matching server bboxes exactly", async () => {
    mock.addObject(0, { row_min: 2, row_max: 5, col_min: 3, col_max: 10 }, 1);
    mock.addObject(2, { row_min: 8, row_max: 12, col_min: 1, col_max: 4 }, 2);
    await model.refresh();
    const overlays = computeOverlays(model.state!);
    expect(overlays.length).toBe(model.objects.length);
    expect(overlays[0]).toEqual({ objectId: "obj-1", classId: 0,
                                  x: 3, y: 2, width: 8, height: 4 });
    expect(overlays[1]).toEqual({ objectId: "obj-2", classId: 2,
                                  x: 1, y: 8, width: 4, height: 5 });
  });
});

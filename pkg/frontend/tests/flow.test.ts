import { describe, expect, it, vi } from "vitest";

import { ApiError } from "../src/api.js";
import { ReviewController, type DecisionApi } from "../src/controller.js";
import { renderRows } from "../src/render.js";
import type { DecisionRequest, DecisionResponse } from "../src/types.js";
import { afterAccept, conflictError, created, suggestion } from "./helpers.js";

function stubApi(decide: DecisionApi["decide"]): DecisionApi {
  const fixture = created();
  return {
    getSession: vi.fn(async () => fixture.session),
    getCandidates: vi.fn(async () => fixture.candidates),
    decide: vi.fn(decide),
    suggestion: vi.fn(async () => suggestion()),
  };
}

async function loaded(decide: DecisionApi["decide"]) {
  const api = stubApi(decide);
  const controller = new ReviewController(api);
  await controller.load(created().session.id);
  return { api, controller };
}

describe("decision flow", () => {
  it("accepting a match takes the column out of other rows in one round-trip", async () => {
    const { api, controller } = await loaded(async () => afterAccept());
    await controller.accept("v", "a");

    expect(api.decide).toHaveBeenCalledTimes(1);
    expect(api.decide).toHaveBeenCalledWith(created().session.id, {
      row: "v",
      action: "accept",
      column: "a",
    });
    const html = renderRows(controller.view());
    expect(html).toContain('<span class="state accepted">accepted a</span>');
    expect(html).toContain("<s>a</s>");
    expect(html).toContain("taken by v");
    const wRow = controller.view().rows.find((r) => r.row === "w")!;
    expect(wRow.cells.find((c) => c.column === "a")!.status).toBe("taken");
  });

  it("paints the predicted state before the service answers", async () => {
    let release: (value: DecisionResponse) => void;
    const gate = new Promise<DecisionResponse>((resolve) => {
      release = resolve;
    });
    const { controller } = await loaded(() => gate);

    const pending = controller.accept("v", "a");
    const predicted = controller.view();
    expect(predicted.rows.find((r) => r.row === "v")!.state).toBe("accepted");
    expect(
      predicted.rows.find((r) => r.row === "w")!.cells.find((c) => c.column === "a")!.status,
    ).toBe("taken");

    release!(afterAccept());
    await pending;
    expect(controller.rows).toEqual(afterAccept().candidates);
  });

  it("rolls the optimistic accept back on a conflict and names the holder", async () => {
    const { controller } = await loaded(async () => {
      throw new ApiError(409, conflictError());
    });
    const before = JSON.parse(JSON.stringify(controller.rows));
    await controller.accept("w", "a");

    expect(controller.rows).toEqual(before);
    expect(controller.notice).toContain("already accepted by row 'v'");
    const html = renderRows(controller.view());
    expect(html).not.toContain("taken by w");
  });

  it("reject then undo restores the original candidate list", async () => {
    const original = created().candidates;
    const rejected: DecisionResponse = {
      candidates: original.map((entry) =>
        entry.row === "v"
          ? {
              ...entry,
              decision: { ...entry.decision, rejected: ["a"] },
              candidates: entry.candidates.map((c) =>
                c.column === "a" ? { ...c, status: "rejected" as const } : c,
              ),
            }
          : entry,
      ),
      decision_count: 1,
    };
    const responses: DecisionResponse[] = [rejected, { candidates: original, decision_count: 2 }];
    const { api, controller } = await loaded(async () => responses.shift()!);

    await controller.reject("v", "a");
    expect(controller.view().rows.find((r) => r.row === "v")!.rejected).toEqual(["a"]);

    await controller.clear("v");
    expect(controller.rows).toEqual(original);
    expect(api.decide).toHaveBeenLastCalledWith(created().session.id, {
      row: "v",
      action: "clear",
    });
  });

  it("suggestion pairs stay pending until confirmed, then post in order", async () => {
    const sent: DecisionRequest[] = [];
    const { controller } = await loaded(async (_id, request) => {
      sent.push(request);
      return afterAccept();
    });
    await controller.suggest();
    const pairs = suggestion();
    expect(controller.view().suggestion).toEqual(pairs);
    expect(sent).toEqual([]); // highlighted only, nothing posted yet

    await controller.confirmSuggestion();
    expect(sent).toEqual(
      pairs.map((p) => ({ row: p.row, action: "accept", column: p.column })),
    );
    expect(controller.pendingSuggestion).toBeNull();
  });

  it("dismissing a suggestion clears the highlights without posting", async () => {
    const { api, controller } = await loaded(async () => afterAccept());
    await controller.suggest();
    controller.dismissSuggestion();
    expect(controller.view().suggestion).toEqual([]);
    expect(api.decide).not.toHaveBeenCalled();
  });
});

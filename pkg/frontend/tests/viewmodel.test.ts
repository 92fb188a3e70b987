import { describe, expect, it } from "vitest";

import { buildSessionView, TOP_K } from "../src/viewmodel.js";
import type { RowCandidates, SessionInfo } from "../src/types.js";
import { afterAccept, created, createdRowOnly, suggestion } from "./helpers.js";

/** Minimal hand-built session for intensity math, 2 rows x 2 columns. */
function tinySession(comparability: "full" | "row_only"): {
  session: SessionInfo;
  rows: RowCandidates[];
} {
  const base = created().session;
  const session: SessionInfo = {
    ...base,
    matrix_meta: {
      rows: ["r1", "r2"],
      cols: ["c1", "c2"],
      method: base.method,
      comparability,
      params: {},
    },
  };
  const row = (name: string, first: number, second: number): RowCandidates => ({
    row: name,
    decision: { state: "undecided", column: null, rejected: [] },
    no_available_match: false,
    candidates: [
      { column: "c1", value: first, status: "available", taken_by: null },
      { column: "c2", value: second, status: "available", taken_by: null },
    ],
  });
  return { session, rows: [row("r1", 0.9, 0.1), row("r2", 0.45, 0.05)] };
}

describe("buildSessionView", () => {
  it("keeps the service candidate order verbatim in the top list", () => {
    const fixture = created();
    const view = buildSessionView(fixture.session, fixture.candidates);
    view.rows.forEach((rowView, i) => {
      const served = fixture.candidates[i]!.candidates.slice(0, TOP_K);
      expect(rowView.top.map((c) => c.column)).toEqual(served.map((c) => c.column));
      expect(rowView.top.map((c) => c.value)).toEqual(served.map((c) => c.value));
      expect(rowView.top.length).toBe(TOP_K);
    });
  });

  it("emits one cell per training column in canonical order", () => {
    const fixture = created();
    const view = buildSessionView(fixture.session, fixture.candidates);
    for (const row of view.rows) {
      expect(row.cells.map((c) => c.column)).toEqual(view.columns);
    }
  });

  it("marks the served first candidate as the best cell of its row", () => {
    const fixture = created();
    const view = buildSessionView(fixture.session, fixture.candidates);
    view.rows.forEach((rowView, i) => {
      const best = rowView.cells.filter((c) => c.best);
      expect(best.map((c) => c.column)).toEqual([fixture.candidates[i]!.candidates[0]!.column]);
    });
  });

  it("scales shading against the global maximum when rows are comparable", () => {
    const { session, rows } = tinySession("full");
    const view = buildSessionView(session, rows);
    const intensity = (r: number, c: number) => view.rows[r]!.cells[c]!.intensity;
    expect(intensity(0, 0)).toBeCloseTo(1.0, 12);
    expect(intensity(1, 0)).toBeCloseTo(0.5, 12);
    expect(intensity(1, 1)).toBeCloseTo(0.05 / 0.9, 12);
    expect(view.rowOnly).toBe(false);
  });

  it("scales each row by its own maximum for row-only methods", () => {
    const { session, rows } = tinySession("row_only");
    const view = buildSessionView(session, rows);
    expect(view.rowOnly).toBe(true);
    for (const row of view.rows) {
      expect(Math.max(...row.cells.map((c) => c.intensity))).toBeCloseTo(1.0, 12);
    }
    expect(view.rows[1]!.cells[1]!.intensity).toBeCloseTo(0.05 / 0.45, 12);
  });

  it("reads row-only comparability off the real cosine fixture", () => {
    const fixture = createdRowOnly();
    const view = buildSessionView(fixture.session, fixture.candidates);
    expect(view.comparability).toBe("row_only");
    expect(view.rowOnly).toBe(true);
  });

  it("flags suggested pairs and nothing else", () => {
    const fixture = created();
    const rows = afterAccept().candidates;
    const pairs = suggestion();
    const view = buildSessionView(fixture.session, rows, pairs);
    const flagged = view.rows
      .flatMap((r) => r.cells)
      .filter((c) => c.suggested)
      .map((c) => `${c.row}->${c.column}`);
    expect(flagged.sort()).toEqual(pairs.map((p) => `${p.row}->${p.column}`).sort());
  });

  it("carries taken_by through to the cells", () => {
    const fixture = created();
    const view = buildSessionView(fixture.session, afterAccept().candidates);
    const wRow = view.rows.find((r) => r.row === "w")!;
    const takenCell = wRow.cells.find((c) => c.column === "a")!;
    expect(takenCell.status).toBe("taken");
    expect(takenCell.takenBy).toBe("v");
  });
});

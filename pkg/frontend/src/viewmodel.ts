/**
 * Pure derivation of display state from service responses.
 *
 * Everything the page shows is computed here from the latest payloads; no
 * ranking, re-scoring, or cached model state happens on the client. The
 * candidate order inside each row is kept exactly as the service sent it.
 */

import { formatValue, heatIntensity } from "./format.js";
import type {
  Candidate,
  Comparability,
  RowCandidates,
  SessionInfo,
  SuggestionPair,
} from "./types.js";

export const TOP_K = 3;

export interface CandidateView extends Candidate {
  display: string;
}

export interface CellView {
  row: string;
  column: string;
  value: number;
  display: string;
  status: Candidate["status"];
  takenBy: string | null;
  intensity: number;
  best: boolean;
  suggested: boolean;
}

export interface RowView {
  row: string;
  state: "accepted" | "undecided";
  acceptedColumn: string | null;
  rejected: string[];
  noAvailableMatch: boolean;
  /** First TOP_K candidates, service order preserved verbatim. */
  top: CandidateView[];
  /** Every column in canonical column order, for the heatmap. */
  cells: CellView[];
}

export interface SessionView {
  session: SessionInfo;
  columns: string[];
  rows: RowView[];
  comparability: Comparability;
  rowOnly: boolean;
  suggestion: SuggestionPair[];
}

export function buildSessionView(
  session: SessionInfo,
  rows: RowCandidates[],
  suggestion: SuggestionPair[] | null = null,
): SessionView {
  const comparability: Comparability =
    session.matrix_meta?.comparability ?? "full";
  const rowOnly = comparability === "row_only";
  const columns = session.matrix_meta?.cols ?? session.sources.train.columns;
  const pending = suggestion ?? [];
  const suggested = new Map<string, Set<string>>();
  for (const pair of pending) {
    const cols = suggested.get(pair.row) ?? new Set<string>();
    cols.add(pair.column);
    suggested.set(pair.row, cols);
  }

  const globalMax = Math.max(
    0,
    ...rows.flatMap((entry) => entry.candidates.map((c) => c.value)),
  );

  const rowViews = rows.map((entry) => {
    const byColumn = new Map(entry.candidates.map((c) => [c.column, c]));
    const rowMax = Math.max(0, ...entry.candidates.map((c) => c.value));
    const reference = rowOnly ? rowMax : globalMax;
    const bestColumn = entry.candidates[0]?.column ?? null;
    const cells: CellView[] = columns.map((column) => {
      const cand = byColumn.get(column);
      if (!cand) {
        // Service candidate lists always cover every column; a hole means
        // the payloads are from different sessions.
        throw new Error(`row ${entry.row} has no candidate for column ${column}`);
      }
      return {
        row: entry.row,
        column,
        value: cand.value,
        display: formatValue(cand.value),
        status: cand.status,
        takenBy: cand.taken_by,
        intensity: heatIntensity(cand.value, reference),
        best: column === bestColumn,
        suggested: suggested.get(entry.row)?.has(column) ?? false,
      };
    });
    return {
      row: entry.row,
      state: entry.decision.state,
      acceptedColumn: entry.decision.column,
      rejected: entry.decision.rejected,
      noAvailableMatch: entry.no_available_match,
      top: entry.candidates
        .slice(0, TOP_K)
        .map((c) => ({ ...c, display: formatValue(c.value) })),
      cells,
    };
  });

  return {
    session,
    columns,
    rows: rowViews,
    comparability,
    rowOnly,
    suggestion: pending,
  };
}

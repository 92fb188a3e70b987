/**
 * Session editing flow: holds the latest service payloads, applies
 * optimistic decision updates, and rolls them back when the service
 * refuses a move.
 */

import { ApiError } from "./api.js";
import { buildSessionView, type SessionView } from "./viewmodel.js";
import type {
  DecisionRequest,
  DecisionResponse,
  RowCandidates,
  SessionInfo,
  SuggestionPair,
} from "./types.js";

/** The slice of the API client the controller actually uses. */
export interface DecisionApi {
  getSession(id: string): Promise<SessionInfo>;
  getCandidates(id: string): Promise<RowCandidates[]>;
  decide(id: string, request: DecisionRequest): Promise<DecisionResponse>;
  suggestion(id: string): Promise<SuggestionPair[]>;
}

export class ReviewController {
  session: SessionInfo | null = null;
  rows: RowCandidates[] = [];
  pendingSuggestion: SuggestionPair[] | null = null;
  notice: string | null = null;

  constructor(
    private readonly api: DecisionApi,
    private readonly onChange: () => void = () => {},
  ) {}

  view(): SessionView {
    if (!this.session) throw new Error("no session loaded");
    return buildSessionView(this.session, this.rows, this.pendingSuggestion);
  }

  async load(id: string): Promise<void> {
    this.session = await this.api.getSession(id);
    this.rows = this.session.status === "ready" ? await this.api.getCandidates(id) : [];
    this.pendingSuggestion = null;
    this.notice = null;
    this.onChange();
  }

  /**
   * Optimistically paint the accept, then let the service response (or its
   * conflict error) settle the real state.
   */
  async accept(row: string, column: string): Promise<void> {
    const snapshot = this.rows;
    this.rows = predictAccept(this.rows, row, column, this.oneToOne());
    this.notice = null;
    this.onChange();
    await this.post(snapshot, { row, action: "accept", column });
  }

  async reject(row: string, column: string): Promise<void> {
    await this.post(this.rows, { row, action: "reject", column });
  }

  /** Undo for a row: drops its accept and forgets its rejections. */
  async clear(row: string): Promise<void> {
    await this.post(this.rows, { row, action: "clear" });
  }

  async suggest(): Promise<void> {
    if (!this.session) return;
    try {
      this.pendingSuggestion = await this.api.suggestion(this.session.id);
      this.notice = null;
    } catch (error) {
      this.notice = describe(error);
    }
    this.onChange();
  }

  /** Accept every highlighted pair, first conflict aborts the rest. */
  async confirmSuggestion(): Promise<void> {
    const pairs = this.pendingSuggestion ?? [];
    this.pendingSuggestion = null;
    for (const pair of pairs) {
      await this.accept(pair.row, pair.column);
      if (this.notice) return;
    }
  }

  dismissSuggestion(): void {
    this.pendingSuggestion = null;
    this.onChange();
  }

  private oneToOne(): boolean {
    return this.session?.one_to_one ?? false;
  }

  private async post(snapshot: RowCandidates[], request: DecisionRequest): Promise<void> {
    if (!this.session) return;
    try {
      const response = await this.api.decide(this.session.id, request);
      this.rows = response.candidates;
      this.session = { ...this.session, decision_count: response.decision_count };
      this.notice = null;
    } catch (error) {
      this.rows = snapshot;
      this.notice = describe(error);
    }
    this.onChange();
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    // Conflict payloads carry the row holding the contested column; say so
    // inline rather than burying it in a console.
    if (error.payload.holding_row !== undefined) {
      return `${error.payload.message} — undo that row first`;
    }
    return error.payload.message;
  }
  return error instanceof Error ? error.message : String(error);
}

/** Client-side guess at the service's accept outcome, used until it answers. */
function predictAccept(
  rows: RowCandidates[],
  row: string,
  column: string,
  oneToOne: boolean,
): RowCandidates[] {
  return rows.map((entry) => {
    if (entry.row === row) {
      return {
        ...entry,
        decision: {
          state: "accepted" as const,
          column,
          rejected: entry.decision.rejected.filter((c) => c !== column),
        },
        candidates: entry.candidates.map((c) =>
          c.column === column
            ? { ...c, status: "accepted" as const, taken_by: null }
            : c,
        ),
      };
    }
    if (!oneToOne) return entry;
    return {
      ...entry,
      candidates: entry.candidates.map((c) =>
        c.column === column && c.status === "available"
          ? { ...c, status: "taken" as const, taken_by: row }
          : c,
      ),
    };
  });
}

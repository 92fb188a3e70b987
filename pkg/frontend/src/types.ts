/** Wire types for the /v1 review API. Field names mirror the JSON verbatim. */

export type Comparability = "full" | "row_only";

export type SessionStatus = "pending" | "ready" | "failed";

export type CandidateStatus = "available" | "accepted" | "rejected" | "taken";

export interface Candidate {
  column: string;
  value: number;
  status: CandidateStatus;
  taken_by: string | null;
}

export interface RowDecision {
  state: "accepted" | "undecided";
  column: string | null;
  rejected: string[];
}

/** One scored row with its full ranked candidate list and decision state. */
export interface RowCandidates {
  row: string;
  decision: RowDecision;
  candidates: Candidate[];
  no_available_match: boolean;
}

export interface SourceInfo {
  name: string;
  columns: string[];
  cells: number;
}

export interface MatrixMeta {
  rows: string[];
  cols: string[];
  method: string;
  comparability: Comparability;
  params: Record<string, unknown>;
}

export interface SessionConfig {
  method: string;
  scheme: string;
  classifier: string;
  one_to_one: boolean;
  format: string;
  nul_policy: string;
  epsilon: number | null;
}

export interface ErrorPayload {
  type: string;
  module: string;
  message: string;
  holding_row?: string;
  row?: number;
  limit?: number;
  pass_number?: number;
}

export interface SessionSummary {
  id: string;
  status: SessionStatus;
  created: string;
  updated: string;
  method: string;
  one_to_one: boolean;
  sources: { train: SourceInfo; test: SourceInfo };
  error: ErrorPayload | null;
}

export interface SessionInfo extends SessionSummary {
  config: SessionConfig;
  decision_count: number;
  /** Absent until the pipeline has produced a matrix. */
  matrix_meta?: MatrixMeta;
}

export interface DecisionRequest {
  row: string;
  action: "accept" | "reject" | "clear";
  column?: string;
}

export interface DecisionResponse {
  candidates: RowCandidates[];
  decision_count: number;
}

export interface SuggestionPair {
  row: string;
  column: string;
  value: number;
}

export interface ExportDecision {
  row: string;
  status: "accepted" | "undecided";
  column: string | null;
  value: number | null;
  rejected: string[];
}

export interface ExportDoc {
  format: string;
  version: number;
  session: string;
  created: string;
  config: SessionConfig;
  method: string;
  comparability: Comparability;
  decisions: ExportDecision[];
}

import { readFileSync } from "node:fs";

import type {
  DecisionResponse,
  ErrorPayload,
  ExportDoc,
  RowCandidates,
  SessionInfo,
  SuggestionPair,
} from "../src/types.js";

export interface CreatedFixture {
  session: SessionInfo;
  candidates: RowCandidates[];
}

export function loadFixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as T;
}

export function loadFixtureText(name: string): string {
  return readFileSync(new URL(`./fixtures/${name}`, import.meta.url), "utf8");
}

export const created = () => loadFixture<CreatedFixture>("session_created.json");
export const createdRowOnly = () => loadFixture<CreatedFixture>("session_row_only.json");
export const afterAccept = () => loadFixture<DecisionResponse>("after_accept.json");
export const structuredExport = () => loadFixture<ExportDoc>("export_structured.json");
export const suggestion = () =>
  loadFixture<{ suggestion: SuggestionPair[] }>("suggestion.json").suggestion;
export const conflictError = () =>
  loadFixture<{ error: ErrorPayload }>("conflict_error.json").error;

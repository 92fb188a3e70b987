/**
 * HTML string renderers. All are pure functions of a SessionView (plus the
 * occasional extra payload), so the page is re-painted wholesale after every
 * state change and the tests can assert on the exact markup.
 */

import { escapeHtml, heatColor } from "./format.js";
import type { ExportDoc, SessionSummary } from "./types.js";
import type { CellView, RowView, SessionView } from "./viewmodel.js";

function cellClasses(cell: CellView): string {
  const classes = ["cell", `status-${cell.status}`];
  if (cell.best) classes.push("best");
  if (cell.suggested) classes.push("suggested");
  return classes.join(" ");
}

export function renderHeatmap(view: SessionView): string {
  const header = view.columns
    .map((c) => `<th scope="col">${escapeHtml(c)}</th>`)
    .join("");
  const body = view.rows
    .map((row) => {
      const cells = row.cells
        .map(
          (cell) =>
            `<td class="${cellClasses(cell)}" data-row="${escapeHtml(cell.row)}"` +
            ` data-col="${escapeHtml(cell.column)}"` +
            ` style="background-color: ${heatColor(cell.intensity)}"` +
            ` title="${escapeHtml(cell.row)} / ${escapeHtml(cell.column)}: ${cell.display}">` +
            `${cell.display}</td>`,
        )
        .join("");
      return `<tr><th scope="row">${escapeHtml(row.row)}</th>${cells}</tr>`;
    })
    .join("");
  const badge = view.rowOnly
    ? '<span class="badge row-only-badge" title="values are only comparable within a row">row-scaled shading</span>'
    : "";
  return (
    `<section class="heatmap"><h2>Alignment matrix <small>(${escapeHtml(view.session.method)})</small> ${badge}</h2>` +
    `<table><thead><tr><th></th>${header}</tr></thead><tbody>${body}</tbody></table></section>`
  );
}

function renderCandidate(row: RowView, cand: RowView["top"][number]): string {
  const name = escapeHtml(cand.column);
  if (cand.status === "taken") {
    const holder = escapeHtml(cand.taken_by ?? "?");
    return (
      `<li class="candidate taken"><s>${name}</s> <span class="value">${cand.display}</span>` +
      ` <span class="hint">taken by ${holder}</span></li>`
    );
  }
  const actions =
    row.state === "accepted"
      ? ""
      : cand.status === "rejected"
        ? `<button data-action="clear" data-row="${escapeHtml(row.row)}">undo</button>`
        : `<button data-action="accept" data-row="${escapeHtml(row.row)}" data-col="${name}">accept</button>` +
          `<button data-action="reject" data-row="${escapeHtml(row.row)}" data-col="${name}">reject</button>`;
  const label = cand.status === "rejected" ? `<s>${name}</s>` : name;
  return (
    `<li class="candidate ${cand.status}">${label}` +
    ` <span class="value">${cand.display}</span> ${actions}</li>`
  );
}

export function renderRows(view: SessionView): string {
  const cards = view.rows
    .map((row) => {
      const state =
        row.state === "accepted"
          ? `<span class="state accepted">accepted ${escapeHtml(row.acceptedColumn ?? "")}</span>` +
            ` <button data-action="clear" data-row="${escapeHtml(row.row)}">undo</button>`
          : row.noAvailableMatch
            ? '<span class="state exhausted">no available match</span>' +
              ` <button data-action="clear" data-row="${escapeHtml(row.row)}">undo</button>`
            : '<span class="state undecided">undecided</span>';
      const top = row.top.map((cand) => renderCandidate(row, cand)).join("");
      return (
        `<article class="row-card" data-row="${escapeHtml(row.row)}">` +
        `<h3>${escapeHtml(row.row)}</h3> ${state}<ol class="top-candidates">${top}</ol></article>`
      );
    })
    .join("");
  return `<section class="rows"><h2>Fields to match</h2>${cards}</section>`;
}

export function renderSuggestion(view: SessionView): string {
  if (view.suggestion.length === 0) return "";
  const items = view.suggestion
    .map(
      (p) =>
        `<li>${escapeHtml(p.row)} &rarr; ${escapeHtml(p.column)}` +
        ` <span class="value">${p.value.toFixed(3)}</span></li>`,
    )
    .join("");
  return (
    '<section class="suggestion"><h2>Suggested completion</h2>' +
    `<ul>${items}</ul>` +
    '<button data-action="confirm-suggestion">accept all</button>' +
    '<button data-action="dismiss-suggestion">dismiss</button></section>'
  );
}

export function renderNotice(notice: string | null): string {
  return notice ? `<p class="notice" role="alert">${escapeHtml(notice)}</p>` : "";
}

export function renderToolbar(view: SessionView): string {
  const suggest = view.session.one_to_one
    ? '<button data-action="suggest">suggest completion</button>'
    : "";
  return (
    '<nav class="toolbar">' +
    suggest +
    '<button data-action="export-csv">export CSV</button>' +
    '<button data-action="export-json">export JSON</button>' +
    '<a href="#/">all sessions</a></nav>'
  );
}

export function renderSession(view: SessionView, notice: string | null): string {
  const info = view.session;
  const subtitle =
    `${escapeHtml(info.sources.test.name)} &rarr; ${escapeHtml(info.sources.train.name)}` +
    ` &middot; ${escapeHtml(info.config.scheme)} &middot; ${escapeHtml(info.config.classifier)}` +
    (info.one_to_one ? " &middot; 1-to-1" : "");
  return (
    `<header><h1>Session ${escapeHtml(info.id.slice(0, 8))}</h1><p>${subtitle}</p></header>` +
    renderToolbar(view) +
    renderNotice(notice) +
    renderSuggestion(view) +
    renderHeatmap(view) +
    renderRows(view)
  );
}

export function renderSessionList(sessions: SessionSummary[]): string {
  const rows = sessions
    .map(
      (s) =>
        `<tr><td><a href="#/session/${escapeHtml(s.id)}">${escapeHtml(s.id.slice(0, 8))}</a></td>` +
        `<td>${escapeHtml(s.status)}</td><td>${escapeHtml(s.method)}</td>` +
        `<td>${escapeHtml(s.sources.test.name)} &rarr; ${escapeHtml(s.sources.train.name)}</td>` +
        `<td>${escapeHtml(s.updated)}</td>` +
        `<td><button data-action="delete-session" data-id="${escapeHtml(s.id)}">delete</button></td></tr>`,
    )
    .join("");
  const table = sessions.length
    ? `<table class="sessions"><thead><tr><th>id</th><th>status</th><th>method</th><th>tables</th><th>updated</th><th></th></tr></thead><tbody>${rows}</tbody></table>`
    : "<p>No sessions yet; upload two tables to start one.</p>";
  return (
    "<header><h1>Alignment review</h1></header>" +
    table +
    `<form id="create-session" class="create">
      <h2>New session</h2>
      <label>labeled table <input type="file" name="train" required></label>
      <label>table to align <input type="file" name="test" required></label>
      <label>method <select name="method">
        <option value="arith">arith</option>
        <option value="geom">geom</option>
        <option value="geom_eps">geom_eps</option>
        <option value="cosine_ratio">cosine_ratio</option>
        <option value="sym1">sym1</option>
        <option value="sym2">sym2</option>
      </select></label>
      <label>scheme <input name="scheme" value="e1-w1-g2"></label>
      <label>classifier <input name="classifier" value="asd:1e-6"></label>
      <label><input type="checkbox" name="one_to_one" value="true"> one-to-one</label>
      <button type="submit">create</button>
    </form>`
  );
}

export function renderExport(doc: ExportDoc, csv: string | null): string {
  const rows = doc.decisions
    .map((d) => {
      const value = d.value === null ? "" : d.value.toFixed(3);
      const column = d.column === null ? "&mdash;" : escapeHtml(d.column);
      return `<tr><td>${escapeHtml(d.row)}</td><td>${column}</td><td>${value}</td><td>${escapeHtml(d.status)}</td></tr>`;
    })
    .join("");
  const csvBlock = csv
    ? `<h3>CSV</h3><pre class="export-csv">${escapeHtml(csv)}</pre>`
    : "";
  return (
    `<section class="export"><h2>Export &middot; session ${escapeHtml(doc.session.slice(0, 8))}</h2>` +
    `<table><thead><tr><th>field</th><th>match</th><th>value</th><th>status</th></tr></thead><tbody>${rows}</tbody></table>` +
    csvBlock +
    "</section>"
  );
}

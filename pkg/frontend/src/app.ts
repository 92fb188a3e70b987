/** Browser bootstrap: hash routing, event delegation, and repaints. */

import { ApiError, ReviewApi } from "./api.js";
import { ReviewController } from "./controller.js";
import { renderExport, renderNotice, renderSession, renderSessionList } from "./render.js";

const api = new ReviewApi();
const root = document.getElementById("app") as HTMLElement;
let controller: ReviewController | null = null;
let exportPanel = "";

function sessionId(): string | null {
  const match = window.location.hash.match(/^#\/session\/([0-9a-f]+)$/);
  return match ? (match[1] ?? null) : null;
}

function paint(): void {
  if (!controller || !controller.session) return;
  if (controller.session.status !== "ready") {
    const error = controller.session.error;
    root.innerHTML =
      `<header><h1>Session ${controller.session.id.slice(0, 8)}</h1></header>` +
      renderNotice(
        error ? `${error.module}: ${error.message}` : `status: ${controller.session.status}`,
      ) +
      '<a href="#/">back to sessions</a>';
    return;
  }
  root.innerHTML = renderSession(controller.view(), controller.notice) + exportPanel;
}

async function showList(): Promise<void> {
  controller = null;
  exportPanel = "";
  try {
    root.innerHTML = renderSessionList(await api.listSessions());
  } catch (error) {
    root.innerHTML = renderNotice(describe(error));
  }
}

async function showSession(id: string): Promise<void> {
  exportPanel = "";
  controller = new ReviewController(api, paint);
  try {
    await controller.load(id);
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      // Stale or mistyped id: back to the list rather than a dead page.
      window.location.hash = "#/";
      return;
    }
    root.innerHTML = renderNotice(describe(error));
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return error.payload.message;
  return error instanceof Error ? error.message : String(error);
}

async function route(): Promise<void> {
  const id = sessionId();
  if (id) await showSession(id);
  else await showList();
}

async function handleAction(target: HTMLElement): Promise<void> {
  const action = target.dataset.action;
  const row = target.dataset.row ?? "";
  const col = target.dataset.col ?? "";
  if (action === "delete-session") {
    await api.deleteSession(target.dataset.id ?? "");
    await showList();
    return;
  }
  if (!controller || !controller.session) return;
  const id = controller.session.id;
  switch (action) {
    case "accept":
      await controller.accept(row, col);
      break;
    case "reject":
      await controller.reject(row, col);
      break;
    case "clear":
      await controller.clear(row);
      break;
    case "suggest":
      await controller.suggest();
      break;
    case "confirm-suggestion":
      await controller.confirmSuggestion();
      break;
    case "dismiss-suggestion":
      controller.dismissSuggestion();
      break;
    case "export-json": {
      exportPanel = renderExport(await api.exportStructured(id), null);
      paint();
      break;
    }
    case "export-csv": {
      const [doc, csv] = await Promise.all([api.exportStructured(id), api.exportCsv(id)]);
      exportPanel = renderExport(doc, csv);
      paint();
      break;
    }
    default:
      break;
  }
}

root.addEventListener("click", (event) => {
  const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
  if (!target) return;
  event.preventDefault();
  void handleAction(target);
});

root.addEventListener("submit", (event) => {
  const form = event.target as HTMLFormElement;
  if (form.id !== "create-session") return;
  event.preventDefault();
  void (async () => {
    try {
      const session = await api.createSession(new FormData(form));
      window.location.hash = `#/session/${session.id}`;
    } catch (error) {
      root.insertAdjacentHTML("afterbegin", renderNotice(describe(error)));
    }
  })();
});

window.addEventListener("hashchange", () => void route());
void route();

"""Session-based review service over the alignment pipeline.

A session holds two uploaded tables, the alignment matrix computed between
them, and an event log of human accept/reject decisions. All state lives in
one JSON document per session, rewritten atomically after every mutation;
replaying the decision log from an empty state always reproduces the
current decisions. Mutations within a session are serialized by a lock;
different sessions are fully independent.

Endpoints (all under /v1):
  POST   /sessions                 multipart create (files train, test)
  GET    /sessions                 list summaries
  GET    /sessions/{id}            session snapshot without matrix values
  GET    /sessions/{id}/matrix     full matrix for heatmap rendering
  GET    /sessions/{id}/candidates ranked candidates with availability
  POST   /sessions/{id}/decisions  {row, action: accept|reject|clear, column}
  GET    /sessions/{id}/suggestion optimal completion of undecided rows
  GET    /sessions/{id}/export     format=csv|structured
  DELETE /sessions/{id}
"""

from __future__ import annotations

import argparse
import json
import os
import tempfile
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse
from scipy.optimize import linear_sum_assignment

from . import align as al
from .align import AlignmentMatrix, aggregate, align_sym1, align_sym2, score_cells, train_model
from .cli import parse_classifier
from .errors import (
    ConfigurationError,
    DecisionConflictError,
    FieldAlignError,
    InfeasibleMatchingError,
    SessionNotFoundError,
    UploadTooLargeError,
)
from .featurize import TokenizationScheme
from .ingest import EMPTY_IS_NUL, FORMATS, NUL_POLICIES, DataSource, load_table

SESSION_FORMAT = "fieldalign-session"
SESSION_VERSION = 1

DEFAULT_SYNC_CELL_LIMIT = 20000
DEFAULT_UPLOAD_LIMIT = 5_000_000

SERVICE_METHODS = (
    al.METHOD_ARITH,
    al.METHOD_GEOM,
    al.METHOD_GEOM_EPS,
    al.METHOD_COSINE_RATIO,
    al.METHOD_SYM1,
    al.METHOD_SYM2,
)

_HTTP_STATUS = {
    "SessionNotFoundError": 404,
    "DecisionConflictError": 409,
    "InfeasibleMatchingError": 409,
    "UploadTooLargeError": 413,
    "DivergenceError": 422,
    "DivisionGuardError": 422,
}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def error_payload(exc: FieldAlignError) -> dict:
    body = {"type": type(exc).__name__, "module": exc.module, "message": str(exc)}
    for attr in ("holding_row", "row", "limit", "pass_number"):
        value = getattr(exc, attr, None)
        if value is not None:
            body[attr] = value
    return body


def _error_status(exc: FieldAlignError) -> int:
    return _HTTP_STATUS.get(type(exc).__name__, 400)


class SessionStore:
    """One JSON document per session, written atomically, locked per id."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _path(self, session_id: str) -> Path:
        if not session_id.isalnum():
            raise SessionNotFoundError(f"no session {session_id!r}")
        return self.root / f"{session_id}.json"

    def load(self, session_id: str) -> dict:
        path = self._path(session_id)
        if not path.exists():
            raise SessionNotFoundError(f"no session {session_id!r}")
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)

    def save(self, doc: dict) -> None:
        path = self._path(doc["id"])
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(doc, handle, indent=1)
                handle.write("\n")
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def delete(self, session_id: str) -> None:
        path = self._path(session_id)
        if not path.exists():
            raise SessionNotFoundError(f"no session {session_id!r}")
        path.unlink()

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json"))


def empty_decisions(rows: list[str]) -> dict:
    return {row: {"accepted": None, "rejected": []} for row in rows}


def apply_decision(
    decisions: dict,
    row: str,
    action: str,
    column: str | None,
    one_to_one: bool,
    rows: list[str],
    cols: list[str],
) -> None:
    """Apply one decision in place; raises instead of mutating on any error."""
    if row not in decisions:
        raise ConfigurationError(f"unknown row {row!r}", module="service")
    if action not in ("accept", "reject", "clear"):
        raise ConfigurationError(f"unknown action {action!r}", module="service")
    if action == "clear":
        decisions[row]["accepted"] = None
        decisions[row]["rejected"] = []
        return
    if column is None:
        raise ConfigurationError(f"action {action!r} needs a column", module="service")
    if column not in cols:
        raise ConfigurationError(f"unknown column {column!r}", module="service")
    entry = decisions[row]
    if action == "accept":
        if one_to_one:
            for other_row in rows:
                if other_row != row and decisions[other_row]["accepted"] == column:
                    raise DecisionConflictError(
                        f"column {column!r} is already accepted by row {other_row!r}",
                        holding_row=other_row,
                    )
        entry["accepted"] = column
        if column in entry["rejected"]:
            entry["rejected"] = [c for c in entry["rejected"] if c != column]
    else:  # reject
        if entry["accepted"] == column:
            entry["accepted"] = None
        if column not in entry["rejected"]:
            entry["rejected"] = sorted(entry["rejected"] + [column])


def replay_log(log: list[dict], rows: list[str], cols: list[str], one_to_one: bool) -> dict:
    """Rebuild the decisions state from scratch by replaying the event log."""
    decisions = empty_decisions(rows)
    for event in log:
        apply_decision(
            decisions, event["row"], event["action"], event.get("column"), one_to_one, rows, cols
        )
    return decisions


def build_candidates(doc: dict) -> list[dict]:
    """Ranked candidates per row with availability statuses.

    Every column appears with a status: accepted (by this row), rejected
    (by this row), taken (accepted by another row under 1-to-1), or
    available. The available subsequence is exactly the best_matches
    ranking of the matrix restricted to non-excluded columns.
    """
    matrix = doc["matrix"]
    rows = matrix["rows"]
    cols = matrix["cols"]
    one_to_one = doc["config"]["one_to_one"]
    decisions = doc["decisions"]
    taken_by = {}
    if one_to_one:
        for row in rows:
            accepted = decisions[row]["accepted"]
            if accepted is not None:
                taken_by[accepted] = row
    out = []
    for j, row in enumerate(rows):
        values = matrix["values"][j]
        order = np.lexsort((np.arange(len(cols)), -np.asarray(values)))
        entry = decisions[row]
        candidates = []
        available_left = 0
        for i in order:
            col = cols[int(i)]
            if col == entry["accepted"]:
                status = "accepted"
            elif col in entry["rejected"]:
                status = "rejected"
            elif col in taken_by and taken_by[col] != row:
                status = "taken"
            else:
                status = "available"
                available_left += 1
            candidates.append(
                {
                    "column": col,
                    "value": float(values[int(i)]),
                    "status": status,
                    "taken_by": taken_by.get(col) if status == "taken" else None,
                }
            )
        out.append(
            {
                "row": row,
                "decision": {
                    "state": "accepted" if entry["accepted"] else "undecided",
                    "column": entry["accepted"],
                    "rejected": list(entry["rejected"]),
                },
                "candidates": candidates,
                "no_available_match": entry["accepted"] is None and available_left == 0,
            }
        )
    return out


def suggest_completion(doc: dict) -> list[dict]:
    """Optimal assignment of undecided rows to still-available columns.

    Accepted pairs are fixed constraints, per-row rejections are forbidden
    entries; the remainder is solved as a sum-mode assignment problem.
    """
    if not doc["config"]["one_to_one"]:
        raise ConfigurationError("suggestion requires a 1-to-1 session", module="service")
    matrix = doc["matrix"]
    rows = matrix["rows"]
    cols = matrix["cols"]
    decisions = doc["decisions"]
    accepted_cols = {d["accepted"] for d in decisions.values() if d["accepted"]}
    undecided = [j for j, row in enumerate(rows) if decisions[row]["accepted"] is None]
    available = [i for i, col in enumerate(cols) if col not in accepted_cols]
    if not undecided:
        return []
    if len(undecided) > len(available):
        raise InfeasibleMatchingError(
            f"{len(undecided)} undecided rows but only {len(available)} available columns"
        )
    values = np.asarray(matrix["values"], dtype=float)
    cost = np.empty((len(undecided), len(available)))
    for a, j in enumerate(undecided):
        rejected = set(decisions[rows[j]]["rejected"])
        for b, i in enumerate(available):
            cost[a, b] = np.inf if cols[i] in rejected else -values[j, i]
    try:
        row_idx, col_idx = linear_sum_assignment(cost)
    except ValueError:
        raise InfeasibleMatchingError(
            "rejections leave no feasible assignment for the undecided rows"
        ) from None
    if np.isinf(cost[row_idx, col_idx]).any():
        raise InfeasibleMatchingError(
            "rejections leave no feasible assignment for the undecided rows"
        )
    suggestions = []
    for a, b in zip(row_idx, col_idx):
        j, i = undecided[a], available[b]
        suggestions.append({"row": rows[j], "column": cols[i], "value": float(values[j, i])})
    suggestions.sort(key=lambda s: rows.index(s["row"]))
    return suggestions


def export_csv(doc: dict) -> str:
    """Deterministic mapping CSV; undecided rows carry the UNDECIDED sentinel."""
    matrix = doc["matrix"]
    col_index = {c: i for i, c in enumerate(matrix["cols"])}
    lines = ["ds2_column,ds1_column,value,status"]
    for j, row in enumerate(matrix["rows"]):
        entry = doc["decisions"][row]
        if entry["accepted"]:
            value = matrix["values"][j][col_index[entry["accepted"]]]
            lines.append(f"{row},{entry['accepted']},{value!r},accepted")
        else:
            lines.append(f"{row},UNDECIDED,,undecided")
    return "\n".join(lines) + "\n"


def export_structured(doc: dict) -> dict:
    matrix = doc["matrix"]
    col_index = {c: i for i, c in enumerate(matrix["cols"])}
    decisions = []
    for j, row in enumerate(matrix["rows"]):
        entry = doc["decisions"][row]
        item = {
            "row": row,
            "status": "accepted" if entry["accepted"] else "undecided",
            "column": entry["accepted"],
            "value": (
                matrix["values"][j][col_index[entry["accepted"]]] if entry["accepted"] else None
            ),
            "rejected": list(entry["rejected"]),
        }
        decisions.append(item)
    return {
        "format": "fieldalign-mapping",
        "version": 1,
        "session": doc["id"],
        "created": doc["created"],
        "config": doc["config"],
        "method": matrix["method"],
        "comparability": matrix["comparability"],
        "decisions": decisions,
    }


def compute_matrix(train: DataSource, test: DataSource, config: dict) -> AlignmentMatrix:
    scheme = TokenizationScheme.parse(config["scheme"])
    cfg = parse_classifier(config["classifier"])
    method = config["method"]
    if method == al.METHOD_SYM1:
        return align_sym1(train, test, scheme, cfg)
    if method == al.METHOD_SYM2:
        return align_sym2(train, test, scheme, cfg)
    model = train_model(train, scheme, cfg)
    scores = score_cells(model, test, train.column_names)
    self_scores = (
        score_cells(model, train, train.column_names) if method == al.METHOD_COSINE_RATIO else None
    )
    return aggregate(scores, self_scores, method, epsilon=config.get("epsilon"))


def _matrix_doc(matrix: AlignmentMatrix) -> dict:
    return {
        "rows": list(matrix.rows),
        "cols": list(matrix.cols),
        "values": [[float(v) for v in row] for row in matrix.values],
        "method": matrix.method,
        "comparability": matrix.comparability,
        "params": matrix.params,
    }


def _session_summary(doc: dict) -> dict:
    return {
        "id": doc["id"],
        "status": doc["status"],
        "created": doc["created"],
        "updated": doc["updated"],
        "method": doc["config"]["method"],
        "one_to_one": doc["config"]["one_to_one"],
        "sources": doc["sources"],
        "error": doc.get("error"),
    }


def _session_view(doc: dict) -> dict:
    view = _session_summary(doc)
    view["config"] = doc["config"]
    view["decision_count"] = len(doc["decision_log"])
    if doc.get("matrix"):
        view["matrix_meta"] = {
            "rows": doc["matrix"]["rows"],
            "cols": doc["matrix"]["cols"],
            "method": doc["matrix"]["method"],
            "comparability": doc["matrix"]["comparability"],
            "params": doc["matrix"]["params"],
        }
    return view


def create_app(
    sessions_dir: str | Path | None = None,
    sync_cell_limit: int = DEFAULT_SYNC_CELL_LIMIT,
    upload_limit: int = DEFAULT_UPLOAD_LIMIT,
) -> FastAPI:
    if sessions_dir is None:
        sessions_dir = os.environ.get("FIELDALIGN_SESSIONS_DIR", "sessions")
    store = SessionStore(Path(sessions_dir))
    app = FastAPI(title="fieldalign review service", version="1.0")

    @app.exception_handler(FieldAlignError)
    def _handle_module_error(_request: Request, exc: FieldAlignError):
        return JSONResponse(status_code=_error_status(exc), content={"error": error_payload(exc)})

    def _load_upload(upload: UploadFile, format: str, nul_policy: str) -> DataSource:
        data = upload.file.read()
        if len(data) > upload_limit:
            raise UploadTooLargeError(
                f"upload {upload.filename!r} exceeds {upload_limit} bytes", limit=upload_limit
            )
        suffix = ".tsv" if format == "tsv" else ".csv"
        fd, tmp = tempfile.mkstemp(suffix=suffix)
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            name = Path(upload.filename or "table").stem or "table"
            return load_table(tmp, format=format, nul_policy=nul_policy, name=name)
        finally:
            os.unlink(tmp)

    def _finish_pipeline(doc: dict, train: DataSource, test: DataSource) -> None:
        try:
            matrix = compute_matrix(train, test, doc["config"])
            doc["matrix"] = _matrix_doc(matrix)
            doc["decisions"] = empty_decisions(doc["matrix"]["rows"])
            doc["status"] = "ready"
        except FieldAlignError as exc:
            doc["status"] = "failed"
            doc["error"] = error_payload(exc)
        doc["updated"] = _now()
        with store.lock(doc["id"]):
            store.save(doc)

    @app.post("/v1/sessions")
    def create_session(
        train: UploadFile = File(...),
        test: UploadFile = File(...),
        method: str = Form(al.METHOD_ARITH),
        scheme: str = Form("e1-w1-g2"),
        classifier: str = Form("asd:1e-6"),
        one_to_one: bool = Form(False),
        format: str = Form("csv"),
        nul_policy: str = Form(EMPTY_IS_NUL),
        epsilon: float | None = Form(None),
    ):
        if method not in SERVICE_METHODS:
            raise ConfigurationError(f"unknown method {method!r}", module="service")
        if format not in FORMATS:
            raise ConfigurationError(f"unknown format {format!r}", module="service")
        if nul_policy not in NUL_POLICIES:
            raise ConfigurationError(f"unknown nul policy {nul_policy!r}", module="service")
        TokenizationScheme.parse(scheme)
        parse_classifier(classifier)
        train_ds = _load_upload(train, format, nul_policy)
        test_ds = _load_upload(test, format, nul_policy)
        config = {
            "method": method,
            "scheme": scheme,
            "classifier": classifier,
            "one_to_one": one_to_one,
            "format": format,
            "nul_policy": nul_policy,
            "epsilon": epsilon,
        }
        now = _now()
        doc = {
            "format": SESSION_FORMAT,
            "version": SESSION_VERSION,
            "id": uuid.uuid4().hex,
            "created": now,
            "updated": now,
            "status": "pending",
            "error": None,
            "config": config,
            "sources": {
                "train": {"name": train_ds.name, "columns": list(train_ds.column_names), "cells": train_ds.total_cells},
                "test": {"name": test_ds.name, "columns": list(test_ds.column_names), "cells": test_ds.total_cells},
            },
            "matrix": None,
            "decision_log": [],
            "decisions": {},
        }
        total_cells = train_ds.total_cells + test_ds.total_cells
        if total_cells <= sync_cell_limit:
            _finish_pipeline(doc, train_ds, test_ds)
            if doc["status"] == "failed":
                return JSONResponse(status_code=422, content={"error": doc["error"], "session": _session_view(doc)})
            return JSONResponse(
                status_code=201,
                content={"session": _session_view(doc), "candidates": build_candidates(doc)},
            )
        with store.lock(doc["id"]):
            store.save(doc)
        worker = threading.Thread(target=_finish_pipeline, args=(doc, train_ds, test_ds), daemon=True)
        worker.start()
        return JSONResponse(status_code=202, content={"session": _session_view(doc)})

    @app.get("/v1/sessions")
    def list_sessions():
        summaries = []
        for session_id in store.list_ids():
            try:
                summaries.append(_session_summary(store.load(session_id)))
            except (json.JSONDecodeError, KeyError):
                continue
        return {"sessions": summaries}

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return {"session": _session_view(store.load(session_id))}

    def _ready_doc(session_id: str) -> dict:
        doc = store.load(session_id)
        if doc["status"] != "ready":
            raise ConfigurationError(
                f"session {session_id} is not ready (status: {doc['status']})", module="service"
            )
        return doc

    @app.get("/v1/sessions/{session_id}/matrix")
    def get_matrix(session_id: str):
        return {"matrix": _ready_doc(session_id)["matrix"]}

    @app.get("/v1/sessions/{session_id}/candidates")
    def get_candidates(session_id: str):
        return {"candidates": build_candidates(_ready_doc(session_id))}

    @app.post("/v1/sessions/{session_id}/decisions")
    def post_decision(session_id: str, body: dict):
        row = body.get("row")
        action = body.get("action")
        column = body.get("column")
        if not isinstance(row, str) or not isinstance(action, str):
            raise ConfigurationError("decision body needs string row and action", module="service")
        with store.lock(session_id):
            doc = store.load(session_id)
            if doc["status"] != "ready":
                raise ConfigurationError(
                    f"session {session_id} is not ready (status: {doc['status']})", module="service"
                )
            matrix = doc["matrix"]
            apply_decision(
                doc["decisions"], row, action, column,
                doc["config"]["one_to_one"], matrix["rows"], matrix["cols"],
            )
            doc["decision_log"].append(
                {"seq": len(doc["decision_log"]) + 1, "row": row, "action": action, "column": column}
            )
            doc["updated"] = _now()
            store.save(doc)  # durable before the response below
        return {"candidates": build_candidates(doc), "decision_count": len(doc["decision_log"])}

    @app.get("/v1/sessions/{session_id}/suggestion")
    def get_suggestion(session_id: str):
        return {"suggestion": suggest_completion(_ready_doc(session_id))}

    @app.get("/v1/sessions/{session_id}/export")
    def get_export(session_id: str, format: str = "structured"):
        doc = _ready_doc(session_id)
        if format == "csv":
            return PlainTextResponse(export_csv(doc), media_type="text/csv")
        if format == "structured":
            return export_structured(doc)
        raise ConfigurationError(f"unknown export format {format!r}", module="service")

    @app.delete("/v1/sessions/{session_id}")
    def delete_session(session_id: str):
        with store.lock(session_id):
            store.delete(session_id)
        return {"deleted": session_id}

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fieldalign-service", description="Run the review service.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8400)
    parser.add_argument("--sessions-dir", default=None, help="where session documents live")
    parser.add_argument(
        "--sync-cell-limit", type=int, default=DEFAULT_SYNC_CELL_LIMIT,
        help="cell count above which alignment runs in the background",
    )
    parser.add_argument("--upload-limit", type=int, default=DEFAULT_UPLOAD_LIMIT)
    args = parser.parse_args(argv)
    import uvicorn

    app = create_app(args.sessions_dir, args.sync_cell_limit, args.upload_limit)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(main())

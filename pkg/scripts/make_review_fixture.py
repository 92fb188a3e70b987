#!/usr/bin/env python3
"""Capture review-service responses as JSON fixtures for the frontend tests.

Drives the real HTTP app in-process (no network) through a small scripted
session: create, accept one match, fetch a completion suggestion, export.
Each response body is saved verbatim so UI tests can assert against exactly
what the service produces.
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fastapi.testclient import TestClient

from fieldalign.service import create_app

# Five columns a side; each test column mostly mirrors one training column
# with a little bleed into the others so second and third candidates are
# populated with distinct values.
TRAIN = {
    "a": ["red"] * 6 + ["rose"] * 4,
    "b": ["blue"] * 6 + ["cyan"] * 4,
    "c": ["green"] * 6 + ["lime"] * 4,
    "d": ["gold"] * 6 + ["amber"] * 4,
    "e": ["gray"] * 6 + ["slate"] * 4,
}
TEST = {
    "v": ["red"] * 5 + ["rose"] * 3 + ["blue", "green"],
    "w": ["blue"] * 5 + ["cyan"] * 3 + ["green", "red"],
    "x": ["green"] * 5 + ["lime"] * 3 + ["gold", "blue"],
    "y": ["gold"] * 5 + ["amber"] * 3 + ["gray", "green"],
    "z": ["gray"] * 5 + ["slate"] * 3 + ["red", "gold"],
}


def table_bytes(columns):
    names = list(columns)
    rows = zip(*columns.values())
    return ("\n".join([",".join(names)] + [",".join(r) for r in rows]) + "\n").encode()


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--out-dir",
        default=str(Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"),
        help="fixture directory",
    )
    args = parser.parse_args(argv)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        client = TestClient(create_app(sessions_dir=Path(tmp) / "sessions"))
        created = client.post(
            "/v1/sessions",
            files={
                "train": ("catalog.csv", table_bytes(TRAIN)),
                "test": ("feed.csv", table_bytes(TEST)),
            },
            data={"scheme": "e1-w1-g0", "classifier": "asd:1e-6", "one_to_one": "true"},
        )
        created.raise_for_status()
        session_id = created.json()["session"]["id"]
        base = f"/v1/sessions/{session_id}"

        row_only = client.post(
            "/v1/sessions",
            files={
                "train": ("catalog.csv", table_bytes(TRAIN)),
                "test": ("feed.csv", table_bytes(TEST)),
            },
            data={
                "scheme": "e1-w1-g0",
                "classifier": "asd:1e-6",
                "method": "cosine_ratio",
            },
        )
        row_only.raise_for_status()

        fixtures = {
            "session_created.json": created.json(),
            "session_row_only.json": row_only.json(),
        }
        accepted = client.post(
            f"{base}/decisions", json={"row": "v", "action": "accept", "column": "a"}
        )
        accepted.raise_for_status()
        fixtures["after_accept.json"] = accepted.json()
        fixtures["suggestion.json"] = client.get(f"{base}/suggestion").json()
        fixtures["export_structured.json"] = client.get(f"{base}/export").json()
        conflict = client.post(
            f"{base}/decisions", json={"row": "w", "action": "accept", "column": "a"}
        )
        fixtures["conflict_error.json"] = conflict.json()

        for name, payload in fixtures.items():
            (out / name).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        (out / "export.csv").write_text(
            client.get(f"{base}/export", params={"format": "csv"}).text, encoding="utf-8"
        )
    print(f"fixtures written to {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

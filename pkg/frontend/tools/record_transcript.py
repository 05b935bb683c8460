"""Record a real service transcript for the UI contract test.

Drives the session service through the exact request sequence the web
client makes (create, then next/history after every preference) and
freezes each request/response pair into tests/fixtures/transcript.json.

Run from the frontend directory:

    python3 tools/record_transcript.py
"""

import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

from prefbo.service import create_app

ORDERS = [1, -1, 0, 1, -1]  # includes one Equivalent
BOX = [[0.0, 1.0], [0.0, 1.0]]
LABELS = ["speed", "comfort"]


def main() -> int:
    out_path = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "transcript.json"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    entries = []

    def record(method, path, body, response):
        entries.append({
            "method": method,
            "path": path,
            "request_body": body,
            "status": response.status_code,
            "response": response.json(),
        })
        return response.json()

    app = create_app(data_dir=out_path.parent / "_scratch_sessions", seed=20260810)
    with TestClient(app) as client:
        create_body = {"box": BOX, "labels": LABELS}
        doc = record("POST", "/sessions",
                     create_body, client.post("/sessions", json=create_body))
        sid = doc["id"]
        record("GET", f"/sessions/{sid}/next", None,
               client.get(f"/sessions/{sid}/next"))
        record("GET", f"/sessions/{sid}/history", None,
               client.get(f"/sessions/{sid}/history"))
        for order in ORDERS:
            pair = client.get(f"/sessions/{sid}/next").json()["pair"]
            pref_body = {"x1": pair[0], "x2": pair[1], "order": order}
            record("POST", f"/sessions/{sid}/preference", pref_body,
                   client.post(f"/sessions/{sid}/preference", json=pref_body))
            record("GET", f"/sessions/{sid}/next", None,
                   client.get(f"/sessions/{sid}/next"))
            record("GET", f"/sessions/{sid}/history", None,
                   client.get(f"/sessions/{sid}/history"))

    out_path.write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")
    print(f"recorded {len(entries)} exchanges to {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

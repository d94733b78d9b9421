"""Drive the HTTP API end to end with an in-process client.

The same app serves over the network via `whykit serve --port 8000`;
this demo mounts it in-process so it runs with no open port.

Run from the repository root:  python3 demos/07_http_service.py
"""

import json
import tempfile

from fastapi.testclient import TestClient

from whykit.service import create_app

QUESTION = "Why was this patient predicted to have diabetes?"


def main():
    with tempfile.TemporaryDirectory() as store:
        with TestClient(create_app(store)) as client:
            health = client.get("/v1/health").json()
            print(f"GET /v1/health -> {health}")

            registry = client.get("/v1/registry").json()
            print(f"GET /v1/registry -> {len(registry['types'])} types, "
                  f"{len(registry['explainers'])} explainers")

            parsed = client.post(
                "/v1/interpretations:parse",
                json={"text": "explain( a1c > 150 and bmi = (30, 32) )"},
            ).json()
            print(f"POST /v1/interpretations:parse -> canonical {parsed['canonical']!r}")

            ask = client.post("/v1/ask", json={"question": QUESTION}).json()
            print(f"POST /v1/ask -> type {ask['explanation_type']}, run {ask['run_id']}, "
                  f"grounding {ask['tuple']['grounding']}")

            replay = client.post(f"/v1/runs/{ask['run_id']}:replay").json()
            print(f"POST /v1/runs/{{id}}:replay -> tuple identical: "
                  f"{replay['tuple'] == ask['tuple']}")

            print("\nexplanation text:")
            print(json.dumps(ask["tuple"]["text"], indent=2))


if __name__ == "__main__":
    main()

"""HTTP service exposing the question-to-explanation pipeline.

All routes live under /v1.  Errors raised by the library map to JSON
bodies ``{"error": {"code", "message", "detail"}}`` with the status code
carried by the error class; an unparseable interpretation is a 422, an
unknown run or record a 404.  A question whose type has no registered
explainers is not an error: /v1/ask answers 200 with a null tuple and the
warning list.

Set WHYKIT_TOKEN to require ``Authorization: Bearer <token>`` on every
route except /v1/health.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import replace
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import __version__
from .decompose import PatternDecomposer
from .delegate import DelegateConfig, _json_bound, delegate, list_runs, load_run
from .errors import NoOutputs, UnknownDataset, UnknownModelKind, WhykitError
from .interp import parse_interpretation
from .registry import default_registry
from .schema import DatasetSchema, pima_csv_path, pima_schema
from .synthesis import load_tuple, replay, save_tuple, synthesize
from .tabular import (
    DEFAULT_TRAIN_CONFIG,
    MODEL_KINDS,
    Dataset,
    load_dataset,
    load_model,
    save_model,
    train,
)


class Store:
    """Datasets, models, and runs under one root directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        for sub in ("datasets", "models", "runs"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self.registry = default_registry()
        self.datasets: dict[str, Dataset] = {}
        self.models: dict[str, object] = {}
        self._default_models: dict[str, str] = {}
        self._lock = threading.Lock()
        pima = load_dataset(pima_csv_path(), pima_schema())
        self.datasets["pima"] = pima
        self.datasets[pima.content_hash] = pima

    @property
    def runs_root(self) -> Path:
        return self.root / "runs"

    def dataset(self, dataset_id: str) -> Dataset:
        ds = self.datasets.get(dataset_id)
        if ds is None:
            raise UnknownDataset(
                f"unknown dataset '{dataset_id}'",
                detail={"known": sorted(self.datasets)},
            )
        return ds

    def add_dataset(self, csv_text: str, schema: DatasetSchema) -> Dataset:
        ds = load_dataset(csv_text, schema)
        with self._lock:
            self.datasets[ds.content_hash] = ds
            path = self.root / "datasets" / f"{ds.content_hash}.json"
            path.write_text(
                json.dumps({"schema": schema.to_dict(), "csv_text": csv_text})
            )
        return ds

    def model(self, model_id: str):
        tm = self.models.get(model_id)
        if tm is None:
            path = self.root / "models" / f"{model_id}.json"
            if not path.is_file():
                raise UnknownModelKind(
                    f"unknown model '{model_id}'",
                    detail={"known": sorted(self.models)},
                )
            tm = load_model(path)
            with self._lock:
                self.models[model_id] = tm
        return tm

    def add_model(self, dataset_id: str, kind: str, config: dict | None = None):
        ds = self.dataset(dataset_id)
        cfg = dict(DEFAULT_TRAIN_CONFIG)
        cfg.update(config or {})
        tm = train(ds, kind, cfg)
        with self._lock:
            self.models[tm.model_id] = tm
            save_model(tm, self.root / "models" / f"{tm.model_id}.json")
        return tm

    def default_model(self, dataset_id: str):
        """One shared logistic model per dataset, trained on first use."""
        with self._lock:
            model_id = self._default_models.get(dataset_id)
        if model_id is not None:
            return self.model(model_id)
        tm = self.add_model(dataset_id, "logistic")
        with self._lock:
            self._default_models[dataset_id] = tm.model_id
        return tm


def create_app(root: str | Path = "whykit_store") -> FastAPI:
    app = FastAPI(title="whykit", version=__version__)
    store = Store(root)
    app.state.store = store
    token = os.environ.get("WHYKIT_TOKEN")

    @app.middleware("http")
    async def _auth(request: Request, call_next):
        if token and request.url.path != "/v1/health":
            got = request.headers.get("authorization", "")
            if got != f"Bearer {token}":
                return JSONResponse(
                    status_code=401,
                    content={
                        "error": {
                            "code": "unauthorized",
                            "message": "missing or invalid bearer token",
                            "detail": None,
                        }
                    },
                )
        return await call_next(request)

    # Added after _auth so CORS sits outside it: browser preflights cannot
    # carry credentials and must be answered before the token check.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(WhykitError)
    async def _whykit_error(request: Request, exc: WhykitError):
        return JSONResponse(status_code=exc.http_status, content={"error": exc.to_json()})

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/v1/registry")
    def get_registry():
        return store.registry.to_dict()

    @app.post("/v1/datasets")
    def post_dataset(body: dict):
        schema = (
            DatasetSchema.from_dict(body["schema"]) if body.get("schema") else pima_schema()
        )
        ds = store.add_dataset(body["csv_text"], schema)
        return {
            "dataset_id": ds.content_hash,
            "n": ds.n,
            "features": ds.feature_names,
            "imputation_log": ds.imputation_log,
        }

    @app.get("/v1/datasets/{dataset_id}")
    def get_dataset(dataset_id: str):
        ds = store.dataset(dataset_id)
        return {
            "dataset_id": dataset_id,
            "n": ds.n,
            "features": ds.feature_names,
            "imputation_log": ds.imputation_log,
            "content_hash": ds.content_hash,
        }

    @app.post("/v1/models")
    def post_model(body: dict):
        kind = body.get("kind", "logistic")
        if kind not in MODEL_KINDS:
            raise UnknownModelKind(
                f"unknown model kind '{kind}'", detail={"known": list(MODEL_KINDS)}
            )
        tm = store.add_model(body.get("dataset_id", "pima"), kind, body.get("config"))
        return {
            "model_id": tm.model_id,
            "kind": tm.kind,
            "report": tm.report.to_dict(),
        }

    @app.post("/v1/decompose")
    def post_decompose(body: dict):
        ds = store.dataset(body.get("dataset_id", "pima"))
        dec = PatternDecomposer(store.registry, ds.schema)
        return dec.decompose(body["question"]).to_dict()

    @app.post("/v1/interpretations:parse")
    def post_parse(body: dict):
        ds = store.dataset(body.get("dataset_id", "pima"))
        parsed = parse_interpretation(body["text"], ds.schema)
        return {
            "canonical": parsed.serialize(),
            "action": parsed.action,
            "target": parsed.target,
            "groups": [
                [
                    {
                        "feature": c.feature,
                        "op": c.op,
                        "value": c.value,
                        "low": _json_bound(c.low),
                        "high": _json_bound(c.high),
                    }
                    for c in g.constraints
                ]
                for g in parsed.groups
            ],
            "residue": list(parsed.residue),
        }

    @app.post("/v1/ask")
    def post_ask(body: dict):
        dataset_id = body.get("dataset_id", "pima")
        ds = store.dataset(dataset_id)
        tm = (
            store.model(body["model_id"])
            if body.get("model_id")
            else store.default_model(dataset_id)
        )
        timings: dict[str, float] = {}
        t0 = time.perf_counter()
        dec = PatternDecomposer(store.registry, ds.schema)
        rq = dec.decompose(body["question"])
        # A reviewed edit replaces the decomposed interpretation; it is
        # re-parsed here so garbage still answers 422, never a broken run.
        if body.get("interpretation"):
            edited = parse_interpretation(body["interpretation"], ds.schema)
            rq = replace(rq, machine_interpretation=edited.serialize())
        timings["decompose_seconds"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        cfg = DelegateConfig(**body.get("config", {}))
        run = delegate(rq, store.registry, ds, tm, store.runs_root, cfg)
        timings["delegate_seconds"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        tup = None
        try:
            tup = synthesize(run, store.registry, ds.schema)
            save_tuple(store.runs_root, run.run_id, tup)
        except NoOutputs:
            pass
        timings["synthesize_seconds"] = time.perf_counter() - t0
        return {
            "run_id": run.run_id,
            "explanation_type": run.explanation_type,
            "rq": rq.to_dict(),
            "tuple": tup.to_dict() if tup else None,
            "warnings": run.warnings,
            "timings": timings,
        }

    @app.get("/v1/runs")
    def get_runs():
        return {"runs": list_runs(store.runs_root)}

    @app.get("/v1/runs/{run_id}")
    def get_run(run_id: str):
        run = load_run(store.runs_root, run_id)
        tup = load_tuple(store.runs_root, run_id)
        return {"run": run.to_dict(), "tuple": tup.to_dict() if tup else None}

    @app.post("/v1/runs/{run_id}:replay")
    def post_replay(run_id: str, body: dict | None = None):
        dataset_id = (body or {}).get("dataset_id", "pima")
        ds = store.dataset(dataset_id)
        tup = replay(store.runs_root, run_id, store.registry, ds.schema)
        return {"run_id": run_id, "tuple": tup.to_dict()}

    return app

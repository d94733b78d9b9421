"""Command-line entry points.

Every subcommand prints JSON to stdout.  Library errors print a JSON error
object to stderr and exit with status 2, so scripts can branch on the
error code without scraping messages.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .decompose import (
    PatternDecomposer,
    evaluate_decomposition,
    generate_question_bank,
    load_bank,
    save_bank,
)
from .delegate import DelegateConfig, _json_bound, delegate, load_run, parse_stats
from .errors import NoOutputs, WhykitError
from .interp import parse_interpretation
from .registry import default_registry, load_registry
from .schema import DatasetSchema, pima_csv_path, pima_schema
from .synthesis import load_tuple, replay, save_tuple, synthesize
from .tabular import (
    DEFAULT_TRAIN_CONFIG,
    MODEL_KINDS,
    load_dataset,
    load_model,
    save_model,
    train,
)


def _load_env(args):
    schema = (
        DatasetSchema.load(args.schema)
        if getattr(args, "schema", None)
        else pima_schema()
    )
    registry = (
        load_registry(args.registry)
        if getattr(args, "registry", None)
        else default_registry()
    )
    source = getattr(args, "dataset", None) or "pima"
    dataset = load_dataset(pima_csv_path() if source == "pima" else source, schema)
    return schema, registry, dataset


def _emit(doc) -> None:
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _counts_arg(text: str) -> dict[str, int] | int:
    if text.isdigit():
        return int(text)
    out = {}
    for part in text.split(","):
        key, _, val = part.partition("=")
        out[key.strip()] = int(val)
    return out


# -- subcommand handlers ------------------------------------------------------


def _cmd_gen_qb(args):
    schema, registry, _ = _load_env(args)
    bank = generate_question_bank(schema, registry, _counts_arg(args.counts), args.seed)
    save_bank(bank, args.out)
    _emit({"written": args.out, "entries": len(bank)})


def _cmd_decompose(args):
    schema, registry, _ = _load_env(args)
    dec = PatternDecomposer(registry, schema)
    _emit(dec.decompose(args.question).to_dict())


def _cmd_parse_interp(args):
    schema, _, _ = _load_env(args)
    parsed = parse_interpretation(args.text, schema)
    _emit(
        {
            "canonical": parsed.serialize(),
            "action": parsed.action,
            "target": parsed.target,
            "groups": [
                [
                    {"feature": c.feature, "op": c.op, "value": c.value,
                     "low": _json_bound(c.low), "high": _json_bound(c.high)}
                    for c in g.constraints
                ]
                for g in parsed.groups
            ],
            "residue": list(parsed.residue),
        }
    )


def _cmd_train(args):
    schema, _, dataset = _load_env(args)
    cfg = dict(DEFAULT_TRAIN_CONFIG)
    if args.seed is not None:
        cfg["seed"] = args.seed
    tm = train(dataset, args.kind, cfg)
    save_model(tm, args.out)
    _emit(
        {
            "written": args.out,
            "model_id": tm.model_id,
            "kind": tm.kind,
            "report": tm.report.to_dict(),
            "warnings": tm.warnings,
        }
    )


def _cmd_delegate(args):
    schema, registry, dataset = _load_env(args)
    tm = load_model(args.model)
    dec = PatternDecomposer(registry, schema)
    rq = dec.decompose(args.question)
    cfg = DelegateConfig(
        immutable_features=tuple(args.immutable.split(",")) if args.immutable else ()
    )
    run = delegate(rq, registry, dataset, tm, args.runs_root, cfg)
    _emit(
        {
            "run_id": run.run_id,
            "explanation_type": run.explanation_type,
            "interpretation": run.interpretation,
            "explainers": [e.explainer_id for e in run.explainer_runs],
            "warnings": run.warnings,
        }
    )


def _cmd_synthesize(args):
    schema, registry, _ = _load_env(args)
    tup = replay(args.runs_root, args.run_id, registry, schema)
    save_tuple(args.runs_root, args.run_id, tup)
    _emit(tup.to_dict())


def _cmd_pipeline(args):
    schema, registry, dataset = _load_env(args)
    if args.model:
        tm = load_model(args.model)
    else:
        tm = train(dataset, args.kind, DEFAULT_TRAIN_CONFIG)
    dec = PatternDecomposer(registry, schema)
    rq = dec.decompose(args.question)
    cfg = DelegateConfig(
        immutable_features=tuple(args.immutable.split(",")) if args.immutable else ()
    )
    run = delegate(rq, registry, dataset, tm, args.runs_root, cfg)
    doc = {
        "rq": rq.to_dict(),
        "run_id": run.run_id,
        "warnings": run.warnings,
        "tuple": None,
    }
    try:
        tup = synthesize(run, registry, schema)
        save_tuple(args.runs_root, run.run_id, tup)
        doc["tuple"] = tup.to_dict()
    except NoOutputs:
        pass
    _emit(doc)


def _cmd_eval_decompose(args):
    schema, registry, _ = _load_env(args)
    bank = load_bank(args.bank)
    dec = PatternDecomposer(registry, schema)
    report = evaluate_decomposition(bank, dec)
    doc = report.to_dict()
    doc["parse_stats"] = parse_stats(bank, schema)
    _emit(doc)


def _cmd_metrics(args):
    run = load_run(args.runs_root, args.run_id)
    _emit(
        {
            "run_id": run.run_id,
            "metrics": {
                e.explainer_id: {"values": e.metrics, "notes": e.metric_notes}
                for e in run.explainer_runs
            },
        }
    )


def _cmd_show_run(args):
    run = load_run(args.runs_root, args.run_id)
    tup = load_tuple(args.runs_root, args.run_id)
    _emit({"run": run.to_dict(), "tuple": tup.to_dict() if tup else None})


def _cmd_serve(args):
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(args.root), host=args.host, port=args.port)


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="whykit",
        description="Question-driven explanations for tabular classifiers.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, dataset=True):
        sp.add_argument("--schema", help="dataset schema JSON (default: bundled)")
        sp.add_argument("--registry", help="registry file (default: bundled)")
        if dataset:
            sp.add_argument(
                "--dataset", default="pima", help="CSV path or 'pima' (default)"
            )

    sp = sub.add_parser("gen-qb", help="generate a gold question bank (TSV)")
    common(sp, dataset=False)
    sp.add_argument("--out", required=True)
    sp.add_argument("--counts", default="10", help="N for all types or 'type=N,...'")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=_cmd_gen_qb)

    sp = sub.add_parser("decompose", help="reframe a question")
    common(sp, dataset=False)
    sp.add_argument("--question", required=True)
    sp.set_defaults(fn=_cmd_decompose)

    sp = sub.add_parser("parse-interp", help="parse a machine interpretation")
    common(sp, dataset=False)
    sp.add_argument("--text", required=True)
    sp.set_defaults(fn=_cmd_parse_interp)

    sp = sub.add_parser("train", help="train a model and write it to disk")
    common(sp)
    sp.add_argument("--kind", choices=MODEL_KINDS, default="logistic")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(fn=_cmd_train)

    sp = sub.add_parser("delegate", help="run the explainers for a question")
    common(sp)
    sp.add_argument("--question", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--runs-root", default="runs")
    sp.add_argument("--immutable", default="", help="comma-separated feature names")
    sp.set_defaults(fn=_cmd_delegate)

    sp = sub.add_parser("synthesize", help="build the explanation for a stored run")
    common(sp, dataset=False)
    sp.add_argument("--run-id", required=True)
    sp.add_argument("--runs-root", default="runs")
    sp.set_defaults(fn=_cmd_synthesize)

    sp = sub.add_parser("pipeline", help="decompose, delegate, and synthesize")
    common(sp)
    sp.add_argument("--question", required=True)
    sp.add_argument("--model", help="model file; trains fresh when omitted")
    sp.add_argument("--kind", choices=MODEL_KINDS, default="logistic")
    sp.add_argument("--runs-root", default="runs")
    sp.add_argument("--immutable", default="", help="comma-separated feature names")
    sp.set_defaults(fn=_cmd_pipeline)

    sp = sub.add_parser("eval-decompose", help="score the decomposer on a bank")
    common(sp, dataset=False)
    sp.add_argument("--bank", required=True)
    sp.set_defaults(fn=_cmd_eval_decompose)

    sp = sub.add_parser("metrics", help="print a stored run's metric values")
    sp.add_argument("--run-id", required=True)
    sp.add_argument("--runs-root", default="runs")
    sp.set_defaults(fn=_cmd_metrics)

    sp = sub.add_parser("show-run", help="print a stored run record")
    sp.add_argument("--run-id", required=True)
    sp.add_argument("--runs-root", default="runs")
    sp.set_defaults(fn=_cmd_show_run)

    sp = sub.add_parser("serve", help="start the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--root", default="whykit_store")
    sp.set_defaults(fn=_cmd_serve)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except WhykitError as exc:
        json.dump({"error": exc.to_json()}, sys.stderr, indent=2)
        sys.stderr.write("\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

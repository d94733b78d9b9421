"""Walk one question through the whole engine, stage by stage.

Decompose reframes the question, delegate runs the registered explainers and
persists a run directory, synthesize renders the final answer and scores how
well its numbers are grounded in the stored outputs.

Run from the repository root:  python3 demos/02_ask_why.py
"""

import tempfile
from pathlib import Path

from whykit import (
    DEFAULT_TRAIN_CONFIG,
    PatternDecomposer,
    default_registry,
    delegate,
    load_dataset,
    pima_csv_path,
    pima_schema,
    synthesize,
    train,
)

QUESTION = (
    "How did the model justify predicting Diabetes for a 45-year-old female "
    "with a BMI of 27 and a Diabetes Pedigree Function of 0.2?"
)


def main():
    schema = pima_schema()
    registry = default_registry()
    dataset = load_dataset(pima_csv_path(), schema)
    model = train(dataset, "tree", DEFAULT_TRAIN_CONFIG)

    print(f"question: {QUESTION}\n")

    rq = PatternDecomposer(registry, schema).decompose(QUESTION)
    print("-- decompose ------------------------------------------------------")
    print(f"explanation type: {rq.explanation_type}")
    print(f"interpretation:   {rq.machine_interpretation}")
    print(f"action:           {rq.action}")

    with tempfile.TemporaryDirectory() as tmp:
        runs_root = Path(tmp) / "runs"
        run = delegate(rq, registry, dataset, model, runs_root)
        print("\n-- delegate -------------------------------------------------------")
        print(f"run id:     {run.run_id}")
        print(f"explainers: {[er.explainer_id for er in run.explainer_runs]}")
        for sub in sorted(p.name for p in (runs_root / run.run_id).iterdir() if p.is_dir()):
            print(f"artifacts:  {run.run_id}/{sub}/ (output.csv, config.json, metrics.json, provenance.json)")

        tup = synthesize(run, registry, schema)
        print("\n-- synthesize -----------------------------------------------------")
        print(f"grounding score: {tup.grounding} (every number in the text found in the outputs)")
        print(f"\n{tup.text}")


if __name__ == "__main__":
    main()

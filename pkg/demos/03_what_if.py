"""Counterfactual questions: what minimal change flips the prediction?

Age and Pregnancies are declared immutable, so the search may only move
features a patient could actually change.

Run from the repository root:  python3 demos/03_what_if.py
"""

import tempfile
from pathlib import Path

from whykit import (
    DEFAULT_TRAIN_CONFIG,
    DelegateConfig,
    PatternDecomposer,
    default_registry,
    delegate,
    load_dataset,
    pima_csv_path,
    pima_schema,
    synthesize,
    train,
)

QUESTION = "What if Glucose was under 100?"


def main():
    schema = pima_schema()
    registry = default_registry()
    dataset = load_dataset(pima_csv_path(), schema)
    model = train(dataset, "logistic", DEFAULT_TRAIN_CONFIG)

    rq = PatternDecomposer(registry, schema).decompose(QUESTION)
    print(f"question:       {QUESTION}")
    print(f"reframed as:    {rq.explanation_type} | {rq.machine_interpretation}")

    config = DelegateConfig(immutable_features=("Age", "Pregnancies"))
    with tempfile.TemporaryDirectory() as tmp:
        run = delegate(rq, registry, dataset, model, Path(tmp) / "runs", config)
        tup = synthesize(run, registry, schema)
        print(f"grounding:      {tup.grounding}")
        print(f"\n{tup.text}")
        print("\n(Age and Pregnancies were immutable; the answer never moves them.)")


if __name__ == "__main__":
    main()

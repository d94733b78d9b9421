"""Train the three bundled model kinds on the diabetes dataset and compare them.

Run from the repository root:  python3 demos/01_train_models.py
"""

from whykit import DEFAULT_TRAIN_CONFIG, MODEL_KINDS, load_dataset, pima_csv_path, pima_schema


def main():
    dataset = load_dataset(pima_csv_path(), pima_schema())
    print(f"dataset: {dataset.schema.name}, {dataset.n} rows, hash {dataset.content_hash[:12]}…")
    print("zero-as-missing columns imputed at load time:")
    for entry in dataset.imputation_log:
        print(f"  {entry['column']}: {entry['count']} cells -> median {entry['fill']}")

    from whykit import train

    print(f"\nshared config: {DEFAULT_TRAIN_CONFIG}")
    for kind in MODEL_KINDS:
        model = train(dataset, kind, DEFAULT_TRAIN_CONFIG)
        r = model.report
        print(
            f"{kind:>8}: precision {r.precision:.3f}  recall {r.recall:.3f}  "
            f"f1 {r.f1:.3f}  specificity {r.specificity:.3f}  (model id {model.model_id[:12]}…)"
        )


if __name__ == "__main__":
    main()

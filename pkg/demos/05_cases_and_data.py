"""Case-based and data-centric explanations with their quality metrics.

Prototype selection greedily picks weighted records that summarize a group;
the data summarizer reports per-feature statistics. Diversity and
non-representativeness score how spread out and how faithful the picks are.

Run from the repository root:  python3 demos/05_cases_and_data.py
"""

import numpy as np

from whykit import load_dataset, pima_csv_path, pima_schema
from whykit.explainers import select_prototypes, summarize
from whykit.metrics import diversity, non_representativeness


def main():
    dataset = load_dataset(pima_csv_path(), pima_schema())

    positives = dataset.X[dataset.y == 1]
    res = select_prototypes(positives, positives, m=4)
    print("four prototype records for the Diabetes group (greedy, weighted):")
    for idx, w in zip(res.indices, res.weights):
        row = ", ".join(f"{n}={v:g}" for n, v in zip(dataset.feature_names, positives[idx]))
        print(f"  weight {w:.3f}: {row}")

    chosen = positives[res.indices]
    print(f"\ndiversity (mean pairwise distance): {diversity(chosen):.2f}")
    print(
        "non-representativeness vs the group: "
        f"{non_representativeness(chosen, positives):.4f} (0 means indistinguishable)"
    )

    print("\nper-feature summary of the whole dataset:")
    summary = summarize(dataset)
    for s in summary.stats:
        print(
            f"  {s.name:>24}: mean {s.mean:>8.2f}  sd {s.sd:>7.2f}  "
            f"min {s.min:>6.2f}  max {s.max:>7.2f}"
        )
    print(f"  outcome balance: {summary.class_balance}")


if __name__ == "__main__":
    main()

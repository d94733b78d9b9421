"""Per-feature attributions for one prediction, exact and sampled.

The exact route enumerates every feature coalition; the sampled route
averages over random feature orderings and converges to the same values.
Two quality metrics check the attributions against the model itself.

Run from the repository root:  python3 demos/04_feature_attribution.py
"""

import numpy as np

from whykit import DEFAULT_TRAIN_CONFIG, load_dataset, pima_csv_path, pima_schema, train
from whykit.explainers import exact_shapley, sampled_shapley
from whykit.metrics import expectation_vector, faithfulness, monotonicity


def main():
    dataset = load_dataset(pima_csv_path(), pima_schema())
    model = train(dataset, "logistic", DEFAULT_TRAIN_CONFIG)

    rng = np.random.default_rng(5)
    background = dataset.X[rng.choice(dataset.n, size=64, replace=False)]
    x = dataset.X[0]
    p = float(model.predict_proba(x[None, :])[0])
    print(f"patient: {dataset.row_dict(0)}")
    print(f"model probability of {dataset.schema.outcome.positive_label}: {p:.3f}\n")

    names = dataset.feature_names
    exact = exact_shapley(model.predict_proba, x, background, feature_names=names)
    sampled = sampled_shapley(
        model.predict_proba, x, background, n_permutations=400, seed=3, feature_names=names
    )

    print(f"{'feature':>24}  {'exact':>8}  {'sampled':>8}")
    for i in exact.ranked():
        print(f"{names[i]:>24}  {exact.phi[i]:>8.4f}  {sampled.phi[i]:>8.4f}")
    print(f"\nefficiency check: sum(phi) = {exact.phi.sum():.4f} "
          f"== prediction - baseline = {exact.fx - exact.baseline:.4f}")

    faith = faithfulness(model.predict_proba, exact.phi, x, background)
    mono = monotonicity(exact.phi, expectation_vector(model.predict_proba, x, background))
    print(f"faithfulness  {faith:.3f}  (do attributions track single-feature removals?)")
    print(f"monotonicity  {mono:.3f}  (do |attributions| rank features like their effects?)")


if __name__ == "__main__":
    main()

"""Score the question decomposer on a generated gold bank.

The generator builds questions whose type, interpretation, and action are
known by construction; the scorecard reports per-type precision/recall/F1
plus exact-match rates for the extracted fields.

Run from the repository root:  python3 demos/06_decomposer_scorecard.py
"""

from whykit import (
    PatternDecomposer,
    default_registry,
    evaluate_decomposition,
    generate_question_bank,
    parse_stats,
    pima_schema,
)

COUNTS = {
    "data": 80,
    "case_based": 60,
    "rationale": 50,
    "contextual": 35,
    "contrastive": 29,
    "counterfactual": 25,
}


def main():
    schema = pima_schema()
    registry = default_registry()
    bank = generate_question_bank(schema, registry, COUNTS, seed=11)
    print(f"generated bank: {len(bank)} questions")
    print(f"sample: {bank[0].question!r} -> {bank[0].explanation_type}")

    stats = parse_stats(bank, schema)
    print(f"gold interpretations parsed: {stats['usable']}/{stats['total']} usable\n")

    report = evaluate_decomposition(bank, PatternDecomposer(registry, schema))
    print(f"type accuracy: {report.type_accuracy:.3f}")
    print(f"{'type':>16}  {'precision':>9}  {'recall':>7}  {'f1':>6}  {'support':>7}")
    for type_id, s in sorted(report.per_type.items()):
        print(f"{type_id:>16}  {s.precision:>9.3f}  {s.recall:>7.3f}  {s.f1:>6.3f}  {s.support:>7}")
    for name, agg in (("micro", report.micro), ("macro", report.macro), ("weighted", report.weighted)):
        print(f"{name:>16}  {agg.precision:>9.3f}  {agg.recall:>7.3f}  {agg.f1:>6.3f}  {agg.support:>7}")

    print("\nfield extraction:")
    for field, fr in report.fields.items():
        print(f"  {field}: exact {fr.exact_rate:.3f}, near (edit similarity >= 0.9) {fr.edit_match_rate:.3f}")


if __name__ == "__main__":
    main()

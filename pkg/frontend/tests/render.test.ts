import { describe, expect, it } from "vitest";

import type { AskResponse, ReframedQuestion, RunDocument } from "../src/api.js";
import {
  metricBadges,
  parseErrorFragment,
  renderDraftCard,
  renderExchangeCard,
  typeBadge,
} from "../src/render.js";
import type { RqDraft } from "../src/state.js";

function rq(overrides: Partial<ReframedQuestion> = {}): ReframedQuestion {
  return {
    question: "Why was this patient predicted to have diabetes?",
    explanation_type: "rationale",
    machine_interpretation: "Explain(Outcome = Diabetes)",
    action: "Explain",
    likelihood: null,
    provenance: "lexicon",
    scores: { rationale: 4 },
    ...overrides,
  };
}

function askResponse(overrides: Partial<AskResponse> = {}): AskResponse {
  return {
    run_id: "rationale_logit_weights_20260815T000000Z-1",
    explanation_type: "rationale",
    rq: rq(),
    tuple: {
      text: "The prediction leans on Glucose and BMI.",
      explanation_type: "rationale",
      explainer_ids: ["logit_weights"],
      grounding: 1.0,
      mode: "template",
    },
    warnings: [],
    timings: { decompose_seconds: 0.01, delegate_seconds: 0.5, synthesize_seconds: 0.02 },
    ...overrides,
  };
}

describe("typeBadge", () => {
  it("keeps the type id in the class and prints it with spaces", () => {
    const badge = typeBadge("case_based");
    expect(badge.className).toBe("badge type-case_based");
    expect(badge.textContent).toBe("case based");
  });
});

describe("metricBadges", () => {
  const runDoc: RunDocument = {
    run: {
      run_id: "rationale_logit_weights_20260815T000000Z-1",
      explanation_type: "rationale",
      warnings: [],
      explainer_runs: [
        {
          explainer_id: "logit_weights",
          modality: "feature_attribution",
          directory: "x/logit_weights",
          error: null,
          metrics: { faithfulness: 0.9917, monotonicity: null },
          metric_notes: { monotonicity: "needs an ordered pair" },
        },
      ],
    },
    tuple: null,
  };

  it("renders one badge per computed value and skips the nulls", () => {
    const badges = metricBadges(runDoc);
    expect(badges).toHaveLength(1);
    expect(badges[0]!.textContent).toBe("faithfulness 0.99");
    expect(badges[0]!.title).toBe("logit_weights");
  });
});

describe("parseErrorFragment", () => {
  it("marks the offending token at the reported position", () => {
    const fragment = parseErrorFragment("Explain(Glucose >> 150)", 16);
    const mark = fragment.querySelector("mark");
    expect(mark).not.toBeNull();
    expect(mark!.textContent).toBe(">>");
    expect(fragment.textContent).toBe("Explain(Glucose >> 150)");
  });

  it("falls back to unmarked text when no position is known", () => {
    const fragment = parseErrorFragment("((((", null);
    expect(fragment.querySelector("mark")).toBeNull();
    expect(fragment.textContent).toBe("((((");
  });
});

describe("renderDraftCard", () => {
  function draft(overrides: Partial<RqDraft> = {}): RqDraft {
    return {
      rq: rq(),
      interpretationText: "Explain(Outcome = Diabetes)",
      parse: { status: "valid", canonical: "Explain(Outcome = Diabetes)" },
      edited: false,
      ...overrides,
    };
  }

  it("enables confirm for a parseable draft", () => {
    const card = renderDraftCard(draft(), true);
    expect(card.querySelector(".error-card")).toBeNull();
    expect(card.querySelector<HTMLButtonElement>("button.confirm")!.disabled).toBe(false);
  });

  it("shows the parse error and disables confirm for a broken edit", () => {
    const card = renderDraftCard(
      draft({
        interpretationText: "((((",
        parse: { status: "invalid", message: "unexpected character '('", position: 0 },
        edited: true,
      }),
      false,
    );
    const error = card.querySelector(".error-card");
    expect(error).not.toBeNull();
    expect(error!.textContent).toContain("does not parse: unexpected character '('");
    expect(error!.querySelector("mark")!.textContent).toBe("((((");
    expect(card.querySelector<HTMLButtonElement>("button.confirm")!.disabled).toBe(true);
  });

  it("stays disabled while a re-parse is pending", () => {
    const card = renderDraftCard(
      draft({ interpretationText: "Explain(BMI > 30)", parse: { status: "pending" }, edited: true }),
      false,
    );
    expect(card.querySelector<HTMLButtonElement>("button.confirm")!.disabled).toBe(true);
  });
});

describe("renderExchangeCard", () => {
  it("shows the explanation, its grounding, and the provenance drawer", () => {
    const response = askResponse();
    const card = renderExchangeCard({
      exchange: { question: response.rq.question, response },
      runDoc: null,
      groups: null,
    });

    expect(card.querySelector(".question")!.textContent).toBe(response.rq.question);
    expect(card.querySelector(".explanation")!.textContent).toBe(
      "The prediction leans on Glucose and BMI.",
    );
    expect(card.querySelector(".badge.grounding")!.textContent).toBe("grounding 1.00");

    const link = card.querySelector<HTMLAnchorElement>("details.provenance a")!;
    expect(link.textContent).toBe(response.run_id);
    expect(link.getAttribute("href")).toBe(`/v1/runs/${response.run_id}`);

    const stages = Array.from(card.querySelectorAll(".timings li"), (n) => n.textContent);
    expect(stages).toEqual([
      "decompose_seconds: 0.010",
      "delegate_seconds: 0.500",
      "synthesize_seconds: 0.020",
    ]);

    expect(card.querySelector(".whatif-row")).toBeNull();
  });

  it("renders the warnings card when no explanation was produced", () => {
    const response = askResponse({
      explanation_type: "contextual",
      tuple: null,
      warnings: ["no explainers are registered for type 'contextual'"],
    });
    const card = renderExchangeCard({
      exchange: { question: "What context matters?", response },
      runDoc: null,
      groups: null,
    });

    const warn = card.querySelector(".warning-card")!;
    expect(warn.textContent).toContain("no explanation produced");
    expect(warn.textContent).toContain("no explainers are registered for type 'contextual'");
    expect(card.querySelector(".explanation")).toBeNull();
  });

  it("offers one what-if button per constrained feature", () => {
    const response = askResponse();
    const card = renderExchangeCard({
      exchange: { question: response.rq.question, response },
      runDoc: null,
      groups: [
        [
          { feature: "Glucose", op: ">", value: 150, low: null, high: null },
          { feature: "BMI", op: "=", value: 27, low: null, high: null },
        ],
      ],
    });

    const buttons = Array.from(card.querySelectorAll<HTMLButtonElement>("button.whatif"));
    expect(buttons.map((b) => b.dataset.feature)).toEqual(["Glucose", "BMI"]);
    expect(buttons[0]!.textContent).toBe("what if Glucose?");
  });
});

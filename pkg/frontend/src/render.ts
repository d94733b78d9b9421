/** DOM builders for the console. Pure data-in, element-out functions so the
 * same code renders in the browser and under jsdom in tests.
 */

import type { AskResponse, ParsedConstraint, RunDocument } from "./api.js";
import type { Exchange, RqDraft } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function typeBadge(explanationType: string): HTMLSpanElement {
  return el("span", `badge type-${explanationType}`, explanationType.replace("_", " "));
}

/** One badge per computed metric value across the run's explainers. */
export function metricBadges(runDoc: RunDocument): HTMLSpanElement[] {
  const badges: HTMLSpanElement[] = [];
  for (const er of runDoc.run.explainer_runs) {
    for (const [metric, value] of Object.entries(er.metrics ?? {})) {
      if (value === null || value === undefined) {
        continue;
      }
      const badge = el("span", "badge metric", `${metric} ${Number(value).toFixed(2)}`);
      badge.title = er.explainer_id;
      badges.push(badge);
    }
  }
  return badges;
}

/** Editor feedback: the interpretation text with the offending span marked. */
export function parseErrorFragment(text: string, position: number | null): HTMLElement {
  const wrap = el("span", "parse-error-text");
  if (position === null || position < 0 || position >= text.length) {
    wrap.appendChild(el("span", undefined, text));
    return wrap;
  }
  const rest = text.slice(position);
  const token = rest.match(/^\S+/)?.[0] ?? rest;
  wrap.appendChild(el("span", undefined, text.slice(0, position)));
  const mark = document.createElement("mark");
  mark.textContent = token;
  wrap.appendChild(mark);
  wrap.appendChild(el("span", undefined, text.slice(position + token.length)));
  return wrap;
}

/** The review card shown between decompose and delegation. */
export function renderDraftCard(draft: RqDraft, canConfirm: boolean): HTMLElement {
  const card = el("section", "draft-card");
  const head = el("header");
  head.appendChild(typeBadge(draft.rq.explanation_type));
  head.appendChild(el("span", "action", draft.rq.action));
  card.appendChild(head);

  if (draft.parse.status === "invalid") {
    const error = el("div", "error-card");
    error.appendChild(el("strong", undefined, "does not parse: "));
    error.appendChild(el("span", undefined, draft.parse.message));
    error.appendChild(parseErrorFragment(draft.interpretationText, draft.parse.position));
    card.appendChild(error);
  }

  const confirm = el("button", "confirm", "ask");
  confirm.disabled = !canConfirm;
  card.appendChild(confirm);
  return card;
}

export interface ExchangeView {
  exchange: Exchange;
  /** Fetched run document; null until it arrives. */
  runDoc: RunDocument | null;
  /** Parsed groups of the exchange's interpretation, for what-if buttons. */
  groups: ParsedConstraint[][] | null;
}

export function renderExchangeCard(view: ExchangeView): HTMLElement {
  const { exchange, runDoc, groups } = view;
  const response: AskResponse = exchange.response;
  const card = el("article", "exchange");

  card.appendChild(el("p", "question", exchange.question));

  const head = el("header");
  head.appendChild(typeBadge(response.explanation_type));
  head.appendChild(el("code", "interpretation", response.rq.machine_interpretation));
  card.appendChild(head);

  if (response.tuple) {
    card.appendChild(el("p", "explanation", response.tuple.text));
    card.appendChild(
      el("span", "badge grounding", `grounding ${response.tuple.grounding.toFixed(2)}`),
    );
  } else {
    const warn = el("div", "warning-card");
    warn.appendChild(el("strong", undefined, "no explanation produced"));
    for (const w of response.warnings) {
      warn.appendChild(el("p", "warning", w));
    }
    card.appendChild(warn);
  }

  if (runDoc) {
    for (const badge of metricBadges(runDoc)) {
      card.appendChild(badge);
    }
  }

  if (groups && groups.flat().length > 0) {
    const row = el("div", "whatif-row");
    for (const constraint of groups.flat()) {
      const button = el("button", "whatif", `what if ${constraint.feature}?`);
      button.dataset.feature = constraint.feature;
      row.appendChild(button);
    }
    card.appendChild(row);
  }

  const drawer = el("details", "provenance");
  drawer.appendChild(el("summary", undefined, "provenance"));
  const link = el("a", undefined, response.run_id);
  link.href = `/v1/runs/${response.run_id}`;
  drawer.appendChild(link);
  const timings = el("ul", "timings");
  for (const [stage, seconds] of Object.entries(response.timings ?? {})) {
    timings.appendChild(el("li", undefined, `${stage}: ${seconds.toFixed(3)}`));
  }
  drawer.appendChild(timings);
  card.appendChild(drawer);

  return card;
}

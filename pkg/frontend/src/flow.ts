/** The ask flow: decompose for review, validate edits, confirm delegation.
 *
 * Drives SessionState against the API client. All validation is a server
 * round-trip; the console never parses or scores anything itself.
 */

import { ApiError, WhykitClient } from "./api.js";
import type { AskResponse, ParsedConstraint, ReframedQuestion } from "./api.js";
import type { Exchange, SessionState } from "./state.js";

export class AskFlow {
  constructor(
    private readonly client: WhykitClient,
    private readonly state: SessionState,
  ) {}

  /** Stage 1: reframe the question and install the reviewable draft. */
  async startAsk(question: string): Promise<ReframedQuestion> {
    this.state.draftQuestion = question;
    const rq = await this.client.decompose(question, this.state.datasetId ?? undefined);
    this.state.beginDraft(rq);
    return rq;
  }

  /** Stage 2 (optional): the user edited the interpretation; re-validate. */
  async editInterpretation(text: string): Promise<void> {
    this.state.editInterpretation(text);
    try {
      const parsed = await this.client.parseInterpretation(
        text,
        this.state.datasetId ?? undefined,
      );
      this.state.markParseValid(parsed.canonical);
    } catch (err) {
      if (err instanceof ApiError && err.code === "UnusableParse") {
        const pos = typeof err.detail.position === "number" ? err.detail.position : null;
        this.state.markParseInvalid(err.message, pos);
        return;
      }
      throw err;
    }
  }

  /** Stage 3: delegate and record the exchange. One ask in flight at a time. */
  async confirm(): Promise<Exchange> {
    const draft = this.state.rqDraft;
    if (!draft || !this.state.canConfirm()) {
      throw new Error("confirm requires a draft that parses");
    }
    this.state.inFlight = true;
    try {
      const response: AskResponse = await this.client.ask(this.state.draftQuestion, {
        interpretation:
          draft.edited && draft.parse.status === "valid" ? draft.parse.canonical : undefined,
        datasetId: this.state.datasetId ?? undefined,
        modelId: this.state.modelId ?? undefined,
      });
      return this.state.completeExchange(this.state.draftQuestion, response);
    } finally {
      this.state.inFlight = false;
    }
  }
}

/** Build a prefilled follow-up question from a clicked feature constraint.
 *
 * Returns null when the exchange has no feature groups, in which case the
 * shortcut stays hidden.
 */
export function whatifShortcut(
  groups: ParsedConstraint[][],
  feature: string,
  newValue: number | string,
): string | null {
  const flat = groups.flat();
  if (flat.length === 0) {
    return null;
  }
  const match = flat.find((c) => c.feature === feature);
  if (!match) {
    return null;
  }
  return `What if ${feature} were ${newValue}?`;
}

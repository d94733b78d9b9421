/** Session state for the console: an append-only exchange history plus
 * one editable draft between decompose and delegation.
 *
 * Completed exchanges are frozen; edits touch only the pending draft, so
 * reviewing an interpretation can never rewrite what was already asked.
 */

import type { AskResponse, ReframedQuestion } from "./api.js";

export type ParseState =
  | { status: "valid"; canonical: string }
  | { status: "invalid"; message: string; position: number | null }
  | { status: "pending" };

export interface RqDraft {
  rq: ReframedQuestion;
  /** The interpretation text as currently shown in the editor. */
  interpretationText: string;
  parse: ParseState;
  /** True once the user has touched the text, so the confirm payload
   * includes the override only for real edits. */
  edited: boolean;
}

export interface Exchange {
  readonly question: string;
  readonly response: AskResponse;
}

export class SessionState {
  private readonly history: Exchange[] = [];
  draftQuestion = "";
  rqDraft: RqDraft | null = null;
  datasetId: string | null = null;
  modelId: string | null = null;
  inFlight = false;

  get exchanges(): readonly Exchange[] {
    return this.history;
  }

  /** Install the decomposed question as the editable draft. */
  beginDraft(rq: ReframedQuestion): void {
    this.rqDraft = {
      rq,
      interpretationText: rq.machine_interpretation,
      parse: { status: "valid", canonical: rq.machine_interpretation },
      edited: false,
    };
  }

  /** Record an in-progress edit; validity is unknown until the server answers. */
  editInterpretation(text: string): void {
    if (!this.rqDraft) {
      throw new Error("no draft to edit");
    }
    this.rqDraft.interpretationText = text;
    this.rqDraft.parse = { status: "pending" };
    this.rqDraft.edited = true;
  }

  markParseValid(canonical: string): void {
    if (this.rqDraft) {
      this.rqDraft.parse = { status: "valid", canonical };
    }
  }

  markParseInvalid(message: string, position: number | null): void {
    if (this.rqDraft) {
      this.rqDraft.parse = { status: "invalid", message, position };
    }
  }

  /** Delegation may be confirmed only for a draft the server can parse. */
  canConfirm(): boolean {
    return (
      !this.inFlight && this.rqDraft !== null && this.rqDraft.parse.status === "valid"
    );
  }

  /** Append the finished exchange and clear the draft. Frozen so later
   * draft edits cannot reach back into history. */
  completeExchange(question: string, response: AskResponse): Exchange {
    const exchange: Exchange = Object.freeze({ question, response });
    this.history.push(exchange);
    this.rqDraft = null;
    this.draftQuestion = "";
    return exchange;
  }
}

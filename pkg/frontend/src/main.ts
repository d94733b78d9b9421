/** Console wiring: connects the form, the draft review card, and the
 * exchange history to the ask flow. State lives in SessionState; this file
 * only moves DOM events in and rendered nodes out.
 */

import { ApiError, WhykitClient } from "./api.js";
import { AskFlow, whatifShortcut } from "./flow.js";
import { renderDraftCard, renderExchangeCard } from "./render.js";
import { SessionState } from "./state.js";

function configuredBase(): string {
  const meta = document.querySelector('meta[name="whykit-api-base"]');
  return meta?.getAttribute("content") ?? "";
}

export function mountConsole(root: HTMLElement): {
  state: SessionState;
  flow: AskFlow;
} {
  const client = new WhykitClient(configuredBase());
  const state = new SessionState();
  const flow = new AskFlow(client, state);

  root.innerHTML = `
    <header class="top">
      <h1>whykit console</h1>
      <span id="health" class="muted"></span>
    </header>
    <section id="composer">
      <form id="ask-form">
        <input id="question" type="text" placeholder="Ask about the model…" autocomplete="off" />
        <button type="submit">reframe</button>
      </form>
      <div id="draft"></div>
    </section>
    <section id="history"></section>
  `;

  const questionInput = root.querySelector<HTMLInputElement>("#question")!;
  const draftHost = root.querySelector<HTMLElement>("#draft")!;
  const historyHost = root.querySelector<HTMLElement>("#history")!;

  client
    .health()
    .then((h) => {
      root.querySelector("#health")!.textContent = `service ${h.version}`;
    })
    .catch(() => {
      root.querySelector("#health")!.textContent = "service unreachable";
    });

  function renderDraft(): void {
    draftHost.innerHTML = "";
    if (!state.rqDraft) {
      return;
    }
    const card = renderDraftCard(state.rqDraft, state.canConfirm());

    const editor = document.createElement("textarea");
    editor.id = "interpretation-editor";
    editor.value = state.rqDraft.interpretationText;
    editor.addEventListener("change", () => {
      void flow.editInterpretation(editor.value).then(renderDraft);
    });
    card.insertBefore(editor, card.querySelector("button.confirm"));

    card.querySelector<HTMLButtonElement>("button.confirm")!.addEventListener("click", () => {
      void flow
        .confirm()
        .then(async (exchange) => {
          renderDraft();
          let runDoc = null;
          let groups = null;
          try {
            runDoc = await client.run(exchange.response.run_id);
            const parsed = await client.parseInterpretation(
              exchange.response.rq.machine_interpretation,
            );
            groups = parsed.groups;
          } catch {
            // Provenance details are additive; the exchange renders without them.
          }
          const card = renderExchangeCard({ exchange, runDoc, groups });
          card.querySelectorAll<HTMLButtonElement>("button.whatif").forEach((button) => {
            button.addEventListener("click", () => {
              const draft = whatifShortcut(groups ?? [], button.dataset.feature!, "…");
              if (draft) {
                questionInput.value = draft;
                questionInput.focus();
              }
            });
          });
          historyHost.prepend(card);
        })
        .catch((err: unknown) => {
          const note = document.createElement("div");
          note.className = "error-card";
          note.textContent = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
          draftHost.appendChild(note);
        });
    });

    draftHost.appendChild(card);
  }

  root.querySelector<HTMLFormElement>("#ask-form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const question = questionInput.value.trim();
    if (!question || state.inFlight) {
      return;
    }
    void flow
      .startAsk(question)
      .then(renderDraft)
      .catch((err: unknown) => {
        draftHost.innerHTML = "";
        const note = document.createElement("div");
        note.className = "error-card";
        note.textContent = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
        draftHost.appendChild(note);
      });
  });

  return { state, flow };
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mountConsole(document.getElementById("app")!);
}

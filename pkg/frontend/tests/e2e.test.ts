/** End-to-end: the console flow against a genuinely spawned service.
 *
 * Boots `whykit serve` in a child process with a throwaway store, then
 * drives SessionState/AskFlow over real HTTP and renders the results under
 * jsdom. Nothing here is mocked; a failure means the console and the
 * service disagree about the wire contract.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { WhykitClient } from "../src/api.js";
import { AskFlow, whatifShortcut } from "../src/flow.js";
import { mountConsole } from "../src/main.js";
import { renderDraftCard, renderExchangeCard } from "../src/render.js";
import { SessionState } from "../src/state.js";

const RATIONALE_Q = "Why was this patient predicted to have diabetes?";
const RUN_ID_PATTERN = /^[a-z_]+_\d{8}T\d{6}Z-\d+$/;

let proc: ChildProcess;
let storeDir: string;
let client: WhykitClient;
let apiBase: string;
let serverLog = "";

/** Poll until fn returns something truthy; the page re-renders asynchronously. */
async function until<T>(fn: () => T | null | undefined, what: string): Promise<T> {
  const deadline = Date.now() + 30_000;
  for (;;) {
    const got = fn();
    if (got) {
      return got;
    }
    if (Date.now() > deadline) {
      throw new Error(`timed out waiting for ${what}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.listen(0, "127.0.0.1", () => {
      const addr = probe.address();
      if (addr && typeof addr === "object") {
        probe.close(() => resolve(addr.port));
      } else {
        probe.close(() => reject(new Error("could not reserve a port")));
      }
    });
  });
}

async function waitForHealth(base: string): Promise<void> {
  const deadline = Date.now() + 90_000;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    if (proc.exitCode !== null) {
      throw new Error(`service exited early (${proc.exitCode}):\n${serverLog}`);
    }
    try {
      const r = await fetch(`${base}/v1/health`);
      if (r.ok) {
        return;
      }
    } catch (err) {
      lastError = err;
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error(`service never became healthy: ${lastError}\n${serverLog}`);
}

function freshFlow(): { state: SessionState; flow: AskFlow } {
  const state = new SessionState();
  return { state, flow: new AskFlow(client, state) };
}

beforeAll(async () => {
  storeDir = mkdtempSync(join(tmpdir(), "whykit-e2e-"));
  const port = await freePort();
  const env = { ...process.env };
  delete env.WHYKIT_TOKEN;
  proc = spawn(
    "whykit",
    ["serve", "--host", "127.0.0.1", "--port", String(port), "--root", storeDir],
    { env, stdio: ["ignore", "pipe", "pipe"] },
  );
  proc.stdout?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  proc.stderr?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));

  apiBase = `http://127.0.0.1:${port}`;
  await waitForHealth(apiBase);
  client = new WhykitClient(apiBase);
});

afterAll(() => {
  proc?.kill("SIGTERM");
  if (storeDir) {
    rmSync(storeDir, { recursive: true, force: true });
  }
});

describe("console against a live service", () => {
  it("walks a question from reframing to a rendered, grounded exchange", async () => {
    const { state, flow } = freshFlow();

    const rq = await flow.startAsk(RATIONALE_Q);
    expect(rq.explanation_type).toBe("rationale");
    expect(state.canConfirm()).toBe(true);

    const exchange = await flow.confirm();
    expect(exchange.response.run_id).toMatch(RUN_ID_PATTERN);
    expect(exchange.response.tuple).not.toBeNull();
    expect(exchange.response.tuple!.grounding).toBe(1.0);
    expect(exchange.response.timings.delegate_seconds).toBeGreaterThan(0);

    const runDoc = await client.run(exchange.response.run_id);
    expect(runDoc.run.run_id).toBe(exchange.response.run_id);
    const parsed = await client.parseInterpretation(
      exchange.response.rq.machine_interpretation,
    );

    const card = renderExchangeCard({ exchange, runDoc, groups: parsed.groups });
    expect(card.querySelector(".question")!.textContent).toBe(RATIONALE_Q);
    expect(card.querySelector(".explanation")!.textContent).toBe(
      exchange.response.tuple!.text,
    );
    expect(card.querySelector(".badge.grounding")!.textContent).toBe("grounding 1.00");
    expect(
      card.querySelector<HTMLAnchorElement>("details.provenance a")!.getAttribute("href"),
    ).toBe(`/v1/runs/${exchange.response.run_id}`);
    expect(card.querySelectorAll(".timings li").length).toBe(3);
  });

  it("carries a reviewed edit through to the recorded run", async () => {
    const { state, flow } = freshFlow();

    await flow.startAsk(RATIONALE_Q);
    await flow.editInterpretation("explain(a1c > 150)");
    expect(state.rqDraft!.parse).toEqual({
      status: "valid",
      canonical: "Explain(Glucose > 150)",
    });

    const exchange = await flow.confirm();
    expect(exchange.response.rq.machine_interpretation).toBe("Explain(Glucose > 150)");
    expect(exchange.response.rq.question).toBe(RATIONALE_Q);
    expect(exchange.response.explanation_type).toBe("rationale");
  });

  it("a real 422 disables confirm and marks the offending character", async () => {
    const { state, flow } = freshFlow();

    await flow.startAsk(RATIONALE_Q);
    await flow.editInterpretation("Explain(Glucose # 150)");

    expect(state.rqDraft!.parse.status).toBe("invalid");
    expect(state.canConfirm()).toBe(false);
    await expect(flow.confirm()).rejects.toThrow("confirm requires a draft that parses");

    const card = renderDraftCard(state.rqDraft!, state.canConfirm());
    expect(card.querySelector<HTMLButtonElement>("button.confirm")!.disabled).toBe(true);
    expect(card.querySelector(".error-card mark")!.textContent).toBe("#");
  });

  it("a positionless parse error still disables confirm", async () => {
    const { state, flow } = freshFlow();

    await flow.startAsk(RATIONALE_Q);
    await flow.editInterpretation("((((");

    expect(state.rqDraft!.parse).toMatchObject({ status: "invalid", position: null });
    expect(state.canConfirm()).toBe(false);

    const card = renderDraftCard(state.rqDraft!, state.canConfirm());
    expect(card.querySelector(".error-card")).not.toBeNull();
    expect(card.querySelector(".error-card mark")).toBeNull();
    expect(card.querySelector<HTMLButtonElement>("button.confirm")!.disabled).toBe(true);
  });

  it("the what-if shortcut asks a question the service reads as counterfactual", async () => {
    const { flow } = freshFlow();

    const parsed = await client.parseInterpretation("Explain(Glucose > 150)");
    const followUp = whatifShortcut(parsed.groups, "Glucose", 90);
    expect(followUp).toBe("What if Glucose were 90?");

    const rq = await flow.startAsk(followUp!);
    expect(rq.explanation_type).toBe("counterfactual");
    expect(rq.machine_interpretation).toBe("Explain(Glucose = 90)");

    const exchange = await flow.confirm();
    expect(exchange.response.explanation_type).toBe("counterfactual");
    expect(exchange.response.tuple).not.toBeNull();
    expect(exchange.response.tuple!.grounding).toBe(1.0);
  });

  it("the mounted page walks ask to answer through DOM events", async () => {
    const meta = document.createElement("meta");
    meta.setAttribute("name", "whykit-api-base");
    meta.setAttribute("content", apiBase);
    document.head.appendChild(meta);
    const root = document.createElement("div");
    document.body.appendChild(root);

    try {
      const { state } = mountConsole(root);
      const question = root.querySelector<HTMLInputElement>("#question")!;
      const form = root.querySelector<HTMLFormElement>("#ask-form")!;

      question.value = RATIONALE_Q;
      form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
      const editor = await until(
        () => root.querySelector<HTMLTextAreaElement>("#interpretation-editor"),
        "the draft card",
      );

      // A garbage edit must disable confirm and surface the parse error.
      editor.value = "Explain(Glucose # 150)";
      editor.dispatchEvent(new Event("change", { bubbles: true }));
      await until(() => root.querySelector(".draft-card .error-card"), "the parse error");
      expect(
        root.querySelector<HTMLButtonElement>(".draft-card button.confirm")!.disabled,
      ).toBe(true);
      expect(state.canConfirm()).toBe(false);

      // Fixing the text re-arms confirm with the server's canonical form.
      const fixed = await until(
        () => root.querySelector<HTMLTextAreaElement>("#interpretation-editor"),
        "the re-rendered editor",
      );
      fixed.value = "explain(a1c > 150)";
      fixed.dispatchEvent(new Event("change", { bubbles: true }));
      const confirm = await until(() => {
        const button = root.querySelector<HTMLButtonElement>(".draft-card button.confirm");
        return button && !button.disabled ? button : null;
      }, "confirm to re-arm");

      confirm.click();
      const card = await until(
        () => root.querySelector("#history .exchange"),
        "the exchange card",
      );
      expect(card.querySelector(".question")!.textContent).toBe(RATIONALE_Q);
      expect(card.querySelector(".interpretation")!.textContent).toBe(
        "Explain(Glucose > 150)",
      );
      expect(card.querySelector(".badge.grounding")!.textContent).toBe("grounding 1.00");
      expect(root.querySelector("#draft")!.children.length).toBe(0);
      expect(state.exchanges).toHaveLength(1);

      const run = state.exchanges[0]!.response.run_id;
      expect(
        card.querySelector<HTMLAnchorElement>("details.provenance a")!.getAttribute("href"),
      ).toBe(`/v1/runs/${run}`);
    } finally {
      root.remove();
      document.head.querySelector('meta[name="whykit-api-base"]')?.remove();
    }
  });
});

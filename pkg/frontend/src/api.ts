/** Typed client for the whykit /v1 HTTP API.
 *
 * Every helper resolves with the parsed JSON body or rejects with an
 * ApiError carrying the service's structured error envelope, so callers
 * can branch on `code` ("UnusableParse", "UnknownRun", ...) instead of
 * matching message text.
 */

export interface ReframedQuestion {
  question: string;
  explanation_type: string;
  machine_interpretation: string;
  action: string;
  likelihood: string | null;
  provenance: string;
  scores: Record<string, number>;
}

export interface ParsedConstraint {
  feature: string;
  op: string;
  value: number | null;
  low: number | string | null;
  high: number | string | null;
}

export interface ParseResponse {
  canonical: string;
  action: string;
  target: string | null;
  groups: ParsedConstraint[][];
  residue: string[];
}

export interface ExplanationTuple {
  text: string;
  explanation_type: string;
  explainer_ids: string[];
  grounding: number;
  mode: string;
}

export interface AskResponse {
  run_id: string;
  explanation_type: string;
  rq: ReframedQuestion;
  tuple: ExplanationTuple | null;
  warnings: string[];
  timings: Record<string, number>;
}

export interface RegistryType {
  id: string;
  label: string;
  description: string;
  questions: string[];
}

export interface RegistryExplainer {
  id: string;
  label: string;
  for: string[];
  modality: string;
  metrics: string[];
}

export interface RegistryDocument {
  types: RegistryType[];
  explainers: RegistryExplainer[];
}

export interface ExplainerRunDocument {
  explainer_id: string;
  modality: string;
  directory: string;
  error: string | null;
  metrics: Record<string, number | null>;
  metric_notes: Record<string, string>;
}

export interface RunDocument {
  run: {
    run_id: string;
    explanation_type: string;
    warnings: string[];
    explainer_runs: ExplainerRunDocument[];
  };
  tuple: ExplanationTuple | null;
}

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly detail: Record<string, unknown>;

  constructor(status: number, code: string, message: string, detail: Record<string, unknown>) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.detail = detail;
  }
}

export class WhykitClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly token: string | null = null,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      const err = payload?.error ?? {};
      throw new ApiError(
        response.status,
        err.code ?? "Unknown",
        err.message ?? response.statusText,
        err.detail ?? {},
      );
    }
    return payload as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("GET", "/v1/health");
  }

  registry(): Promise<RegistryDocument> {
    return this.request("GET", "/v1/registry");
  }

  decompose(question: string, datasetId?: string): Promise<ReframedQuestion> {
    return this.request("POST", "/v1/decompose", {
      question,
      ...(datasetId ? { dataset_id: datasetId } : {}),
    });
  }

  parseInterpretation(text: string, datasetId?: string): Promise<ParseResponse> {
    return this.request("POST", "/v1/interpretations:parse", {
      text,
      ...(datasetId ? { dataset_id: datasetId } : {}),
    });
  }

  ask(
    question: string,
    options: { interpretation?: string; datasetId?: string; modelId?: string } = {},
  ): Promise<AskResponse> {
    return this.request("POST", "/v1/ask", {
      question,
      ...(options.interpretation ? { interpretation: options.interpretation } : {}),
      ...(options.datasetId ? { dataset_id: options.datasetId } : {}),
      ...(options.modelId ? { model_id: options.modelId } : {}),
    });
  }

  run(runId: string): Promise<RunDocument> {
    return this.request("GET", `/v1/runs/${runId}`);
  }

  replay(runId: string): Promise<{ run_id: string; tuple: ExplanationTuple }> {
    return this.request("POST", `/v1/runs/${runId}:replay`);
  }
}

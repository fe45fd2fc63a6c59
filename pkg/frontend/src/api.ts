// Thin fetch client for the /v1 API.

import type {
  ClassificationPayload,
  ConversationPayload,
  DatasetDescriptor,
  JobHandle,
  PersonaPayload,
  PplGainPayload,
  ReportPayload,
  UploadResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, init);
  const body = await response.text();
  if (!response.ok) {
    let detail = body;
    try {
      detail = JSON.parse(body).detail ?? body;
    } catch {
      // keep raw body
    }
    throw new ApiError(response.status, detail);
  }
  return body ? (JSON.parse(body) as T) : (undefined as T);
}

function postJson<T>(path: string, payload: unknown): Promise<T> {
  return request<T>(path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
}

export const api = {
  health: () => request<{ status: string }>("/v1/health"),
  config: () => request<Record<string, unknown>>("/v1/config"),

  listDatasets: () =>
    request<{ datasets: DatasetDescriptor[] }>("/v1/datasets"),
  uploadDataset: (file: File, name: string): Promise<UploadResponse> => {
    const form = new FormData();
    form.append("file", file);
    form.append("name", name);
    return request<UploadResponse>("/v1/datasets", { method: "POST", body: form });
  },
  deleteDataset: (id: string) =>
    request<{ deleted: string }>(`/v1/datasets/${encodeURIComponent(id)}`, {
      method: "DELETE",
    }),
  records: (id: string, offset = 0, limit = 100) =>
    request<{ total: number; records: Record<string, unknown>[] }>(
      `/v1/datasets/${encodeURIComponent(id)}/records?offset=${offset}&limit=${limit}`,
    ),
  conversations: (id: string) =>
    request<{ conversations: string[] }>(
      `/v1/datasets/${encodeURIComponent(id)}/conversations`,
    ),
  conversation: (id: string, key: string) =>
    request<ConversationPayload>(
      `/v1/datasets/${encodeURIComponent(id)}/conversations/${encodeURIComponent(key)}`,
    ),
  latestResult: (id: string, kind: string) =>
    request<Record<string, unknown>>(
      `/v1/datasets/${encodeURIComponent(id)}/results/${kind}/latest`,
    ),

  classify: (datasetId: string, classifierId: string, schemaId: string) =>
    postJson<ClassificationPayload>("/v1/classify", {
      dataset_id: datasetId,
      classifier_id: classifierId,
      schema_id: schemaId,
    }),
  report: (gold: string[], pred: string[], schemaId: string) =>
    postJson<ReportPayload>("/v1/classify/report", {
      gold,
      pred,
      schema_id: schemaId,
    }),

  submitJob: (kind: string, params: Record<string, unknown>) =>
    postJson<JobHandle>(`/v1/jobs/${kind}`, params),
  pollJob: (jobId: string) => request<JobHandle>(`/v1/jobs/${jobId}`),
  cancelJob: (jobId: string) =>
    request<JobHandle>(`/v1/jobs/${jobId}`, { method: "DELETE" }),

  pplGain: (params: Record<string, unknown>) =>
    postJson<PplGainPayload>("/v1/ppl-gain", params),

  persona: (speaker: string, params: Record<string, unknown>) =>
    postJson<PersonaPayload>(`/v1/persona/${encodeURIComponent(speaker)}`, params),

  createSession: (context?: unknown) =>
    postJson<{ session_id: string }>("/v1/assistant/sessions", context ? { context } : {}),
  exportSessionUrl: (sessionId: string, format: "json" | "txt") =>
    `/v1/assistant/sessions/${encodeURIComponent(sessionId)}/export?format=${format}`,
};

/** Thin fetch client for the review service; all state lives server-side. */

import type {
  ClusterCard,
  DecisionRequest,
  DocumentPayload,
  ExemplarSet,
  Progress,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: unknown };
      if (typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ReviewApi {
  constructor(readonly baseUrl: string = "") {}

  listClusters(): Promise<ClusterCard[]> {
    return request(`${this.baseUrl}/api/clusters`);
  }

  exemplars(clusterId: number, m = 5): Promise<ExemplarSet> {
    return request(`${this.baseUrl}/api/clusters/${clusterId}/exemplars?m=${m}`);
  }

  document(docId: string): Promise<DocumentPayload> {
    return request(`${this.baseUrl}/api/docs/${encodeURIComponent(docId)}`);
  }

  progress(): Promise<Progress> {
    return request(`${this.baseUrl}/api/progress`);
  }

  postDecision(clusterId: number, body: DecisionRequest): Promise<unknown> {
    return request(`${this.baseUrl}/api/clusters/${clusterId}/decision`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}

// Thin typed client for the annotation service. All persistent truth lives
// behind this API; the UI never invents state the server does not confirm.

import type { FilterDecision, ProgressReport, Task } from "./types.js";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

async function parseError(response: { status: number; json(): Promise<unknown> }) {
  let detail = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { error?: string };
    if (body && typeof body.error === "string") detail = body.error;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(detail, response.status);
}

export class AnnotationApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  imageUrl(relative: string): string {
    return this.baseUrl + relative;
  }

  async nextTask(annotator: string): Promise<Task | null> {
    const response = await this.fetchFn(
      `${this.baseUrl}/tasks/next?annotator=${encodeURIComponent(annotator)}`,
    );
    if (!response.ok) throw await parseError(response);
    const body = (await response.json()) as Task | { done: true };
    return "done" in body ? null : body;
  }

  private async post(path: string, body: object): Promise<void> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await parseError(response);
  }

  async submitFilter(
    taskId: string,
    imageId: string,
    decision: FilterDecision,
    annotator: string,
  ): Promise<void> {
    await this.post(`/tasks/${encodeURIComponent(taskId)}/filter`, {
      image_id: imageId,
      decision,
      annotator,
    });
  }

  async submitRating(taskId: string, value: number, annotator: string): Promise<void> {
    await this.post(`/tasks/${encodeURIComponent(taskId)}/rate`, {
      value,
      annotator,
    });
  }

  async progress(): Promise<ProgressReport> {
    const response = await this.fetchFn(`${this.baseUrl}/progress`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as ProgressReport;
  }
}

import { describe, expect, it } from "vitest";

import { AnnotationApi, ApiError, type FetchLike } from "../src/api.js";

function recordingFetch(
  responses: Array<{ ok: boolean; status: number; body: unknown }>,
): { fetch: FetchLike; calls: Array<{ url: string; method?: string; body?: string }> } {
  const calls: Array<{ url: string; method?: string; body?: string }> = [];
  const fetch: FetchLike = async (url, init) => {
    calls.push({ url, method: init?.method, body: init?.body });
    const next = responses.shift() ?? { ok: true, status: 200, body: {} };
    return { ok: next.ok, status: next.status, json: async () => next.body };
  };
  return { fetch, calls };
}

describe("AnnotationApi", () => {
  it("fetches the next task with the annotator query", async () => {
    const { fetch, calls } = recordingFetch([
      { ok: true, status: 200, body: { task_id: "t1", kind: "rate" } },
    ]);
    const api = new AnnotationApi("http://svc/", fetch);
    const task = await api.nextTask("ann one");
    expect(task?.task_id).toBe("t1");
    expect(calls[0]!.url).toBe("http://svc/tasks/next?annotator=ann%20one");
  });

  it("maps the done sentinel to null", async () => {
    const { fetch } = recordingFetch([{ ok: true, status: 200, body: { done: true } }]);
    const api = new AnnotationApi("http://svc", fetch);
    expect(await api.nextTask("a")).toBeNull();
  });

  it("posts filter and rating bodies in the documented shape", async () => {
    const { fetch, calls } = recordingFetch([
      { ok: true, status: 200, body: {} },
      { ok: true, status: 200, body: {} },
    ]);
    const api = new AnnotationApi("http://svc", fetch);
    await api.submitFilter("task--x", "img-1", "reject", "a1");
    await api.submitRating("task--y", 3.47, "a1");
    expect(calls[0]).toMatchObject({
      url: "http://svc/tasks/task--x/filter",
      method: "POST",
    });
    expect(JSON.parse(calls[0]!.body!)).toEqual({
      image_id: "img-1",
      decision: "reject",
      annotator: "a1",
    });
    expect(JSON.parse(calls[1]!.body!)).toEqual({ value: 3.47, annotator: "a1" });
  });

  it("raises ApiError with the server's structured message", async () => {
    const { fetch } = recordingFetch([
      { ok: false, status: 404, body: { error: "unknown task 'nope'" } },
      { ok: false, status: 404, body: { error: "unknown task 'nope'" } },
    ]);
    const api = new AnnotationApi("http://svc", fetch);
    await expect(api.submitRating("nope", 3, "a1")).rejects.toThrowError(ApiError);
    await expect(
      api.submitRating("nope", 3, "a1").catch((e) => Promise.reject(e.message)),
    ).rejects.toMatch(/unknown task/);
  });

  it("builds image URLs against the service origin", () => {
    const api = new AnnotationApi("http://svc:123//", async () => {
      throw new Error("unused");
    });
    expect(api.imageUrl("/images/ab/x.png")).toBe("http://svc:123/images/ab/x.png");
  });
});

import { afterEach, describe, expect, it, vi } from "vitest";

import { StudioApi } from "../../src/api.js";

function mockFetch(status: number, body: unknown) {
  const fn = vi.fn(async () => ({
    ok: status >= 200 && status < 300,
    status,
    statusText: `HTTP ${status}`,
    json: async () => body,
  })) as unknown as typeof fetch;
  vi.stubGlobal("fetch", fn);
  return fn as ReturnType<typeof vi.fn>;
}

afterEach(() => vi.unstubAllGlobals());

describe("StudioApi", () => {
  it("posts session options as JSON", async () => {
    const fn = mockFetch(200, { id: "abc", version: 0 });
    const api = new StudioApi("http://host");
    await api.createSession({ dims: [64, 128], seed: 5 });
    const [url, init] = fn.mock.calls[0];
    expect(url).toBe("http://host/v1/sessions");
    expect(JSON.parse((init as RequestInit).body as string)).toEqual({
      dims: [64, 128],
      seed: 5,
    });
  });

  it("surfaces error payload detail", async () => {
    mockFetch(400, { detail: "invalid edit: nope" });
    const api = new StudioApi();
    await expect(api.applyEdit("s", { op: "remove", id: 9 })).rejects.toThrow(
      "400: invalid edit: nope",
    );
  });

  it("builds render URLs with only the given params", () => {
    const api = new StudioApi();
    expect(api.renderUrl("s1", { w: 64, ssaa: 4 })).toBe("/v1/sessions/s1/render?w=64&ssaa=4");
  });

  it("polls jobs until done and reports progress", async () => {
    const states = [
      { id: "j", status: "running", progress: 0.5, report: null, error: null },
      { id: "j", status: "done", progress: 1, report: { K: 3 }, error: null },
    ];
    let call = 0;
    vi.stubGlobal("fetch", vi.fn(async () => ({
      ok: true,
      status: 200,
      json: async () => states[Math.min(call++, 1)],
    })) as unknown as typeof fetch);
    const api = new StudioApi();
    const seen: number[] = [];
    const job = await api.waitForJob("j", (j) => seen.push(j.progress), 1);
    expect(job.status).toBe("done");
    expect(seen).toEqual([0.5, 1]);
  });
});

import { describe, expect, it } from "vitest";

import { ApiError, HttpAnnotationApi } from "../src/api.js";
import { mediaUrl, parseConfig } from "../src/config.js";
import { parseCandidate } from "../src/types.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("HTTP client", () => {
  it("returns null when no task is open (404)", async () => {
    const api = new HttpAnnotationApi("http://x", async () =>
      jsonResponse(404, { detail: "no open contact tasks" }),
    );
    expect(await api.nextContactTask("w0")).toBeNull();
    expect(await api.nextTherbligTask("w0")).toBeNull();
  });

  it("unwraps candidate lists and encodes the task id", async () => {
    const calls: string[] = [];
    const api = new HttpAnnotationApi("http://x/", async (input) => {
      calls.push(input);
      return jsonResponse(200, { candidates: ["G:knife", "-"] });
    });
    const cands = await api.candidates("vid/1", {
      c_prev: { right: null, left: null },
      c_next: { right: "knife", left: null },
      partial: [],
    });
    expect(cands).toEqual(["G:knife", "-"]);
    expect(calls[0]).toBe("http://x/tasks/therblig/vid%2F1/candidates");
  });

  it("passes through a 422 rejection from submit as a result, not an error", async () => {
    const api = new HttpAnnotationApi("http://x", async () =>
      jsonResponse(422, {
        detail: { status: "rejected", violations: [{ rule: 1, step: null, tuple: null, message: "m" }] },
      }),
    );
    const result = await api.submitAnnotation("seg", {
      worker: "w0",
      c_prev: { right: null, left: null },
      c_next: { right: null, left: null },
      therbligs: [],
    });
    expect(result.status).toBe("rejected");
    if (result.status === "rejected") expect(result.violations[0]?.rule).toBe(1);
  });

  it("wraps other failures in ApiError with the server detail", async () => {
    const api = new HttpAnnotationApi("http://x", async () =>
      jsonResponse(409, { detail: "already responded" }),
    );
    await expect(
      api.submitContactResponse("t", { worker: "w0", right: null, left: null }),
    ).rejects.toMatchObject({ status: 409, detail: "already responded" });
    expect(new ApiError(409, "x")).toBeInstanceOf(Error);
  });
});

describe("config", () => {
  it("parses and normalizes base URLs", () => {
    const cfg = parseConfig('{"apiBase": "http://a/", "mediaBase": "http://m//"}');
    expect(cfg).toEqual({ apiBase: "http://a", mediaBase: "http://m" });
    expect(mediaUrl(cfg, "/vidA/0.jpg")).toBe("http://m/vidA/0.jpg");
  });

  it("rejects missing fields and malformed JSON", () => {
    expect(() => parseConfig("{}")).toThrow(/apiBase/);
    expect(() => parseConfig('{"apiBase": "x"}')).toThrow(/mediaBase/);
    expect(() => parseConfig("nope")).toThrow(/valid JSON/);
  });
});

describe("candidate strings", () => {
  it("splits verb and object, with '-' as the terminator", () => {
    expect(parseCandidate("G:knife")).toEqual({ verb: "G", object: "knife" });
    expect(parseCandidate("-")).toEqual({ verb: "-", object: null });
    expect(() => parseCandidate("G:")).toThrow(/malformed/);
    expect(() => parseCandidate("knife")).toThrow(/malformed/);
  });
});

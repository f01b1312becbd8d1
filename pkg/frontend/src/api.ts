/** Typed client for the annotation service. All candidate computation stays
 * server-side; this module only moves payloads. */
import type {
  CandidatesBody,
  ConsensusPayload,
  ContactResponseBody,
  ContactTaskPayload,
  SubmitBody,
  SubmitResult,
  TherbligTaskPayload,
  Violation,
  VocabPayload,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`API error ${status}: ${JSON.stringify(detail)}`);
  }
}

/** Interface the wizard depends on; tests substitute a fake. */
export interface AnnotationApi {
  vocab(): Promise<VocabPayload>;
  nextContactTask(worker: string): Promise<ContactTaskPayload | null>;
  submitContactResponse(taskId: string, body: ContactResponseBody): Promise<ConsensusPayload>;
  nextTherbligTask(worker: string): Promise<TherbligTaskPayload | null>;
  candidates(taskId: string, body: CandidatesBody): Promise<string[]>;
  submitAnnotation(taskId: string, body: SubmitBody): Promise<SubmitResult>;
  exportRecords(videoId?: string): Promise<string>;
}

export class HttpAnnotationApi implements AnnotationApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async vocab(): Promise<VocabPayload> {
    return this.json(await this.get("/vocab"));
  }

  async nextContactTask(worker: string): Promise<ContactTaskPayload | null> {
    const res = await this.get(`/tasks/contact/next?worker=${encodeURIComponent(worker)}`);
    if (res.status === 404) return null;
    return this.json(res);
  }

  async submitContactResponse(
    taskId: string,
    body: ContactResponseBody,
  ): Promise<ConsensusPayload> {
    return this.json(await this.post(`/tasks/contact/${encodeURIComponent(taskId)}/response`, body));
  }

  async nextTherbligTask(worker: string): Promise<TherbligTaskPayload | null> {
    const res = await this.get(`/tasks/therblig/next?worker=${encodeURIComponent(worker)}`);
    if (res.status === 404) return null;
    return this.json(res);
  }

  async candidates(taskId: string, body: CandidatesBody): Promise<string[]> {
    const res = await this.post(`/tasks/therblig/${encodeURIComponent(taskId)}/candidates`, body);
    const doc = await this.json<{ candidates: string[] }>(res);
    return doc.candidates;
  }

  async submitAnnotation(taskId: string, body: SubmitBody): Promise<SubmitResult> {
    const res = await this.fetchImpl(
      `${this.baseUrl}/tasks/therblig/${encodeURIComponent(taskId)}/submit`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      },
    );
    if (res.ok) {
      return (await res.json()) as SubmitResult;
    }
    const detail = await safeDetail(res);
    if (res.status === 422 && isRejection(detail)) {
      return detail;
    }
    throw new ApiError(res.status, detail);
  }

  async exportRecords(videoId?: string): Promise<string> {
    const query = videoId ? `?video=${encodeURIComponent(videoId)}` : "";
    const res = await this.get(`/export${query}`);
    if (!res.ok) throw new ApiError(res.status, await safeDetail(res));
    return res.text();
  }

  private get(path: string): Promise<Response> {
    return this.fetchImpl(`${this.baseUrl}${path}`);
  }

  private post(path: string, body: unknown): Promise<Response> {
    return this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  private async json<T>(res: Response): Promise<T> {
    if (!res.ok) {
      throw new ApiError(res.status, await safeDetail(res));
    }
    return (await res.json()) as T;
  }
}

function isRejection(detail: unknown): detail is { status: "rejected"; violations: Violation[] } {
  return (
    typeof detail === "object" &&
    detail !== null &&
    (detail as Record<string, unknown>).status === "rejected"
  );
}

async function safeDetail(res: Response): Promise<unknown> {
  try {
    const doc = (await res.json()) as Record<string, unknown>;
    // FastAPI wraps error payloads in {"detail": ...}
    return "detail" in doc ? doc.detail : doc;
  } catch {
    return null;
  }
}

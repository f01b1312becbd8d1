/** Wizard state machines for the two annotation stages.
 *
 * Stage 1: per-hand single-select of the object in contact (or "none") at a
 * boundary frame. Stage 2: confirm or correct both boundary contact states,
 * then build the step sequence by picking from server-provided candidates
 * only, one step at a time, until choosing "-" or filling all slots.
 *
 * Both sessions persist their in-progress state after every mutation and
 * restore it on construction, and allow at most one in-flight mutation.
 */
import type { AnnotationApi } from "./api.js";
import { ApiError } from "./api.js";
import { loadJson, saveJson, type KeyValueStorage } from "./storage.js";
import {
  NULL_CANDIDATE,
  parseCandidate,
  type ContactTaskPayload,
  type HandDoc,
  type TherbligStep,
  type TherbligTaskPayload,
  type Violation,
} from "./types.js";

export type Hand = "right" | "left";

// ---------------------------------------------------------------------------
// Stage 1
// ---------------------------------------------------------------------------

export type Stage1Status =
  | "idle"
  | "selecting"
  | "submitting"
  | "retry" // network failure; selection preserved, resubmit allowed
  | "done"; // no more open tasks for this worker

interface Stage1Persisted {
  task: ContactTaskPayload | null;
  selection: HandDoc;
  status: Stage1Status;
}

export class Stage1Session {
  task: ContactTaskPayload | null = null;
  selection: HandDoc = { right: null, left: null };
  status: Stage1Status = "idle";
  /** Inline message after a server-side rejection (e.g. duplicate worker). */
  lastError: string | null = null;
  submittedCount = 0;
  private inFlight = false;

  constructor(
    private readonly api: AnnotationApi,
    readonly worker: string,
    private readonly storage: KeyValueStorage,
  ) {
    const saved = loadJson<Stage1Persisted>(storage, this.storageKey());
    if (saved && saved.task) {
      this.task = saved.task;
      this.selection = saved.selection;
      this.status = saved.status === "submitting" ? "retry" : saved.status;
    }
  }

  /** Fetch the next open boundary task; resolves to false when none remain. */
  async loadNext(): Promise<boolean> {
    const task = await this.api.nextContactTask(this.worker);
    this.task = task;
    this.selection = { right: null, left: null };
    this.lastError = null;
    this.status = task === null ? "done" : "selecting";
    this.persist();
    return task !== null;
  }

  /** Single-select per hand; null means "none". */
  select(hand: Hand, objectName: string | null): void {
    if (this.task === null) throw new Error("no task loaded");
    if (objectName !== null && !this.task.options.includes(objectName)) {
      throw new Error(`object ${JSON.stringify(objectName)} is not offered by this task`);
    }
    this.selection[hand] = objectName;
    this.persist();
  }

  /**
   * Submit the current selection. A second call while one is in flight is a
   * no-op (double-submit guard). Network failures keep the unsent selection
   * and move to "retry"; duplicate-worker rejections skip to the next task.
   */
  async submit(): Promise<Stage1Status> {
    if (this.inFlight) return this.status;
    if (this.task === null) throw new Error("no task loaded");
    this.inFlight = true;
    this.status = "submitting";
    this.persist();
    try {
      await this.api.submitContactResponse(this.task.task_id, {
        worker: this.worker,
        right: this.selection.right,
        left: this.selection.left,
      });
      this.submittedCount += 1;
    } catch (err) {
      if (err instanceof ApiError) {
        // Server rejected this response (409 duplicate worker, 422 bad
        // object): surface the reason inline and skip to the next task.
        this.lastError = String(err.detail ?? err.message);
      } else {
        // Network failure: preserve the unsent selection for a retry.
        this.status = "retry";
        this.persist();
        return this.status;
      }
    } finally {
      this.inFlight = false;
    }
    const skipped = this.lastError;
    await this.loadNext();
    this.lastError = skipped;
    return this.status;
  }

  private persist(): void {
    const state: Stage1Persisted = {
      task: this.task,
      selection: this.selection,
      status: this.status,
    };
    saveJson(this.storage, this.storageKey(), state);
  }

  private storageKey(): string {
    return `therblig.stage1.${this.worker}`;
  }
}

// ---------------------------------------------------------------------------
// Stage 2
// ---------------------------------------------------------------------------

export type Stage2Status =
  | "idle"
  | "contacts" // confirming / correcting the two boundary contact states
  | "revise-contacts" // server offered no candidates; contacts need revisiting
  | "steps" // picking candidates one step at a time
  | "ready" // "-" chosen or all slots used; sequence submittable
  | "submitting"
  | "rejected" // server re-validation failed; violations shown, editing resumes
  | "done";

interface Stage2Persisted {
  task: TherbligTaskPayload | null;
  cPrev: HandDoc;
  cNext: HandDoc;
  partial: TherbligStep[];
  status: Stage2Status;
}

export class Stage2Session {
  task: TherbligTaskPayload | null = null;
  /** Worker-confirmed (possibly corrected) boundary contacts. */
  cPrev: HandDoc = { right: null, left: null };
  cNext: HandDoc = { right: null, left: null };
  partial: TherbligStep[] = [];
  /** Current server-provided candidate set; the UI offers nothing else. */
  candidates: string[] = [];
  status: Stage2Status = "idle";
  violations: Violation[] = [];
  acceptedCount = 0;
  rejectedCount = 0;
  private inFlight = false;
  private candidateGeneration = 0;

  constructor(
    private readonly api: AnnotationApi,
    readonly worker: string,
    private readonly storage: KeyValueStorage,
  ) {
    const saved = loadJson<Stage2Persisted>(storage, this.storageKey());
    if (saved && saved.task) {
      this.task = saved.task;
      this.cPrev = saved.cPrev;
      this.cNext = saved.cNext;
      this.partial = saved.partial;
      this.status = saved.status === "submitting" ? "ready" : saved.status;
    }
  }

  /** Fetch the next segment whose stage-1 consensus is resolved. */
  async loadNext(): Promise<boolean> {
    const task = await this.api.nextTherbligTask(this.worker);
    this.task = task;
    this.partial = [];
    this.candidates = [];
    this.violations = [];
    if (task === null) {
      this.status = "done";
    } else {
      // Correction starts from the stage-1 consensus: a wrong "none" can be
      // replaced before any steps are picked.
      this.cPrev = { ...task.c_prev };
      this.cNext = { ...task.c_next };
      this.status = "contacts";
    }
    this.persist();
    return task !== null;
  }

  /** Correct one hand of one boundary contact state. */
  correctContact(boundary: "prev" | "next", hand: Hand, objectName: string | null): void {
    const task = this.requireTask();
    if (this.status !== "contacts" && this.status !== "revise-contacts") {
      throw new Error("contacts can only be edited before steps are picked");
    }
    if (objectName !== null && !task.vocabulary.includes(objectName)) {
      throw new Error(`object ${JSON.stringify(objectName)} is not in the vocabulary`);
    }
    (boundary === "prev" ? this.cPrev : this.cNext)[hand] = objectName;
    this.persist();
  }

  /** Confirm the (possibly corrected) contacts and fetch the first candidates. */
  async confirmContacts(): Promise<Stage2Status> {
    this.requireTask();
    if (this.status !== "contacts" && this.status !== "revise-contacts") {
      throw new Error("contacts already confirmed");
    }
    await this.refreshCandidates();
    return this.status;
  }

  /**
   * Pick one candidate. Only strings present in the current server-provided
   * set are accepted; "-" finishes the sequence.
   */
  async choose(candidate: string): Promise<Stage2Status> {
    this.requireTask();
    if (this.status !== "steps") throw new Error(`cannot pick a step while ${this.status}`);
    if (!this.candidates.includes(candidate)) {
      throw new Error(`candidate ${JSON.stringify(candidate)} was not offered by the server`);
    }
    if (candidate === NULL_CANDIDATE) {
      this.status = "ready";
      this.persist();
      return this.status;
    }
    this.partial = [...this.partial, parseCandidate(candidate)];
    this.persist();
    if (this.partial.length >= this.requireTask().n_max) {
      this.status = "ready";
      this.candidates = [];
      this.persist();
      return this.status;
    }
    await this.refreshCandidates();
    return this.status;
  }

  /** Remove the last picked step (used while editing after a rejection). */
  async popStep(): Promise<Stage2Status> {
    this.requireTask();
    if (this.partial.length === 0) throw new Error("no steps to remove");
    this.partial = this.partial.slice(0, -1);
    this.violations = [];
    await this.refreshCandidates();
    return this.status;
  }

  /** Submit the finished sequence; double-submit guarded. */
  async submit(): Promise<Stage2Status> {
    if (this.inFlight) return this.status;
    const task = this.requireTask();
    if (this.status !== "ready") throw new Error("sequence is not complete");
    this.inFlight = true;
    this.status = "submitting";
    this.persist();
    try {
      const result = await this.api.submitAnnotation(task.task_id, {
        worker: this.worker,
        c_prev: this.cPrev,
        c_next: this.cNext,
        therbligs: this.partial,
      });
      if (result.status === "accepted") {
        this.acceptedCount += 1;
        await this.loadNext();
      } else {
        // Per-step violations are rendered and editing resumes.
        this.rejectedCount += 1;
        this.violations = result.violations;
        this.status = "rejected";
        this.persist();
      }
    } finally {
      this.inFlight = false;
    }
    return this.status;
  }

  /** Repopulate candidates after restoring persisted in-progress state. */
  async refresh(): Promise<Stage2Status> {
    this.requireTask();
    if (this.status === "steps" || this.status === "revise-contacts") {
      await this.refreshCandidates();
    }
    return this.status;
  }

  /** Leave the rejected state and resume picking/removing steps. */
  async resumeEditing(): Promise<Stage2Status> {
    this.requireTask();
    if (this.status !== "rejected") throw new Error("nothing to resume");
    await this.refreshCandidates();
    return this.status;
  }

  /**
   * Re-fetch candidates for the current contacts + partial sequence. A newer
   * fetch supersedes any still-pending one (stale responses are dropped).
   */
  private async refreshCandidates(): Promise<void> {
    const task = this.requireTask();
    const generation = ++this.candidateGeneration;
    let fetched: string[];
    try {
      fetched = await this.api.candidates(task.task_id, {
        c_prev: this.cPrev,
        c_next: this.cNext,
        partial: this.partial,
      });
    } catch (err) {
      if (generation !== this.candidateGeneration) return; // stale failure
      if (err instanceof ApiError && err.status === 422 && this.partial.length === 0) {
        // The corrected contacts themselves admit no consistent sequence.
        this.candidates = [];
        this.status = "revise-contacts";
        this.persist();
        return;
      }
      throw err;
    }
    if (generation !== this.candidateGeneration) return; // a newer fetch won
    if (fetched.length === 0 && this.partial.length === 0) {
      this.candidates = [];
      this.status = "revise-contacts";
    } else if (fetched.length === 0) {
      // All slots consumed without the server offering "-" never happens for
      // goal-filtered candidates, but guard anyway: the sequence is complete.
      this.candidates = [];
      this.status = "ready";
    } else {
      this.candidates = fetched;
      this.status = "steps";
    }
    this.persist();
  }

  private requireTask(): TherbligTaskPayload {
    if (this.task === null) throw new Error("no task loaded");
    return this.task;
  }

  private persist(): void {
    const state: Stage2Persisted = {
      task: this.task,
      cPrev: this.cPrev,
      cNext: this.cNext,
      partial: this.partial,
      status: this.status,
    };
    saveJson(this.storage, this.storageKey(), state);
  }

  private storageKey(): string {
    return `therblig.stage2.${this.worker}`;
  }
}

/** Payload shapes of the annotation service HTTP API. */

/** Per-hand contact: an object class name or null for "none". */
export interface HandDoc {
  right: string | null;
  left: string | null;
}

export interface VocabPayload {
  objects: string[];
  n_max: number;
}

/** Stage-1 task: the contact state at one chunk boundary frame. */
export interface ContactTaskPayload {
  task_id: string;
  video_id: string;
  frame: number;
  image: string;
  clip: string;
  options: string[];
}

export interface ConsensusPayload {
  task_id: string;
  video_id: string;
  frame: number;
  n_responses: number;
  status: "resolved" | "needs_more";
  right: string | null;
  left: string | null;
  support: { right: Record<string, number>; left: Record<string, number> };
}

/** Stage-2 task: one segment with both boundary consensus contacts. */
export interface TherbligTaskPayload {
  task_id: string;
  video_id: string;
  start_frame: number;
  end_frame: number;
  image: string;
  clip: string;
  c_prev: HandDoc;
  c_next: HandDoc;
  vocabulary: string[];
  n_max: number;
}

/** One step of an annotation: verb code plus object class (null only for "-"). */
export interface TherbligStep {
  verb: string;
  object: string | null;
}

export interface Violation {
  rule: number;
  step: number | null;
  tuple: string | null;
  message: string;
}

export type SubmitResult =
  | { status: "accepted"; segment_id: string }
  | { status: "rejected"; violations: Violation[] };

export interface ContactResponseBody {
  worker: string;
  right: string | null;
  left: string | null;
}

export interface CandidatesBody {
  c_prev: HandDoc;
  c_next: HandDoc;
  partial: TherbligStep[];
}

export interface SubmitBody {
  worker: string;
  c_prev: HandDoc;
  c_next: HandDoc;
  therbligs: TherbligStep[];
}

/** The null candidate offered by the server once the goal state is reached. */
export const NULL_CANDIDATE = "-";

/** Parse a server candidate string ("G:knife" or "-") into a step. */
export function parseCandidate(candidate: string): TherbligStep {
  if (candidate === NULL_CANDIDATE) {
    return { verb: NULL_CANDIDATE, object: null };
  }
  const sep = candidate.indexOf(":");
  if (sep <= 0 || sep === candidate.length - 1) {
    throw new Error(`malformed candidate ${JSON.stringify(candidate)}`);
  }
  return { verb: candidate.slice(0, sep), object: candidate.slice(sep + 1) };
}

/** Minimal DOM rendering helpers. All interactive choices come straight from
 * the session state (which only ever holds server-provided options). */
import { mediaUrl, type UiConfig } from "./config.js";
import type { Stage1Session, Stage2Session, Hand } from "./session.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  for (const child of children) node.append(child);
  return node;
}

/** Still image plus a loop-playing clip slowed to 0.75x. */
export function renderMedia(config: UiConfig, image: string, clip: string): HTMLElement {
  const video = el("video", { src: mediaUrl(config, clip), controls: "" });
  video.loop = true;
  video.autoplay = true;
  video.muted = true;
  video.playbackRate = 0.75;
  return el("div", { class: "media" }, [
    el("img", { src: mediaUrl(config, image), alt: "boundary frame" }),
    video,
  ]);
}

/** Per-hand single-select: every object option plus "none". */
export function renderHandSelect(
  hand: Hand,
  options: string[],
  selected: string | null,
  onSelect: (hand: Hand, value: string | null) => void,
): HTMLElement {
  const group = el("fieldset", { class: `hand-${hand}` }, [el("legend", {}, [`${hand} hand`])]);
  for (const option of [...options, null]) {
    const value = option ?? "none";
    const input = el("input", {
      type: "radio",
      name: `hand-${hand}`,
      value,
    }) as HTMLInputElement;
    input.checked = selected === option;
    input.addEventListener("change", () => onSelect(hand, option));
    group.append(el("label", {}, [input, value]));
  }
  return group;
}

export function renderStage1(config: UiConfig, session: Stage1Session, rerender: () => void): HTMLElement {
  const root = el("section", { class: "stage1" });
  if (session.status === "done" || session.task === null) {
    root.append(el("p", {}, ["No open contact tasks."]));
    return root;
  }
  const task = session.task;
  root.append(
    el("h2", {}, [`Which objects are in contact at ${task.video_id} frame ${task.frame}?`]),
    renderMedia(config, task.image, task.clip),
    renderHandSelect("right", task.options, session.selection.right, (h, v) => session.select(h, v)),
    renderHandSelect("left", task.options, session.selection.left, (h, v) => session.select(h, v)),
  );
  if (session.lastError) root.append(el("p", { class: "error" }, [session.lastError]));
  if (session.status === "retry") {
    root.append(el("p", { class: "error" }, ["Network failure — your selection was kept."]));
  }
  const button = el("button", {}, [session.status === "retry" ? "Retry" : "Submit"]);
  button.addEventListener("click", () => void session.submit().then(rerender));
  root.append(button);
  return root;
}

export function renderStage2(config: UiConfig, session: Stage2Session, rerender: () => void): HTMLElement {
  const root = el("section", { class: "stage2" });
  if (session.status === "done" || session.task === null) {
    root.append(el("p", {}, ["No open annotation tasks."]));
    return root;
  }
  const task = session.task;
  root.append(
    el("h2", {}, [`Annotate ${task.task_id}`]),
    renderMedia(config, task.image, task.clip),
  );
  if (session.status === "contacts" || session.status === "revise-contacts") {
    if (session.status === "revise-contacts") {
      root.append(
        el("p", { class: "error" }, [
          "No consistent sequence exists for these contacts — please revise them.",
        ]),
      );
    }
    for (const boundary of ["prev", "next"] as const) {
      const doc = boundary === "prev" ? session.cPrev : session.cNext;
      for (const hand of ["right", "left"] as const) {
        root.append(
          renderHandSelect(hand, task.vocabulary, doc[hand], (h, v) =>
            session.correctContact(boundary, h, v),
          ),
        );
      }
    }
    const confirm = el("button", {}, ["Confirm contacts"]);
    confirm.addEventListener("click", () => void session.confirmContacts().then(rerender));
    root.append(confirm);
    return root;
  }
  root.append(
    el("ol", { class: "partial" },
      session.partial.map((s) => el("li", {}, [`${s.verb}:${s.object ?? ""}`]))),
  );
  for (const violation of session.violations) {
    root.append(
      el("p", { class: `violation rule-${violation.rule}` }, [
        `Rule ${violation.rule}${violation.step === null ? "" : ` at step ${violation.step}`}: ${violation.message}`,
      ]),
    );
  }
  if (session.status === "steps") {
    for (const candidate of session.candidates) {
      const pick = el("button", { class: "candidate" }, [candidate]);
      pick.addEventListener("click", () => void session.choose(candidate).then(rerender));
      root.append(pick);
    }
  }
  if (session.status === "ready") {
    const submit = el("button", {}, ["Submit annotation"]);
    submit.addEventListener("click", () => void session.submit().then(rerender));
    root.append(submit);
  }
  if (session.status === "rejected") {
    const resume = el("button", {}, ["Edit sequence"]);
    resume.addEventListener("click", () => void session.resumeEditing().then(rerender));
    root.append(resume);
  }
  if (session.partial.length > 0 && session.status === "steps") {
    const undo = el("button", {}, ["Remove last step"]);
    undo.addEventListener("click", () => void session.popStep().then(rerender));
    root.append(undo);
  }
  return root;
}

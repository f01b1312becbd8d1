/** Browser entry point: loads config.json, builds the API client and the two
 * wizard sessions, and re-renders on every state change. */
import { HttpAnnotationApi } from "./api.js";
import { parseConfig } from "./config.js";
import { Stage1Session, Stage2Session } from "./session.js";
import { renderStage1, renderStage2 } from "./view.js";

async function boot(): Promise<void> {
  const configText = await (await fetch("config.json")).text();
  const config = parseConfig(configText);
  const api = new HttpAnnotationApi(config.apiBase);

  const params = new URLSearchParams(window.location.search);
  const worker = params.get("worker") ?? "anonymous";
  const stage = params.get("stage") === "2" ? 2 : 1;

  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");

  if (stage === 1) {
    const session = new Stage1Session(api, worker, window.localStorage);
    const rerender = () => {
      root.replaceChildren(renderStage1(config, session, rerender));
    };
    if (session.task === null) await session.loadNext();
    rerender();
  } else {
    const session = new Stage2Session(api, worker, window.localStorage);
    const rerender = () => {
      root.replaceChildren(renderStage2(config, session, rerender));
    };
    if (session.task === null) await session.loadNext();
    else await session.refresh();
    rerender();
  }
}

void boot();

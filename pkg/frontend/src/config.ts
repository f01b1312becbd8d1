/** Single JSON configuration: API base URL plus media base URL. */

export interface UiConfig {
  apiBase: string;
  mediaBase: string;
}

export function parseConfig(text: string): UiConfig {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    throw new Error("config is not valid JSON");
  }
  if (typeof doc !== "object" || doc === null) {
    throw new Error("config must be a JSON object");
  }
  const { apiBase, mediaBase } = doc as Record<string, unknown>;
  if (typeof apiBase !== "string" || apiBase.length === 0) {
    throw new Error('config is missing a non-empty "apiBase"');
  }
  if (typeof mediaBase !== "string" || mediaBase.length === 0) {
    throw new Error('config is missing a non-empty "mediaBase"');
  }
  return { apiBase: stripSlash(apiBase), mediaBase: stripSlash(mediaBase) };
}

export function mediaUrl(config: UiConfig, relativePath: string): string {
  return `${config.mediaBase}/${relativePath.replace(/^\//, "")}`;
}

function stripSlash(base: string): string {
  return base.replace(/\/+$/, "");
}

/** Newline-delimited JSON scorer protocol shared with the decoder. */

export interface ScoreRequest {
  id: number;
  kind: "score" | "score_eos";
  texts: string[];
}

export interface ScoreResponse {
  id: number;
  scores: number[];
  puncts?: string[];
}

export interface ErrorResponse {
  id: number;
  error: string;
}

export function validateRequest(obj: Record<string, unknown>): ScoreRequest {
  if (typeof obj.id !== "number" || !Number.isFinite(obj.id)) {
    throw new Error("request needs a numeric id");
  }
  if (obj.kind !== "score" && obj.kind !== "score_eos") {
    throw new Error(`unknown request kind ${String(obj.kind)}`);
  }
  if (!Array.isArray(obj.texts) || !obj.texts.every((t) => typeof t === "string")) {
    throw new Error("request needs a texts array of strings");
  }
  return { id: obj.id, kind: obj.kind, texts: obj.texts as string[] };
}

export function parseRequest(line: string): ScoreRequest {
  return validateRequest(JSON.parse(line) as Record<string, unknown>);
}

export function serializeResponse(resp: ScoreResponse | ErrorResponse): string {
  return JSON.stringify(resp) + "\n";
}

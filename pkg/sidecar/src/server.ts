/**
 * Serves the scorer protocol over stdio or TCP.
 *
 * Requests are handled strictly serially and responses preserve request
 * order. A malformed line or a scoring failure produces an error
 * response object and the process stays alive.
 */

import net from "node:net";
import readline from "node:readline";

import { TinyCausalLM } from "./model.js";
import { serializeResponse, validateRequest } from "./protocol.js";

export interface SidecarConfig {
  model: string;
  device: string;
  maxBatch: number;
  precision: string;
  addr?: string;
}

export const DEFAULT_CONFIG: SidecarConfig = {
  model: "tiny-char-lm-v1",
  device: "cpu",
  maxBatch: 64,
  precision: "f64",
};

export function handleLine(lm: TinyCausalLM, maxBatch: number, line: string): string {
  let id = 0;
  try {
    const raw = JSON.parse(line) as Record<string, unknown>;
    if (typeof raw.id === "number" && Number.isFinite(raw.id)) id = raw.id;
    const req = validateRequest(raw);
    const scores: number[] = [];
    const puncts: string[] = [];
    for (let start = 0; start < req.texts.length; start += maxBatch) {
      for (const text of req.texts.slice(start, start + maxBatch)) {
        if (req.kind === "score") {
          scores.push(lm.scoreText(text));
        } else {
          const { punct, score } = lm.scoreEos(text);
          scores.push(score);
          puncts.push(punct);
        }
      }
    }
    return serializeResponse(
      req.kind === "score_eos" ? { id, scores, puncts } : { id, scores },
    );
  } catch (err) {
    return serializeResponse({ id, error: err instanceof Error ? err.message : String(err) });
  }
}

export function serve(config: SidecarConfig): void {
  if (config.maxBatch < 1) throw new Error("maxBatch must be >= 1");
  if (config.device !== "cpu") throw new Error(`unsupported device ${config.device}`);
  if (config.precision !== "f64") throw new Error(`unsupported precision ${config.precision}`);
  const lm = new TinyCausalLM({ identifier: config.model });
  // warm up so the first request does not pay tokenizer/JIT cost
  lm.scoreText("warm up.");

  if (config.addr) {
    const [host, portText] = splitAddr(config.addr);
    const server = net.createServer((socket) => {
      const rl = readline.createInterface({ input: socket, crlfDelay: Infinity });
      rl.on("line", (line) => {
        if (line.trim()) socket.write(handleLine(lm, config.maxBatch, line));
      });
    });
    server.listen(Number(portText), host, () => {
      console.error(`sidecar listening on ${config.addr} (model ${config.model})`);
    });
    return;
  }

  const rl = readline.createInterface({ input: process.stdin, crlfDelay: Infinity });
  rl.on("line", (line) => {
    if (line.trim()) process.stdout.write(handleLine(lm, config.maxBatch, line));
  });
  console.error(`sidecar ready on stdio (model ${config.model})`);
}

function splitAddr(addr: string): [string, string] {
  const idx = addr.lastIndexOf(":");
  if (idx <= 0 || idx === addr.length - 1) {
    throw new Error(`bad --addr ${addr}, expected host:port`);
  }
  return [addr.slice(0, idx), addr.slice(idx + 1)];
}

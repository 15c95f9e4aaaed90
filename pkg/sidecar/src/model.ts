/**
 * Small self-contained causal language model.
 *
 * A character-level transformer whose weights are derived
 * deterministically from the model identifier, so scoring is fully
 * reproducible across processes and machines without shipping a
 * checkpoint. Texts are sentence-cased before tokenization. Scores are
 * full-sequence sums of natural-log next-token probabilities starting
 * at the first character after the begin marker.
 */

export interface ModelConfig {
  identifier: string;
  dim: number;
  heads: number;
  layers: number;
  maxContext: number;
}

export const DEFAULT_MODEL: ModelConfig = {
  identifier: "tiny-char-lm-v1",
  dim: 32,
  heads: 2,
  layers: 2,
  maxContext: 1024,
};

const CHAR_LO = 32; // space
const CHAR_HI = 126; // tilde
const N_CHARS = CHAR_HI - CHAR_LO + 1;
const UNK = N_CHARS; // any character outside the printable range
const BOS = N_CHARS + 1;
export const VOCAB_SIZE = N_CHARS + 2;

export function sentenceCase(text: string): string {
  if (text.length === 0) return text;
  return text.charAt(0).toUpperCase() + text.slice(1);
}

export function tokenize(text: string): number[] {
  const tokens: number[] = [BOS];
  for (const ch of sentenceCase(text)) {
    const code = ch.codePointAt(0)!;
    tokens.push(code >= CHAR_LO && code <= CHAR_HI ? code - CHAR_LO : UNK);
  }
  return tokens;
}

/** splitmix64-style hash of a string to a 32-bit seed. */
function hashSeed(text: string): number {
  let h = 0x9e3779b9 >>> 0;
  for (let i = 0; i < text.length; i++) {
    h = Math.imul(h ^ text.charCodeAt(i), 0x85ebca6b) >>> 0;
    h = ((h << 13) | (h >>> 19)) >>> 0;
  }
  return h >>> 0;
}

/** mulberry32 PRNG: deterministic, fast, good enough for weight init. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function initMatrix(rng: () => number, rows: number, cols: number, scale: number): Float64Array {
  const out = new Float64Array(rows * cols);
  for (let i = 0; i < out.length; i++) out[i] = (rng() * 2 - 1) * scale;
  return out;
}

interface LayerWeights {
  wq: Float64Array;
  wk: Float64Array;
  wv: Float64Array;
  wo: Float64Array;
  w1: Float64Array; // dim -> 4*dim
  w2: Float64Array; // 4*dim -> dim
}

export class TinyCausalLM {
  readonly config: ModelConfig;
  private readonly embed: Float64Array; // VOCAB_SIZE x dim
  private readonly pos: Float64Array; // maxContext x dim
  private readonly layersW: LayerWeights[];
  private readonly wOut: Float64Array; // dim x VOCAB_SIZE

  constructor(config: Partial<ModelConfig> = {}) {
    this.config = { ...DEFAULT_MODEL, ...config };
    const { dim, heads, layers, maxContext, identifier } = this.config;
    if (dim % heads !== 0) throw new Error("dim must be divisible by heads");
    const rng = mulberry32(hashSeed(identifier));
    const scale = 1 / Math.sqrt(dim);
    this.embed = initMatrix(rng, VOCAB_SIZE, dim, scale);
    this.pos = initMatrix(rng, maxContext, dim, scale);
    this.layersW = [];
    for (let l = 0; l < layers; l++) {
      this.layersW.push({
        wq: initMatrix(rng, dim, dim, scale),
        wk: initMatrix(rng, dim, dim, scale),
        wv: initMatrix(rng, dim, dim, scale),
        wo: initMatrix(rng, dim, dim, scale),
        w1: initMatrix(rng, dim, 4 * dim, scale),
        w2: initMatrix(rng, 4 * dim, dim, 1 / Math.sqrt(4 * dim)),
      });
    }
    this.wOut = initMatrix(rng, dim, VOCAB_SIZE, scale);
  }

  /** Natural-log probability of the full character sequence. */
  scoreText(text: string): number {
    const tokens = tokenize(text);
    if (tokens.length === 1) return 0; // empty text: nothing to predict
    const logits = this.forward(tokens.slice(0, -1));
    const dim = VOCAB_SIZE;
    let total = 0;
    for (let t = 0; t < tokens.length - 1; t++) {
      const row = logits.subarray(t * dim, (t + 1) * dim);
      total += row[tokens[t + 1]] - logSumExp(row);
    }
    return total;
  }

  /** Most likely end-of-sentence punctuation and its full-sequence score. */
  scoreEos(text: string): { punct: string; score: number } {
    let best = { punct: ".", score: -Infinity };
    for (const punct of [".", "?", "!"]) {
      const score = this.scoreText(text + punct);
      if (score > best.score) best = { punct, score };
    }
    return best;
  }

  /** Causal transformer forward pass; returns logits for each position. */
  private forward(tokens: number[]): Float64Array {
    const { dim, heads, maxContext } = this.config;
    const n = Math.min(tokens.length, maxContext);
    const seq = tokens.slice(tokens.length - n);
    const headDim = dim / heads;

    const x = new Float64Array(n * dim);
    for (let t = 0; t < n; t++) {
      for (let j = 0; j < dim; j++) {
        x[t * dim + j] = this.embed[seq[t] * dim + j] + this.pos[t * dim + j];
      }
    }

    const normed = new Float64Array(n * dim);
    const q = new Float64Array(n * dim);
    const k = new Float64Array(n * dim);
    const v = new Float64Array(n * dim);
    const attnOut = new Float64Array(n * dim);
    const hidden = new Float64Array(n * 4 * dim);

    for (const w of this.layersW) {
      layerNorm(x, normed, n, dim);
      matmul(normed, w.wq, q, n, dim, dim);
      matmul(normed, w.wk, k, n, dim, dim);
      matmul(normed, w.wv, v, n, dim, dim);
      attnOut.fill(0);
      const invSqrt = 1 / Math.sqrt(headDim);
      const scores = new Float64Array(n);
      for (let h = 0; h < heads; h++) {
        const off = h * headDim;
        for (let t = 0; t < n; t++) {
          let maxScore = -Infinity;
          for (let s = 0; s <= t; s++) {
            let dot = 0;
            for (let j = 0; j < headDim; j++) {
              dot += q[t * dim + off + j] * k[s * dim + off + j];
            }
            scores[s] = dot * invSqrt;
            if (scores[s] > maxScore) maxScore = scores[s];
          }
          let z = 0;
          for (let s = 0; s <= t; s++) {
            scores[s] = Math.exp(scores[s] - maxScore);
            z += scores[s];
          }
          for (let s = 0; s <= t; s++) {
            const weight = scores[s] / z;
            for (let j = 0; j < headDim; j++) {
              attnOut[t * dim + off + j] += weight * v[s * dim + off + j];
            }
          }
        }
      }
      // residual add of the projected attention output
      const projected = new Float64Array(n * dim);
      matmul(attnOut, w.wo, projected, n, dim, dim);
      for (let i = 0; i < n * dim; i++) x[i] += projected[i];

      layerNorm(x, normed, n, dim);
      matmul(normed, w.w1, hidden, n, dim, 4 * dim);
      for (let i = 0; i < n * 4 * dim; i++) hidden[i] = gelu(hidden[i]);
      matmul(hidden, w.w2, projected, n, 4 * dim, dim);
      for (let i = 0; i < n * dim; i++) x[i] += projected[i];
    }

    layerNorm(x, normed, n, dim);
    const logits = new Float64Array(n * VOCAB_SIZE);
    matmul(normed, this.wOut, logits, n, dim, VOCAB_SIZE);
    return logits;
  }
}

function matmul(
  a: Float64Array,
  b: Float64Array,
  out: Float64Array,
  rows: number,
  inner: number,
  cols: number,
): void {
  out.fill(0);
  for (let i = 0; i < rows; i++) {
    for (let k = 0; k < inner; k++) {
      const aik = a[i * inner + k];
      if (aik === 0) continue;
      const bOff = k * cols;
      const oOff = i * cols;
      for (let j = 0; j < cols; j++) out[oOff + j] += aik * b[bOff + j];
    }
  }
}

function layerNorm(x: Float64Array, out: Float64Array, rows: number, dim: number): void {
  for (let i = 0; i < rows; i++) {
    let mean = 0;
    for (let j = 0; j < dim; j++) mean += x[i * dim + j];
    mean /= dim;
    let variance = 0;
    for (let j = 0; j < dim; j++) {
      const d = x[i * dim + j] - mean;
      variance += d * d;
    }
    const inv = 1 / Math.sqrt(variance / dim + 1e-5);
    for (let j = 0; j < dim; j++) out[i * dim + j] = (x[i * dim + j] - mean) * inv;
  }
}

function gelu(x: number): number {
  return 0.5 * x * (1 + Math.tanh(Math.sqrt(2 / Math.PI) * (x + 0.044715 * x * x * x)));
}

function logSumExp(row: Float64Array): number {
  let max = -Infinity;
  for (const v of row) if (v > max) max = v;
  let sum = 0;
  for (const v of row) sum += Math.exp(v - max);
  return max + Math.log(sum);
}

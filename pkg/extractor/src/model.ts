/**
 * A small checkpointed vision-language model: patch embedding with
 * interpolated positional embeddings, one multi-head self-attention
 * block over [cls, patches], and a cross-attention readout from the
 * question embedding to the encoded patches, projected onto the two
 * answer tokens (index 0 = yes, 1 = no).
 *
 * Attention reduction policy: the per-patch self-attention map is the
 * cls query row, averaged over heads; the cross-attention row is the
 * question query's patch attention, averaged over heads. Both are
 * softmax outputs, so they are nonnegative as the dump contract requires.
 */

import * as tf from "@tensorflow/tfjs";
import * as fs from "fs";

import { resizeGrid, resizeImage } from "./bilinear";
import { GrayImage } from "./pgm";
import { SeededRng } from "./rng";

export const TEXT_VOCAB = 64;
export const ANSWER_VOCAB = 2;

export interface Checkpoint {
  format: "tiny-vlm";
  version: 1;
  seed: number;
  dim: number;
  heads: number;
  patchPx: number;
  baseGrid: number;
  clsStyle: "cls_preserved";
  weights: {
    patchProj: number[][];
    posEmbed: number[][];   // (baseGrid*baseGrid, dim), row-major
    clsToken: number[];
    clsPos: number[];
    wq: number[][];
    wk: number[][];
    wv: number[][];
    wo: number[][];
    tokenEmbed: number[][];
    wOut: number[][];
    bOut: number[];
  };
}

export interface StageTensors {
  gridSide: number;
  selfAttn: Float32Array;   // (n) cls attention over patches
  crossAttn: Float32Array;  // (n) one generated token's row
  logits: Float32Array;     // (ANSWER_VOCAB)
}

export function makeCheckpoint(seed: number, opts?: Partial<Pick<Checkpoint,
    "dim" | "heads" | "patchPx" | "baseGrid">>): Checkpoint {
  const dim = opts?.dim ?? 32;
  const heads = opts?.heads ?? 2;
  const patchPx = opts?.patchPx ?? 14;
  const baseGrid = opts?.baseGrid ?? 8;
  if (dim % heads !== 0) throw new Error(`dim ${dim} must divide into ${heads} heads`);
  const rng = new SeededRng(seed);
  const proj = 1 / Math.sqrt(dim);
  return {
    format: "tiny-vlm",
    version: 1,
    seed,
    dim,
    heads,
    patchPx,
    baseGrid,
    clsStyle: "cls_preserved",
    weights: {
      patchProj: rng.normalMatrix(patchPx * patchPx, dim, 1 / patchPx),
      posEmbed: rng.normalMatrix(baseGrid * baseGrid, dim, 0.5),
      clsToken: rng.normalMatrix(1, dim, 0.5)[0],
      clsPos: rng.normalMatrix(1, dim, 0.5)[0],
      wq: rng.normalMatrix(dim, dim, proj),
      wk: rng.normalMatrix(dim, dim, proj),
      wv: rng.normalMatrix(dim, dim, proj),
      wo: rng.normalMatrix(dim, dim, proj),
      tokenEmbed: rng.normalMatrix(TEXT_VOCAB, dim, 0.5),
      wOut: rng.normalMatrix(dim, ANSWER_VOCAB, proj),
      bOut: [0, 0],
    },
  };
}

export function saveCheckpoint(path: string, ckpt: Checkpoint): void {
  fs.writeFileSync(path, JSON.stringify(ckpt));
}

export function loadCheckpoint(path: string): Checkpoint {
  const ckpt = JSON.parse(fs.readFileSync(path, "utf8")) as Checkpoint;
  if (ckpt.format !== "tiny-vlm" || ckpt.version !== 1) {
    throw new Error(`${path}: not a tiny-vlm v1 checkpoint`);
  }
  return ckpt;
}

function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

export function tokenize(question: string): number[] {
  const words = question.toLowerCase().split(/[^a-z0-9]+/).filter((w) => w.length > 0);
  if (words.length === 0) return [0];
  return words.map((w) => fnv1a(w) % TEXT_VOCAB);
}

function extractPatches(image: Float32Array, res: number, patchPx: number): tf.Tensor2D {
  const side = res / patchPx;
  const n = side * side;
  const out = new Float32Array(n * patchPx * patchPx);
  for (let pr = 0; pr < side; pr++) {
    for (let pc = 0; pc < side; pc++) {
      const base = (pr * side + pc) * patchPx * patchPx;
      for (let y = 0; y < patchPx; y++) {
        for (let x = 0; x < patchPx; x++) {
          out[base + y * patchPx + x] = image[(pr * patchPx + y) * res + pc * patchPx + x];
        }
      }
    }
  }
  return tf.tensor2d(out, [n, patchPx * patchPx]);
}

/** Multi-head attention weights of queries against keys: (heads, nq, nk) softmaxed. */
function headAttention(q: tf.Tensor2D, k: tf.Tensor2D, heads: number): tf.Tensor3D {
  const [nq, dim] = q.shape;
  const nk = k.shape[0];
  const dh = dim / heads;
  const qh = tf.transpose(tf.reshape(q, [nq, heads, dh]), [1, 0, 2]);
  const kh = tf.transpose(tf.reshape(k, [nk, heads, dh]), [1, 0, 2]);
  const scores = tf.div(tf.matMul(qh, kh, false, true), Math.sqrt(dh));
  return tf.softmax(scores, -1) as tf.Tensor3D;
}

/** Run one stage resolution; the caller owns no tensors afterwards. */
export async function runStage(ckpt: Checkpoint, image: GrayImage, question: string,
                               stageRes: number): Promise<StageTensors> {
  if (stageRes % ckpt.patchPx !== 0) {
    throw new Error(`stage resolution ${stageRes} not divisible by patch ${ckpt.patchPx}`);
  }
  const side = stageRes / ckpt.patchPx;
  const n = side * side;
  const resized = resizeImage(image.pixels, image.height, image.width, stageRes, stageRes);
  const posFlat = new Float32Array(ckpt.baseGrid * ckpt.baseGrid * ckpt.dim);
  ckpt.weights.posEmbed.forEach((row, i) => row.forEach((v, j) => {
    posFlat[i * ckpt.dim + j] = v;
  }));
  const posInterp = resizeGrid(posFlat, ckpt.baseGrid, ckpt.baseGrid, ckpt.dim, side, side);

  const outputs = tf.tidy(() => {
    const w = ckpt.weights;
    const patches = extractPatches(resized, stageRes, ckpt.patchPx);
    const pos = tf.tensor2d(posInterp, [n, ckpt.dim]);
    const patchTokens = tf.add(tf.matMul(patches, tf.tensor2d(w.patchProj)), pos);
    const cls = tf.add(tf.tensor2d([w.clsToken]), tf.tensor2d([w.clsPos]));
    const seq = tf.concat([cls, patchTokens], 0);

    const wq = tf.tensor2d(w.wq);
    const wk = tf.tensor2d(w.wk);
    const q = tf.matMul(seq, wq) as tf.Tensor2D;
    const k = tf.matMul(seq, wk) as tf.Tensor2D;
    const v = tf.matMul(seq, tf.tensor2d(w.wv)) as tf.Tensor2D;
    const attn = headAttention(q, k, ckpt.heads);            // (H, n+1, n+1)
    const headMean = tf.mean(attn, 0) as tf.Tensor2D;        // (n+1, n+1)
    const selfAttnMap = tf.slice(headMean, [0, 1], [1, n]);  // cls row over patches

    const dh = ckpt.dim / ckpt.heads;
    const vh = tf.transpose(tf.reshape(v, [n + 1, ckpt.heads, dh]), [1, 0, 2]);
    const mixed = tf.matMul(attn, vh);                       // (H, n+1, dh)
    const merged = tf.reshape(tf.transpose(mixed, [1, 0, 2]), [n + 1, ckpt.dim]);
    const enc = tf.add(seq, tf.matMul(merged, tf.tensor2d(w.wo)));
    const encPatches = tf.slice(enc, [1, 0], [n, ckpt.dim]) as tf.Tensor2D;

    const ids = tokenize(question);
    const embeds = tf.gather(tf.tensor2d(w.tokenEmbed), tf.tensor1d(ids, "int32"));
    const query = tf.mean(embeds, 0, true) as tf.Tensor2D;   // (1, dim)
    const qProj = tf.matMul(query, wq) as tf.Tensor2D;
    const kPatches = tf.matMul(encPatches, wk) as tf.Tensor2D;
    const cross = headAttention(qProj, kPatches, ckpt.heads);  // (H, 1, n)
    const crossRow = tf.reshape(tf.mean(cross, 0), [1, n]);

    const context = tf.matMul(crossRow, encPatches);         // (1, dim)
    const logits = tf.add(tf.matMul(context, tf.tensor2d(w.wOut)),
                          tf.tensor1d(w.bOut));
    return {
      selfAttn: tf.reshape(selfAttnMap, [n]),
      crossRow: tf.reshape(crossRow, [n]),
      logits: tf.reshape(logits, [ANSWER_VOCAB]),
    };
  });

  const [selfAttn, crossAttn, logits] = await Promise.all([
    outputs.selfAttn.data(), outputs.crossRow.data(), outputs.logits.data(),
  ]);
  outputs.selfAttn.dispose();
  outputs.crossRow.dispose();
  outputs.logits.dispose();
  return {
    gridSide: side,
    selfAttn: new Float32Array(selfAttn),
    crossAttn: new Float32Array(crossAttn),
    logits: new Float32Array(logits),
  };
}

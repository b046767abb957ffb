/**
 * Extraction job: run the checkpoint over an image/question list at every
 * stage resolution and write a SECD dump (tensors + manifest.json) that
 * the dump backend consumes directly.
 *
 * All tensors are produced and shape-checked in memory before anything
 * touches disk, so a failing case never leaves a partial dump behind.
 */

import * as fs from "fs";
import * as path from "path";

import { ANSWER_VOCAB, Checkpoint, loadCheckpoint, runStage } from "./model";
import { GrayImage, readPgm } from "./pgm";
import { writeTensor } from "./secd";

export interface ExtractionCase {
  id: string;
  image: string;
  question: string;
  gold: "yes" | "no";
  /** Optional object mask (PGM, same scale conventions as the image). */
  maskImage?: string;
}

export interface ExtractionJob {
  checkpoint: string;
  outDir: string;
  /** Ascending stage resolutions; each must double the previous. */
  stages: number[];
  cases: ExtractionCase[];
}

interface PendingFile {
  rel: string;
  dims: number[];
  data: Float32Array;
}

function validateStages(stages: number[], patchPx: number): void {
  if (stages.length < 1 || stages.length > 5) {
    throw new Error(`plans support 1..5 stages, got ${stages.length}`);
  }
  for (const res of stages) {
    if (res % patchPx !== 0) {
      throw new Error(`stage ${res} is not a multiple of patch size ${patchPx}`);
    }
  }
  for (let i = 1; i < stages.length; i++) {
    if (stages[i] !== 2 * stages[i - 1]) {
      throw new Error(`stage ${stages[i]} does not double ${stages[i - 1]}`);
    }
  }
}

function checkShape(name: string, data: Float32Array, expected: number): void {
  if (data.length !== expected) {
    throw new Error(`${name}: expected ${expected} values, got ${data.length}`);
  }
  for (const v of data) {
    if (!Number.isFinite(v)) throw new Error(`${name}: non-finite value`);
  }
}

export async function extract(job: ExtractionJob): Promise<object> {
  const ckpt: Checkpoint = loadCheckpoint(job.checkpoint);
  validateStages(job.stages, ckpt.patchPx);
  if (job.cases.length === 0) throw new Error("extraction job has no cases");

  const files: PendingFile[] = [];
  const manifest = {
    cls_style: ckpt.clsStyle,
    extraction: {
      model: "tiny-vlm-v1",
      checkpoint_seed: ckpt.seed,
      self_reduce: "cls_row.head_mean",
      cross_reduce: "head_mean",
      encoder_layer: "last",
      decoder_layer: "last",
    },
    cases: [] as object[],
  };

  for (const c of job.cases) {
    const image: GrayImage = readPgm(c.image);
    if (c.gold !== "yes" && c.gold !== "no") {
      throw new Error(`case ${c.id}: gold must be yes/no`);
    }
    let maskPath: string | null = null;
    if (c.maskImage) {
      const mask = readPgm(c.maskImage);
      maskPath = `masks/${c.id}.secd`;
      files.push({ rel: maskPath, dims: [mask.height, mask.width], data: mask.pixels });
    }
    const stageEntries: object[] = [];
    for (const res of job.stages) {
      const out = await runStage(ckpt, image, c.question, res);
      const n = out.gridSide * out.gridSide;
      checkShape(`${c.id}@${res} self_attn`, out.selfAttn, n);
      checkShape(`${c.id}@${res} cross_attn`, out.crossAttn, n);
      checkShape(`${c.id}@${res} logits`, out.logits, ANSWER_VOCAB);
      const base = `tensors/${c.id}_${res}`;
      files.push({ rel: `${base}_self.secd`, dims: [out.gridSide, out.gridSide],
                   data: out.selfAttn });
      files.push({ rel: `${base}_cross.secd`, dims: [1, n], data: out.crossAttn });
      files.push({ rel: `${base}_logits.secd`, dims: [1, ANSWER_VOCAB], data: out.logits });
      stageEntries.push({
        resolution: res,
        self_attn: `${base}_self.secd`,
        cross_attn: `${base}_cross.secd`,
        logits: `${base}_logits.secd`,
      });
    }
    manifest.cases.push({
      id: c.id,
      gold: c.gold,
      gt_mask_path: maskPath,
      stages: stageEntries,
    });
  }

  fs.mkdirSync(path.join(job.outDir, "tensors"), { recursive: true });
  fs.mkdirSync(path.join(job.outDir, "masks"), { recursive: true });
  for (const file of files) {
    writeTensor(path.join(job.outDir, file.rel), file.dims, file.data);
  }
  fs.writeFileSync(path.join(job.outDir, "manifest.json"),
                   JSON.stringify(manifest, null, 2));
  return manifest;
}

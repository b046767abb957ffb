#!/usr/bin/env node
/**
 * Commands:
 *   make-checkpoint --out ckpt.json --seed 7
 *   make-demo --out-dir demo --seed 5 --res 112 --cases 4
 *   extract --job job.json
 *
 * make-demo writes PGM images with one bright rectangle each, matching
 * mask PGMs, and a ready-to-run job.json pointing at a fresh checkpoint.
 */

import * as fs from "fs";
import * as path from "path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { extract, ExtractionJob } from "./extract";
import { makeCheckpoint, saveCheckpoint } from "./model";
import { writePgm } from "./pgm";
import { mulberry32 } from "./rng";

function makeDemo(outDir: string, seed: number, res: number, cases: number): string {
  fs.mkdirSync(outDir, { recursive: true });
  const ckptPath = path.join(outDir, "checkpoint.json");
  saveCheckpoint(ckptPath, makeCheckpoint(seed));
  const rand = mulberry32(seed ^ 0x9e3779b9);
  const jobCases: ExtractionJob["cases"] = [];
  for (let i = 0; i < cases; i++) {
    const id = `demo${String(i).padStart(2, "0")}`;
    const side = Math.floor(res * (0.3 + 0.4 * rand()));
    const top = Math.floor(rand() * (res - side));
    const left = Math.floor(rand() * (res - side));
    const pixels = new Float32Array(res * res);
    const mask = new Float32Array(res * res);
    for (let y = 0; y < res; y++) {
      for (let x = 0; x < res; x++) {
        const inside = y >= top && y < top + side && x >= left && x < left + side;
        pixels[y * res + x] = inside ? 0.9 : 0.15 + 0.1 * rand();
        mask[y * res + x] = inside ? 1 : 0;
      }
    }
    const imagePath = path.join(outDir, `${id}.pgm`);
    const maskPath = path.join(outDir, `${id}_mask.pgm`);
    writePgm(imagePath, { width: res, height: res, pixels });
    writePgm(maskPath, { width: res, height: res, pixels: mask });
    const gold = i % 2 === 0 ? "yes" : "no";
    jobCases.push({
      id,
      image: imagePath,
      question: gold === "yes"
        ? "is there a bright square in the image"
        : "is there a striped circle in the image",
      gold,
      maskImage: gold === "yes" ? maskPath : undefined,
    });
  }
  const job: ExtractionJob = {
    checkpoint: ckptPath,
    outDir: path.join(outDir, "dump"),
    stages: [res / 2, res],
    cases: jobCases,
  };
  const jobPath = path.join(outDir, "job.json");
  fs.writeFileSync(jobPath, JSON.stringify(job, null, 2));
  return jobPath;
}

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .command("make-checkpoint", "create a seeded model checkpoint",
      (y) => y.option("out", { type: "string", demandOption: true })
              .option("seed", { type: "number", default: 7 })
              .option("dim", { type: "number", default: 32 })
              .option("heads", { type: "number", default: 2 })
              .option("patch", { type: "number", default: 14 })
              .option("base-grid", { type: "number", default: 8 }),
      (argv) => {
        saveCheckpoint(argv.out, makeCheckpoint(argv.seed, {
          dim: argv.dim, heads: argv.heads, patchPx: argv.patch,
          baseGrid: argv["base-grid"],
        }));
        console.log(`checkpoint written to ${argv.out}`);
      })
    .command("make-demo", "generate demo images, masks, and a job file",
      (y) => y.option("out-dir", { type: "string", demandOption: true })
              .option("seed", { type: "number", default: 5 })
              .option("res", { type: "number", default: 112 })
              .option("cases", { type: "number", default: 4 }),
      (argv) => {
        const jobPath = makeDemo(argv["out-dir"], argv.seed, argv.res, argv.cases);
        console.log(`job written to ${jobPath}`);
      })
    .command("extract", "run the model and write a SECD dump",
      (y) => y.option("job", { type: "string", demandOption: true }),
      async (argv) => {
        const job = JSON.parse(fs.readFileSync(argv.job, "utf8")) as ExtractionJob;
        await extract(job);
        console.log(`dump written to ${job.outDir}`);
      })
    .demandCommand(1)
    .strict()
    .parseAsync();
}

main().catch((err) => {
  console.error(err instanceof Error ? err.message : err);
  process.exit(1);
});

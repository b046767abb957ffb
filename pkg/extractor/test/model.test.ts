import { describe, expect, it } from "vitest";

import { makeCheckpoint, runStage, tokenize } from "../src/model";
import { GrayImage } from "../src/pgm";

function demoImage(res: number): GrayImage {
  const pixels = new Float32Array(res * res).fill(0.1);
  for (let y = 10; y < res / 2; y++) {
    for (let x = 10; x < res / 2; x++) pixels[y * res + x] = 0.9;
  }
  return { width: res, height: res, pixels };
}

describe("makeCheckpoint", () => {
  it("is deterministic for a fixed seed", () => {
    const a = makeCheckpoint(7);
    const b = makeCheckpoint(7);
    expect(JSON.stringify(a)).toBe(JSON.stringify(b));
  });

  it("differs across seeds", () => {
    expect(JSON.stringify(makeCheckpoint(7))).not.toBe(JSON.stringify(makeCheckpoint(8)));
  });

  it("rejects dim not divisible by heads", () => {
    expect(() => makeCheckpoint(1, { dim: 30, heads: 4 })).toThrow(/heads/);
  });
});

describe("tokenize", () => {
  it("is case and punctuation insensitive", () => {
    expect(tokenize("Is there a DOG?")).toEqual(tokenize("is there a dog"));
  });

  it("never returns an empty id list", () => {
    expect(tokenize("!!!").length).toBeGreaterThan(0);
  });
});

describe("runStage", () => {
  const ckpt = makeCheckpoint(7);
  const image = demoImage(112);

  it("produces grid-shaped nonnegative attention and 2 logits", async () => {
    for (const res of [56, 112]) {
      const out = await runStage(ckpt, image, "is there a square", res);
      const n = (res / ckpt.patchPx) ** 2;
      expect(out.selfAttn.length).toBe(n);
      expect(out.crossAttn.length).toBe(n);
      expect(out.logits.length).toBe(2);
      for (const v of out.selfAttn) expect(v).toBeGreaterThanOrEqual(0);
      for (const v of out.crossAttn) expect(v).toBeGreaterThanOrEqual(0);
      for (const v of [...out.selfAttn, ...out.crossAttn, ...out.logits]) {
        expect(Number.isFinite(v)).toBe(true);
      }
    }
  });

  it("cross-attention row is a distribution over patches", async () => {
    const out = await runStage(ckpt, image, "is there a square", 56);
    const total = Array.from(out.crossAttn).reduce((a, b) => a + b, 0);
    expect(total).toBeCloseTo(1.0, 5);
  });

  it("is deterministic across invocations", async () => {
    const a = await runStage(ckpt, image, "is there a square", 56);
    const b = await runStage(ckpt, image, "is there a square", 56);
    expect(Array.from(a.selfAttn)).toEqual(Array.from(b.selfAttn));
    expect(Array.from(a.logits)).toEqual(Array.from(b.logits));
  });

  it("rejects resolutions off the patch lattice", async () => {
    await expect(runStage(ckpt, image, "q", 57)).rejects.toThrow(/not divisible/);
  });
});

/** 8-bit binary PGM (P5) images, the extractor's input format. */

import * as fs from "fs";

export interface GrayImage {
  width: number;
  height: number;
  /** Row-major intensities in [0, 1]. */
  pixels: Float32Array;
}

export function readPgm(path: string): GrayImage {
  const blob = fs.readFileSync(path);
  let pos = 0;
  const token = (): string => {
    while (pos < blob.length) {
      const ch = blob[pos];
      if (ch === 0x23) {            // '#' comment runs to end of line
        while (pos < blob.length && blob[pos] !== 0x0a) pos++;
      } else if (ch === 0x20 || ch === 0x09 || ch === 0x0a || ch === 0x0d) {
        pos++;
      } else {
        break;
      }
    }
    const start = pos;
    while (pos < blob.length && !/\s/.test(String.fromCharCode(blob[pos]))) pos++;
    return blob.toString("ascii", start, pos);
  };
  if (token() !== "P5") throw new Error(`${path}: not a binary PGM`);
  const width = parseInt(token(), 10);
  const height = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (!(width > 0 && height > 0)) throw new Error(`${path}: bad dimensions`);
  if (!(maxval > 0 && maxval < 256)) throw new Error(`${path}: only 8-bit PGM supported`);
  pos++;  // single whitespace after maxval
  if (blob.length - pos < width * height) throw new Error(`${path}: truncated pixels`);
  const pixels = new Float32Array(width * height);
  for (let i = 0; i < pixels.length; i++) pixels[i] = blob[pos + i] / maxval;
  return { width, height, pixels };
}

export function writePgm(path: string, image: GrayImage): void {
  const header = Buffer.from(`P5\n${image.width} ${image.height}\n255\n`, "ascii");
  const body = Buffer.alloc(image.pixels.length);
  for (let i = 0; i < image.pixels.length; i++) {
    body[i] = Math.max(0, Math.min(255, Math.round(image.pixels[i] * 255)));
  }
  fs.writeFileSync(path, Buffer.concat([header, body]));
}

/**
 * Cell-center bilinear resampling: sample points sit at cell centers and
 * edges clamp. The same rule resizes input images to stage resolutions
 * and interpolates positional embeddings for down-scaled stages.
 */

function axisCoords(nSrc: number, nDst: number): { lo: Int32Array; hi: Int32Array; w: Float32Array } {
  const lo = new Int32Array(nDst);
  const hi = new Int32Array(nDst);
  const w = new Float32Array(nDst);
  for (let i = 0; i < nDst; i++) {
    let x = (i + 0.5) * (nSrc / nDst) - 0.5;
    x = Math.min(Math.max(x, 0), nSrc - 1);
    const f = Math.floor(x);
    lo[i] = f;
    hi[i] = Math.min(f + 1, nSrc - 1);
    w[i] = x - f;
  }
  return { lo, hi, w };
}

/** Resample a (rows, cols, channels) row-major grid onto (tr, tc). */
export function resizeGrid(src: Float32Array, sr: number, sc: number, ch: number,
                           tr: number, tc: number): Float32Array {
  if (src.length !== sr * sc * ch) {
    throw new Error(`grid of ${sr}x${sc}x${ch} needs ${sr * sc * ch} values, got ${src.length}`);
  }
  if (tr === sr && tc === sc) return src.slice();
  const ys = axisCoords(sr, tr);
  const xs = axisCoords(sc, tc);
  const out = new Float32Array(tr * tc * ch);
  for (let r = 0; r < tr; r++) {
    const y0 = ys.lo[r], y1 = ys.hi[r], wy = ys.w[r];
    for (let c = 0; c < tc; c++) {
      const x0 = xs.lo[c], x1 = xs.hi[c], wx = xs.w[c];
      for (let k = 0; k < ch; k++) {
        const v00 = src[(y0 * sc + x0) * ch + k];
        const v01 = src[(y0 * sc + x1) * ch + k];
        const v10 = src[(y1 * sc + x0) * ch + k];
        const v11 = src[(y1 * sc + x1) * ch + k];
        const top = v00 * (1 - wx) + v01 * wx;
        const bot = v10 * (1 - wx) + v11 * wx;
        out[(r * tc + c) * ch + k] = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

export function resizeImage(pixels: Float32Array, sr: number, sc: number,
                            tr: number, tc: number): Float32Array {
  return resizeGrid(pixels, sr, sc, 1, tr, tc);
}

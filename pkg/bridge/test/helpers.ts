/** Fixture plumbing for the parity tests: minimal P5 PGM I/O, a tiny
 * seeded PRNG, and a runner for the Python CLI. */

import { spawnSync } from "node:child_process";
import { readFileSync, writeFileSync } from "node:fs";

export interface Pgm {
  width: number;
  height: number;
  data: Uint8Array;
}

export function readPgm(path: string): Pgm {
  const blob = readFileSync(path);
  const text = blob.toString("latin1");
  const match = /^P5\s+(\d+)\s+(\d+)\s+(\d+)\s/.exec(text);
  if (!match) throw new Error(`${path}: not a plain P5 header`);
  const [, w, h, maxval] = match;
  if (maxval !== "255") throw new Error(`${path}: maxval ${maxval}`);
  const width = parseInt(w, 10);
  const height = parseInt(h, 10);
  const offset = match[0].length;
  const payload = blob.subarray(offset, offset + width * height);
  if (payload.length !== width * height) throw new Error(`${path}: truncated`);
  return { width, height, data: new Uint8Array(payload) };
}

export function writePgm(path: string, width: number, height: number, data: Uint8Array): void {
  const header = Buffer.from(`P5\n${width} ${height}\n255\n`, "ascii");
  writeFileSync(path, Buffer.concat([header, Buffer.from(data)]));
}

/** mask PGM ({0,255} on disk) -> {0,1} array matching the in-memory convention */
export function maskFromPgm(p: Pgm): Uint8Array {
  const out = new Uint8Array(p.data.length);
  for (let i = 0; i < p.data.length; i++) {
    const v = p.data[i];
    if (v !== 0 && v !== 255) throw new Error(`mask value ${v} not in {0,255}`);
    out[i] = v === 255 ? 1 : 0;
  }
  return out;
}

/** 8-bit prediction PGM -> float32 probabilities, exactly value/255 */
export function probFromPgm(p: Pgm): Float32Array {
  const out = new Float32Array(p.data.length);
  for (let i = 0; i < p.data.length; i++) out[i] = p.data[i] / 255;
  return out;
}

/** mulberry32: small deterministic PRNG for fixture predictions */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function runPython(args: string[]): { stdout: string; status: number } {
  const python = process.env.IRSTD_BRIDGE_PYTHON ?? "python3";
  const run = spawnSync(python, args, { maxBuffer: 1 << 26 });
  if (run.error) throw run.error;
  return { stdout: run.stdout.toString("utf-8"), status: run.status ?? -1 };
}

// Synthetic checkpoint builders for tests and demos. Each writes a small
// safetensors file shaped like the corresponding architecture's state dict:
// stable (Hurwitz) poles, half-pair storage where that architecture trains
// that way, F32 tensors as a trained checkpoint would carry.

import { writeSafetensors, WriteTensor } from "./safetensors.js";

// mulberry32: tiny seeded PRNG, good enough for fixture data
function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function uniform(next: () => number, lo: number, hi: number, count: number): Float64Array {
  const out = new Float64Array(count);
  for (let i = 0; i < count; i++) out[i] = lo + (hi - lo) * next();
  return out;
}

export interface FixtureOptions {
  layers?: number;
  /** Stored modes per layer (pair halves for s5/s4d). */
  modes?: number;
  channels?: number;
  seed?: number;
  bidirectional?: boolean;
}

function opts(o: FixtureOptions | undefined) {
  return {
    layers: o?.layers ?? 2,
    modes: o?.modes ?? 4,
    channels: o?.channels ?? 3,
    seed: o?.seed ?? 7,
    bidirectional: o?.bidirectional ?? false,
  };
}

/** S5-style state dict: split-complex Lambda/B/C, log-parameterized step,
 * one pole per conjugate pair with Im > 0. */
export function makeS5Checkpoint(path: string, options?: FixtureOptions): void {
  const { layers, modes, channels, seed, bidirectional } = opts(options);
  const next = rng(seed);
  const tensors = new Map<string, WriteTensor>();
  for (let l = 0; l < layers; l++) {
    const p = `layers.${l}.`;
    tensors.set(p + "Lambda_re", { dtype: "F32", shape: [modes], data: uniform(next, -1.5, -0.05, modes) });
    tensors.set(p + "Lambda_im", { dtype: "F32", shape: [modes], data: uniform(next, 0.3, 4.0, modes) });
    tensors.set(p + "B_re", { dtype: "F32", shape: [modes, channels], data: uniform(next, -1, 1, modes * channels) });
    tensors.set(p + "B_im", { dtype: "F32", shape: [modes, channels], data: uniform(next, -1, 1, modes * channels) });
    tensors.set(p + "C_re", { dtype: "F32", shape: [channels, modes], data: uniform(next, -1, 1, channels * modes) });
    tensors.set(p + "C_im", { dtype: "F32", shape: [channels, modes], data: uniform(next, -1, 1, channels * modes) });
    if (bidirectional) {
      tensors.set(p + "C_bwd_re", { dtype: "F32", shape: [channels, modes], data: uniform(next, -1, 1, channels * modes) });
      tensors.set(p + "C_bwd_im", { dtype: "F32", shape: [channels, modes], data: uniform(next, -1, 1, channels * modes) });
    }
    tensors.set(p + "log_step", {
      dtype: "F32",
      shape: [modes],
      data: uniform(next, Math.log(0.001), Math.log(0.1), modes),
    });
  }
  writeSafetensors(path, tensors, { format: "pt" });
}

/** S4D-style state dict: pole decay stored as log(-Re), real B, split C. */
export function makeS4DCheckpoint(path: string, options?: FixtureOptions): void {
  const { layers, modes, channels, seed } = opts(options);
  const next = rng(seed);
  const tensors = new Map<string, WriteTensor>();
  for (let l = 0; l < layers; l++) {
    const p = `layers.${l}.`;
    const logA = new Float64Array(modes);
    for (let i = 0; i < modes; i++) logA[i] = Math.log(0.05 + 1.2 * next());
    tensors.set(p + "log_A_real", { dtype: "F32", shape: [modes], data: logA });
    // the classic initialization spaces imaginary parts like pi * (i + 1)
    const imag = new Float64Array(modes);
    for (let i = 0; i < modes; i++) imag[i] = Math.PI * (i + 1) * (0.8 + 0.4 * next());
    tensors.set(p + "A_imag", { dtype: "F32", shape: [modes], data: imag });
    tensors.set(p + "B", { dtype: "F32", shape: [modes, channels], data: uniform(next, -1, 1, modes * channels) });
    tensors.set(p + "C_re", { dtype: "F32", shape: [channels, modes], data: uniform(next, -1, 1, channels * modes) });
    tensors.set(p + "C_im", { dtype: "F32", shape: [channels, modes], data: uniform(next, -1, 1, channels * modes) });
    tensors.set(p + "log_dt", {
      dtype: "F32",
      shape: [modes],
      data: uniform(next, Math.log(0.001), Math.log(0.1), modes),
    });
  }
  writeSafetensors(path, tensors, { format: "pt" });
}

/** Mamba-style state dict: real log-poles and a per-mode step-size bias.
 * B/C projections are input-dependent in the real model and have no static
 * counterpart, so the fixture carries only what the surrogate export reads. */
export function makeMambaCheckpoint(path: string, options?: FixtureOptions): void {
  const { layers, modes, seed } = opts(options);
  const next = rng(seed);
  const tensors = new Map<string, WriteTensor>();
  for (let l = 0; l < layers; l++) {
    const p = `layers.${l}.`;
    const aLog = new Float64Array(modes);
    for (let i = 0; i < modes; i++) aLog[i] = Math.log(0.5 + 3.0 * next());
    tensors.set(p + "A_log", { dtype: "F32", shape: [modes], data: aLog });
    tensors.set(p + "dt_bias", { dtype: "F32", shape: [modes], data: uniform(next, -3, 1, modes) });
  }
  writeSafetensors(path, tensors, { format: "pt" });
}

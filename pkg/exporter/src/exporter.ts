// Turns a trained checkpoint into an interchange model directory.
//
// The flow: discover layers by probing the recipe's pole key, pull each
// mapped tensor (naming the offending checkpoint key on any miss or shape
// surprise), apply transforms, validate stability, optionally apply the
// zero-order hold, and write the directory.

import * as path from "node:path";
import { readSafetensors, Checkpoint } from "./safetensors.js";
import { ExportRecipe, ArraySource } from "./recipe.js";
import { InterchangeLayer, InterchangeArray, writeInterchange, Meta } from "./interchange.js";

export class ExportError extends Error {}

// matches the toolkit's guard for the (e^{lambda d} - 1) / lambda limit
const ZOH_ZERO_GUARD = 1e-12;

export interface ExportSummary {
  outDir: string;
  layers: number;
  modes: number;
  timeDomain: "continuous" | "discrete";
  conjugatePairs: boolean[];
  approximate: boolean;
}

function softplus(x: number): number {
  return x > 20 ? x : Math.log1p(Math.exp(x));
}

function applyTransform(values: Float64Array, transform: string | undefined, key: string): Float64Array {
  const out = new Float64Array(values.length);
  switch (transform ?? "identity") {
    case "identity":
      out.set(values);
      return out;
    case "neg-exp":
      for (let i = 0; i < values.length; i++) out[i] = -Math.exp(values[i] ?? 0);
      return out;
    case "exp":
      for (let i = 0; i < values.length; i++) out[i] = Math.exp(values[i] ?? 0);
      return out;
    case "softplus-mean": {
      let acc = 0;
      for (let i = 0; i < values.length; i++) acc += softplus(values[i] ?? 0);
      out.fill(values.length > 0 ? acc / values.length : 0);
      return out;
    }
    default:
      throw new ExportError(`checkpoint key '${key}': unknown transform '${transform}'`);
  }
}

function layerKey(pattern: string, i: number): string {
  return pattern.replaceAll("{i}", String(i));
}

interface ResolvedArray {
  shape: number[];
  data: Float64Array;
  /** Checkpoint key the values came from; undefined for synthesized arrays. */
  key?: string;
}

function resolveArray(
  ckpt: Checkpoint,
  src: ArraySource,
  layerIndex: number,
  arrName: string,
): ResolvedArray | undefined {
  if (src.key) {
    const key = layerKey(src.key, layerIndex);
    const tensor = ckpt.tensors.get(key);
    if (!tensor) {
      if (src.optional) return undefined;
      throw new ExportError(`missing checkpoint key '${key}' (source for '${arrName}')`);
    }
    return { shape: tensor.shape.slice(), data: applyTransform(tensor.data, src.transform, key), key };
  }
  // synthesized arrays get their shape filled in by the caller
  return { shape: [], data: new Float64Array(0) };
}

function synthesize(rule: string, shape: number[]): ResolvedArray {
  const count = shape.reduce((a, b) => a * b, 1);
  const data = new Float64Array(count);
  if (rule === "ones") data.fill(1);
  return { shape, data };
}

function checkShape(arr: ResolvedArray, want: number[], arrName: string, layerIndex: number): void {
  const ok = arr.shape.length === want.length && arr.shape.every((d, i) => d === want[i]);
  if (!ok) {
    const where = arr.key ? `checkpoint key '${arr.key}'` : `synthesized array '${arrName}' (layer ${layerIndex})`;
    throw new ExportError(`${where}: shape [${arr.shape}] does not match expected [${want}]`);
  }
}

/** Count layers by probing the pole key for consecutive indices. */
function discoverLayers(ckpt: Checkpoint, recipe: ExportRecipe): number {
  const pattern = recipe.arrays["lambda_re"]?.key;
  if (!pattern) throw new ExportError("recipe has no checkpoint key for lambda_re");
  let count = 0;
  while (ckpt.tensors.has(layerKey(pattern, count))) count++;
  if (count === 0) {
    throw new ExportError(
      `missing checkpoint key '${layerKey(pattern, 0)}': no layers found (wrong architecture or key mapping?)`,
    );
  }
  return count;
}

function zohDiscretize(layer: InterchangeLayer): void {
  const n = layer.n;
  const lamRe = layer.arrays.get("lambda_re")!.data;
  const lamIm = layer.arrays.get("lambda_im")!.data;
  const delta = layer.arrays.get("delta")!.data;
  const BRe = layer.arrays.get("B_re")!.data;
  const BIm = layer.arrays.get("B_im")!.data;
  const h = layer.h;
  for (let i = 0; i < n; i++) {
    const d = delta[i] ?? 0;
    const re = (lamRe[i] ?? 0) * d;
    const im = (lamIm[i] ?? 0) * d;
    // lambda_d = exp(lambda * delta)
    const mag = Math.exp(re);
    const ldRe = mag * Math.cos(im);
    const ldIm = mag * Math.sin(im);
    // row scale s = (lambda_d - 1) / lambda, with s -> delta as lambda -> 0
    let sRe: number;
    let sIm: number;
    if (Math.hypot(re, im) < ZOH_ZERO_GUARD) {
      sRe = d;
      sIm = 0;
    } else {
      const lr = lamRe[i] ?? 0;
      const li = lamIm[i] ?? 0;
      const den = lr * lr + li * li;
      sRe = ((ldRe - 1) * lr + ldIm * li) / den;
      sIm = (ldIm * lr - (ldRe - 1) * li) / den;
    }
    for (let j = 0; j < h; j++) {
      const br = BRe[i * h + j] ?? 0;
      const bi = BIm[i * h + j] ?? 0;
      BRe[i * h + j] = sRe * br - sIm * bi;
      BIm[i * h + j] = sRe * bi + sIm * br;
    }
    lamRe[i] = ldRe;
    lamIm[i] = ldIm;
    // follows from Re < 0 and delta > 0, but a checkpoint with extreme
    // values can still overflow its way past the circle
    const r = Math.hypot(ldRe, ldIm);
    if (!(r < 1)) {
      throw new ExportError(`pole ${i} of '${layer.name}' lands at |lambda| = ${r} >= 1 after the zero-order hold`);
    }
  }
  layer.arrays.delete("delta");
  layer.timeDomain = "discrete";
}

function validateLayer(layer: InterchangeLayer, keys: Map<string, string>, layerIndex: number): void {
  const lamRe = layer.arrays.get("lambda_re")!.data;
  const lamIm = layer.arrays.get("lambda_im")!.data;
  const named = (arr: string) => {
    const k = keys.get(arr);
    return k ? `checkpoint key '${k}'` : `synthesized '${arr}'`;
  };
  // the exporter always assembles continuous parameters first, so the
  // stability gate is the Hurwitz condition; the zero-order hold re-checks
  // the unit circle on its own output
  for (let i = 0; i < layer.n; i++) {
    if (!((lamRe[i] ?? 0) < 0)) {
      throw new ExportError(
        `layer ${layerIndex}: pole ${i} has Re = ${lamRe[i]}, not Hurwitz (${named("lambda_re")})`,
      );
    }
  }
  const delta = layer.arrays.get("delta")!.data;
  for (let i = 0; i < layer.n; i++) {
    if (!((delta[i] ?? 0) > 0) || !Number.isFinite(delta[i] ?? NaN)) {
      throw new ExportError(`layer ${layerIndex}: step size ${i} is ${delta[i]}, must be positive (${named("delta")})`);
    }
  }
  if (layer.conjugatePairs) {
    for (let i = 0; i < layer.n; i++) {
      if (!((lamIm[i] ?? 0) > 0)) {
        throw new ExportError(
          `layer ${layerIndex}: pole ${i} has Im = ${lamIm[i]} but the layer stores conjugate-pair halves, ` +
            `which need strictly positive imaginary parts (${named("lambda_im")}); ` +
            `use pairHandling "full" if the checkpoint stores both pair members`,
        );
      }
    }
  }
}

export function exportCheckpoint(checkpointPath: string, recipe: ExportRecipe, outDir: string): ExportSummary {
  const ckpt = readSafetensors(checkpointPath);
  const layerCount = discoverLayers(ckpt, recipe);
  const pad = Math.max(2, String(layerCount - 1).length);

  const layers: InterchangeLayer[] = [];
  for (let li = 0; li < layerCount; li++) {
    const resolved = new Map<string, ResolvedArray>();
    for (const [arrName, src] of Object.entries(recipe.arrays)) {
      const arr = resolveArray(ckpt, src, li, arrName);
      if (arr) resolved.set(arrName, arr);
    }

    const lamArr = resolved.get("lambda_re")!;
    if (lamArr.shape.length !== 1) {
      throw new ExportError(`checkpoint key '${lamArr.key}': expected a 1-d pole vector, got shape [${lamArr.shape}]`);
    }
    const n = lamArr.shape[0] ?? 0;
    const cArr = resolved.get("C_re");
    let h: number;
    if (cArr && cArr.key) {
      if (cArr.shape.length !== 2 || cArr.shape[1] !== n) {
        throw new ExportError(
          `checkpoint key '${cArr.key}': expected shape [h, ${n}] for the readout matrix, got [${cArr.shape}]`,
        );
      }
      h = cArr.shape[0] ?? 0;
    } else {
      h = 1; // synthesized couplings use a single surrogate channel
    }

    const layer: InterchangeLayer = {
      name: `layer${String(li).padStart(pad, "0")}`,
      n,
      h,
      timeDomain: "continuous",
      conjugatePairs: false,
      bidirectional: resolved.has("C_bwd_re"),
      arrays: new Map(),
    };
    if (resolved.has("C_bwd_re") !== resolved.has("C_bwd_im")) {
      throw new ExportError(
        `layer ${li}: C_bwd_re and C_bwd_im must both be present or both absent in the checkpoint`,
      );
    }

    const sourceKeys = new Map<string, string>();
    for (const [arrName, arr] of resolved) {
      let finalArr = arr;
      if (!arr.key) {
        const src = recipe.arrays[arrName]!;
        finalArr = synthesize(src.synthesize ?? "zeros", shapeFor(arrName, n, h));
      }
      checkShape(finalArr, shapeFor(arrName, n, h), arrName, li);
      if (arr.key) sourceKeys.set(arrName, arr.key);
      layer.arrays.set(arrName, { shape: finalArr.shape, data: finalArr.data });
    }

    // pair flag: "auto" treats an all-upper-half-plane pole set as half storage
    const lamIm = layer.arrays.get("lambda_im")!.data;
    if (recipe.pairHandling === "half") {
      layer.conjugatePairs = true;
    } else if (recipe.pairHandling === "auto") {
      let allUpper = n > 0;
      for (let i = 0; i < n; i++) if (!((lamIm[i] ?? 0) > 0)) allUpper = false;
      layer.conjugatePairs = allUpper;
    }

    validateLayer(layer, sourceKeys, li);
    if (recipe.discretization === "zoh") zohDiscretize(layer);
    layers.push(layer);
  }

  const exportMeta: Record<string, unknown> = {
    architecture: recipe.architecture,
    source: path.basename(checkpointPath),
    discretization: recipe.discretization,
    pair_handling: recipe.pairHandling,
  };
  if (recipe.approximate) exportMeta["approximate"] = true;
  if (recipe.notes.length > 0) exportMeta["notes"] = recipe.notes;
  const meta: Meta = { export: exportMeta };

  writeInterchange(outDir, layers, meta);
  return {
    outDir,
    layers: layers.length,
    modes: layers.reduce((a, l) => a + l.n, 0),
    timeDomain: layers[0]?.timeDomain ?? "continuous",
    conjugatePairs: layers.map((l) => l.conjugatePairs),
    approximate: recipe.approximate,
  };
}

function shapeFor(arrName: string, n: number, h: number): number[] {
  switch (arrName) {
    case "lambda_re":
    case "lambda_im":
    case "delta":
      return [n];
    case "B_re":
    case "B_im":
      return [n, h];
    case "C_re":
    case "C_im":
    case "C_bwd_re":
    case "C_bwd_im":
      return [h, n];
    default:
      throw new ExportError(`recipe maps unknown interchange array '${arrName}'`);
  }
}

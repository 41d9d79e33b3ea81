// Writer for the ssmprune model-directory interchange format.
//
// A model directory holds manifest.json plus one raw binary file per array.
// Array files are little-endian float64, row-major, named
// "<layer>__<array>.bin". The manifest records shapes and per-layer flags.
// Output is deterministic: same inputs, same bytes, no timestamps.

import * as fs from "node:fs";
import * as path from "node:path";

export const FORMAT_VERSION = "1";

// fixed emission order; required ones must all be present
const REQUIRED_ARRAYS = ["lambda_re", "lambda_im", "B_re", "B_im", "C_re", "C_im"];
const OPTIONAL_ARRAYS = ["C_bwd_re", "C_bwd_im", "delta", "D_re", "D_im"];

export interface InterchangeArray {
  shape: number[];
  data: Float64Array;
}

export interface InterchangeLayer {
  name: string;
  n: number;
  h: number;
  timeDomain: "continuous" | "discrete";
  conjugatePairs: boolean;
  bidirectional: boolean;
  arrays: Map<string, InterchangeArray>;
}

export type Meta = Record<string, unknown>;

function expectedShape(arrName: string, n: number, h: number): number[] {
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
    case "D_re":
    case "D_im":
      return [h, h];
    default:
      throw new Error(`unknown interchange array '${arrName}'`);
  }
}

function sameShape(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((d, i) => d === b[i]);
}

function checkLayer(layer: InterchangeLayer): void {
  if (!/^[A-Za-z0-9_.-]+$/.test(layer.name)) {
    throw new Error(`layer name '${layer.name}' contains characters unsafe for file names`);
  }
  for (const arrName of REQUIRED_ARRAYS) {
    if (!layer.arrays.has(arrName)) {
      throw new Error(`layer '${layer.name}': required array '${arrName}' missing`);
    }
  }
  for (const [arrName, arr] of layer.arrays) {
    const want = expectedShape(arrName, layer.n, layer.h);
    if (!sameShape(arr.shape, want)) {
      throw new Error(
        `layer '${layer.name}': array '${arrName}' has shape [${arr.shape}], expected [${want}]`,
      );
    }
    const count = arr.shape.reduce((a, b) => a * b, 1);
    if (arr.data.length !== count) {
      throw new Error(`layer '${layer.name}': array '${arrName}' has ${arr.data.length} values for shape [${arr.shape}]`);
    }
    for (let i = 0; i < arr.data.length; i++) {
      if (!Number.isFinite(arr.data[i])) {
        throw new Error(`layer '${layer.name}': array '${arrName}' has a non-finite value at ${i}`);
      }
    }
  }
  if (layer.timeDomain === "continuous" && !layer.arrays.has("delta")) {
    throw new Error(`layer '${layer.name}': continuous layers require a delta array`);
  }
  if (layer.timeDomain === "discrete" && layer.arrays.has("delta")) {
    throw new Error(`layer '${layer.name}': discrete layers must not carry delta`);
  }
  const hasBwd = layer.arrays.has("C_bwd_re");
  if (layer.arrays.has("C_bwd_re") !== layer.arrays.has("C_bwd_im")) {
    throw new Error(`layer '${layer.name}': C_bwd_re and C_bwd_im must come together`);
  }
  if (hasBwd !== layer.bidirectional) {
    throw new Error(`layer '${layer.name}': bidirectional flag disagrees with C_bwd presence`);
  }
}

function encodeF64(data: Float64Array): Buffer {
  const buf = Buffer.alloc(data.length * 8);
  for (let i = 0; i < data.length; i++) buf.writeDoubleLE(data[i] ?? 0, i * 8);
  return buf;
}

/** Validate and write a model directory. Nothing is written unless every
 * layer passes the shape and finiteness checks. */
export function writeInterchange(outDir: string, layers: InterchangeLayer[], meta?: Meta): void {
  if (layers.length === 0) throw new Error("a model needs at least one layer");
  const seen = new Set<string>();
  for (const layer of layers) {
    if (seen.has(layer.name)) throw new Error(`duplicate layer name '${layer.name}'`);
    seen.add(layer.name);
    checkLayer(layer);
  }

  fs.mkdirSync(outDir, { recursive: true });
  const records: unknown[] = [];
  for (const layer of layers) {
    const arrays: Record<string, unknown> = {};
    for (const arrName of [...REQUIRED_ARRAYS, ...OPTIONAL_ARRAYS]) {
      const arr = layer.arrays.get(arrName);
      if (!arr) continue;
      const fileName = `${layer.name}__${arrName}.bin`;
      fs.writeFileSync(path.join(outDir, fileName), encodeF64(arr.data));
      arrays[arrName] = { shape: arr.shape, dtype: "f64", path: fileName };
    }
    records.push({
      name: layer.name,
      n: layer.n,
      h: layer.h,
      time_domain: layer.timeDomain,
      conjugate_pairs: layer.conjugatePairs,
      bidirectional: layer.bidirectional,
      arrays,
    });
  }
  const manifest: Record<string, unknown> = { format_version: FORMAT_VERSION, layers: records };
  if (meta && Object.keys(meta).length > 0) manifest["meta"] = meta;
  fs.writeFileSync(path.join(outDir, "manifest.json"), JSON.stringify(manifest, null, 2) + "\n");
}

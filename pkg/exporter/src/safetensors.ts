// Minimal safetensors container support: enough to read real checkpoints
// (F32/F64 tensors) and to write the synthetic fixtures the tests use.
//
// Layout: 8-byte little-endian u64 header length, then that many bytes of
// JSON mapping tensor name -> {dtype, shape, data_offsets}, then the packed
// data region. Offsets are relative to the start of the data region.

import * as fs from "node:fs";

export interface TensorEntry {
  dtype: string;
  shape: number[];
  /** Values widened to f64 regardless of storage dtype. */
  data: Float64Array;
}

export interface Checkpoint {
  tensors: Map<string, TensorEntry>;
  metadata: Record<string, string>;
}

const HEADER_LEN_BYTES = 8;
// header JSON larger than this is assumed to be a corrupt length field
const MAX_HEADER = 100 * 1024 * 1024;

function countElements(shape: number[]): number {
  let total = 1;
  for (const dim of shape) {
    if (!Number.isInteger(dim) || dim < 0) {
      throw new Error(`safetensors: bad shape dimension ${dim}`);
    }
    total *= dim;
  }
  return total;
}

export function readSafetensors(path: string): Checkpoint {
  const raw = fs.readFileSync(path);
  if (raw.length < HEADER_LEN_BYTES) {
    throw new Error(`${path}: truncated safetensors file (${raw.length} bytes)`);
  }
  const view = new DataView(raw.buffer, raw.byteOffset, raw.byteLength);
  const headerLen = Number(view.getBigUint64(0, true));
  if (headerLen > MAX_HEADER || HEADER_LEN_BYTES + headerLen > raw.length) {
    throw new Error(`${path}: header length ${headerLen} exceeds file size`);
  }
  const headerText = raw.subarray(HEADER_LEN_BYTES, HEADER_LEN_BYTES + headerLen).toString("utf8");
  let header: Record<string, unknown>;
  try {
    header = JSON.parse(headerText);
  } catch {
    throw new Error(`${path}: safetensors header is not valid JSON`);
  }

  const dataStart = HEADER_LEN_BYTES + headerLen;
  const dataLen = raw.length - dataStart;
  const tensors = new Map<string, TensorEntry>();
  let metadata: Record<string, string> = {};

  for (const [name, value] of Object.entries(header)) {
    if (name === "__metadata__") {
      metadata = value as Record<string, string>;
      continue;
    }
    const info = value as { dtype?: string; shape?: number[]; data_offsets?: [number, number] };
    if (!info || typeof info.dtype !== "string" || !Array.isArray(info.shape) || !Array.isArray(info.data_offsets)) {
      throw new Error(`${path}: malformed header entry for tensor '${name}'`);
    }
    const [begin, end] = info.data_offsets;
    if (begin < 0 || end < begin || end > dataLen) {
      throw new Error(`${path}: tensor '${name}' offsets [${begin}, ${end}] out of range`);
    }
    const count = countElements(info.shape);
    const bytes = end - begin;
    const slice = raw.subarray(dataStart + begin, dataStart + end);
    const sliceView = new DataView(slice.buffer, slice.byteOffset, slice.byteLength);
    const data = new Float64Array(count);
    if (info.dtype === "F32") {
      if (bytes !== count * 4) {
        throw new Error(`${path}: tensor '${name}' has ${bytes} bytes, expected ${count * 4} for F32 shape [${info.shape}]`);
      }
      for (let i = 0; i < count; i++) data[i] = sliceView.getFloat32(i * 4, true);
    } else if (info.dtype === "F64") {
      if (bytes !== count * 8) {
        throw new Error(`${path}: tensor '${name}' has ${bytes} bytes, expected ${count * 8} for F64 shape [${info.shape}]`);
      }
      for (let i = 0; i < count; i++) data[i] = sliceView.getFloat64(i * 8, true);
    } else {
      throw new Error(`${path}: tensor '${name}' has unsupported dtype '${info.dtype}' (only F32/F64)`);
    }
    tensors.set(name, { dtype: info.dtype, shape: info.shape.slice(), data });
  }
  return { tensors, metadata };
}

export interface WriteTensor {
  dtype: "F32" | "F64";
  shape: number[];
  data: Float64Array | number[];
}

/** Write a safetensors file. Tensor order follows the map's insertion order,
 * so identical inputs produce identical bytes. */
export function writeSafetensors(
  path: string,
  tensors: Map<string, WriteTensor>,
  metadata?: Record<string, string>,
): void {
  const header: Record<string, unknown> = {};
  if (metadata && Object.keys(metadata).length > 0) {
    header["__metadata__"] = metadata;
  }
  const chunks: Buffer[] = [];
  let offset = 0;
  for (const [name, t] of tensors) {
    const count = countElements(t.shape);
    const values = t.data;
    if (values.length !== count) {
      throw new Error(`safetensors: tensor '${name}' has ${values.length} values for shape [${t.shape}]`);
    }
    const itemBytes = t.dtype === "F32" ? 4 : 8;
    const buf = Buffer.alloc(count * itemBytes);
    for (let i = 0; i < count; i++) {
      const v = values[i] ?? 0;
      if (t.dtype === "F32") buf.writeFloatLE(Math.fround(v), i * 4);
      else buf.writeDoubleLE(v, i * 8);
    }
    header[name] = { dtype: t.dtype, shape: t.shape, data_offsets: [offset, offset + buf.length] };
    chunks.push(buf);
    offset += buf.length;
  }
  const headerBuf = Buffer.from(JSON.stringify(header), "utf8");
  const lenBuf = Buffer.alloc(HEADER_LEN_BYTES);
  lenBuf.writeBigUInt64LE(BigInt(headerBuf.length), 0);
  fs.writeFileSync(path, Buffer.concat([lenBuf, headerBuf, ...chunks]));
}

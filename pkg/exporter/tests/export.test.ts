import { describe, expect, it } from "vitest";
import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { readSafetensors, writeSafetensors, WriteTensor } from "../src/safetensors.js";
import { exportCheckpoint, ExportError } from "../src/exporter.js";
import { builtinRecipe, resolveRecipe } from "../src/recipe.js";
import { makeS5Checkpoint, makeS4DCheckpoint, makeMambaCheckpoint } from "../src/fixtures.js";

function tmp(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "ssmexp-"));
}

// flags as the pruning toolkit sees them after a full validated load
function loadFlags(dir: string): {
  layers: { name: string; n: number; h: number; time_domain: string; conjugate_pairs: boolean; bidirectional: boolean; has_delta: boolean }[];
  meta: Record<string, unknown>;
} {
  const script = [
    "import json, sys",
    "from ssmprune.io import load_model",
    "stack = load_model(sys.argv[1])",
    "print(json.dumps({",
    "  'layers': [",
    "    {'name': l.name, 'n': l.n, 'h': l.h, 'time_domain': l.time_domain,",
    "     'conjugate_pairs': l.conjugate_pairs, 'bidirectional': l.bidirectional,",
    "     'has_delta': l.delta is not None}",
    "    for l in stack.layers],",
    "  'meta': stack.meta}))",
  ].join("\n");
  const out = execFileSync("python3", ["-c", script, dir], { encoding: "utf8" });
  return JSON.parse(out);
}

function readManifest(dir: string): any {
  return JSON.parse(fs.readFileSync(path.join(dir, "manifest.json"), "utf8"));
}

function dirBytes(dir: string): Map<string, Buffer> {
  const out = new Map<string, Buffer>();
  for (const name of fs.readdirSync(dir).sort()) {
    out.set(name, fs.readFileSync(path.join(dir, name)));
  }
  return out;
}

// read a checkpoint, apply an edit, write it back out
function rewriteCheckpoint(src: string, dst: string, edit: (tensors: Map<string, WriteTensor>) => void): void {
  const ck = readSafetensors(src);
  const tensors = new Map<string, WriteTensor>();
  for (const [k, v] of ck.tensors) {
    tensors.set(k, { dtype: v.dtype as "F32" | "F64", shape: v.shape.slice(), data: v.data });
  }
  edit(tensors);
  writeSafetensors(dst, tensors, ck.metadata);
}

describe("safetensors container", () => {
  it("round-trips F32 and F64 tensors", () => {
    const dir = tmp();
    const file = path.join(dir, "t.safetensors");
    const tensors = new Map<string, WriteTensor>([
      ["a", { dtype: "F64", shape: [2, 2], data: new Float64Array([1, -2.5, 3e-7, 4]) }],
      ["b", { dtype: "F32", shape: [3], data: new Float64Array([0.5, -0.25, 8]) }],
    ]);
    writeSafetensors(file, tensors, { origin: "test" });
    const back = readSafetensors(file);
    expect(back.metadata).toEqual({ origin: "test" });
    expect(Array.from(back.tensors.get("a")!.data)).toEqual([1, -2.5, 3e-7, 4]);
    expect(back.tensors.get("b")!.shape).toEqual([3]);
    // the chosen values are exactly representable in binary32
    expect(Array.from(back.tensors.get("b")!.data)).toEqual([0.5, -0.25, 8]);
  });

  it("rejects truncated files and unknown dtypes", () => {
    const dir = tmp();
    const file = path.join(dir, "bad.safetensors");
    fs.writeFileSync(file, Buffer.from([1, 2, 3]));
    expect(() => readSafetensors(file)).toThrow(/truncated/);
    const tensors = new Map<string, WriteTensor>([["x", { dtype: "F32", shape: [1], data: [1] }]]);
    writeSafetensors(file, tensors);
    const raw = fs.readFileSync(file);
    // header is plain JSON, so corrupt the dtype in place
    raw.write("I64", raw.indexOf("F32"));
    fs.writeFileSync(file, raw);
    expect(() => readSafetensors(file)).toThrow(/unsupported dtype 'I64'/);
  });
});

describe("s5 export", () => {
  it("round-trips through the toolkit's validated load with correct flags", () => {
    const dir = tmp();
    const ckpt = path.join(dir, "s5.safetensors");
    makeS5Checkpoint(ckpt, { layers: 2, modes: 4, channels: 3, seed: 11 });
    const outDir = path.join(dir, "model");
    const summary = exportCheckpoint(ckpt, builtinRecipe("s5"), outDir);
    expect(summary.layers).toBe(2);
    expect(summary.modes).toBe(8);

    const manifest = readManifest(outDir);
    expect(manifest.format_version).toBe("1");
    for (const rec of manifest.layers) {
      expect(rec.time_domain).toBe("continuous");
      expect(rec.conjugate_pairs).toBe(true);
      expect(rec.arrays.delta).toBeDefined();
    }

    const flags = loadFlags(outDir);
    expect(flags.layers.map((l) => l.name)).toEqual(["layer00", "layer01"]);
    for (const l of flags.layers) {
      expect(l.time_domain).toBe("continuous");
      expect(l.conjugate_pairs).toBe(true);
      expect(l.bidirectional).toBe(false);
      expect(l.n).toBe(4);
      expect(l.h).toBe(3);
      expect(l.has_delta).toBe(true);
    }
    expect((flags.meta as any).export.architecture).toBe("s5");

    // the full scoring path exercises discretization, stability checks and
    // energy computation on the exported arrays
    execFileSync("ssmprune", ["score", "--model", outDir, "--method", "aire", "--out", path.join(dir, "scores.json")]);
  });

  it("exports bidirectional checkpoints with the backward readout", () => {
    const dir = tmp();
    const ckpt = path.join(dir, "s5b.safetensors");
    makeS5Checkpoint(ckpt, { layers: 1, modes: 3, channels: 2, seed: 5, bidirectional: true });
    const outDir = path.join(dir, "model");
    exportCheckpoint(ckpt, builtinRecipe("s5"), outDir);
    const flags = loadFlags(outDir);
    expect(flags.layers[0]!.bidirectional).toBe(true);
  });

  it("is byte-deterministic", () => {
    const dir = tmp();
    const ckpt = path.join(dir, "s5.safetensors");
    makeS5Checkpoint(ckpt, { seed: 3 });
    const outA = path.join(dir, "a");
    const outB = path.join(dir, "b");
    exportCheckpoint(ckpt, builtinRecipe("s5"), outA);
    exportCheckpoint(ckpt, builtinRecipe("s5"), outB);
    const a = dirBytes(outA);
    const b = dirBytes(outB);
    expect([...a.keys()]).toEqual([...b.keys()]);
    for (const [name, bytes] of a) {
      expect(bytes.equals(b.get(name)!), `file ${name} differs between runs`).toBe(true);
    }
  });

  it("honors pairHandling overrides", () => {
    const dir = tmp();
    const ckpt = path.join(dir, "s5.safetensors");
    makeS5Checkpoint(ckpt, { seed: 9 });
    const outDir = path.join(dir, "full");
    exportCheckpoint(ckpt, resolveRecipe("s5", { pairHandling: "full" }), outDir);
    const manifest = readManifest(outDir);
    expect(manifest.layers.every((l: any) => l.conjugate_pairs === false)).toBe(true);
  });
});

describe("zoh discretization policy", () => {
  it("matches the toolkit's own zero-order hold", () => {
    const dir = tmp();
    const ckpt = path.join(dir, "s5.safetensors");
    makeS5Checkpoint(ckpt, { layers: 2, modes: 5, channels: 2, seed: 21 });
    const contDir = path.join(dir, "cont");
    const discDir = path.join(dir, "disc");
    exportCheckpoint(ckpt, builtinRecipe("s5"), contDir);
    const summary = exportCheckpoint(ckpt, resolveRecipe("s5", { discretization: "zoh" }), discDir);
    expect(summary.timeDomain).toBe("discrete");

    const flags = loadFlags(discDir);
    for (const l of flags.layers) {
      expect(l.time_domain).toBe("discrete");
      expect(l.has_delta).toBe(false);
    }

    const script = [
      "import sys",
      "import numpy as np",
      "from ssmprune.io import load_model",
      "from ssmprune.model import discretize_stack",
      "ref = discretize_stack(load_model(sys.argv[1]))",
      "got = load_model(sys.argv[2])",
      "worst = 0.0",
      "for a, b in zip(ref.layers, got.layers):",
      "    worst = max(worst, float(np.max(np.abs(a.lam - b.lam))))",
      "    worst = max(worst, float(np.max(np.abs(a.B - b.B))))",
      "    worst = max(worst, float(np.max(np.abs(a.C - b.C))))",
      "print(worst)",
    ].join("\n");
    const worst = Number(execFileSync("python3", ["-c", script, contDir, discDir], { encoding: "utf8" }));
    expect(worst).toBeLessThan(1e-12);
  });
});

describe("s4d export", () => {
  it("produces continuous half-pair layers with a real input matrix", () => {
    const dir = tmp();
    const ckpt = path.join(dir, "s4d.safetensors");
    makeS4DCheckpoint(ckpt, { layers: 1, modes: 6, channels: 4, seed: 2 });
    const outDir = path.join(dir, "model");
    exportCheckpoint(ckpt, builtinRecipe("s4d"), outDir);

    const flags = loadFlags(outDir);
    expect(flags.layers[0]!.time_domain).toBe("continuous");
    expect(flags.layers[0]!.conjugate_pairs).toBe(true);
    expect(flags.layers[0]!.n).toBe(6);
    expect(flags.layers[0]!.h).toBe(4);

    const bIm = fs.readFileSync(path.join(outDir, "layer00__B_im.bin"));
    expect(bIm.length).toBe(6 * 4 * 8);
    expect(bIm.every((byte) => byte === 0)).toBe(true);
  });
});

describe("mamba surrogate export", () => {
  it("is flagged approximate and uses the mean step-size bias", () => {
    const dir = tmp();
    const ckpt = path.join(dir, "mamba.safetensors");
    makeMambaCheckpoint(ckpt, { layers: 2, modes: 8, seed: 13 });
    const outDir = path.join(dir, "model");
    const summary = exportCheckpoint(ckpt, builtinRecipe("mamba"), outDir);
    expect(summary.approximate).toBe(true);

    const manifest = readManifest(outDir);
    expect(manifest.meta.export.approximate).toBe(true);
    expect(manifest.meta.export.notes.length).toBeGreaterThan(0);

    const flags = loadFlags(outDir);
    for (const l of flags.layers) {
      expect(l.time_domain).toBe("continuous");
      expect(l.conjugate_pairs).toBe(false);
      expect(l.h).toBe(1);
    }

    // delta must equal mean(softplus(dt_bias)) of the stored f32 values
    const ck = readSafetensors(ckpt);
    const bias = ck.tensors.get("layers.0.dt_bias")!.data;
    let mean = 0;
    for (const x of bias) mean += x > 20 ? x : Math.log1p(Math.exp(x));
    mean /= bias.length;
    const deltaBin = fs.readFileSync(path.join(outDir, "layer00__delta.bin"));
    for (let i = 0; i < 8; i++) {
      expect(deltaBin.readDoubleLE(i * 8)).toBeCloseTo(mean, 12);
    }
  });

  it("refuses half-pair labeling of real poles", () => {
    const dir = tmp();
    const ckpt = path.join(dir, "mamba.safetensors");
    makeMambaCheckpoint(ckpt, { seed: 4 });
    expect(() =>
      exportCheckpoint(ckpt, resolveRecipe("mamba", { pairHandling: "half" }), path.join(dir, "model")),
    ).toThrow(/Im = .* conjugate-pair halves/s);
  });
});

describe("error reporting", () => {
  it("names the missing checkpoint key", () => {
    const dir = tmp();
    const src = path.join(dir, "s5.safetensors");
    const broken = path.join(dir, "broken.safetensors");
    makeS5Checkpoint(src, { layers: 2, seed: 6 });
    rewriteCheckpoint(src, broken, (t) => t.delete("layers.1.C_re"));
    expect(() => exportCheckpoint(broken, builtinRecipe("s5"), path.join(dir, "model"))).toThrow(
      /missing checkpoint key 'layers\.1\.C_re'/,
    );
  });

  it("names the key on a shape surprise", () => {
    const dir = tmp();
    const src = path.join(dir, "s5.safetensors");
    const broken = path.join(dir, "broken.safetensors");
    makeS5Checkpoint(src, { layers: 1, modes: 4, channels: 3, seed: 6 });
    rewriteCheckpoint(src, broken, (t) => {
      const b = t.get("layers.0.B_re")!;
      b.shape = [3, 4]; // transposed: same element count, wrong orientation
    });
    expect(() => exportCheckpoint(broken, builtinRecipe("s5"), path.join(dir, "model"))).toThrow(
      /checkpoint key 'layers\.0\.B_re': shape \[3,4\]/,
    );
  });

  it("fails loudly on a non-Hurwitz pole", () => {
    const dir = tmp();
    const src = path.join(dir, "s5.safetensors");
    const broken = path.join(dir, "broken.safetensors");
    makeS5Checkpoint(src, { layers: 1, seed: 6 });
    rewriteCheckpoint(src, broken, (t) => {
      const lam = t.get("layers.0.Lambda_re")!;
      (lam.data as Float64Array)[2] = 0.25;
    });
    expect(() => exportCheckpoint(broken, builtinRecipe("s5"), path.join(dir, "model"))).toThrow(
      /pole 2 has Re = 0\.25, not Hurwitz.*'layers\.0\.Lambda_re'/,
    );
    // nothing should have been written for the failed export
    expect(fs.existsSync(path.join(dir, "model", "manifest.json"))).toBe(false);
  });

  it("rejects checkpoints with no matching layers", () => {
    const dir = tmp();
    const ckpt = path.join(dir, "mamba.safetensors");
    makeMambaCheckpoint(ckpt, { seed: 1 });
    expect(() => exportCheckpoint(ckpt, builtinRecipe("s5"), path.join(dir, "model"))).toThrow(
      /missing checkpoint key 'layers\.0\.Lambda_re'/,
    );
  });

  it("rejects recipes that leave a required array unsourced", () => {
    expect(() => resolveRecipe("s5", { arrays: { delta: {} } as any })).toThrow(
      /array 'delta' needs either a checkpoint key or a synthesis rule/,
    );
  });
});

describe("command line", () => {
  const here = path.dirname(fileURLToPath(import.meta.url));
  const cli = path.join(here, "..", "dist", "cli.js");

  it("runs fixture generation and export end to end", () => {
    const dir = tmp();
    const ckpt = path.join(dir, "demo.safetensors");
    execFileSync("node", [cli, "--make-fixture", "mamba", "--out", ckpt, "--seed", "42"]);
    const outDir = path.join(dir, "model");
    const stdout = execFileSync("node", [cli, "--checkpoint", ckpt, "--arch", "mamba", "--out", outDir], {
      encoding: "utf8",
    });
    expect(stdout).toContain("approximate surrogate");
    expect(fs.existsSync(path.join(outDir, "manifest.json"))).toBe(true);
    loadFlags(outDir);
  });

  it("exits 2 on usage errors", () => {
    const result = (() => {
      try {
        execFileSync("node", [cli, "--arch", "nope"], { encoding: "utf8", stdio: "pipe" });
        return 0;
      } catch (err) {
        return (err as { status?: number }).status ?? -1;
      }
    })();
    expect(result).toBe(2);
  });
});

#!/usr/bin/env node
// Command-line entry point.
//
//   ssm-export --checkpoint model.safetensors --arch s5 --out model_dir/
//   ssm-export --make-fixture s4d --out demo.safetensors
//
// Exit codes: 0 success, 1 export failure, 2 usage error.

import { parseArgs } from "node:util";
import * as fs from "node:fs";
import { exportCheckpoint, ExportError } from "./exporter.js";
import { Architecture, ExportRecipe, resolveRecipe } from "./recipe.js";
import { makeS5Checkpoint, makeS4DCheckpoint, makeMambaCheckpoint } from "./fixtures.js";

const USAGE = `usage:
  ssm-export --checkpoint <file.safetensors> --arch <s5|s4d|mamba> --out <dir>
             [--discretize <preserve|zoh>] [--pairs <half|full|auto>]
             [--recipe <overrides.json>]
  ssm-export --make-fixture <s5|s4d|mamba> --out <file.safetensors> [--seed <n>]`;

function fail(code: number, message: string): never {
  process.stderr.write(message + "\n");
  process.exit(code);
}

function main(): void {
  let values;
  try {
    ({ values } = parseArgs({
      options: {
        checkpoint: { type: "string" },
        arch: { type: "string" },
        out: { type: "string" },
        discretize: { type: "string" },
        pairs: { type: "string" },
        recipe: { type: "string" },
        "make-fixture": { type: "string" },
        seed: { type: "string" },
        help: { type: "boolean", short: "h" },
      },
    }));
  } catch (err) {
    fail(2, `${(err as Error).message}\n${USAGE}`);
  }

  if (values.help) {
    process.stdout.write(USAGE + "\n");
    return;
  }

  if (values["make-fixture"]) {
    const arch = values["make-fixture"];
    const out = values.out;
    if (!out) fail(2, `--make-fixture needs --out\n${USAGE}`);
    const seed = values.seed ? Number(values.seed) : undefined;
    if (values.seed && !Number.isInteger(seed)) fail(2, `--seed must be an integer, got '${values.seed}'`);
    const options = seed === undefined ? undefined : { seed };
    if (arch === "s5") makeS5Checkpoint(out, options);
    else if (arch === "s4d") makeS4DCheckpoint(out, options);
    else if (arch === "mamba") makeMambaCheckpoint(out, options);
    else fail(2, `--make-fixture: unknown architecture '${arch}'\n${USAGE}`);
    process.stdout.write(`wrote ${arch} fixture checkpoint to ${out}\n`);
    return;
  }

  const { checkpoint, arch, out } = values;
  if (!checkpoint || !arch || !out) {
    fail(2, `--checkpoint, --arch and --out are required\n${USAGE}`);
  }
  if (!["s5", "s4d", "mamba"].includes(arch)) {
    fail(2, `unknown architecture '${arch}' (expected s5, s4d, or mamba)`);
  }

  let override: Partial<ExportRecipe> | undefined;
  if (values.recipe) {
    try {
      override = JSON.parse(fs.readFileSync(values.recipe, "utf8"));
    } catch (err) {
      fail(1, `cannot read recipe overrides from ${values.recipe}: ${(err as Error).message}`);
    }
  }
  if (values.discretize) {
    if (values.discretize !== "preserve" && values.discretize !== "zoh") {
      fail(2, `--discretize must be preserve or zoh, got '${values.discretize}'`);
    }
    override = { ...override, discretization: values.discretize };
  }
  if (values.pairs) {
    if (!["half", "full", "auto"].includes(values.pairs)) {
      fail(2, `--pairs must be half, full, or auto, got '${values.pairs}'`);
    }
    override = { ...override, pairHandling: values.pairs as ExportRecipe["pairHandling"] };
  }

  try {
    const recipe = resolveRecipe(arch as Architecture, override);
    const summary = exportCheckpoint(checkpoint, recipe, out);
    const pairNote = summary.conjugatePairs.every(Boolean)
      ? "conjugate-pair halves"
      : summary.conjugatePairs.some(Boolean)
        ? "mixed pair storage"
        : "full pole storage";
    process.stdout.write(
      `exported ${summary.layers} layer(s), ${summary.modes} mode(s), ` +
        `${summary.timeDomain} time, ${pairNote}` +
        (summary.approximate ? ", approximate surrogate" : "") +
        ` -> ${summary.outDir}\n`,
    );
  } catch (err) {
    if (err instanceof ExportError) fail(1, `export failed: ${err.message}`);
    fail(1, `export failed: ${(err as Error).message}`);
  }
}

main();

// Export recipes: how checkpoint tensors map onto interchange arrays.
//
// A recipe names, for each interchange array, either a checkpoint key
// pattern (with "{i}" standing for the layer index) plus an optional value
// transform, or a synthesis rule for parameters the checkpoint simply does
// not contain. Built-in recipes cover the three supported architectures;
// a JSON recipe file can override any field for renamed checkpoints.

export type Architecture = "s5" | "s4d" | "mamba";

export type Transform =
  | "identity"
  | "neg-exp"        // x -> -exp(x), for log-parameterized decay rates
  | "exp"            // x -> exp(x), for log-parameterized step sizes
  | "softplus-mean"; // x -> log(1+exp(x)) averaged over the vector, broadcast back

export type SynthesisRule = "zeros" | "ones";

export interface ArraySource {
  /** Checkpoint key pattern, e.g. "layers.{i}.Lambda_re". */
  key?: string;
  transform?: Transform;
  /** Used when the architecture has no static counterpart for this array. */
  synthesize?: SynthesisRule;
  /** Absent keys are an error unless the source is marked optional. */
  optional?: boolean;
}

export interface ExportRecipe {
  architecture: Architecture;
  /** "preserve" keeps continuous (lambda, delta) pairs for the toolkit to
   * discretize at load time; "zoh" bakes the zero-order hold in here. */
  discretization: "preserve" | "zoh";
  /** "half": the checkpoint stores one member of each conjugate pole pair;
   * "full": poles are stored outright; "auto": half iff every stored pole
   * has strictly positive imaginary part. */
  pairHandling: "half" | "full" | "auto";
  /** Interchange array name -> where its values come from. */
  arrays: Record<string, ArraySource>;
  /** True when the export is a static stand-in rather than the model's
   * actual input-output map (input-dependent parameters dropped). */
  approximate: boolean;
  /** Human-readable notes recorded in the manifest meta, one per
   * synthesized or approximated parameter. */
  notes: string[];
}

export function builtinRecipe(architecture: Architecture): ExportRecipe {
  switch (architecture) {
    case "s5":
      return {
        architecture,
        discretization: "preserve",
        pairHandling: "auto",
        arrays: {
          lambda_re: { key: "layers.{i}.Lambda_re" },
          lambda_im: { key: "layers.{i}.Lambda_im" },
          B_re: { key: "layers.{i}.B_re" },
          B_im: { key: "layers.{i}.B_im" },
          C_re: { key: "layers.{i}.C_re" },
          C_im: { key: "layers.{i}.C_im" },
          C_bwd_re: { key: "layers.{i}.C_bwd_re", optional: true },
          C_bwd_im: { key: "layers.{i}.C_bwd_im", optional: true },
          delta: { key: "layers.{i}.log_step", transform: "exp" },
        },
        approximate: false,
        notes: [],
      };
    case "s4d":
      // S4D stores a real B and log-parameterized pole decay per mode.
      return {
        architecture,
        discretization: "preserve",
        pairHandling: "auto",
        arrays: {
          lambda_re: { key: "layers.{i}.log_A_real", transform: "neg-exp" },
          lambda_im: { key: "layers.{i}.A_imag" },
          B_re: { key: "layers.{i}.B" },
          B_im: { synthesize: "zeros" },
          C_re: { key: "layers.{i}.C_re" },
          C_im: { key: "layers.{i}.C_im" },
          delta: { key: "layers.{i}.log_dt", transform: "exp" },
        },
        approximate: false,
        notes: ["B_im synthesized as zeros: the checkpoint stores a real input matrix"],
      };
    case "mamba":
      // Selective-scan checkpoints have input-dependent B, C and step size.
      // Only the pole parameters and the step-size bias are static, so the
      // export is a surrogate: unit input/output couplings, one shared step
      // taken as the mean of softplus(dt_bias).
      return {
        architecture,
        discretization: "preserve",
        pairHandling: "full",
        arrays: {
          lambda_re: { key: "layers.{i}.A_log", transform: "neg-exp" },
          lambda_im: { synthesize: "zeros" },
          B_re: { synthesize: "ones" },
          B_im: { synthesize: "zeros" },
          C_re: { synthesize: "ones" },
          C_im: { synthesize: "zeros" },
          delta: { key: "layers.{i}.dt_bias", transform: "softplus-mean" },
        },
        approximate: true,
        notes: [
          "B, C synthesized as unit couplings: the checkpoint's input/output maps are input-dependent",
          "delta is the mean input-independent step-size bias, softplus(dt_bias) averaged per layer",
        ],
      };
  }
}

const TRANSFORMS: ReadonlySet<string> = new Set(["identity", "neg-exp", "exp", "softplus-mean"]);
const RULES: ReadonlySet<string> = new Set(["zeros", "ones"]);
const ARCHITECTURES: ReadonlySet<string> = new Set(["s5", "s4d", "mamba"]);

/** Merge a partial recipe (parsed from JSON) over the architecture's
 * built-in defaults, then check the result is self-consistent. */
export function resolveRecipe(architecture: Architecture, override?: Partial<ExportRecipe>): ExportRecipe {
  if (!ARCHITECTURES.has(architecture)) {
    throw new Error(`unknown architecture '${architecture}' (expected s5, s4d, or mamba)`);
  }
  const base = builtinRecipe(architecture);
  const recipe: ExportRecipe = {
    ...base,
    ...override,
    architecture,
    arrays: { ...base.arrays, ...(override?.arrays ?? {}) },
    notes: override?.notes ?? base.notes,
  };
  if (recipe.discretization !== "preserve" && recipe.discretization !== "zoh") {
    throw new Error(`recipe: discretization '${recipe.discretization}' (expected preserve or zoh)`);
  }
  if (!["half", "full", "auto"].includes(recipe.pairHandling)) {
    throw new Error(`recipe: pairHandling '${recipe.pairHandling}' (expected half, full, or auto)`);
  }
  for (const name of ["lambda_re", "lambda_im", "B_re", "B_im", "C_re", "C_im", "delta"]) {
    const src = recipe.arrays[name];
    if (!src) throw new Error(`recipe: no source or synthesis rule for required array '${name}'`);
    if (!src.key && !src.synthesize) {
      throw new Error(`recipe: array '${name}' needs either a checkpoint key or a synthesis rule`);
    }
    if (src.transform && !TRANSFORMS.has(src.transform)) {
      throw new Error(`recipe: array '${name}' has unknown transform '${src.transform}'`);
    }
    if (src.synthesize && !RULES.has(src.synthesize)) {
      throw new Error(`recipe: array '${name}' has unknown synthesis rule '${src.synthesize}'`);
    }
  }
  if (!recipe.arrays["lambda_re"]?.key) {
    throw new Error("recipe: lambda_re must come from the checkpoint, it anchors layer discovery");
  }
  return recipe;
}

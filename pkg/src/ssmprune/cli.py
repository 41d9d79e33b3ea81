"""Command-line surface: synth | score | select | apply | evaluate | certify | sweep | report.

Exit codes: 0 success, 2 validation failure (including usage errors),
3 I/O or manifest failure.
"""

from __future__ import annotations

import csv
import functools
import io as _io
import sys

import click

from . import evaluation, io, selection
from .exceptions import ManifestError, ValidationError
from .synth import synth as _synth
from .model import ModelStack, discretize_stack
from .scores import METHODS, POLICIES, score_table


def _guard(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except (ManifestError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
    return wrapper


def _load_discrete(model_path: str, no_discretize: bool) -> ModelStack:
    stack = io.load_model(model_path)
    if any(l.time_domain == "continuous" for l in stack.layers):
        if no_discretize:
            raise ValidationError(
                "model has continuous layers; scoring needs discrete poles (drop --no-discretize)"
            )
        click.echo("note: auto-discretizing continuous layers (zero-order hold)", err=True)
        stack = discretize_stack(stack)
    return stack


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"cannot parse float list {text!r}: {exc}") from exc


@click.group()
def main():
    """State pruning toolkit for diagonal state-space models."""


@main.command(name="synth")
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--layers", default=4, show_default=True)
@click.option("--modes", default="16", show_default=True,
              help="Modes per layer: one int or a comma list, e.g. 16 or 8,16,4.")
@click.option("--channels", default=4, show_default=True)
@click.option("--radius-min", default=0.5, show_default=True)
@click.option("--radius-max", default=0.99, show_default=True)
@click.option("--structure", type=click.Choice(["mimo", "multi_siso"]), default="mimo", show_default=True)
@click.option("--time-domain", type=click.Choice(["discrete", "continuous"]), default="discrete", show_default=True)
@click.option("--bidirectional", is_flag=True)
@click.option("--conjugate-pairs", is_flag=True)
@click.option("--gain-spread", default=1.0, show_default=True)
@_guard
def synth_cmd(out, seed, layers, modes, channels, radius_min, radius_max, structure,
              time_domain, bidirectional, conjugate_pairs, gain_spread):
    """Generate a deterministic random model directory."""
    sizes = _parse_floats(modes)
    sizes = [int(m) for m in sizes]
    stack = _synth(
        seed, layers, sizes if len(sizes) > 1 else sizes[0], channels,
        (radius_min, radius_max), structure, time_domain=time_domain,
        bidirectional=bidirectional, conjugate_pairs=conjugate_pairs,
        gain_spread=gain_spread,
    )
    io.save_model(stack, out)
    click.echo(f"wrote {stack.L} layers, {stack.total_modes()} modes to {out}")


@main.command(name="score")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--method", type=click.Choice(list(METHODS)), default="aire", show_default=True)
@click.option("--policy", type=click.Choice(list(POLICIES)), default=None,
              help="Defaults to the method's natural policy.")
@click.option("--epsilon", default=1e-12, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--no-discretize", is_flag=True)
@click.option("--out", required=True, type=click.Path())
@_guard
def score_cmd(model_path, method, policy, epsilon, seed, no_discretize, out):
    """Score every mode of a model."""
    stack = _load_discrete(model_path, no_discretize)
    table = score_table(stack, method, policy, epsilon, seed)
    io.save_scores(table, out)
    click.echo(f"scored {stack.total_modes()} modes ({table.method}/{table.policy}) -> {out}")


@main.command(name="select")
@click.option("--scores", "scores_path", required=True, type=click.Path())
@click.option("--ratio", type=float, default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--layer-floor", type=click.IntRange(0, 1), default=None)
@click.option("--out", required=True, type=click.Path())
@_guard
def select_cmd(scores_path, ratio, threshold, layer_floor, out):
    """Turn a score file into a keep/prune decision."""
    table = io.load_scores(scores_path)
    if table.policy == "prefix":
        decision = selection.select_global_prefix(table, ratio=ratio, threshold=threshold,
                                                  layer_floor=layer_floor)
    else:
        if threshold is not None:
            raise ValidationError("threshold selection needs a prefix score file")
        if ratio is None:
            raise ValidationError("--ratio is required for uniform/global score files")
        if table.policy == "global":
            decision = selection.select_global_raw(table, ratio, layer_floor=layer_floor)
        else:
            decision = selection.select_uniform_ratio(table, ratio, layer_floor=layer_floor)
    io.save_decision(decision, out)
    kept = sum(ld.kept.size for ld in decision.layers)
    total = sum(ld.n for ld in decision.layers)
    click.echo(f"keeping {kept}/{total} modes (achieved ratio {decision.achieved_ratio:.4f}) -> {out}")


@main.command(name="apply")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--decision", "decision_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@_guard
def apply_cmd(model_path, decision_path, out):
    """Materialize a decision into a reduced model directory."""
    stack = io.load_model(model_path)  # keep continuous parameters as stored
    decision = io.load_decision(decision_path)
    reduced = selection.materialize(decision, stack)
    io.save_model(reduced, out)
    click.echo(f"wrote {reduced.L} layers, {reduced.total_modes()} modes to {out}")


@main.command(name="evaluate")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--decision", "decision_path", type=click.Path(), default=None)
@click.option("--pruned", "pruned_path", type=click.Path(), default=None)
@click.option("--horizon", default=256, show_default=True)
@click.option("--grid-points", type=int, default=None)
@click.option("--mc-trials", default=0, show_default=True)
@click.option("--mc-steps", default=20000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@_guard
def evaluate_cmd(model_path, decision_path, pruned_path, horizon, grid_points,
                 mc_trials, mc_steps, seed, out):
    """Distortion report against a decision or a reduced model."""
    if (decision_path is None) == (pruned_path is None):
        raise ValidationError("exactly one of --decision and --pruned is required")
    stack = _load_discrete(model_path, False)
    target = io.load_decision(decision_path) if decision_path else _load_discrete(pruned_path, False)
    report = evaluation.distortion(stack, target, T=horizon, grid_points=grid_points,
                                   mc_trials=mc_trials, mc_steps=mc_steps, seed=seed)
    io.save_report(report, out, "distortion")
    click.echo(f"exact H2 distortion {report.total_exact_h2:.6g}, "
               f"max empirical worst-case gain {report.max_empirical_hinf:.6g} -> {out}")


@main.command(name="certify")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--decision", "decision_path", required=True, type=click.Path())
@click.option("--grid-points", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
@_guard
def certify_cmd(model_path, decision_path, grid_points, out):
    """Per-layer certified error bounds for a decision."""
    stack = _load_discrete(model_path, False)
    decision = io.load_decision(decision_path)
    certs = evaluation.certify(stack, decision, grid_points=grid_points)
    io.save_report(certs, out, "certificates")
    worst = max((c.bound for c in certs), default=0.0)
    click.echo(f"certified {len(certs)} layers, max bound {worst:.6g} -> {out}")


@main.command(name="sweep")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--method", type=click.Choice(list(METHODS)), default="aire", show_default=True)
@click.option("--policy", type=click.Choice(list(POLICIES)), default=None)
@click.option("--ratios", default="0,0.25,0.5,0.75,0.9", show_default=True)
@click.option("--epsilon", default=1e-12, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--horizon", default=128, show_default=True)
@click.option("--grid-points", type=int, default=None)
@click.option("--layer-floor", type=click.IntRange(0, 1), default=None)
@click.option("--out", required=True, type=click.Path())
@_guard
def sweep_cmd(model_path, method, policy, ratios, epsilon, seed, horizon,
              grid_points, layer_floor, out):
    """Run selection, distortion, and certification across ratios."""
    stack = _load_discrete(model_path, False)
    result = evaluation.sweep(stack, method, policy, _parse_floats(ratios),
                              epsilon, seed, T=horizon, grid_points=grid_points,
                              layer_floor=layer_floor)
    io.save_report(result, out, "sweep")
    click.echo(f"swept {len(result.rows)} ratios ({result.method}/{result.policy}) -> {out}")


def _render_sweep(doc: dict) -> tuple[str, list[list]]:
    data = doc.get("data", {})
    rows = data.get("rows", [])
    sizes = data.get("layer_sizes", {})
    names = list(sizes)
    head = ["ratio", "kept", "achieved", "modal_drop", "exact_h2", "emp_hinf", "bound"]
    table = []
    for r in rows:
        table.append([
            f"{r['ratio']:.3f}", str(r["kept_modes"]), f"{r['achieved_ratio']:.3f}",
            f"{r['modal_drop']:.5g}", f"{r['exact_h2']:.5g}",
            f"{r['max_empirical_hinf']:.5g}", f"{r['max_bound']:.5g}",
        ])
    widths = [max(len(h), *(len(row[i]) for row in table)) if table else len(h)
              for i, h in enumerate(head)]
    lines = [f"sweep: method={data.get('method')} policy={data.get('policy')}"]
    lines.append("  ".join(h.rjust(w) for h, w in zip(head, widths)))
    for row in table:
        lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))

    lines.append("")
    lines.append("kept modes per layer (columns: ratios)")
    ratio_labels = [f"{r['ratio']:.3f}" for r in rows]
    name_w = max([len("layer")] + [len(n) for n in names])
    lines.append("  ".join(["layer".ljust(name_w)] + [lbl.rjust(8) for lbl in ratio_labels]))
    for name in names:
        cells = []
        for r in rows:
            kept = r["kept_per_layer"].get(name, 0)
            cells.append(f"{kept}/{sizes[name]}".rjust(8))
        lines.append("  ".join([name.ljust(name_w)] + cells))

    csv_rows = [head + [f"kept[{n}]" for n in names]]
    for r in rows:
        csv_rows.append([
            r["ratio"], r["kept_modes"], r["achieved_ratio"], r["modal_drop"],
            r["exact_h2"], r["max_empirical_hinf"], r["max_bound"],
        ] + [r["kept_per_layer"].get(n, 0) for n in names])
    return "\n".join(lines) + "\n", csv_rows


@main.command(name="report")
@click.option("--sweep", "sweep_path", required=True, type=click.Path())
@click.option("--out", type=click.Path(), default=None,
              help="Write the table here and a CSV twin to OUT.csv.")
@_guard
def report_cmd(sweep_path, out):
    """Render a sweep as a human-readable table plus CSV."""
    doc = io.load_json(sweep_path)
    if doc.get("kind") != "sweep":
        raise ValidationError(f"{sweep_path}: expected a sweep report, got kind {doc.get('kind')!r}")
    text, csv_rows = _render_sweep(doc)
    if out is None:
        click.echo(text, nl=False)
        return
    buf = _io.StringIO()
    csv.writer(buf).writerows(csv_rows)
    io._write_atomic(out, text.encode())
    io._write_atomic(out + ".csv", buf.getvalue().encode())
    click.echo(f"wrote {out} and {out}.csv")


if __name__ == "__main__":
    main()

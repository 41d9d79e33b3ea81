"""Interchange directory format and score/decision/report serialization.

A model directory holds manifest.json plus one raw binary file per
parameter array. Binary arrays are little-endian IEEE-754 64-bit floats
in row-major order; complex matrices are stored as separate _re/_im
parts. Tiny arrays may be inlined into the manifest as JSON values. All
files are written atomically (temp file then rename) and contain no
timestamps, so identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import dataclasses
import json
import os
import re
import tempfile

import numpy as np

from .exceptions import ManifestError, ValidationError
from .model import DiagonalLayer, ModelStack, check_stack
from .scores import LayerScores, ScoreTable
from .selection import LayerDecision, PruneDecision

FORMAT_VERSION = "1"

_NAME_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")

# array name -> (shape builder, complex part owner)
_REQUIRED_ARRAYS = ("lambda_re", "lambda_im", "B_re", "B_im", "C_re", "C_im")
_OPTIONAL_ARRAYS = ("C_bwd_re", "C_bwd_im", "delta", "D_re", "D_im")


def _expected_shape(arr_name: str, n: int, h: int) -> tuple:
    if arr_name.startswith("lambda") or arr_name == "delta":
        return (n,)
    if arr_name.startswith("B"):
        return (n, h)
    if arr_name.startswith("C"):
        return (h, n)
    return (h, h)  # D


def _write_atomic(path: str, data: bytes) -> None:
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, allow_nan=False) + "\n").encode()


def write_json(obj, path: str) -> None:
    _write_atomic(path, _dump_json(obj))


def load_json(path: str) -> dict:
    try:
        with open(path, "rb") as f:
            return json.loads(f.read())
    except OSError:
        raise
    except ValueError as exc:
        raise ManifestError(f"{path}: not valid JSON: {exc}") from exc


def save_model(stack: ModelStack, path: str, inline_threshold: int = 0) -> None:
    """Write a model directory; arrays of size <= inline_threshold are inlined."""
    check_stack(stack)
    os.makedirs(path, exist_ok=True)
    records = []
    for layer in stack.layers:
        if not _NAME_RE.match(layer.name):
            raise ValidationError(
                f"layer '{layer.name}': name must match {_NAME_RE.pattern} to be file-system safe"
            )
        arrays = {}

        def put(arr_name: str, values: np.ndarray):
            flat = np.ascontiguousarray(values, dtype="<f8")
            entry = {"shape": list(flat.shape), "dtype": "f64"}
            if flat.size <= inline_threshold:
                entry["values"] = flat.ravel().tolist()
            else:
                fname = f"{layer.name}__{arr_name}.bin"
                _write_atomic(os.path.join(path, fname), flat.tobytes())
                entry["path"] = fname
            arrays[arr_name] = entry

        put("lambda_re", layer.lam.real)
        put("lambda_im", layer.lam.imag)
        put("B_re", layer.B.real)
        put("B_im", layer.B.imag)
        put("C_re", layer.C.real)
        put("C_im", layer.C.imag)
        if layer.C_bwd is not None:
            put("C_bwd_re", layer.C_bwd.real)
            put("C_bwd_im", layer.C_bwd.imag)
        if layer.delta is not None:
            put("delta", layer.delta)
        if layer.D is not None:
            put("D_re", layer.D.real)
            put("D_im", layer.D.imag)
        records.append({
            "name": layer.name, "n": layer.n, "h": layer.h,
            "time_domain": layer.time_domain,
            "conjugate_pairs": layer.conjugate_pairs,
            "bidirectional": layer.bidirectional,
            "arrays": arrays,
        })
    manifest = {"format_version": stack.format_version, "layers": records}
    if stack.meta:
        manifest["meta"] = stack.meta
    write_json(manifest, os.path.join(path, "manifest.json"))


def _read_array(path: str, layer_name: str, arr_name: str, entry, n: int, h: int) -> np.ndarray:
    where = f"layer '{layer_name}': array '{arr_name}'"
    if not isinstance(entry, dict):
        raise ManifestError(f"{where}: manifest entry must be an object")
    shape = tuple(entry.get("shape", ()))
    if entry.get("dtype") != "f64":
        raise ManifestError(f"{where}: dtype {entry.get('dtype')!r} unsupported (only 'f64')")
    expected = _expected_shape(arr_name, n, h)
    if shape != expected:
        raise ManifestError(f"{where}: shape {list(shape)} does not match expected {list(expected)} for n={n}, h={h}")
    if ("path" in entry) == ("values" in entry):
        raise ManifestError(f"{where}: exactly one of 'path' and 'values' is required")
    if "path" in entry:
        fpath = os.path.join(path, entry["path"])
        if not os.path.isfile(fpath):
            raise ManifestError(f"{where}: referenced file '{entry['path']}' does not exist")
        with open(fpath, "rb") as f:
            raw = f.read()
        want = int(np.prod(shape, dtype=np.int64)) * 8
        if len(raw) != want:
            raise ManifestError(f"{where}: file '{entry['path']}' has {len(raw)} bytes, expected {want}")
        return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    values = np.asarray(entry["values"], dtype=np.float64)
    if values.size != int(np.prod(shape, dtype=np.int64)):
        raise ManifestError(f"{where}: {values.size} inline values do not fill shape {list(shape)}")
    return values.reshape(shape)


def load_model(path: str) -> ModelStack:
    """Read and validate a model directory; raises ManifestError for
    structural problems and ValidationError for invariant violations."""
    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise ManifestError(f"{path}: no manifest.json")
    manifest = load_json(manifest_path)
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ManifestError(f"{manifest_path}: format_version {version!r} unsupported (expected {FORMAT_VERSION!r})")
    layer_records = manifest.get("layers")
    if not isinstance(layer_records, list) or not layer_records:
        raise ManifestError(f"{manifest_path}: 'layers' must be a non-empty list")

    layers = []
    for rec in layer_records:
        name = rec.get("name")
        if not isinstance(name, str) or not name:
            raise ManifestError(f"{manifest_path}: layer record without a name")
        try:
            n, h = int(rec["n"]), int(rec["h"])
        except (KeyError, TypeError, ValueError):
            raise ManifestError(f"layer '{name}': integer fields n and h are required") from None
        arrays = rec.get("arrays")
        if not isinstance(arrays, dict):
            raise ManifestError(f"layer '{name}': 'arrays' map is required")
        for arr_name in _REQUIRED_ARRAYS:
            if arr_name not in arrays:
                raise ManifestError(f"layer '{name}': missing required array '{arr_name}'")
        for arr_name in arrays:
            if arr_name not in _REQUIRED_ARRAYS + _OPTIONAL_ARRAYS:
                raise ManifestError(f"layer '{name}': unknown array '{arr_name}'")

        def grab(arr_name: str) -> np.ndarray:
            return _read_array(path, name, arr_name, arrays[arr_name], n, h)

        lam = grab("lambda_re") + 1j * grab("lambda_im")
        B = grab("B_re") + 1j * grab("B_im")
        C = grab("C_re") + 1j * grab("C_im")
        C_bwd = None
        if ("C_bwd_re" in arrays) != ("C_bwd_im" in arrays):
            raise ManifestError(f"layer '{name}': C_bwd_re and C_bwd_im must come together")
        if "C_bwd_re" in arrays:
            C_bwd = grab("C_bwd_re") + 1j * grab("C_bwd_im")
        if bool(rec.get("bidirectional", C_bwd is not None)) != (C_bwd is not None):
            raise ManifestError(f"layer '{name}': bidirectional flag disagrees with C_bwd presence")
        delta = grab("delta") if "delta" in arrays else None
        D = None
        if ("D_re" in arrays) != ("D_im" in arrays):
            raise ManifestError(f"layer '{name}': D_re and D_im must come together")
        if "D_re" in arrays:
            D = grab("D_re") + 1j * grab("D_im")
        layers.append(DiagonalLayer(
            name=name, lam=lam, B=B, C=C, C_bwd=C_bwd, delta=delta,
            time_domain=rec.get("time_domain", "discrete"),
            conjugate_pairs=bool(rec.get("conjugate_pairs", False)),
            D=D,
        ))
    meta = manifest.get("meta", {})
    if not isinstance(meta, dict):
        raise ManifestError(f"{manifest_path}: 'meta' must be an object")
    stack = ModelStack(layers, format_version=version, meta=meta)
    check_stack(stack)
    return stack


def _f(x):
    return None if x is None else float(x)


def save_scores(table: ScoreTable, path: str) -> None:
    layers = []
    for ls in table.layers:
        n = ls.raw.shape[0]
        rank = np.empty(n, dtype=int)
        rank[ls.order] = np.arange(n)
        layers.append({
            "name": ls.name, "n": n, "conjugate_pairs": ls.conjugate_pairs,
            "modes": [
                {"index": i, "raw": float(ls.raw[i]), "score": float(ls.score[i]), "rank": int(rank[i])}
                for i in range(n)
            ],
        })
    write_json({
        "format_version": FORMAT_VERSION, "kind": "scores",
        "method": table.method, "policy": table.policy,
        "epsilon": table.epsilon, "seed": table.seed,
        "layers": layers,
    }, path)


def load_scores(path: str) -> ScoreTable:
    doc = load_json(path)
    if doc.get("kind") != "scores" or doc.get("format_version") != FORMAT_VERSION:
        raise ManifestError(f"{path}: not a version-{FORMAT_VERSION} scores file")
    layers = []
    for rec in doc.get("layers", []):
        name = rec.get("name", "?")
        modes = rec.get("modes")
        n = rec.get("n")
        if not isinstance(modes, list) or n != len(modes):
            raise ManifestError(f"{path}: layer '{name}': mode list does not match n")
        raw = np.empty(n)
        score = np.empty(n)
        order = np.full(n, -1, dtype=int)
        seen = np.zeros(n, dtype=bool)
        for m in modes:
            try:
                i, rk = int(m["index"]), int(m["rank"])
                raw_i, score_i = float(m["raw"]), float(m["score"])
            except (KeyError, TypeError, ValueError):
                raise ManifestError(f"{path}: layer '{name}': malformed mode record {m!r}") from None
            if not (0 <= i < n and 0 <= rk < n) or seen[i] or order[rk] != -1:
                raise ManifestError(f"{path}: layer '{name}': indices/ranks are not permutations of 0..{n - 1}")
            seen[i] = True
            raw[i], score[i] = raw_i, score_i
            order[rk] = i
        prefix = np.cumsum(raw[order]) if doc.get("policy") == "prefix" else np.empty(0)
        layers.append(LayerScores(name, raw, order, prefix, score,
                                  bool(rec.get("conjugate_pairs", False))))
    if not layers:
        raise ManifestError(f"{path}: scores file has no layers")
    return ScoreTable(doc.get("method"), doc.get("policy"), float(doc.get("epsilon", 1e-12)),
                      int(doc.get("seed", 0)), layers)


def save_decision(decision: PruneDecision, path: str) -> None:
    write_json({
        "format_version": FORMAT_VERSION, "kind": "decision",
        "method": decision.method, "policy": decision.policy,
        "requested_ratio": _f(decision.requested_ratio),
        "achieved_ratio": _f(decision.achieved_ratio),
        "tau": _f(decision.tau),
        "budget": decision.budget,
        "layer_floor": decision.layer_floor,
        "seed": decision.seed, "epsilon": decision.epsilon,
        "layers": [
            {"name": ld.name, "n": ld.n,
             "kept": [int(i) for i in ld.kept],
             "pruned": [int(i) for i in ld.pruned]}
            for ld in decision.layers
        ],
    }, path)


def load_decision(path: str) -> PruneDecision:
    doc = load_json(path)
    if doc.get("kind") != "decision" or doc.get("format_version") != FORMAT_VERSION:
        raise ManifestError(f"{path}: not a version-{FORMAT_VERSION} decision file")
    layers = []
    for rec in doc.get("layers", []):
        name = rec.get("name", "?")
        try:
            n = int(rec["n"])
            kept = np.asarray(sorted(int(i) for i in rec["kept"]), dtype=int)
            pruned = np.asarray(sorted(int(i) for i in rec["pruned"]), dtype=int)
        except (KeyError, TypeError, ValueError):
            raise ManifestError(f"{path}: layer '{name}': malformed decision record") from None
        both = np.concatenate([kept, pruned])
        if both.size != n or np.any(np.sort(both) != np.arange(n)):
            raise ManifestError(f"{path}: layer '{name}': kept and pruned must partition 0..{n - 1}")
        layers.append(LayerDecision(name, n, kept, pruned))
    if not layers:
        raise ManifestError(f"{path}: decision file has no layers")
    return PruneDecision(
        method=doc.get("method"), policy=doc.get("policy"),
        requested_ratio=doc.get("requested_ratio"),
        achieved_ratio=float(doc.get("achieved_ratio", 0.0)),
        tau=doc.get("tau"), budget=doc.get("budget"),
        layer_floor=doc.get("layer_floor"),
        seed=int(doc.get("seed", 0)), epsilon=float(doc.get("epsilon", 1e-12)),
        layers=layers,
    )


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def save_report(obj, path: str, kind: str) -> None:
    """Serialize a report dataclass (or list of them) as versioned JSON."""
    write_json({"format_version": FORMAT_VERSION, "kind": kind, "data": _jsonable(obj)}, path)

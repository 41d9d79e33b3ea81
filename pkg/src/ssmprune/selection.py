"""Keep/prune partitioning from score tables, and decision application.

Three policies are implemented. The global-prefix policy realizes the
budgeted threshold rule: concatenate every layer's prefix-normalized
scores, set the threshold tau to the B-th largest with budget
B = round(sum_l n_l * (1 - ratio)), and keep each layer's longest score
prefix at or above tau. Ties at tau are resolved deterministically by
(layer index, sorted position) so the budget is met exactly. The uniform
policy prunes the floor(ratio * n_l) lowest raw scores of each layer
independently; the global-raw policy keeps the top-B raw scores across
layers with ties broken by (layer index, original index).

Selection counts are in stored-mode units: for conjugate-pair layers one
unit is one pair. Such layers keep at least one pair by default (an
explicit layer_floor overrides, 0 re-enabling full deletion); floors can
push the kept total above the budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .model import DiagonalLayer, ModelStack
from .scores import ScoreTable


@dataclass(frozen=True)
class LayerDecision:
    """Kept and pruned original mode indices of one layer, both ascending."""

    name: str
    n: int
    kept: np.ndarray
    pruned: np.ndarray


@dataclass(frozen=True)
class PruneDecision:
    method: str
    policy: str  # uniform_ratio | global_raw | global_prefix
    requested_ratio: float | None
    achieved_ratio: float
    tau: float | None
    budget: int | None
    layer_floor: int | None
    seed: int
    epsilon: float
    layers: list[LayerDecision]

    def layer(self, name: str) -> LayerDecision:
        for ld in self.layers:
            if ld.name == name:
                return ld
        raise KeyError(name)


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _check_ratio(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"ratio = {p} outside [0, 1]")
    return p


def _effective_floors(table: ScoreTable, layer_floor: int | None) -> np.ndarray:
    if layer_floor is not None:
        if layer_floor not in (0, 1):
            raise ValidationError(f"layer_floor = {layer_floor} not in {{0, 1}}")
        return np.full(len(table.layers), int(layer_floor))
    # pair layers must not vanish unless explicitly allowed
    return np.array([1 if ls.conjugate_pairs else 0 for ls in table.layers])


def _decision_from_counts(table: ScoreTable, kept_counts: np.ndarray, policy: str,
                          requested_ratio, tau, budget, layer_floor) -> PruneDecision:
    layers = []
    total = 0
    kept_total = 0
    for ls, k in zip(table.layers, kept_counts):
        n = ls.raw.shape[0]
        kept = np.sort(ls.order[: int(k)])
        pruned = np.sort(ls.order[int(k):])
        layers.append(LayerDecision(ls.name, n, kept, pruned))
        total += n
        kept_total += int(k)
    achieved = 1.0 - kept_total / total if total else 0.0
    return PruneDecision(
        method=table.method, policy=policy,
        requested_ratio=requested_ratio, achieved_ratio=achieved,
        tau=tau, budget=budget, layer_floor=layer_floor,
        seed=table.seed, epsilon=table.epsilon, layers=layers,
    )


def _global_select(table: ScoreTable, flat_key: str, ratio=None, threshold=None,
                   layer_floor=None, policy_name: str = "global_prefix") -> PruneDecision:
    if not table.layers:
        raise ValidationError("score table has no layers")
    if (ratio is None) == (threshold is None):
        raise ValidationError("exactly one of ratio and threshold is required")

    sizes = np.array([ls.raw.shape[0] for ls in table.layers])
    total = int(sizes.sum())
    scores = []
    layer_ids = []
    tiebreak = []
    for li, ls in enumerate(table.layers):
        if flat_key == "sorted":
            scores.append(ls.score[ls.order])  # descending per layer
            tiebreak.append(np.arange(ls.raw.shape[0]))  # sorted position
        else:
            scores.append(ls.raw[ls.order])
            tiebreak.append(ls.order)  # original index
        layer_ids.append(np.full(ls.raw.shape[0], li))
    scores = np.concatenate(scores)
    layer_ids = np.concatenate(layer_ids)
    tiebreak = np.concatenate(tiebreak)

    # primary: score descending; then layer, then position/index ascending
    rank = np.lexsort((tiebreak, layer_ids, -scores))

    if ratio is not None:
        p = _check_ratio(ratio)
        budget = round_half_up(total * (1.0 - p))
        kept_flat = rank[:budget]
        tau = float(scores[rank[budget - 1]]) if budget > 0 else None
    else:
        tau = float(threshold)
        mask = scores >= tau
        kept_flat = rank[mask[rank]]
        budget = None

    kept_counts = np.bincount(layer_ids[kept_flat], minlength=len(table.layers))
    floors = _effective_floors(table, layer_floor)
    kept_counts = np.maximum(kept_counts, np.minimum(floors, sizes))
    return _decision_from_counts(
        table, kept_counts, policy_name,
        None if ratio is None else float(ratio), tau, budget, layer_floor,
    )


def select_global_prefix(table: ScoreTable, ratio=None, threshold=None,
                         layer_floor: int | None = None) -> PruneDecision:
    """Budgeted global threshold on prefix-normalized scores."""
    if table.policy != "prefix":
        raise ValidationError(f"select_global_prefix needs a prefix score table, got policy '{table.policy}'")
    return _global_select(table, "sorted", ratio, threshold, layer_floor, "global_prefix")


def select_global_raw(table: ScoreTable, ratio: float, layer_floor: int | None = None) -> PruneDecision:
    """Keep the global top-B raw scores across all layers."""
    if table.policy == "prefix":
        raise ValidationError("select_global_raw ranks raw scores; use a uniform/global score table")
    return _global_select(table, "raw", ratio, None, layer_floor, "global_raw")


def select_uniform_ratio(table: ScoreTable, ratio: float, layer_floor: int | None = None) -> PruneDecision:
    """Prune each layer's floor(ratio * n) lowest raw scores independently."""
    p = _check_ratio(ratio)
    if not table.layers:
        raise ValidationError("score table has no layers")
    sizes = np.array([ls.raw.shape[0] for ls in table.layers])
    kept_counts = sizes - np.floor(p * sizes).astype(int)
    floors = _effective_floors(table, layer_floor)
    kept_counts = np.maximum(kept_counts, np.minimum(floors, sizes))
    return _decision_from_counts(table, kept_counts, "uniform_ratio", p, None, None, layer_floor)


def _match_layers(decision: PruneDecision, stack: ModelStack) -> list[tuple[DiagonalLayer, LayerDecision]]:
    by_name = {ld.name: ld for ld in decision.layers}
    if len(by_name) != len(decision.layers):
        raise ValidationError("decision has duplicate layer names")
    pairs = []
    for layer in stack.layers:
        if layer.name not in by_name:
            raise ValidationError(f"decision has no entry for layer '{layer.name}'")
        ld = by_name[layer.name]
        if ld.n != layer.n:
            raise ValidationError(f"layer '{layer.name}': decision recorded n = {ld.n}, stack has n = {layer.n}")
        pairs.append((layer, ld))
    extra = set(by_name) - {l.name for l in stack.layers}
    if extra:
        raise ValidationError(f"decision references unknown layers: {sorted(extra)}")
    return pairs


def materialize(decision: PruneDecision, stack: ModelStack) -> ModelStack:
    """Apply a decision: drop pruned modes, omit fully pruned layers."""
    layers = []
    for layer, ld in _match_layers(decision, stack):
        if ld.kept.size == 0:
            continue
        layers.append(layer.take(ld.kept))
    return stack.replace(layers=layers)


def mask(decision: PruneDecision, stack: ModelStack) -> ModelStack:
    """Zero pruned modes' B rows and C columns without changing shapes."""
    layers = []
    for layer, ld in _match_layers(decision, stack):
        B = layer.B.copy()
        C = layer.C.copy()
        B[ld.pruned, :] = 0.0
        C[:, ld.pruned] = 0.0
        C_bwd = None
        if layer.C_bwd is not None:
            C_bwd = layer.C_bwd.copy()
            C_bwd[:, ld.pruned] = 0.0
        layers.append(layer.replace(B=B, C=C, C_bwd=C_bwd))
    return stack.replace(layers=layers)

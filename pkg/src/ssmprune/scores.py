"""Mode-importance scores and their per-layer prefix normalization.

Five score families are supported, each usable under one or more
selection policies:

==========  =========================================  ==================
family      raw statistic per mode                     policies
==========  =========================================  ==================
random      seeded uniform draw in (0, 1)              uniform, global
magnitude   |lam| ||B row|| ||C col||                  uniform, global
lamp        magnitude squared                          prefix only
hinf        ||C col||^2 ||B row||^2 / (1 - |lam|)^2    uniform, global
aire        asymptotic mode energy                     prefix (default),
                                                       uniform, global
==========  =========================================  ==================

"last" is accepted as an alias for hinf under the prefix policy. The
prefix policy sorts a layer's raw statistics descending and divides each
by its inclusive running sum plus epsilon, yielding a scale-invariant,
non-increasing score sequence per layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import asymptotic_energies, coupling_norms, _refuse_near_unit, _require_discrete
from .exceptions import ValidationError
from .model import DiagonalLayer, ModelStack

METHODS = ("random", "magnitude", "lamp", "hinf", "last", "aire")
POLICIES = ("uniform", "global", "prefix")

# policy used when the caller does not pick one
DEFAULT_POLICY = {
    "random": "uniform",
    "magnitude": "uniform",
    "hinf": "uniform",
    "lamp": "prefix",
    "last": "prefix",
    "aire": "prefix",
}
# policies each family supports
ALLOWED_POLICIES = {
    "random": ("uniform", "global"),
    "magnitude": ("uniform", "global"),
    "hinf": ("uniform", "global"),
    "lamp": ("prefix",),
    "last": ("prefix",),
    "aire": ("uniform", "global", "prefix"),
}


@dataclass(frozen=True)
class LayerScores:
    """Scores of one layer, all arrays indexed consistently.

    raw and score are in original mode order; order is the descending
    stable sort permutation of raw (ties keep lower original index
    first); prefix holds the inclusive running sums of raw along that
    sorted order (empty for non-prefix policies).
    """

    name: str
    raw: np.ndarray
    order: np.ndarray
    prefix: np.ndarray
    score: np.ndarray
    conjugate_pairs: bool = False


@dataclass(frozen=True)
class ScoreTable:
    method: str
    policy: str
    epsilon: float
    seed: int
    layers: list[LayerScores]

    def layer(self, name: str) -> LayerScores:
        for ls in self.layers:
            if ls.name == name:
                return ls
        raise KeyError(name)


def descending_order(raw: np.ndarray) -> np.ndarray:
    """Stable descending sort permutation; equal values keep index order."""
    return np.argsort(-raw, kind="stable")


def prefix_normalize(raw: np.ndarray, epsilon: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Prefix-normalized scores.

    Returns (score, order, prefix): order sorts raw descending, prefix is
    the inclusive cumulative sum along the sorted order, and score (in
    original index order) is raw sorted value / (running sum + epsilon).
    """
    order = descending_order(raw)
    sorted_raw = raw[order]
    prefix = np.cumsum(sorted_raw)
    normalized = sorted_raw / (prefix + epsilon)
    score = np.empty_like(raw)
    score[order] = normalized
    return score, order, prefix


def magnitude_scores(layer: DiagonalLayer) -> np.ndarray:
    """|lam_i| ||B row|| ||C col|| per mode (bidirectional C norms averaged)."""
    c2, b2 = coupling_norms(layer)
    return np.abs(layer.lam) * np.sqrt(c2 * b2)


def magnitude_score(layer: DiagonalLayer, i: int) -> float:
    return float(magnitude_scores(layer)[i])


def hinf_scores(layer: DiagonalLayer) -> np.ndarray:
    """Squared worst-case gain proxy ||C col||^2 ||B row||^2 / (1 - |lam|)^2."""
    r = np.abs(layer.lam)
    _refuse_near_unit(layer, r)
    c2, b2 = coupling_norms(layer)
    return c2 * b2 / (1.0 - r) ** 2


def hinf_score(layer: DiagonalLayer, i: int) -> float:
    return float(hinf_scores(layer)[i])


def lamp_score(layer: DiagonalLayer, epsilon: float = 1e-12) -> np.ndarray:
    """Prefix-normalized squared magnitude scores, in original mode order."""
    score, _, _ = prefix_normalize(magnitude_scores(layer) ** 2, epsilon)
    return score


def last_score(layer: DiagonalLayer, epsilon: float = 1e-12) -> np.ndarray:
    """Prefix-normalized worst-case-gain scores, in original mode order."""
    score, _, _ = prefix_normalize(hinf_scores(layer), epsilon)
    return score


def random_scores(n: int, seed: int, layer_index: int = 0) -> np.ndarray:
    """Seed-deterministic scores in (0, 1); layers get decorrelated streams."""
    rng = np.random.default_rng([seed, layer_index])
    return rng.uniform(np.finfo(np.float64).tiny, 1.0, size=n)


def random_score(layer: DiagonalLayer, seed: int) -> np.ndarray:
    return random_scores(layer.n, seed)


def _raw_scores(layer: DiagonalLayer, method: str, seed: int, layer_index: int) -> np.ndarray:
    if method == "random":
        return random_scores(layer.n, seed, layer_index)
    if method == "magnitude":
        return magnitude_scores(layer)
    if method == "lamp":
        return magnitude_scores(layer) ** 2
    if method in ("hinf", "last"):
        return hinf_scores(layer)
    if method == "aire":
        return asymptotic_energies(layer)
    raise ValidationError(f"method {method!r} not in {METHODS}")


def resolve_policy(method: str, policy: str | None) -> str:
    if method not in METHODS:
        raise ValidationError(f"method {method!r} not in {METHODS}")
    if policy is None:
        return DEFAULT_POLICY[method]
    if policy not in POLICIES:
        raise ValidationError(f"policy {policy!r} not in {POLICIES}")
    if policy not in ALLOWED_POLICIES[method]:
        raise ValidationError(
            f"method '{method}' does not support policy '{policy}' "
            f"(allowed: {', '.join(ALLOWED_POLICIES[method])})"
        )
    return policy


def score_table(stack: ModelStack, method: str = "aire", policy: str | None = None,
                epsilon: float = 1e-12, seed: int = 0) -> ScoreTable:
    """Score every layer of a stack under one method and policy.

    For the prefix policy, score holds the prefix-normalized values; for
    uniform and global it repeats raw (selection then ranks raws
    directly).
    """
    policy = resolve_policy(method, policy)
    if epsilon <= 0:
        raise ValidationError(f"epsilon = {epsilon} must be > 0")
    rows: list[LayerScores] = []
    for li, layer in enumerate(stack.layers):
        _require_discrete(layer, "score_table")
        raw = np.asarray(_raw_scores(layer, method, seed, li), dtype=np.float64)
        if policy == "prefix":
            score, order, prefix = prefix_normalize(raw, epsilon)
        else:
            order = descending_order(raw)
            prefix = np.empty(0)
            score = raw.copy()
        rows.append(LayerScores(layer.name, raw, order, prefix, score, layer.conjugate_pairs))
    return ScoreTable(method, policy, float(epsilon), int(seed), rows)


def aire_score_table(stack: ModelStack, epsilon: float = 1e-12) -> ScoreTable:
    """Energy scores under the prefix policy (the recommended default)."""
    return score_table(stack, method="aire", policy="prefix", epsilon=epsilon)

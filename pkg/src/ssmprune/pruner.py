"""Estimator-style facade over the score/select/materialize pipeline."""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .exceptions import ValidationError
from .model import ModelStack, check_stack, discretize_stack
from .scores import resolve_policy, score_table
from .selection import materialize, select_global_prefix, select_global_raw, select_uniform_ratio


class StatePruner(TransformerMixin, BaseEstimator):
    """Prune low-importance modes from a diagonal state-space stack.

    fit(stack) validates the model, discretizes continuous layers for
    scoring, computes the score table, and freezes a keep/prune
    decision. transform(stack) applies that decision, so the reduced
    model keeps whatever parameterization (continuous or discrete) the
    input stack carries.

    Parameters
    ----------
    method : str
        One of random, magnitude, lamp, hinf, last, aire.
    policy : str or None
        uniform, global, or prefix; None picks the method's default
        (prefix for aire/last/lamp, uniform otherwise).
    ratio : float
        Requested pruned fraction in [0, 1]; ignored when threshold is
        given.
    threshold : float or None
        Explicit score threshold; prefix policy only.
    epsilon : float
        Prefix-normalization regularizer.
    seed : int
        Seed for the random method.
    layer_floor : int or None
        Minimum kept modes per layer (0 or 1); None keeps the default of
        one pair for conjugate-pair layers and no floor otherwise.

    Attributes
    ----------
    score_table_ : ScoreTable
    decision_ : PruneDecision
    """

    def __init__(self, method="aire", policy=None, ratio=0.5, threshold=None,
                 epsilon=1e-12, seed=0, layer_floor=None):
        self.method = method
        self.policy = policy
        self.ratio = ratio
        self.threshold = threshold
        self.epsilon = epsilon
        self.seed = seed
        self.layer_floor = layer_floor

    def fit(self, X: ModelStack, y=None):
        stack = check_stack(X)
        work = discretize_stack(stack)
        policy = resolve_policy(self.method, self.policy)
        table = score_table(work, self.method, policy, self.epsilon, self.seed)
        if self.threshold is not None:
            if policy != "prefix":
                raise ValidationError("threshold selection needs the prefix policy")
            decision = select_global_prefix(table, threshold=self.threshold, layer_floor=self.layer_floor)
        elif policy == "prefix":
            decision = select_global_prefix(table, ratio=self.ratio, layer_floor=self.layer_floor)
        elif policy == "global":
            decision = select_global_raw(table, self.ratio, layer_floor=self.layer_floor)
        else:
            decision = select_uniform_ratio(table, self.ratio, layer_floor=self.layer_floor)
        self.score_table_ = table
        self.decision_ = decision
        return self

    def transform(self, X: ModelStack) -> ModelStack:
        if not hasattr(self, "decision_"):
            raise NotFittedError("StatePruner.transform called before fit")
        return materialize(self.decision_, check_stack(X))

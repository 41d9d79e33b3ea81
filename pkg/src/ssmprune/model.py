"""Diagonal state-space layers: data model, validation, ZOH discretization.

A layer is the modal form x_{k+1} = diag(lam) x_k + B u_k, y_k = C x_k.
Mode i is the triplet (lam[i], B[i, :], C[:, i]). An optional feedthrough
D is carried for round-trip fidelity but ignored by every response and
scoring operation (the scored system has no direct term).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError

# Strict-stability margin: poles with |lam| >= 1 - POLE_MARGIN are refused
# by scoring paths because 1 - |lam|^2 underflows relative accuracy there.
POLE_MARGIN = 1e-12

# Below this |lam * delta| the ZOH input scaling branches to its limit.
ZOH_ZERO_GUARD = 1e-12


def _as_complex(x, name: str) -> np.ndarray:
    try:
        return np.asarray(x, dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: not coercible to complex128: {exc}") from exc


@dataclass(frozen=True)
class DiagonalLayer:
    """One diagonal LTI layer.

    Parameters
    ----------
    name : str
        Identifier, unique within a stack. Used in diagnostics and as the
        file-name prefix of the layer's parameter arrays on disk.
    lam : (n,) complex ndarray
        Poles. Discrete layers need |lam| < 1, continuous ones Re(lam) < 0.
    B : (n, h) complex ndarray
        Input coupling; row i belongs to mode i.
    C : (h, n) complex ndarray
        Output coupling; column i belongs to mode i.
    C_bwd : (h, n) complex ndarray, optional
        Second output map for bidirectional layers (backward scan).
    delta : (n,) float ndarray, optional
        Per-mode step sizes. Present exactly when time_domain is
        "continuous".
    time_domain : {"discrete", "continuous"}
    conjugate_pairs : bool
        When True each stored mode stands for itself plus its complex
        conjugate (with conjugated couplings); stored poles must then lie
        strictly in the upper half plane.
    D : (h, h) complex ndarray, optional
        Feedthrough, carried but never scored.
    """

    name: str
    lam: np.ndarray
    B: np.ndarray
    C: np.ndarray
    C_bwd: np.ndarray | None = None
    delta: np.ndarray | None = None
    time_domain: str = "discrete"
    conjugate_pairs: bool = False
    D: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "lam", np.atleast_1d(_as_complex(self.lam, "lam")))
        object.__setattr__(self, "B", np.atleast_2d(_as_complex(self.B, "B")))
        object.__setattr__(self, "C", np.atleast_2d(_as_complex(self.C, "C")))
        if self.C_bwd is not None:
            object.__setattr__(self, "C_bwd", np.atleast_2d(_as_complex(self.C_bwd, "C_bwd")))
        if self.delta is not None:
            object.__setattr__(self, "delta", np.atleast_1d(np.asarray(self.delta, dtype=np.float64)))
        if self.D is not None:
            object.__setattr__(self, "D", np.atleast_2d(_as_complex(self.D, "D")))

    @property
    def n(self) -> int:
        """Stored mode count (pairs count once)."""
        return self.lam.shape[0]

    @property
    def h(self) -> int:
        """Channel count."""
        return self.C.shape[0]

    @property
    def bidirectional(self) -> bool:
        return self.C_bwd is not None

    def replace(self, **changes) -> "DiagonalLayer":
        return dataclasses.replace(self, **changes)

    def take(self, indices) -> "DiagonalLayer":
        """Sub-layer restricted to the given mode indices (original order kept)."""
        idx = np.asarray(indices, dtype=np.intp)
        return self.replace(
            lam=self.lam[idx],
            B=self.B[idx, :],
            C=self.C[:, idx],
            C_bwd=None if self.C_bwd is None else self.C_bwd[:, idx],
            delta=None if self.delta is None else self.delta[idx],
        )


@dataclass(frozen=True)
class ModelStack:
    """Ordered list of layers with unique names."""

    layers: list[DiagonalLayer]
    format_version: str = "1"
    meta: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def __getitem__(self, i):
        return self.layers[i]

    def layer(self, name: str) -> DiagonalLayer:
        for lay in self.layers:
            if lay.name == name:
                return lay
        raise KeyError(name)

    def total_modes(self) -> int:
        return sum(lay.n for lay in self.layers)

    def replace(self, **changes) -> "ModelStack":
        return dataclasses.replace(self, **changes)


def _finite_violations(name: str, arr: np.ndarray) -> list[str]:
    out = []
    bad = ~np.isfinite(arr)
    if arr.ndim == 1:
        for (i,) in zip(*np.nonzero(bad)):
            out.append(f"{name}[{i}]: non-finite value {arr[i]}")
    else:
        for i, j in zip(*np.nonzero(bad)):
            out.append(f"{name}[{i},{j}]: non-finite value {arr[i, j]}")
    return out


def validate_layer(layer: DiagonalLayer) -> list[str]:
    """Collect invariant violations; empty list means the layer is valid.

    Every message names the offending field, the index, and the violated
    bound, so callers can surface it verbatim.
    """
    v: list[str] = []
    n = layer.n
    if n == 0:
        v.append("n: layer has 0 modes; at least 1 required")
    if layer.time_domain not in ("discrete", "continuous"):
        v.append(f"time_domain: {layer.time_domain!r} not in {{discrete, continuous}}")
        return v

    if layer.lam.ndim != 1:
        v.append(f"lam: expected 1-d array, got shape {layer.lam.shape}")
        return v
    if layer.B.ndim != 2 or layer.B.shape[0] != n:
        v.append(f"B: expected shape ({n}, h), got {layer.B.shape}")
        return v
    h = layer.B.shape[1]
    if h == 0:
        v.append("h: layer has 0 channels; at least 1 required")
        return v
    if layer.C.shape != (h, n):
        v.append(f"C: expected shape ({h}, {n}), got {layer.C.shape}")
        return v
    if layer.C_bwd is not None and layer.C_bwd.shape != (h, n):
        v.append(f"C_bwd: expected shape ({h}, {n}), got {layer.C_bwd.shape}")
    if layer.D is not None and layer.D.shape != (h, h):
        v.append(f"D: expected shape ({h}, {h}), got {layer.D.shape}")

    for nm, arr in (("lam", layer.lam), ("B", layer.B), ("C", layer.C)):
        v.extend(_finite_violations(nm, arr))
    if layer.C_bwd is not None:
        v.extend(_finite_violations("C_bwd", layer.C_bwd))
    if layer.D is not None:
        v.extend(_finite_violations("D", layer.D))

    # delta present iff continuous
    if layer.time_domain == "continuous":
        if layer.delta is None:
            v.append("delta: required for continuous time_domain, missing")
        else:
            if layer.delta.shape != (n,):
                v.append(f"delta: expected shape ({n},), got {layer.delta.shape}")
            else:
                v.extend(_finite_violations("delta", layer.delta))
                for i in np.nonzero(layer.delta <= 0)[0]:
                    v.append(f"delta[{i}]: {layer.delta[i]} <= 0; step sizes must be positive")
    elif layer.delta is not None:
        v.append("delta: present on a discrete layer; allowed only for continuous time_domain")

    lam_ok = np.isfinite(layer.lam)
    if layer.time_domain == "discrete":
        mags = np.abs(layer.lam)
        for i in np.nonzero(lam_ok & (mags >= 1.0))[0]:
            v.append(f"lam: pole magnitude >= 1 at index {i} (|lam| = {mags[i]:.17g}; strict stability requires |lam| < 1)")
    else:
        re = layer.lam.real
        for i in np.nonzero(lam_ok & (re >= 0.0))[0]:
            v.append(f"lam: Re(lam) >= 0 at index {i} (Re = {re[i]:.17g}; Hurwitz requires Re(lam) < 0)")

    if layer.conjugate_pairs:
        im = layer.lam.imag
        for i in np.nonzero(lam_ok & (im <= 0.0))[0]:
            v.append(f"lam: Im(lam) <= 0 at index {i} (Im = {im[i]:.17g}; pair storage keeps the upper-half-plane member)")
    return v


def check_layer(layer: DiagonalLayer) -> DiagonalLayer:
    """Raise ValidationError listing all violations; return the layer if clean."""
    v = validate_layer(layer)
    if v:
        msgs = "; ".join(f"layer '{layer.name}': {m}" for m in v)
        raise ValidationError(msgs)
    return layer


def validate_stack(stack: ModelStack) -> list[str]:
    v: list[str] = []
    if stack.L < 1:
        v.append("layers: stack is empty; at least 1 layer required")
    seen: set[str] = set()
    for lay in stack.layers:
        if lay.name in seen:
            v.append(f"layers: duplicate layer name '{lay.name}'")
        seen.add(lay.name)
        v.extend(f"layer '{lay.name}': {m}" for m in validate_layer(lay))
    return v


def check_stack(stack: ModelStack) -> ModelStack:
    v = validate_stack(stack)
    if v:
        raise ValidationError("; ".join(v))
    return stack


def discretize_zoh(layer: DiagonalLayer) -> DiagonalLayer:
    """Zero-order-hold discretization of a continuous layer.

    Pole i maps to exp(lam_i * delta_i) and row i of B is scaled by
    (exp(lam_i delta_i) - 1) / lam_i, which extends continuously to
    delta_i as lam_i -> 0. C, C_bwd, and D pass through unchanged.
    """
    if layer.time_domain != "continuous":
        raise ValidationError(f"layer '{layer.name}': discretize_zoh requires time_domain == 'continuous'")
    check_layer(layer)
    lam, delta = layer.lam, layer.delta
    lam_d = np.exp(lam * delta)
    scale = np.empty_like(lam_d)
    small = np.abs(lam * delta) < ZOH_ZERO_GUARD
    # (e^{lam d} - 1)/lam cancels catastrophically near lam = 0
    scale[small] = delta[small]
    scale[~small] = (lam_d[~small] - 1.0) / lam[~small]
    return layer.replace(lam=lam_d, B=layer.B * scale[:, None], delta=None, time_domain="discrete")


def discretize_stack(stack: ModelStack) -> ModelStack:
    layers = [discretize_zoh(l) if l.time_domain == "continuous" else l for l in stack.layers]
    return stack.replace(layers=layers)


def expand_conjugate_pairs(layer: DiagonalLayer) -> DiagonalLayer:
    """Materialize both members of each stored pair; result has 2n plain modes."""
    if not layer.conjugate_pairs:
        return layer
    return layer.replace(
        lam=np.concatenate([layer.lam, np.conj(layer.lam)]),
        B=np.concatenate([layer.B, np.conj(layer.B)], axis=0),
        C=np.concatenate([layer.C, np.conj(layer.C)], axis=1),
        C_bwd=None if layer.C_bwd is None else np.concatenate([layer.C_bwd, np.conj(layer.C_bwd)], axis=1),
        delta=None if layer.delta is None else np.concatenate([layer.delta, layer.delta]),
        conjugate_pairs=False,
    )

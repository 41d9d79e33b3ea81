"""Deterministic synthetic model generation for tests and demos."""

from __future__ import annotations

import numpy as np

from .exceptions import ValidationError
from .model import DiagonalLayer, ModelStack, check_stack


def synth(seed: int, layers: int = 4, modes=16, channels: int = 4,
          radius=(0.5, 0.99), structure: str = "mimo", *,
          time_domain: str = "discrete", bidirectional: bool = False,
          conjugate_pairs: bool = False, gain_spread: float = 1.0,
          delta_range=(1e-3, 1e-1)) -> ModelStack:
    """Build a stable random stack, identical for identical arguments.

    Parameters
    ----------
    seed : int
        Generator seed; the whole model is a pure function of the
        argument list.
    layers : int
        Layer count.
    modes : int or sequence of int
        Stored modes per layer (a single int applies to every layer).
    channels : int
        Channel count h, shared by all layers.
    radius : (float, float)
        Pole magnitudes are drawn uniformly from this range, which must
        sit inside [0, 1) (and exclude 0 for continuous output).
    structure : {"mimo", "multi_siso"}
        mimo draws dense couplings; multi_siso gives mode i support only
        on channel i (requires modes <= channels), making modal and exact
        layer energies coincide. multi_siso cannot be combined with
        conjugate_pairs: the unstored pair member would share its twin's
        channel and reintroduce cross terms.
    time_domain : {"discrete", "continuous"}
        Continuous output draws per-mode step sizes log-uniformly from
        delta_range and places poles so that ZOH discretization lands on
        the sampled radius/angle exactly.
    bidirectional : bool
        Draw a second output map C_bwd.
    conjugate_pairs : bool
        Store upper-half-plane pair representatives.
    gain_spread : float
        Log-normal sigma of per-mode coupling scales; raise it (2 or
        more) for heavy-tailed energy profiles.
    """
    lo, hi = float(radius[0]), float(radius[1])
    if not (0.0 <= lo <= hi < 1.0):
        raise ValidationError(f"radius range ({lo}, {hi}) must satisfy 0 <= lo <= hi < 1")
    if structure not in ("mimo", "multi_siso"):
        raise ValidationError(f"structure {structure!r} not in {{'mimo', 'multi_siso'}}")
    if structure == "multi_siso" and conjugate_pairs:
        raise ValidationError("multi_siso cannot guarantee disjoint supports with conjugate_pairs")
    if time_domain not in ("discrete", "continuous"):
        raise ValidationError(f"time_domain {time_domain!r} not in {{'discrete', 'continuous'}}")
    if time_domain == "continuous" and lo <= 0.0:
        raise ValidationError("continuous output needs radius lower bound > 0")
    if layers < 1:
        raise ValidationError(f"layers = {layers} < 1")
    sizes = [int(modes)] * layers if np.isscalar(modes) else [int(m) for m in modes]
    if len(sizes) != layers:
        raise ValidationError(f"modes list has {len(sizes)} entries for {layers} layers")
    h = int(channels)

    rng = np.random.default_rng(seed)
    out = []
    for li, n in enumerate(sizes):
        if n < 1:
            raise ValidationError(f"layer {li}: modes = {n} < 1")
        if structure == "multi_siso" and n > h:
            raise ValidationError(f"layer {li}: multi_siso needs modes <= channels, got {n} > {h}")
        r = rng.uniform(lo, hi, n)
        if conjugate_pairs:
            theta = rng.uniform(0.05, np.pi - 0.05, n)
        else:
            theta = rng.uniform(-np.pi, np.pi, n)
        scale = rng.lognormal(0.0, gain_spread, n) if gain_spread > 0 else np.ones(n)

        def couple(shape_rows, shape_cols):
            return (rng.standard_normal((shape_rows, shape_cols))
                    + 1j * rng.standard_normal((shape_rows, shape_cols))) / np.sqrt(2.0)

        if structure == "mimo":
            B = couple(n, h) * np.sqrt(scale)[:, None]
            C = couple(h, n) * np.sqrt(scale)[None, :]
            C_bwd = couple(h, n) * np.sqrt(scale)[None, :] if bidirectional else None
        else:
            B = np.zeros((n, h), dtype=np.complex128)
            C = np.zeros((h, n), dtype=np.complex128)
            B[np.arange(n), np.arange(n)] = couple(n, 1)[:, 0] * np.sqrt(scale)
            C[np.arange(n), np.arange(n)] = couple(n, 1)[:, 0] * np.sqrt(scale)
            C_bwd = None
            if bidirectional:
                C_bwd = np.zeros((h, n), dtype=np.complex128)
                C_bwd[np.arange(n), np.arange(n)] = couple(n, 1)[:, 0] * np.sqrt(scale)

        if time_domain == "continuous":
            delta = np.exp(rng.uniform(np.log(delta_range[0]), np.log(delta_range[1]), n))
            lam = (np.log(r) + 1j * theta) / delta
        else:
            delta = None
            lam = r * np.exp(1j * theta)

        out.append(DiagonalLayer(
            name=f"layer{li:02d}", lam=lam, B=B, C=C, C_bwd=C_bwd, delta=delta,
            time_domain=time_domain, conjugate_pairs=conjugate_pairs,
        ))
    stack = ModelStack(out, meta={"synth": {
        "seed": int(seed), "layers": int(layers), "modes": sizes, "channels": h,
        "radius": [lo, hi], "structure": structure, "time_domain": time_domain,
        "bidirectional": bool(bidirectional), "conjugate_pairs": bool(conjugate_pairs),
        "gain_spread": float(gain_spread),
    }})
    return check_stack(stack)

"""Impulse and frequency responses, simulation, and convolution.

All operations act on discrete-time layers and treat the backward output
map of bidirectional layers through a direction selector: forward uses C,
backward uses C_bwd on the time-reversed scan. The anti-causal branch
evaluates the transfer function at the conjugate frequency; on the
symmetric grids used here the two conventions sweep the same value set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .model import DiagonalLayer, expand_conjugate_pairs


@dataclass(frozen=True)
class ImpulseSlice:
    """Lag-t impulse response matrix H_t = C diag(lam)^t B."""

    t: int
    H: np.ndarray


def _output_map(layer: DiagonalLayer, direction: str) -> np.ndarray:
    if direction == "fwd":
        return layer.C
    if direction == "bwd":
        if layer.C_bwd is None:
            raise ValidationError(f"layer '{layer.name}': direction 'bwd' needs C_bwd")
        return layer.C_bwd
    raise ValidationError(f"direction {direction!r} not in {{'fwd', 'bwd'}}")


def _require_discrete(layer: DiagonalLayer, op: str) -> None:
    if layer.time_domain != "discrete":
        raise ValidationError(f"layer '{layer.name}': {op} requires a discrete layer (discretize first)")


def impulse_array(layer: DiagonalLayer, T: int, direction: str = "fwd") -> np.ndarray:
    """Stacked impulse response, shape (T, h, h): out[t] = C diag(lam)^t B."""
    _require_discrete(layer, "impulse_array")
    if T < 1:
        raise ValidationError(f"T = {T} < 1")
    lay = expand_conjugate_pairs(layer)
    C = _output_map(lay, direction)
    if lay.n == 0:
        return np.zeros((T, layer.h, layer.h), dtype=np.complex128)
    # powers[t, i] = lam_i^t; 0^0 = 1 by convention
    powers = lay.lam[None, :] ** np.arange(T)[:, None]
    return np.einsum("ti,hi,im->thm", powers, C, lay.B)


def impulse_response(layer: DiagonalLayer, T: int, direction: str = "fwd") -> list[ImpulseSlice]:
    """Impulse response as lag-indexed slices (see impulse_array for the stacked form)."""
    H = impulse_array(layer, T, direction)
    return [ImpulseSlice(t, H[t]) for t in range(T)]


def frequency_response(layer: DiagonalLayer, omegas, direction: str = "fwd") -> np.ndarray:
    """Transfer matrices on a frequency grid, shape (len(omegas), h, h).

    Forward evaluates sum_i C[:, i] B[i, :] / (1 - lam_i e^{-j w}); the
    backward map uses e^{+j w} in the denominator (anti-causal scan).
    """
    _require_discrete(layer, "frequency_response")
    omegas = np.atleast_1d(np.asarray(omegas, dtype=np.float64))
    lay = expand_conjugate_pairs(layer)
    C = _output_map(lay, direction)
    if lay.n == 0:
        return np.zeros((omegas.size, layer.h, layer.h), dtype=np.complex128)
    sign = -1.0 if direction == "fwd" else 1.0
    z = np.exp(sign * 1j * omegas)
    gains = 1.0 / (1.0 - lay.lam[None, :] * z[:, None])  # (W, n)
    return np.einsum("hi,im,wi->whm", C, lay.B, gains)


def simulate(layer: DiagonalLayer, u, x0=None, direction: str = "fwd") -> np.ndarray:
    """Run the state recursion on an input sequence, returning (T, h) outputs.

    The canonical read-then-update convention is used: y_k = C x_k, then
    x_{k+1} = diag(lam) x_k + B u_k. A unit impulse therefore appears in
    the output one step late relative to the lag-indexed impulse response;
    convolve() exposes the aligned convention.

    direction "bwd" scans the reversed sequence through C_bwd and reverses
    the result, matching the backward branch of a bidirectional layer.
    """
    _require_discrete(layer, "simulate")
    lay = expand_conjugate_pairs(layer)
    C = _output_map(lay, direction)
    u = np.atleast_2d(np.asarray(u))
    if u.shape[1] != lay.h:
        raise ValidationError(f"layer '{layer.name}': input has {u.shape[1]} channels, layer has {lay.h}")
    if direction == "bwd":
        u = u[::-1]
    T = u.shape[0]
    x = np.zeros(lay.n, dtype=np.complex128) if x0 is None else np.asarray(x0, dtype=np.complex128).copy()
    if x.shape != (lay.n,):
        raise ValidationError(f"layer '{layer.name}': x0 has shape {x.shape}, expected ({lay.n},)")
    y = np.empty((T, lay.h), dtype=np.complex128)
    lam, B = lay.lam, lay.B
    for k in range(T):
        y[k] = C @ x
        x = lam * x + B @ u[k]
    return y[::-1] if direction == "bwd" else y


def convolve(layer: DiagonalLayer, u, direction: str = "fwd") -> np.ndarray:
    """Aligned output y_k = sum_{t<=k} H_t u_{k-t} (equals simulate shifted by one step)."""
    _require_discrete(layer, "convolve")
    lay = expand_conjugate_pairs(layer)
    C = _output_map(lay, direction)
    u = np.atleast_2d(np.asarray(u))
    if u.shape[1] != lay.h:
        raise ValidationError(f"layer '{layer.name}': input has {u.shape[1]} channels, layer has {lay.h}")
    if direction == "bwd":
        u = u[::-1]
    T = u.shape[0]
    x = np.zeros(lay.n, dtype=np.complex128)
    y = np.empty((T, lay.h), dtype=np.complex128)
    lam, B = lay.lam, lay.B
    for k in range(T):
        x = lam * x + B @ u[k]
        y[k] = C @ x
    return y[::-1] if direction == "bwd" else y

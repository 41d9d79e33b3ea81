"""Per-mode and per-layer output-energy computation.

For a stable discrete mode with pole lam, input row b, and output column
c, the squared Frobenius norms of its impulse-response slices form a
geometric series: ||c lam^t b||_F^2 = |lam|^(2t) ||c||^2 ||b||^2. The
finite-horizon energy is the partial sum, the asymptotic energy its
limit. The exact layer energy additionally carries cross-mode terms via
the diagonal Gramian closed form.

Bidirectional layers score ||C[:, i]||^2 as the average of the forward
and backward column norms, and the exact oracle averages the two
directions' exact energies. Conjugate-pair storage doubles energies (the
unstored mirror mode contributes identically).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .exceptions import ValidationError
from .model import POLE_MARGIN, DiagonalLayer, expand_conjugate_pairs


@dataclass(frozen=True)
class ModeEnergy:
    """Asymptotic energy record for one stored mode.

    Invariants: energy = gain^2 / (1 - pole_mag^2) and energy >= gain^2,
    with gain = sqrt(pair factor) * ||C[:, i]|| ||B[i, :]|| under the
    averaging and doubling conventions above.
    """

    layer: str
    index: int
    energy: float
    gain: float
    pole_mag: float


def _require_discrete(layer: DiagonalLayer, op: str) -> None:
    if layer.time_domain != "discrete":
        raise ValidationError(f"layer '{layer.name}': {op} requires a discrete layer (discretize first)")


def coupling_norms(layer: DiagonalLayer) -> tuple[np.ndarray, np.ndarray]:
    """Squared coupling norms (c2, b2) per stored mode.

    c2 is ||C[:, i]||^2, averaged with ||C_bwd[:, i]||^2 when present, and
    doubled when the layer stores conjugate pairs; b2 is ||B[i, :]||^2.
    """
    c2 = np.sum(np.abs(layer.C) ** 2, axis=0)
    if layer.C_bwd is not None:
        c2 = 0.5 * (c2 + np.sum(np.abs(layer.C_bwd) ** 2, axis=0))
    if layer.conjugate_pairs:
        c2 = 2.0 * c2
    b2 = np.sum(np.abs(layer.B) ** 2, axis=1)
    return c2, b2


def _refuse_near_unit(layer: DiagonalLayer, r: np.ndarray) -> None:
    bad = np.nonzero(r > 1.0 - POLE_MARGIN)[0]
    if bad.size:
        i = int(bad[0])
        raise ValidationError(
            f"layer '{layer.name}': lam: pole magnitude {r[i]:.17g} at index {i} "
            f"exceeds the scoring margin 1 - {POLE_MARGIN:g}; asymptotic energy diverges"
        )


def finite_energies(layer: DiagonalLayer, T: int) -> np.ndarray:
    """Horizon-T per-mode energies, shape (n,). Defined for any pole radius."""
    _require_discrete(layer, "finite_energies")
    if T < 1:
        raise ValidationError(f"T = {T} < 1")
    c2, b2 = coupling_norms(layer)
    r = np.abs(layer.lam)
    # sum_{t<T} r^{2t}; the ratio form cancels badly near r = 1, so go
    # through expm1/log and patch the r = 1 limit (= T) explicitly.
    with np.errstate(divide="ignore", invalid="ignore"):
        num = -np.expm1(2.0 * T * np.log(r))
        den = (1.0 - r) * (1.0 + r)
        series = np.where(r == 1.0, float(T), num / den)
    series = np.where(r == 0.0, 1.0, series)
    return c2 * b2 * series


def mode_energy_finite(layer: DiagonalLayer, i: int, T: int) -> float:
    """Horizon-T energy of stored mode i."""
    n = layer.n
    if not 0 <= i < n:
        raise ValidationError(f"layer '{layer.name}': mode index {i} out of range [0, {n})")
    return float(finite_energies(layer, T)[i])


def asymptotic_energies(layer: DiagonalLayer) -> np.ndarray:
    """Infinite-horizon per-mode energies, shape (n,). Refuses near-unit poles."""
    _require_discrete(layer, "asymptotic_energies")
    r = np.abs(layer.lam)
    _refuse_near_unit(layer, r)
    c2, b2 = coupling_norms(layer)
    return c2 * b2 / ((1.0 - r) * (1.0 + r))


def mode_energy(layer: DiagonalLayer, i: int) -> ModeEnergy:
    """Asymptotic energy record of stored mode i."""
    n = layer.n
    if not 0 <= i < n:
        raise ValidationError(f"layer '{layer.name}': mode index {i} out of range [0, {n})")
    c2, b2 = coupling_norms(layer)
    r = float(np.abs(layer.lam[i]))
    _refuse_near_unit(layer, np.array([r]))
    energy = float(c2[i] * b2[i] / ((1.0 - r) * (1.0 + r)))
    return ModeEnergy(layer.name, i, energy, math.sqrt(c2[i] * b2[i]), r)


def mode_energies(layer: DiagonalLayer) -> list[ModeEnergy]:
    """Asymptotic energy records for all stored modes."""
    _require_discrete(layer, "mode_energies")
    c2, b2 = coupling_norms(layer)
    r = np.abs(layer.lam)
    _refuse_near_unit(layer, r)
    e = c2 * b2 / ((1.0 - r) * (1.0 + r))
    g = np.sqrt(c2 * b2)
    return [ModeEnergy(layer.name, i, float(e[i]), float(g[i]), float(r[i])) for i in range(layer.n)]


def layer_energy_modal(layer: DiagonalLayer) -> float:
    """Sum of per-mode asymptotic energies (the additive approximation)."""
    if layer.n == 0:
        return 0.0
    return float(np.sum(asymptotic_energies(layer)))


def _exact_energy_dir(lam: np.ndarray, B: np.ndarray, C: np.ndarray) -> float:
    # sum_{i,j} <C_i, C_j> <B_j, B_i> / (1 - conj(lam_i) lam_j)
    M = C.conj().T @ C
    N = B @ B.conj().T
    den = 1.0 - np.conj(lam)[:, None] * lam[None, :]
    return float(np.real(np.sum(M * N.T / den)))


def layer_energy_exact(layer: DiagonalLayer) -> float:
    """Exact squared H2 energy including cross-mode terms.

    Equals layer_energy_modal whenever distinct modes occupy disjoint
    channel supports. For bidirectional layers, the forward-only and
    backward-only energies are averaged.
    """
    _require_discrete(layer, "layer_energy_exact")
    if layer.n == 0:
        return 0.0
    lay = expand_conjugate_pairs(layer)
    r = np.abs(lay.lam)
    _refuse_near_unit(lay, r)
    fwd = _exact_energy_dir(lay.lam, lay.B, lay.C)
    if lay.C_bwd is None:
        return fwd
    bwd = _exact_energy_dir(lay.lam, lay.B, lay.C_bwd)
    return 0.5 * (fwd + bwd)


@dataclass(frozen=True)
class PowerEstimate:
    """Monte-Carlo steady-state output power with its standard error."""

    mean: float
    stderr: float
    num_trials: int
    num_steps: int
    burn_in: int


def white_noise_power(layer: DiagonalLayer, num_steps: int, num_trials: int = 8, seed: int = 0) -> PowerEstimate:
    """Estimate steady-state E||y_k||^2 under unit white-noise input.

    The expectation equals layer_energy_exact. Each trial uses its own
    generator seeded seed + trial, averages instantaneous output power
    over num_steps samples after a burn-in of 10 * ceil(1/(1 - max|lam|))
    steps (transients decay at rate max|lam|).
    """
    _require_discrete(layer, "white_noise_power")
    if num_steps < 1 or num_trials < 1:
        raise ValidationError(f"num_steps = {num_steps}, num_trials = {num_trials}; both must be >= 1")
    lay = expand_conjugate_pairs(layer)
    if lay.n == 0:
        return PowerEstimate(0.0, 0.0, num_trials, num_steps, 0)
    r = np.abs(lay.lam)
    _refuse_near_unit(lay, r)
    burn = 10 * math.ceil(1.0 / (1.0 - float(np.max(r))))
    total = burn + num_steps
    maps = [lay.C] if lay.C_bwd is None else [lay.C, lay.C_bwd]

    trial_means = np.empty(num_trials)
    for trial in range(num_trials):
        rng = np.random.default_rng(seed + trial)
        u = rng.standard_normal((total, lay.h))
        w = u @ lay.B.T  # (total, n) mode drive
        x = np.empty_like(w)
        x[0] = 0.0
        for i in range(lay.n):
            # state recursion per mode: x_{k+1} = lam x_k + w_k
            x[1:, i] = lfilter([1.0], [1.0, -lay.lam[i]], w[:-1, i])
        acc = 0.0
        for C in maps:
            y = x[burn:] @ C.T
            acc += float(np.mean(np.sum(np.abs(y) ** 2, axis=1)))
        trial_means[trial] = acc / len(maps)

    mean = float(np.mean(trial_means))
    stderr = float(np.std(trial_means, ddof=1) / math.sqrt(num_trials)) if num_trials > 1 else 0.0
    return PowerEstimate(mean, stderr, num_trials, num_steps, burn)

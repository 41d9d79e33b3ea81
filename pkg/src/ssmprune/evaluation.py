"""Worst-case error certificates and empirical distortion reports.

The certificate side bounds the frequency-domain error of removing a
mode set T from a layer. Each removed mode's transfer term is a rank-1
matrix whose spectral norm peaks at gain/(1 - |lam|); grouping the peak
factor over the whole set as kappa(rho) = sqrt((1+rho)/(1-rho)) with
rho = max |lam| over T gives two aggregate bounds,

    kappa(rho) * sum_i sqrt(E_i)        (sum of roots)
    kappa(rho) * sqrt(|T| * sum_i E_i)  (root of sum, Cauchy-Schwarz)

and the reported bound is their minimum. The empirical check evaluates
the removed modes' transfer matrix on a uniform frequency grid and takes
the maximum spectral norm via batched power iteration.

Bidirectional layers are certified as the stacked two-output system
(forward over backward), so certificate energies sum the two output-map
norms instead of averaging them as the scoring side does; the stacked
empirical norm is bounded by the same expressions. Conjugate-pair layers
are certified on the expanded representation, each pair member bounded
separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energy import asymptotic_energies, layer_energy_exact, mode_energy, white_noise_power
from .exceptions import ValidationError
from .model import POLE_MARGIN, DiagonalLayer, ModelStack, expand_conjugate_pairs
from .response import frequency_response, impulse_array
from .selection import PruneDecision, _match_layers
from .scores import ScoreTable, score_table
from . import selection as _selection

_CHUNK = 8192
_POWER_TOL = 1e-10
_POWER_MAX_ITER = 1000


def kappa(rho: float) -> float:
    """Shared peak factor sqrt((1 + rho)/(1 - rho)) for a pruned set of radius rho."""
    if not 0.0 <= rho < 1.0:
        raise ValidationError(f"rho = {rho} outside [0, 1)")
    return math.sqrt((1.0 + rho) / (1.0 - rho))


def default_grid_points(rho: float) -> int:
    """Grid density rule: resonance peaks have width about 1 - rho."""
    if rho <= 0.0:
        return 4096
    return max(4096, math.ceil(64.0 / (1.0 - rho)))


def mode_hinf_envelope(layer: DiagonalLayer, i: int) -> tuple[float, float]:
    """Worst-case gain envelope of stored mode i, two algebraic forms.

    Returns (gain/(1 - r), sqrt(energy) * sqrt((1 + r)/(1 - r))); the two
    are the same number regrouped, and the function asserts they agree.
    For pair-stored or bidirectional layers the value inherits the score
    conventions (doubling/averaging); certificates instead expand pairs
    and use summed output maps, see certify.
    """
    me = mode_energy(layer, i)
    r = me.pole_mag
    direct = me.gain / (1.0 - r)
    via_energy = math.sqrt(me.energy) * math.sqrt((1.0 + r) / (1.0 - r))
    if not math.isclose(direct, via_energy, rel_tol=1e-9):
        raise AssertionError(
            f"envelope forms disagree: {direct!r} vs {via_energy!r} (layer '{layer.name}', mode {i})"
        )
    return direct, via_energy


def _spectral_norms(G: np.ndarray, tol: float = _POWER_TOL, max_iter: int = _POWER_MAX_ITER) -> np.ndarray:
    """Largest singular value of each matrix in a (w, p, q) batch.

    Batched power iteration on G^H G with a fixed seeded start vector;
    exact for p == 1 or q == 1.
    """
    w, p, q = G.shape
    if w == 0:
        return np.zeros(0)
    if q == 1:
        return np.linalg.norm(G[:, :, 0], axis=1)
    if p == 1:
        return np.linalg.norm(G[:, 0, :], axis=1)
    rng = np.random.default_rng(1234)
    v0 = rng.standard_normal(q) + 1j * rng.standard_normal(q)
    v = np.broadcast_to(v0 / np.linalg.norm(v0), (w, q)).copy()
    sigma2 = np.zeros(w)
    for _ in range(max_iter):
        u = np.einsum("wpq,wq->wp", G, v)
        Mv = np.einsum("wpq,wp->wq", np.conj(G), u)
        nrm = np.linalg.norm(Mv, axis=1)
        new = nrm  # ||G^H G v|| with unit v estimates sigma^2
        done = np.abs(new - sigma2) <= tol * np.maximum(new, 1e-300)
        sigma2 = new
        if np.all(done):
            break
        safe = np.where(nrm > 0.0, nrm, 1.0)
        v = Mv / safe[:, None]
    return np.sqrt(sigma2)


def _difference_transfer(layer: DiagonalLayer, omegas: np.ndarray) -> np.ndarray:
    """(w, p, h) transfer of a (sub-)layer; bidirectional stacks fwd over bwd."""
    G = frequency_response(layer, omegas, "fwd")
    if layer.C_bwd is None:
        return G
    Gb = frequency_response(layer, omegas, "bwd")
    return np.concatenate([G, Gb], axis=1)


def empirical_hinf(layer: DiagonalLayer, grid_points: int) -> float:
    """Max spectral norm of the layer's transfer over a uniform grid."""
    if layer.n == 0:
        return 0.0
    peak = 0.0
    for start in range(0, grid_points, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, grid_points))
        omegas = 2.0 * np.pi * idx / grid_points
        G = _difference_transfer(layer, omegas)
        peak = max(peak, float(np.max(_spectral_norms(G))))
    return peak


def _certificate_energies(layer: DiagonalLayer) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(energy, gain, radius) per mode of an expanded layer, sum-form output norms."""
    c2 = np.sum(np.abs(layer.C) ** 2, axis=0)
    if layer.C_bwd is not None:
        c2 = c2 + np.sum(np.abs(layer.C_bwd) ** 2, axis=0)
    b2 = np.sum(np.abs(layer.B) ** 2, axis=1)
    r = np.abs(layer.lam)
    if np.any(r > 1.0 - POLE_MARGIN):
        i = int(np.argmax(r))
        raise ValidationError(
            f"layer '{layer.name}': lam: pole magnitude {r[i]:.17g} at index {i} "
            f"exceeds the scoring margin 1 - {POLE_MARGIN:g}"
        )
    energy = c2 * b2 / ((1.0 - r) * (1.0 + r))
    return energy, np.sqrt(c2 * b2), r


@dataclass(frozen=True)
class LayerCertificate:
    """Certified and measured removal error of one layer.

    Mode counts are in expanded units (each conjugate pair counts twice).
    bound = min(bound_sum_roots, bound_root_sum) is the certified value;
    last_style_bound is the comparator sum gain_i/(1 - r_i), reported
    without any validity claim.
    """

    name: str
    kept_modes: int
    pruned_modes: int
    rho: float
    kappa: float
    energy_tail: float
    bound_sum_roots: float
    bound_root_sum: float
    bound: float
    last_style_bound: float
    empirical_hinf: float
    grid_points: int


def certify_layer(layer: DiagonalLayer, pruned_indices, grid_points: int | None = None) -> LayerCertificate:
    """Certificate for removing the given stored-mode indices from one layer."""
    pruned_idx = np.asarray(pruned_indices, dtype=np.intp)
    pair_factor = 2 if layer.conjugate_pairs else 1
    kept = (layer.n - pruned_idx.size) * pair_factor
    if pruned_idx.size == 0:
        return LayerCertificate(layer.name, kept, 0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0)
    diff = expand_conjugate_pairs(layer.take(pruned_idx))
    energy, gain, r = _certificate_energies(diff)
    rho = float(np.max(r))
    kap = kappa(rho)
    tail = float(np.sum(energy))
    roots = np.sqrt(energy)
    bound_sum_roots = kap * float(np.sum(roots))
    bound_root_sum = kap * math.sqrt(diff.n * tail)
    last_style = float(np.sum(gain / (1.0 - r)))
    N = default_grid_points(rho) if grid_points is None else int(grid_points)
    emp = empirical_hinf(diff, N)
    return LayerCertificate(
        layer.name, kept, diff.n, rho, kap, tail,
        bound_sum_roots, bound_root_sum, min(bound_sum_roots, bound_root_sum),
        last_style, emp, N,
    )


def certify(stack: ModelStack, decision: PruneDecision, grid_points: int | None = None) -> list[LayerCertificate]:
    """Per-layer certificates for a decision over a stack."""
    return [
        certify_layer(layer, ld.pruned, grid_points)
        for layer, ld in _match_layers(decision, stack)
    ]


@dataclass(frozen=True)
class LayerDistortion:
    name: str
    modal_drop: float | None  # None when only a reduced stack is given
    exact_h2: float
    impulse_rmse: float
    empirical_hinf: float
    mc_power: float | None
    mc_stderr: float | None


@dataclass(frozen=True)
class DistortionReport:
    horizon: int
    grid_points: int | None
    layers: list[LayerDistortion]
    total_modal_drop: float | None
    total_exact_h2: float
    max_empirical_hinf: float


def _impulse_rmse(diff: DiagonalLayer, T: int) -> float:
    if diff.n == 0:
        return 0.0
    vals = []
    for direction in (("fwd", "bwd") if diff.bidirectional else ("fwd",)):
        H = impulse_array(diff, T, direction)
        vals.append(math.sqrt(float(np.sum(np.abs(H) ** 2)) / H.size))
    return float(np.mean(vals))


def _difference_layer(full: DiagonalLayer, reduced: DiagonalLayer | None) -> DiagonalLayer:
    """Difference system full - reduced as one diagonal layer."""
    if reduced is None or reduced.n == 0:
        return full
    if reduced.h != full.h:
        raise ValidationError(f"layer '{full.name}': channel mismatch {full.h} vs {reduced.h}")
    if reduced.conjugate_pairs != full.conjugate_pairs:
        raise ValidationError(f"layer '{full.name}': conjugate_pairs flags differ between full and reduced")
    if full.bidirectional != reduced.bidirectional:
        raise ValidationError(f"layer '{full.name}': bidirectional flags differ between full and reduced")
    return full.replace(
        lam=np.concatenate([full.lam, reduced.lam]),
        B=np.concatenate([full.B, reduced.B], axis=0),
        C=np.concatenate([full.C, -reduced.C], axis=1),
        C_bwd=None if full.C_bwd is None else np.concatenate([full.C_bwd, -reduced.C_bwd], axis=1),
        delta=None,
        time_domain="discrete",
    )


def distortion(stack_full: ModelStack, target, T: int = 256, grid_points: int | None = None,
               mc_trials: int = 0, mc_steps: int = 20000, seed: int = 0) -> DistortionReport:
    """Distortion report for a decision or an already-reduced stack.

    With a PruneDecision the difference system of each layer is exactly
    its pruned mode set, so the modal drop (sum of pruned scoring
    energies) is reported alongside the exact H2 of the difference; with
    a reduced stack the difference is formed explicitly and the modal
    drop is undefined. Monte-Carlo power of the difference system is
    estimated when mc_trials > 0.
    """
    entries: list[tuple[DiagonalLayer, DiagonalLayer, float | None]] = []
    if isinstance(target, PruneDecision):
        for layer, ld in _match_layers(target, stack_full):
            diff = layer.take(ld.pruned)
            drop = float(np.sum(asymptotic_energies(layer)[ld.pruned])) if ld.pruned.size else 0.0
            entries.append((layer, diff, drop))
    elif isinstance(target, ModelStack):
        reduced_by_name = {l.name: l for l in target.layers}
        extra = set(reduced_by_name) - {l.name for l in stack_full.layers}
        if extra:
            raise ValidationError(f"reduced stack has layers absent from the full stack: {sorted(extra)}")
        for layer in stack_full.layers:
            diff = _difference_layer(layer, reduced_by_name.get(layer.name))
            entries.append((layer, diff, None))
    else:
        raise ValidationError(f"target must be a PruneDecision or ModelStack, got {type(target).__name__}")

    rows = []
    for layer, diff, drop in entries:
        diff_x = expand_conjugate_pairs(diff)
        exact = layer_energy_exact(diff)
        rmse = _impulse_rmse(diff_x, T)
        if diff_x.n == 0:
            emp = 0.0
        else:
            rho = float(np.max(np.abs(diff_x.lam)))
            N = default_grid_points(rho) if grid_points is None else int(grid_points)
            emp = empirical_hinf(diff_x, N)
        mc_power = mc_stderr = None
        if mc_trials > 0:
            est = white_noise_power(diff, mc_steps, mc_trials, seed)
            mc_power, mc_stderr = est.mean, est.stderr
        rows.append(LayerDistortion(layer.name, drop, exact, rmse, emp, mc_power, mc_stderr))

    drops = [r.modal_drop for r in rows]
    total_drop = None if any(d is None for d in drops) else float(sum(drops))
    return DistortionReport(
        horizon=T, grid_points=grid_points, layers=rows,
        total_modal_drop=total_drop,
        total_exact_h2=float(sum(r.exact_h2 for r in rows)),
        max_empirical_hinf=max((r.empirical_hinf for r in rows), default=0.0),
    )


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    budget: int | None
    kept_modes: int
    achieved_ratio: float
    modal_drop: float
    exact_h2: float
    max_empirical_hinf: float
    max_bound: float
    kept_per_layer: dict


@dataclass(frozen=True)
class SweepResult:
    method: str
    policy: str
    epsilon: float
    seed: int
    layer_sizes: dict
    rows: list[SweepRow]


def _select_for_policy(table: ScoreTable, ratio: float, layer_floor: int | None) -> PruneDecision:
    if table.policy == "prefix":
        return _selection.select_global_prefix(table, ratio=ratio, layer_floor=layer_floor)
    if table.policy == "global":
        return _selection.select_global_raw(table, ratio, layer_floor=layer_floor)
    return _selection.select_uniform_ratio(table, ratio, layer_floor=layer_floor)


def sweep(stack: ModelStack, method: str = "aire", policy: str | None = None,
          ratios=(0.0, 0.25, 0.5, 0.75, 0.9), epsilon: float = 1e-12, seed: int = 0,
          T: int = 128, grid_points: int | None = None,
          layer_floor: int | None = None) -> SweepResult:
    """Selection + distortion + certification across a list of ratios."""
    table = score_table(stack, method, policy, epsilon, seed)
    rows = []
    for ratio in ratios:
        decision = _select_for_policy(table, float(ratio), layer_floor)
        report = distortion(stack, decision, T=T, grid_points=grid_points)
        certs = certify(stack, decision, grid_points=grid_points)
        kept = {ld.name: int(ld.kept.size) for ld in decision.layers}
        rows.append(SweepRow(
            ratio=float(ratio), budget=decision.budget,
            kept_modes=int(sum(kept.values())),
            achieved_ratio=decision.achieved_ratio,
            modal_drop=report.total_modal_drop,
            exact_h2=report.total_exact_h2,
            max_empirical_hinf=report.max_empirical_hinf,
            max_bound=max((c.bound for c in certs), default=0.0),
            kept_per_layer=kept,
        ))
    return SweepResult(table.method, table.policy, table.epsilon, table.seed,
                       {l.name: l.n for l in stack.layers}, rows)


@dataclass(frozen=True)
class StackBound:
    """Conservative sequential composition of per-layer certificates.

    Treats the stack as the serial composition of its LTI cores, each
    optionally wrapped in an origin-fixing Lipschitz nonlinearity; a
    fully removed layer is the zero map. The total worst-case gain error
    is bounded by summing, over layers, the layer's certified error
    scaled by the upstream original gains and the downstream pruned
    gains. This composition is a documented stand-in, not a tight bound.
    """

    bound: float
    per_layer: dict


def stack_bound(stack: ModelStack, decision: PruneDecision, certs: list[LayerCertificate] | None = None,
                lipschitz=None, grid_points: int | None = None) -> StackBound:
    if certs is None:
        certs = certify(stack, decision, grid_points)
    cert_by_name = {c.name: c for c in certs}
    reduced = _selection.materialize(decision, stack)
    reduced_by_name = {l.name: l for l in reduced.layers}

    names = [l.name for l in stack.layers]
    L = len(names)
    if lipschitz is None:
        lip = np.ones(L)
    else:
        lip = np.asarray(lipschitz, dtype=np.float64)
        if lip.shape != (L,):
            raise ValidationError(f"lipschitz: expected {L} constants, got shape {lip.shape}")

    gains_full = np.empty(L)
    gains_red = np.empty(L)
    eps = np.empty(L)
    for i, layer in enumerate(stack.layers):
        rho = float(np.max(np.abs(layer.lam))) if layer.n else 0.0
        N = default_grid_points(rho) if grid_points is None else int(grid_points)
        gains_full[i] = empirical_hinf(expand_conjugate_pairs(layer), N)
        red = reduced_by_name.get(layer.name)
        gains_red[i] = 0.0 if red is None else empirical_hinf(expand_conjugate_pairs(red), N)
        eps[i] = cert_by_name[layer.name].bound

    per_layer = {}
    total = 0.0
    for i in range(L):
        up = float(np.prod(lip[:i] * gains_full[:i]))
        down = float(np.prod(lip[i + 1:] * gains_red[i + 1:]))
        contrib = up * lip[i] * eps[i] * down
        per_layer[names[i]] = contrib
        total += contrib
    return StackBound(total, per_layer)

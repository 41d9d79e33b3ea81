"""Shared fixtures and independent reference implementations.

The brute-force helpers here deliberately avoid the closed forms under
test: energies are summed term by term from explicitly formed impulse
matrices, and grid suprema use LAPACK's svd rather than the package's
power iteration. Tests compare the fast paths against these.
"""

from __future__ import annotations

import numpy as np
import pytest

import ssmprune as sp


def rand_layer(
    rng,
    n,
    h,
    *,
    radius=(0.0, 0.9),
    bidirectional=False,
    conjugate_pairs=False,
    name="lay",
    scale=1.0,
):
    lo, hi = radius
    r = rng.uniform(lo, hi, n)
    if conjugate_pairs:
        th = rng.uniform(0.05, np.pi - 0.05, n)
    else:
        th = rng.uniform(-np.pi, np.pi, n)
    lam = r * np.exp(1j * th)
    B = scale * (rng.standard_normal((n, h)) + 1j * rng.standard_normal((n, h))) / np.sqrt(2)
    C = scale * (rng.standard_normal((h, n)) + 1j * rng.standard_normal((h, n))) / np.sqrt(2)
    C_bwd = None
    if bidirectional:
        C_bwd = scale * (rng.standard_normal((h, n)) + 1j * rng.standard_normal((h, n))) / np.sqrt(2)
    return sp.DiagonalLayer(name, lam, B, C, C_bwd=C_bwd, conjugate_pairs=conjugate_pairs)


def brute_mode_energy(lam, b_row, c_col, T):
    """Sum_{t<T} ||c lam^t b||_F^2 with the outer product formed each step."""
    b = np.atleast_1d(np.asarray(b_row, dtype=complex))
    c = np.atleast_1d(np.asarray(c_col, dtype=complex))
    total = 0.0
    for t in range(T):
        H = np.outer(c, b) * (complex(lam) ** t)
        total += float(np.sum(np.abs(H) ** 2))
    return total


def brute_layer_energy(layer, T):
    """Truncated sum of ||H_t||_F^2, averaging directions like the package does."""
    lay = sp.expand_conjugate_pairs(layer)
    out_maps = [lay.C] if lay.C_bwd is None else [lay.C, lay.C_bwd]
    per_dir = []
    for Cm in out_maps:
        s = 0.0
        for t in range(T):
            H = Cm @ np.diag(lay.lam**t) @ lay.B
            s += float(np.sum(np.abs(H) ** 2))
        per_dir.append(s)
    return float(np.mean(per_dir))


def horizon_for(layer, tol=1e-16):
    """T large enough that the discarded tail is below tol relative."""
    r = float(np.max(np.abs(sp.expand_conjugate_pairs(layer).lam)))
    if r < 1e-8:
        return 4
    return int(np.ceil(np.log(tol) / (2.0 * np.log(r)))) + 4


def svd_grid_sup(G):
    """max_k sigma_max(G[k]) via LAPACK, one matrix at a time."""
    return float(max(np.linalg.svd(G[k], compute_uv=False)[0] for k in range(G.shape[0])))


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)

"""Per-mode and per-layer energy checks against brute-force truncated sums."""

from __future__ import annotations

import numpy as np
import pytest

import ssmprune as sp
from ssmprune.exceptions import ValidationError

from conftest import brute_layer_energy, brute_mode_energy, horizon_for, rand_layer


# ----------------------------------------------------------- closed-form fixtures

def test_asymptotic_energy_unit_mode_half():
    # r = 0.5, unit couplings: 1 / (1 - 0.25) = 4/3
    lay = sp.DiagonalLayer("a", [0.5], [[1.0]], [[1.0]])
    assert sp.asymptotic_energies(lay)[0] == pytest.approx(4.0 / 3.0, rel=1e-15)


def test_asymptotic_energy_scales_with_coupling_norms():
    # lam = 0: E = ||b||^2 ||c||^2 = 4 * 9
    lay = sp.DiagonalLayer("a", [0.0], [[2.0]], [[3.0]])
    assert sp.asymptotic_energies(lay)[0] == pytest.approx(36.0, rel=0)


def test_asymptotic_energy_slow_mode():
    lay = sp.DiagonalLayer("a", [0.9], [[1.0]], [[1.0]])
    assert sp.asymptotic_energies(lay)[0] == pytest.approx(5.263157894736843, rel=1e-14)


def test_finite_energy_fixtures():
    lay = sp.DiagonalLayer("a", [0.5], [[1.0]], [[1.0]])
    # T = 2: 1 + 0.25
    assert sp.finite_energies(lay, 2)[0] == pytest.approx(1.25, rel=1e-15)
    z = sp.DiagonalLayer("z", [0.0], [[2.0]], [[3.0]])
    assert sp.finite_energies(z, 5)[0] == pytest.approx(36.0, rel=0)
    # r = 1 patch is the horizon itself times the gain; reachable only through
    # the finite form (asymptotic refuses poles that close to the circle)
    assert sp.finite_energies(lay, 1)[0] == pytest.approx(1.0, rel=0)


def test_mode_energy_record_fields():
    lay = sp.DiagonalLayer("a", [0.5], [[2.0]], [[1.0]])
    me = sp.mode_energy(lay, 0)
    assert me.layer == "a" and me.index == 0
    assert me.pole_mag == pytest.approx(0.5)
    assert me.gain == pytest.approx(2.0)  # ||b|| * ||c||
    assert me.energy == pytest.approx(4.0 / 0.75, rel=1e-15)


def test_near_unit_pole_refused():
    lay = sp.DiagonalLayer("a", [1.0 - 1e-13], [[1.0]], [[1.0]])
    with pytest.raises(ValidationError, match="scoring margin"):
        sp.asymptotic_energies(lay)


def test_mode_energy_brute_force_sweep(rng):
    for _ in range(50):
        r = float(rng.uniform(0.0, 0.97))
        lam = r * np.exp(1j * rng.uniform(-np.pi, np.pi))
        h = int(rng.integers(1, 4))
        b = rng.standard_normal(h) + 1j * rng.standard_normal(h)
        c = rng.standard_normal(h) + 1j * rng.standard_normal(h)
        lay = sp.DiagonalLayer("m", [lam], b.reshape(1, h), c.reshape(h, 1))
        T = horizon_for(lay)
        assert sp.asymptotic_energies(lay)[0] == pytest.approx(
            brute_mode_energy(lam, b, c, T), rel=1e-10
        )
        Ts = int(rng.integers(1, 12))
        assert sp.finite_energies(lay, Ts)[0] == pytest.approx(
            brute_mode_energy(lam, b, c, Ts), rel=1e-12
        )


def test_energy_monotone_in_each_factor():
    base = sp.asymptotic_energies(sp.DiagonalLayer("a", [0.5], [[1.0]], [[1.0]]))[0]
    up_b = sp.asymptotic_energies(sp.DiagonalLayer("a", [0.5], [[1.5]], [[1.0]]))[0]
    up_c = sp.asymptotic_energies(sp.DiagonalLayer("a", [0.5], [[1.0]], [[1.5]]))[0]
    up_r = sp.asymptotic_energies(sp.DiagonalLayer("a", [0.8], [[1.0]], [[1.0]]))[0]
    assert base < up_b and base < up_c and base < up_r


def test_finite_energy_monotone_in_horizon():
    lay = sp.DiagonalLayer("a", [0.9], [[1.0]], [[1.0]])
    vals = [sp.finite_energies(lay, T)[0] for T in (1, 2, 4, 16, 64)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    limit = sp.asymptotic_energies(lay)[0]
    assert vals[-1] < limit
    # long horizons saturate at the asymptote
    assert sp.finite_energies(lay, 512)[0] == pytest.approx(limit, rel=1e-15)


# ------------------------------------------------------- conventions on variants

def test_pair_energy_doubles_the_single_member(rng):
    lay = rand_layer(rng, 3, 2, conjugate_pairs=True, radius=(0.1, 0.8))
    plain = lay.replace(conjugate_pairs=False)
    np.testing.assert_allclose(
        sp.asymptotic_energies(lay), 2.0 * sp.asymptotic_energies(plain), rtol=1e-14
    )
    # stored-pair modal total equals the expanded layer's
    assert sp.layer_energy_modal(lay) == pytest.approx(
        sp.layer_energy_modal(sp.expand_conjugate_pairs(lay)), rel=1e-14
    )


def test_bidirectional_energy_averages_directions(rng):
    lay = rand_layer(rng, 4, 2, bidirectional=True, radius=(0.1, 0.85))
    fwd = lay.replace(C_bwd=None)
    bwd = lay.replace(C=lay.C_bwd, C_bwd=None)
    want = 0.5 * (sp.asymptotic_energies(fwd) + sp.asymptotic_energies(bwd))
    np.testing.assert_allclose(sp.asymptotic_energies(lay), want, rtol=1e-14)
    assert sp.layer_energy_exact(lay) == pytest.approx(
        0.5 * (sp.layer_energy_exact(fwd) + sp.layer_energy_exact(bwd)), rel=1e-14
    )


# -------------------------------------------------------------- layer-level forms

def test_layer_energy_exact_vs_brute(rng):
    for flags in ({}, {"conjugate_pairs": True}, {"bidirectional": True}):
        lay = rand_layer(rng, 5, 3, radius=(0.0, 0.9), **flags)
        assert sp.layer_energy_exact(lay) == pytest.approx(
            brute_layer_energy(lay, horizon_for(lay)), rel=1e-10
        )


def test_multi_siso_modal_equals_exact():
    # disjoint channels: cross terms vanish and the modal sum is exact
    lay = sp.DiagonalLayer(
        "ms", [0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]
    )
    ex = sp.layer_energy_exact(lay)
    assert ex == pytest.approx(8.0 / 3.0, rel=1e-15)
    assert sp.layer_energy_modal(lay) == pytest.approx(ex, rel=1e-15)


def test_shared_channel_exact_exceeds_modal():
    # two identical modes on one channel: coherent interaction doubles the energy
    lay = sp.DiagonalLayer("sh", [0.0, 0.0], [[1.0], [1.0]], [[1.0, 1.0]])
    assert sp.layer_energy_exact(lay) == 4.0
    assert sp.layer_energy_modal(lay) == 2.0


def test_synth_multi_siso_stacks_are_additive():
    st = sp.synth(seed=3, layers=3, modes=4, channels=6, structure="multi_siso")
    for lay in st:
        assert sp.layer_energy_exact(lay) == pytest.approx(
            sp.layer_energy_modal(lay), rel=1e-12
        )


# ------------------------------------------------------------------- white noise

def test_white_noise_power_matches_exact(rng):
    lay = rand_layer(rng, 6, 2, radius=(0.1, 0.8))
    exact = sp.layer_energy_exact(lay)
    est = sp.white_noise_power(lay, num_steps=30_000, num_trials=8, seed=1)
    assert est.num_trials == 8 and est.stderr > 0
    assert abs(est.mean - exact) < 5.0 * est.stderr


def test_white_noise_power_bidirectional(rng):
    lay = rand_layer(rng, 4, 2, bidirectional=True, radius=(0.1, 0.75))
    exact = sp.layer_energy_exact(lay)
    est = sp.white_noise_power(lay, num_steps=30_000, num_trials=8, seed=2)
    assert abs(est.mean - exact) < 5.0 * est.stderr


def test_white_noise_power_deterministic_in_seed(rng):
    lay = rand_layer(rng, 3, 2, radius=(0.1, 0.7))
    a = sp.white_noise_power(lay, num_steps=2000, num_trials=3, seed=9)
    b = sp.white_noise_power(lay, num_steps=2000, num_trials=3, seed=9)
    assert a.mean == b.mean and a.stderr == b.stderr

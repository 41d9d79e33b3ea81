from __future__ import annotations

import numpy as np
import pytest

import ssmprune as sp
from ssmprune.exceptions import ValidationError


def test_synth_deterministic():
    a = sp.synth(seed=9, layers=2, modes=5, channels=3)
    b = sp.synth(seed=9, layers=2, modes=5, channels=3)
    for la, lb in zip(a, b):
        np.testing.assert_array_equal(la.lam, lb.lam)
        np.testing.assert_array_equal(la.B, lb.B)
    c = sp.synth(seed=10, layers=2, modes=5, channels=3)
    assert not np.array_equal(a[0].lam, c[0].lam)


def test_synth_per_layer_mode_counts():
    st = sp.synth(seed=1, layers=3, modes=[4, 7, 2], channels=2)
    assert [l.n for l in st] == [4, 7, 2]
    assert [l.name for l in st] == ["layer00", "layer01", "layer02"]


def test_synth_radius_window_respected():
    st = sp.synth(seed=2, layers=2, modes=32, channels=2, radius=(0.6, 0.8))
    for lay in st:
        r = np.abs(lay.lam)
        assert np.all(r >= 0.6) and np.all(r <= 0.8)


def test_synth_rejects_bad_radius():
    with pytest.raises(ValidationError):
        sp.synth(seed=1, radius=(0.5, 1.0))
    with pytest.raises(ValidationError):
        sp.synth(seed=1, radius=(-0.1, 0.5))


def test_synth_pair_layers_live_upper_half_plane():
    st = sp.synth(seed=3, layers=2, modes=6, channels=2, conjugate_pairs=True)
    for lay in st:
        assert lay.conjugate_pairs
        assert np.all(lay.lam.imag > 0)
        assert sp.validate_layer(lay) == []


def test_synth_bidirectional_layers_carry_second_readout():
    st = sp.synth(seed=4, layers=2, modes=4, channels=2, bidirectional=True)
    for lay in st:
        assert lay.bidirectional
        assert lay.C_bwd.shape == lay.C.shape


def test_synth_continuous_discretizes_cleanly():
    st = sp.synth(seed=5, layers=3, modes=8, channels=2, time_domain="continuous")
    for lay in st:
        assert lay.time_domain == "continuous"
        assert np.all(lay.lam.real < 0)
    d = sp.discretize_stack(st)
    for lay in d:
        assert np.all(np.abs(lay.lam) < 1.0)


def test_synth_continuous_poles_land_on_requested_radii():
    # the continuous parameterization is chosen so ZOH returns |lam| in window
    st = sp.synth(seed=6, layers=1, modes=16, channels=2,
                  time_domain="continuous", radius=(0.4, 0.9))
    d = sp.discretize_stack(st)
    r = np.abs(d[0].lam)
    assert np.all(r >= 0.4 - 1e-12) and np.all(r <= 0.9 + 1e-12)


def test_synth_multi_siso_needs_enough_channels():
    with pytest.raises(ValidationError):
        sp.synth(seed=1, layers=1, modes=8, channels=4, structure="multi_siso")
    st = sp.synth(seed=1, layers=1, modes=4, channels=4, structure="multi_siso")
    lay = st[0]
    # off-diagonal couplings vanish: one private channel per mode
    for i in range(lay.n):
        row = np.abs(lay.B[i, :]) > 0
        col = np.abs(lay.C[:, i]) > 0
        assert row.sum() == 1 and col.sum() == 1


def test_synth_multi_siso_refuses_pair_storage():
    with pytest.raises(ValidationError):
        sp.synth(seed=1, layers=1, modes=2, channels=4,
                 structure="multi_siso", conjugate_pairs=True)


def test_synth_gain_spread_widens_energy_range():
    flat = sp.synth(seed=7, layers=1, modes=24, channels=2, gain_spread=0.0)
    wide = sp.synth(seed=7, layers=1, modes=24, channels=2, gain_spread=2.5)
    ef = np.asarray(sp.asymptotic_energies(flat[0]))
    ew = np.asarray(sp.asymptotic_energies(wide[0]))
    assert np.std(np.log(ew)) > np.std(np.log(ef))


def test_synth_records_its_recipe():
    st = sp.synth(seed=8, layers=1, modes=3, channels=2)
    assert st.meta["synth"]["seed"] == 8
    assert st.meta["synth"]["modes"] == [3]  # normalized to per-layer counts

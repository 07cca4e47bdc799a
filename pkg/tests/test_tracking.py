import numpy as np
import pytest

from gkdvlab.ansatz import ModParams, build_V
from gkdvlab.tracking import (
    DecompositionError, brute_force_residual_map, cold_start_guess,
    decompose, energy_functional, fit_log_law, track,
)

from conftest import profiles_for


def _grid(half=60.0, h=1.0 / 16.0):
    n = int(round(2 * half / h))
    return -half + h * np.arange(n + 1)


def _make(p, mu1, mu2, z1, z2, y):
    ps = profiles_for(p)
    gamma = ModParams(p, mu1, mu2, z1, z2)
    return gamma, build_V(gamma, ps, y).V, ps


def test_exact_field_recovers_parameters():
    y = _grid()
    gamma, w, ps = _make(3, 0.02, -0.02, 5.0, -5.0, y)
    dec = decompose(w, y, gamma, ps)
    assert dec.iterations <= 2
    assert dec.eps_h1 < 1e-12
    got = (dec.gamma.mu1, dec.gamma.mu2, dec.gamma.z1, dec.gamma.z2)
    ref = (gamma.mu1, gamma.mu2, gamma.z1, gamma.z2)
    err = np.max(np.abs(np.array(got) - np.array(ref)))
    assert err < 1e-12


def test_offset_guess_converges():
    y = _grid()
    gamma, w, ps = _make(3, 0.02, -0.02, 5.0, -5.0, y)
    guess = ModParams(3, 0.01, -0.03, 5.1, -4.9)
    dec = decompose(w, y, guess, ps)
    assert abs(dec.gamma.mu1 - 0.02) < 1e-10
    assert abs(dec.gamma.z1 - 5.0) < 1e-10


def test_orthogonal_perturbation_leaves_parameters():
    y = _grid()
    gamma, w, ps = _make(3, 0.01, -0.01, 6.0, -6.0, y)
    # perturbation orthogonal to all four test directions
    from gkdvlab.tracking import _test_functions
    h = y[1] - y[0]
    psi, _ = _test_functions(gamma, y)
    pert = np.exp(-(y ** 2)) * np.sin(3 * y)
    coef = np.linalg.solve(h * psi @ psi.T, h * psi @ pert)
    pert = pert - coef @ psi
    dec = decompose(w + 1e-3 * pert, y, gamma, ps)
    got = (dec.gamma.mu1, dec.gamma.mu2, dec.gamma.z1, dec.gamma.z2)
    ref = (gamma.mu1, gamma.mu2, gamma.z1, gamma.z2)
    err = np.max(np.abs(np.array(got) - np.array(ref)))
    assert err < 1e-12
    assert dec.eps_l2 == pytest.approx(
        1e-3 * np.sqrt(h * np.sum(pert ** 2)), rel=1e-10)


def test_trust_region_rejected():
    y = _grid()
    gamma, w, ps = _make(3, 0.02, -0.02, 5.0, -5.0, y)
    far = ModParams(3, 0.02, -0.02, 8.0, -8.0)
    with pytest.raises(DecompositionError):
        decompose(w, y, far, ps)


def test_small_separation_rejected():
    y = _grid()
    gamma, w, ps = _make(3, 0.0, 0.0, 2.0, -2.0, y)
    with pytest.raises(DecompositionError):
        decompose(w, y, gamma, ps)


def test_cold_start():
    y = _grid()
    gamma, w, ps = _make(3, 0.013, -0.013, 5.2, -5.2, y)
    guess = cold_start_guess(w, y, 3)
    dec = decompose(w, y, guess, ps)
    assert abs(dec.gamma.z1 - 5.2) < 1e-10


def test_supercritical_projections_attached():
    y = _grid(h=1.0 / 32.0)
    gamma, w, ps = _make(6, 0.01, -0.01, 6.0, -6.0, y)
    dec = decompose(w, y, gamma, ps)
    assert dec.a_plus is not None and dec.a_minus is not None
    assert dec.a_plus.shape == (2,)
    # the exact ansatz has no residue to project
    assert np.max(np.abs(dec.a_plus)) < 1e-10


def test_brute_force_oracle_agrees():
    y = _grid()
    gamma, w, ps = _make(3, 0.02, -0.02, 5.0, -5.0, y)
    best, res = brute_force_residual_map(
        w, y, ps,
        mu1_vals=np.linspace(0.0, 0.04, 5),
        mu2_vals=np.linspace(-0.04, 0.0, 5),
        z1_vals=np.linspace(4.5, 5.5, 5),
        z2_vals=np.linspace(-5.5, -4.5, 5))
    assert best.mu1 == pytest.approx(0.02)
    assert best.z1 == pytest.approx(5.0)
    assert res.shape == (5, 5, 5, 5)


def test_energy_zero_at_exact_ansatz():
    y = _grid()
    gamma, w, ps = _make(3, 0.02, -0.02, 5.0, -5.0, y)
    dec = decompose(w, y, gamma, ps)
    assert abs(energy_functional(dec)) < 1e-20


def test_energy_positive_for_small_remainder():
    y = _grid()
    gamma, w, ps = _make(3, 0.02, -0.02, 5.0, -5.0, y)
    pert = 1e-3 * np.exp(-((y - 1.0) ** 2))
    dec = decompose(w + pert, y, gamma, ps)
    assert energy_functional(dec) > 0


def test_track_over_synthetic_states():
    y = _grid()
    ps = profiles_for(3)
    ts = np.linspace(50.0, 60.0, 21)
    states = []
    for t in ts:
        z = 2.0 * np.log(np.sqrt(ps.alpha) * t)
        mu = 1.0 / t
        gamma = ModParams(3, mu, -mu, z / 2.0, -z / 2.0)
        states.append((t, build_V(gamma, ps, y).V))
    gamma0 = ModParams(3, 1.0 / ts[0], -1.0 / ts[0],
                       np.log(np.sqrt(ps.alpha) * ts[0]),
                       -np.log(np.sqrt(ps.alpha) * ts[0]))
    series = track(states, y, gamma0, ps)
    assert len(series) == len(ts)
    z_col = series.column("z")
    assert np.all(np.diff(z_col) > 0)


def test_fit_log_law_exact():
    t = np.linspace(30.0, 300.0, 200)
    z = 2.0 * np.log(4.0 * t)
    fit = fit_log_law(t, z, alpha_ref=16.0)
    assert fit["c_fit"] == pytest.approx(4.0, abs=1e-12)
    assert fit["rel_dev"] < 1e-12


def test_fit_requires_enough_samples():
    t = np.linspace(30.0, 300.0, 20)
    z = 2.0 * np.log(4.0 * t)
    with pytest.raises(ValueError):
        fit_log_law(t, z)

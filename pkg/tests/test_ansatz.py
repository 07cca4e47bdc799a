import numpy as np
import pytest

from gkdvlab.ansatz import (
    GridResolutionError, ModParams, build_cutoff, build_V, flow_residual,
    formal_flow_rates, interaction_leading_term, residual_grid,
)

from conftest import profiles_for


def _gamma(p, z, mu=None, alpha=None):
    if mu is None:
        mu = np.sqrt(alpha) * np.exp(-z / 2.0)
    return ModParams(p, mu, -mu, z / 2.0, -z / 2.0)


def test_params_derived_quantities():
    g = ModParams(3, 0.02, -0.01, 6.0, -4.0)
    assert g.z == 10.0
    assert g.zbar == 2.0
    assert g.mu == pytest.approx(0.03)
    assert g.mubar == pytest.approx(0.01)
    assert g.sigma == -1
    assert ModParams(6, 0.0, 0.0, 5.0, -5.0).sigma == 1


def test_params_validation():
    with pytest.raises(ValueError):
        ModParams(3, 0.0, 0.0, -1.0, 1.0).validate()   # z < 0
    with pytest.raises(ValueError):
        ModParams(3, -1.5, 0.0, 5.0, -5.0).validate()  # speed 1 + mu <= 0


def test_cutoff_partition():
    # the transition lives on [-e^{z/2}, -e^{z/2}/2]: 1 to the right, 0 left
    z = 8.0
    y = np.linspace(-200.0, 50.0, 5001)
    phi = build_cutoff(z, y)
    s = np.exp(z / 2.0)
    assert np.all(phi[y >= -s / 2.0] == 1.0)
    assert np.all(phi[y <= -s] == 0.0)
    mid = (y > -s) & (y < -s / 2.0)
    assert np.all((phi[mid] > -1e-12) & (phi[mid] < 1.0 + 1e-12))
    centre = np.abs(y + 0.75 * s) < 0.05 * s
    assert np.all((phi[centre] > 1e-6) & (phi[centre] < 1 - 1e-6))
    assert np.all(np.diff(phi) >= -1e-12)


def test_cutoff_derivative_consistency():
    z = 8.0
    y = np.linspace(-np.exp(z / 2.0) - 5, 5.0, 20001)
    h = y[1] - y[0]
    phi = build_cutoff(z, y)
    dphi = build_cutoff(z, y, deriv=1)
    fd = np.gradient(phi, h)
    assert np.max(np.abs(fd - dphi)) < 1e-3 * max(np.max(np.abs(dphi)), 1)


@pytest.mark.parametrize("p", [3, 4, 6, 7])
def test_ansatz_reduces_to_two_waves_without_correction(p):
    ps = profiles_for(p)
    gamma = _gamma(p, 12.0, alpha=ps.alpha)
    y = residual_grid(gamma)
    fld = build_V(gamma, ps, y)
    # correction r is O(e^{-z}) with profile-sized amplitude
    amp = np.max(np.abs(ps.A1)) + np.max(np.abs(ps.A2))
    gap = np.max(np.abs(fld.V - fld.two_wave_sum))
    assert gap < 2.0 * (amp + 1.0) * np.exp(-gamma.z)
    assert gap > 0


def test_ansatz_requires_uniform_grid():
    ps = profiles_for(3)
    gamma = _gamma(3, 10.0, alpha=ps.alpha)
    y = np.cumsum(np.random.default_rng(0).uniform(0.01, 0.05, 2000))
    with pytest.raises((ValueError, GridResolutionError)):
        build_V(gamma, ps, y)


def test_residual_identity_exact():
    # E = E_V - m1.M1 - m2.M2 holds exactly by construction
    ps = profiles_for(3)
    gamma = _gamma(3, 10.0, alpha=ps.alpha)
    y = residual_grid(gamma)
    dec = flow_residual(gamma, formal_flow_rates(gamma, ps), ps, y)
    recon = dec.E_V - dec.m1[0] * dec.M1[0] - dec.m1[1] * dec.M1[1] \
        - dec.m2[0] * dec.M2[0] - dec.m2[1] * dec.M2[1]
    assert np.max(np.abs(recon - dec.E)) < 1e-14 * max(np.max(np.abs(dec.E_V)), 1)


@pytest.mark.parametrize("p", [3, 4])
def test_correction_shrinks_residual(p):
    ps = profiles_for(p)
    gamma = _gamma(p, 12.0, alpha=ps.alpha)
    y = residual_grid(gamma)
    rates = formal_flow_rates(gamma, ps)
    with_r = flow_residual(gamma, rates, ps, y)
    bare = flow_residual(gamma, rates, ps, y, include_correction=False)
    assert with_r.norm_E_h1 < 0.8 * bare.norm_E_h1


def test_residual_scales_exponentially():
    ps = profiles_for(3)
    norms = []
    for z in (10.0, 12.0):
        gamma = _gamma(3, z, alpha=ps.alpha)
        y = residual_grid(gamma)
        rates = formal_flow_rates(gamma, ps)
        norms.append(flow_residual(gamma, rates, ps, y).norm_E_h1)
    rate = np.log(norms[0] / norms[1]) / 2.0
    assert 1.0 < rate < 1.6


@pytest.mark.parametrize("p", [3, 6])
def test_interaction_tail_form(p):
    ps = profiles_for(p)
    gamma = _gamma(p, 14.0, alpha=ps.alpha)
    # moderate window around the waves: the closed tail form overflows on
    # the far-left cutoff region where it is irrelevant
    h = 1.0 / 32.0
    y = gamma.z2 - 15.0 + h * np.arange(int(round((gamma.z + 30.0) / h)) + 1)
    out = interaction_leading_term(gamma, ps, y)
    assert out["gap_h1"] < 0.08 * out["norm_G_h1"]

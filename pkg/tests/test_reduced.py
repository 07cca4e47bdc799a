import numpy as np
import pytest

from gkdvlab.ground_state import alpha_constant
from gkdvlab.reduced import (
    ShootingConfig, TrajectoryError, exact_law_state, integrate_reduced,
    log_law_exact, shoot_zeta, supercritical_dichotomy, tube_flags,
)

from conftest import profiles_for

ALPHA3 = 16.0


def test_exact_law_is_a_solution():
    s0 = exact_law_state(10.0, ALPHA3)
    t = np.geomspace(10.0, 1e4, 300)
    ser = integrate_reduced(s0, 1e4, t_eval=t)
    z_ref, mu_ref = log_law_exact(t, ALPHA3)
    assert np.max(np.abs(ser.z - z_ref)) < 1e-8
    assert np.max(np.abs(ser.mu - mu_ref)) < 1e-10


def test_first_integral_conserved():
    s0 = exact_law_state(10.0, ALPHA3)
    ser = integrate_reduced(s0, 1e4, t_eval=np.geomspace(10, 1e4, 200))
    fi = ser.mu ** 2 - 4.0 * ALPHA3 * np.exp(-ser.z)
    assert np.max(np.abs(fi - fi[0])) < 1e-8


def test_mean_quantities_decouple():
    # with a1 = a2 the means stay frozen at their initial values
    s0 = exact_law_state(10.0, ALPHA3, a1=7.0, a2=7.0, zbar=0.3, mubar=0.01)
    ser = integrate_reduced(s0, 100.0, t_eval=np.linspace(10, 100, 90))
    assert np.max(np.abs(ser.mubar - 0.01)) < 1e-12
    drift = ser.zbar - (0.3 + 0.01 * (ser.t - 10.0))
    assert np.max(np.abs(drift)) < 1e-10


def test_tube_flags():
    s = exact_law_state(100.0, ALPHA3)
    f = tube_flags(s)
    assert f["all"]
    bad = exact_law_state(100.0, ALPHA3, mubar=1.0)
    assert not tube_flags(bad)["mean_speed"]
    assert not tube_flags(bad)["all"]


def test_blow_down_detected():
    # shrink the separation: waves collide in finite backward-like fashion
    s0 = exact_law_state(10.0, ALPHA3)
    s0 = type(s0)(t=s0.t, mu1=-0.8, mu2=0.8, z1=s0.z1, z2=s0.z2,
                  alpha=ALPHA3, a1=0.0, a2=0.0)
    ser = integrate_reduced(s0, 1e3, t_eval=np.linspace(10, 1e3, 200))
    assert ser.blow_down
    assert ser.t_blow_down is not None


def test_roundtrip_integration():
    s0 = exact_law_state(20.0, ALPHA3, zbar=0.1)
    fwd = integrate_reduced(s0, 2000.0)
    s1 = fwd.state_at(-1)
    back = integrate_reduced(s1, 20.0)
    s2 = back.state_at(-1)
    assert abs(s2.z1 - s0.z1) < 1e-9
    assert abs(s2.mu1 - s0.mu1) < 1e-12


def test_shoot_exact_law_is_the_fixed_point():
    cfg = ShootingConfig(t_in=1000.0, t0=20.0)
    res = shoot_zeta(cfg, ALPHA3)
    # with no drift corrections the law itself survives: zeta_in = t_in
    assert res.zeta_in == pytest.approx(1000.0, abs=1e-6)
    assert not res.run.exited


def test_shoot_with_drift_constants_p3():
    ps = profiles_for(3)
    res = shoot_zeta(ShootingConfig(1000.0, 20.0), ps.alpha,
                     a1=ps.a1, a2=ps.a2)
    # antisymmetric drift (a1 + a2 = 0) preserves the law exactly
    assert res.zeta_in == pytest.approx(1000.0, abs=1e-6)


def test_shoot_with_drift_constants_p4():
    ps = profiles_for(4)
    res = shoot_zeta(ShootingConfig(1000.0, 20.0), ps.alpha,
                     a1=ps.a1, a2=ps.a2)
    assert abs(res.zeta_in - 1000.0) <= res.window
    assert not res.run.exited
    # frozen regression value for the selected initial separation
    assert res.zeta_in == pytest.approx(1010.14658799, abs=1e-4)


def test_shooting_config_validation():
    with pytest.raises(ValueError):
        ShootingConfig(t_in=5.0, t0=20.0)
    with pytest.raises(ValueError):
        ShootingConfig(t_in=100.0, t0=5.0)


def test_perturbed_speed_leaves_tube():
    # the law is unstable inside the tube: a 1% speed deficit exits
    s0 = exact_law_state(100.0, ALPHA3)
    s0 = type(s0)(t=s0.t, mu1=s0.mu1 * 0.99, mu2=s0.mu2 * 0.99,
                  z1=s0.z1, z2=s0.z2, alpha=ALPHA3, a1=0.0, a2=0.0)
    t = np.geomspace(100.0, 5e3, 400)
    ser = integrate_reduced(s0, 5e3, t_eval=t)
    ok = ser.tube_ok()
    assert ok[0]
    assert not ok[-1]


@pytest.mark.parametrize("e0", [0.6344446466, 1.6805705175])
def test_dichotomy_bounds(e0):
    out = supercritical_dichotomy(e0=e0, C=1.0, t_in=1000.0, t0=20.0)
    assert out.plus_bound_ok
    assert out.plus_half_ok
    assert out.minus_tube_ok
    assert out.lyapunov_ok
    # bisection cross-check brackets the forward-constructed witness
    assert out.bisect_gap <= 2.0 * 1000.0 ** -1.5


def test_dichotomy_unforced_is_zero():
    out = supercritical_dichotomy(e0=1.0, C=0.0, t_in=1000.0, t0=20.0)
    assert np.max(np.abs(out.a_plus)) == 0.0
    assert np.max(np.abs(out.a_minus)) == 0.0


def test_dichotomy_smallness_gate():
    with pytest.raises(TrajectoryError):
        supercritical_dichotomy(e0=0.2, C=1.0, t_in=1000.0, t0=20.0)

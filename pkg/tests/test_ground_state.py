import numpy as np
import pytest

from gkdvlab.ground_state import (
    NonlinearityPower, alpha_constant, eval_ground_state, quadrature_grid,
    scaled_ground_state, soliton_integrals, tail_constant, tail_remainder,
    theta_constant,
)

ALL_P = [3, 4, 6, 7]


@pytest.mark.parametrize("p", ALL_P)
def test_profile_solves_the_wave_equation(p):
    x, _ = quadrature_grid(30.0, 1.0 / 128.0)
    q, dq, d2q = eval_ground_state(p, x)
    assert np.max(np.abs(d2q + q ** p - q)) < 1e-10


@pytest.mark.parametrize("p", ALL_P)
def test_first_integral(p):
    x, _ = quadrature_grid(30.0, 1.0 / 128.0)
    q, dq, _ = eval_ground_state(p, x)
    fi = dq ** 2 - q ** 2 + 2.0 / (p + 1.0) * q ** (p + 1)
    assert np.max(np.abs(fi)) < 1e-12


@pytest.mark.parametrize("p", ALL_P)
def test_peak_value_and_symmetry(p):
    q0 = eval_ground_state(p, np.array([0.0]))[0][0]
    assert abs(q0 - ((p + 1) / 2.0) ** (1.0 / (p - 1.0))) < 1e-14
    x = np.linspace(0.1, 5.0, 7)
    qr = eval_ground_state(p, x)[0]
    ql = eval_ground_state(p, -x)[0]
    assert np.allclose(qr, ql, rtol=0, atol=1e-15)


@pytest.mark.parametrize("p", ALL_P)
def test_tail_asymptotics(p):
    # Q(x) ~ c_Q e^{-x}: the normalized tail defect decays at least like
    # e^{-2x}, so it is far below roundoff by x = 20
    x = np.array([20.0, 25.0])
    rem = tail_remainder(p, x)
    assert np.max(np.abs(rem)) < 1e-15
    q20 = eval_ground_state(p, x[:1])[0][0]
    assert q20 == pytest.approx(tail_constant(p) * np.exp(-20.0), rel=1e-12)


@pytest.mark.parametrize("p", ALL_P)
def test_quadrature_identities(p):
    ints = soliton_integrals(p)
    assert ints["int_q_lam"] == pytest.approx(
        ints["int_q_lam_identity"], rel=1e-8)
    assert ints["int_exp_qp"] == pytest.approx(
        ints["int_exp_qp_identity"], rel=1e-8)
    assert ints["int_lam"] == pytest.approx(
        ints["int_lam_identity"], rel=1e-8, abs=1e-10)
    for lhs, rhs in ints["power_ratio_checks"].values():
        assert lhs == pytest.approx(rhs, rel=1e-10)


@pytest.mark.parametrize("p", ALL_P)
def test_alpha_two_definitions_agree(p):
    al = alpha_constant(p)
    assert al["alpha"] == pytest.approx(al["alpha_ratio"], rel=1e-6)
    assert al["alpha"] > 0
    assert al["c"] == pytest.approx(np.sqrt(al["alpha"]), rel=1e-14)


def test_cubic_constants_are_exact():
    al = alpha_constant(3)
    assert al["c"] == pytest.approx(4.0, abs=1e-6)
    assert al["alpha"] == pytest.approx(16.0, abs=1e-5)
    assert abs(theta_constant(3)) < 1e-8


def test_theta_signs():
    # the plateau is negative on both sides of the critical power
    assert theta_constant(4) < 0
    assert theta_constant(6) < 0
    assert theta_constant(7) < 0


def test_sigma_convention():
    assert NonlinearityPower(3).sigma == -1
    assert NonlinearityPower(4).sigma == -1
    assert NonlinearityPower(6).sigma == 1
    assert NonlinearityPower(7).sigma == 1


def test_p5_rejected():
    with pytest.raises(ValueError):
        alpha_constant(5)
    with pytest.raises(ValueError):
        theta_constant(5)


@pytest.mark.parametrize("p", [3, 6])
def test_scaled_wave_satisfies_scaled_equation(p):
    v = 1.3
    x = np.linspace(-10, 10, 4001)
    q, dq, d2q = scaled_ground_state(p, v, x)
    assert np.max(np.abs(d2q + np.abs(q) ** (p - 1) * q - v * q)) < 1e-9

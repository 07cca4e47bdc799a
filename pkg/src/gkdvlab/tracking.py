"""Decomposition of a numerical field into the two-bubble ansatz plus error.

Given a field w on a uniform grid, find modulation parameters
Gamma = (mu1, mu2, z1, z2) such that eps = w - V(Gamma) satisfies the four
orthogonality conditions <eps, R1> = <eps, R1'> = <eps, R2> = <eps, R2'> = 0,
where Rk are the rescaled carrier waves of the ansatz.  Newton iteration
with an analytic Jacobian (quadratures of the Gamma-derivatives of V and of
the test functions).  On top of that: warm-started tracking along a PDE
run, projections on the rescaled edge modes for p > 5, the localized
nonlinear energy functional of the error, and the least-squares fit of the
logarithmic separation law.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .ansatz import AnsatzField, ModParams, build_V, _wave, _check_grid, _cutoff
from .ground_state import eval_ground_state
from .linearized import ProfileSet


class DecompositionError(Exception):
    """Raised when the Newton iteration cannot deliver a decomposition."""


# ---------------------------------------------------------------------------
# orthogonality system
# ---------------------------------------------------------------------------


def _wave_stack(p: int, mu: float, yc: np.ndarray):
    """Carrier wave, derivatives, and scale derivatives used in the Jacobian.

    Returns (R, R', R'', dR/dmu, d(R')/dmu).
    """
    v = 1.0 + mu
    m = 1.0 / (p - 1.0)
    s = np.sqrt(v) * yc
    q, dq, d2q = eval_ground_state(p, s)
    r = v ** m * q
    r1 = v ** (m + 0.5) * dq
    r2 = v ** (m + 1.0) * d2q
    dmu = v ** (m - 1.0) * (m * q + 0.5 * s * dq)
    dmu1 = v ** (m - 0.5) * ((m + 0.5) * dq + 0.5 * s * d2q)
    return r, r1, r2, dmu, dmu1


def _test_functions(gamma: ModParams, y: np.ndarray):
    """The four orthogonality test functions and their Gamma-derivatives.

    psi = (R1, R1', R2, R2'); returns (psi[4, n], dpsi[4, 4, n]) with the
    second index running over (mu1, mu2, z1, z2).
    """
    p = gamma.p
    n = len(y)
    w1 = _wave_stack(p, gamma.mu1, y - gamma.z1)
    w2 = _wave_stack(p, gamma.mu2, y - gamma.z2)
    psi = np.empty((4, n))
    psi[0], psi[1] = w1[0], w1[1]
    psi[2], psi[3] = w2[0], w2[1]
    dpsi = np.zeros((4, 4, n))
    dpsi[0, 0] = w1[3]          # dR1/dmu1
    dpsi[0, 2] = -w1[1]         # dR1/dz1
    dpsi[1, 0] = w1[4]          # d(R1')/dmu1
    dpsi[1, 2] = -w1[2]         # d(R1')/dz1
    dpsi[2, 1] = w2[3]
    dpsi[2, 3] = -w2[1]
    dpsi[3, 1] = w2[4]
    dpsi[3, 3] = -w2[2]
    return psi, dpsi


def _v_gamma_derivatives(fld: AnsatzField, profiles: ProfileSet):
    """Analytic derivatives of V with respect to (mu1, mu2, z1, z2)."""
    g = fld.params
    y = fld.y
    p, sigma, z = g.p, g.sigma, g.z
    dmu1 = _wave(p, g.mu1, y - g.z1)[4]
    dmu2 = _wave(p, g.mu2, y - g.z2)[4]
    r1d = _wave(p, g.mu1, y - g.z1)[1]
    r2d = _wave(p, g.mu2, y - g.z2)[1]
    ez = np.exp(-z)
    a1d = profiles.eval_profile(1, y - g.z1, deriv=1)
    a2d = profiles.eval_profile(2, y - g.z2, deriv=1)
    # d(phi)/dz1 = -(y/2) e^{-z/2} psi'(e^{-z/2} y + 1), and the opposite
    # sign for z2 (phi depends on Gamma only through z = z1 - z2)
    phi1 = np.exp(-0.5 * z) * fld.phi_tilde
    dr_dz1 = -fld.r - ez * a1d
    dr_dz2 = fld.r - ez * a2d
    dv = np.empty((4, len(y)))
    dv[0] = dmu1
    dv[1] = sigma * dmu2
    dv[2] = -r1d + dr_dz1 * fld.phi + fld.r * (-0.5 * y * phi1)
    dv[3] = -sigma * r2d + dr_dz2 * fld.phi + fld.r * (0.5 * y * phi1)
    return dv


@dataclass
class Decomposition:
    """Result of the orthogonal decomposition w = V(gamma) + eps."""

    gamma: ModParams
    y: np.ndarray
    h: float
    eps: np.ndarray
    V: np.ndarray
    ortho_residuals: np.ndarray     # the four <eps, psi_j> values
    eps_l2: float
    eps_h1: float
    iterations: int
    a_plus: Optional[np.ndarray] = None     # per-wave growing-mode masses
    a_minus: Optional[np.ndarray] = None
    energy: Optional[float] = None


def decompose(w: np.ndarray, y: np.ndarray, gamma_guess: ModParams,
              profiles: ProfileSet, tol: float = 1e-12, max_iter: int = 25,
              trust_h1: float = 0.3,
              with_projections: Optional[bool] = None) -> Decomposition:
    """Newton iteration on the four orthogonality conditions.

    The guess must be within the trust region (H1 distance <= trust_h1,
    separation z >= 6).  Converges quadratically; raises after max_iter
    iterations with the last residual in the message.
    """
    w = np.asarray(w, dtype=float)
    h = _check_grid(y)
    gamma = gamma_guess
    if gamma.z < 6.0:
        raise DecompositionError(f"separation z={gamma.z:.3f} < 6")
    fld = build_V(gamma, profiles, y)
    eps = w - fld.V
    d_eps = np.gradient(eps, h)
    h1 = np.sqrt(h * np.sum(eps ** 2) + h * np.sum(d_eps ** 2))
    if h1 > trust_h1:
        raise DecompositionError(
            f"guess outside trust region: ||w - V||_H1 = {h1:.3f} > {trust_h1}")

    last_res = np.inf
    for it in range(1, max_iter + 1):
        psi, dpsi = _test_functions(gamma, y)
        resid = h * psi @ eps
        # the roundoff floor of <eps, psi_j> is set by ||w||, not ||eps||
        scale = np.sqrt(h * np.sum(psi ** 2, axis=1)) * max(
            np.sqrt(h * np.sum(w ** 2)), np.sqrt(h * np.sum(eps ** 2)), 1e-30)
        last_res = float(np.max(np.abs(resid)))
        if np.all(np.abs(resid) <= tol * np.maximum(scale, 1e-14)):
            break
        dv = _v_gamma_derivatives(fld, profiles)
        jac = -h * psi @ dv.T + h * np.einsum("jln,n->jl", dpsi, eps)
        try:
            delta = np.linalg.solve(jac, resid)
        except np.linalg.LinAlgError as exc:
            raise DecompositionError(f"singular Jacobian: {exc}")
        gamma = ModParams(gamma.p, gamma.mu1 - delta[0], gamma.mu2 - delta[1],
                          gamma.z1 - delta[2], gamma.z2 - delta[3])
        fld = build_V(gamma, profiles, y)
        eps = w - fld.V
    else:
        raise DecompositionError(
            f"no convergence after {max_iter} iterations; "
            f"last residual {last_res:.3e}")

    d_eps = np.gradient(eps, h)
    dec = Decomposition(
        gamma=gamma, y=np.asarray(y, dtype=float), h=h, eps=eps, V=fld.V,
        ortho_residuals=resid, eps_l2=float(np.sqrt(h * np.sum(eps ** 2))),
        eps_h1=float(np.sqrt(h * np.sum(eps ** 2) + h * np.sum(d_eps ** 2))),
        iterations=it)
    if with_projections is None:
        with_projections = profiles.p > 5
    if with_projections:
        if profiles.exp_mode_plus is None:
            raise DecompositionError("profiles carry no edge-mode pair")
        dec.a_plus, dec.a_minus = exp_mode_projections(eps, y, gamma, profiles)
    return dec


def cold_start_guess(w: np.ndarray, y: np.ndarray, p: int) -> ModParams:
    """Initial Gamma from the two largest local extrema of |w|.

    Positions from the extrema (z1 > z2), scaling offsets from the
    amplitude ratio against the unit wave height Q(0).
    """
    w = np.asarray(w, dtype=float)
    a = np.abs(w)
    interior = (a[1:-1] >= a[:-2]) & (a[1:-1] >= a[2:])
    idx = np.flatnonzero(interior) + 1
    if len(idx) < 2:
        raise DecompositionError("fewer than two local extrema of |w|")
    top = idx[np.argsort(a[idx])[::-1][:2]]
    q0 = float(eval_ground_state(p, 0.0)[0])
    pos = sorted(float(y[i]) for i in top)
    z2, z1 = pos
    i1 = top[np.argmax([y[i] for i in top])]
    i2 = top[np.argmin([y[i] for i in top])]
    mu1 = (a[i1] / q0) ** (p - 1) - 1.0
    mu2 = (a[i2] / q0) ** (p - 1) - 1.0
    return ModParams(p, float(mu1), float(mu2), z1, z2)


def brute_force_residual_map(w: np.ndarray, y: np.ndarray,
                             profiles: ProfileSet,
                             mu1_vals, mu2_vals, z1_vals, z2_vals):
    """Sum of squared orthogonality residuals over a coarse Gamma lattice.

    Exhaustive oracle for the Newton solver: returns the lattice minimizer
    and the full residual array indexed [i_mu1, i_mu2, i_z1, i_z2].
    """
    h = _check_grid(y)
    out = np.empty((len(mu1_vals), len(mu2_vals), len(z1_vals), len(z2_vals)))
    for i, m1 in enumerate(mu1_vals):
        for j, m2 in enumerate(mu2_vals):
            for k, x1 in enumerate(z1_vals):
                for l, x2 in enumerate(z2_vals):
                    g = ModParams(profiles.p, m1, m2, x1, x2)
                    fld = build_V(g, profiles, y)
                    eps = w - fld.V
                    psi, _ = _test_functions(g, y)
                    out[i, j, k, l] = float(np.sum((h * psi @ eps) ** 2))
    imin = np.unravel_index(np.argmin(out), out.shape)
    best = ModParams(profiles.p, float(mu1_vals[imin[0]]),
                     float(mu2_vals[imin[1]]), float(z1_vals[imin[2]]),
                     float(z2_vals[imin[3]]))
    return best, out


# ---------------------------------------------------------------------------
# edge-mode projections (p > 5)
# ---------------------------------------------------------------------------


def exp_mode_projections(eps: np.ndarray, y: np.ndarray, gamma: ModParams,
                         profiles: ProfileSet):
    """Projections of eps on the rescaled edge modes at each bubble.

    The mode at bubble k is Z^{pm}(sqrt(1+mu_k)(y - z_k)), scaled by
    (1+mu_k)^{1/4} to preserve the unit L2 norm.
    """
    h = _check_grid(y)
    gx = profiles.grid.x
    sp_p = CubicSpline(gx, profiles.exp_mode_plus, extrapolate=False)
    sp_m = CubicSpline(gx, profiles.exp_mode_minus, extrapolate=False)
    a_plus = np.empty(2)
    a_minus = np.empty(2)
    for k, (mu, zk) in enumerate([(gamma.mu1, gamma.z1),
                                  (gamma.mu2, gamma.z2)]):
        v = 1.0 + mu
        s = np.sqrt(v) * (y - zk)
        zp = np.nan_to_num(sp_p(s)) * v ** 0.25
        zm = np.nan_to_num(sp_m(s)) * v ** 0.25
        a_plus[k] = h * np.sum(eps * zp)
        a_minus[k] = h * np.sum(eps * zm)
    return a_plus, a_minus


# ---------------------------------------------------------------------------
# localized energy functional
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyWeights:
    """Smooth left/right partition weights for the error energy.

    phi(y) = (2/pi) arctan(e^{8 rho y}) rises from 0 to 1 with
    phi(-y) = 1 - phi(y); the derivative bounds |phi''| <= 8 rho |phi'| and
    |phi'''| <= (8 rho)^2 |phi'| make the localization errors small.
    """

    rho: float = 1.0 / 32.0

    def phi(self, y: np.ndarray) -> np.ndarray:
        return (2.0 / np.pi) * np.arctan(np.exp(8.0 * self.rho * np.asarray(y)))

    def phi_prime(self, y: np.ndarray) -> np.ndarray:
        return (8.0 * self.rho / np.pi) / np.cosh(8.0 * self.rho *
                                                  np.asarray(y))

    def big_phi(self, y: np.ndarray, mu1: float, mu2: float):
        """The speed-weighted pair (Phi1, Phi2) entering the functional."""
        ph = self.phi(y)
        w1 = 1.0 / (1.0 + mu1) ** 2
        w2 = 1.0 / (1.0 + mu2) ** 2
        phi1 = ph * w1 + (1.0 - ph) * w2
        phi2 = mu1 * ph * w1 + mu2 * (1.0 - ph) * w2
        return phi1, phi2


def energy_functional(dec: Decomposition,
                      weights: Optional[EnergyWeights] = None) -> float:
    """Localized nonlinear energy of the error around the two bubbles.

    W = int [ (eps_y^2 + eps^2 - (2/(p+1)) (|V+eps|^{p+1} - |V|^{p+1}
              - (p+1)|V|^{p-1} V eps)) Phi1 + eps^2 Phi2 ] dy
    """
    if weights is None:
        weights = EnergyWeights()
    g = dec.gamma
    p = g.p
    y, h, eps, V = dec.y, dec.h, dec.eps, dec.V
    phi1, phi2 = weights.big_phi(y, g.mu1, g.mu2)
    d_eps = np.gradient(eps, h)
    nl = (np.abs(V + eps) ** (p + 1) - np.abs(V) ** (p + 1)
          - (p + 1) * np.abs(V) ** (p - 1) * V * eps)
    integrand = (d_eps ** 2 + eps ** 2 - 2.0 / (p + 1) * nl) * phi1 \
        + eps ** 2 * phi2
    return float(h * np.sum(integrand))


# ---------------------------------------------------------------------------
# tracking along a run
# ---------------------------------------------------------------------------

CSV_HEADER = ["t", "mu1", "mu2", "z1", "z2", "z", "zbar", "mu", "mubar",
              "eps_l2", "eps_h1", "W",
              "aplus1", "aplus2", "aminus1", "aminus2"]


@dataclass
class TrackPoint:
    t: float
    dec: Decomposition

    def row(self) -> list:
        g = self.dec.gamma
        sup = [""] * 4
        if self.dec.a_plus is not None:
            sup = [self.dec.a_plus[0], self.dec.a_plus[1],
                   self.dec.a_minus[0], self.dec.a_minus[1]]
        return [self.t, g.mu1, g.mu2, g.z1, g.z2, g.z, g.zbar, g.mu, g.mubar,
                self.dec.eps_l2, self.dec.eps_h1,
                self.dec.energy if self.dec.energy is not None else "",
                *sup]


@dataclass
class TrackSeries:
    points: List[TrackPoint] = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def column(self, name: str) -> np.ndarray:
        i = CSV_HEADER.index(name)
        return np.array([pt.row()[i] for pt in self.points], dtype=float)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(CSV_HEADER)
            for pt in self.points:
                wr.writerow(pt.row())


def track(states, y: np.ndarray, gamma0: ModParams, profiles: ProfileSet,
          with_energy: bool = True,
          on_failure: str = "raise") -> TrackSeries:
    """Warm-started decomposition along a sequence of (t, w) samples.

    `states` yields pairs (t, w) in increasing time order.  Each
    decomposition starts from the previous parameters.  On Newton failure:
    'raise' propagates, 'stop' returns the series collected so far.
    """
    series = TrackSeries()
    gamma = gamma0
    for t, w in states:
        try:
            dec = decompose(w, y, gamma, profiles)
        except DecompositionError:
            if on_failure == "stop":
                break
            raise
        if with_energy:
            dec.energy = energy_functional(dec)
        series.points.append(TrackPoint(t=float(t), dec=dec))
        gamma = dec.gamma
    return series


# ---------------------------------------------------------------------------
# log-law fit
# ---------------------------------------------------------------------------


def fit_log_law(t: np.ndarray, z: np.ndarray, window=None,
                alpha_ref: Optional[float] = None) -> dict:
    """One-parameter least squares of e^{z/2} against c * t.

    Returns c_fit, alpha_fit = c_fit^2, per-sample residuals, and, when a
    reference alpha is given, the relative deviation of c_fit from
    sqrt(alpha_ref).
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    if window is not None:
        m = (t >= window[0]) & (t <= window[1])
        t, z = t[m], z[m]
    if len(t) < 50:
        raise ValueError(f"need >= 50 samples in the fit window, got {len(t)}")
    if np.any(np.diff(z) <= 0):
        raise ValueError("separation series is not increasing on the window")
    g = np.exp(0.5 * z)
    c = float(np.sum(t * g) / np.sum(t * t))
    res = g - c * t
    out = {
        "c_fit": c,
        "alpha_fit": c * c,
        "residuals": res,
        "rel_rms": float(np.sqrt(np.mean((res / g) ** 2))),
        "n_samples": int(len(t)),
        "window": (float(t[0]), float(t[-1])),
    }
    if alpha_ref is not None:
        root = np.sqrt(alpha_ref)
        out["rel_dev"] = float(abs(c - root) / root)
    return out

import numpy as np
import pytest

from gkdvlab.spectral import (
    DT_SAFETY, FieldState, Frame, PeriodicGrid, SolverConfig, evolve,
    invariants, load_snapshot, save_snapshot, soliton_field, two_wave_field,
)

GRID = PeriodicGrid(64.0, 2048)
DT_MAX = DT_SAFETY * GRID.h ** 3


def _h1(grid, f):
    df = np.fft.irfft(1j * grid.k * np.fft.rfft(f), n=grid.n)
    return float(np.sqrt(grid.quad(f ** 2) + grid.quad(df ** 2)))


def test_grid_validation():
    with pytest.raises(ValueError):
        PeriodicGrid(64.0, 2000)       # not a power of two
    with pytest.raises(ValueError):
        PeriodicGrid(4.0, 32)          # spacing too coarse


def test_dt_bound_enforced():
    cfg = SolverConfig(dt=10.0 * DT_MAX, t_end=1.0)
    with pytest.raises(ValueError):
        cfg.validate(GRID)


def test_soliton_is_steady_in_renormalized_frame():
    w0 = soliton_field(3, GRID, center=0.0, speed=1.0)
    st = FieldState(t=0.0, w=w0, grid=GRID, p=3, frame=Frame.RENORMALIZED)
    out = evolve(st, 10.0, SolverConfig(dt=2e-4, t_end=10.0))
    assert _h1(GRID, out.w - w0) < 1e-6


def test_soliton_travels_in_lab_frame():
    v = 1.0
    w0 = soliton_field(3, GRID, center=-10.0, speed=v)
    st = FieldState(t=0.0, w=w0, grid=GRID, p=3, frame=Frame.LAB)
    out = evolve(st, 5.0, SolverConfig(dt=2e-4, t_end=5.0))
    target = soliton_field(3, GRID, center=-10.0 + v * 5.0, speed=v)
    assert _h1(GRID, out.w - target) < 1e-6


def test_invariants_conserved():
    w0 = two_wave_field(3, GRID, 6.0, -6.0, -1)
    st = FieldState(t=0.0, w=w0, grid=GRID, p=3, frame=Frame.RENORMALIZED)
    i0 = invariants(st)
    out = evolve(st, 5.0, SolverConfig(dt=2e-4, t_end=5.0))
    i1 = invariants(out)
    assert abs(i1["mass"] - i0["mass"]) / abs(i0["mass"]) < 1e-9
    assert abs(i1["energy"] - i0["energy"]) / abs(i0["energy"]) < 1e-8


def test_backward_evolution_roundtrip():
    w0 = two_wave_field(3, GRID, 5.0, -5.0, -1)
    st = FieldState(t=0.0, w=w0, grid=GRID, p=3, frame=Frame.RENORMALIZED)
    cfg = SolverConfig(dt=2e-4, t_end=2.0)
    fwd = evolve(st, 2.0, cfg)
    back = evolve(fwd, 0.0, SolverConfig(dt=2e-4, t_end=0.0))
    assert _h1(GRID, back.w - w0) < 1e-8


def test_frame_conversion_roundtrip():
    w0 = soliton_field(3, GRID, center=3.0, speed=1.0)
    st = FieldState(t=2.5, w=w0, grid=GRID, p=3, frame=Frame.RENORMALIZED)
    lab = st.to_lab()
    assert lab.frame is Frame.LAB
    back = lab.to_renormalized()
    assert np.max(np.abs(back.w - w0)) < 1e-10


def test_dt_convergence_order():
    # two interacting waves in the lab frame; errors measured against a
    # reference at dt/16.  Fourth-order stepping: halving dt gains ~16x.
    grid = GRID
    bound = DT_SAFETY * grid.h ** 3
    w0 = (soliton_field(3, grid, center=-20.0, speed=4.0)
          + soliton_field(3, grid, center=-5.0, speed=1.0))
    st = FieldState(t=0.0, w=w0, grid=grid, p=3, frame=Frame.LAB)
    t_end = 4.0

    def run(dt):
        n = int(round(t_end / dt))
        return evolve(st, n * dt, SolverConfig(dt=dt, t_end=n * dt)).w

    ref = run(bound / 16.0)
    e2 = _h1(grid, run(bound / 2.0) - ref)
    e4 = _h1(grid, run(bound / 4.0) - ref)
    ratio = e2 / e4
    assert 12.0 <= ratio <= 20.0


def test_callback_cadence():
    w0 = soliton_field(3, GRID, center=0.0, speed=1.0)
    st = FieldState(t=0.0, w=w0, grid=GRID, p=3, frame=Frame.RENORMALIZED)
    seen = []
    evolve(st, 1.0, SolverConfig(dt=2e-4, t_end=1.0),
           callback=lambda s: seen.append(s.t), callback_every=0.25)
    assert len(seen) == 4
    assert seen[-1] == pytest.approx(1.0, abs=1e-9)


def test_snapshot_roundtrip_bit_exact(tmp_path):
    w0 = two_wave_field(4, GRID, 5.0, -5.0, -1)
    st = FieldState(t=3.25, w=w0, grid=GRID, p=4, frame=Frame.LAB)
    path = tmp_path / "field.bin"
    save_snapshot(path, st)
    back = load_snapshot(path)
    assert back.t == st.t
    assert back.p == st.p
    assert back.frame is st.frame
    assert back.grid.half_length == GRID.half_length
    assert back.grid.n == GRID.n
    assert np.array_equal(back.w, st.w)

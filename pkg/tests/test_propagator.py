import numpy as np
import pytest

from fioprop import fio
from fioprop.errors import PicardDiverges
from fioprop.grid import FreqGrid, SpaceGrid
from fioprop.propagator import (
    _cumulative_weights,
    build_propagator_pipeline,
    picard_tail_ratios,
    residual_comparison,
    solve_volterra,
    verify_main_theorem,
)
from fioprop.reference import build_U_reference


@pytest.fixture(scope="module")
def grid():
    return SpaceGrid(64, 60.0)


def test_cumulative_weights_linear_exact():
    t = np.linspace(2.0, 6.0, 9)
    w = _cumulative_weights(t)
    f = 3.0 * t + 1.0
    exact = 1.5 * (t**2 - 4.0) + (t - 2.0)
    assert np.max(np.abs(w @ f - exact)) < 1e-12


def test_cumulative_weights_smooth_accuracy():
    t = np.linspace(0.0, 1.0, 17)
    w = _cumulative_weights(t)
    err_simpson = np.max(np.abs(w @ np.exp(t) - (np.exp(t) - 1.0)))
    from fioprop.propagator import _trapezoid_weights

    err_trap = np.max(np.abs(_trapezoid_weights(t) @ np.exp(t) - (np.exp(t) - 1.0)))
    assert err_simpson < err_trap / 50.0


def test_nonuniform_falls_back_to_trapezoid():
    t = np.array([0.0, 0.5, 0.6, 1.0])
    w = _cumulative_weights(t)
    f = np.ones(4)
    assert np.max(np.abs(w @ f - t)) < 1e-12


def test_free_volterra_reproduces_free_kernel(free, grid):
    freq = FreqGrid(grid)
    t_lattice = np.linspace(2.0, 4.0, 5)
    phases, e_kernels, g_kernels, vol = build_propagator_pipeline(
        free, grid, 2.0, t_lattice, flow_tol=1e-11, solve_tol=1e-11
    )
    assert np.max(np.abs(vol.kernels[0].mat - np.eye(64))) < 1e-8
    psi = fio.gaussian_state(grid, 0.0, 0.3, 1.5)
    from fioprop.reference import free_evolve

    out = vol.kernels[-1].apply(psi)
    expect = free_evolve(grid, psi, 2.0, 4.0)
    assert np.sqrt(grid.spacing * np.sum(np.abs(out - expect) ** 2)) < 1e-5
    assert vol.iterations <= 3  # G = 0: converges immediately


def test_volterra_against_reference(weak_bump, grid):
    t_lattice = np.linspace(10.0, 20.0, 17)
    _, _, _, vol = build_propagator_pipeline(weak_bump, grid, 10.0, t_lattice)
    u_ref = build_U_reference(weak_bump, grid, 10.0, 20.0, dt_ref=0.01)
    diff = fio.operator_norm(vol.kernels[-1].mat - u_ref.mat)
    assert diff < 1e-3
    ratios = picard_tail_ratios(vol.increments)
    assert max(ratios) < 0.9


def test_volterra_lattice_validation(free, grid):
    freq = FreqGrid(grid)
    from fioprop.phase import build_phase_family

    t_lattice = np.linspace(3.0, 4.0, 3)
    phases = build_phase_family(free, 3.0, t_lattice, grid.nodes, freq.nodes)
    es = [fio.build_E_kernel(p, grid) for p in phases]
    gs = [fio.build_G_kernel(free, p, grid) for p in phases]
    with pytest.raises(ValueError):
        solve_volterra(es, gs, 2.5, t_lattice)
    with pytest.raises(ValueError):
        solve_volterra(es[:2], gs, 3.0, t_lattice)


def test_picard_divergence_detected(grid):
    # Synthetic families with a huge defect make the sweep increments grow.
    n = grid.n_points
    eye = np.eye(n, dtype=complex)
    t_lattice = np.linspace(0.0, 4.0, 9)
    es = [fio.OperatorKernel(eye.copy(), grid, "E", 0.0, t) for t in t_lattice]
    gs = [fio.OperatorKernel(2.0j * eye, grid, "G", 0.0, t) for t in t_lattice]
    with pytest.raises(PicardDiverges):
        solve_volterra(es, gs, 0.0, t_lattice, tol=1e-12, max_iter=40)


def test_residual_comparison(weak_bump, grid):
    # Same finite-difference defect stencil applied to both propagator
    # routes: the constructed one stays within 10x of the reference.
    r_vol, r_ref = residual_comparison(
        weak_bump, grid, 10.0, 14.0, n_nodes=17, delta=0.05, dt_ref=0.005
    )
    assert r_vol < 10.0 * r_ref


def test_main_theorem_zero_model_floor(free):
    grid = SpaceGrid(64, 60.0)
    rep = verify_main_theorem(
        free, grid, [2.0, 4.0], horizon=2.0, dtau=0.5, max_span=10.0,
        xi_cut=0.5, y_cut=15.0, dt_ref=0.01,
    )
    assert rep.passed
    for cid in ("amplitude.sup-deviation", "amplitude.seminorm-1", "amplitude.seminorm-2"):
        assert max(rep.row(cid).sups) < 1e-5

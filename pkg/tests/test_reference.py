import numpy as np
import pytest

from fioprop import fio
from fioprop.errors import BoundaryLeak
from fioprop.grid import FreqGrid, SpaceGrid
from fioprop.potential import make_gauss_well
from fioprop.reference import (
    build_U_reference,
    build_U_reference_family,
    free_evolve,
    free_gaussian_evolved,
    split_step_evolve,
    split_step_run,
)


@pytest.fixture(scope="module")
def grid():
    return SpaceGrid(128, 20.0)


def test_free_gaussian_spreading(grid):
    # Evolved density variance: sigma^2 (1 + span^2 / sigma^4) / 2 around 0.
    psi = fio.gaussian_state(grid, 0.0, 0.0, 1.0)
    span = 2.0
    out = free_evolve(grid, psi, 1.0, 3.0)
    x = grid.nodes
    rho = np.abs(out) ** 2
    rho /= np.sum(rho) * grid.spacing
    var = np.sum(x**2 * rho) * grid.spacing
    expect = (1.0 + span**2) / 2.0  # width^2 = 1 + span^2, var = width^2/2
    assert var == pytest.approx(expect, rel=1e-6)


def test_free_evolve_identity_and_mode(grid):
    psi = fio.gaussian_state(grid, 0.5, 0.3, 1.2)
    assert np.max(np.abs(free_evolve(grid, psi, 4.0, 4.0) - psi)) < 1e-14
    freq = FreqGrid(grid)
    k = 70
    mode = np.exp(1j * freq.nodes[k] * grid.nodes)
    out = free_evolve(grid, mode, 2.0, 5.0)
    expect = np.exp(-0.5j * 3.0 * freq.nodes[k] ** 2) * mode
    assert np.max(np.abs(out - expect)) < 1e-12


def test_free_gaussian_closed_form_matches_spectral(grid):
    psi0 = free_gaussian_evolved(grid.nodes, 0.0, 0.0, 0.4, 1.0)
    spectral = free_evolve(grid, psi0, 0.0, 2.5)
    closed = free_gaussian_evolved(grid.nodes, 2.5, 0.0, 0.4, 1.0)
    assert np.max(np.abs(spectral - closed)) < 1e-10


def test_split_step_free_matches_spectral(grid, free):
    psi = fio.gaussian_state(grid, 0.0, 0.5, 1.0)
    a = split_step_evolve(free, grid, psi, 1.0, 3.0, dt_ref=0.01)
    b = free_evolve(grid, psi, 1.0, 3.0)
    assert np.sqrt(grid.spacing * np.sum(np.abs(a - b) ** 2)) < 1e-12


def test_split_step_second_order(grid):
    # Step-halving regression against a fine reference run: global error
    # should scale like dt^2 (fitted order 2.0 +- 0.1).
    well = make_gauss_well(depth=-1.0, width=2.0)
    psi = fio.gaussian_state(grid, 1.0, 0.0, 1.0)
    ref = split_step_evolve(well, grid, psi, 0.0, 2.0, dt_ref=1.0 / 4096)
    errs, dts = [], []
    for k in (4, 5, 6, 7):
        dt = 2.0**-k
        out = split_step_evolve(well, grid, psi, 0.0, 2.0, dt_ref=dt)
        errs.append(np.sqrt(grid.spacing * np.sum(np.abs(out - ref) ** 2)))
        dts.append(dt)
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


def test_split_step_self_convergence(grid, bump):
    psi = fio.gaussian_state(grid, 0.0, 0.4, 1.0)
    a = split_step_evolve(bump, grid, psi, 10.0, 12.0, dt_ref=2e-3)
    b = split_step_evolve(bump, grid, psi, 10.0, 12.0, dt_ref=1e-3)
    assert np.sqrt(grid.spacing * np.sum(np.abs(a - b) ** 2)) < 1e-8


def test_norm_conservation_and_diagnostics(grid, bump):
    psi = fio.gaussian_state(grid, 0.0, 0.3, 1.0)
    run = split_step_run(bump, grid, psi, 10.0, 12.0, dt_ref=0.01)
    assert run.norm_drift < 1e-12
    assert run.boundary_mass < 1e-10
    assert run.model_name == "scaled_bump"


def test_boundary_leak_detection(grid, free):
    psi = fio.gaussian_state(grid, 12.0, 3.0, 1.0)
    with pytest.raises(BoundaryLeak):
        split_step_evolve(free, grid, psi, 0.0, 4.0, dt_ref=0.01, check_every=5)


def test_forward_only(grid, bump):
    psi = fio.gaussian_state(grid, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        split_step_evolve(bump, grid, psi, 5.0, 4.0)


def test_reference_matrix_free_case(grid, free):
    u = build_U_reference(free, grid, 2.0, 4.0, dt_ref=0.01)
    psi = fio.gaussian_state(grid, 0.0, 0.4, 1.0)
    expect = free_evolve(grid, psi, 2.0, 4.0)
    assert np.sqrt(grid.spacing * np.sum(np.abs(u.apply(psi) - expect) ** 2)) < 1e-6


def test_reference_matrix_identity_at_s(grid, bump):
    u = build_U_reference_family(bump, grid, 5.0, [5.0])[0]
    assert np.max(np.abs(u.mat - np.eye(grid.n_points))) < 1e-12


def test_reference_unitarity(grid, bump):
    u = build_U_reference(bump, grid, 10.0, 13.0, dt_ref=0.01)
    defect = u.mat.conj().T @ u.mat - np.eye(grid.n_points)
    assert np.linalg.norm(defect, 2) < 1e-6


def test_reference_composition(grid, bump):
    # U(t, s) = U(t, r) U(r, s) within 1e-6.
    dt = 0.005
    u_ts = build_U_reference(bump, grid, 10.0, 14.0, dt_ref=dt)
    u_rs = build_U_reference(bump, grid, 10.0, 12.0, dt_ref=dt)
    u_tr = build_U_reference(bump, grid, 12.0, 14.0, dt_ref=dt)
    assert np.linalg.norm(u_ts.mat - u_tr.mat @ u_rs.mat, 2) < 1e-6


def test_size_limit(bump):
    big = SpaceGrid(1024, 100.0)
    with pytest.raises(ValueError):
        build_U_reference(bump, big, 10.0, 11.0)


def test_snapshot_times_validated(grid, bump):
    with pytest.raises(ValueError):
        build_U_reference_family(bump, grid, 10.0, [12.0, 11.0])
    with pytest.raises(ValueError):
        build_U_reference_family(bump, grid, 10.0, [9.0])

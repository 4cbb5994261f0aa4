"""Acceptance suite: one test per shipped criterion, with pass/fail lines.

Each criterion is exercised at its stated scale and tolerance; the heavy
pipelines run once per session through module-scoped fixtures.  Run with
``pytest -s tests/test_acceptance.py`` to see the summary lines inline.
"""

import json
import time

import numpy as np
import pytest

from fioprop import fio
from fioprop.cli import main as cli_main
from fioprop.config import ExperimentConfig
from fioprop.grid import SpaceGrid
from fioprop.phase import build_phase
from fioprop.potential import zero_potential
from fioprop.reference import free_gaussian_evolved
from fioprop.suites import run_main, run_prop21, run_prop22, run_prop23, run_thm31

BUMP_PARAMS = {"epsilon": 0.5, "amplitude": 0.5, "width": 1.0}
WEAK_PARAMS = {"epsilon": 0.5, "amplitude": 0.25, "width": 1.0}


def _line(tag, ok, detail):
    print(f"ACCEPTANCE {tag}: {'PASS' if ok else 'FAIL'} ({detail})")


@pytest.fixture(scope="module")
def estimates_cfg():
    return ExperimentConfig(model="scaled_bump", model_params=BUMP_PARAMS).validate()


@pytest.fixture(scope="module")
def kernel_cfg():
    return ExperimentConfig(
        model="scaled_bump", model_params=WEAK_PARAMS, t_start=20.0,
        T_list=[10.0, 20.0, 40.0, 80.0], cross_T=20.0,
    ).validate()


@pytest.fixture(scope="module")
def thm31_report(kernel_cfg):
    return run_thm31(kernel_cfg)


@pytest.fixture(scope="module")
def main_report(kernel_cfg):
    return run_main(kernel_cfg)


def test_criterion_1_free_particle_exactness():
    t0 = time.perf_counter()
    grid = SpaceGrid(256, 20.0)
    from fioprop.grid import FreqGrid

    freq = FreqGrid(grid)
    free = zero_potential()
    ph = build_phase(free, 1.0, 3.0, grid.nodes, freq.nodes, tol=1e-12)
    e = fio.build_E_kernel(ph, grid)
    psi = fio.gaussian_state(grid, 0.0, 0.5, 1.0)
    fio.assert_admissible(grid, psi)
    evolved = e.apply(psi)
    exact = free_gaussian_evolved(grid.nodes, 2.0, 0.0, 0.5, 1.0)
    exact /= np.sqrt(grid.spacing * np.sum(np.abs(exact) ** 2))
    rel_l2 = np.sqrt(grid.spacing * np.sum(np.abs(evolved - exact) ** 2))
    amp = fio.extract_amplitude(e, ph)
    sup_u = float(np.max(np.abs(amp.u - 1.0)))
    wall = time.perf_counter() - t0
    ok = rel_l2 < 1e-6 and sup_u < 1e-5 and wall < 60.0
    _line("1 free-particle exactness", ok,
          f"rel_l2={rel_l2:.2e}, sup|u-1|={sup_u:.2e}, wall={wall:.1f}s")
    assert rel_l2 < 1e-6
    assert sup_u < 1e-5
    assert wall < 60.0


def test_criterion_2_hamilton_jacobi_residuals(estimates_cfg):
    rep = run_prop23(estimates_cfg)
    sups = {(r.check_id, tuple(r.scan_values)): r.sups[0] for r in rep.rows}
    worst = max(sups.values())
    ok = rep.passed and worst < 1e-4 and rep.wall_seconds < 300.0
    _line("2 Hamilton-Jacobi residuals", ok,
          f"worst sup={worst:.2e} over {sorted(set(v for _, v in sups))}, "
          f"wall={rep.wall_seconds:.1f}s")
    assert rep.passed
    assert worst < 1e-4
    assert rep.wall_seconds < 300.0


def test_criterion_3_flow_and_inverse_estimates(estimates_cfg):
    rep21 = run_prop21(estimates_cfg)
    rep22 = run_prop22(estimates_cfg)
    eta_fit = rep22.row("inverse.eta-deviation-fit").fitted_exponent
    wall = rep21.wall_seconds + rep22.wall_seconds
    ok = rep21.passed and rep22.passed and abs(eta_fit + 0.5) <= 0.2 and wall < 600.0
    _line("3 flow/inverse-map estimates", ok,
          f"eta-fit={eta_fit:.3f} (target -0.5 +- 0.2), wall={wall:.1f}s")
    assert rep21.passed, [r.check_id for r in rep21.rows if not r.passed]
    assert rep22.passed, [r.check_id for r in rep22.rows if not r.passed]
    assert eta_fit == pytest.approx(-0.5, abs=0.2)
    assert wall < 600.0


def test_criterion_4_defect_decay(thm31_report):
    rep = thm31_report
    slope = rep.row("defect.decay-slope").fitted_exponent
    e_norm = max(rep.row("parametrix.norm-bounded").sups)
    ok = rep.passed and slope <= -1.3 and e_norm <= 1.1 and rep.wall_seconds < 900.0
    _line("4 defect decay", ok,
          f"slope={slope:.3f} (<= -1.3), max||E||={e_norm:.4f} (<= 1.1), "
          f"wall={rep.wall_seconds:.1f}s")
    assert slope <= -1.3
    assert e_norm <= 1.1
    assert rep.passed
    assert rep.wall_seconds < 900.0


def test_criterion_5_uniform_amplitude_bound(main_report):
    rep = main_report
    m0 = rep.row("amplitude.sup-deviation")
    fit = rep.row("amplitude.sup-deviation-fit").fitted_exponent
    agree = max(rep.row("amplitude.route-agreement").sups)
    m1 = rep.row("amplitude.seminorm-1")
    m2 = rep.row("amplitude.seminorm-2")
    ok = (
        m0.passed and fit <= -0.25 and m1.passed and m2.passed
        and agree < 1e-2 and rep.wall_seconds < 3600.0
    )
    _line("5 uniform amplitude bound", ok,
          f"m0={[f'{v:.3e}' for v in m0.sups]}, fit={fit:.3f} (<= -0.25), "
          f"route-agreement={agree:.2e} (< 1e-2), wall={rep.wall_seconds:.1f}s")
    assert m0.passed
    assert fit <= -0.25
    assert m1.passed and all(np.isfinite(m1.sups))
    assert m2.passed and all(np.isfinite(m2.sups))
    assert agree < 1e-2
    assert rep.wall_seconds < 3600.0


def test_criterion_6_cross_oracle_propagator(main_report):
    rep = main_report
    diff = rep.row("propagator.reference-agreement").sups[0]
    unit = rep.row("propagator.reference-unitarity").sups[0]
    ok = diff < 1e-3 and unit < 1e-6
    _line("6 cross-oracle propagator", ok,
          f"||U_volterra - U_reference||={diff:.2e} (< 1e-3) at (20, 40), "
          f"unitarity defect={unit:.2e} (< 1e-6)")
    assert diff < 1e-3
    assert unit < 1e-6


def test_criterion_7_failure_mode_signaling(tmp_path, capsys):
    # The contraction factor scales with the coupling; at unit amplitude a
    # threshold time of 1 is squarely outside the admissible regime.
    data = {
        "model": "scaled_bump",
        "model_params": {"epsilon": 0.5, "amplitude": 1.0, "width": 1.0},
        "suites": ["prop22"],
        "t_start": 1.0,
        "n_s_scan": 8,
        "lattice_points": 5,
        "out_dir": str(tmp_path / "out"),
    }
    cfg_path = tmp_path / "t1.json"
    cfg_path.write_text(json.dumps(data))
    code = cli_main(["run", "--config", str(cfg_path)])
    err = capsys.readouterr().err
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    ok = (
        code == 3
        and "contraction" in err.lower()
        and summary["error"]["type"] == "ContractionFailure"
    )
    _line("7 failure-mode signaling", ok,
          f"exit={code}, reported={summary['error']['type']}")
    assert code == 3
    assert "contraction" in err.lower()
    assert "threshold time" in summary["error"]["message"].lower()

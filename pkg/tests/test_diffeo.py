import numpy as np
import pytest

from fioprop.diffeo import measure_prop22, solve_eta, solve_y, solve_y_batch
from fioprop.errors import ContractionFailure
from fioprop.potential import bracket, make_scaled_bump


def test_free_inverse_positions(free):
    s = solve_y(free, 2.0, 5.0, 1.0, -1.0)
    assert s.y == pytest.approx(-2.0, abs=1e-12)
    assert s.eta == pytest.approx(-1.0, abs=1e-12)
    assert s.iterations <= 2


def test_free_inverse_momenta(free):
    s = solve_eta(free, 2.0, 5.0, 1.0, -1.0)
    assert s.eta == pytest.approx(-1.0, abs=1e-12)
    assert s.y == pytest.approx(-2.0, abs=1e-12)


def test_same_time_is_identity(bump):
    sy = solve_y(bump, 8.0, 8.0, 1.5, -0.5)
    assert sy.y == 1.5 and sy.eta == -0.5
    se = solve_eta(bump, 8.0, 8.0, 1.5, -0.5)
    assert se.eta == -0.5 and se.y == 1.5


def test_bump_inverse_residuals(bump):
    # Defining residual |q(s,t,y,xi) - x| below 1e-10 (1 + |x| + (t-s)|xi|),
    # cross residual |p(t,s,x,eta) - xi| likewise.
    s, t, x, xi = 10.0, 40.0, 0.0, 1.0
    smp = solve_y(bump, s, t, x, xi)
    scale = 1.0 + abs(x) + (t - s) * abs(xi)
    assert smp.residual_y < 1e-10 * scale
    assert smp.residual_eta < 1e-8 * scale


def test_two_routes_agree(bump):
    a = solve_y(bump, 10.0, 35.0, 1.2, -0.8)
    b = solve_eta(bump, 10.0, 35.0, 1.2, -0.8)
    assert a.y == pytest.approx(b.y, abs=1e-8)
    assert a.eta == pytest.approx(b.eta, abs=1e-8)


def test_eta_deviation_decays(bump):
    # |eta - xi| <= const <s>^(-eps): the normalized value is comparable
    # across a decade of s.
    vals = []
    for s in (10.0, 100.0):
        smp = solve_eta(bump, s, 4.0 * s, 0.0, 1.0)
        vals.append(abs(smp.eta - 1.0) * bracket(s) ** 0.5)
    assert vals[1] < vals[0] * 1.1
    assert vals[0] > 0.01  # genuinely nonzero


def test_contraction_failure_at_small_threshold():
    # At threshold time T = 1 the first-iterate contraction factor exceeds
    # 1/2 and the inversion refuses to proceed.
    strong = make_scaled_bump(0.5, amplitude=1.0)
    with pytest.raises(ContractionFailure) as exc:
        solve_y(strong, 1.0, 4.0, 0.0, 0.5)
    assert "contraction" in str(exc.value).lower()
    assert "threshold time" in str(exc.value).lower()


def test_batch_matches_scalar(bump):
    x = np.linspace(-2, 2, 9)
    xi = np.full(9, 0.7)
    y, state, _, _ = solve_y_batch(bump, 10.0, 30.0, x, xi)
    for i in (0, 4, 8):
        smp = solve_y(bump, 10.0, 30.0, x[i], xi[i])
        assert abs(smp.y - y[i]) < 1e-9


def test_warm_start_converges_fast(bump):
    x = np.linspace(-2, 2, 9)
    xi = np.full(9, 0.7)
    y0, _, iters0, _ = solve_y_batch(bump, 10.0, 30.0, x, xi)
    y1, _, iters1, _ = solve_y_batch(bump, 10.0, 30.5, x, xi, warm=y0 + 0.5 * xi)
    assert iters1 <= iters0
    assert np.max(np.abs(y1 - y0 - 0.5 * xi)) < 0.1


def test_prop22_zero_model(free):
    s_vals = np.geomspace(10.0, 1000.0, 8)
    lat = np.linspace(-2, 2, 5)
    rep = measure_prop22(free, s_vals, lat, lat, t_factors=(2.0,))
    assert rep.passed
    assert rep.row("inverse.eta-deviation-fit").fitted_exponent is None


def test_prop22_scaled_bump():
    bump = make_scaled_bump(0.5, amplitude=0.5)
    s_vals = np.geomspace(10.0, 1000.0, 12)
    x = np.linspace(-4, 4, 9)
    xi = np.linspace(-2, 2, 9)
    rep = measure_prop22(bump, s_vals, x, xi, t_factors=(2.0, 4.0))
    assert rep.passed, {r.check_id: r.sups for r in rep.rows if not r.passed}
    fit = rep.row("inverse.eta-deviation-fit")
    assert fit.fitted_exponent == pytest.approx(-0.5, abs=0.2)
    fit2 = rep.row("inverse.deta-dx-fit")
    assert fit2.fitted_exponent == pytest.approx(-1.5, abs=0.2)

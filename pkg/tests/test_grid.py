import doctest

import numpy as np
import pytest

import fioprop.grid as grid_mod
from fioprop.errors import TooFewSamples
from fioprop.grid import (
    FreqGrid,
    SpaceGrid,
    TimeWindow,
    finite_diff,
    forward_matrix,
    forward_transform,
    inverse_matrix,
    inverse_transform,
)


def test_module_doctest():
    failures, _ = doctest.testmod(grid_mod)
    assert failures == 0


def test_space_grid_invariants():
    g = SpaceGrid(64, 10.0)
    assert g.spacing == pytest.approx(20.0 / 64)
    d = np.diff(g.nodes)
    assert np.max(np.abs(d - g.spacing)) < 1e-12 * g.spacing
    assert g.nodes[0] == -10.0
    with pytest.raises(ValueError):
        SpaceGrid(63, 10.0)
    with pytest.raises(ValueError):
        SpaceGrid(8, 10.0)
    with pytest.raises(ValueError):
        SpaceGrid(64, -1.0)


def test_freq_grid_nyquist():
    g = SpaceGrid(128, 15.0)
    f = FreqGrid(g)
    assert f.spacing == pytest.approx(np.pi / 15.0)
    assert np.max(np.abs(f.nodes)) == pytest.approx(f.nyquist)
    assert f.nyquist == pytest.approx(np.pi / g.spacing)
    assert f.measure_weight == pytest.approx(f.spacing / (2 * np.pi))


def test_time_window():
    w = TimeWindow(10.0, 20.0, 0.5)
    assert len(w.times) == 21
    assert w.times[0] == 10.0 and w.times[-1] == 20.0
    with pytest.raises(ValueError):
        TimeWindow(0.5, 20.0, 0.5)
    with pytest.raises(ValueError):
        TimeWindow(10.0, 20.0, 0.3)


def test_gaussian_transform_pair():
    # exp(-x^2/2) maps to sqrt(2 pi) exp(-xi^2/2)
    g = SpaceGrid(512, 20.0)
    f = np.exp(-g.nodes**2 / 2.0)
    fh = forward_transform(g, f)
    xi = FreqGrid(g).nodes
    exact = np.sqrt(2 * np.pi) * np.exp(-(xi**2) / 2.0)
    assert np.max(np.abs(fh - exact)) < 1e-10


def test_zero_transform():
    g = SpaceGrid(64, 5.0)
    assert np.all(forward_transform(g, np.zeros(64)) == 0)


def test_grid_mode_against_direct_summation():
    # Oracle: the O(N^2) quadrature sum, computed explicitly.
    g = SpaceGrid(64, 7.0)
    freq = FreqGrid(g)
    k = 40
    f = np.exp(1j * freq.nodes[k] * g.nodes)
    fh = forward_transform(g, f)
    direct = np.array(
        [g.spacing * np.sum(np.exp(-1j * xi * g.nodes) * f) for xi in freq.nodes]
    )
    assert np.max(np.abs(fh - direct)) < 1e-10
    assert fh[k] == pytest.approx(2 * g.half_width, rel=1e-12)
    off = np.abs(np.delete(fh, k))
    assert np.max(off) < 1e-9


@pytest.mark.parametrize("n,L", [(16, 3.0), (64, 10.0), (250, 17.5)])
def test_round_trip_identity(n, L, rng):
    g = SpaceGrid(n, L)
    f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    back = inverse_transform(g, forward_transform(g, f))
    assert np.max(np.abs(back - f)) < 1e-12 * np.max(np.abs(f))


def test_parseval(rng):
    # h sum |f|^2 = (dxi / 2 pi) sum |fhat|^2, exactly in this scaling.
    g = SpaceGrid(128, 9.0)
    f = rng.standard_normal(128) + 1j * rng.standard_normal(128)
    fh = forward_transform(g, f)
    lhs = g.spacing * np.sum(np.abs(f) ** 2)
    rhs = FreqGrid(g).measure_weight * np.sum(np.abs(fh) ** 2)
    assert abs(lhs - rhs) < 1e-10 * lhs


def test_matrices_match_fft(rng):
    g = SpaceGrid(64, 5.0)
    f = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    assert np.max(np.abs(forward_matrix(g) @ f - forward_transform(g, f))) < 1e-10
    fh = forward_transform(g, f)
    assert np.max(np.abs(inverse_matrix(g) @ fh - inverse_transform(g, fh))) < 1e-10
    # inverse-of-forward collapses to the identity matrix
    eye = inverse_matrix(g) @ forward_matrix(g)
    assert np.max(np.abs(eye - np.eye(64))) < 1e-11


def test_finite_diff_polynomial_exact():
    x = np.arange(0, 3, 0.1)
    d = finite_diff(x**2, 0.1, order=1)
    assert np.max(np.abs(d[2:-2] - 2 * x[2:-2])) < 1e-10


def test_finite_diff_second_order_sin():
    h = 0.05
    x = np.arange(0, 3, h)
    d2 = finite_diff(np.sin(x), h, order=2)
    assert np.max(np.abs(d2[2:-2] + np.sin(x)[2:-2])) < 5 * h**4


def test_finite_diff_convergence_order():
    # Interior error ratio between steps h and h/2 should be ~2^4 = 16.
    errs = []
    for h in (0.1, 0.05):
        x = np.arange(0.0, 4.0 + h / 2, h)
        d = finite_diff(np.exp(x), h, order=1)
        errs.append(np.max(np.abs(d - np.exp(x))[5:-5]))
    ratio = errs[0] / errs[1]
    assert 12.0 < ratio < 20.0


def test_finite_diff_richardson_improves():
    h = 0.1
    x = np.arange(0.0, 4.0 + h / 2, h)
    plain = np.max(np.abs(finite_diff(np.exp(x), h, order=1) - np.exp(x))[5:-5])
    rich = np.max(np.abs(finite_diff(np.exp(x), h, order=1, richardson=True) - np.exp(x))[5:-5])
    assert rich < plain / 50.0


def test_finite_diff_validation():
    with pytest.raises(TooFewSamples):
        finite_diff(np.ones(4), 0.1)
    with pytest.raises(TooFewSamples):
        finite_diff(np.ones(8), 0.1, richardson=True)
    with pytest.raises(ValueError):
        finite_diff(np.ones(8), 0.1, scheme="upwind")
    with pytest.raises(ValueError):
        finite_diff(np.ones(8), 0.1, order=3)


def test_finite_diff_axis():
    h = 0.1
    x = np.arange(0, 2, h)
    arr = np.outer(x**2, np.ones(7))
    d = finite_diff(arr, h, order=1, axis=0)
    assert np.max(np.abs(d[2:-2, :] - 2 * x[2:-2, None])) < 1e-10

import numpy as np
import pytest

from fioprop import backend
from fioprop.errors import NonFiniteState
from fioprop.potential import PotentialModel

HAVE_CORE = backend.backend_name() == "core"


def test_free_flow_exact(free):
    # Straight-line motion is resolved to roundoff even at loose tolerance.
    x = np.linspace(-3, 3, 11)
    xi = np.linspace(-2, 2, 11)
    st = backend.flow_final(free, 2.0, 5.0, x, xi, 1e-8, 1e-8)
    assert np.max(np.abs(st[:, 0] - (x + 3.0 * xi))) < 1e-10
    assert np.max(np.abs(st[:, 1] - xi)) < 1e-12
    assert np.max(np.abs(st[:, 3] - 3.0)) < 1e-10  # dq/dxi = t - s
    assert np.max(np.abs(st[:, 6] - 1.5 * xi**2)) < 1e-10  # action = (t-s) xi^2/2


def test_zero_span_is_identity(bump):
    st = backend.flow_final(bump, 7.0, 7.0, [1.3], [-0.4], 1e-10, 1e-10)
    assert st[0, 0] == 1.3 and st[0, 1] == -0.4
    assert st[0, 2] == 1.0 and st[0, 5] == 1.0 and st[0, 6] == 0.0


@pytest.mark.skipif(not HAVE_CORE, reason="compiled core not built")
def test_backends_agree(bump):
    rng = np.random.default_rng(7)
    x = rng.uniform(-4, 4, 40)
    xi = rng.uniform(-2, 2, 40)
    a = backend.flow_final(bump, 10.0, 40.0, x, xi, 1e-11, 1e-11, impl_name="core")
    b = backend.flow_final(bump, 10.0, 40.0, x, xi, 1e-11, 1e-11, impl_name="python")
    assert np.max(np.abs(a - b)) < 1e-8


def test_against_scipy_dop853(bump):
    # Independent high-order oracle at tight tolerance.
    from scipy.integrate import solve_ivp

    def rhs(t, y):
        v, vx, vxx = bump.kernel_terms(t, np.array([y[0]]))
        return [y[1], -vx[0], y[4], y[5], -vxx[0] * y[2], -vxx[0] * y[3],
                0.5 * y[1] ** 2 - v[0]]

    y0 = [0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0]
    sol = solve_ivp(rhs, (10.0, 40.0), y0, method="DOP853", rtol=1e-13, atol=1e-13)
    ours = backend.flow_final(bump, 10.0, 40.0, [0.0], [1.0], 1e-11, 1e-11)
    assert np.max(np.abs(ours[0] - sol.y[:, -1])) < 1e-9


def test_backward_spans(bump):
    # Forward then backward returns the initial data.
    fwd = backend.flow_final(bump, 10.0, 30.0, [1.0], [0.7], 1e-12, 1e-12)
    back = backend.flow_final(bump, 30.0, 10.0, [fwd[0, 0]], [fwd[0, 1]], 1e-12, 1e-12)
    assert abs(back[0, 0] - 1.0) < 1e-9
    assert abs(back[0, 1] - 0.7) < 1e-9


def test_flow_samples_shape(bump):
    times = np.linspace(5.0, 9.0, 9)
    out = backend.flow_samples(bump, 5.0, times, 0.5, -0.3, 1e-10, 1e-10)
    assert out.shape == (9, 7)
    assert out[0, 0] == 0.5 and out[0, 1] == -0.3


def test_nonfinite_state_detected():
    # A hostile model drives the python integrator into NaN territory.
    bad = PotentialModel("bad", 0, (), epsilon=0.5)

    class Hostile:
        name = "hostile"
        kind = 0
        epsilon = 0.5
        param_array = bad.param_array

        @staticmethod
        def kernel_terms(t, q):
            z = np.full_like(q, np.nan)
            return z, z, z

    with pytest.raises(NonFiniteState):
        backend.flow_final(Hostile(), 0.0, 1.0, [0.0], [1.0], 1e-10, 1e-10,
                           impl_name="python")


def test_status_mapping():
    from fioprop.backend import _raise_for_status
    from fioprop.errors import StepSizeUnderflow

    _raise_for_status(np.zeros(3, dtype=np.int32))
    with pytest.raises(StepSizeUnderflow):
        _raise_for_status(np.array([0, 1], dtype=np.int32))
    with pytest.raises(NonFiniteState):
        _raise_for_status(np.array([2], dtype=np.int32))
    with pytest.raises(NonFiniteState):
        _raise_for_status(np.array([3], dtype=np.int32))


def test_bad_backend_name(bump):
    with pytest.raises(ValueError):
        backend.flow_final(bump, 0.0, 1.0, [0.0], [0.0], 1e-10, 1e-10, impl_name="rust")


def test_state_shape_validation(bump):
    with pytest.raises(ValueError):
        backend.flow_continue(bump, 0.0, 1.0, np.zeros((3, 5)), 1e-10, 1e-10)
    with pytest.raises(ValueError):
        backend.initial_state([1.0, 2.0], [0.5])

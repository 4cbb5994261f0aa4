"""Backend selection for the trajectory core.

The compiled extension ``fioprop._coreflow`` is preferred when importable;
otherwise the vectorized numpy fallback ``fioprop._pyflow`` takes over.
Set ``FIOPROP_BACKEND`` to ``core`` or ``python`` to force one side
(``core`` raises if the extension is missing); anything else means auto.

Both backends integrate the same 7-component state (position, momentum,
the four first-order variational derivatives, and the running action) with
the same embedded Runge-Kutta pair; ``fioprop bench-backend`` times them
against each other across batch sizes.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pyflow
from .errors import NonFiniteState, StepSizeUnderflow

_choice = os.environ.get("FIOPROP_BACKEND", "auto").lower()

_core = None
if _choice in ("auto", "core"):
    try:
        from . import _coreflow as _core
    except ImportError:
        _core = None
        if _choice == "core":
            raise ImportError(
                "FIOPROP_BACKEND=core but the compiled extension is not built; "
                "run `pip install -e .` or `python setup.py build_ext --inplace`"
            )

BACKEND = "core" if _core is not None else "python"


def backend_name():
    return BACKEND


def _drive(impl, model, t0, t1, y, status, rtol, atol):
    if impl is _pyflow:
        _pyflow.flow_continue_inplace(model, t0, t1, y, status, rtol, atol)
    else:
        impl.flow_continue_inplace(
            model.kind, model.param_array, float(t0), float(t1), y, status, rtol, atol
        )


def _raise_for_status(status):
    if np.all(status == _pyflow.STATUS_OK):
        return
    n_uf = int(np.sum(status == _pyflow.STATUS_UNDERFLOW))
    n_nf = int(np.sum(status == _pyflow.STATUS_NONFINITE))
    n_ms = int(np.sum(status == _pyflow.STATUS_MAXSTEPS))
    if n_nf:
        raise NonFiniteState(f"{n_nf} trajectories overflowed or went NaN")
    if n_uf:
        raise StepSizeUnderflow(f"adaptive step underflowed on {n_uf} trajectories")
    raise NonFiniteState(f"{n_ms} trajectories exceeded the step budget")


def flow_continue(model, t0, t1, y0, rtol, atol, impl_name=None):
    """Integrate the batch ``y0`` (shape (m, 7)) from t0 to t1.

    Returns a fresh array; raises StepSizeUnderflow / NonFiniteState when
    any trajectory fails.  ``impl_name`` pins a specific backend (used by
    the cross-backend tests and the benchmark).
    """
    y = np.array(y0, dtype=float, order="C", copy=True)
    if y.ndim != 2 or y.shape[1] != 7:
        raise ValueError("state batch must have shape (m, 7)")
    status = np.zeros(y.shape[0], dtype=np.int32)
    impl = _resolve(impl_name)
    _drive(impl, model, float(t0), float(t1), y, status, float(rtol), float(atol))
    _raise_for_status(status)
    return y


def _resolve(impl_name):
    if impl_name in (None, BACKEND):
        return _core if BACKEND == "core" else _pyflow
    if impl_name == "python":
        return _pyflow
    if impl_name == "core":
        if _core is None:
            raise ImportError("compiled backend not available")
        return _core
    raise ValueError(f"unknown backend {impl_name!r}")


def initial_state(x, xi):
    """Fresh batch state: positions x, momenta xi, identity Jacobian, w = 0."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if x.shape != xi.shape:
        raise ValueError("x and xi must have matching shapes")
    m = x.size
    y = np.zeros((m, 7))
    y[:, 0] = x.ravel()
    y[:, 1] = xi.ravel()
    y[:, 2] = 1.0
    y[:, 5] = 1.0
    return y


def flow_final(model, s, t, x, xi, rtol, atol, impl_name=None):
    """End state at time t of the flow started at time s from (x, xi)."""
    return flow_continue(model, s, t, initial_state(x, xi), rtol, atol, impl_name)


def flow_samples(model, s, times, x, xi, rtol, atol):
    """Single trajectory from (s, x, xi) sampled at ``times`` (shape (k, 7)).

    ``times`` must move monotonically away from s (either direction); the
    first entry may equal s.
    """
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times), 7))
    y = initial_state([x], [xi])
    t_prev = float(s)
    for i, t in enumerate(times):
        if t != t_prev:
            y = flow_continue(model, t_prev, t, y, rtol, atol)
            t_prev = float(t)
        out[i] = y[0]
    return out

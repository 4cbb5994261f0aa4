"""Pure-numpy trajectory core: batched Dormand-Prince 5(4) integration.

State layout per trajectory (7 components):

    y = [q, p, dq/dx0, dq/dxi0, dp/dx0, dp/dxi0, w]

where the middle four entries solve the variational equations
d(dq)/dt = dp, d(dp)/dt = -V_xx(t, q) dq, and w accumulates the Lagrangian
p^2/2 - V(t, q) (the action integral along the trajectory).

The whole batch advances with a single shared adaptive step controlled by
the worst per-component scaled error, so every trajectory sees a local error
at most ``atol + rtol |y|`` per step.  The compiled core in ``_coreflow``
implements the identical tableau with per-trajectory steps; the two agree to
integration tolerance, not bit-for-bit.
"""

from __future__ import annotations

import numpy as np

# Dormand-Prince 5(4) tableau.
C2, C3, C4, C5, C6 = 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# Error weights b5 - b4 (the 5th-order solution is propagated, FSAL).
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_NONFINITE = 2
STATUS_MAXSTEPS = 3

_MAX_STEPS = 2_000_000


def _rhs(model, t, y):
    out = np.empty_like(y)
    v, vx, vxx = model.kernel_terms(t, y[:, 0])
    out[:, 0] = y[:, 1]
    out[:, 1] = -vx
    out[:, 2] = y[:, 4]
    out[:, 3] = y[:, 5]
    out[:, 4] = -vxx * y[:, 2]
    out[:, 5] = -vxx * y[:, 3]
    out[:, 6] = 0.5 * y[:, 1] * y[:, 1] - v
    return out


def flow_continue_inplace(model, t0, t1, y, status, rtol, atol):
    """Advance the batch ``y`` (shape (m, 7)) from t0 to t1 in place."""
    span = t1 - t0
    status[:] = STATUS_OK
    if span == 0.0 or y.shape[0] == 0:
        return
    sgn = 1.0 if span > 0 else -1.0
    hmin = 1e-14 * abs(span)
    t = t0
    h = span / 16.0
    k1 = _rhs(model, t, y)
    steps = 0
    nonfinite_seen = False
    while (t1 - t) * sgn > 0.0:
        steps += 1
        if steps > _MAX_STEPS:
            status[:] = STATUS_MAXSTEPS
            return
        if abs(h) < hmin:
            status[:] = STATUS_NONFINITE if nonfinite_seen else STATUS_UNDERFLOW
            return
        if (t + h - t1) * sgn > 0.0:
            h = t1 - t
        k2 = _rhs(model, t + C2 * h, y + h * (A21 * k1))
        k3 = _rhs(model, t + C3 * h, y + h * (A31 * k1 + A32 * k2))
        k4 = _rhs(model, t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = _rhs(model, t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = _rhs(
            model,
            t + h,
            y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
        )
        ynew = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        k7 = _rhs(model, t + h, ynew)
        err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        with np.errstate(invalid="ignore", divide="ignore"):
            enorm = float(np.max(np.abs(err) / scale))
        if not np.isfinite(enorm) or not np.all(np.isfinite(ynew)):
            enorm = np.inf
            nonfinite_seen = True
        if enorm <= 1.0:
            t = t + h
            y[:] = ynew
            k1 = k7
            nonfinite_seen = False
        factor = 5.0 if enorm < 1e-12 else min(5.0, max(0.2, 0.9 * enorm**-0.2))
        h *= factor

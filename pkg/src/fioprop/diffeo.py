"""Inversion of the flow maps and the inverse-map estimate suite.

Solves x = q(s, t, y, xi) for y (launch position that lands on x under the
backward flow) and xi = p(t, s, x, eta) for eta (launch momentum that
arrives at xi).  The solver is the fixed-point map y -> y - (q - x), which
contracts when the flow Jacobian is close to the identity, switched to
Newton polishing (with the analytically integrated variational Jacobian)
once the residual is small.  A first-iterate contraction factor >= 1/2
raises ContractionFailure: the threshold time is too small for the
inversion to be well posed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractionFailure
from .grid import finite_diff
from .hamflow import flow_grid
from .potential import bracket
from .report import EstimateReport, EstimateRow, StopWatch, decade_bounded, loglog_fit

NEWTON_THRESHOLD = 1e-3  # switch from contraction to Newton below this residual
MAX_ITER = 60
FACTOR_LIMIT = 0.5  # first-iterate contraction factor must stay below this
RATIO_LIMIT = 0.9  # successive-residual growth that signals divergence


@dataclass(frozen=True)
class InverseMapSample:
    """Solved inverse-map point with its defining and cross residuals."""

    s: float
    t: float
    x: float
    xi: float
    y: float
    eta: float
    iterations: int
    residual_y: float  # |q(s,t,y,xi) - x|
    residual_eta: float  # |p(t,s,x,eta) - xi|


def _solve(model, t_launch, t_read, fixed, target, unknown0, tol, newton_threshold,
           read_q, max_iter=MAX_ITER):
    """Shared contraction/Newton driver.

    ``read_q`` selects which component is matched: True solves
    q(t_read, t_launch, u, fixed) = target for u (position unknown, fixed
    momentum), False solves p(t_read, t_launch, fixed, u) = target
    (momentum unknown, fixed position).
    """
    u = unknown0.copy()
    span = abs(t_read - t_launch)
    scale = 1.0 + np.abs(target) + span * (np.abs(fixed) if read_q else np.abs(target))
    tol_res = tol * scale
    prev_max = None
    grew = 0
    state = None
    for it in range(1, max_iter + 1):
        if read_q:
            state = flow_grid(model, t_launch, t_read, u, fixed, tol)
            val, jac = state[:, 0], state[:, 2]
        else:
            state = flow_grid(model, t_launch, t_read, fixed, u, tol)
            val, jac = state[:, 1], state[:, 5]
        if it == 1:
            factor = float(np.max(np.abs(jac - 1.0)))
            if factor >= FACTOR_LIMIT:
                raise ContractionFailure(
                    f"contraction factor {factor:.3f} >= {FACTOR_LIMIT} on the first "
                    f"iterate at (launch={t_launch:g}, read={t_read:g}): "
                    "threshold time T too small"
                )
        r = val - target
        max_r = float(np.max(np.abs(r)))
        if np.all(np.abs(r) <= tol_res):
            return u, state, it, max_r
        contraction = np.abs(r) >= newton_threshold
        if np.any(contraction) and prev_max is not None and max_r > RATIO_LIMIT * prev_max:
            grew += 1
            if grew >= 2:
                raise ContractionFailure(
                    f"successive-residual ratio exceeded {RATIO_LIMIT} "
                    f"(residual {max_r:.3e}): threshold time T too small"
                )
        else:
            grew = 0
        prev_max = max_r
        step = np.where(contraction, r, r / jac)
        u = u - step
    raise ContractionFailure(f"no convergence in {max_iter} iterations (residual {prev_max:.3e})")


def solve_y_batch(model, s, t, x, xi, tol=1e-11, warm=None, newton_threshold=NEWTON_THRESHOLD):
    """Vectorized solve of q(s, t, y, xi) = x.

    Returns (y, end_state, iterations, max_residual): ``end_state`` is the
    (m, 7) backward-flow state launched at (t, y, xi) and read at s, so its
    momentum column is eta = p(s, t, y, xi) and its action column is the
    Lagrangian integral from t down to s.
    """
    x = np.asarray(x, dtype=float).ravel()
    xi = np.asarray(xi, dtype=float).ravel()
    if t == s:
        state = np.zeros((x.size, 7))
        state[:, 0] = x
        state[:, 1] = xi
        state[:, 2] = 1.0
        state[:, 5] = 1.0
        return x.copy(), state, 0, 0.0
    y0 = np.asarray(warm, dtype=float).ravel().copy() if warm is not None else x + (t - s) * xi
    return _solve(model, t, s, xi, x, y0, tol, newton_threshold, read_q=True)


def solve_eta_batch(model, s, t, x, xi, tol=1e-11, warm=None, newton_threshold=NEWTON_THRESHOLD):
    """Vectorized solve of p(t, s, x, eta) = xi.

    Returns (eta, end_state, iterations, max_residual): ``end_state`` is the
    forward-flow state launched at (s, x, eta) and read at t, so its
    position column is q(t, s, x, eta) = y(s, t, x, xi).
    """
    x = np.asarray(x, dtype=float).ravel()
    xi = np.asarray(xi, dtype=float).ravel()
    if t == s:
        state = np.zeros((x.size, 7))
        state[:, 0] = x
        state[:, 1] = xi
        state[:, 2] = 1.0
        state[:, 5] = 1.0
        return xi.copy(), state, 0, 0.0
    eta0 = np.asarray(warm, dtype=float).ravel().copy() if warm is not None else xi.copy()
    return _solve(model, s, t, x, xi, eta0, tol, newton_threshold, read_q=False)


def solve_y(model, s, t, x, xi, tol=1e-11):
    """Solve for the launch position; returns a fully populated sample."""
    y, state, iters, _ = solve_y_batch(model, s, t, [x], [xi], tol)
    eta = float(state[0, 1])
    residual_y = abs(float(state[0, 0]) - x)
    if t == s:
        residual_eta = 0.0
    else:
        fwd = flow_grid(model, s, t, np.array([x]), np.array([eta]), tol)
        residual_eta = abs(float(fwd[0, 1]) - xi)
    return InverseMapSample(s, t, x, xi, float(y[0]), eta, iters, residual_y, residual_eta)


def solve_eta(model, s, t, x, xi, tol=1e-11):
    """Solve for the launch momentum; returns a fully populated sample."""
    eta, state, iters, _ = solve_eta_batch(model, s, t, [x], [xi], tol)
    y = float(state[0, 0])
    residual_eta = abs(float(state[0, 1]) - xi)
    if t == s:
        residual_y = 0.0
    else:
        bwd = flow_grid(model, t, s, np.array([y]), np.array([xi]), tol)
        residual_y = abs(float(bwd[0, 0]) - x)
    return InverseMapSample(s, t, x, xi, y, float(eta[0]), iters, residual_y, residual_eta)


# ---------------------------------------------------------------------------
# Inverse-map estimate suite
# ---------------------------------------------------------------------------

def measure_prop22(
    model,
    s_values,
    x_values,
    xi_values,
    t_factors=(1.5, 2.0, 4.0),
    tol=1e-11,
):
    """Normalized sups and decay fits for the inverse-map estimates.

    Positions dilate with <s>/<s_min> along the scan, as in the flow
    estimate suite.
    """
    s_values = np.asarray(s_values, dtype=float)
    eps = model.epsilon
    x_values = np.asarray(x_values, dtype=float)
    xi_values = np.asarray(xi_values, dtype=float)
    base = bracket(np.min(s_values))
    nx, nxi = len(x_values), len(xi_values)
    dxi = xi_values[1] - xi_values[0]

    sup_checks = (
        "inverse.eta-deviation",
        "inverse.y-straightline",
        "inverse.dy-dx",
        "inverse.dy-dxi",
        "inverse.deta-dx",
        "inverse.deta-dxi",
        "inverse.eta-second-derivs",
        "inverse.y-second-derivs",
        "inverse.roundtrip",
        "inverse.bijectivity",
    )
    checks = {cid: np.zeros(len(s_values)) for cid in sup_checks}
    eta_sup = np.zeros(len(s_values))  # raw sup |eta - xi| for the decay fit
    deta_sup = np.zeros(len(s_values))  # raw sup |d eta/dx| for the decay fit

    with StopWatch() as sw:
        for i, s in enumerate(s_values):
            sb = bracket(s)
            X, XI = np.meshgrid(x_values * (sb / base), xi_values, indexing="ij")
            xf, xif = X.ravel(), XI.ravel()
            dx = (x_values[1] - x_values[0]) * (sb / base)
            for fac in t_factors:
                t = s * fac
                span = t - s
                y, ystate, _, _ = solve_y_batch(model, s, t, xf, xif, tol)
                eta = ystate[:, 1]
                # Round trip through the forward flow.
                fwd = flow_grid(model, s, t, xf, eta, tol)
                rt = np.maximum(
                    np.abs(fwd[:, 1] - xif) / (1.0 + np.abs(xif)),
                    np.abs(fwd[:, 0] - y) / (1.0 + np.abs(xf) + span * np.abs(xif)),
                )

                def _bump(cid, value):
                    checks[cid][i] = max(checks[cid][i], float(value))

                rate_min = min(bracket(t) ** (1 - eps), span * sb**-eps)
                y2 = y.reshape(nx, nxi)
                eta2 = eta.reshape(nx, nxi)
                eta_dev = float(np.max(np.abs(eta - xif)))
                eta_sup[i] = max(eta_sup[i], eta_dev)
                _bump("inverse.eta-deviation", eta_dev * sb**eps)
                _bump(
                    "inverse.y-straightline",
                    np.max(np.abs(y - xf - span * xif)) / rate_min,
                )
                dy_dx = finite_diff(y2, dx, order=1, axis=0)
                dy_dxi = finite_diff(y2, dxi, order=1, axis=1)
                deta_dx = finite_diff(eta2, dx, order=1, axis=0)
                deta_dxi = finite_diff(eta2, dxi, order=1, axis=1)
                _bump("inverse.dy-dx", np.max(np.abs(dy_dx - 1.0)) * sb**eps)
                _bump("inverse.dy-dxi", np.max(np.abs(dy_dxi - span)) / rate_min)
                deta_val = float(np.max(np.abs(deta_dx)))
                deta_sup[i] = max(deta_sup[i], deta_val)
                _bump("inverse.deta-dx", deta_val * sb ** (1 + eps))
                _bump("inverse.deta-dxi", np.max(np.abs(deta_dxi - 1.0)) * sb**eps)
                sec_eta = max(
                    np.max(np.abs(finite_diff(eta2, dx, order=2, axis=0))),
                    np.max(np.abs(finite_diff(eta2, dxi, order=2, axis=1))),
                    np.max(np.abs(finite_diff(deta_dx, dxi, order=1, axis=1))),
                )
                sec_y = max(
                    np.max(np.abs(finite_diff(y2, dx, order=2, axis=0))),
                    np.max(np.abs(finite_diff(y2, dxi, order=2, axis=1))),
                    np.max(np.abs(finite_diff(dy_dx, dxi, order=1, axis=1))),
                )
                _bump("inverse.eta-second-derivs", sec_eta * sb**eps)
                _bump("inverse.y-second-derivs", sec_y / ((span + 1.0) * sb**-eps))
                _bump("inverse.roundtrip", np.max(rt))
                # Bijectivity: x-spacing of solved y's stays within [1/2, 2]
                # of the lattice spacing.
                ratios = np.diff(y2, axis=0) / dx
                _bump("inverse.bijectivity", max(np.max(ratios) - 1.0, 1.0 - np.min(ratios)))

    rows = []
    for cid in sup_checks:
        sups = checks[cid]
        if cid == "inverse.roundtrip":
            passed = bool(np.max(sups) < 1e-8)
            threshold = "sup < 1e-8"
        elif cid == "inverse.bijectivity":
            passed = bool(np.max(sups) <= 1.0)  # ratios within [0, 2]
            threshold = "lattice spacing ratio within [1/2, 2]"
        else:
            passed = decade_bounded(s_values, sups)
            threshold = "decade-bounded (largest <= 1.05 x smallest)"
        rows.append(
            EstimateRow(
                suite="prop22",
                check_id=cid,
                scan_name="s",
                scan_values=list(s_values),
                sups=list(sups),
                passed=passed,
                threshold=threshold,
            )
        )
    sb_all = bracket(s_values)
    for cid, sups, target in (
        ("inverse.eta-deviation-fit", eta_sup, -eps),
        ("inverse.deta-dx-fit", deta_sup, -(1 + eps)),
    ):
        slope, stderr = loglog_fit(sb_all, sups)
        passed = True if slope is None else bool(abs(slope - target) <= 0.2)
        rows.append(
            EstimateRow(
                suite="prop22",
                check_id=cid,
                scan_name="s",
                scan_values=list(s_values),
                sups=list(sups),
                passed=passed,
                threshold=f"fitted exponent within 0.2 of {target:g}",
                fitted_exponent=slope,
                fit_stderr=stderr,
            )
        )
    return EstimateReport(suite="prop22", rows=rows, wall_seconds=sw.seconds)

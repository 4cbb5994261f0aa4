"""Generating phase of the flow via the action integral.

For t >= s the phase on a (x, xi) lattice is

    phi(s, t, x, xi) = y xi + int_t^s L(tau, q(tau), p(tau)) dtau,

where y solves the inversion x = q(s, t, y, xi), the trajectory is launched
at (t, y, xi), and L = p^2/2 - V is the Lagrangian.  Its gradients are the
inverse maps themselves: d(phi)/dx = eta(t, s, x, xi) (arrival momentum of
the backward trajectory) and d(phi)/dxi = y(s, t, x, xi); both come out of
the same integration and are cached on the field.  ``verify_prop23``
measures those identities and both Hamilton-Jacobi residuals

    d(phi)/ds + H(s, x, d(phi)/dx) = 0,
    d(phi)/dt - H(t, d(phi)/dxi, xi) = 0

by Richardson-extrapolated finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .diffeo import solve_y_batch
from .errors import FiopropError
from .grid import finite_diff
from .report import EstimateReport, EstimateRow, StopWatch

# Interior margin (nodes skipped per edge) when taking sups of
# finite-difference residuals.
_EDGE = 4


@dataclass(frozen=True)
class PhaseField:
    """Phase values and first derivatives on an (x, xi) lattice."""

    model_name: str
    s: float
    t: float
    x_nodes: np.ndarray
    xi_nodes: np.ndarray
    phi: np.ndarray  # shape (nx, nxi)
    eta: np.ndarray  # d(phi)/dx cache
    y: np.ndarray  # d(phi)/dxi cache
    tol: float
    iterations: int
    max_residual: float


def free_phase(s, t, x, xi):
    """Phase of the free flow: x xi + (t - s) xi^2 / 2."""
    return np.asarray(x) * np.asarray(xi) + 0.5 * (t - s) * np.asarray(xi) ** 2


def action_w(model, s, t, y, eta, tol=1e-11):
    """Action functional w(s, t, y, eta) = y eta + int_t^s L dtau.

    The trajectory is launched at time t from (y, eta); note the integral
    runs from t down to s, so for t > s the kinetic part enters negatively.
    """
    from .backend import flow_final

    state = flow_final(model, t, s, [y], [eta], tol, tol)
    return float(y * eta + state[0, 6])


def build_phase(model, s, t, x_nodes, xi_nodes, tol=1e-10, solve_tol=None,
                warm=None, check_gradients=True):
    """Construct the phase field on the lattice x_nodes x xi_nodes.

    ``warm`` optionally seeds the inversion with a previous y table (same
    lattice); families of fields over a time lattice chain these seeds.
    On build the cached gradients are compared against lattice finite
    differences of phi at a relaxed 1e-5 tolerance (skipped on lattices too
    small for the Richardson stencil).
    """
    x_nodes = np.asarray(x_nodes, dtype=float)
    xi_nodes = np.asarray(xi_nodes, dtype=float)
    nx, nxi = len(x_nodes), len(xi_nodes)
    X, XI = np.meshgrid(x_nodes, xi_nodes, indexing="ij")
    xf, xif = X.ravel(), XI.ravel()

    if t == s:
        field = PhaseField(
            model_name=model.name, s=float(s), t=float(t),
            x_nodes=x_nodes, xi_nodes=xi_nodes,
            phi=(X * XI), eta=XI.copy(), y=X.copy(),
            tol=tol, iterations=0, max_residual=0.0,
        )
        return field

    warm_flat = None if warm is None else np.asarray(warm, dtype=float).ravel()
    y, state, iters, max_res = solve_y_batch(
        model, s, t, xf, xif, tol=solve_tol if solve_tol is not None else tol,
        warm=warm_flat,
    )
    eta = state[:, 1]
    w = state[:, 6]
    phi = (y * xif + w).reshape(nx, nxi)
    field = PhaseField(
        model_name=model.name, s=float(s), t=float(t),
        x_nodes=x_nodes, xi_nodes=xi_nodes,
        phi=phi, eta=eta.reshape(nx, nxi), y=y.reshape(nx, nxi),
        tol=tol, iterations=iters, max_residual=max_res,
    )
    if check_gradients and nx >= 12 and nxi >= 12:
        _check_gradient_identities(field)
    return field


def _check_gradient_identities(field, tol=1e-5):
    dx = field.x_nodes[1] - field.x_nodes[0]
    dxi = field.xi_nodes[1] - field.xi_nodes[0]
    core = (slice(_EDGE, -_EDGE), slice(_EDGE, -_EDGE))
    gx = finite_diff(field.phi, dx, order=1, axis=0, richardson=True)
    gxi = finite_diff(field.phi, dxi, order=1, axis=1, richardson=True)
    rx = np.max(np.abs(gx - field.eta)[core])
    rxi = np.max(np.abs(gxi - field.y)[core])
    if rx > tol * (1.0 + np.max(np.abs(field.eta))) or rxi > tol * (
        1.0 + np.max(np.abs(field.y))
    ):
        raise FiopropError(
            f"phase gradient identities violated on build: "
            f"|d(phi)/dx - eta| = {rx:.2e}, |d(phi)/dxi - y| = {rxi:.2e}"
        )


def build_phase_family(model, s, t_list, x_nodes, xi_nodes, tol=1e-10,
                       solve_tol=None, check_gradients=False):
    """Phase fields over a time lattice, warm-starting each inversion.

    The seed for node t_{i+1} advances the previous y table by the free
    drift (t_{i+1} - t_i) xi, which keeps the solver within a couple of
    Newton steps per node.
    """
    x_nodes = np.asarray(x_nodes, dtype=float)
    xi_nodes = np.asarray(xi_nodes, dtype=float)
    XI = np.meshgrid(x_nodes, xi_nodes, indexing="ij")[1]
    fields = []
    warm = None
    t_prev = None
    for t in t_list:
        if warm is not None:
            warm = warm + (t - t_prev) * XI
        f = build_phase(
            model, s, t, x_nodes, xi_nodes, tol=tol, solve_tol=solve_tol,
            warm=warm, check_gradients=check_gradients,
        )
        warm = f.y.copy()
        t_prev = t
        fields.append(f)
    return fields


# ---------------------------------------------------------------------------
# Hamilton-Jacobi verification
# ---------------------------------------------------------------------------

def verify_prop23(model, s, t, x_nodes, xi_nodes, tol=1e-12, delta=1e-3):
    """Gradient-identity and Hamilton-Jacobi residual sups at one (s, t).

    Time derivatives use the 4-point Richardson stencil with step
    ``delta`` (four extra phase builds per time slot, warm-started from the
    center field); spatial derivatives use Richardson lattice differences.
    Sups run over the interior of the lattice.  Pass threshold: 1e-4.
    """
    x_nodes = np.asarray(x_nodes, dtype=float)
    xi_nodes = np.asarray(xi_nodes, dtype=float)
    with StopWatch() as sw:
        center = build_phase(model, s, t, x_nodes, xi_nodes, tol=tol, check_gradients=False)
        warm = center.y

        def _phi(s_, t_):
            return build_phase(
                model, s_, t_, x_nodes, xi_nodes, tol=tol, warm=warm,
                check_gradients=False,
            ).phi

        dphi_ds = _richardson4(
            _phi(s - 2 * delta, t), _phi(s - delta, t), _phi(s + delta, t),
            _phi(s + 2 * delta, t), delta,
        )
        dphi_dt = _richardson4(
            _phi(s, t - 2 * delta), _phi(s, t - delta), _phi(s, t + delta),
            _phi(s, t + 2 * delta), delta,
        )

        dx = x_nodes[1] - x_nodes[0]
        dxi = xi_nodes[1] - xi_nodes[0]
        gx = finite_diff(center.phi, dx, order=1, axis=0, richardson=True)
        gxi = finite_diff(center.phi, dxi, order=1, axis=1, richardson=True)

        X = np.meshgrid(x_nodes, xi_nodes, indexing="ij")[0]
        XI = np.meshgrid(x_nodes, xi_nodes, indexing="ij")[1]
        v_s = model.eval(s, X)
        res_s = dphi_ds + 0.5 * center.eta**2 + v_s
        v_t = model.eval(t, center.y)
        res_t = dphi_dt - 0.5 * XI**2 - v_t

        core = (slice(_EDGE, -_EDGE), slice(_EDGE, -_EDGE))
        sups = {
            "phase.grad-x-identity": float(np.max(np.abs(gx - center.eta)[core])),
            "phase.grad-xi-identity": float(np.max(np.abs(gxi - center.y)[core])),
            "phase.hj-residual-s": float(np.max(np.abs(res_s)[core])),
            "phase.hj-residual-t": float(np.max(np.abs(res_t)[core])),
        }

    rows = [
        EstimateRow(
            suite="prop23",
            check_id=cid,
            scan_name="pair",
            scan_values=[float(s), float(t)],
            sups=[val],
            passed=bool(val < 1e-4),
            threshold="sup < 1e-4",
        )
        for cid, val in sups.items()
    ]
    return EstimateReport(suite="prop23", rows=rows, wall_seconds=sw.seconds)


def _richardson4(fm2, fm1, fp1, fp2, delta):
    return (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * delta)


# ---------------------------------------------------------------------------
# Serialization: flat binary (header + float64 payload) and CSV
# ---------------------------------------------------------------------------

_MAGIC = b"FIOPHAS1"


def dump_phase(field, path):
    """Write a phase field: header (name, s, t, nx, nxi) + node/value tables."""
    name = field.model_name.encode()[:32].ljust(32, b"\0")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(name)
        fh.write(struct.pack("<ddqq", field.s, field.t, len(field.x_nodes), len(field.xi_nodes)))
        for arr in (field.x_nodes, field.xi_nodes, field.phi, field.eta, field.y):
            fh.write(np.ascontiguousarray(arr, dtype=float).tobytes())


def load_phase(path):
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise FiopropError(f"{path}: not a phase dump")
        name = fh.read(32).rstrip(b"\0").decode()
        s, t, nx, nxi = struct.unpack("<ddqq", fh.read(32))
        x_nodes = np.frombuffer(fh.read(8 * nx), dtype=float).copy()
        xi_nodes = np.frombuffer(fh.read(8 * nxi), dtype=float).copy()
        tables = [
            np.frombuffer(fh.read(8 * nx * nxi), dtype=float).reshape(nx, nxi).copy()
            for _ in range(3)
        ]
    return PhaseField(
        model_name=name, s=s, t=t, x_nodes=x_nodes, xi_nodes=xi_nodes,
        phi=tables[0], eta=tables[1], y=tables[2],
        tol=float("nan"), iterations=-1, max_residual=float("nan"),
    )


def phase_to_csv(field, path):
    nx, nxi = field.phi.shape
    with open(path, "w") as fh:
        fh.write("x,xi,phi,eta,y\n")
        for i in range(nx):
            for k in range(nxi):
                fh.write(
                    f"{field.x_nodes[i]!r},{field.xi_nodes[k]!r},"
                    f"{field.phi[i, k]!r},{field.eta[i, k]!r},{field.y[i, k]!r}\n"
                )

"""Propagator construction by the parametrix + Volterra route.

With E the oscillatory parametrix and G its defect (G = -E' - iHE, so
(E*U)' = -G*U for the true propagator), integrating from s gives

    E(t,s)* U(t,s) = I - int_s^t G(tau,s)* U(tau,s) dtau,

so U(t,s) = (E(t,s)*)^(-1) (I - int ...), with (E*)^(-1) = E (I - P)^(-1)
through the geometric series for the E*E defect P.  ``solve_volterra``
iterates this fixed point over a time lattice (cumulative Simpson
quadrature on uniform lattices, trapezoid otherwise); since the integral
kernel shrinks like the time-integral of ||G||, the iteration converges
geometrically once the threshold time is large.

``verify_main_theorem`` runs the full pipeline for a list of thresholds T,
extracts the amplitude of the constructed propagator, and measures the
uniform deviation sup |u - 1| together with its decay in T; the same
amplitudes are extracted from the split-step reference propagator as an
independent route, and the two must agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PicardDiverges
from .fio import (
    build_E_kernel,
    build_G_kernel,
    build_G_kernel_fd,
    OperatorKernel,
    compressed_norm,
    estar_inverse,
    extract_amplitude,
    operator_norm,
)
from .grid import FreqGrid
from .phase import build_phase_family
from .potential import bracket
from .reference import build_U_reference_family
from .report import EstimateReport, EstimateRow, StopWatch, ZERO_FLOOR, loglog_fit


@dataclass(frozen=True)
class VolterraSolution:
    """Propagator kernels on the time lattice plus iteration diagnostics."""

    s: float
    t_lattice: np.ndarray
    kernels: list
    iterations: int
    final_increment: float
    increments: list


def _trapezoid_weights(t_lattice):
    """Per-node trapezoid weights of the cumulative integrals int_s^{t_i}."""
    t = np.asarray(t_lattice, dtype=float)
    n = len(t)
    w = np.zeros((n, n))
    for i in range(1, n):
        seg = 0.5 * np.diff(t[: i + 1])
        w[i, : i + 1][:-1] += seg
        w[i, : i + 1][1:] += seg
    return w


def _cumulative_weights(t_lattice):
    """Quadrature weights for the running integrals int_s^{t_i}.

    On a uniform lattice: composite Simpson, with the 3/8 rule closing odd
    prefixes and the quadratic left-edge rule for the very first segment.
    Falls back to trapezoid on non-uniform lattices.  Second grid
    derivatives of the extracted amplitude magnify quadrature bias by the
    squared phase scale, which is what pushes the accuracy requirement
    beyond trapezoid.
    """
    t = np.asarray(t_lattice, dtype=float)
    n = len(t)
    d = np.diff(t)
    if n < 3 or np.max(np.abs(d - d[0])) > 1e-9 * abs(d[0]):
        return _trapezoid_weights(t)
    h = d[0]
    w = np.zeros((n, n))
    w[1, :3] = h * np.array([5.0, 8.0, -1.0]) / 12.0
    simpson = np.array([1.0, 4.0, 1.0]) * (h / 3.0)
    rule38 = np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
    for i in range(2, n):
        if i % 2 == 0:
            for j in range(0, i, 2):
                w[i, j : j + 3] += simpson
        else:
            for j in range(0, i - 3, 2):
                w[i, j : j + 3] += simpson
            w[i, i - 3 : i + 1] += rule38
    return w


def solve_volterra(e_kernels, g_kernels, s, t_lattice, tol=1e-7, max_iter=80,
                   neumann_tol=1e-11, norm_seed=0):
    """Fixed-point solve of the propagator on the lattice.

    ``e_kernels`` / ``g_kernels`` are the parametrix and defect at every
    lattice node (node 0 must be t = s).  Raises PicardDiverges when the
    sup-norm increment grows three sweeps in a row.
    """
    t_lattice = np.asarray(t_lattice, dtype=float)
    n = len(t_lattice)
    if abs(t_lattice[0] - s) > 1e-12 * max(1.0, abs(s)):
        raise ValueError("t_lattice must start at s")
    if len(e_kernels) != n or len(g_kernels) != n:
        raise ValueError("kernel families must match the lattice")
    es_inv = [estar_inverse(e, tol=neumann_tol) for e in e_kernels]
    g_adj = [g.mat.conj().T for g in g_kernels]
    w = _cumulative_weights(t_lattice)
    dim = e_kernels[0].mat.shape[0]
    eye = np.eye(dim, dtype=complex)

    u = [inv.mat.copy() for inv in es_inv]
    increments = []
    grew = 0
    for sweep in range(1, max_iter + 1):
        integrand = [g_adj[j] @ u[j] for j in range(n)]
        u_new = []
        for i in range(n):
            acc = eye.copy()
            for j in range(i + 1):
                if w[i, j] != 0.0:
                    acc -= w[i, j] * integrand[j]
            u_new.append(es_inv[i].mat @ acc)
        inc = max(
            operator_norm(u_new[i] - u[i], seed=norm_seed, tol=1e-6, max_iter=200)
            for i in range(n)
        )
        increments.append(float(inc))
        u = u_new
        if inc < tol:
            break
        if len(increments) >= 2 and increments[-1] > increments[-2]:
            grew += 1
            if grew >= 3:
                raise PicardDiverges(
                    f"volterra increments grew for 3 sweeps (last {inc:.3e}): "
                    "threshold time T too small"
                )
        else:
            grew = 0
    else:
        raise PicardDiverges(f"no convergence in {max_iter} sweeps (increment {inc:.3e})")

    kernels = [
        OperatorKernel(u[i], e_kernels[i].grid, "U", float(s), float(t_lattice[i]))
        for i in range(n)
    ]
    return VolterraSolution(
        s=float(s), t_lattice=t_lattice, kernels=kernels,
        iterations=len(increments), final_increment=increments[-1],
        increments=increments,
    )


def build_propagator_pipeline(model, grid, s, t_lattice, flow_tol=1e-10,
                              solve_tol=1e-10, picard_tol=1e-7, neumann_tol=1e-11):
    """Phases, parametrix/defect families, and the Volterra solution."""
    freq = FreqGrid(grid)
    phases = build_phase_family(
        model, s, t_lattice, grid.nodes, freq.nodes, tol=flow_tol, solve_tol=solve_tol
    )
    e_kernels = [build_E_kernel(p, grid) for p in phases]
    g_kernels = [build_G_kernel(model, p, grid) for p in phases]
    vol = solve_volterra(
        e_kernels, g_kernels, s, t_lattice, tol=picard_tol, neumann_tol=neumann_tol
    )
    return phases, e_kernels, g_kernels, vol


def picard_tail_ratios(increments):
    """Increment ratios after the second sweep (geometric-convergence check)."""
    if len(increments) < 3:
        return [0.0]
    inc = np.asarray(increments, dtype=float)
    tail = inc[2:] / np.maximum(inc[1:-1], 1e-300)
    # Ratios on increments already at the floor are numerical noise.
    return [float(r) for r, prev in zip(tail, inc[1:-1]) if prev > 10 * ZERO_FLOOR] or [0.0]


def residual_comparison(model, grid, s, t0, n_nodes=25, delta=0.05,
                        xi_cut=None, x_window=None, flow_tol=1e-10,
                        solve_tol=1e-10, picard_tol=1e-8, dt_ref=None, seed=0):
    """Defect of the constructed vs reference propagator at one time.

    Applies the same finite-difference stencil -i(D_t + H) to both
    propagator families at t0 (step ``delta``) and returns the two
    compressed residual norms; the constructed route should stay within an
    order of magnitude of the reference.
    """
    base = np.linspace(s, t0, n_nodes)
    t_lattice = np.unique(np.concatenate([base, [t0 - delta, t0 + delta]]))
    _, _, _, vol = build_propagator_pipeline(
        model, grid, s, t_lattice, flow_tol=flow_tol, solve_tol=solve_tol,
        picard_tol=picard_tol,
    )
    idx = {float(t): i for i, t in enumerate(t_lattice)}
    u_c = vol.kernels[idx[float(t0)]]
    u_m = vol.kernels[idx[float(t0 - delta)]]
    u_p = vol.kernels[idx[float(t0 + delta)]]
    refs = build_U_reference_family(
        model, grid, s, [t0 - delta, t0, t0 + delta], dt_ref=dt_ref
    )
    if xi_cut is None:
        xi_cut = 0.5 * FreqGrid(grid).nyquist
    if x_window is None:
        x_window = 0.25 * grid.half_width
    r_vol = build_G_kernel_fd(model, grid, u_c, u_m, u_p, delta)
    r_ref = build_G_kernel_fd(model, grid, refs[1], refs[0], refs[2], delta)
    return (
        compressed_norm(r_vol.mat, grid, xi_cut, x_window, seed=seed),
        compressed_norm(r_ref.mat, grid, xi_cut, x_window, seed=seed),
    )


# ---------------------------------------------------------------------------
# Main-theorem suite
# ---------------------------------------------------------------------------

def verify_main_theorem(model, grid, T_list, horizon=4.0, dtau=2.5,
                        max_span=160.0, xi_cut=None, y_cut=None,
                        flow_tol=1e-10, solve_tol=1e-10, picard_tol=1e-7,
                        neumann_tol=1e-11, dt_ref=0.02, cross_T=None, seed=0):
    """Uniform amplitude deviation sup |u - 1| and its decay in T.

    For each threshold T the propagator is built on the lattice
    t in [T, min(horizon T, T + max_span)] with fixed spacing ~dtau (so the
    quadrature bias does not grow with T; the span cap keeps the whole
    construction inside the window where the periodized grid still
    represents the parametrix faithfully, see README on wrap-safety) and
    the amplitude extracted on the measured band |xi| <= xi_cut, window
    |y| <= y_cut (sized so no measured trajectory wraps around the box);
    the same extraction from the split-step reference provides the second,
    independent route.  Pass rules: m_0 non-increasing in T within 5
    percent with log-log slope at most -epsilon + 0.25, m_1 and m_2 finite
    and non-increasing, routes agreeing within 1e-2, and (when cross_T is
    given) full-norm agreement with the reference matrix at (cross_T,
    2 cross_T) within 1e-3 with the reference unitary to 1e-6.
    """
    freq = FreqGrid(grid)
    if xi_cut is None:
        xi_cut = 0.25 * freq.nyquist
    if y_cut is None:
        y_cut = 0.25 * grid.half_width
    eps = model.epsilon
    T_list = [float(T) for T in T_list]

    m = np.zeros((3, len(T_list)))
    m_ref = np.zeros((3, len(T_list)))
    agreement = np.zeros(len(T_list))
    ratios = np.zeros(len(T_list))
    cross_diff = None
    cross_unitarity = None

    with StopWatch() as sw:
        for i, T in enumerate(T_list):
            span = min((horizon - 1.0) * T, max_span)
            n_time = 1 + max(2, int(round(span / dtau)))
            t_lattice = np.linspace(T, T + span, n_time)
            phases, _, _, vol = build_propagator_pipeline(
                model, grid, T, t_lattice, flow_tol=flow_tol, solve_tol=solve_tol,
                picard_tol=picard_tol, neumann_tol=neumann_tol,
            )
            ratios[i] = max(picard_tail_ratios(vol.increments))
            refs = build_U_reference_family(model, grid, T, t_lattice[1:], dt_ref=dt_ref)
            for k in range(1, n_time):
                u_vol = extract_amplitude(vol.kernels[k], phases[k])
                u_refk = extract_amplitude(refs[k - 1], phases[k])
                sem = u_vol.deviation_seminorms(xi_cut, y_cut)
                sem_ref = u_refk.deviation_seminorms(xi_cut, y_cut)
                for ell in range(3):
                    m[ell, i] = max(m[ell, i], sem[ell])
                    m_ref[ell, i] = max(m_ref[ell, i], sem_ref[ell])
                rows = np.abs(u_vol.xi_nodes) <= xi_cut
                cols = np.abs(u_vol.y_nodes) <= y_cut
                agreement[i] = max(
                    agreement[i],
                    float(np.max(np.abs((u_vol.u - u_refk.u)[rows][:, cols]))),
                )
            if cross_T is not None and abs(T - cross_T) < 1e-9:
                k2 = int(np.argmin(np.abs(t_lattice - 2.0 * T)))
                cross_diff = operator_norm(
                    vol.kernels[k2].mat - refs[k2 - 1].mat, seed=seed
                )
                ur = refs[k2 - 1].mat
                cross_unitarity = float(
                    np.linalg.norm(ur.conj().T @ ur - np.eye(ur.shape[0]), 2)
                )

    floor = 1e-5
    tb = bracket(np.asarray(T_list))

    def _non_increasing(vals):
        vals = np.asarray(vals)
        if np.max(vals) < floor:
            return True
        return bool(np.all(vals[1:] <= 1.05 * vals[:-1]))

    slope, stderr = loglog_fit(tb, m[0])
    rows = [
        EstimateRow(
            suite="main", check_id="amplitude.sup-deviation", scan_name="T",
            scan_values=T_list, sups=list(m[0]),
            passed=_non_increasing(m[0]),
            threshold="non-increasing in T within 5% (or < 1e-5 floor)",
            detail={"reference_route": list(m_ref[0])},
        ),
        EstimateRow(
            suite="main", check_id="amplitude.sup-deviation-fit", scan_name="T",
            scan_values=T_list, sups=list(m[0]),
            passed=bool(slope is None or slope <= -eps + 0.25),
            threshold=f"log-log exponent <= {-eps + 0.25:g}",
            fitted_exponent=slope, fit_stderr=stderr,
        ),
        EstimateRow(
            suite="main", check_id="amplitude.seminorm-1", scan_name="T",
            scan_values=T_list, sups=list(m[1]),
            passed=bool(np.all(np.isfinite(m[1]))) and _non_increasing(m[1]),
            threshold="finite and non-increasing within 5%",
            detail={"reference_route": list(m_ref[1])},
        ),
        EstimateRow(
            suite="main", check_id="amplitude.seminorm-2", scan_name="T",
            scan_values=T_list, sups=list(m[2]),
            passed=bool(np.all(np.isfinite(m[2]))) and _non_increasing(m[2]),
            threshold="finite and non-increasing within 5%",
            detail={"reference_route": list(m_ref[2])},
        ),
        EstimateRow(
            suite="main", check_id="amplitude.route-agreement", scan_name="T",
            scan_values=T_list, sups=list(agreement),
            passed=bool(np.max(agreement) < 1e-2),
            threshold="sup |u_volterra - u_reference| < 1e-2",
        ),
        EstimateRow(
            suite="main", check_id="volterra.picard-ratio", scan_name="T",
            scan_values=T_list, sups=list(ratios),
            passed=bool(np.max(ratios) < 0.9),
            threshold="increment ratios < 0.9 after the second sweep",
        ),
    ]
    if cross_diff is not None:
        rows.append(
            EstimateRow(
                suite="main", check_id="propagator.reference-agreement",
                scan_name="T", scan_values=[cross_T], sups=[float(cross_diff)],
                passed=bool(cross_diff < 1e-3),
                threshold="||U_volterra - U_reference|| < 1e-3 at (T, 2T)",
            )
        )
        rows.append(
            EstimateRow(
                suite="main", check_id="propagator.reference-unitarity",
                scan_name="T", scan_values=[cross_T], sups=[cross_unitarity],
                passed=bool(cross_unitarity < 1e-6),
                threshold="||Uref* Uref - I|| < 1e-6",
            )
        )
    return EstimateReport(
        suite="main", rows=rows, wall_seconds=sw.seconds,
        metadata={"xi_cut": xi_cut, "y_cut": y_cut, "horizon": horizon,
                  "dtau": dtau, "max_span": max_span},
    )

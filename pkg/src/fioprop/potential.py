"""Catalog of time-dependent potentials with certified derivative decay.

Every model evaluates V(t, x) together with analytic x-derivatives up to
order 4 (Taylor-mode differentiation, not finite differences), and declares
a decay exponent ``epsilon``: for every order a >= 1 the sup over x of
|d^a V(t, .)/dx^a| is expected to fall off at least like <t>^(-a - epsilon),
where <y> = sqrt(1 + y^2).  ``audit_assumption`` measures that decay on a
logarithmic time lattice and fits the exponent.

Shipped models
--------------
zero          V = 0; the trivial reference.
scaled_bump   V = A <t>^(-eps) w(x / (width <t>)) with a Gaussian profile w;
              derivatives decay exactly like <t>^(-a - eps) by construction.
pair_cutoff   V = (1 + x^2)^(-delta/2) * chi(<log<t>> x / <t>): a radial
              long-range pair factor gated by a smooth cutoff chi that kills
              the region |x| <log<t>> <= <t>.
static_sine   V = A sin(x); deliberately violates the decay (audit fixture).
gauss_well    V = depth exp(-(x/width)^2); time-independent bounded well used
              by the reference integrator's convergence study.

The cutoff chi is 0 for |z| <= 1 and 1 for |z| >= 2, glued with the standard
exp(-1/s) smoothstep, so it is C^infinity with all derivatives supported in
1 < |z| < 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidEpsilon, InvalidExponents

KIND_ZERO = 0
KIND_SCALED_BUMP = 1
KIND_PAIR_CUTOFF = 2
KIND_SINE = 3
KIND_GAUSS_WELL = 4

# Highest x-derivative order served by eval_dx.
MAX_DERIV_ORDER = 6

# In the smoothstep variable s, exp(-1/s) underflows against double precision
# well before s = 1/600; the glue is numerically flat there.
_GLUE_EDGE = 1.0 / 600.0


def bracket(y):
    """Smoothed absolute value <y> = sqrt(1 + y^2)."""
    y = np.asarray(y, dtype=float)
    return np.sqrt(1.0 + y * y)


# ---------------------------------------------------------------------------
# Truncated Taylor arithmetic (jets).  A jet is an ndarray of shape
# (order+1, ...) holding Taylor coefficients f^(k)/k! about a base point.
# ---------------------------------------------------------------------------

def _jet_mul(a, b):
    k = a.shape[0]
    out = np.zeros_like(a)
    for m in range(k):
        for j in range(m + 1):
            out[m] += a[j] * b[m - j]
    return out


def _jet_recip(a):
    # Coefficients of 1/f from f, requires f_0 != 0.
    k = a.shape[0]
    out = np.zeros_like(a)
    out[0] = 1.0 / a[0]
    for m in range(1, k):
        acc = np.zeros_like(a[0])
        for j in range(1, m + 1):
            acc = acc + a[j] * out[m - j]
        out[m] = -acc / a[0]
    return out


def _jet_exp(a):
    # exp'(f) = exp(f) f' gives the classical recurrence.
    k = a.shape[0]
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    for m in range(1, k):
        acc = np.zeros_like(a[0])
        for j in range(1, m + 1):
            acc = acc + j * a[j] * out[m - j]
        out[m] = acc / m
    return out


def _sigma_derivs(s, order):
    """Derivatives sigma^(m)(s) of the exp(-1/s) smoothstep on (0, 1)."""
    s = np.asarray(s, dtype=float)
    k = order + 1
    # Jet of -1/u at u = s: coefficient m is (-1)^(m+1) s^(-m-1) for m >= 1.
    w = np.zeros((k,) + s.shape)
    w[0] = -1.0 / s
    for m in range(1, k):
        w[m] = (-1.0) ** (m + 1) * s ** (-(m + 1))
    g = _jet_exp(w)
    # Jet of -1/(1-u) at u = s: all coefficients -(1-s)^(-m-1).
    v = np.zeros((k,) + s.shape)
    for m in range(k):
        v[m] = -((1.0 - s) ** (-(m + 1)))
    g2 = _jet_exp(v)
    sig = _jet_mul(g, _jet_recip(g + g2))
    fact = 1.0
    out = np.empty_like(sig)
    for m in range(k):
        out[m] = sig[m] * fact
        fact *= m + 1
    return out


def chi_derivs(z, order=4):
    """Cutoff chi (0 for |z| <= 1, 1 for |z| >= 2) and derivatives at z.

    Returns an array of shape (order+1,) + z.shape; row m holds chi^(m)(z).
    """
    z = np.asarray(z, dtype=float)
    az = np.abs(z)
    out = np.zeros((order + 1,) + z.shape)
    out[0] = np.where(az >= 2.0 - _GLUE_EDGE, 1.0, 0.0)
    glue = (az > 1.0 + _GLUE_EDGE) & (az < 2.0 - _GLUE_EDGE)
    if np.any(glue):
        s = az[glue] - 1.0
        sig = _sigma_derivs(s, order)
        sgn = np.sign(z[glue])
        out[0][glue] = sig[0]
        for m in range(1, order + 1):
            out[m][glue] = sig[m] * sgn**m
    return out


def _radial_power_derivs(x, delta, order):
    """Derivatives of B(x) = (1 + x^2)^(-delta/2) up to ``order``.

    B^(k)(x) = P_k(x) (1+x^2)^(-delta/2-k) with P polynomial; the recurrence
    P_{k+1} = (1+x^2) P_k' - (delta + 2k) x P_k follows from differentiating.
    """
    x = np.asarray(x, dtype=float)
    one = np.polynomial.Polynomial([1.0])
    xsq1 = np.polynomial.Polynomial([1.0, 0.0, 1.0])
    xpoly = np.polynomial.Polynomial([0.0, 1.0])
    polys = [one]
    for k in range(order):
        p = polys[-1]
        polys.append(xsq1 * p.deriv() - (delta + 2 * k) * xpoly * p)
    w = 1.0 + x * x
    out = np.empty((order + 1,) + x.shape)
    for k, p in enumerate(polys):
        out[k] = p(x) * w ** (-delta / 2.0 - k)
    return out


def _hermite_gauss_derivs(u, order):
    """Derivatives of exp(-u^2): row k is (-1)^k H_k(u) exp(-u^2)."""
    u = np.asarray(u, dtype=float)
    e = np.exp(-u * u)
    out = np.empty((order + 1,) + u.shape)
    h_prev = np.ones_like(u)
    out[0] = e
    if order >= 1:
        h = 2.0 * u
        out[1] = -h * e
        for k in range(2, order + 1):
            h, h_prev = 2.0 * u * h - 2.0 * (k - 1) * h_prev, h
            out[k] = (-1.0) ** k * h * e
    return out


# ---------------------------------------------------------------------------
# Model type
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PotentialModel:
    """Immutable potential with analytic spatial derivatives.

    ``kind``/``params`` drive the dispatch shared with the compiled
    trajectory core; ``epsilon`` is the declared decay exponent and
    ``audit_max_order`` the highest derivative order the model promises to
    certify on a finite time window (see ``audit_assumption``).
    """

    name: str
    kind: int
    params: tuple
    epsilon: float
    audit_max_order: int = 4
    param_array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arr = np.zeros(4, dtype=float)
        arr[: len(self.params)] = self.params
        arr.setflags(write=False)
        object.__setattr__(self, "param_array", arr)

    def eval(self, t, x):
        return self.eval_dx(t, x, 0)

    def eval_dx(self, t, x, order):
        """d^order V(t, x) / dx^order, order 0..MAX_DERIV_ORDER."""
        if not 0 <= order <= MAX_DERIV_ORDER:
            raise ValueError(f"derivative order {order} outside 0..{MAX_DERIV_ORDER}")
        x = np.asarray(x, dtype=float)
        t = float(t)
        if self.kind == KIND_ZERO:
            return np.zeros_like(x)
        if self.kind == KIND_SCALED_BUMP:
            eps, amp, width = self.params
            tau = math.sqrt(1.0 + t * t)
            u = x / (width * tau)
            scale = amp * tau ** (-eps) * (width * tau) ** (-order)
            return scale * _hermite_gauss_derivs(u, order)[order]
        if self.kind == KIND_PAIR_CUTOFF:
            delta, _eps = self.params
            a = self._cutoff_rate(t)
            b = _radial_power_derivs(x, delta, order)
            c = chi_derivs(a * x, order)
            out = np.zeros_like(x)
            for m in range(order + 1):
                out += math.comb(order, m) * b[order - m] * a**m * c[m]
            return out
        if self.kind == KIND_SINE:
            (amp,) = self.params
            return amp * np.sin(x + order * math.pi / 2.0)
        if self.kind == KIND_GAUSS_WELL:
            depth, width = self.params
            u = x / width
            return depth * width ** (-order) * _hermite_gauss_derivs(u, order)[order]
        raise ValueError(f"unknown potential kind {self.kind}")

    def kernel_terms(self, t, q):
        """(V, V_x, V_xx) at time t along positions q, vectorized.

        Fast closed forms used by the trajectory integrators; the compiled
        core mirrors these expressions in C.  eval_dx provides the
        independent Taylor-mode route the tests compare against.
        """
        q = np.asarray(q, dtype=float)
        t = float(t)
        if self.kind == KIND_ZERO:
            z = np.zeros_like(q)
            return z, z.copy(), z.copy()
        if self.kind == KIND_SCALED_BUMP:
            eps, amp, width = self.params
            tau = math.sqrt(1.0 + t * t)
            wt = width * tau
            u = q / wt
            e = np.exp(-u * u)
            c = amp * tau ** (-eps)
            v = c * e
            vx = c / wt * (-2.0 * u) * e
            vxx = c / (wt * wt) * (4.0 * u * u - 2.0) * e
            return v, vx, vxx
        if self.kind == KIND_PAIR_CUTOFF:
            delta, _eps = self.params
            a = self._cutoff_rate(t)
            w = 1.0 + q * q
            b = w ** (-delta / 2.0)
            bp = -delta * q * w ** (-delta / 2.0 - 1.0)
            bpp = (-delta) * w ** (-delta / 2.0 - 1.0) + delta * (delta + 2.0) * q * q * w ** (
                -delta / 2.0 - 2.0
            )
            c0, c1, c2 = _chi012(a * q)
            v = b * c0
            vx = bp * c0 + b * a * c1
            vxx = bpp * c0 + 2.0 * bp * a * c1 + b * a * a * c2
            return v, vx, vxx
        if self.kind == KIND_SINE:
            (amp,) = self.params
            return amp * np.sin(q), amp * np.cos(q), -amp * np.sin(q)
        if self.kind == KIND_GAUSS_WELL:
            depth, width = self.params
            u = q / width
            e = np.exp(-u * u)
            return (
                depth * e,
                depth / width * (-2.0 * u) * e,
                depth / width**2 * (4.0 * u * u - 2.0) * e,
            )
        raise ValueError(f"unknown potential kind {self.kind}")

    def _cutoff_rate(self, t):
        # <log<t>> / <t>, the time-dependent dilation of the cutoff argument.
        tau = math.sqrt(1.0 + t * t)
        lg = math.log(tau)
        return math.sqrt(1.0 + lg * lg) / tau


def _chi012(z):
    """chi, chi', chi'' with explicit quotient-rule formulas (no jets)."""
    z = np.asarray(z, dtype=float)
    az = np.abs(z)
    c0 = np.where(az >= 2.0 - _GLUE_EDGE, 1.0, 0.0)
    c1 = np.zeros_like(z)
    c2 = np.zeros_like(z)
    glue = (az > 1.0 + _GLUE_EDGE) & (az < 2.0 - _GLUE_EDGE)
    if np.any(glue):
        s = az[glue] - 1.0
        r = 1.0 - s
        g = np.exp(-1.0 / s)
        g2 = np.exp(-1.0 / r)
        gp = g / (s * s)
        g2p = g2 / (r * r)
        gpp = g * (1.0 / s**4 - 2.0 / s**3)
        g2pp = g2 * (1.0 / r**4 - 2.0 / r**3)
        d = g + g2
        dp = gp - g2p
        dpp = gpp + g2pp
        sig0 = g / d
        sig1 = (gp * d - g * dp) / d**2
        sig2 = (gpp * d - g * dpp) / d**2 - 2.0 * dp * (gp * d - g * dp) / d**3
        sgn = np.sign(z[glue])
        c0[glue] = sig0
        c1[glue] = sgn * sig1
        c2[glue] = sig2
    return c0, c1, c2


# ---------------------------------------------------------------------------
# Factories and registry
# ---------------------------------------------------------------------------

def zero_potential():
    """The free particle, V = 0."""
    return PotentialModel("zero", KIND_ZERO, (), epsilon=0.5)


def make_scaled_bump(epsilon=0.5, amplitude=1.0, width=1.0):
    """Self-similar bump A <t>^(-eps) exp(-(x / (width <t>))^2).

    Every x-derivative picks up one more factor of (width <t>)^(-1), so the
    declared decay holds with equality; the audit exponents are exact.
    """
    if not 0.0 < epsilon < 1.0:
        raise InvalidEpsilon(f"epsilon must lie in (0, 1), got {epsilon}")
    if not np.isfinite(amplitude):
        raise InvalidEpsilon(f"amplitude must be finite, got {amplitude}")
    if not width > 0.0:
        raise InvalidEpsilon(f"width must be positive, got {width}")
    return PotentialModel(
        "scaled_bump", KIND_SCALED_BUMP, (float(epsilon), float(amplitude), float(width)),
        epsilon=float(epsilon),
    )


def make_pair_cutoff(delta=0.6, epsilon=0.25, audit_max_order=1):
    """Long-range pair factor (1+x^2)^(-delta/2) gated by the moving cutoff.

    Requires 0 < epsilon < delta < 1.  The cutoff argument is
    <log<t>> x / <t>; on any finite time window the logarithmic dilation eats
    part of the decay, so the certified audit order defaults to 1 (higher
    orders only satisfy the declared rate asymptotically).
    """
    if not (0.0 < epsilon < delta < 1.0):
        raise InvalidExponents(
            f"need 0 < epsilon < delta < 1, got epsilon={epsilon}, delta={delta}"
        )
    return PotentialModel(
        "pair_cutoff", KIND_PAIR_CUTOFF, (float(delta), float(epsilon)),
        epsilon=float(epsilon), audit_max_order=int(audit_max_order),
    )


def make_static_sine(amplitude=1.0):
    """t-independent ripple sin(x); fails the decay audit by design."""
    return PotentialModel("static_sine", KIND_SINE, (float(amplitude),), epsilon=0.5)


def make_gauss_well(depth=-1.0, width=2.0):
    """Bounded static well for the reference-integrator convergence study."""
    return PotentialModel(
        "gauss_well", KIND_GAUSS_WELL, (float(depth), float(width)), epsilon=0.5
    )


MODEL_FACTORIES = {
    "zero": zero_potential,
    "scaled_bump": make_scaled_bump,
    "pair_cutoff": make_pair_cutoff,
    "static_sine": make_static_sine,
    "gauss_well": make_gauss_well,
}


def model_from_spec(name, params=None):
    """Instantiate a cataloged model from a name and a parameter mapping."""
    if name not in MODEL_FACTORIES:
        raise InvalidEpsilon(f"unknown model {name!r}; known: {sorted(MODEL_FACTORIES)}")
    return MODEL_FACTORIES[name](**(params or {}))


def catalog_models():
    """Models that claim the decay property (audited in the test suite)."""
    return [
        zero_potential(),
        make_scaled_bump(0.5),
        make_pair_cutoff(0.6, 0.25),
    ]


# ---------------------------------------------------------------------------
# Decay audit
# ---------------------------------------------------------------------------

@dataclass
class AuditReport:
    """Measured derivative decay versus the declared exponent.

    For each order a, ``measured_sup[a]`` is the largest value over the time
    lattice of sup_x |d^a V| <t>^(a + eps); ``fitted_exponent[a]`` the
    log-log slope of sup_x |d^a V(t, .)| against <t> (None when the
    derivative vanishes identically).  An order passes when the sup is
    finite and the fitted slope is at most -(a + eps) + slack.
    """

    model_name: str
    epsilon: float
    orders: tuple
    measured_sup: dict
    fitted_exponent: dict
    required_exponent: dict
    passed_order: dict
    slack: float

    @property
    def passed(self):
        return all(self.passed_order.values())


_AUDIT_FLOOR = 1e-300


def audit_assumption(model, time_samples=None, x_samples=None, max_order=None, slack=0.1):
    """Verify the derivative-decay inequalities on a sample lattice.

    ``time_samples`` defaults to 16 logarithmically spaced points in
    [10, 1000].  ``x_samples`` defaults to a lattice that dilates with <t>
    so the sup tracks the moving support of the shipped models; pass
    absolute positions to override.
    """
    if time_samples is None:
        time_samples = np.geomspace(10.0, 1000.0, 16)
    time_samples = np.asarray(time_samples, dtype=float)
    if len(time_samples) < 8:
        raise ValueError("need at least 8 time samples")
    if max_order is None:
        max_order = model.audit_max_order
    orders = tuple(range(1, max_order + 1))

    scaled_lattice = x_samples is None
    if scaled_lattice:
        offsets = np.linspace(-8.0, 8.0, 321)

    measured_sup, fitted, required, passed = {}, {}, {}, {}
    for a in orders:
        sups = np.empty(len(time_samples))
        for i, t in enumerate(time_samples):
            xs = offsets * bracket(t) if scaled_lattice else np.asarray(x_samples, float)
            sups[i] = np.max(np.abs(model.eval_dx(t, xs, a)))
        tb = bracket(time_samples)
        rate = a + model.epsilon
        measured_sup[a] = float(np.max(sups * tb**rate))
        required[a] = -rate
        if np.all(sups < _AUDIT_FLOOR):
            fitted[a] = None
            passed[a] = True
            continue
        if np.any(sups < _AUDIT_FLOOR):
            # Mixed zero/non-zero sups: fit on the supported part.
            keep = sups >= _AUDIT_FLOOR
        else:
            keep = slice(None)
        slope = np.polyfit(np.log(tb[keep]), np.log(sups[keep]), 1)[0]
        fitted[a] = float(slope)
        passed[a] = bool(np.isfinite(measured_sup[a]) and slope <= -rate + slack)

    return AuditReport(
        model_name=model.name,
        epsilon=model.epsilon,
        orders=orders,
        measured_sup=measured_sup,
        fitted_exponent=fitted,
        required_exponent=required,
        passed_order=passed,
        slack=slack,
    )

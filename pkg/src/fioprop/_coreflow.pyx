# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory core: per-trajectory Dormand-Prince 5(4).

Mirrors ``_pyflow`` (same tableau, same 7-component state, same status
codes) but integrates each trajectory with its own adaptive step in plain C,
which is what makes dense phase-lattice sweeps cheap.  Potential evaluation
is duplicated here in C for the same model kinds; the Python and C
evaluations are cross-checked in the test suite.
"""

from libc.math cimport exp, sqrt, log, sin, cos, fabs, pow, isfinite

cdef int KIND_ZERO = 0
cdef int KIND_SCALED_BUMP = 1
cdef int KIND_PAIR_CUTOFF = 2
cdef int KIND_SINE = 3
cdef int KIND_GAUSS_WELL = 4

cdef double GLUE_EDGE = 1.0 / 600.0

cdef int STATUS_OK = 0
cdef int STATUS_UNDERFLOW = 1
cdef int STATUS_NONFINITE = 2
cdef int STATUS_MAXSTEPS = 3

cdef long MAX_STEPS = 2_000_000

# Dormand-Prince 5(4) coefficients.
cdef double C2 = 1.0 / 5.0
cdef double C3 = 3.0 / 10.0
cdef double C4 = 4.0 / 5.0
cdef double C5 = 8.0 / 9.0
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double A71 = 35.0 / 384.0, A73 = 500.0 / 1113.0, A74 = 125.0 / 192.0
cdef double A75 = -2187.0 / 6784.0, A76 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0


cdef inline void _glue012(double s, double* sig) noexcept nogil:
    # sigma, sigma', sigma'' of the exp(-1/s) smoothstep, 0 < s < 1.
    cdef double r = 1.0 - s
    cdef double g = exp(-1.0 / s)
    cdef double g2 = exp(-1.0 / r)
    cdef double gp = g / (s * s)
    cdef double g2p = g2 / (r * r)
    cdef double gpp = g * (1.0 / (s * s * s * s) - 2.0 / (s * s * s))
    cdef double g2pp = g2 * (1.0 / (r * r * r * r) - 2.0 / (r * r * r))
    cdef double d = g + g2
    cdef double dp = gp - g2p
    cdef double dpp = gpp + g2pp
    cdef double num1 = gp * d - g * dp
    sig[0] = g / d
    sig[1] = num1 / (d * d)
    sig[2] = (gpp * d - g * dpp) / (d * d) - 2.0 * dp * num1 / (d * d * d)


cdef inline void _vq(int kind, const double* pr, double t, double q,
                     double* v, double* vx, double* vxx) noexcept nogil:
    cdef double tau, u, e, c, wt, a, lg, z, az, sgn
    cdef double w, b, bp, bpp, delta
    cdef double sig[3]
    cdef double c0, c1, c2
    if kind == KIND_ZERO:
        v[0] = 0.0; vx[0] = 0.0; vxx[0] = 0.0
        return
    if kind == KIND_SCALED_BUMP:
        # pr = [eps, amplitude, width]
        tau = sqrt(1.0 + t * t)
        wt = pr[2] * tau
        u = q / wt
        e = exp(-u * u)
        c = pr[1] * pow(tau, -pr[0])
        v[0] = c * e
        vx[0] = c / wt * (-2.0 * u) * e
        vxx[0] = c / (wt * wt) * (4.0 * u * u - 2.0) * e
        return
    if kind == KIND_PAIR_CUTOFF:
        # pr = [delta, eps]
        delta = pr[0]
        tau = sqrt(1.0 + t * t)
        lg = log(tau)
        a = sqrt(1.0 + lg * lg) / tau
        z = a * q
        az = fabs(z)
        if az <= 1.0 + GLUE_EDGE:
            v[0] = 0.0; vx[0] = 0.0; vxx[0] = 0.0
            return
        w = 1.0 + q * q
        b = pow(w, -delta / 2.0)
        bp = -delta * q * pow(w, -delta / 2.0 - 1.0)
        bpp = -delta * pow(w, -delta / 2.0 - 1.0) \
            + delta * (delta + 2.0) * q * q * pow(w, -delta / 2.0 - 2.0)
        if az >= 2.0 - GLUE_EDGE:
            c0 = 1.0; c1 = 0.0; c2 = 0.0
        else:
            _glue012(az - 1.0, sig)
            sgn = 1.0 if z > 0.0 else -1.0
            c0 = sig[0]
            c1 = sgn * sig[1]
            c2 = sig[2]
        v[0] = b * c0
        vx[0] = bp * c0 + b * a * c1
        vxx[0] = bpp * c0 + 2.0 * bp * a * c1 + b * a * a * c2
        return
    if kind == KIND_SINE:
        v[0] = pr[0] * sin(q)
        vx[0] = pr[0] * cos(q)
        vxx[0] = -pr[0] * sin(q)
        return
    if kind == KIND_GAUSS_WELL:
        u = q / pr[1]
        e = exp(-u * u)
        v[0] = pr[0] * e
        vx[0] = pr[0] / pr[1] * (-2.0 * u) * e
        vxx[0] = pr[0] / (pr[1] * pr[1]) * (4.0 * u * u - 2.0) * e
        return
    v[0] = 0.0; vx[0] = 0.0; vxx[0] = 0.0


cdef inline void _rhs(int kind, const double* pr, double t, const double* y,
                      double* dy) noexcept nogil:
    cdef double v, vx, vxx
    _vq(kind, pr, t, y[0], &v, &vx, &vxx)
    dy[0] = y[1]
    dy[1] = -vx
    dy[2] = y[4]
    dy[3] = y[5]
    dy[4] = -vxx * y[2]
    dy[5] = -vxx * y[3]
    dy[6] = 0.5 * y[1] * y[1] - v


cdef int _integrate(int kind, const double* pr, double t0, double t1,
                    double* y, double rtol, double atol) noexcept nogil:
    cdef double span = t1 - t0
    if span == 0.0:
        return STATUS_OK
    cdef double sgn = 1.0 if span > 0.0 else -1.0
    cdef double hmin = 1e-14 * fabs(span)
    cdef double t = t0
    cdef double h = span / 16.0
    cdef double k1[7], k2[7], k3[7], k4[7], k5[7], k6[7], k7[7]
    cdef double ytmp[7], ynew[7]
    cdef double enorm, scale, ei, factor
    cdef long steps = 0
    cdef int i, nonfinite = 0, bad
    _rhs(kind, pr, t, y, k1)
    while (t1 - t) * sgn > 0.0:
        steps += 1
        if steps > MAX_STEPS:
            return STATUS_MAXSTEPS
        if fabs(h) < hmin:
            return STATUS_NONFINITE if nonfinite else STATUS_UNDERFLOW
        if (t + h - t1) * sgn > 0.0:
            h = t1 - t
        for i in range(7):
            ytmp[i] = y[i] + h * (A21 * k1[i])
        _rhs(kind, pr, t + C2 * h, ytmp, k2)
        for i in range(7):
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        _rhs(kind, pr, t + C3 * h, ytmp, k3)
        for i in range(7):
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _rhs(kind, pr, t + C4 * h, ytmp, k4)
        for i in range(7):
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        _rhs(kind, pr, t + C5 * h, ytmp, k5)
        for i in range(7):
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                  + A64 * k4[i] + A65 * k5[i])
        _rhs(kind, pr, t + h, ytmp, k6)
        for i in range(7):
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                  + A75 * k5[i] + A76 * k6[i])
        _rhs(kind, pr, t + h, ynew, k7)
        enorm = 0.0
        bad = 0
        for i in range(7):
            ei = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i]
                      + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            scale = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(ynew[i]) else fabs(ynew[i]))
            ei = fabs(ei) / scale
            if not isfinite(ei) or not isfinite(ynew[i]):
                bad = 1
            elif ei > enorm:
                enorm = ei
        if bad:
            nonfinite = 1
            h *= 0.2
            continue
        if enorm <= 1.0:
            t = t + h
            for i in range(7):
                y[i] = ynew[i]
                k1[i] = k7[i]
            nonfinite = 0
        if enorm < 1e-12:
            factor = 5.0
        else:
            factor = 0.9 * pow(enorm, -0.2)
            if factor > 5.0:
                factor = 5.0
            elif factor < 0.2:
                factor = 0.2
        h *= factor
    return STATUS_OK


def flow_continue_inplace(int kind, const double[::1] params, double t0, double t1,
                          double[:, ::1] y, int[::1] status,
                          double rtol, double atol):
    """Advance each row of ``y`` (shape (m, 7)) from t0 to t1 in place."""
    cdef Py_ssize_t i, m = y.shape[0]
    if y.shape[1] != 7:
        raise ValueError("state must have 7 components")
    with nogil:
        for i in range(m):
            status[i] = _integrate(kind, &params[0], t0, t1, &y[i, 0], rtol, atol)

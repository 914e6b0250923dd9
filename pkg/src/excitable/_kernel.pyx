# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: hybrid flow-and-jump integration and the Schmitt scan.

Mirrors ``_pykernel`` statement for statement; the two must stay in step.
"""

from libc.math cimport exp, expm1, fabs, sqrt, pow, ceil, isfinite

cdef enum:
    MAXDIM = 64

cdef struct Model:
    int m
    int n
    const double* rates
    const double* gbar
    const double* erev
    const int* expo
    double cap
    double gleak
    double eleak
    double tau_s
    double alpha
    double gs
    double es

# Dormand-Prince 5(4)
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0, B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0, E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0
cdef double D1 = -12715105075.0 / 11282082432.0, D3 = 87487479700.0 / 32700410799.0
cdef double D4 = -10690763975.0 / 1880347072.0, D5 = 701980252875.0 / 199316789632.0
cdef double D6 = -1453857185.0 / 822651844.0, D7 = 69997945.0 / 29380423.0


cdef inline double _rate(const double* p, double v) noexcept nogil:
    cdef double x = (v - p[2]) / p[3]
    cdef int kind = <int>p[0]
    if kind == 0:
        return p[1] * exp(x)
    if kind == 1:
        return p[1] / (1.0 + exp(-x))
    if fabs(x) < 1e-7:
        return p[1] * (1.0 + 0.5 * x)
    return p[1] * (x / -expm1(-x))


cdef void _field(const Model* M, const double* z, double* dz) noexcept nogil:
    cdef int m = M.m, j, k, r, p
    cdef double v = z[m + 1], s = z[0], a, b, phi, i_ion
    dz[0] = -s / M.tau_s
    for j in range(m):
        a = _rate(M.rates + 8 * j, v)
        b = _rate(M.rates + 8 * j + 4, v)
        dz[1 + j] = a - (a + b) * z[1 + j]
    i_ion = M.gleak * (v - M.eleak) + M.gs * s * (v - M.es)
    for k in range(M.n):
        phi = 1.0
        for j in range(m):
            p = M.expo[k * m + j]
            for r in range(p):
                phi = phi * z[1 + j]
        i_ion = i_ion + M.gbar[k] * phi * (v - M.erev[k])
    dz[m + 1] = -i_ion / M.cap


cdef inline int _emit_dense(int d, int io, int n_out, double out_dt, double limit, double t0, double h,
                            const double* y0, const double* y1, const double* rc3, const double* rc4,
                            const double* rc5, double* out) noexcept nogil:
    cdef double tg, th, th1
    cdef int i
    while io < n_out:
        tg = io * out_dt
        if not tg < limit:
            break
        th = (tg - t0) / h
        if th < 0.0:
            th = 0.0
        elif th > 1.0:
            th = 1.0
        th1 = 1.0 - th
        for i in range(d):
            out[io * d + i] = y0[i] + th * ((y1[i] - y0[i]) + th1 * (rc3[i] + th * (rc4[i] + th1 * rc5[i])))
        io += 1
    return io


cdef inline int _emit_hermite(int d, int io, int n_out, double out_dt, double limit, double t0, double h,
                              const double* y0, const double* f0, const double* y1, const double* f1,
                              double* out) noexcept nogil:
    cdef double tg, th, h00, h10, h01, h11
    cdef int i
    while io < n_out:
        tg = io * out_dt
        if not tg < limit:
            break
        th = (tg - t0) / h
        if th < 0.0:
            th = 0.0
        elif th > 1.0:
            th = 1.0
        h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th)
        h10 = th * (1.0 - th) * (1.0 - th)
        h01 = th * th * (3.0 - 2.0 * th)
        h11 = th * th * (th - 1.0)
        for i in range(d):
            out[io * d + i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i]
        io += 1
    return io


cdef int _dopri(const Model* M, double* y, const double* imp, int L, double t_end, double out_dt,
                int n_out, double rtol, double atol, double max_step, double h0, long max_steps,
                double* out, double* lim, double* diag) noexcept nogil:
    cdef int d = M.m + 2, i, l, io = 0, last, final, rejected
    cdef long steps = 0, nrej = 0, nfev = 0
    cdef double k1[MAXDIM], k2[MAXDIM], k3[MAXDIM], k4[MAXDIM], k5[MAXDIM], k6[MAXDIM], k7[MAXDIM]
    cdef double yt[MAXDIM], yn[MAXDIM], rc3[MAXDIM], rc4[MAXDIM], rc5[MAXDIM]
    cdef double t = 0.0, b, h = h0, rem, err, sc, e, fac, t0, t1, limit, eps = 1e-9 * out_dt
    cdef double ydiff, bspl, hsave

    for l in range(L + 1):
        final = l == L
        b = t_end if final else imp[l]
        _field(M, y, k1)
        nfev += 1
        rejected = 0
        while t < b:
            rem = b - t
            if h > max_step:
                h = max_step
            last = 0
            hsave = h
            if h >= rem:
                h = rem
                last = 1
            for i in range(d):
                yt[i] = y[i] + h * A21 * k1[i]
            _field(M, yt, k2)
            for i in range(d):
                yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
            _field(M, yt, k3)
            for i in range(d):
                yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            _field(M, yt, k4)
            for i in range(d):
                yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            _field(M, yt, k5)
            for i in range(d):
                yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            _field(M, yt, k6)
            for i in range(d):
                yn[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
            _field(M, yn, k7)
            nfev += 6
            err = 0.0
            for i in range(d):
                sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(yn[i]) else fabs(yn[i]))
                e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]) / sc
                err += e * e
            err = sqrt(err / d)
            if not isfinite(err):
                rejected = 1
                nrej += 1
                h *= 0.2
            elif err <= 1.0:
                steps += 1
                if steps > max_steps:
                    diag[0] = t
                    diag[1] = steps
                    diag[2] = nrej
                    diag[3] = nfev
                    return 3
                t0 = t
                t1 = b if last else t + h
                for i in range(d):
                    ydiff = yn[i] - y[i]
                    bspl = h * k1[i] - ydiff
                    rc3[i] = bspl
                    rc4[i] = ydiff - h * k7[i] - bspl
                    rc5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                if last:
                    limit = b + eps if final else b - eps
                else:
                    limit = t1 - eps
                io = _emit_dense(d, io, n_out, out_dt, limit, t0, h, y, yn, rc3, rc4, rc5, out)
                for i in range(d):
                    y[i] = yn[i]
                    k1[i] = k7[i]
                t = t1
                if err == 0.0:
                    fac = 10.0
                else:
                    fac = 0.9 * pow(err, -0.2)
                    if fac > 10.0:
                        fac = 10.0
                    elif fac < 0.2:
                        fac = 0.2
                if rejected and fac > 1.0:
                    fac = 1.0
                rejected = 0
                h = h * fac
                if last and h < hsave:
                    h = hsave
            else:
                rejected = 1
                nrej += 1
                fac = 0.9 * pow(err, -0.2)
                if fac < 0.2:
                    fac = 0.2
                h = h * fac
            if h < 1e-14 * (1.0 + fabs(t)):
                diag[0] = t
                diag[1] = steps
                diag[2] = nrej
                diag[3] = nfev
                return 1
        if not final:
            for i in range(d):
                lim[l * d + i] = y[i]
            y[0] = (1.0 - M.alpha) * y[0] + M.alpha
    while io < n_out:
        for i in range(d):
            out[io * d + i] = y[i]
        io += 1
    diag[0] = t
    diag[1] = steps
    diag[2] = nrej
    diag[3] = nfev
    return 0


cdef int _rk4(const Model* M, double* y, const double* imp, int L, double t_end, double out_dt,
              int n_out, double step, long max_steps, double* out, double* lim, double* diag) noexcept nogil:
    cdef int d = M.m + 2, i, l, io = 0, final
    cdef long nsub, q, steps = 0, nfev = 0
    cdef double k1[MAXDIM], k2[MAXDIM], k3[MAXDIM], k4[MAXDIM], yt[MAXDIM], yn[MAXDIM], fn[MAXDIM]
    cdef double t = 0.0, a, b, h, t0, limit, eps = 1e-9 * out_dt

    for l in range(L + 1):
        final = l == L
        b = t_end if final else imp[l]
        a = t
        if b > a:
            nsub = <long>ceil((b - a) / step - 1e-9)
            if nsub < 1:
                nsub = 1
            h = (b - a) / nsub
            _field(M, y, k1)
            nfev += 1
            for q in range(nsub):
                for i in range(d):
                    yt[i] = y[i] + 0.5 * h * k1[i]
                _field(M, yt, k2)
                for i in range(d):
                    yt[i] = y[i] + 0.5 * h * k2[i]
                _field(M, yt, k3)
                for i in range(d):
                    yt[i] = y[i] + h * k3[i]
                _field(M, yt, k4)
                for i in range(d):
                    yn[i] = y[i] + h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
                _field(M, yn, fn)
                nfev += 4
                steps += 1
                if steps > max_steps:
                    diag[0] = t
                    return 3
                for i in range(d):
                    if not isfinite(yn[i]):
                        diag[0] = t
                        return 2
                t0 = t
                if q == nsub - 1:
                    t = b
                    limit = b + eps if final else b - eps
                else:
                    t = a + (q + 1) * h
                    limit = t - eps
                io = _emit_hermite(d, io, n_out, out_dt, limit, t0, t - t0, y, k1, yn, fn, out)
                for i in range(d):
                    y[i] = yn[i]
                    k1[i] = fn[i]
        if not final:
            for i in range(d):
                lim[l * d + i] = y[i]
            y[0] = (1.0 - M.alpha) * y[0] + M.alpha
    while io < n_out:
        for i in range(d):
            out[io * d + i] = y[i]
        io += 1
    diag[0] = t
    diag[1] = steps
    diag[2] = 0
    diag[3] = nfev
    return 0


def integrate_hybrid(const double[::1] rates, const double[::1] gbar, const double[::1] erev,
                     const int[::1] expo, double[::1] params, double[::1] y,
                     const double[::1] impulses, double t_end, double out_dt, int method,
                     double rtol, double atol, double max_step, double h0, long max_steps,
                     double[:, ::1] out, double[:, ::1] lim, double[::1] diag):
    """Integrate in place; returns a status code (0 ok, 1 step underflow, 2 non-finite, 3 step budget).

    ``params`` is ``(C, g_leak, E_leak, tau_s, alpha, g_s, E_s)``; ``y`` holds
    the initial state and receives the final one.
    """
    cdef Model M
    cdef int status, L = impulses.shape[0], n_out = out.shape[0], d = y.shape[0]
    cdef double dummy = 0.0
    cdef int idummy = 0
    if d > MAXDIM:
        raise ValueError("state dimension exceeds kernel limit")
    M.m = d - 2
    M.n = gbar.shape[0]
    M.rates = &rates[0] if rates.shape[0] else &dummy
    M.gbar = &gbar[0] if gbar.shape[0] else &dummy
    M.erev = &erev[0] if erev.shape[0] else &dummy
    M.expo = &expo[0] if expo.shape[0] else &idummy
    M.cap, M.gleak, M.eleak, M.tau_s, M.alpha, M.gs, M.es = params[0], params[1], params[2], params[3], params[4], params[5], params[6]
    cdef double* pimp = <double*>&impulses[0] if L else &dummy
    cdef double* plim = &lim[0, 0] if L else &dummy
    cdef double* pout = &out[0, 0] if n_out else &dummy
    for i in range(d):
        if not isfinite(y[i]):
            return 2
    with nogil:
        if method == 0:
            status = _dopri(&M, &y[0], pimp, L, t_end, out_dt, n_out, rtol, atol, max_step, h0,
                            max_steps, pout, plim, &diag[0])
        else:
            status = _rk4(&M, &y[0], pimp, L, t_end, out_dt, n_out, max_step, max_steps,
                          pout, plim, &diag[0])
    return status


def field(const double[::1] rates, const double[::1] gbar, const double[::1] erev,
          const int[::1] expo, double[::1] params, double[::1] z, double[::1] dz):
    """Evaluate the unforced field once (used to cross-check the two backends)."""
    cdef Model M
    cdef double dummy = 0.0
    cdef int idummy = 0
    M.m = z.shape[0] - 2
    M.n = gbar.shape[0]
    M.rates = &rates[0] if rates.shape[0] else &dummy
    M.gbar = &gbar[0] if gbar.shape[0] else &dummy
    M.erev = &erev[0] if erev.shape[0] else &dummy
    M.expo = &expo[0] if expo.shape[0] else &idummy
    M.cap, M.gleak, M.eleak, M.tau_s, M.alpha, M.gs, M.es = params[0], params[1], params[2], params[3], params[4], params[5], params[6]
    _field(&M, &z[0], &dz[0])


def schmitt_windows(const double[::1] v, double v_low, double v_high, long[:, ::1] out):
    """Supra-``v_high`` runs that opened while armed; returns the number written.

    Row ``(i0, i1)`` spans the first and last sample above ``v_high``. A run
    still open at the end of the signal is dropped.
    """
    cdef Py_ssize_t i, n = v.shape[0], start = 0
    cdef int armed = 1, inside = 0
    cdef long c = 0
    with nogil:
        for i in range(n):
            if inside:
                if v[i] <= v_high:
                    out[c, 0] = start
                    out[c, 1] = i - 1
                    c += 1
                    inside = 0
                    armed = v[i] <= v_low
            elif armed:
                if v[i] > v_high:
                    inside = 1
                    armed = 0
                    start = i
            elif v[i] <= v_low:
                armed = 1
    return c

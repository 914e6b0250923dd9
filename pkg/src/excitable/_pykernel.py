"""Pure-Python mirror of ``_kernel.pyx``.

Same arguments, same in-place outputs, same floating-point operation order,
so both backends agree to round-off (usually bit for bit).
"""

from __future__ import annotations

import math

from math import exp, expm1, isfinite, sqrt

A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0,
                          22.0 / 525.0, -1.0 / 40.0)
D1, D3 = -12715105075.0 / 11282082432.0, 87487479700.0 / 32700410799.0
D4, D5 = -10690763975.0 / 1880347072.0, 701980252875.0 / 199316789632.0
D6, D7 = -1453857185.0 / 822651844.0, 69997945.0 / 29380423.0


def _rate(kind, scale, mid, slope, v):
    x = (v - mid) / slope
    if kind == 0:
        return scale * exp(x)
    if kind == 1:
        return scale / (1.0 + exp(-x))
    if abs(x) < 1e-7:
        return scale * (1.0 + 0.5 * x)
    return scale * (x / -expm1(-x))


class _Model:
    __slots__ = ("m", "gates", "currents", "cap", "gleak", "eleak", "tau_s", "alpha", "gs", "es")

    def __init__(self, rates, gbar, erev, expo, params, d):
        m = d - 2
        self.m = m
        r = [float(a) for a in rates]
        self.gates = [
            ((int(r[8 * j]), r[8 * j + 1], r[8 * j + 2], r[8 * j + 3]),
             (int(r[8 * j + 4]), r[8 * j + 5], r[8 * j + 6], r[8 * j + 7]))
            for j in range(m)
        ]
        ex = [int(p) for p in expo]
        self.currents = [(float(gbar[k]), float(erev[k]), ex[k * m:(k + 1) * m]) for k in range(len(gbar))]
        (self.cap, self.gleak, self.eleak, self.tau_s, self.alpha, self.gs, self.es) = (float(p) for p in params[:7])

    def field(self, z):
        m = self.m
        v = z[m + 1]
        s = z[0]
        dz = [0.0] * (m + 2)
        dz[0] = -s / self.tau_s
        for j, (pa, pb) in enumerate(self.gates):
            a = _rate(*pa, v)
            b = _rate(*pb, v)
            dz[1 + j] = a - (a + b) * z[1 + j]
        i_ion = self.gleak * (v - self.eleak) + self.gs * s * (v - self.es)
        for gbar, erev, ex in self.currents:
            phi = 1.0
            for j in range(m):
                for _ in range(ex[j]):
                    phi = phi * z[1 + j]
            i_ion = i_ion + gbar * phi * (v - erev)
        dz[m + 1] = -i_ion / self.cap
        return dz


def _emit_dense(d, io, n_out, out_dt, limit, t0, h, y0, y1, rc3, rc4, rc5, rows):
    while io < n_out:
        tg = io * out_dt
        if not tg < limit:
            break
        th = (tg - t0) / h
        th = 0.0 if th < 0.0 else (1.0 if th > 1.0 else th)
        th1 = 1.0 - th
        rows[io] = [y0[i] + th * ((y1[i] - y0[i]) + th1 * (rc3[i] + th * (rc4[i] + th1 * rc5[i])))
                    for i in range(d)]
        io += 1
    return io


def _emit_hermite(d, io, n_out, out_dt, limit, t0, h, y0, f0, y1, f1, rows):
    while io < n_out:
        tg = io * out_dt
        if not tg < limit:
            break
        th = (tg - t0) / h
        th = 0.0 if th < 0.0 else (1.0 if th > 1.0 else th)
        h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th)
        h10 = th * (1.0 - th) * (1.0 - th)
        h01 = th * th * (3.0 - 2.0 * th)
        h11 = th * th * (th - 1.0)
        rows[io] = [h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i] for i in range(d)]
        io += 1
    return io


def _dopri(M, y, imp, t_end, out_dt, n_out, rtol, atol, max_step, h0, max_steps, rows, lim, diag):
    d = M.m + 2
    f = M.field
    rng = range(d)
    steps = nrej = nfev = 0
    io = 0
    t = 0.0
    h = h0
    eps = 1e-9 * out_dt
    L = len(imp)
    for l in range(L + 1):
        final = l == L
        b = t_end if final else imp[l]
        k1 = f(y)
        nfev += 1
        rejected = False
        while t < b:
            rem = b - t
            if h > max_step:
                h = max_step
            last = False
            hsave = h
            if h >= rem:
                h = rem
                last = True
            k2 = f([y[i] + h * A21 * k1[i] for i in rng])
            k3 = f([y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in rng])
            k4 = f([y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in rng])
            k5 = f([y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) for i in rng])
            k6 = f([y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
                    for i in rng])
            yn = [y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]) for i in rng]
            k7 = f(yn)
            nfev += 6
            err = 0.0
            for i in rng:
                sc = atol + rtol * (abs(y[i]) if abs(y[i]) > abs(yn[i]) else abs(yn[i]))
                e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]) / sc
                err += e * e
            err = sqrt(err / d)
            if not isfinite(err):
                rejected = True
                nrej += 1
                h *= 0.2
            elif err <= 1.0:
                steps += 1
                if steps > max_steps:
                    diag[:4] = (t, steps, nrej, nfev)
                    return 3, y
                t0 = t
                t1 = b if last else t + h
                rc3 = [0.0] * d
                rc4 = [0.0] * d
                rc5 = [0.0] * d
                for i in rng:
                    ydiff = yn[i] - y[i]
                    bspl = h * k1[i] - ydiff
                    rc3[i] = bspl
                    rc4[i] = ydiff - h * k7[i] - bspl
                    rc5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                if last:
                    limit = b + eps if final else b - eps
                else:
                    limit = t1 - eps
                io = _emit_dense(d, io, n_out, out_dt, limit, t0, h, y, yn, rc3, rc4, rc5, rows)
                y = yn
                k1 = k7
                t = t1
                if err == 0.0:
                    fac = 10.0
                else:
                    fac = 0.9 * math.pow(err, -0.2)
                    fac = 10.0 if fac > 10.0 else (0.2 if fac < 0.2 else fac)
                if rejected and fac > 1.0:
                    fac = 1.0
                rejected = False
                h = h * fac
                if last and h < hsave:
                    h = hsave
            else:
                rejected = True
                nrej += 1
                fac = 0.9 * math.pow(err, -0.2)
                if fac < 0.2:
                    fac = 0.2
                h = h * fac
            if h < 1e-14 * (1.0 + abs(t)):
                diag[:4] = (t, steps, nrej, nfev)
                return 1, y
        if not final:
            lim[l] = list(y)
            y = list(y)
            y[0] = (1.0 - M.alpha) * y[0] + M.alpha
    while io < n_out:
        rows[io] = list(y)
        io += 1
    diag[:4] = (t, steps, nrej, nfev)
    return 0, y


def _rk4(M, y, imp, t_end, out_dt, n_out, step, max_steps, rows, lim, diag):
    d = M.m + 2
    f = M.field
    rng = range(d)
    steps = nfev = 0
    io = 0
    t = 0.0
    eps = 1e-9 * out_dt
    L = len(imp)
    for l in range(L + 1):
        final = l == L
        b = t_end if final else imp[l]
        a = t
        if b > a:
            nsub = max(1, int(math.ceil((b - a) / step - 1e-9)))
            h = (b - a) / nsub
            k1 = f(y)
            nfev += 1
            for q in range(nsub):
                k2 = f([y[i] + 0.5 * h * k1[i] for i in rng])
                k3 = f([y[i] + 0.5 * h * k2[i] for i in rng])
                k4 = f([y[i] + h * k3[i] for i in rng])
                yn = [y[i] + h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0 for i in rng]
                fn = f(yn)
                nfev += 4
                steps += 1
                if steps > max_steps:
                    diag[0] = t
                    return 3, y
                if not all(isfinite(c) for c in yn):
                    diag[0] = t
                    return 2, y
                t0 = t
                if q == nsub - 1:
                    t = b
                    limit = b + eps if final else b - eps
                else:
                    t = a + (q + 1) * h
                    limit = t - eps
                io = _emit_hermite(d, io, n_out, out_dt, limit, t0, t - t0, y, k1, yn, fn, rows)
                y = yn
                k1 = fn
        if not final:
            lim[l] = list(y)
            y = list(y)
            y[0] = (1.0 - M.alpha) * y[0] + M.alpha
    while io < n_out:
        rows[io] = list(y)
        io += 1
    diag[:4] = (t, steps, 0, nfev)
    return 0, y


def integrate_hybrid(rates, gbar, erev, expo, params, y, impulses, t_end, out_dt, method,
                     rtol, atol, max_step, h0, max_steps, out, lim, diag):
    """See ``_kernel.integrate_hybrid``."""
    d = y.shape[0]
    M = _Model(rates, gbar, erev, expo, params, d)
    y0 = [float(a) for a in y]
    if not all(isfinite(a) for a in y0):
        return 2
    imp = [float(a) for a in impulses]
    n_out = out.shape[0]
    rows = [None] * n_out
    limits = [None] * len(imp)
    dg = [0.0] * 4
    if method == 0:
        res = _dopri(M, y0, imp, float(t_end), float(out_dt), n_out, float(rtol), float(atol),
                     float(max_step), float(h0), int(max_steps), rows, limits, dg)
    else:
        res = _rk4(M, y0, imp, float(t_end), float(out_dt), n_out, float(max_step), int(max_steps),
                   rows, limits, dg)
    status, yf = res
    diag[:4] = dg
    filled = [r for r in rows if r is not None]
    if filled:
        out[: len(filled)] = filled
    for l, row in enumerate(limits):
        if row is not None:
            lim[l] = row
    y[:] = yf
    return status


def field(rates, gbar, erev, expo, params, z, dz):
    M = _Model(rates, gbar, erev, expo, params, z.shape[0])
    dz[:] = M.field([float(a) for a in z])


def schmitt_windows(v, v_low, v_high, out):
    """See ``_kernel.schmitt_windows``."""
    armed, inside, start, c = True, False, 0, 0
    for i, x in enumerate(v.tolist()):
        if inside:
            if x <= v_high:
                out[c, 0] = start
                out[c, 1] = i - 1
                c += 1
                inside = False
                armed = x <= v_low
        elif armed:
            if x > v_high:
                inside = True
                armed = False
                start = i
        elif x <= v_low:
            armed = True
    return c

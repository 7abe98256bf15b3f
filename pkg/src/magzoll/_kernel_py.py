"""Pure-Python adaptive stepper for the prescribed-curvature flow.

Fallback implementation of the kernel interface; the compiled extension in
``_kernel.pyx`` mirrors this logic step for step (same tableau, same step
control, same renormalization), so either backend can drive the flow module.

State layout: ``y = (q1, q2, v1, v2)`` in chart coordinates.  The equation is

    dq/dt = v,
    dv^k/dt = -Gamma^k_ij v^i v^j + lam * f(q) * (J v)^k,

with J the metric rotation by +pi/2 in the oriented frame.  After every
accepted step the velocity is projected back to unit metric norm.
"""

import math

# Dormand-Prince 5(4) tableau.
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                                -17253 / 339200, 22 / 525, -1 / 40)

STATUS_DONE = 0
STATUS_FULL = 1
STATUS_POLE = 2
STATUS_UNDERFLOW = 3


def _make_rhs(payload, lam):
    """Build a scalar RHS closure for the given surface payload."""
    orient = payload.orient
    f = payload.f_scalar

    if payload.kind_code == 0:
        g11, g12, g22, sqrtg, mod1 = payload.sp
        wrap = mod1 != 0.0

        def rhs(y, out):
            x, w, v1, v2 = y
            if wrap:
                fx = f(x - math.floor(x), w - math.floor(w))
            else:
                fx = f(x, w)
            c = lam * fx * orient / sqrtg
            out[0] = v1
            out[1] = v2
            out[2] = -c * (g12 * v1 + g22 * v2)
            out[3] = c * (g11 * v1 + g12 * v2)

        return rhs

    if payload.kind_code == 1:
        R = payload.sp[0]

        def rhs(y, out):
            th, ph, vt, vp = y
            a = R * math.sin(th / R)
            a1 = math.cos(th / R)
            fx = f(th, ph)
            c = lam * fx * orient
            out[0] = vt
            out[1] = vp
            out[2] = a * a1 * vp * vp - c * a * vp
            out[3] = -2.0 * (a1 / a) * vt * vp + c * vt / a

        return rhs

    a_fn = payload.a_scalar
    a1_fn = payload.a1_scalar

    def rhs(y, out):
        th, ph, vt, vp = y
        a = a_fn(th)
        a1 = a1_fn(th)
        fx = f(th, ph)
        c = lam * fx * orient
        out[0] = vt
        out[1] = vp
        out[2] = a * a1 * vp * vp - c * a * vp
        out[3] = -2.0 * (a1 / a) * vt * vp + c * vt / a

    return rhs


def _unit_norm(payload, y):
    if payload.kind_code == 0:
        g11, g12, g22 = payload.sp[0], payload.sp[1], payload.sp[2]
        return math.sqrt(g11 * y[2] * y[2] + 2 * g12 * y[2] * y[3] + g22 * y[3] * y[3])
    if payload.kind_code == 1:
        a = payload.sp[0] * math.sin(y[0] / payload.sp[0])
    else:
        a = payload.a_scalar(y[0])
    return math.sqrt(y[2] * y[2] + a * a * y[3] * y[3])


def propagate(payload, lam, y0, t0, t1, rtol, atol, max_step, out_t, out_y, h0=0.0):
    """Integrate from (t0, y0) toward t1, writing accepted samples.

    ``h0 > 0`` resumes with a given trial step (chunk continuation).
    Returns ``(n, status, min_h, max_h, max_dev, h_next)`` where ``n`` is the
    number of samples written (the initial state included).
    """
    rhs = _make_rhs(payload, lam)
    pole_lo, pole_hi = payload.pole_lo, payload.pole_hi
    cap = len(out_t)

    y = [float(y0[0]), float(y0[1]), float(y0[2]), float(y0[3])]
    t = float(t0)

    k1 = [0.0] * 4
    k2 = [0.0] * 4
    k3 = [0.0] * 4
    k4 = [0.0] * 4
    k5 = [0.0] * 4
    k6 = [0.0] * 4
    k7 = [0.0] * 4
    yt = [0.0] * 4
    yn = [0.0] * 4

    out_t[0] = t
    for i in range(4):
        out_y[0, i] = y[i]
    n = 1

    min_h = math.inf
    max_h = 0.0
    max_dev = 0.0
    h = h0 if h0 > 0.0 else min(max_step, t1 - t0, 1e-3)
    status = STATUS_DONE

    while t < t1 - 1e-15 * max(1.0, abs(t1)):
        if n >= cap:
            status = STATUS_FULL
            break
        h = min(h, t1 - t, max_step)
        if h < 1e-14 * max(1.0, abs(t)):
            status = STATUS_UNDERFLOW
            break

        rhs(y, k1)
        for i in range(4):
            yt[i] = y[i] + h * _A21 * k1[i]
        rhs(yt, k2)
        for i in range(4):
            yt[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        rhs(yt, k3)
        for i in range(4):
            yt[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        rhs(yt, k4)
        for i in range(4):
            yt[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        rhs(yt, k5)
        for i in range(4):
            yt[i] = y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                                + _A64 * k4[i] + _A65 * k5[i])
        rhs(yt, k6)
        for i in range(4):
            yn[i] = y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                                + _B5 * k5[i] + _B6 * k6[i])
        rhs(yn, k7)

        err = 0.0
        bad = False
        for i in range(4):
            e = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i]
                     + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i])
            sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
            r = e / sc
            if math.isnan(r) or math.isinf(r):
                bad = True
                break
            err += r * r
        err_norm = math.sqrt(err / 4.0) if not bad else math.inf

        if err_norm <= 1.0:
            t += h
            nn = _unit_norm(payload, yn)
            dev = abs(nn - 1.0)
            if dev > max_dev:
                max_dev = dev
            yn[2] /= nn
            yn[3] /= nn
            y[0], y[1], y[2], y[3] = yn
            out_t[n] = t
            for i in range(4):
                out_y[n, i] = y[i]
            n += 1
            if h < min_h:
                min_h = h
            if h > max_h:
                max_h = h
            if not pole_lo < y[0] < pole_hi:
                status = STATUS_POLE
                break
            if err_norm == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
            h = h * fac
        else:
            if math.isinf(err_norm):
                fac = 0.2
            else:
                fac = max(0.2, min(0.9, 0.9 * err_norm ** -0.2))
            h = h * fac

    return n, status, (0.0 if math.isinf(min_h) else min_h), max_h, max_dev, h

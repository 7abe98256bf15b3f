# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled adaptive stepper for the prescribed-curvature flow.

Mirrors ``_kernel_py`` exactly: same Dormand-Prince 5(4) tableau, step
control, unit-norm renormalization, and status codes.  Magnetic functions
and warp profiles arrive as postfix stack programs (see ``fields``).
"""

from libc.math cimport sin, cos, exp, pow, sqrt, floor, fabs, isnan, isinf

cdef double INF = float("inf")

DEF MAX_STACK = 64

cdef struct Prog:
    int n
    const int* ops
    const double* args

cdef struct Surf:
    int kind
    double g11, g12, g22, sqrtg
    int mod1
    double R
    double orient
    Prog f
    Prog a
    Prog a1


cdef inline double eval_prog(const Prog* p, double u, double v) noexcept nogil:
    cdef double stack[MAX_STACK]
    cdef int top = -1
    cdef int i, op
    for i in range(p.n):
        op = p.ops[i]
        if op == 0:
            top += 1
            stack[top] = p.args[i]
        elif op == 1:
            top += 1
            stack[top] = u
        elif op == 2:
            top += 1
            stack[top] = v
        elif op == 3:
            stack[top - 1] += stack[top]
            top -= 1
        elif op == 4:
            stack[top - 1] -= stack[top]
            top -= 1
        elif op == 5:
            stack[top - 1] *= stack[top]
            top -= 1
        elif op == 6:
            stack[top - 1] /= stack[top]
            top -= 1
        elif op == 7:
            stack[top - 1] = pow(stack[top - 1], stack[top])
            top -= 1
        elif op == 8:
            stack[top] = -stack[top]
        elif op == 9:
            stack[top] = sin(stack[top])
        elif op == 10:
            stack[top] = cos(stack[top])
        elif op == 11:
            stack[top] = exp(stack[top])
        elif op == 12:
            stack[top] *= stack[top]
    return stack[0]


cdef inline void rhs(const Surf* s, double lam, const double* y, double* dy) noexcept nogil:
    cdef double fx, c, a, a1
    if s.kind == 0:
        if s.mod1:
            fx = eval_prog(&s.f, y[0] - floor(y[0]), y[1] - floor(y[1]))
        else:
            fx = eval_prog(&s.f, y[0], y[1])
        c = lam * fx * s.orient / s.sqrtg
        dy[0] = y[2]
        dy[1] = y[3]
        dy[2] = -c * (s.g12 * y[2] + s.g22 * y[3])
        dy[3] = c * (s.g11 * y[2] + s.g12 * y[3])
    else:
        if s.kind == 1:
            a = s.R * sin(y[0] / s.R)
            a1 = cos(y[0] / s.R)
        else:
            a = eval_prog(&s.a, y[0], 0.0)
            a1 = eval_prog(&s.a1, y[0], 0.0)
        fx = eval_prog(&s.f, y[0], y[1])
        c = lam * fx * s.orient
        dy[0] = y[2]
        dy[1] = y[3]
        dy[2] = a * a1 * y[3] * y[3] - c * a * y[3]
        dy[3] = -2.0 * (a1 / a) * y[2] * y[3] + c * y[2] / a


cdef inline double unit_norm(const Surf* s, const double* y) noexcept nogil:
    cdef double a
    if s.kind == 0:
        return sqrt(s.g11 * y[2] * y[2] + 2.0 * s.g12 * y[2] * y[3] + s.g22 * y[3] * y[3])
    if s.kind == 1:
        a = s.R * sin(y[0] / s.R)
    else:
        a = eval_prog(&s.a, y[0], 0.0)
    return sqrt(y[2] * y[2] + a * a * y[3] * y[3])


def propagate(int kind, double[::1] sp,
              const int[::1] f_ops, const double[::1] f_args,
              const int[::1] a_ops, const double[::1] a_args,
              const int[::1] a1_ops, const double[::1] a1_args,
              double lam, double orient,
              double[::1] y0, double t0, double t1,
              double rtol, double atol, double max_step,
              double pole_lo, double pole_hi,
              double[::1] out_t, double[:, ::1] out_y, double h0=0.0):
    """Same contract as ``_kernel_py.propagate``."""
    cdef Surf s
    s.kind = kind
    s.orient = orient
    s.g11 = s.g12 = s.g22 = 0.0
    s.sqrtg = 1.0
    s.mod1 = 0
    s.R = 1.0
    if kind == 0:
        s.g11 = sp[0]
        s.g12 = sp[1]
        s.g22 = sp[2]
        s.sqrtg = sp[3]
        s.mod1 = 1 if sp[4] != 0.0 else 0
    elif kind == 1:
        s.R = sp[0]
    s.f.n = f_ops.shape[0]
    s.f.ops = &f_ops[0]
    s.f.args = &f_args[0]
    s.a.n = a_ops.shape[0]
    s.a.ops = &a_ops[0]
    s.a.args = &a_args[0]
    s.a1.n = a1_ops.shape[0]
    s.a1.ops = &a1_ops[0]
    s.a1.args = &a1_args[0]

    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef double k5[4]
    cdef double k6[4]
    cdef double k7[4]
    cdef double yt[4]
    cdef double yn[4]
    cdef double y[4]

    cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
    cdef double A21 = 1.0 / 5
    cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
    cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
    cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187
    cdef double A53 = 64448.0 / 6561, A54 = -212.0 / 729
    cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247
    cdef double A64 = 49.0 / 176, A65 = -5103.0 / 18656
    cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192
    cdef double B5 = -2187.0 / 6784, B6 = 11.0 / 84
    cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
    cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40

    cdef Py_ssize_t cap = out_t.shape[0]
    cdef Py_ssize_t n = 1
    cdef int status = 0
    cdef int i
    cdef double t = t0
    cdef double h, e, sc, r, err, err_norm, nn, dev, fac
    cdef double min_h = INF, max_h = 0.0, max_dev = 0.0
    cdef bint bad

    for i in range(4):
        y[i] = y0[i]
    out_t[0] = t
    for i in range(4):
        out_y[0, i] = y[i]

    if h0 > 0.0:
        h = h0
    else:
        h = max_step
        if t1 - t0 < h:
            h = t1 - t0
        if h > 1e-3:
            h = 1e-3

    with nogil:
        while t < t1 - 1e-15 * max(1.0, fabs(t1)):
            if n >= cap:
                status = 1
                break
            if h > t1 - t:
                h = t1 - t
            if h > max_step:
                h = max_step
            if h < 1e-14 * max(1.0, fabs(t)):
                status = 3
                break

            rhs(&s, lam, y, k1)
            for i in range(4):
                yt[i] = y[i] + h * A21 * k1[i]
            rhs(&s, lam, yt, k2)
            for i in range(4):
                yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
            rhs(&s, lam, yt, k3)
            for i in range(4):
                yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            rhs(&s, lam, yt, k4)
            for i in range(4):
                yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            rhs(&s, lam, yt, k5)
            for i in range(4):
                yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                    + A64 * k4[i] + A65 * k5[i])
            rhs(&s, lam, yt, k6)
            for i in range(4):
                yn[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                                    + B5 * k5[i] + B6 * k6[i])
            rhs(&s, lam, yn, k7)

            err = 0.0
            bad = False
            for i in range(4):
                e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i]
                         + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                sc = atol + rtol * max(fabs(y[i]), fabs(yn[i]))
                r = e / sc
                if isnan(r) or isinf(r):
                    bad = True
                    break
                err += r * r
            if bad:
                err_norm = INF
            else:
                err_norm = sqrt(err / 4.0)

            if err_norm <= 1.0:
                t += h
                nn = unit_norm(&s, yn)
                dev = fabs(nn - 1.0)
                if dev > max_dev:
                    max_dev = dev
                yn[2] /= nn
                yn[3] /= nn
                for i in range(4):
                    y[i] = yn[i]
                out_t[n] = t
                for i in range(4):
                    out_y[n, i] = y[i]
                n += 1
                if h < min_h:
                    min_h = h
                if h > max_h:
                    max_h = h
                if not (pole_lo < y[0] < pole_hi):
                    status = 2
                    break
                if err_norm == 0.0:
                    fac = 5.0
                else:
                    fac = 0.9 * pow(err_norm, -0.2)
                    if fac > 5.0:
                        fac = 5.0
                    elif fac < 0.2:
                        fac = 0.2
                h = h * fac
            else:
                if isinf(err_norm):
                    fac = 0.2
                else:
                    fac = 0.9 * pow(err_norm, -0.2)
                    if fac < 0.2:
                        fac = 0.2
                    elif fac > 0.9:
                        fac = 0.9
                h = h * fac

    return n, status, (0.0 if isinf(min_h) else min_h), max_h, max_dev, h

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for path integration.

Mirrors ``_kernel_py`` operation for operation so both backends produce the
same floating-point results.
"""
from libc.math cimport sin, exp, log1p

# coefficient rows, see _backend.COEFFICIENTS
cdef enum:
    A1 = 0
    A2 = 1
    B1 = 2
    B2 = 3
    C1 = 4
    C2 = 5
    M = 6
    S1 = 7
    S2 = 8
    G1 = 9
    G2 = 10
    D1 = 11
    D2 = 12
    NCOEF = 13

cdef double XI_MAX = 700.0
cdef double XI_MIN = -1e300

cdef struct Coefs:
    const int* kind
    const double* par
    const long* pw_off
    const double* pw_t
    const double* pw_v


cdef inline double tf_eval(const Coefs* cf, int k, double t) noexcept nogil:
    cdef int kind = cf.kind[k]
    cdef const double* p = cf.par + 4 * k
    cdef long lo, hi, mid
    if kind == 0:
        return p[0]
    if kind == 1:
        return p[0] + p[1] * sin(p[2] * t + p[3])
    # piecewise: last breakpoint <= t
    lo = cf.pw_off[k]
    hi = cf.pw_off[k + 1]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cf.pw_t[mid] <= t:
            lo = mid
        else:
            hi = mid
    return cf.pw_v[lo]


cdef inline void fill(const Coefs* cf, double t, double* v) noexcept nogil:
    cdef int k
    for k in range(NCOEF):
        v[k] = tf_eval(cf, k, t)


cdef inline bint bad(double xi) noexcept nogil:
    return not (xi <= XI_MAX and xi > XI_MIN)


def integrate_log(const int[::1] kind, const double[:, ::1] par, const long[::1] pw_off,
                  const double[::1] pw_t, const double[::1] pw_v,
                  const double[::1] shape, const double[::1] comp,
                  const double[::1] times, const double[:, ::1] dW,
                  const long[::1] ev_node, const long[::1] ev_meas, const double[::1] ev_mark,
                  double xi1, double xi2, const long[::1] rec_nodes,
                  double[:, ::1] out_xi, double[:, ::1] out_int):
    """Advance ln x over ``times``; see ``_kernel_py.integrate_log``."""
    cdef Coefs cf
    cdef double v[NCOEF]
    cdef double empty = 0.0
    cf.kind = &kind[0]
    cf.par = &par[0, 0]
    cf.pw_off = &pw_off[0]
    cf.pw_t = &pw_t[0] if pw_t.shape[0] > 0 else &empty
    cf.pw_v = &pw_v[0] if pw_v.shape[0] > 0 else &empty

    cdef long n_steps = times.shape[0] - 1
    cdef long n_ev = ev_node.shape[0]
    cdef long n_rec = rec_nodes.shape[0]
    cdef bint has_dw = dW.shape[0] > 0
    cdef double gc1 = shape[0], gd1 = shape[1], gc2 = shape[2], gd2 = shape[3]
    cdef double dc1 = shape[4], dd1 = shape[5], dc2 = shape[6], dd2 = shape[7]
    cdef double comp1 = comp[0], comp2 = comp[1]
    cdef double x1 = exp(xi1), x2 = exp(xi2), x1n, x2n
    cdef double I1 = 0.0, I2 = 0.0
    cdef double t, h, den, g1, g2, te, z, amp1, amp2
    cdef long j, e = 0, r = 0
    cdef int status = 0
    cdef long fail = -1
    cdef bint autonomous = True
    for j in range(NCOEF):
        if kind[j] != 0:
            autonomous = False

    with nogil:
        if autonomous:
            fill(&cf, 0.0, v)
        if n_rec > 0 and rec_nodes[0] == 0:
            out_xi[0, 0] = xi1
            out_xi[0, 1] = xi2
            out_int[0, 0] = 0.0
            out_int[0, 1] = 0.0
            r = 1
        for j in range(n_steps):
            t = times[j]
            h = times[j + 1] - t
            if not autonomous:
                fill(&cf, t, v)
            den = 1.0 + v[M] * x1
            g1 = v[A1] - v[C1] * x2 / den - v[B1] * x1 - 0.5 * v[S1] * v[S1] - v[G1] * comp1
            g2 = -(v[A2] - v[C2] * x1 / den) - v[B2] * x2 - 0.5 * v[S2] * v[S2] - v[G2] * comp2
            xi1 = xi1 + g1 * h
            xi2 = xi2 + g2 * h
            if has_dw:
                xi1 = xi1 + v[S1] * dW[j, 0]
                xi2 = xi2 + v[S2] * dW[j, 1]
            if bad(xi1) or bad(xi2):
                status = 1
                fail = j + 1
                break
            x1n = exp(xi1)
            x2n = exp(xi2)
            I1 = I1 + 0.5 * h * (x1 + x1n)
            I2 = I2 + 0.5 * h * (x2 + x2n)
            x1 = x1n
            x2 = x2n
            while e < n_ev and ev_node[e] == j + 1:
                te = times[j + 1]
                z = ev_mark[e]
                if ev_meas[e] == 1:
                    amp1 = tf_eval(&cf, G1, te) * (gc1 + gd1 * z)
                    amp2 = tf_eval(&cf, G2, te) * (gc2 + gd2 * z)
                else:
                    amp1 = tf_eval(&cf, D1, te) * (dc1 + dd1 * z)
                    amp2 = tf_eval(&cf, D2, te) * (dc2 + dd2 * z)
                if not (amp1 > -1.0 and amp2 > -1.0):
                    status = 2
                    fail = j + 1
                    break
                xi1 = xi1 + log1p(amp1)
                xi2 = xi2 + log1p(amp2)
                x1 = exp(xi1)
                x2 = exp(xi2)
                e = e + 1
            if status != 0:
                break
            if bad(xi1) or bad(xi2):
                status = 1
                fail = j + 1
                break
            if r < n_rec and rec_nodes[r] == j + 1:
                out_xi[r, 0] = xi1
                out_xi[r, 1] = xi2
                out_int[r, 0] = I1
                out_int[r, 1] = I2
                r = r + 1
    return status, fail


cdef inline void rhs(const Coefs* cf, double t, double x1, double x2,
                     double* f1, double* f2) noexcept nogil:
    cdef double v[NCOEF]
    cdef double den
    fill(cf, t, v)
    den = 1.0 + v[M] * x1
    f1[0] = x1 * ((v[A1] - v[C1] * x2 / den) - v[B1] * x1)
    f2[0] = x2 * (-(v[A2] - v[C2] * x1 / den) - v[B2] * x2)


def integrate_rk4(const int[::1] kind, const double[:, ::1] par, const long[::1] pw_off,
                  const double[::1] pw_t, const double[::1] pw_v,
                  const double[::1] times, double x1, double x2,
                  const long[::1] rec_nodes, double[:, ::1] out_x, double[:, ::1] out_int):
    """Classical RK4 on the state equation; see ``_kernel_py.integrate_rk4``."""
    cdef Coefs cf
    cdef double empty = 0.0
    cf.kind = &kind[0]
    cf.par = &par[0, 0]
    cf.pw_off = &pw_off[0]
    cf.pw_t = &pw_t[0] if pw_t.shape[0] > 0 else &empty
    cf.pw_v = &pw_v[0] if pw_v.shape[0] > 0 else &empty

    cdef long n_steps = times.shape[0] - 1
    cdef long n_rec = rec_nodes.shape[0]
    cdef double t, h, k11, k12, k21, k22, k31, k32, k41, k42, y1, y2
    cdef double I1 = 0.0, I2 = 0.0
    cdef long j, r = 0
    cdef int status = 0
    cdef long fail = -1

    with nogil:
        if n_rec > 0 and rec_nodes[0] == 0:
            out_x[0, 0] = x1
            out_x[0, 1] = x2
            out_int[0, 0] = 0.0
            out_int[0, 1] = 0.0
            r = 1
        for j in range(n_steps):
            t = times[j]
            h = times[j + 1] - t
            rhs(&cf, t, x1, x2, &k11, &k12)
            rhs(&cf, t + 0.5 * h, x1 + 0.5 * h * k11, x2 + 0.5 * h * k12, &k21, &k22)
            rhs(&cf, t + 0.5 * h, x1 + 0.5 * h * k21, x2 + 0.5 * h * k22, &k31, &k32)
            rhs(&cf, t + h, x1 + h * k31, x2 + h * k32, &k41, &k42)
            y1 = x1 + h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
            y2 = x2 + h / 6.0 * (k12 + 2.0 * k22 + 2.0 * k32 + k42)
            if not (y1 == y1 and y2 == y2 and y1 < 1e300 and y2 < 1e300
                    and y1 > -1e300 and y2 > -1e300):
                status = 1
                fail = j + 1
                break
            I1 = I1 + 0.5 * h * (x1 + y1)
            I2 = I2 + 0.5 * h * (x2 + y2)
            x1 = y1
            x2 = y2
            if r < n_rec and rec_nodes[r] == j + 1:
                out_x[r, 0] = x1
                out_x[r, 1] = x2
                out_int[r, 0] = I1
                out_int[r, 1] = I2
                r = r + 1
    return status, fail

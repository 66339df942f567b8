"""Pure-Python inner loops, used when the compiled extension is unavailable.

Each function follows ``_kernel.pyx`` operation for operation; keep the two in
step when editing either.
"""
import math
from bisect import bisect_right

A1, A2, B1, B2, C1, C2, M, S1, S2, G1, G2, D1, D2 = range(13)
NCOEF = 13
XI_MAX = 700.0
XI_MIN = -1e300


def _evaluator(kind, par, pw_off, pw_t, pw_v):
    kind = [int(k) for k in kind]
    par = [[float(v) for v in row] for row in par]
    off = [int(o) for o in pw_off]
    pw_t = [float(v) for v in pw_t]
    pw_v = [float(v) for v in pw_v]
    sin = math.sin

    def tf(k, t):
        kd = kind[k]
        p = par[k]
        if kd == 0:
            return p[0]
        if kd == 1:
            return p[0] + p[1] * sin(p[2] * t + p[3])
        lo, hi = off[k], off[k + 1]
        return pw_v[bisect_right(pw_t, t, lo, hi) - 1]

    def fill(t):
        return [tf(k, t) for k in range(NCOEF)]

    return tf, fill


def _bad(xi):
    return not (xi <= XI_MAX and xi > XI_MIN)


def integrate_log(kind, par, pw_off, pw_t, pw_v, shape, comp, times, dW,
                  ev_node, ev_meas, ev_mark, xi1, xi2, rec_nodes, out_xi, out_int):
    """Jump-adapted Euler-Maruyama for ln x.

    Between consecutive nodes of ``times`` one Euler-Maruyama step is taken on
    the event-based log drift; events assigned to node ``j + 1`` are then
    applied as exact additive ``log1p(amplitude)`` jumps.  Log-states and
    running trapezoid integrals of x are written to ``out_xi`` / ``out_int``
    at ``rec_nodes``.

    Returns ``(status, node)``: status 0 ok, 1 diverged (ln x above 700 or
    non-finite), 2 jump amplitude <= -1; ``node`` is where it stopped.
    """
    tf, fill = _evaluator(kind, par, pw_off, pw_t, pw_v)
    exp, log1p = math.exp, math.log1p
    times = times.tolist()
    dw = dW.tolist()
    has_dw = len(dw) > 0
    ev_node = ev_node.tolist()
    ev_meas = ev_meas.tolist()
    ev_mark = ev_mark.tolist()
    rec = rec_nodes.tolist()
    gc1, gd1, gc2, gd2, dc1, dd1, dc2, dd2 = (float(v) for v in shape)
    comp1, comp2 = float(comp[0]), float(comp[1])
    n_steps = len(times) - 1
    n_ev = len(ev_node)
    n_rec = len(rec)
    x1, x2 = exp(xi1), exp(xi2)
    I1 = I2 = 0.0
    e = r = 0
    status, fail = 0, -1

    if n_rec > 0 and rec[0] == 0:
        out_xi[0, 0], out_xi[0, 1] = xi1, xi2
        out_int[0, 0], out_int[0, 1] = 0.0, 0.0
        r = 1
    for j in range(n_steps):
        t = times[j]
        h = times[j + 1] - t
        v = fill(t)
        den = 1.0 + v[M] * x1
        g1 = v[A1] - v[C1] * x2 / den - v[B1] * x1 - 0.5 * v[S1] * v[S1] - v[G1] * comp1
        g2 = -(v[A2] - v[C2] * x1 / den) - v[B2] * x2 - 0.5 * v[S2] * v[S2] - v[G2] * comp2
        xi1 = xi1 + g1 * h
        xi2 = xi2 + g2 * h
        if has_dw:
            xi1 = xi1 + v[S1] * dw[j][0]
            xi2 = xi2 + v[S2] * dw[j][1]
        if _bad(xi1) or _bad(xi2):
            status, fail = 1, j + 1
            break
        x1n = exp(xi1)
        x2n = exp(xi2)
        I1 = I1 + 0.5 * h * (x1 + x1n)
        I2 = I2 + 0.5 * h * (x2 + x2n)
        x1, x2 = x1n, x2n
        while e < n_ev and ev_node[e] == j + 1:
            te = times[j + 1]
            z = ev_mark[e]
            if ev_meas[e] == 1:
                amp1 = tf(G1, te) * (gc1 + gd1 * z)
                amp2 = tf(G2, te) * (gc2 + gd2 * z)
            else:
                amp1 = tf(D1, te) * (dc1 + dd1 * z)
                amp2 = tf(D2, te) * (dc2 + dd2 * z)
            if not (amp1 > -1.0 and amp2 > -1.0):
                status, fail = 2, j + 1
                break
            xi1 = xi1 + log1p(amp1)
            xi2 = xi2 + log1p(amp2)
            x1 = exp(xi1)
            x2 = exp(xi2)
            e += 1
        if status != 0:
            break
        if _bad(xi1) or _bad(xi2):
            status, fail = 1, j + 1
            break
        if r < n_rec and rec[r] == j + 1:
            out_xi[r, 0], out_xi[r, 1] = xi1, xi2
            out_int[r, 0], out_int[r, 1] = I1, I2
            r += 1
    return status, fail


def integrate_rk4(kind, par, pw_off, pw_t, pw_v, times, x1, x2, rec_nodes, out_x, out_int):
    """Classical fourth-order Runge-Kutta on the state equation in x-space.

    Same recording and status conventions as :func:`integrate_log`
    (status 1 means a non-finite or astronomically large state).
    """
    _, fill = _evaluator(kind, par, pw_off, pw_t, pw_v)
    times = times.tolist()
    rec = rec_nodes.tolist()
    n_steps = len(times) - 1
    n_rec = len(rec)
    I1 = I2 = 0.0
    r = 0
    status, fail = 0, -1

    def rhs(t, x1, x2):
        v = fill(t)
        den = 1.0 + v[M] * x1
        return (x1 * ((v[A1] - v[C1] * x2 / den) - v[B1] * x1),
                x2 * (-(v[A2] - v[C2] * x1 / den) - v[B2] * x2))

    if n_rec > 0 and rec[0] == 0:
        out_x[0, 0], out_x[0, 1] = x1, x2
        out_int[0, 0], out_int[0, 1] = 0.0, 0.0
        r = 1
    for j in range(n_steps):
        t = times[j]
        h = times[j + 1] - t
        k11, k12 = rhs(t, x1, x2)
        k21, k22 = rhs(t + 0.5 * h, x1 + 0.5 * h * k11, x2 + 0.5 * h * k12)
        k31, k32 = rhs(t + 0.5 * h, x1 + 0.5 * h * k21, x2 + 0.5 * h * k22)
        k41, k42 = rhs(t + h, x1 + h * k31, x2 + h * k32)
        y1 = x1 + h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
        y2 = x2 + h / 6.0 * (k12 + 2.0 * k22 + 2.0 * k32 + k42)
        if not (y1 == y1 and y2 == y2 and y1 < 1e300 and y2 < 1e300
                and y1 > -1e300 and y2 > -1e300):
            status, fail = 1, j + 1
            break
        I1 = I1 + 0.5 * h * (x1 + y1)
        I2 = I2 + 0.5 * h * (x2 + y2)
        x1, x2 = y1, y2
        if r < n_rec and rec[r] == j + 1:
            out_x[r, 0], out_x[r, 1] = x1, x2
            out_int[r, 0], out_int[r, 1] = I1, I2
            r += 1
    return status, fail

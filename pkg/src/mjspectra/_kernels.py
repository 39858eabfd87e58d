"""Compiled inner loops: symbol gradients, the Dormand-Prince integrator, Diophantine scans.

State vectors are ``y = [x1, x2, p1, p2]``.  Models are packed as a
coefficient table ``C`` (one trigonometric series per row, laid out as
``[a0, a1..aN, b1..bN]``) plus a scalar vector ``S``; each variant has an
``*_energy(y, C, S)`` and a ``*_grad(y, C, S, out)`` kernel writing
``[dH/dx1, dH/dx2, dH/dp1, dH/dp2]``, reached through the integer-coded
dispatchers ``energy`` / ``grad`` so compiled code caches to disk.
"""
import math

import numpy as np

from ._accel import njit

# status codes returned by dopri5
OK = 0
UNDERFLOW = 1
MAX_STEPS = 2
CHART = 3


@njit
def series3(C, r, x):
    """Value, first and second derivative of row ``r`` at ``x``."""
    n = (C.shape[1] - 1) // 2
    f = C[r, 0]
    d1 = 0.0
    d2 = 0.0
    for m in range(1, n + 1):
        a = C[r, m]
        b = C[r, n + m]
        if a == 0.0 and b == 0.0:
            continue
        c = math.cos(m * x)
        s = math.sin(m * x)
        f += a * c + b * s
        d1 += m * (b * c - a * s)
        d2 -= m * m * (a * c + b * s)
    return f, d1, d2


# --- Liouville: rows u, v ---------------------------------------------------

@njit
def liouville_energy(y, C, S):
    u = series3(C, 0, y[0])[0]
    v = series3(C, 1, y[1])[0]
    return (y[2] * y[2] + y[3] * y[3]) / (u + v)


@njit
def liouville_grad(y, C, S, out):
    u, du, _ = series3(C, 0, y[0])
    v, dv, _ = series3(C, 1, y[1])
    w = u + v
    p2 = y[2] * y[2] + y[3] * y[3]
    out[0] = -p2 * du / (w * w)
    out[1] = -p2 * dv / (w * w)
    out[2] = 2.0 * y[2] / w
    out[3] = 2.0 * y[3] / w


# --- Mechanical / Jacobi: rows g11(x1), g11(x2), g12.., g22.., V(x1), V(x2) ---

@njit
def _metric_parts(y, C):
    g11, g11a, _ = series3(C, 0, y[0])
    t, g11b, _ = series3(C, 1, y[1])
    g11 += t
    g12, g12a, _ = series3(C, 2, y[0])
    t, g12b, _ = series3(C, 3, y[1])
    g12 += t
    g22, g22a, _ = series3(C, 4, y[0])
    t, g22b, _ = series3(C, 5, y[1])
    g22 += t
    V, Va, _ = series3(C, 6, y[0])
    t, Vb, _ = series3(C, 7, y[1])
    V += t
    p1 = y[2]
    p2 = y[3]
    quad = g11 * p1 * p1 + 2.0 * g12 * p1 * p2 + g22 * p2 * p2
    dq1 = g11a * p1 * p1 + 2.0 * g12a * p1 * p2 + g22a * p2 * p2
    dq2 = g11b * p1 * p1 + 2.0 * g12b * p1 * p2 + g22b * p2 * p2
    gp1 = g11 * p1 + g12 * p2
    gp2 = g12 * p1 + g22 * p2
    return quad, dq1, dq2, gp1, gp2, V, Va, Vb


@njit
def mechanical_energy(y, C, S):
    quad, _, _, _, _, V, _, _ = _metric_parts(y, C)
    return 0.5 * quad + V


@njit
def mechanical_grad(y, C, S, out):
    quad, dq1, dq2, gp1, gp2, V, Va, Vb = _metric_parts(y, C)
    out[0] = 0.5 * dq1 + Va
    out[1] = 0.5 * dq2 + Vb
    out[2] = gp1
    out[3] = gp2


@njit
def jacobi_energy(y, C, S):
    quad, _, _, _, _, V, _, _ = _metric_parts(y, C)
    return quad / (2.0 * (S[0] - V))


@njit
def jacobi_grad(y, C, S, out):
    quad, dq1, dq2, gp1, gp2, V, Va, Vb = _metric_parts(y, C)
    d = S[0] - V
    out[0] = 0.5 * dq1 / d + 0.5 * quad * Va / (d * d)
    out[1] = 0.5 * dq2 / d + 0.5 * quad * Vb / (d * d)
    out[2] = gp1 / d
    out[3] = gp2 / d


# --- Water waves: rows D(x1), D(x2), mu(x1), mu(x2) --------------------------

@njit
def _ww_core(rho, D, mu):
    th = math.tanh(D * rho)
    sech2 = 1.0 - th * th
    H = rho * (1.0 + mu * rho * rho) * th
    dHdrho = (1.0 + 3.0 * mu * rho * rho) * th + rho * (1.0 + mu * rho * rho) * D * sech2
    dHdD = rho * rho * (1.0 + mu * rho * rho) * sech2
    dHdmu = rho * rho * rho * th
    return H, dHdrho, dHdD, dHdmu


@njit
def waterwave_energy(y, C, S):
    rho = math.hypot(y[2], y[3])
    D = series3(C, 0, y[0])[0] + series3(C, 1, y[1])[0]
    mu = series3(C, 2, y[0])[0] + series3(C, 3, y[1])[0]
    return _ww_core(rho, D, mu)[0]


@njit
def waterwave_grad(y, C, S, out):
    rho = math.hypot(y[2], y[3])
    D, Da, _ = series3(C, 0, y[0])
    t, Db, _ = series3(C, 1, y[1])
    D += t
    mu, mua, _ = series3(C, 2, y[0])
    t, mub, _ = series3(C, 3, y[1])
    mu += t
    H, dHdrho, dHdD, dHdmu = _ww_core(rho, D, mu)
    out[0] = dHdD * Da + dHdmu * mua
    out[1] = dHdD * Db + dHdmu * mub
    out[2] = dHdrho * y[2] / rho
    out[3] = dHdrho * y[3] / rho


# --- Water waves with depth realizing a Liouville metric: rows u, v, mu(x1), mu(x2); S = [E]

@njit
def _metric_depth(y, C, S):
    u, du, _ = series3(C, 0, y[0])
    v, dv, _ = series3(C, 1, y[1])
    mu, mua, _ = series3(C, 2, y[0])
    t, mub, _ = series3(C, 3, y[1])
    mu += t
    r = math.sqrt(u + v)
    q = r * (1.0 + mu * r * r)
    z = S[0] / q
    at = math.atanh(z)
    D = at / r
    r1 = du / (2.0 * r)
    r2 = dv / (2.0 * r)
    q1 = r1 * (1.0 + 3.0 * mu * r * r) + r * r * r * mua
    q2 = r2 * (1.0 + 3.0 * mu * r * r) + r * r * r * mub
    z1 = -S[0] * q1 / (q * q)
    z2 = -S[0] * q2 / (q * q)
    D1 = z1 / ((1.0 - z * z) * r) - at * r1 / (r * r)
    D2 = z2 / ((1.0 - z * z) * r) - at * r2 / (r * r)
    return D, D1, D2, mu, mua, mub


@njit
def waterwave_metric_energy(y, C, S):
    D, _, _, mu, _, _ = _metric_depth(y, C, S)
    return _ww_core(math.hypot(y[2], y[3]), D, mu)[0]


@njit
def waterwave_metric_grad(y, C, S, out):
    D, D1, D2, mu, mua, mub = _metric_depth(y, C, S)
    rho = math.hypot(y[2], y[3])
    H, dHdrho, dHdD, dHdmu = _ww_core(rho, D, mu)
    out[0] = dHdD * D1 + dHdmu * mua
    out[1] = dHdD * D2 + dHdmu * mub
    out[2] = dHdrho * y[2] / rho
    out[3] = dHdrho * y[3] / rho


# --- Katok-Randers on S^2, equatorial chart (q1, q2); S = [alpha] ------------

@njit
def katok_energy(y, C, S):
    c = math.cos(y[1])
    lam = math.sqrt(y[3] * y[3] + y[2] * y[2] / (c * c))
    return lam + S[0] * y[2]


@njit
def katok_grad(y, C, S, out):
    c = math.cos(y[1])
    sec2 = 1.0 / (c * c)
    lam = math.sqrt(y[3] * y[3] + y[2] * y[2] * sec2)
    out[0] = 0.0
    out[1] = y[2] * y[2] * sec2 * math.tan(y[1]) / lam
    out[2] = y[2] * sec2 / lam + S[0]
    out[3] = y[3] / lam


LIOUVILLE, MECHANICAL, JACOBI, WATERWAVE, WATERWAVE_METRIC, KATOK = 0, 1, 2, 3, 4, 5


@njit
def energy(kind, y, C, S):
    if kind == LIOUVILLE:
        return liouville_energy(y, C, S)
    if kind == MECHANICAL:
        return mechanical_energy(y, C, S)
    if kind == JACOBI:
        return jacobi_energy(y, C, S)
    if kind == WATERWAVE:
        return waterwave_energy(y, C, S)
    if kind == WATERWAVE_METRIC:
        return waterwave_metric_energy(y, C, S)
    return katok_energy(y, C, S)


@njit
def grad(kind, y, C, S, out):
    if kind == LIOUVILLE:
        liouville_grad(y, C, S, out)
    elif kind == MECHANICAL:
        mechanical_grad(y, C, S, out)
    elif kind == JACOBI:
        jacobi_grad(y, C, S, out)
    elif kind == WATERWAVE:
        waterwave_grad(y, C, S, out)
    elif kind == WATERWAVE_METRIC:
        waterwave_metric_grad(y, C, S, out)
    else:
        katok_grad(y, C, S, out)


# --- Dormand-Prince 5(4) ----------------------------------------------------

A21 = 0.2
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
A71, A73, A74, A75, A76 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
D1, D3, D4 = -12715105075.0 / 11282082432.0, 87487479700.0 / 32700410799.0, -10690763975.0 / 1880347072.0
D5, D6, D7 = 701980252875.0 / 199316789632.0, -1453857185.0 / 822651844.0, 69997945.0 / 29380423.0


@njit
def _rhs(kind, C, S, y, g, out):
    grad(kind, y, C, S, g)
    out[0] = g[2]
    out[1] = g[3]
    out[2] = -g[0]
    out[3] = -g[1]


@njit
def _stages(kind, C, S, y, k1, h, g, k2, k3, k4, k5, k6, k7, ytmp, y1):
    for i in range(4):
        ytmp[i] = y[i] + h * A21 * k1[i]
    _rhs(kind, C, S, ytmp, g, k2)
    for i in range(4):
        ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
    _rhs(kind, C, S, ytmp, g, k3)
    for i in range(4):
        ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    _rhs(kind, C, S, ytmp, g, k4)
    for i in range(4):
        ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    _rhs(kind, C, S, ytmp, g, k5)
    for i in range(4):
        ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
    _rhs(kind, C, S, ytmp, g, k6)
    for i in range(4):
        y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
    _rhs(kind, C, S, y1, g, k7)


@njit
def rk_step(kind, C, S, y, h):
    """One fifth-order Dormand-Prince step of size ``h`` (no error control)."""
    g = np.empty(4)
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    k5 = np.empty(4)
    k6 = np.empty(4)
    k7 = np.empty(4)
    ytmp = np.empty(4)
    y1 = np.empty(4)
    _rhs(kind, C, S, y, g, k1)
    _stages(kind, C, S, y, k1, h, g, k2, k3, k4, k5, k6, k7, ytmp, y1)
    return y1


@njit
def vector_field(kind, C, S, y):
    g = np.empty(4)
    out = np.empty(4)
    _rhs(kind, C, S, y, g, out)
    return out


@njit
def dopri5(kind, C, S, y0, t_end, tol, h_init, max_steps, guard):
    """Adaptive integration on ``[0, t_end]``.

    ``kind`` selects the symbol (see the variant codes above).  Returns step times, states, dense-output coefficients (one 5×4 block per
    step), the number of rejected steps and a status code.  ``guard > 0``
    aborts with CHART once ``|y[1]|`` exceeds it.
    """
    cap = 1024
    ts = np.empty(cap + 1)
    ys = np.empty((cap + 1, 4))
    cont = np.empty((cap, 5, 4))
    g = np.empty(4)
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    k5 = np.empty(4)
    k6 = np.empty(4)
    k7 = np.empty(4)
    ytmp = np.empty(4)
    y1 = np.empty(4)
    y = y0.copy()
    ts[0] = 0.0
    ys[0] = y
    t = 0.0
    h = h_init
    nacc = 0
    nrej = 0
    status = OK
    _rhs(kind, C, S, y, g, k1)
    while t < t_end:
        if nacc >= max_steps:
            status = MAX_STEPS
            break
        if t + 1.01 * h >= t_end:
            h = t_end - t
        _stages(kind, C, S, y, k1, h, g, k2, k3, k4, k5, k6, k7, ytmp, y1)
        err = 0.0
        finite = True
        for i in range(4):
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            if i < 2:
                sk = tol
            else:
                sk = tol * (1.0 + max(abs(y[i]), abs(y1[i])))
            err += (e / sk) ** 2
            if not (math.isfinite(y1[i]) and math.isfinite(k7[i])):
                finite = False
        err = math.sqrt(err / 4.0)
        if not finite or not math.isfinite(err):
            nrej += 1
            h *= 0.25
            if h < 1e-14 * max(1.0, abs(t)):
                status = UNDERFLOW
                break
            continue
        if err <= 1.0:
            if nacc >= cap:
                ncap = 2 * cap
                ts2 = np.empty(ncap + 1)
                ys2 = np.empty((ncap + 1, 4))
                cont2 = np.empty((ncap, 5, 4))
                ts2[: cap + 1] = ts
                ys2[: cap + 1] = ys
                cont2[:cap] = cont
                ts, ys, cont, cap = ts2, ys2, cont2, ncap
            for i in range(4):
                ydiff = y1[i] - y[i]
                bspl = h * k1[i] - ydiff
                cont[nacc, 0, i] = y[i]
                cont[nacc, 1, i] = ydiff
                cont[nacc, 2, i] = bspl
                cont[nacc, 3, i] = ydiff - h * k7[i] - bspl
                cont[nacc, 4, i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i]
                                        + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                y[i] = y1[i]
                k1[i] = k7[i]
            t = t_end if h == t_end - t else t + h
            nacc += 1
            ts[nacc] = t
            ys[nacc] = y
            if guard > 0.0 and abs(y[1]) > guard:
                status = CHART
                break
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h *= fac
        else:
            nrej += 1
            h *= max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14 * max(1.0, abs(t)):
                status = UNDERFLOW
                break
    return ts[: nacc + 1].copy(), ys[: nacc + 1].copy(), cont[:nacc].copy(), nrej, status


@njit
def energies(kind, C, S, ys):
    out = np.empty(ys.shape[0])
    for j in range(ys.shape[0]):
        out[j] = energy(kind, ys[j], C, S)
    return out


@njit
def vector_fields(kind, C, S, ys):
    """``X_H`` at every row of ``ys``."""
    out = np.empty((ys.shape[0], 4))
    g = np.empty(4)
    for j in range(ys.shape[0]):
        grad(kind, ys[j], C, S, g)
        out[j, 0] = g[2]
        out[j, 1] = g[3]
        out[j, 2] = -g[0]
        out[j, 3] = -g[1]
    return out


@njit
def fourier_eval(cr, ci, x, deriv):
    """``Re sum_k (cr + i ci)_k (ik)^deriv e^{ikx}`` by angle-addition recurrences."""
    n = x.size
    K = cr.size
    out = np.empty(n)
    for j in range(n):
        c1 = math.cos(x[j])
        s1 = math.sin(x[j])
        ck = 1.0
        sk = 0.0
        acc = 0.0
        for k in range(K):
            # (ik)^d e^{ikx} = k^d i^d (ck + i sk)
            re = ck
            im = sk
            if deriv > 0:
                f = float(k) ** deriv
                r = deriv % 4
                if r == 1:
                    re, im = -sk, ck
                elif r == 2:
                    re, im = -ck, -sk
                elif r == 3:
                    re, im = sk, -ck
                re *= f
                im *= f
            acc += cr[k] * re - ci[k] * im
            ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
        out[j] = acc
    return out


# --- Diophantine scan -------------------------------------------------------

@njit
def kam_scan(w1, w2, kmax, sigma):
    """Minimise ``|k·w| |k|_1^sigma`` over the half lattice ``0 < |k|_inf <= kmax``.

    Ties go to the smaller ``|k|_1``.  Returns ``(score, k1, k2)``.
    """
    best = np.inf
    bnorm = np.inf
    b1 = 0
    b2 = 0
    for k1 in range(0, kmax + 1):
        for k2 in range(-kmax, kmax + 1):
            if k1 == 0 and k2 <= 0:
                continue
            norm = abs(k1) + abs(k2)
            score = abs(k1 * w1 + k2 * w2) * norm ** sigma
            if score < best or (score == best and norm < bnorm):
                best = score
                bnorm = norm
                b1 = k1
                b2 = k2
    return best, b1, b2

"""Compiled kernels: geodesic/Jacobi/parallel-transport right-hand side,
a DOP853 stepper with dense output, and bracketed root finding.

State layout for dimension n with ``nj`` Jacobi blocks and ``nf`` frame vectors::

    [ x (n) | xi (n) | z = f(x) (n) | w = f'(x) (n) |
      nj * ( dx (n) | dxi (n) ) | nf * V (n) ]

z and w are carried along with x: z' = w x', w' = (1/2) Q'(z) x', where
Q_i(z) = (-1)^i 4 prod_j (z - a_j) / A(z)^2 is the right side of the
coordinate ODE (so f'' = Q'(f)/2).  This keeps the right-hand side free of
tables and regular at the turning points of f_i.

The Runge-Kutta tableau is scipy's DOP853 tableau; the step-size control and
dense output follow scipy's implementation.
"""

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dc

_NS = _dc.N_STAGES  # 12
_A = np.ascontiguousarray(_dc.A[:_NS, :_NS])
_B = np.ascontiguousarray(_dc.B)
_C = np.ascontiguousarray(_dc.C[:_NS])
_E3 = np.ascontiguousarray(_dc.E3)
_E5 = np.ascontiguousarray(_dc.E5)
_D = np.ascontiguousarray(_dc.D)
_A_EXTRA = np.ascontiguousarray(_dc.A[_NS + 1 :])
_C_EXTRA = np.ascontiguousarray(_dc.C[_NS + 1 :])
_NPOW = _dc.INTERPOLATOR_POWER  # 7

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXP = -1.0 / 8.0

# scalar codes for root finding / sampling
SC_JACOBI = 0  # <dx_b, V_b>_g
SC_XI = 1  # xi_idx
SC_W = 2  # w_idx = f'_idx
SC_Z = 3  # z_idx - cval
SC_WXI = 4  # w_idx * xi_idx  (sign of df_idx/dt)
SC_DOT = 5  # <dx_b, vec> (plain coordinate pairing)


def state_dim(n, nj, nf):
    return 4 * n + 2 * n * nj + n * nf


# ---------------------------------------------------------------------------
# profile and metric helpers
# ---------------------------------------------------------------------------


@njit(cache=True)
def a_eval(z, kind, coef, brk):
    """A(z) and A'(z)."""
    if kind == 0:
        return coef[0, 0], 0.0
    if kind == 1:
        s = np.sqrt(z)
        return s, 0.5 / s
    if kind == 2:
        c = coef[0]
        m = c.shape[0]
        val = 0.0
        der = 0.0
        for k in range(m - 1, -1, -1):
            der = der * z + val
            val = val * z + c[k]
        return val, der
    # piecewise polynomial, descending local powers
    nb = brk.shape[0]
    j = np.searchsorted(brk, z, side="right") - 1
    if j < 0:
        j = 0
    if j > nb - 2:
        j = nb - 2
    dz = z - brk[j]
    deg = coef.shape[0]
    val = 0.0
    der = 0.0
    for m in range(deg):
        der = der * dz + val
        val = val * dz + coef[m, j]
    return val, der


@njit(cache=True)
def half_qprime(i1, z, a, kind, coef, brk):
    """f'' = Q'(f)/2 for the 1-based coordinate index i1."""
    m = a.shape[0]
    P = 1.0
    dP = 0.0
    for j in range(m):
        dP = dP * (z - a[j]) + P
        P = P * (z - a[j])
    A, dA = a_eval(z, kind, coef, brk)
    sgn = 1.0 if i1 % 2 == 0 else -1.0
    return sgn * 2.0 * (dP * A - 2.0 * P * dA) / (A * A * A)


@njit(cache=True)
def metric_parts(z, n, h, gl, inv2):
    """h_k = 1/g_kk, gradient of log h_k (gl[k, :]) and 1/(z_l - z_k)^2."""
    for k in range(n):
        prod = 1.0
        s = 0.0
        for l in range(n):
            if l != k:
                d = z[l] - z[k]
                prod *= d
                gl[k, l] = -1.0 / d
                inv2[k, l] = 1.0 / (d * d)
                s += 1.0 / d
            else:
                inv2[k, l] = 0.0
        gl[k, k] = s
        sgn = 1.0 if (n - 1 - k) % 2 == 0 else -1.0
        h[k] = sgn / prod


@njit(cache=True)
def hvec(z, n):
    h = np.empty(n)
    for k in range(n):
        prod = 1.0
        for l in range(n):
            if l != k:
                prod *= z[l] - z[k]
        sgn = 1.0 if (n - 1 - k) % 2 == 0 else -1.0
        h[k] = sgn / prod
    return h


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------


@njit(cache=True)
def rhs(y, out, n, nj, nf, a, kind, coef, brk):
    h = np.empty(n)
    gl = np.empty((n, n))
    inv2 = np.empty((n, n))
    z = y[2 * n : 3 * n]
    metric_parts(z, n, h, gl, inv2)
    xdot = np.empty(n)
    fpp = np.empty(n)
    for i in range(n):
        xi = y[n + i]
        xdot[i] = xi * h[i]
        fpp[i] = half_qprime(i + 1, z[i], a, kind, coef, brk)
    for i in range(n):
        w = y[3 * n + i]
        s = 0.0
        for k in range(n):
            xk = y[n + k]
            s += xk * xk * h[k] * gl[k, i]
        out[i] = xdot[i]
        out[n + i] = -0.5 * w * s
        out[2 * n + i] = w * xdot[i]
        out[3 * n + i] = fpp[i] * xdot[i]
    if nj == 0 and nf == 0:
        return

    if nj > 0:
        # Jacobian blocks of the (x, xi) flow
        Jxx = np.zeros((n, n))  # d xdot / d x
        Jxk = np.zeros((n, n))  # d xidot / d x
        Jkk = np.zeros((n, n))  # d xidot / d xi
        for i in range(n):
            wi = y[3 * n + i]
            for m in range(n):
                wm = y[3 * n + m]
                Jxx[i, m] = y[n + i] * h[i] * gl[i, m] * wm
                Jkk[i, m] = -y[n + m] * h[m] * gl[m, i] * wi
                s = 0.0
                for k in range(n):
                    xk = y[n + k]
                    if i == m:
                        if i == k:
                            hess = 0.0
                            for l in range(n):
                                hess += inv2[k, l]
                        else:
                            hess = inv2[k, i]
                    elif i == k:
                        hess = -inv2[k, m]
                    elif m == k:
                        hess = -inv2[k, i]
                    else:
                        hess = 0.0
                    s += xk * xk * h[k] * (gl[k, i] * gl[k, m] + hess)
                Jxk[i, m] = -0.5 * s * wi * wm
            s = 0.0
            for k in range(n):
                xk = y[n + k]
                s += xk * xk * h[k] * gl[k, i]
            Jxk[i, i] -= 0.5 * s * fpp[i]
        for b in range(nj):
            base = 4 * n + 2 * n * b
            for i in range(n):
                sx = h[i] * y[base + n + i]
                sk = 0.0
                for m in range(n):
                    dxm = y[base + m]
                    dkm = y[base + n + m]
                    sx += Jxx[i, m] * dxm
                    sk += Jxk[i, m] * dxm + Jkk[i, m] * dkm
                out[base + i] = sx
                out[base + n + i] = sk

    fbase = 4 * n + 2 * n * nj
    for c in range(nf):
        vb = fbase + n * c
        for i in range(n):
            wi = y[3 * n + i]
            vi = y[vb + i]
            # Gamma^i_ii xdot^i V^i
            acc = -0.5 * gl[i, i] * wi * xdot[i] * vi
            for k in range(n):
                if k == i:
                    continue
                wk = y[3 * n + k]
                vk = y[vb + k]
                g_iik = -0.5 * gl[i, k] * wk  # Gamma^i_{ik}
                acc += g_iik * (xdot[i] * vk + xdot[k] * vi)
                g_ikk = 0.5 * (h[i] / h[k]) * gl[k, i] * wi  # Gamma^i_{kk}
                acc += g_ikk * xdot[k] * vk
            out[vb + i] = -acc


# ---------------------------------------------------------------------------
# scalar observables
# ---------------------------------------------------------------------------


@njit(cache=True)
def scalar(y, code, idx, cval, vec, n, nj, nf):
    if code == SC_JACOBI:
        z = y[2 * n : 3 * n]
        h = hvec(z, n)
        base = 4 * n + 2 * n * idx
        vb = 4 * n + 2 * n * nj + n * idx
        s = 0.0
        for m in range(n):
            s += y[base + m] * y[vb + m] / h[m]
        return s
    if code == SC_XI:
        return y[n + idx]
    if code == SC_W:
        return y[3 * n + idx]
    if code == SC_Z:
        return y[2 * n + idx] - cval
    if code == SC_WXI:
        return y[3 * n + idx] * y[n + idx]
    # SC_DOT
    base = 4 * n + 2 * n * idx
    s = 0.0
    for m in range(n):
        s += y[base + m] * vec[m]
    return s


# ---------------------------------------------------------------------------
# DOP853
# ---------------------------------------------------------------------------


@njit(cache=True)
def _rms(v):
    s = 0.0
    for k in range(v.shape[0]):
        s += v[k] * v[k]
    return np.sqrt(s / v.shape[0])


@njit(cache=True)
def _initial_step(y0, f0, rtol, atol, n, nj, nf, a, kind, coef, brk):
    dim = y0.shape[0]
    scale = atol + np.abs(y0) * rtol
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = np.empty(dim)
    rhs(y1, f1, n, nj, nf, a, kind, coef, brk)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100 * h0, h1)


@njit(cache=True)
def dense_eval_step(Fk, yk, x, out):
    dim = yk.shape[0]
    for d in range(dim):
        acc = 0.0
        for p in range(_NPOW - 1, -1, -1):
            acc += Fk[p, d]
            if (_NPOW - 1 - p) % 2 == 0:
                acc *= x
            else:
                acc *= 1.0 - x
        out[d] = acc + yk[d]


@njit(cache=True)
def integrate(
    y0,
    t_end,
    rtol,
    atol,
    max_steps,
    n,
    nj,
    nf,
    a,
    kind,
    coef,
    brk,
    stop_blocks,
    stop_counts,
):
    """Integrate from t = 0 to ``t_end`` (or until every Jacobi scalar listed in
    ``stop_blocks`` has changed sign ``stop_counts`` times).

    Returns (ts, ys, Fs, nsteps, status) with status 0 = reached t_end,
    1 = stopped on zeros, -1 = step size underflow, -2 = step budget exhausted.
    """
    dim = y0.shape[0]
    cap = 256
    ts = np.empty(cap + 1)
    ys = np.empty((cap + 1, dim))
    Fs = np.empty((cap, _NPOW, dim))
    ts[0] = 0.0
    ys[0] = y0
    K = np.empty((_NS + 4, dim))
    y = y0.copy()
    f = np.empty(dim)
    rhs(y, f, n, nj, nf, a, kind, coef, brk)
    h_abs = _initial_step(y, f, rtol, atol, n, nj, nf, a, kind, coef, brk)
    t = 0.0
    nst = 0
    status = 0
    nstop = stop_blocks.shape[0]
    zcount = np.zeros(nstop, dtype=np.int64)
    zsign = np.ones(nstop)
    vec0 = np.zeros(1)
    y_new = np.empty(dim)
    f_new = np.empty(dim)
    tmp = np.empty(dim)
    while t < t_end:
        if nst >= max_steps:
            status = -2
            break
        min_step = 10.0 * (np.nextafter(t, np.inf) - t)
        accepted = False
        rejected = False
        while not accepted:
            if h_abs < min_step:
                status = -1
                break
            h = h_abs
            t_new = t + h
            if t_new > t_end:
                t_new = t_end
            h = t_new - t
            h_abs = h
            # stages
            K[0] = f
            for s in range(1, _NS):
                for d in range(dim):
                    acc = 0.0
                    for q in range(s):
                        acc += _A[s, q] * K[q, d]
                    tmp[d] = y[d] + h * acc
                rhs(tmp, K[s], n, nj, nf, a, kind, coef, brk)
            for d in range(dim):
                acc = 0.0
                for q in range(_NS):
                    acc += _B[q] * K[q, d]
                y_new[d] = y[d] + h * acc
            rhs(y_new, f_new, n, nj, nf, a, kind, coef, brk)
            K[_NS] = f_new
            # error estimate
            e5 = 0.0
            e3 = 0.0
            for d in range(dim):
                sc = atol + max(abs(y[d]), abs(y_new[d])) * rtol
                a5 = 0.0
                a3 = 0.0
                for q in range(_NS + 1):
                    a5 += K[q, d] * _E5[q]
                    a3 += K[q, d] * _E3[q]
                a5 /= sc
                a3 /= sc
                e5 += a5 * a5
                e3 += a3 * a3
            if e5 == 0.0 and e3 == 0.0:
                err = 0.0
            else:
                err = h * e5 / np.sqrt((e5 + 0.01 * e3) * dim)
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err**ERR_EXP)
                if rejected:
                    factor = min(1.0, factor)
                h_abs *= factor
                accepted = True
            else:
                h_abs *= max(MIN_FACTOR, SAFETY * err**ERR_EXP)
                rejected = True
        if status == -1:
            break
        # dense output coefficients
        for s in range(_NS + 1, _NS + 4):
            arow = _A_EXTRA[s - _NS - 1]
            for d in range(dim):
                acc = 0.0
                for q in range(s):
                    acc += K[q, d] * arow[q]
                tmp[d] = y[d] + h * acc
            rhs(tmp, K[s], n, nj, nf, a, kind, coef, brk)
        if nst >= cap:
            ncap = 2 * cap
            ts2 = np.empty(ncap + 1)
            ys2 = np.empty((ncap + 1, dim))
            Fs2 = np.empty((ncap, _NPOW, dim))
            ts2[: cap + 1] = ts
            ys2[: cap + 1] = ys
            Fs2[:cap] = Fs
            ts, ys, Fs, cap = ts2, ys2, Fs2, ncap
        for d in range(dim):
            dy = y_new[d] - y[d]
            Fs[nst, 0, d] = dy
            Fs[nst, 1, d] = h * f[d] - dy
            Fs[nst, 2, d] = 2.0 * dy - h * (f_new[d] + f[d])
            for p in range(_NPOW - 3):
                acc = 0.0
                for q in range(_NS + 4):
                    acc += _D[p, q] * K[q, d]
                Fs[nst, 3 + p, d] = h * acc
        t = t_new
        y[:] = y_new
        f[:] = f_new
        nst += 1
        ts[nst] = t
        ys[nst] = y
        if nstop > 0:
            done = True
            for q in range(nstop):
                v = scalar(y, SC_JACOBI, stop_blocks[q], 0.0, vec0, n, nj, nf)
                if v * zsign[q] < 0.0:
                    zcount[q] += 1
                    zsign[q] = -zsign[q]
                if zcount[q] < stop_counts[q]:
                    done = False
            if done:
                status = 1
                break
    return ts[: nst + 1].copy(), ys[: nst + 1].copy(), Fs[:nst].copy(), nst, status


@njit(cache=True)
def locate(ts, t):
    """Index k of the step with ts[k] <= t <= ts[k+1]."""
    nst = ts.shape[0] - 1
    k = np.searchsorted(ts, t, side="right") - 1
    if k < 0:
        k = 0
    if k > nst - 1:
        k = nst - 1
    return k


@njit(cache=True)
def dense_at(ts, ys, Fs, t, out):
    k = locate(ts, t)
    hk = ts[k + 1] - ts[k]
    x = (t - ts[k]) / hk if hk > 0 else 0.0
    dense_eval_step(Fs[k], ys[k], x, out)


@njit(cache=True)
def dense_many(ts, ys, Fs, tq):
    out = np.empty((tq.shape[0], ys.shape[1]))
    for q in range(tq.shape[0]):
        dense_at(ts, ys, Fs, tq[q], out[q])
    return out


@njit(cache=True)
def find_roots(ts, ys, Fs, code, idx, cval, vec, n, nj, nf, t_lo, t_hi, max_roots, sub, xtol):
    """Sign changes of a scalar observable on [t_lo, t_hi], refined by bisection."""
    roots = np.empty(max_roots)
    nr = 0
    dim = ys.shape[1]
    buf = np.empty(dim)
    nst = ts.shape[0] - 1
    prev_t = t_lo
    dense_at(ts, ys, Fs, t_lo, buf)
    prev_v = scalar(buf, code, idx, cval, vec, n, nj, nf)
    k0 = locate(ts, t_lo)
    for k in range(k0, nst):
        if nr >= max_roots or ts[k] >= t_hi:
            break
        hk = ts[k + 1] - ts[k]
        for j in range(1, sub + 1):
            tj = ts[k] + hk * j / sub
            if tj <= prev_t:
                continue
            if tj > t_hi:
                tj = t_hi
            dense_eval_step(Fs[k], ys[k], (tj - ts[k]) / hk, buf)
            v = scalar(buf, code, idx, cval, vec, n, nj, nf)
            if prev_v == 0.0:
                prev_v = v
                prev_t = tj
                continue
            if v == 0.0 or (v > 0.0) != (prev_v > 0.0):
                lo = prev_t
                hi = tj
                vlo = prev_v
                if v != 0.0:
                    for _ in range(200):
                        if hi - lo <= xtol * max(1.0, abs(hi)):
                            break
                        mid = 0.5 * (lo + hi)
                        dense_at(ts, ys, Fs, mid, buf)
                        vm = scalar(buf, code, idx, cval, vec, n, nj, nf)
                        if vm == 0.0:
                            lo = mid
                            hi = mid
                            break
                        if (vm > 0.0) == (vlo > 0.0):
                            lo = mid
                            vlo = vm
                        else:
                            hi = mid
                    roots[nr] = 0.5 * (lo + hi)
                else:
                    roots[nr] = tj
                nr += 1
                if nr >= max_roots:
                    break
                if v == 0.0:
                    # restart the sign from the next sample
                    prev_v = 0.0
                    prev_t = tj
                    continue
            prev_v = v
            prev_t = tj
            if tj >= t_hi:
                break
    return roots[:nr].copy()


@njit(cache=True)
def gauss_integrate(ts, ys, Fs, nodes, weights, t_lo, t_hi, weightfun_code, params, n):
    """Per-step Gauss-Legendre quadrature of a built-in integrand.

    weightfun_code 0: sum_{i != j} sqrt|prod_k (z_i - bk_k)| h_i  (params = [j, bk...])
    """
    dim = ys.shape[1]
    buf = np.empty(dim)
    total = 0.0
    k0 = locate(ts, t_lo)
    nst = ts.shape[0] - 1
    for k in range(k0, nst):
        a0 = max(ts[k], t_lo)
        b0 = min(ts[k + 1], t_hi)
        if b0 <= a0:
            if ts[k] >= t_hi:
                break
            continue
        half = 0.5 * (b0 - a0)
        mid = 0.5 * (b0 + a0)
        for q in range(nodes.shape[0]):
            tq = mid + half * nodes[q]
            dense_at(ts, ys, Fs, tq, buf)
            z = buf[2 * n : 3 * n]
            h = hvec(z, n)
            j = int(params[0])
            val = 0.0
            for i in range(n):
                if i == j:
                    continue
                prod = 1.0
                for r in range(1, params.shape[0]):
                    prod *= z[i] - params[r]
                val += np.sqrt(abs(prod)) * h[i]
            total += weights[q] * half * val
    return total

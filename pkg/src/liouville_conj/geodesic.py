"""Geodesic and Jacobi-field integration with event detection.

All integration goes through the compiled DOP853 kernel in ``_kernels``.  A
trace keeps the full per-step dense-output coefficients, so every event
(turning points of f_i, crossings with b_i, zeros of Jacobi fields) is located
by bracketing on the dense output followed by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import (
    BranchLocusHit,
    ConservationBreach,
    DoubleZeroSuspected,
    FrameDegenerate,
    NoCommonZero,
    NotApplicable,
    NotReached,
)
from .integrals import (
    PhaseState,
    SpectralData,
    b_from_F,
    b_of_u,
    covector_from_nu,
    covector_from_u,
    first_integrals_from_f,
    spectral_from_b,
)
from .manifold import BasePoint


@dataclass(frozen=True)
class IntegrationOptions:
    rtol: float = 1e-12
    atol: float = 1e-13
    max_steps: int = 200_000
    drift_tol: float = 1e-8
    energy_tol: float = 1e-10
    raise_on_breach: bool = False
    zero_xtol: float = 1e-13
    samples_per_step: int = 4


DEFAULT_OPTIONS = IntegrationOptions()
_T_EPS = 1e-9  # roots closer than this (relative) to t = 0 are the start point itself


def _kparams(manifold):
    a, code, coef, brk = manifold.kernel_params()
    return a, np.int64(code), np.ascontiguousarray(coef, dtype=float), brk


def _augmented_initial(manifold, x0, xi0, dxi=(), frames=()):
    n = manifold.n
    x0 = np.asarray(x0, dtype=float)
    z0 = manifold.f(x0)
    w0 = manifold.fprime(x0)
    nj = len(dxi)
    nf = len(frames)
    y0 = np.zeros(K.state_dim(n, nj, nf))
    y0[:n] = x0
    y0[n : 2 * n] = xi0
    y0[2 * n : 3 * n] = z0
    y0[3 * n : 4 * n] = w0
    for b, d in enumerate(dxi):
        base = 4 * n + 2 * n * b
        y0[base + n : base + 2 * n] = d
    fb = 4 * n + 2 * n * nj
    for c, v in enumerate(frames):
        y0[fb + n * c : fb + n * (c + 1)] = v
    return y0


# ---------------------------------------------------------------------------
# dense trajectory container
# ---------------------------------------------------------------------------


@dataclass
class _Dense:
    ts: np.ndarray
    ys: np.ndarray
    Fs: np.ndarray
    n: int
    nj: int
    nf: int
    status: int

    @property
    def T(self):
        return float(self.ts[-1])

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return K.dense_many(self.ts, self.ys, self.Fs, t)

    def roots(self, code, idx, t_lo=0.0, t_hi=None, cval=0.0, vec=None, max_roots=10_000,
              sub=4, xtol=1e-13):
        t_hi = self.T if t_hi is None else t_hi
        vec = np.zeros(1) if vec is None else np.asarray(vec, dtype=float)
        return K.find_roots(self.ts, self.ys, self.Fs, code, idx, cval, vec, self.n, self.nj,
                            self.nf, float(t_lo), float(t_hi), max_roots, sub, xtol)


@dataclass
class GeodesicTrace:
    """Dense geodesic solution with conservation ledger and spectral data."""

    manifold: object
    initial: PhaseState
    dense: _Dense
    F0: np.ndarray
    spectral: SpectralData
    ledger: dict = field(default_factory=dict)
    events: dict = field(default_factory=dict)
    options: IntegrationOptions = DEFAULT_OPTIONS

    @property
    def n(self):
        return self.manifold.n

    @property
    def T(self):
        return self.dense.T

    def state(self, t):
        return self.dense(t)

    def x(self, t):
        return self.dense(t)[:, : self.n]

    def xi(self, t):
        return self.dense(t)[:, self.n : 2 * self.n]

    def f(self, t):
        return self.dense(t)[:, 2 * self.n : 3 * self.n]

    def fprime(self, t):
        return self.dense(t)[:, 3 * self.n : 4 * self.n]

    def velocity(self, t):
        Y = self.dense(t)
        n = self.n
        return np.array([y[n : 2 * n] * K.hvec(y[2 * n : 3 * n], n) for y in Y])

    def sample_times(self, per_step=2):
        ts = self.dense.ts
        frac = np.arange(per_step) / per_step
        inner = (ts[:-1, None] + np.diff(ts)[:, None] * frac[None, :]).ravel()
        return np.concatenate([inner, ts[-1:]])


def _ledger(manifold, dense, F0, per_step=2):
    n = manifold.n
    ts = dense.ts
    frac = np.arange(per_step) / per_step
    tq = np.concatenate([(ts[:-1, None] + np.diff(ts)[:, None] * frac[None, :]).ravel(), ts[-1:]])
    Y = K.dense_many(ts, dense.ys, dense.Fs, tq)
    a = manifold.a
    drift = np.zeros(n)
    zdrift = 0.0
    for y in Y:
        z = y[2 * n : 3 * n]
        F = first_integrals_from_f(a, z, y[n : 2 * n])
        drift = np.maximum(drift, np.abs(F - F0))
        zdrift = max(zdrift, float(np.max(np.abs(z - manifold.f(y[:n])))))
    return {
        "F_drift": drift[:-1].tolist(),
        "energy_drift": float(drift[-1]),
        "max_F_drift": float(drift[:-1].max()) if n > 1 else 0.0,
        "coordinate_drift": zdrift,
        "steps": int(ts.size - 1),
        "samples": int(tq.size),
    }


def _check_start(manifold, x0, tol=1e-12):
    f0 = manifold.f(np.asarray(x0, dtype=float))
    scale = manifold.spec.scale
    for k in range(manifold.n - 1):
        if abs(f0[k] - f0[k + 1]) <= tol * scale:
            raise BranchLocusHit("initial point lies on the branch locus")
    return f0


def integrate_geodesic(manifold, s0, T, opts=DEFAULT_OPTIONS, ledger=True):
    """Integrate the geodesic with initial covector ``s0`` on [0, T]."""
    f0 = _check_start(manifold, s0.x)
    F0 = first_integrals_from_f(manifold.a, f0, s0.xi)
    spectral = b_from_F(manifold.a, F0)
    y0 = _augmented_initial(manifold, s0.x, s0.xi)
    a, code, coef, brk = _kparams(manifold)
    empty = np.zeros(0, dtype=np.int64)
    ts, ys, Fs, nst, status = K.integrate(y0, float(T), opts.rtol, opts.atol, opts.max_steps,
                                          manifold.n, 0, 0, a, code, coef, brk, empty, empty)
    dense = _Dense(ts, ys, Fs, manifold.n, 0, 0, int(status))
    trace = GeodesicTrace(manifold, s0, dense, F0, spectral, options=opts)
    if ledger:
        trace.ledger = _ledger(manifold, dense, F0)
        breach = (trace.ledger["max_F_drift"] > opts.drift_tol
                  or trace.ledger["energy_drift"] > opts.energy_tol * max(1.0, F0[-1])
                  or status < 0)
        trace.ledger["breach"] = bool(breach)
        if breach and opts.raise_on_breach:
            raise ConservationBreach("conservation ledger exceeded", trace=trace)
    return trace


# ---------------------------------------------------------------------------
# Jacobi fields
# ---------------------------------------------------------------------------


@dataclass
class JacobiBundle:
    """Jacobi fields with Y(0) = 0 integrated with their parallel frames.

    Block b has initial momentum variation ``dxi0[b]``; ``frames[b]`` is the
    parallel transport of Y_b'(0)/|Y_b'(0)|, and ``y_b = <Y_b, V_b>/|Y_b'(0)|``.
    """

    manifold: object
    initial: PhaseState
    dense: _Dense
    dxi0: np.ndarray
    norms: np.ndarray
    labels: tuple
    spectral: SpectralData
    zeros: dict = field(default_factory=dict)
    provenance: str = "parallel-transport"

    @property
    def n(self):
        return self.manifold.n

    @property
    def T(self):
        return self.dense.T

    def _split(self, Y):
        n, nj = self.n, self.dense.nj
        fb = 4 * n + 2 * n * nj
        dx = np.stack([Y[:, 4 * n + 2 * n * b : 4 * n + 2 * n * b + n] for b in range(nj)], 1)
        V = np.stack([Y[:, fb + n * c : fb + n * (c + 1)] for c in range(self.dense.nf)], 1)
        return dx, V

    def fields(self, t):
        """(metric g (m x n), velocity (m x n), Y (m x nj x n), V (m x nf x n))."""
        Y = self.dense(t)
        n = self.n
        h = np.array([K.hvec(y[2 * n : 3 * n], n) for y in Y])
        vel = Y[:, n : 2 * n] * h
        dx, V = self._split(Y)
        return 1.0 / h, vel, dx, V

    def y(self, t):
        g, _, dx, V = self.fields(t)
        return np.einsum("mn,mbn,mbn->mb", g, dx, V) / self.norms[None, :]

    def trace(self):
        F0 = first_integrals_from_f(self.manifold.a, self.manifold.f(self.initial.x), self.initial.xi)
        return GeodesicTrace(self.manifold, self.initial, self.dense, F0, self.spectral)


def frame_at_zero(manifold, x0, dxi):
    """Initial unit frame vectors and norms |Y'(0)| for momentum variations."""
    f0 = manifold.f(np.asarray(x0, dtype=float))
    h = K.hvec(f0, manifold.n)
    frames, norms = [], []
    for d in dxi:
        v = h * d  # Y'(0) in coordinates
        nrm = float(np.sqrt(np.sum(v * v / h)))
        frames.append(v / nrm if nrm > 0 else v)
        norms.append(nrm)
    return np.array(frames), np.array(norms)


def integrate_jacobi(manifold, s0, dxi0, T, stop_zeros=None, opts=DEFAULT_OPTIONS,
                     labels=None, min_norm=1e-9):
    """Integrate the geodesic from ``s0`` with Jacobi fields Y_b(0) = 0,
    momentum variations ``dxi0[b]``, and their parallel frames.

    ``stop_zeros`` (an int) stops integration once every scalar y_b has
    changed sign that many times (``T`` is then only an upper bound).
    """
    dxi0 = np.atleast_2d(np.asarray(dxi0, dtype=float))
    f0 = _check_start(manifold, s0.x)
    frames, norms = frame_at_zero(manifold, s0.x, dxi0)
    if np.any(norms < min_norm):
        raise FrameDegenerate("initial Jacobi derivative vanishes (boundary cell)")
    nj = dxi0.shape[0]
    y0 = _augmented_initial(manifold, s0.x, s0.xi, dxi0, frames)
    a, code, coef, brk = _kparams(manifold)
    if stop_zeros:
        sb = np.arange(nj, dtype=np.int64)
        sc = np.full(nj, int(stop_zeros), dtype=np.int64)
    else:
        sb = sc = np.zeros(0, dtype=np.int64)
    ts, ys, Fs, nst, status = K.integrate(y0, float(T), opts.rtol, opts.atol, opts.max_steps,
                                          manifold.n, nj, nj, a, code, coef, brk, sb, sc)
    dense = _Dense(ts, ys, Fs, manifold.n, nj, nj, int(status))
    F0 = first_integrals_from_f(manifold.a, f0, s0.xi)
    spectral = b_from_F(manifold.a, F0)
    labels = tuple(range(1, nj + 1)) if labels is None else tuple(labels)
    return JacobiBundle(manifold, s0, dense, dxi0, norms, labels, spectral)


def find_zeros(bundle, T=None, max_zeros=64, slope_tol=1e-6, xtol=1e-13):
    """Zeros r^k of each scalar y_b on (0, T], refined by bisection."""
    T = bundle.T if T is None else min(T, bundle.T)
    out = {}
    for b, lab in enumerate(bundle.labels):
        r = bundle.dense.roots(K.SC_JACOBI, b, 0.0, T, max_roots=max_zeros + 1, xtol=xtol)
        r = r[r > _T_EPS * max(1.0, T)][:max_zeros]
        if r.size:
            eps = 1e-6
            slope = (bundle.y(r + eps)[:, b] - bundle.y(r - eps)[:, b]) / (2 * eps)
            if np.any(np.abs(slope) < slope_tol):
                raise DoubleZeroSuspected(f"y_{lab} has a (near) double zero")
        out[lab] = r
    bundle.zeros = out
    return out


def jacobi_from_u(manifold, p0, u, indices=None, T=None, stop_zeros=1, opts=DEFAULT_OPTIONS):
    """Bundle of the fields Y_i = d gamma / d u_i for the given (1-based) indices."""
    n = manifold.n
    indices = tuple(range(1, n)) if indices is None else tuple(indices)
    s0, J = covector_from_u(p0, u, with_jacobian=True)
    dxi = np.array([J[:, i - 1] for i in indices])
    if T is None:
        T = 50.0 * float(np.max(manifold.alphas))
    return integrate_jacobi(manifold, s0, dxi, T, stop_zeros=stop_zeros, opts=opts,
                            labels=indices)


def conjugate_radii(manifold, p0, u, indices=None, count=1, opts=DEFAULT_OPTIONS, T=None):
    """First ``count`` zeros of y_i for each requested index (dict i -> array)."""
    bundle = jacobi_from_u(manifold, p0, u, indices, T=T, stop_zeros=count, opts=opts)
    zeros = find_zeros(bundle, max_zeros=count)
    for lab, r in zeros.items():
        if r.size < count:
            raise NotReached(f"only {r.size} zeros of y_{lab} found", partial=zeros)
    return {lab: r[:count] for lab, r in zeros.items()}, bundle


# ---------------------------------------------------------------------------
# frame diagnostics
# ---------------------------------------------------------------------------


def hamiltonian_directions(manifold, b, f, xi, vel):
    """Directions pi_* X_{H_i} (i = 1..n-1) solved from the linear relations

        sum_i prod_{l != i}(f_k - b_l) P_i = (-1)^k 2 xi_k e_k + 2 prod_l(f_k - b_l) vel.
    """
    n = manifold.n
    b = np.asarray(b)
    M = np.array([[np.prod([f[k] - b[l] for l in range(n - 1) if l != i]) for i in range(n - 1)]
                  for k in range(n)])
    rhs = np.zeros((n, n))
    for k in range(n):
        rhs[k] = 2 * np.prod(f[k] - b) * vel
        rhs[k, k] += (-1) ** (k + 1) * 2 * xi[k]
    P, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return P  # row i = components of pi_* X_{H_{i+1}}


def dual_form_values(manifold, b, f, xi, vectors):
    """omega_i(v) = sum_k (-1)^k G_i(f_k) v_k / xi_k with G_i = prod_{l != i}(lambda - b_l)."""
    n = manifold.n
    out = np.zeros((n - 1, len(vectors)))
    for i in range(n - 1):
        G = np.array([np.prod([f[k] - b[l] for l in range(n - 1) if l != i]) for k in range(n)])
        coef = np.array([(-1) ** (k + 1) for k in range(n)]) * G / xi
        for m, v in enumerate(vectors):
            out[i, m] = float(np.dot(coef, v))
    return out


# ---------------------------------------------------------------------------
# events: sigma_i, t_i, S_i crossings
# ---------------------------------------------------------------------------


@dataclass
class EventLedger:
    turning: dict
    t: dict
    s: dict
    sigma_total: dict
    reached: dict

    def to_dict(self):
        conv = lambda d: {str(k): (v.tolist() if isinstance(v, np.ndarray) else v)
                          for k, v in sorted(d.items())}
        return {"turning": conv(self.turning), "t": conv(self.t), "s": conv(self.s),
                "sigma_total": conv(self.sigma_total), "reached": conv(self.reached)}


def sigma(trace_like, i, t, turning=None):
    """Total variation sigma_i(t) of f_i along the trace (1-based i)."""
    dense = trace_like.dense
    n = trace_like.n
    if turning is None:
        turning = dense.roots(K.SC_WXI, i - 1, 0.0, dense.T)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    knots = np.concatenate([[0.0], turning])
    fk = dense(knots)[:, 2 * n + i - 1]
    cum = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(fk)))])
    out = np.empty_like(t)
    ft = dense(t)[:, 2 * n + i - 1]
    for m, tv in enumerate(t):
        k = np.searchsorted(knots, tv, side="right") - 1
        out[m] = cum[k] + abs(ft[m] - fk[k])
    return out


def event_times(trace_like, rel_tol=1e-10):
    """Turning times, half-period times t_i and S_i crossing times s_i^k."""
    dense = trace_like.dense
    n = trace_like.n
    sp = trace_like.spectral
    a = sp.a
    scale = a[0] - a[-1]
    T = dense.T
    turning, tvals, svals, stot, reached = {}, {}, {}, {}, {}
    for i in range(1, n + 1):
        tau = dense.roots(K.SC_WXI, i - 1, 0.0, T)
        turning[i] = tau
        lo, hi = sp.interval(i)
        target = 2.0 * (hi - lo)
        knots = np.concatenate([[0.0], tau])
        fk = dense(knots)[:, 2 * n + i - 1]
        cum = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(fk)))])
        stot[i] = float(cum[-1])
        ti = None
        if target > rel_tol * scale:
            hit = np.nonzero(np.abs(cum - target) <= 1e-9 * scale)[0]
            k = int(np.searchsorted(cum, target)) - 1
            if hit.size:
                ti = float(knots[hit[0]])
            elif k < knots.size:
                t_a = knots[k]
                t_b = knots[k + 1] if k + 1 < knots.size else T
                f_a = fk[k]
                f_next = dense(np.array([t_b]))[0, 2 * n + i - 1]
                direction = np.sign(f_next - f_a)
                fval = f_a + direction * (target - cum[k])
                r = dense.roots(K.SC_Z, i - 1, t_a, t_b, cval=fval, max_roots=1)
                if r.size:
                    ti = float(r[0])
        tvals[i] = ti
        reached[i] = ti is not None
    for i in range(1, n):
        m = sp.s_coordinate(i)
        bi = sp.b[i - 1]
        r = dense.roots(K.SC_XI, m - 1, 0.0, T)
        r = r[r > _T_EPS * max(1.0, T)]  # 0 itself is not a positive time of S_i
        if r.size:
            fr = dense(r)[:, 2 * n + m - 1]
            r = r[np.abs(fr - bi) <= 1e-6 * scale]
        svals[i] = r
    return EventLedger(turning, tvals, svals, stot, reached)


# ---------------------------------------------------------------------------
# degenerate pair at b_j = b_{j-1}
# ---------------------------------------------------------------------------


@dataclass
class DegeneratePairState:
    j: int
    nu: np.ndarray
    tau1: float
    Z_norms: tuple
    theta_tau1: float
    theta_samples: np.ndarray
    theta_times: np.ndarray
    gram_min: float
    bundle: JacobiBundle
    t_j: float | None = None
    theta_tj: float | None = None

    def to_dict(self):
        return {"j": self.j, "nu": self.nu.tolist(), "tau1": self.tau1,
                "Z_norms": list(self.Z_norms), "theta_tau1": self.theta_tau1,
                "gram_min": self.gram_min, "t_j": self.t_j, "theta_tj": self.theta_tj}


def a1_factor(manifold, b, j, lam):
    """A_1(lambda) = sqrt|prod_{k != j, j-1}(lam - b_k)| A(lam) / (2 sqrt|prod_l (lam - a_l)|)."""
    n = manifold.n
    frozen = [k for k in range(n - 1) if k not in (j - 2, j - 1)]
    num = np.sqrt(abs(np.prod([lam - b[k] for k in frozen]))) if frozen else 1.0
    den = 2.0 * np.sqrt(abs(np.prod(lam - manifold.a)))
    return num * float(manifold.spec.profile(lam)) / den


def theta_nu0(manifold, dense, b, j, f_j0, t):
    """theta(t, 0) from the orbit relation with G = prod_{k != j, j-1}(lambda - b_k)."""
    n = manifold.n
    frozen = [b[k] for k in range(n - 1) if k not in (j - 2, j - 1)]
    params = np.array([float(j - 1)] + frozen)
    nodes, weights = np.polynomial.legendre.leggauss(12)
    A1 = a1_factor(manifold, b, j, f_j0)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    for m, tv in enumerate(t):
        out[m] = K.gauss_integrate(dense.ts, dense.ys, dense.Fs, nodes, weights, 0.0, float(tv),
                                   0, params, n) / A1
    return out


def theta_nu(dense, n, j, f_j0, nu, t):
    """theta(t, nu) for nu != 0 by unwrapping the angle in f_j - f_{j,0}."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    Y = dense(t)
    fj = Y[:, 2 * n + j - 1]
    wj = Y[:, 3 * n + j - 1] * Y[:, n + j - 1]  # sign of d f_j / dt
    rho = np.hypot(*nu)
    al = np.arctan2(-nu[1], -nu[0])
    c = np.clip((fj - f_j0 - nu[0]) / rho, -1.0, 1.0)
    ang = np.arccos(c)  # theta + alpha modulo sign
    # continuous branch: theta + alpha increases through multiples of pi
    phase = np.where(wj <= 0, ang, 2 * np.pi - ang)
    th = np.unwrap(phase) - al
    th -= 2 * np.pi * np.round((th[0]) / (2 * np.pi))
    return th


def degenerate_pair(manifold, p0, u_ref, j, nu=(0.0, 0.0), T=None, opts=DEFAULT_OPTIONS,
                    zero_tol=1e-7):
    """Jacobi fields Z_{j-1} = d gamma/d nu_1 and Z_j = d gamma/d nu_2 in the nu-chart."""
    n = manifold.n
    if n < 3 or not 2 <= j <= n - 1:
        raise NotApplicable("boundary cells exist only for n >= 3 and 2 <= j <= n-1")
    nu = np.asarray(nu, dtype=float)
    s0, Jn = covector_from_nu(p0, u_ref, j, nu, with_jacobian=True)
    dxi = Jn.T.copy()
    if T is None:
        T = 50.0 * float(np.max(manifold.alphas))
    bundle = integrate_jacobi(manifold, s0, dxi, T, stop_zeros=1, opts=opts,
                              labels=(j - 1, j))
    # rough location of the common zero from |Z_j|
    dense = bundle.dense
    tz = bundle.dense.roots(K.SC_JACOBI, 1, 0.0, dense.T, max_roots=1)
    if tz.size == 0:
        raise NoCommonZero("Z_j has no zero on the horizon")
    # extend the integration a little beyond the first zero for refinement
    bundle = integrate_jacobi(manifold, s0, dxi, 1.3 * float(tz[0]), opts=opts, labels=(j - 1, j))
    dense = bundle.dense
    ts = np.linspace(0.0, dense.T, 4001)[1:]
    g, _, dx, V = bundle.fields(ts)
    nz = np.sqrt(np.einsum("mn,mn,mn->m", g, dx[:, 1], dx[:, 1]))
    k = int(np.argmin(nz + (ts < 0.2 * tz[0]) * 1e300))
    t_a = ts[k]
    # scalar with a simple zero: pairing with the local derivative direction
    d_eps = 1e-4 * t_a
    _, _, dxp, _ = bundle.fields(np.array([t_a - d_eps, t_a + d_eps]))
    direction = dxp[1, 1] - dxp[0, 1]

    def s(tv):
        gg, _, dd, _ = bundle.fields(np.array([tv]))
        return float(np.sum(gg[0] * dd[0, 1] * direction))

    lo, hi = max(t_a - 0.02 * t_a, 1e-9), min(t_a + 0.02 * t_a, dense.T)
    slo, shi = s(lo), s(hi)
    if slo * shi > 0:
        raise NoCommonZero("could not bracket the zero of Z_j")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        sm = s(mid)
        if sm == 0 or hi - lo < 1e-14 * mid:
            break
        if (sm > 0) == (slo > 0):
            lo, slo = mid, sm
        else:
            hi = mid
    tau1 = 0.5 * (lo + hi)
    gg, _, dd, _ = bundle.fields(np.array([tau1]))
    # |Z| normalized by |Z'(0)| so that the test is scale free
    Zn = tuple(float(np.sqrt(np.sum(gg[0] * dd[0, b] ** 2)) / bundle.norms[b]) for b in range(2))
    # Gram determinant of normalized (Z_{j-1}, Z_j) on [0.1 tau1, 0.9 tau1]
    tg = np.linspace(0.1 * tau1, 0.9 * tau1, 200)
    gg, _, dd, _ = bundle.fields(tg)
    G11 = np.einsum("mn,mn,mn->m", gg, dd[:, 0], dd[:, 0])
    G22 = np.einsum("mn,mn,mn->m", gg, dd[:, 1], dd[:, 1])
    G12 = np.einsum("mn,mn,mn->m", gg, dd[:, 0], dd[:, 1])
    gram = (G11 * G22 - G12**2) / (bundle.norms[0] ** 2 * bundle.norms[1] ** 2)
    b = bundle.spectral.b
    f_j0 = float(manifold.f(s0.x)[j - 1])
    th_t = np.linspace(0.0, tau1, 65)
    if np.all(nu == 0):
        th = theta_nu0(manifold, dense, b_of_u(p0.f_array, u_ref), j, f_j0, th_t)
        th_tau = float(th[-1])
        t_j = theta_tj = None
    else:
        th = theta_nu(dense, n, j, f_j0, nu, th_t)
        th_tau = float(th[-1])
        t_j = event_times(bundle.trace()).t[j]
        theta_tj = None if t_j is None else float(theta_nu(dense, n, j, f_j0, nu, np.linspace(0.0, t_j, 513))[-1])
    state = DegeneratePairState(j, nu, float(tau1), Zn, th_tau, th, th_t, float(gram.min()),
                                bundle, t_j, theta_tj)
    if max(Zn) > zero_tol:
        raise NoCommonZero(f"|Z| at tau_1 = {Zn}")
    return state


# ---------------------------------------------------------------------------
# accumulation of conjugate points towards the boundary of L_i
# ---------------------------------------------------------------------------


def asymptotic_accumulation(manifold, p0, u, i=1, K_zeros=20, opts=DEFAULT_OPTIONS):
    """|x_m(r_i^k) - x_m(s_i^{k'})| for k <= K_zeros.

    ``m`` is the coordinate defining S_i.  When b_i = a_i^+ the crossing is
    k' = k (the one preceding r_i^k); when b_i = a_i^- it is the following one,
    k' = k + 1, which is the side r_i^k approaches.
    Returns (sequence, zeros r_i^k, crossings s_i^k).
    """
    if manifold.spec.profile.kind == "constant":
        raise NotApplicable("round sphere: spectral data degenerate")
    s0, J = covector_from_u(p0, u, with_jacobian=True)
    f0 = p0.f_array
    sp = spectral_from_b(manifold.a, b_of_u(f0, u))
    if not sp.distinct:
        raise NotApplicable("accumulation needs b distinct from each other and from a")
    T = 400.0 * float(np.max(manifold.alphas))
    bundle = integrate_jacobi(manifold, s0, J[:, i - 1][None, :], T, stop_zeros=K_zeros + 1,
                              opts=opts, labels=(i,))
    zeros = find_zeros(bundle, max_zeros=K_zeros + 1)[i]
    if zeros.size < K_zeros:
        raise NotReached("not enough zeros", partial=zeros)
    ev = event_times(bundle.trace())
    s = ev.s[i]
    m = sp.s_coordinate(i)
    if s.size < K_zeros + 1:
        raise NotReached("not enough crossings of S_i", partial=s)
    r = zeros[:K_zeros]
    # pairing s^k < r^k < s^{k+1}
    if not np.all((s[:K_zeros] < r) & (r < s[1 : K_zeros + 1])):
        raise NotApplicable("crossings do not interleave with the zeros (0 in S_i?)")
    # b_i = a_i^+: pair r^k with s^k; b_i = a_i^-: the mirrored pairing with s^{k+1}
    shift = 0 if sp.b[i - 1] >= manifold.a[i] else 1
    Y = bundle.dense(np.concatenate([r, s[shift : K_zeros + shift]]))
    seq = np.abs(Y[:K_zeros, m - 1] - Y[K_zeros:, m - 1])
    return seq, r, s[: K_zeros + 1]


__all__ = [
    "IntegrationOptions",
    "GeodesicTrace",
    "JacobiBundle",
    "EventLedger",
    "DegeneratePairState",
    "integrate_geodesic",
    "integrate_jacobi",
    "jacobi_from_u",
    "conjugate_radii",
    "find_zeros",
    "event_times",
    "sigma",
    "frame_at_zero",
    "hamiltonian_directions",
    "dual_form_values",
    "degenerate_pair",
    "theta_nu0",
    "theta_nu",
    "asymptotic_accumulation",
]

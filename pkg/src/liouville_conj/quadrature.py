"""Hyperelliptic integrals over the oscillation intervals [a_l^+, a_{l-1}^-].

The basic object is

    I_l = int_{a_l^+}^{a_{l-1}^-} (-1)^l G(lam) W(lam) dlam / sqrt(-prod_k (lam-b_k) prod_k (lam-a_k))

with a polynomial G and an optional smooth weight W (typically A(lam)(lam-a_n)).
Both endpoints are removed by lam = lo + (hi - lo) sin^2(psi), which maps the
two inverse-square-root singularities to a smooth integrand in psi; roots of
higher multiplicity at an endpoint are cancelled analytically against G.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import DegenerateInterval, FDUnstable, NearTurningPoint, SingularInterior

_ROOT_TOL = 1e-14


@dataclass(frozen=True)
class HyperellipticIntegrand:
    """Integrand on the l-th interval (1 <= l <= n).

    ``G_coef`` are ascending polynomial coefficients; ``G_roots`` are extra
    linear factors (lam - g).  ``weight`` is a smooth positive function or None.
    """

    a: tuple
    b: tuple
    l: int
    G_coef: tuple = (1.0,)
    G_roots: tuple = ()
    weight: object = None
    signed: bool = True

    @property
    def n(self):
        return len(self.a) - 1

    def interval(self):
        a, b, l = np.asarray(self.a), np.asarray(self.b), self.l
        lo = a[l] if l == self.n else max(a[l], b[l - 1])
        hi = a[l - 1] if l == 1 else min(a[l - 1], b[l - 2])
        return float(lo), float(hi)

    def G(self, lam):
        lam = np.asarray(lam, dtype=float)
        val = np.polynomial.polynomial.polyval(lam, np.asarray(self.G_coef, dtype=float))
        for g in self.G_roots:
            val = val * (lam - g)
        return val


def _radicand_roots(a, b):
    return np.concatenate([np.asarray(a, float), np.asarray(b, float)])


def _profile_weight(profile, a_n):
    if profile is None:
        return None
    return lambda lam: profile(lam) * (lam - a_n)


def singular_integral(ig: HyperellipticIntegrand, tol=1e-13, return_error=False):
    """Value of the integral; endpoint singularities handled by substitution."""
    lo, hi = ig.interval()
    scale = float(ig.a[0] - ig.a[-1])
    if hi - lo <= _ROOT_TOL * scale:
        if return_error:
            return 0.0, 0.0
        return 0.0
    roots = _radicand_roots(ig.a, ig.b)
    inside = roots[(roots > lo + _ROOT_TOL * scale) & (roots < hi - _ROOT_TOL * scale)]
    if inside.size:
        raise SingularInterior(f"radicand root(s) {inside} strictly inside [{lo}, {hi}]")
    at_lo = np.abs(roots - lo) <= _ROOT_TOL * scale
    at_hi = np.abs(roots - hi) <= _ROOT_TOL * scale
    rest = roots[~(at_lo | at_hi)]
    g_roots = np.asarray(ig.G_roots, dtype=float)
    g_lo = np.abs(g_roots - lo) <= _ROOT_TOL * scale
    g_hi = np.abs(g_roots - hi) <= _ROOT_TOL * scale
    g_rest = g_roots[~(g_lo | g_hi)]
    # net exponents of (lam - lo), (hi - lam) left after the substitution absorbs
    # one inverse square root at each end (0 for a simple endpoint root)
    e_lo = int(g_lo.sum()) - 0.5 * int(at_lo.sum()) + 0.5
    e_hi = int(g_hi.sum()) - 0.5 * int(at_hi.sum()) + 0.5
    if e_lo <= -0.5 or e_hi <= -0.5:
        raise SingularInterior("non-integrable endpoint (root multiplicity too high)")
    mid = 0.5 * (lo + hi)
    if -np.prod(np.sign(mid - roots)) <= 0:
        raise SingularInterior("radicand is negative on the interval")
    sign = (-1.0) ** ig.l if ig.signed else 1.0
    delta = hi - lo
    coef = np.asarray(ig.G_coef, dtype=float)
    w = ig.weight
    g_sign_hi = (-1.0) ** int(g_hi.sum())  # (lam - hi)^k = (-1)^k (hi - lam)^k

    def integrand(psi):
        s, c = np.sin(psi), np.cos(psi)
        dlo, dhi = delta * s * s, delta * c * c
        lam = lo + dlo
        val = np.polynomial.polynomial.polyval(lam, coef)
        for g in g_rest:
            val *= lam - g
        val *= g_sign_hi / np.sqrt(np.prod(np.abs(lam - rest)))
        if w is not None:
            val *= w(lam)
        # dlam / sqrt((lam-lo)(hi-lam)) = 2 dpsi
        if e_lo != 0.0:
            val *= dlo**e_lo
        if e_hi != 0.0:
            val *= dhi**e_hi
        return 2.0 * val

    with warnings.catch_warnings():
        # roundoff warnings at epsrel ~ 1e-14 are expected; the error estimate is returned
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(integrand, 0.0, 0.5 * np.pi, epsabs=tol, epsrel=1e-14, limit=400)
        if err > max(tol, 1e-12 * abs(val)) * 100:
            # near-coincident outside roots produce log-like peaks: split once
            v1, e1 = quad(integrand, 0.0, 0.25 * np.pi, epsabs=tol, epsrel=1e-14, limit=800)
            v2, e2 = quad(integrand, 0.25 * np.pi, 0.5 * np.pi, epsabs=tol, epsrel=1e-14,
                          limit=800)
            val, err = v1 + v2, e1 + e2
    val *= sign
    if return_error:
        return float(val), float(err)
    return float(val)


def interval_sum(a, b, G_coef=(1.0,), G_roots=(), weight=None, signed=True, tol=1e-13,
                 return_error=False):
    """sum_l int_{a_l^+}^{a_{l-1}^-} (-1)^l G W / sqrt(...)."""
    n = len(a) - 1
    tot, err = 0.0, 0.0
    for l in range(1, n + 1):
        ig = HyperellipticIntegrand(tuple(a), tuple(b), l, tuple(G_coef), tuple(G_roots), weight,
                                    signed)
        v, e = singular_integral(ig, tol, return_error=True)
        tot += v
        err += e
    return (tot, err) if return_error else tot


# ---------------------------------------------------------------------------
# Abel-type relations
# ---------------------------------------------------------------------------


def abel_residuals(a, b, signed=True, tol=1e-13):
    """Residuals of the Abel relations for G = lam^m, 0 <= m <= n-2.

    ``signed=False`` drops the (-1)^l factor (negative control).
    """
    n = len(a) - 1
    out = []
    for m in range(n - 1):
        coef = np.zeros(m + 1)
        coef[m] = 1.0
        out.append(interval_sum(a, b, coef, signed=signed, tol=tol))
    return np.array(out)


def _admissible(a, b):
    n = len(a) - 1
    return (all(a[i + 1] < b[i - 1] < a[i - 1] for i in range(1, n))
            and all(b[i] < b[i - 1] for i in range(1, n - 1)))


def random_admissible(a, rng, margin=1e-3):
    """Uniformly sampled b with a_{i+1} < b_i < a_{i-1}, b_i decreasing, distinct from a."""
    a = np.asarray(a, dtype=float)
    n = a.size - 1
    scale = a[0] - a[-1]
    for _ in range(100_000):
        b = np.array([rng.uniform(a[i + 1], a[i - 1]) for i in range(1, n)])
        if not _admissible(a, b):
            continue
        if np.min(np.abs(b[:, None] - a[None, :])) < margin * scale:
            continue
        if n > 2 and np.min(-np.diff(b)) < margin * scale:
            continue
        return b
    raise RuntimeError("could not sample admissible b")


# ---------------------------------------------------------------------------
# sign inequalities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InequalityCase:
    """One case of the sign suite.

    kind: "P1" (index set I), "P2a" (G = prod_{k != i}, expect < 0),
    "P2b" (G = prod_{k != i, j}, expect > 0), "P3" (second derivative, expect > 0).
    Indices are 1-based.
    """

    kind: str
    i: int = 0
    j: int = 0
    I: tuple = ()

    @property
    def case_id(self):
        if self.kind == "P1":
            return f"P1(I={list(self.I)})"
        if self.kind == "P2b":
            return f"P2b(i={self.i},j={self.j})"
        return f"{self.kind}(i={self.i})"

    @property
    def expected_sign(self):
        return -1 if self.kind == "P2a" else 1


def all_cases(n):
    cases = []
    for size in range(0, n - 2):
        for I in combinations(range(1, n), size):
            cases.append(InequalityCase("P1", I=I))
    for i in range(1, n):
        cases.append(InequalityCase("P2a", i=i))
        for j in range(1, n):
            if j != i:
                cases.append(InequalityCase("P2b", i=i, j=j))
        cases.append(InequalityCase("P3", i=i))
    return cases


@dataclass
class SignResult:
    case_id: str
    b: list
    value: float
    error_estimate: float
    expected_sign: int
    step: float = 0.0
    method: str = "fd"

    @property
    def passed(self):
        return bool(np.sign(self.value) == self.expected_sign
                    and self.error_estimate < abs(self.value))

    def to_dict(self):
        return {"caseId": self.case_id, "b": [float(x) for x in self.b], "value": self.value,
                "errorEstimate": self.error_estimate, "method": self.method, "pass": self.passed}


def fd_step(a, b, i, rel=1e-5):
    """Central-difference step for d/db_i: 1e-5 (a_0 - a_n), shrunk to stay
    below 1/20 of the distance from b_i to any other a or b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    others = np.concatenate([a, np.delete(b, i - 1)])
    gap = np.min(np.abs(others - b[i - 1]))
    return min(rel * (a[0] - a[-1]), gap / 20.0)


def inequality_value(a, profile, b, case: InequalityCase, tol=1e-14):
    """Signed value and FD error estimate of one inequality case."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.size - 1
    weight = _profile_weight(profile, a[-1])
    if case.kind == "P1":
        if n < 3:
            raise ValueError("P1 requires n >= 3 (#I <= n-3)")
        roots = tuple(b[j - 1] for j in case.I)
        val, err = interval_sum(a, b, G_roots=roots, weight=weight, tol=tol, return_error=True)
        sgn = (-1.0) ** (n + len(case.I))  # (-1)^{n-l+#I} = (-1)^{n+#I} (-1)^l
        return sgn * val, err, 0.0
    i = case.i
    if case.kind in ("P2a", "P3"):
        roots = tuple(b[k - 1] for k in range(1, n) if k != i)
    else:
        roots = tuple(b[k - 1] for k in range(1, n) if k not in (i, case.j))

    def F(bi):
        bb = b.copy()
        bb[i - 1] = bi
        return interval_sum(a, bb, G_roots=roots, weight=weight, tol=tol)

    h = fd_step(a, b, i)
    bi = b[i - 1]
    if case.kind == "P3":
        f0 = F(bi)
        d = lambda hh: (F(bi + hh) - 2 * f0 + F(bi - hh)) / hh**2
        v1, v2 = d(h), d(2 * h)
        val = (4 * v1 - v2) / 3
    else:
        d = lambda hh: (F(bi + hh) - F(bi - hh)) / (2 * hh)
        v1, v2 = d(h), d(2 * h)
        val = (4 * v1 - v2) / 3
    err = abs(v1 - v2)
    if err > abs(val) / 10:
        raise FDUnstable(f"{case.case_id}: FD error {err:.3e} vs value {val:.3e}")
    return val, err, h


def inequality_signs(a, profile, b, case: InequalityCase, tol=1e-14):
    val, err, h = inequality_value(a, profile, b, case, tol)
    return SignResult(case.case_id, list(np.asarray(b, float)), float(val), float(err),
                      case.expected_sign, h)


def b_kernel(a, profile, b, J, lam):
    """B(lam) of the partial-fraction split of A(lam)(lam - a_n) / prod_{j in J}(lam - b_j)."""
    a = np.asarray(a, dtype=float)
    lam = np.asarray(lam, dtype=float)
    bJ = [b[j - 1] for j in J]
    At = lambda x: profile(x) * (x - a[-1])
    val = At(lam) / np.prod([lam - x for x in bJ], axis=0) if bJ else At(lam)
    for m, bj in enumerate(bJ):
        e = At(bj) / np.prod([bj - x for k, x in enumerate(bJ) if k != m]) if len(bJ) > 1 else At(bj)
        val = val - e / (lam - bj)
    return val


def b_kernel_sign_check(a, profile, b, J, samples=257):
    """(-1)^{#J} B(lam) > 0 on [a_n, a_0] for #J >= 2 (sampled away from the poles)."""
    a = np.asarray(a, dtype=float)
    lam = np.linspace(a[-1], a[0], samples)
    bJ = np.array([b[j - 1] for j in J])
    keep = np.min(np.abs(lam[:, None] - bJ[None, :]), axis=1) > 1e-3 * (a[0] - a[-1])
    B = b_kernel(a, profile, b, J, lam[keep])
    return bool(np.all((-1.0) ** len(J) * B > 0)), float(np.min((-1.0) ** len(J) * B))


def _tilde_derivative(profile, a_n, k):
    """k-th derivative of A(lam)(lam - a_n)."""
    if k == 0:
        return lambda x: profile(x) * (x - a_n)
    return lambda x: profile.derivative(x, k) * (x - a_n) + k * profile.derivative(x, k - 1)


def kernel_value(a, profile, b, case: InequalityCase, nodes=24):
    """Derivative cases written through the smooth kernel dB/db_i (no finite differences):

    P2: (1/2) sum_l int (-1)^l (dB/db_i) prod_k (lam - b_k) / sqrt(...)
    P3: (3/8) sum_l int (-1)^l (d^2B/db_i^2) prod_k (lam - b_k) / sqrt(...)
    with B from the partial-fraction split of A(lam)(lam - a_n) over J = {i} or {i, j}.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, w = np.polynomial.legendre.leggauss(nodes)
    t, wt = 0.5 * (x + 1), 0.5 * w
    bi = b[case.i - 1]
    if case.kind == "P2a":
        d2 = _tilde_derivative(profile, a[-1], 2)
        kern = lambda lam: float(np.sum(wt * (1 - t) * d2(t * lam + (1 - t) * bi)))
        factor = 0.5
    elif case.kind == "P3":
        d3 = _tilde_derivative(profile, a[-1], 3)
        kern = lambda lam: float(np.sum(wt * (1 - t) ** 2 * d3(t * lam + (1 - t) * bi)))
        factor = 3.0 / 8.0
    elif case.kind == "P2b":
        d3 = _tilde_derivative(profile, a[-1], 3)
        bj = b[case.j - 1]
        # simplex {t, s >= 0, t + s <= 1}: s = (1 - t) v
        T, V = np.meshgrid(t, t, indexing="ij")
        W = np.outer(wt, wt) * (1 - T)
        S = (1 - T) * V

        def kern(lam):
            return float(np.sum(W * T * d3((1 - T - S) * lam + T * bi + S * bj)))

        factor = 0.5
    else:
        raise ValueError("kernel form is provided for the derivative cases only")
    return factor * interval_sum(a, b, G_roots=tuple(b), weight=kern)


# ---------------------------------------------------------------------------
# limit sequences
# ---------------------------------------------------------------------------


@dataclass
class LimitSequence:
    b_limit: np.ndarray
    direction: np.ndarray
    deltas: np.ndarray
    description: str

    def members(self):
        return [self.b_limit + d * self.direction for d in self.deltas]


def random_limit_sequence(a, rng, deltas=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6)):
    """A sequence b^k -> b^inf where b^inf has one coincidence b_i = a_i, a_{i+1}, a_{i-1},
    or b_i = b_{i-1}; the ordering of all a's and b's is constant along it."""
    a = np.asarray(a, dtype=float)
    n = a.size - 1
    scale = a[0] - a[-1]
    for _ in range(1000):
        b = random_admissible(a, rng, margin=0.05)
        i = int(rng.integers(1, n))
        kinds = ["a_i", "a_i+1", "a_i-1"] + (["b_i-1"] if i >= 2 else [])
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind == "a_i":
            target = a[i]
            side = rng.choice([-1.0, 1.0])
        elif kind == "a_i+1":
            target, side = a[i + 1], 1.0
        elif kind == "a_i-1":
            target, side = a[i - 1], -1.0
        else:
            target, side = b[i - 2], -1.0
        bl = b.copy()
        bl[i - 1] = target
        direction = np.zeros(n - 1)
        direction[i - 1] = side * scale
        members = [bl + d * direction for d in deltas]
        if not all(_admissible(a, m) for m in members):
            continue
        others = [np.concatenate([a, np.delete(m, i - 1)]) for m in members]
        # b^k must stay distinct from everything except the chosen target
        gaps = [np.sort(np.abs(o - m[i - 1]))[1] for o, m in zip(others, members)]
        if min(gaps) < 0.02 * scale:
            continue
        return LimitSequence(bl, direction, np.asarray(deltas), f"b_{i} -> {kind}")
    raise RuntimeError("could not build a limit sequence")


def limit_sequence_signs(a, profile, seq: LimitSequence, case: InequalityCase):
    """Sign results along the sequence (all must match the expected sign).

    Finite differences are used while they are stable; close to the limit the
    FD noise grows like eps/h^2, and the smooth kernel form is used instead
    (``method == "kernel"``).
    """
    out = []
    for b in seq.members():
        try:
            out.append(inequality_signs(a, profile, b, case))
        except FDUnstable:
            val = kernel_value(a, profile, b, case)
            out.append(SignResult(case.case_id, list(np.asarray(b, float)), float(val), 0.0,
                                  case.expected_sign, 0.0, "kernel"))
    return out


def limit_converges(results, rel=0.5):
    """The last two members agree in sign and to ``rel`` relative (nonzero limit)."""
    v = np.array([r.value for r in results])
    return bool(v[-1] != 0 and abs(v[-1] - v[-2]) <= rel * abs(v[-1]))


# ---------------------------------------------------------------------------
# orbit relations along a trace
# ---------------------------------------------------------------------------


@dataclass
class OrbitCheck:
    window: tuple
    G_coef: tuple
    monic: bool
    value: float
    target: float
    summands: list = field(default_factory=list)

    @property
    def residual(self):
        return self.value - self.target


def _split_points(trace, s, t):
    from . import _kernels as K

    dense = trace.dense
    pts = [s, t]
    ts = dense.ts
    pts.extend(ts[(ts > s) & (ts < t)].tolist())
    for i in range(trace.n):
        pts.extend(dense.roots(K.SC_XI, i, s, t).tolist())
    return np.unique(np.asarray(pts))


def orbit_quadrature_check(trace, window=None, G_coef=(1.0,), monic=False, nodes=10,
                           local_b=True):
    """sum_i int_s^t (+-1)^i G(f_i) |dx_i/dt| / sqrt((-1)^{i-1} prod_k (f_i - b_k)) dt.

    For deg G <= n-2 the target is 0; for monic G of degree n-1 (``monic=True``)
    the sign is (-1)^{i+1} and the target is t - s.

    With ``local_b`` the radicand uses the b_k of the state at each node.  With
    the initial b instead, a conservation drift delta shifts the radicand off
    xi_i^2 and each turning point contributes an error of order sqrt(delta).
    """
    from . import _kernels as K
    from .integrals import b_from_F, first_integrals_from_f

    n = trace.n
    s, t = (0.0, trace.T) if window is None else window
    b = trace.spectral.b
    coef = np.asarray(G_coef, dtype=float)
    if monic and (coef.size != n or coef[-1] != 1.0):
        raise ValueError("monic form needs an ascending coefficient list of length n with leading 1")
    x, w = np.polynomial.legendre.leggauss(nodes)
    pts = _split_points(trace, s, t)
    lo, hi = pts[:-1], pts[1:]
    tq = (0.5 * (hi - lo)[:, None] * x[None, :] + 0.5 * (hi + lo)[:, None]).ravel()
    wq = (0.5 * (hi - lo)[:, None] * w[None, :]).ravel()
    Y = trace.dense(tq)
    a = trace.spectral.a
    if local_b:
        B = np.array([b_from_F(a, first_integrals_from_f(a, y[2 * n : 3 * n], y[n : 2 * n])).b
                      for y in Y])
    else:
        B = np.broadcast_to(b, (Y.shape[0], b.size))
    H = np.array([K.hvec(y[2 * n : 3 * n], n) for y in Y])
    summands = np.zeros(n)
    for i in range(1, n + 1):
        f = Y[:, 2 * n + i - 1]
        xi = Y[:, n + i - 1]
        h = H[:, i - 1]
        rad = (-1.0) ** (i - 1) * np.prod(f[:, None] - B, axis=1)
        if np.any(rad <= 0) and np.any(np.abs(xi[rad <= 0]) > 1e-6):
            raise NearTurningPoint("radicand non-positive away from a turning point")
        ratio = np.abs(xi) / np.sqrt(np.maximum(rad, 1e-300))
        sgn = (-1.0) ** (i + 1) if monic else (-1.0) ** i
        g = np.polynomial.polynomial.polyval(f, coef)
        summands[i - 1] = sgn * np.sum(wq * g * h * ratio)
    target = (t - s) if monic else 0.0
    return OrbitCheck((float(s), float(t)), tuple(coef.tolist()), monic, float(summands.sum()),
                      float(target), summands.tolist())


def half_period_check(trace, i, G_coef=(1.0,), profile=None, nodes=10):
    """Compare the i-th orbit summand over [0, t_i] with the interval integral
    of (-1)^i G A / sqrt(-prod(lam - b) prod(lam - a))."""
    from .geodesic import event_times

    ev = event_times(trace)
    ti = ev.t[i]
    if ti is None:
        raise DegenerateInterval(f"t_{i} not reached or interval degenerate")
    chk = orbit_quadrature_check(trace, (0.0, ti), G_coef, nodes=nodes)
    a = trace.spectral.a
    b = trace.spectral.b
    prof = trace.manifold.spec.profile if profile is None else profile
    ig = HyperellipticIntegrand(tuple(a), tuple(b), i, tuple(G_coef), (), prof)
    return chk.summands[i - 1], singular_integral(ig)


def report_json(results, path=None):
    payload = [r.to_dict() for r in results]
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


__all__ = [
    "HyperellipticIntegrand",
    "singular_integral",
    "interval_sum",
    "abel_residuals",
    "random_admissible",
    "InequalityCase",
    "SignResult",
    "all_cases",
    "fd_step",
    "inequality_value",
    "inequality_signs",
    "b_kernel",
    "b_kernel_sign_check",
    "kernel_value",
    "LimitSequence",
    "random_limit_sequence",
    "limit_sequence_signs",
    "limit_converges",
    "OrbitCheck",
    "orbit_quadrature_check",
    "half_period_check",
    "report_json",
]

"""First integrals, spectral parameters b_i, and charts of the unit cotangent sphere.

On the unit cotangent sphere at a general point p0 the constants b_k lie in
[f_{k+1,0}, f_{k,0}] and are parametrized by angles u_k,

    b_k(u_k) = f_{k+1,0} cos^2 u_k + f_{k,0} sin^2 u_k,

and each momentum factorizes as xi_i = cos u_i sin u_{i-1} sqrt(positive),
which makes the covector a smooth function of u.  Near the cells where
b_j = b_{j-1} the alternative chart (nu_1, nu_2) is used instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ComplexRoots, DegenerateMetric
from .manifold import BasePoint, metric_from_f


@dataclass(frozen=True)
class PhaseState:
    """A covector xi at torus coordinates x."""

    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float))

    def to_dict(self):
        return {"x": self.x.tolist(), "xi": self.xi.tolist()}


@dataclass(frozen=True)
class SpectralData:
    """Roots b_1 >= ... >= b_{n-1} of Theta, the c_j and the oscillation ranges.

    ``a_plus[i]`` and ``a_minus[i]`` are indexed 0..n; coordinate i oscillates
    in [a_plus[i], a_minus[i-1]].
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    a_plus: np.ndarray
    a_minus: np.ndarray
    distinct: bool
    touches_a: tuple  # indices i (1-based) with b_i == a_i within tolerance

    def interval(self, i):
        """Oscillation range of f_i (1-based)."""
        return self.a_plus[i], self.a_minus[i - 1]

    def s_coordinate(self, i):
        """1-based coordinate whose crossings with b_i define S_i."""
        return i if self.b[i - 1] >= self.a[i] else i + 1

    def to_dict(self):
        return {
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "a_plus": self.a_plus.tolist(),
            "a_minus": self.a_minus.tolist(),
            "distinct": self.distinct,
            "touches_a": list(self.touches_a),
        }


# ---------------------------------------------------------------------------
# first integrals
# ---------------------------------------------------------------------------


def energy2(f, xi):
    """2E = sum_i xi_i^2 / g_ii."""
    return float(np.sum(np.asarray(xi) ** 2 / metric_from_f(f)))


def b_matrix(a, f):
    """The matrix b_ij(x_i) defining the first integrals."""
    a = np.asarray(a, dtype=float)
    n = a.size - 1
    inner = a[1:n]
    B = np.empty((n, n))
    for i in range(n):
        s = (-1) ** (i + 1)
        for j in range(n - 1):
            B[i, j] = s * np.prod([f[i] - inner[k] for k in range(n - 1) if k != j])
        B[i, n - 1] = -s * np.prod(f[i] - inner)
    return B


def first_integrals_from_f(a, f, xi):
    """(F_1, ..., F_{n-1}, 2E) from the explicit inverse-matrix formula."""
    a = np.asarray(a, dtype=float)
    f = np.asarray(f, dtype=float)
    xi = np.asarray(xi, dtype=float)
    n = f.size
    g = metric_from_f(f)
    F = np.empty(n)
    F[n - 1] = np.sum(xi**2 / g)
    for j in range(1, n):
        num = 0.0
        for i in range(n):
            others = [l for l in range(n) if l != i]
            num += np.prod([f[l] - a[j] for l in others]) / g[i] * xi[i] ** 2
        den = np.prod([a[k] - a[j] for k in range(1, n) if k != j])
        F[j - 1] = num / den
    return F


def first_integrals(manifold, state):
    """First integrals at a :class:`PhaseState` (or ``(f, xi)`` pair)."""
    if isinstance(state, PhaseState):
        f = manifold.f(state.x)
        xi = state.xi
    else:
        f, xi = state
    return first_integrals_from_f(manifold.a, f, xi)


def first_integrals_linear(a, f, xi):
    """Same quantities obtained by solving the linear system directly."""
    return np.linalg.solve(b_matrix(a, f), np.asarray(xi, dtype=float) ** 2)


# ---------------------------------------------------------------------------
# Theta polynomial and b <-> c conversion
# ---------------------------------------------------------------------------


def theta_coefficients(a, c):
    """Ascending coefficients of Theta(lambda) for constants c_1..c_{n-1}."""
    inner = np.asarray(a, dtype=float)[1:-1]
    m = inner.size
    P = np.polynomial.Polynomial
    theta = -np.prod([P([-ak, 1.0]) for ak in inner]) if m else P([-1.0])
    for j in range(m):
        term = P([c[j]])
        for k in range(m):
            if k != j:
                term = term * P([-inner[k], 1.0])
        theta = theta + term
    return theta.coef


def c_from_b(a, b):
    """c_i = -prod_l (a_i - b_l) / prod_{k != i} (a_i - a_k)."""
    inner = np.asarray(a, dtype=float)[1:-1]
    b = np.asarray(b, dtype=float)
    m = inner.size
    c = np.empty(m)
    for i in range(m):
        den = np.prod([inner[i] - inner[k] for k in range(m) if k != i])
        c[i] = -np.prod(inner[i] - b) / den
    return c


def _real_roots_desc(coef_asc, scale):
    """Real roots of a polynomial with negative-monic leading term, descending."""
    deg = len(coef_asc) - 1
    # normalize to monic: Theta = -prod(lambda - b)
    p = -np.asarray(coef_asc, dtype=float)
    p = p / p[-1]
    tol = 1e-6 * scale
    if deg == 1:
        roots = np.array([-p[0]])
    elif deg == 2:
        B, C = p[1], p[0]
        disc = B * B - 4 * C
        if disc < 0:
            if disc < -(tol**2):
                raise ComplexRoots(f"discriminant {disc:.3e} < 0")
            disc = 0.0
        sq = np.sqrt(disc)
        q = -0.5 * (B + np.copysign(sq, B)) if B != 0 else 0.5 * sq
        r1 = q
        r2 = C / q if q != 0 else -q
        roots = np.array([r1, r2])
    elif deg == 3:
        a2, a1, a0 = p[2], p[1], p[0]
        shift = a2 / 3.0
        P = a1 - a2 * a2 / 3.0
        Q = 2 * a2**3 / 27.0 - a2 * a1 / 3.0 + a0
        if P < 0:
            m = 2 * np.sqrt(-P / 3.0)
            arg = 3 * Q / (P * m)
            if abs(arg) > 1 + 1e-9:
                raise ComplexRoots("cubic Theta has complex roots")
            arg = np.clip(arg, -1.0, 1.0)
            th = np.arccos(arg) / 3.0
            roots = m * np.cos(th - 2 * np.pi * np.arange(3) / 3.0) - shift
        else:
            if P > tol**2:
                raise ComplexRoots("cubic Theta has complex roots")
            roots = np.full(3, -shift)
    else:
        r = np.roots(p[::-1])
        if np.max(np.abs(r.imag)) > tol:
            raise ComplexRoots("Theta has complex roots")
        roots = r.real
    return np.sort(roots)[::-1]


def spectral_from_b(a, b, rel_tol=1e-9):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.size - 1
    scale = a[0] - a[-1]
    a_plus = a.copy()
    a_minus = a.copy()
    for i in range(1, n):
        a_plus[i] = max(a[i], b[i - 1])
        a_minus[i] = min(a[i], b[i - 1])
    tol = rel_tol * scale
    touches = tuple(i for i in range(1, n) if abs(b[i - 1] - a[i]) <= tol)
    vals = np.concatenate([a, b])
    gaps = np.abs(vals[:, None] - vals[None, :])[np.triu_indices(vals.size, 1)]
    distinct = bool(np.all(gaps > tol))
    return SpectralData(a, b, c_from_b(a, b), a_plus, a_minus, distinct, touches)


def b_from_F(a, F, rel_tol=1e-9):
    """Spectral data of the covector with first integrals ``F`` (last entry 2E)."""
    a = np.asarray(a, dtype=float)
    F = np.asarray(F, dtype=float)
    c = F[:-1] / F[-1]
    scale = a[0] - a[-1]
    b = _real_roots_desc(theta_coefficients(a, c), scale)
    return spectral_from_b(a, b, rel_tol)


def spectral_of_state(manifold, state):
    return b_from_F(manifold.a, first_integrals(manifold, state))


# ---------------------------------------------------------------------------
# u-chart of the unit cotangent sphere
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DirectionU:
    """Angles u_1..u_{n-1} parametrizing a unit covector at p0."""

    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.mod(np.asarray(self.u, dtype=float), 2 * np.pi))

    def b(self, f0):
        return b_of_u(f0, self.u)

    def eps(self):
        return eps_of_u(self.u)


def b_of_u(f0, u):
    f0 = np.asarray(f0, dtype=float)
    u = np.asarray(u, dtype=float)
    return f0[1:] * np.cos(u) ** 2 + f0[:-1] * np.sin(u) ** 2


def db_du(f0, u):
    f0 = np.asarray(f0, dtype=float)
    return np.sin(2 * np.asarray(u)) * (f0[:-1] - f0[1:])


def eps_of_u(u):
    """Sign vector epsilon_i of the momenta."""
    u = np.asarray(u, dtype=float)
    n = u.size + 1
    e = np.ones(n)
    for i in range(n):
        v = 1.0
        if i <= n - 2:
            v *= np.cos(u[i])
        if i >= 1:
            v *= np.sin(u[i - 1])
        e[i] = np.sign(v) if v != 0 else 0.0
    return e


def _f0(p0):
    return p0.f_array if isinstance(p0, BasePoint) else np.asarray(p0, dtype=float)


def covector_from_u(p0, u, with_jacobian=False):
    """Unit covector xi(u) at p0; optionally the Jacobian d xi / d u (n x n-1)."""
    f0 = _f0(p0)
    u = np.asarray(u.u if isinstance(u, DirectionU) else u, dtype=float)
    n = f0.size
    b = b_of_u(f0, u)
    dbdu = db_du(f0, u)
    xi = np.empty(n)
    J = np.zeros((n, n - 1))
    for i in range(n):
        fac1 = np.cos(u[i]) if i <= n - 2 else 1.0
        fac2 = np.sin(u[i - 1]) if i >= 1 else 1.0
        rad = 1.0
        if i <= n - 2:
            rad *= f0[i] - f0[i + 1]
        if i >= 1:
            rad *= f0[i - 1] - f0[i]
        others = [k for k in range(n - 1) if k not in (i - 1, i)]
        for k in others:
            rad *= abs(f0[i] - b[k])
        sq = np.sqrt(rad)
        xi[i] = fac1 * fac2 * sq
        if with_jacobian:
            if i <= n - 2:
                J[i, i] = -np.sin(u[i]) * fac2 * sq
            if i >= 1:
                J[i, i - 1] = fac1 * np.cos(u[i - 1]) * sq
            for k in others:
                d = f0[i] - b[k]
                J[i, k] = fac1 * fac2 * sq * (-np.sign(d) * dbdu[k]) / (2 * abs(d))
    if isinstance(p0, BasePoint):
        state = PhaseState(p0.x_array, xi)
    else:
        state = xi
    return (state, J) if with_jacobian else state


def classify_cell(u, f0=None, tol=1e-9):
    """Cell labels of a direction: 'Ck-', 'Ck+', boundary 'dCk+' (= dC_{k-1}^-)
    or 'interior'.  Membership is decided on the angles, which is equivalent
    to comparing b_k(u_k) with its range endpoints."""
    u = np.asarray(u.u if isinstance(u, DirectionU) else u, dtype=float)
    labels = set()
    m = u.size
    minus = [np.sin(u[k]) ** 2 <= tol for k in range(m)]
    plus = [np.cos(u[k]) ** 2 <= tol for k in range(m)]
    for k in range(m):
        if minus[k]:
            labels.add(f"C{k+1}-")
        if plus[k]:
            labels.add(f"C{k+1}+")
    for k in range(1, m):
        if plus[k] and minus[k - 1]:
            labels.add(f"dC{k+1}+")
    return frozenset(labels) if labels else frozenset({"interior"})


def is_boundary_cell(labels):
    return any(lab.startswith("d") for lab in labels)


# ---------------------------------------------------------------------------
# nu-chart near b_j = b_{j-1}
# ---------------------------------------------------------------------------


def nu_from_u(p0, u, j):
    """(nu_1, nu_2) of the covector u for the pair (b_{j-1}, b_j), j 1-based >= 2."""
    f0 = _f0(p0)
    u = np.asarray(u, dtype=float)
    b = b_of_u(f0, u)
    fj = f0[j - 1]
    bj, bjm = b[j - 1], b[j - 2]
    nu1 = 0.5 * (bj + bjm) - fj
    prod = max((bjm - fj) * (fj - bj), 0.0)
    sgn = np.sign(np.cos(u[j - 1]) * np.sin(u[j - 2]))
    return np.array([nu1, (sgn if sgn != 0 else 1.0) * np.sqrt(prod)])


def u_from_nu(p0, u_ref, j, nu):
    """A u whose covector equals the nu-chart covector (other angles from u_ref)."""
    f0 = _f0(p0)
    u = np.array(u_ref, dtype=float)
    fj = f0[j - 1]
    rho = np.hypot(nu[0], nu[1])
    bjm = fj + nu[0] + rho
    bj = fj + nu[0] - rho
    sj = np.clip((bj - f0[j]) / (f0[j - 1] - f0[j]), 0.0, 1.0)
    sjm = np.clip((bjm - f0[j - 1]) / (f0[j - 2] - f0[j - 1]), 0.0, 1.0)
    a_j = np.arcsin(np.sqrt(sj))
    a_jm = np.arcsin(np.sqrt(sjm))
    u[j - 1] = a_j if np.sin(u_ref[j - 1]) >= 0 else -a_j
    s2 = 1.0 if nu[1] >= 0 else -1.0
    if np.cos(u_ref[j - 2]) >= 0:
        u[j - 2] = s2 * a_jm
    else:
        u[j - 2] = np.pi - s2 * a_jm
    return u


def covector_from_nu(p0, u_ref, j, nu, with_jacobian=False):
    """Covector in the nu-chart around the boundary cell of u_ref.

    The constants b_k with k not in {j-1, j} and the signs eps_i (i != j) are
    frozen at their values for u_ref.  The optional Jacobian is d xi / d nu.
    """
    f0 = _f0(p0)
    u_ref = np.asarray(u_ref, dtype=float)
    n = f0.size
    b = b_of_u(f0, u_ref)
    eps = eps_of_u(u_ref)
    fj = f0[j - 1]
    xi = np.empty(n)
    J = np.zeros((n, 2))
    frozen = [k for k in range(n - 1) if k not in (j - 2, j - 1)]
    for i in range(n):
        C = np.prod([abs(f0[i] - b[k]) for k in frozen]) if frozen else 1.0
        if i == j - 1:
            xi[i] = nu[1] * np.sqrt(C)
            J[i, 1] = np.sqrt(C)
            continue
        d = f0[i] - fj
        D = d * d - 2 * d * nu[0] - nu[1] ** 2
        sD = np.sqrt(max(D, 0.0))
        xi[i] = eps[i] * np.sqrt(C) * sD
        if with_jacobian:
            J[i, 0] = eps[i] * np.sqrt(C) * (-d) / sD
            J[i, 1] = eps[i] * np.sqrt(C) * (-nu[1]) / sD
    state = PhaseState(p0.x_array, xi) if isinstance(p0, BasePoint) else xi
    return (state, J) if with_jacobian else state


def unit_check(f0, xi):
    try:
        return energy2(f0, xi)
    except DegenerateMetric:
        return np.nan


__all__ = [
    "PhaseState",
    "SpectralData",
    "DirectionU",
    "energy2",
    "b_matrix",
    "first_integrals",
    "first_integrals_from_f",
    "first_integrals_linear",
    "theta_coefficients",
    "c_from_b",
    "b_from_F",
    "spectral_from_b",
    "spectral_of_state",
    "b_of_u",
    "db_du",
    "eps_of_u",
    "covector_from_u",
    "classify_cell",
    "is_boundary_cell",
    "nu_from_u",
    "u_from_nu",
    "covector_from_nu",
]

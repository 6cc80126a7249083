"""Liouville manifolds built from a spectrum a_0 > ... > a_n and a profile A.

The coordinate functions f_i are periodic solutions of

    (f_i')^2 = (-1)^i 4 prod_j (f_i - a_j) / A(f_i)^2,

with f_i(0) = a_i and f_i(alpha_i/4) = a_{i-1}.  We never integrate this ODE
directly: with the substitution f = a_i + (a_{i-1} - a_i) sin^2(phi/2) the
inverse function x_i(f) becomes the integral of a smooth, strictly positive
function of phi, which we represent by a Chebyshev series.  Inverting that
series gives f_i to near machine precision, including at the turning points.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial
from scipy.interpolate import PPoly, make_interp_spline

from .errors import (
    ConditionViolated,
    DegenerateMetric,
    NonMonotoneSpectrum,
    NonPositiveProfile,
    QuadratureFailure,
    WrongProfile,
)

PROFILE_KINDS = ("constant", "sqrt", "polynomial", "tabulated")
# integer codes understood by the compiled kernels
_KIND_CODE = {"constant": 0, "sqrt": 1, "polynomial": 2, "tabulated": 3}
TABULATED_SPLINE_DEGREE = 5


# ---------------------------------------------------------------------------
# profile A(lambda)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AProfile:
    """The positive function A(lambda) defining the metric.

    ``kind`` is one of ``constant`` (uses ``value``), ``sqrt``, ``polynomial``
    (``coefficients`` in ascending powers) or ``tabulated`` (``lam`` and
    ``values`` interpolated by a quintic spline).
    """

    kind: str = "sqrt"
    value: float = 1.0
    coefficients: tuple = ()
    lam: tuple = ()
    values: tuple = ()
    _spline: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "polynomial" and len(self.coefficients) == 0:
            raise ValueError("polynomial profile needs coefficients")
        if self.kind == "tabulated":
            lam = np.asarray(self.lam, dtype=float)
            vals = np.asarray(self.values, dtype=float)
            if lam.ndim != 1 or lam.shape != vals.shape or lam.size < 8:
                raise ValueError("tabulated profile needs >= 8 matching samples")
            if np.any(np.diff(lam) <= 0):
                raise ValueError("tabulated lambda samples must increase")
            spl = make_interp_spline(lam, vals, k=TABULATED_SPLINE_DEGREE)
            object.__setattr__(self, "_spline", spl)

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, c=1.0):
        return cls(kind="constant", value=float(c))

    @classmethod
    def sqrt(cls):
        return cls(kind="sqrt")

    @classmethod
    def polynomial(cls, coefficients):
        return cls(kind="polynomial", coefficients=tuple(float(c) for c in coefficients))

    @classmethod
    def tabulated(cls, lam, values):
        return cls(
            kind="tabulated",
            lam=tuple(float(v) for v in lam),
            values=tuple(float(v) for v in values),
        )

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind", "sqrt")
        if kind == "constant":
            return cls.constant(d.get("value", 1.0))
        if kind == "sqrt":
            return cls.sqrt()
        if kind == "polynomial":
            return cls.polynomial(d["coefficients"])
        if kind == "tabulated":
            return cls.tabulated(d["lam"], d["values"])
        raise ValueError(f"unknown profile kind {kind!r}")

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "sqrt":
            return {"kind": "sqrt"}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "coefficients": list(self.coefficients)}
        return {"kind": "tabulated", "lam": list(self.lam), "values": list(self.values)}

    # -- evaluation -------------------------------------------------------
    @property
    def max_order(self):
        """Highest derivative order that is meaningful for this kind."""
        if self.kind == "tabulated":
            return TABULATED_SPLINE_DEGREE - 1
        return 10**6

    def __call__(self, lam):
        return self.derivative(lam, 0)

    def derivative(self, lam, k=1):
        lam = np.asarray(lam, dtype=float)
        if k < 0:
            raise ValueError("derivative order must be >= 0")
        if self.kind == "constant":
            return np.full_like(lam, self.value if k == 0 else 0.0)
        if self.kind == "sqrt":
            coef = 1.0
            for m in range(k):
                coef *= 0.5 - m
            return coef * lam ** (0.5 - k)
        if self.kind == "polynomial":
            p = Polynomial(self.coefficients)
            return p.deriv(k)(lam) if k else p(lam)
        if k > self.max_order:
            raise ValueError(
                f"tabulated profile supports derivatives up to order {self.max_order}"
            )
        return self._spline(lam, nu=k)

    def kernel_params(self):
        """(kind code, coefficient array, breakpoints) for the compiled kernels."""
        code = _KIND_CODE[self.kind]
        if self.kind == "constant":
            return code, np.array([[self.value]]), np.zeros(2)
        if self.kind == "sqrt":
            return code, np.zeros((1, 1)), np.zeros(2)
        if self.kind == "polynomial":
            return code, np.asarray(self.coefficients, dtype=float)[None, :], np.zeros(2)
        pp = PPoly.from_spline(self._spline)
        keep = np.diff(pp.x) > 0
        x = np.concatenate([pp.x[:-1][keep], pp.x[-1:]])
        return code, np.ascontiguousarray(pp.c[:, keep]), np.ascontiguousarray(x)


# ---------------------------------------------------------------------------
# spec + condition report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionReport:
    """Sampled minima of the sign quantities of the monotonicity condition.

    ``tilde_minima[k]`` is the minimum of (-1)^k Atilde^(k) for 2 <= k <= n,
    ``derivative_minima[k]`` the minimum of -(-1)^k A^(k) for 1 <= k <= n-1.
    """

    tilde_minima: dict
    derivative_minima: dict
    passes: bool
    round_sphere: bool
    warnings: tuple = ()
    samples: int = 0

    def to_dict(self):
        return {
            "tilde_minima": {str(k): v for k, v in sorted(self.tilde_minima.items())},
            "derivative_minima": {
                str(k): v for k, v in sorted(self.derivative_minima.items())
            },
            "passes": self.passes,
            "round_sphere": self.round_sphere,
            "warnings": list(self.warnings),
            "samples": self.samples,
        }


@dataclass(frozen=True)
class ManifoldSpec:
    n: int
    a: tuple
    profile: AProfile
    condition_report: ConditionReport

    @property
    def a_array(self):
        return np.asarray(self.a, dtype=float)

    @property
    def scale(self):
        """Spectral width a_0 - a_n, used to make tolerances relative."""
        return self.a[0] - self.a[-1]

    def to_dict(self):
        return {"a": list(self.a), "profile": self.profile.to_dict()}


def _tilde_derivative(profile, a_n, lam, k):
    """k-th derivative of (lam - a_n) A(lam)."""
    out = (lam - a_n) * profile.derivative(lam, k)
    if k >= 1:
        out = out + k * profile.derivative(lam, k - 1)
    return out


def validate_spec(a, profile, samples=2001, strict=False):
    """Check the spectrum and profile and build a :class:`ManifoldSpec`.

    With ``strict=True`` a failing monotonicity condition raises
    :class:`ConditionViolated` (the spec is attached to the exception);
    otherwise the failure is only recorded in the report.
    """
    a = tuple(float(v) for v in a)
    n = len(a) - 1
    if n < 2:
        raise NonMonotoneSpectrum("need at least three constants a_0 > a_1 > a_2")
    if any(a[i] <= a[i + 1] for i in range(n)) or a[-1] <= 0:
        raise NonMonotoneSpectrum(f"spectrum must be strictly decreasing and positive: {a}")
    if not isinstance(profile, AProfile):
        profile = AProfile.from_dict(profile)

    # Chebyshev-Lobatto points cluster at the ends where violations usually live
    lam = a[-1] + (a[0] - a[-1]) * 0.5 * (1 - np.cos(np.linspace(0, np.pi, samples)))
    A = profile(lam)
    if not np.all(np.isfinite(A)) or np.min(A) <= 0:
        raise NonPositiveProfile("A(lambda) must be positive on [a_n, a_0]")

    notes = []
    tilde, deriv = {}, {}
    for k in range(2, n + 1):
        if k > profile.max_order:
            notes.append(f"order {k} exceeds spline smoothness; not checked")
            continue
        tilde[k] = float(np.min((-1) ** k * _tilde_derivative(profile, a[-1], lam, k)))
    for k in range(1, n):
        if k > profile.max_order:
            continue
        deriv[k] = float(np.min(-((-1) ** k) * profile.derivative(lam, k)))

    round_sphere = profile.kind == "constant"
    passes = all(v > 0 for v in tilde.values()) and all(v > 0 for v in deriv.values())
    if round_sphere:
        notes.append("constant profile: round-sphere mode (strict condition is degenerate)")
    report = ConditionReport(tilde, deriv, passes, round_sphere, tuple(notes), samples)
    spec = ManifoldSpec(n, a, profile, report)
    if strict and not (passes or round_sphere):
        raise ConditionViolated("monotonicity condition violated", spec=spec)
    return spec


# ---------------------------------------------------------------------------
# coordinate profiles f_i
# ---------------------------------------------------------------------------


def _chebfit_adaptive(func, domain, tol=2e-14, start=32, max_deg=8192):
    """Chebyshev interpolant of ``func``; doubles the degree until the tail
    coefficients reach ``tol`` (relative) or stop decreasing."""
    deg = start
    prev_tail = np.inf
    while True:
        cheb = Chebyshev.interpolate(func, deg, domain=domain)
        c = np.abs(cheb.coef)
        scale = c.max()
        tail = c[-4:].max() / scale
        plateau = deg >= 256 and tail > 0.5 * prev_tail
        if tail <= tol or plateau or deg >= max_deg:
            if tail > 1e-9:
                raise QuadratureFailure("Chebyshev series did not converge")
            return cheb
        prev_tail = tail
        deg *= 2


@dataclass(frozen=True)
class CoordinateProfile:
    """Periodic coordinate function f_i with its period alpha_i.

    ``x_grid``/``f_grid``/``fprime_grid`` tabulate one full period [0, alpha];
    ``f_inverse``/``x_inverse`` tabulate x_i(f) on the quarter period.
    """

    i: int
    alpha: float
    lo: float  # a_i
    hi: float  # a_{i-1}
    x_of_phi: Chebyshev = field(repr=False)
    speed: Chebyshev = field(repr=False)  # dx/dphi
    x_grid: np.ndarray = field(repr=False)
    f_grid: np.ndarray = field(repr=False)
    fprime_grid: np.ndarray = field(repr=False)
    f_inverse: np.ndarray = field(repr=False)
    x_inverse: np.ndarray = field(repr=False)
    _rest: tuple = field(repr=False, default=())
    _profile: AProfile = field(repr=False, default=None)

    @property
    def quarter(self):
        return 0.25 * self.alpha

    def _phi(self, y):
        """Invert x(phi) = y for y in [0, alpha/4] by Newton iteration."""
        y = np.asarray(y, dtype=float)
        phi = np.interp(y, self.x_inverse_phi_x, self.x_inverse_phi)
        for _ in range(6):
            phi = phi - (self.x_of_phi(phi) - y) / self.speed(phi)
            phi = np.clip(phi, 0.0, np.pi)
        return phi

    @property
    def x_inverse_phi(self):
        return np.linspace(0.0, np.pi, self.f_inverse.size)

    @property
    def x_inverse_phi_x(self):
        return self.x_inverse

    def _reduce(self, x):
        half = 0.5 * self.alpha
        y = np.mod(np.asarray(x, dtype=float), half)
        flip = y > 0.5 * half
        y = np.where(flip, half - y, y)
        return y, np.where(flip, -1.0, 1.0)

    def _rest_abs(self, f):
        out = np.ones_like(f)
        for aj in self._rest:
            out = out * np.abs(f - aj)
        return out

    def f(self, x):
        y, _ = self._reduce(x)
        phi = self._phi(y)
        return self.lo + (self.hi - self.lo) * np.sin(0.5 * phi) ** 2

    def fprime(self, x):
        y, sign = self._reduce(x)
        phi = self._phi(y)
        fv = self.lo + (self.hi - self.lo) * np.sin(0.5 * phi) ** 2
        return (
            sign
            * (self.hi - self.lo)
            * np.sin(phi)
            * np.sqrt(self._rest_abs(fv))
            / self._profile(fv)
        )

    def f_and_fprime(self, x):
        return self.f(x), self.fprime(x)

    def x_of_f(self, f):
        """Quarter-period inverse: the x in [0, alpha/4] with f_i(x) = f."""
        f = np.asarray(f, dtype=float)
        s = np.clip((f - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        phi = 2.0 * np.arcsin(np.sqrt(s))
        return self.x_of_phi(phi)

    def ode_rhs(self, f):
        """Right side (-1)^i 4 prod_j (f - a_j) / A(f)^2 of the coordinate ODE."""
        f = np.asarray(f, dtype=float)
        prod = (f - self.lo) * (f - self.hi)
        for aj in self._rest:
            prod = prod * (f - aj)
        return (-1) ** self.i * 4.0 * prod / self._profile(f) ** 2

    def to_rows(self):
        return [
            (self.i, float(x), float(f), float(fp))
            for x, f, fp in zip(self.x_grid, self.f_grid, self.fprime_grid)
        ]


def solve_profiles(spec, nodes_per_quarter=512):
    """Periods alpha_i and coordinate functions f_i for every index i = 1..n."""
    if nodes_per_quarter < 512:
        raise ValueError("need at least 512 nodes per quarter period")
    a = spec.a
    n = spec.n
    A = spec.profile
    profiles = []
    for i in range(1, n + 1):
        lo, hi = a[i], a[i - 1]
        rest = tuple(a[j] for j in range(n + 1) if j not in (i - 1, i))
        width = hi - lo

        def speed(phi, lo=lo, width=width, rest=rest):
            f = lo + width * np.sin(0.5 * phi) ** 2
            r = np.ones_like(f)
            for aj in rest:
                r = r * np.abs(f - aj)
            return A(f) / (2.0 * np.sqrt(r))

        sp = _chebfit_adaptive(speed, [0.0, np.pi])
        X = sp.integ(lbnd=0.0)
        quarter = float(X(np.pi))
        if not np.isfinite(quarter) or quarter <= 0:
            raise QuadratureFailure(f"period integral failed for index {i}")
        alpha = 4.0 * quarter

        phi_tab = np.linspace(0.0, np.pi, nodes_per_quarter + 1)
        x_inv = X(phi_tab)
        x_inv[0], x_inv[-1] = 0.0, quarter
        f_inv = lo + width * np.sin(0.5 * phi_tab) ** 2

        prof = CoordinateProfile(
            i=i,
            alpha=alpha,
            lo=lo,
            hi=hi,
            x_of_phi=X,
            speed=sp,
            x_grid=np.empty(0),
            f_grid=np.empty(0),
            fprime_grid=np.empty(0),
            f_inverse=f_inv,
            x_inverse=x_inv,
            _rest=rest,
            _profile=A,
        )
        xg = np.linspace(0.0, alpha, 4 * nodes_per_quarter + 1)
        object.__setattr__(prof, "x_grid", xg)
        object.__setattr__(prof, "f_grid", prof.f(xg))
        object.__setattr__(prof, "fprime_grid", prof.fprime(xg))
        profiles.append(prof)
    return tuple(profiles)


# ---------------------------------------------------------------------------
# manifold bundle, base points, metric, embedding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Manifold:
    """A validated spec together with its coordinate profiles."""

    spec: ManifoldSpec
    profiles: tuple

    @classmethod
    def build(cls, a, profile=None, nodes_per_quarter=512, strict=False):
        if profile is None:
            profile = AProfile.sqrt()
        spec = validate_spec(a, profile, strict=strict)
        return cls(spec, solve_profiles(spec, nodes_per_quarter))

    @property
    def n(self):
        return self.spec.n

    @property
    def a(self):
        return self.spec.a_array

    @property
    def alphas(self):
        return np.array([p.alpha for p in self.profiles])

    def f(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([p.f(x[..., k]) for k, p in enumerate(self.profiles)]).T

    def fprime(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([p.fprime(x[..., k]) for k, p in enumerate(self.profiles)]).T

    def kernel_params(self):
        code, coef, brk = self.spec.profile.kernel_params()
        return self.a.copy(), code, coef, brk


@dataclass(frozen=True)
class BasePoint:
    x: tuple
    f_values: tuple
    fprime_values: tuple
    general_flag: bool

    @property
    def x_array(self):
        return np.asarray(self.x, dtype=float)

    @property
    def f_array(self):
        return np.asarray(self.f_values, dtype=float)

    @property
    def fprime_array(self):
        return np.asarray(self.fprime_values, dtype=float)


def general_flag(manifold, f_values, rel_tol=1e-6):
    """True when the point lies on none of the hypersurfaces N_k."""
    a = manifold.a
    n = manifold.n
    tol = rel_tol * manifold.spec.scale
    for k in range(1, n):
        if abs(f_values[k - 1] - a[k]) <= tol or abs(f_values[k] - a[k]) <= tol:
            return False
    return True


def base_point(manifold, x, rel_tol=1e-6):
    x = np.asarray(x, dtype=float)
    if x.shape != (manifold.n,):
        raise ValueError(f"expected {manifold.n} coordinates")
    f = manifold.f(x)
    fp = manifold.fprime(x)
    return BasePoint(
        tuple(map(float, x)),
        tuple(map(float, f)),
        tuple(map(float, fp)),
        general_flag(manifold, f, rel_tol),
    )


def metric_from_f(f, rel_tol=1e-13):
    """Diagonal metric coefficients g_ii = (-1)^{n-i} prod_{l != i} (f_l - f_i)."""
    f = np.asarray(f, dtype=float)
    n = f.size
    g = np.empty(n)
    scale = max(abs(f[0] - f[-1]), 1.0)
    for i in range(n):
        prod = 1.0
        for l in range(n):
            if l != i:
                d = f[l] - f[i]
                if abs(d) <= rel_tol * scale:
                    raise DegenerateMetric(f"f_{l+1} = f_{i+1} (branch locus)")
                prod *= d
        g[i] = (-1) ** (n - 1 - i) * prod
    return g


def metric_at(manifold, x):
    """Metric coefficients at torus coordinates ``x`` (or a :class:`BasePoint`)."""
    if isinstance(x, BasePoint):
        f = x.f_array
    else:
        f = manifold.f(np.asarray(x, dtype=float))
    return metric_from_f(f)


def ellipsoid_signs(manifold, x):
    """Signs of the ambient coordinates u_0..u_n from the torus quadrant."""
    x = np.asarray(x, dtype=float)
    n = manifold.n
    al = manifold.alphas
    s = np.sin(2 * np.pi * x / al)
    c = np.cos(2 * np.pi * x / al)
    signs = np.empty(n + 1)
    signs[0] = np.sign(c[0])
    for k in range(1, n):
        signs[k] = np.sign(s[k - 1]) * np.sign(c[k])
    signs[n] = np.sign(s[n - 1])
    signs[signs == 0] = 1.0
    return signs


def embed_from_lambda(a, lam, signs=None):
    """Ambient point of the ellipsoid sum u_i^2/a_i = 1 with elliptic coordinates lam."""
    a = np.asarray(a, dtype=float)
    lam = np.asarray(lam, dtype=float)
    m = a.size
    u2 = np.empty(m)
    for i in range(m):
        num = a[i] * np.prod(lam - a[i])
        den = np.prod([a[j] - a[i] for j in range(m) if j != i])
        u2[i] = max(num / den, 0.0)
    u = np.sqrt(u2)
    return u if signs is None else u * signs


def embed_ellipsoid(manifold, x):
    """Embed torus coordinates into the ellipsoid sum u_i^2 / a_i = 1 (A = sqrt only)."""
    if manifold.spec.profile.kind != "sqrt":
        raise WrongProfile("ellipsoid embedding requires A(lambda) = sqrt(lambda)")
    x = np.asarray(x.x if isinstance(x, BasePoint) else x, dtype=float)
    lam = manifold.f(x)
    return embed_from_lambda(manifold.a, lam, ellipsoid_signs(manifold, x))


def model_point(manifold, x):
    """Point of M in the confocal model: the ellipsoid point with elliptic
    coordinates f(x) and the quadrant signs of x. Injective on M for every
    profile (lifts of one point agree), so it serves as a chart-free position."""
    x = np.asarray(x, dtype=float)
    return embed_from_lambda(manifold.a, manifold.f(x), ellipsoid_signs(manifold, x))


def recover_elliptic(a, u):
    """Elliptic coordinates lambda_1 > ... > lambda_n of an ellipsoid point."""
    a = np.asarray(a, dtype=float)
    u = np.asarray(u, dtype=float)
    m = a.size
    poly = -np.prod([Polynomial([ai, -1.0]) for ai in a])
    for i in range(m):
        term = Polynomial([u[i] ** 2])
        for j in range(m):
            if j != i:
                term = term * Polynomial([a[j], -1.0])
        poly = poly + term
    # poly = lambda * prod(lambda_k - lambda): divide out the root at zero
    quotient = Polynomial(poly.coef[1:])
    roots = np.real_if_close(quotient.roots(), tol=1e6)
    roots = np.sort(np.real(roots))[::-1]
    return roots


# ---------------------------------------------------------------------------
# config I/O
# ---------------------------------------------------------------------------


def load_config(path):
    """Read a JSON or TOML manifold config into a dict."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib

        return tomllib.loads(text)
    return json.loads(text)


def manifold_from_config(cfg, nodes_per_quarter=512):
    if "a" not in cfg:
        raise ValueError("config is missing the spectrum 'a'")
    profile = AProfile.from_dict(cfg.get("profile", {"kind": "sqrt"}))
    return Manifold.build(cfg["a"], profile, nodes_per_quarter=nodes_per_quarter)


def write_profiles_csv(profiles, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "x", "f", "fprime"])
        for p in profiles:
            for row in p.to_rows():
                w.writerow([row[0]] + [repr(v) for v in row[1:]])


def general_base_point(manifold, fractions=None):
    """Convenience: x_{i,0} = frac_i * alpha_i / 4 with 0 < frac_i < 1."""
    n = manifold.n
    if fractions is None:
        fractions = [0.3 + 0.4 * k / max(n - 1, 1) for k in range(n)]
        fractions = [0.37, 0.61, 0.43, 0.52][:n] if n <= 4 else fractions
    x = np.array([fr * p.alpha / 4 for fr, p in zip(fractions, manifold.profiles)])
    bp = base_point(manifold, x)
    if not bp.general_flag:
        warnings.warn("base point is not general")
    return bp


__all__ = [
    "AProfile",
    "ConditionReport",
    "ManifoldSpec",
    "CoordinateProfile",
    "Manifold",
    "BasePoint",
    "validate_spec",
    "solve_profiles",
    "metric_at",
    "metric_from_f",
    "embed_ellipsoid",
    "embed_from_lambda",
    "model_point",
    "recover_elliptic",
    "base_point",
    "general_base_point",
    "general_flag",
    "load_config",
    "manifold_from_config",
    "write_profiles_csv",
]


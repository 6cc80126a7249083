"""Conjugate loci of a general point: radius fields r_i(u), ordering checks,
cuspidal-edge and D4+ classification, cusp counting and geometry export.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geodesic as geo
from .errors import (
    AmbiguousCount,
    FrameDegenerate,
    InconclusiveFit,
    LiouvilleError,
    NoCommonZero,
    NotApplicable,
    SignatureFailed,
    UnsupportedDimension,
)
from .integrals import classify_cell, covector_from_nu, covector_from_u, is_boundary_cell, u_from_nu
from .manifold import embed_ellipsoid, model_point
from ._kernels import hvec


@dataclass(frozen=True)
class ClassifyTolerances:
    """Thresholds of the cusp and D4+ tests (all configurable)."""

    eps1: float = 1e-5  # |dr_i/du_i| on C_i^+-
    eps2: float = 1e-4  # |d^2 r_i/du_i^2| on C_i^+-
    quad_ratio: float = 0.1  # |c2| H^2 < quad_ratio |c3| H^3
    eps4: float = 1e-6  # |c3|
    window: float = 0.08  # half-width H of the u_i window
    zero_tol: float = 1e-7  # |Z| at tau_1
    theta_tol: float = 1e-5
    cone_residual: float = 0.05
    equal_tol: float = 1e-8  # r_i == r_{i-1}


DEFAULT_TOLERANCES = ClassifyTolerances()

LABELS = ("Regular", "CuspidalEdge", "D4PlusCandidate", "Excluded")


@dataclass
class SingularityLabel:
    tag: str
    evidence: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in LABELS:
            raise ValueError(f"unknown label {self.tag}")


# ---------------------------------------------------------------------------
# radius fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Product grid on the u-torus: ``counts[k]`` samples on the k-th circle,
    shifted by ``offset`` steps (offset 0 puts samples exactly on the cells)."""

    counts: tuple
    offset: float = 0.0

    def axes(self):
        return [2 * np.pi * (np.arange(N) + self.offset) / N for N in self.counts]

    def points(self):
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)


def default_grid(n):
    return GridSpec((256,)) if n == 2 else GridSpec((96,) * (n - 1))


def tangential_direction(manifold, p0, xi):
    """Unit tangent vector sharp(xi) in orthonormal coordinates at p0: xi_i sqrt(h_i)."""
    h = hvec(p0.f_array, manifold.n)
    return np.asarray(xi) * np.sqrt(h)


def sample_radii(manifold, p0, u, second=False, opts=geo.DEFAULT_OPTIONS):
    """First zeros r_i(u) (i = 1..n-1), the points x(r_i(u)), and optionally r_{n-1}^2(u).

    On boundary cells dC_j^+ the u-chart is singular; the pair (j-1, j) is then
    supplied by the degenerate-pair computation (r_{j-1} = r_j = tau_1).
    """
    n = manifold.n
    u = np.asarray(u, dtype=float)
    labels = classify_cell(u)
    r = np.full(n - 1, np.nan)
    x = np.full((n - 1, n), np.nan)
    r2 = np.nan
    pending = list(range(1, n))
    method = "jacobi"
    for lab in sorted(labels):
        if lab.startswith("dC"):
            j = int(lab[2:-1])
            st = geo.degenerate_pair(manifold, p0, u, j, opts=opts)
            xx = st.bundle.dense(np.array([st.tau1]))[0, :n]
            for idx in (j - 1, j):
                r[idx - 1] = st.tau1
                x[idx - 1] = xx
                if idx in pending:
                    pending.remove(idx)
            method = "degenerate-pair"
    if second and (n - 1) in pending:
        count = 2
    else:
        count = 1
    if pending:
        bundle = geo.jacobi_from_u(manifold, p0, u, tuple(pending), stop_zeros=count, opts=opts)
        zeros = geo.find_zeros(bundle, max_zeros=count)
        for idx in pending:
            z = zeros[idx]
            if z.size == 0:
                raise geo.NotReached(f"no zero of y_{idx}")
            r[idx - 1] = z[0]
            x[idx - 1] = bundle.dense(z[:1])[0, :n]
            if second and idx == n - 1:
                if z.size < 2:
                    raise geo.NotReached("second zero not reached")
                r2 = z[1]
    return r, x, r2, labels, method


@dataclass
class ConjugateField:
    manifold: object
    p0: object
    grid: GridSpec
    u: np.ndarray  # grid_shape + (n-1,)
    r: np.ndarray  # grid_shape + (n-1,), NaN = hole
    x: np.ndarray  # grid_shape + (n-1, n)
    labels: np.ndarray  # grid_shape, frozensets
    r2: np.ndarray | None = None
    failures: list = field(default_factory=list)
    methods: np.ndarray | None = None

    @property
    def n(self):
        return self.manifold.n

    @property
    def shape(self):
        return self.r.shape[:-1]

    def hole_rate(self):
        return float(np.mean(np.any(np.isnan(self.r), axis=-1)))

    def radius(self, i):
        return self.r[..., i - 1]

    def boundary_mask(self):
        return np.vectorize(is_boundary_cell, otypes=[bool])(self.labels)

    def cell_mask(self, i, sign=None):
        """Samples in C_i^- (sign '-'), C_i^+ (sign '+') or either."""
        keys = {f"C{i}-", f"C{i}+"} if sign is None else {f"C{i}{sign}"}
        return np.vectorize(lambda s: bool(keys & s), otypes=[bool])(self.labels)

    def gradient(self, i, k):
        """Periodic central difference d r_i / d u_k on the grid."""
        step = 2 * np.pi / self.grid.counts[k - 1]
        r = self.radius(i)
        return (np.roll(r, -1, axis=k - 1) - np.roll(r, 1, axis=k - 1)) / (2 * step)

    def tangential(self, i):
        """Tangential conjugate locus points r_i(u) sharp[u] (orthonormal coordinates)."""
        out = np.empty(self.shape + (self.n,))
        for idx in np.ndindex(self.shape):
            xi = covector_from_u(self.p0, self.u[idx]).xi
            out[idx] = self.r[idx + (i - 1,)] * tangential_direction(self.manifold, self.p0, xi)
        return out

    def continuity_constant(self, i):
        """max |r_i(neighbour) - r_i| / step over all grid directions."""
        c = 0.0
        r = self.radius(i)
        for k, N in enumerate(self.grid.counts):
            d = np.abs(np.roll(r, -1, axis=k) - r) / (2 * np.pi / N)
            c = max(c, float(np.nanmax(d)))
        return c


def r_field(manifold, p0, grid=None, second=False, opts=geo.DEFAULT_OPTIONS, progress=None):
    """All radius fields r_1..r_{n-1} on a u-grid; failed samples become holes."""
    n = manifold.n
    grid = default_grid(n) if grid is None else grid
    if len(grid.counts) != n - 1:
        raise ValueError("grid needs one axis per angle u_1..u_{n-1}")
    U = grid.points()
    shape = U.shape[:-1]
    R = np.full(shape + (n - 1,), np.nan)
    X = np.full(shape + (n - 1, n), np.nan)
    R2 = np.full(shape, np.nan) if second else None
    labels = np.empty(shape, dtype=object)
    methods = np.empty(shape, dtype=object)
    failures = []
    for m, idx in enumerate(np.ndindex(shape)):
        u = U[idx]
        labels[idx] = classify_cell(u)
        try:
            r, x, r2, _, method = sample_radii(manifold, p0, u, second, opts)
            R[idx], X[idx] = r, x
            methods[idx] = method
            if second:
                R2[idx] = r2
        except LiouvilleError as exc:
            failures.append({"index": list(idx), "u": u.tolist(), "error": type(exc).__name__,
                             "message": str(exc)})
            methods[idx] = "hole"
        if progress is not None:
            progress(m)
    return ConjugateField(manifold, p0, grid, U, R, X, labels, R2, failures, methods)


# ---------------------------------------------------------------------------
# ordering and k-th conjugate checks
# ---------------------------------------------------------------------------


@dataclass
class OrderingReport:
    violations: int
    equalities: int
    equalities_off_boundary: int
    boundary_samples: int
    boundary_equal: int
    hole_rate: float
    min_gap_off_boundary: float

    @property
    def passed(self):
        return (self.violations == 0 and self.equalities_off_boundary == 0
                and self.boundary_equal == self.boundary_samples and self.hole_rate <= 0.01)

    def to_dict(self):
        d = asdict(self)
        d["pass"] = self.passed
        return d


def ordering_report(field_, tol=DEFAULT_TOLERANCES):
    """r_i <= r_{i-1} everywhere; equality exactly on the boundary cells."""
    n = field_.n
    bd = field_.boundary_mask()
    viol = eq = eq_off = bd_eq = 0
    min_gap = np.inf
    for i in range(2, n):
        ri, rim = field_.radius(i), field_.radius(i - 1)
        ok = ~(np.isnan(ri) | np.isnan(rim))
        gap = rim - ri
        viol += int(np.sum(ok & (gap < -tol.equal_tol)))
        equal = ok & (np.abs(gap) <= tol.equal_tol)
        eq += int(np.sum(equal))
        eq_off += int(np.sum(equal & ~bd))
        # boundary cell dC_i^+ concerns exactly the pair (i-1, i)
        pair_bd = np.vectorize(lambda s: f"dC{i}+" in s, otypes=[bool])(field_.labels)
        bd_eq += int(np.sum(equal & pair_bd))
        off = ok & ~pair_bd
        if np.any(off):
            min_gap = min(min_gap, float(np.min(gap[off])))
    n_bd = sum(int(np.sum(np.vectorize(lambda s, i=i: f"dC{i}+" in s, otypes=[bool])(field_.labels)))
               for i in range(2, n))
    return OrderingReport(viol, eq, eq_off, n_bd, bd_eq, field_.hole_rate(),
                          float(min_gap) if np.isfinite(min_gap) else float("nan"))


@dataclass
class KthReport:
    min_second: float
    max_r1: float
    hypothesis_holds: bool
    certified: bool

    def to_dict(self):
        return asdict(self)


def kth_conjugate_check(field_):
    """Whether min_u r_{n-1}^2(u) > max_u r_1(u), certifying K_{n-i} as the i-th locus."""
    if field_.r2 is None:
        raise ValueError("field computed without the second zero of y_{n-1}")
    mn = float(np.nanmin(field_.r2))
    mx = float(np.nanmax(field_.radius(1)))
    holds = mn > mx
    return KthReport(mn, mx, holds, holds)


# ---------------------------------------------------------------------------
# conjugate locus samples
# ---------------------------------------------------------------------------


@dataclass
class ConjugateSample:
    u: list
    i: int
    r: float
    x: list
    tangential: list
    ambient: list | None
    label: SingularityLabel

    def to_dict(self):
        return {"u": list(map(float, self.u)), "i": self.i, "r": float(self.r),
                "x": list(map(float, self.x)), "tangential": list(map(float, self.tangential)),
                "ambient": None if self.ambient is None else list(map(float, self.ambient)),
                "label": self.label.tag, "evidence": _jsonable(self.label.evidence)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["u"], d["i"], d["r"], d["x"], d["tangential"], d["ambient"],
                   SingularityLabel(d["label"], d.get("evidence", {})))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def locus_samples(field_, i, classify=True, tol=DEFAULT_TOLERANCES):
    """Samples of K_i(p0) with base, tangential and (ellipsoid) ambient coordinates."""
    manifold, p0 = field_.manifold, field_.p0
    out = []
    sqrt_profile = manifold.spec.profile.kind == "sqrt"
    cache = {}
    for idx in np.ndindex(field_.shape):
        u = field_.u[idx]
        r = field_.r[idx + (i - 1,)]
        labels = field_.labels[idx]
        if np.isnan(r):
            out.append(ConjugateSample(u.tolist(), i, float("nan"), [float("nan")] * field_.n,
                                       [float("nan")] * field_.n, None,
                                       SingularityLabel("Excluded", {"reason": "hole"})))
            continue
        x = field_.x[idx + (i - 1,)]
        xi = covector_from_u(p0, u).xi
        tang = r * tangential_direction(manifold, p0, xi)
        amb = embed_ellipsoid(manifold, x).tolist() if sqrt_profile else None
        label = SingularityLabel("Regular", {})
        if classify:
            bd = [lab for lab in labels if lab.startswith("dC")]
            on_cell = {f"C{i}-", f"C{i}+"} & labels
            if bd and any(int(lab[2:-1]) in (i, i + 1) for lab in bd):
                j = next(int(lab[2:-1]) for lab in bd if int(lab[2:-1]) in (i, i + 1))
                key = ("d4", j, tuple(np.round(u, 12)))
                if key not in cache:
                    cache[key] = d4_classify(manifold, p0, j, u, tol=tol, raise_on_fail=False)
                label = cache[key]
            elif on_cell:
                label = cusp_classify(manifold, p0, u, i, tol=tol, raise_on_fail=False)
        out.append(ConjugateSample(u.tolist(), i, float(r), x.tolist(), tang.tolist(), amb, label))
    return out


def first_conjugate_locus(field_, classify=True, tol=DEFAULT_TOLERANCES):
    """Samples of K_{n-1}(p0), the first conjugate locus."""
    return locus_samples(field_, field_.n - 1, classify, tol)


def locus_diameter(samples, manifold):
    """Diameter of the sample cloud measured in the confocal model of M."""
    P = np.array([model_point(manifold, s.x) for s in samples if np.isfinite(s.r)])
    if P.shape[0] < 2:
        return 0.0
    d = P[:, None, :] - P[None, :, :]
    return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))


def radial_single_valued(field_, i):
    """The tangential locus is a radial graph: one positive radius per ray."""
    r = field_.radius(i)
    return bool(np.all(r[~np.isnan(r)] > 0))


# ---------------------------------------------------------------------------
# cuspidal edges
# ---------------------------------------------------------------------------


def _line_radii(manifold, p0, u, i, offsets, m, opts):
    r = np.empty(offsets.size)
    xm = np.empty(offsets.size)
    for k, s in enumerate(offsets):
        uu = np.array(u, dtype=float)
        uu[i - 1] += s
        bundle = geo.jacobi_from_u(manifold, p0, uu, (i,), stop_zeros=1, opts=opts)
        z = geo.find_zeros(bundle, max_zeros=1)[i]
        if z.size == 0:
            raise geo.NotReached("no zero on the u_i line")
        r[k] = z[0]
        xm[k] = bundle.dense(z[:1])[0, m - 1]
    return r, xm


def cusp_classify(manifold, p0, u, i, tol=DEFAULT_TOLERANCES, opts=geo.DEFAULT_OPTIONS,
                  raise_on_fail=True, points=4):
    """Cuspidal-edge test at u on C_i^+- (not on a boundary cell).

    Along the u_i line: dr_i/du_i ~ 0 and d^2r_i/du_i^2 != 0 (Richardson
    central differences), and x_m(r_i(u), u) - x_m(center) is fitted by a
    quartic whose cubic term dominates (m = i+1 on C_i^-, m = i on C_i^+).
    """
    u = np.asarray(u, dtype=float)
    labels = classify_cell(u)
    on_minus, on_plus = f"C{i}-" in labels, f"C{i}+" in labels
    if not (on_minus or on_plus):
        raise NotApplicable("u is not on C_i^+-; use the immersion check instead")
    if is_boundary_cell(labels) and any(lab in labels for lab in (f"dC{i}+", f"dC{i+1}+")):
        raise NotApplicable("u is on a boundary cell (D4+ candidate)")
    m = i + 1 if on_minus else i
    H = tol.window
    h = H / points
    offsets = h * np.arange(-points, points + 1)
    r, xm = _line_radii(manifold, p0, u, i, offsets, m, opts)
    c = points
    d1 = lambda k: (r[c + k] - r[c - k]) / (2 * k * h)
    d2 = lambda k: (r[c + k] - 2 * r[c] + r[c - k]) / (k * h) ** 2
    r1 = (4 * d1(1) - d1(2)) / 3
    r2 = (4 * d2(1) - d2(2)) / 3
    y = xm - xm[c]
    coef = np.polynomial.polynomial.polyfit(offsets, y, 4)
    fit_res = float(np.max(np.abs(np.polynomial.polynomial.polyval(offsets, coef) - y)))
    c1, c2, c3 = coef[1], coef[2], coef[3]
    f0 = manifold.f(p0.x_array)[m - 1]
    f_center = float(manifold.f(np.eye(manifold.n)[m - 1] * xm[c])[m - 1])
    evidence = {
        "u": u.tolist(), "i": i, "cell": f"C{i}-" if on_minus else f"C{i}+", "m": m,
        "dr": float(r1), "d2r": float(r2), "c1": float(c1), "c2": float(c2), "c3": float(c3),
        "c4": float(coef[4]), "fit_residual": fit_res, "window": H,
        "f_m_center_minus_base": float(f_center - f0),
    }
    checks = {
        "dr_small": abs(r1) < tol.eps1,
        "d2r_nonzero": abs(r2) > tol.eps2,
        "linear_small": abs(c1) * H < tol.quad_ratio * abs(c3) * H**3,
        "quadratic_small": abs(c2) * H**2 < tol.quad_ratio * abs(c3) * H**3,
        "cubic_nonzero": abs(c3) > tol.eps4,
    }
    evidence["checks"] = checks
    if all(checks.values()):
        return SingularityLabel("CuspidalEdge", evidence)
    if raise_on_fail:
        raise InconclusiveFit("cuspidal-edge fit failed", diagnostics=evidence)
    return SingularityLabel("Excluded", evidence)


def immersion_margin(manifold, p0, u, i, step=1e-4, opts=geo.DEFAULT_OPTIONS):
    """Smallest singular value (relative) of d/du gamma(r_i(u), u) in orthonormal
    coordinates at the image point."""
    n = manifold.n
    u = np.asarray(u, dtype=float)
    cols = []
    for k in range(n - 1):
        pts = []
        for s in (-step, step):
            uu = u.copy()
            uu[k] += s
            r, x, *_ = sample_radii(manifold, p0, uu, opts=opts)
            pts.append(x[i - 1])
        cols.append((pts[1] - pts[0]) / (2 * step))
    J = np.array(cols).T
    r, x, *_ = sample_radii(manifold, p0, u, opts=opts)
    g = 1.0 / hvec(manifold.f(x[i - 1]), n)
    Jn = J * np.sqrt(g)[:, None]
    s = np.linalg.svd(Jn, compute_uv=False)
    return float(s[-1] / s[0]) if s[0] > 0 else 0.0


# ---------------------------------------------------------------------------
# D4+ points
# ---------------------------------------------------------------------------


@dataclass
class ConeFit:
    eigenvalues: list
    residual: float
    axis: list
    split_ok: bool
    n_points: int
    radius: float

    def to_dict(self):
        return asdict(self)


def cone_samples(manifold, p0, u_ref, j, rhos, n_angles=24, opts=geo.DEFAULT_OPTIONS):
    """Points r_j(nu) sharp[nu] (lower sheet) and r_{j-1}(nu) sharp[nu] (upper sheet)
    for nu on circles of the given radii around 0."""
    lower, upper = [], []
    scale = manifold.spec.scale
    for rho in rhos:
        for k in range(n_angles):
            phi = 2 * np.pi * (k + 0.5) / n_angles
            nu = rho * scale * np.array([np.cos(phi), np.sin(phi)])
            u = u_from_nu(p0, u_ref, j, nu)
            xi = covector_from_nu(p0, u_ref, j, nu).xi
            xu = covector_from_u(p0, u).xi
            if np.max(np.abs(xi - xu)) > 1e-8:
                raise SignatureFailed("nu-chart and u-chart covectors disagree",
                                      evidence={"nu": nu.tolist()})
            r, _ = geo.conjugate_radii(manifold, p0, u, indices=(j - 1, j), opts=opts)
            v = tangential_direction(manifold, p0, xi)
            lower.append(r[j][0] * v)
            upper.append(r[j - 1][0] * v)
    return np.array(lower), np.array(upper)


def fit_cone(apex, lower, upper):
    """Fit a homogeneous quadratic form Q(P - apex) = 0 in the 3-dimensional
    principal subspace of the sample cloud; report signature, relative residual
    and whether the plane w_3 = 0 separates the two sheets."""
    D = np.vstack([lower, upper]) - apex
    _, _, Vt = np.linalg.svd(D, full_matrices=False)
    basis = Vt[:3]
    W = D @ basis.T
    Wn = W / np.linalg.norm(W, axis=1, keepdims=True)
    x, y, z = Wn.T
    M = np.column_stack([x * x, y * y, z * z, 2 * x * y, 2 * x * z, 2 * y * z])
    _, sv, qt = np.linalg.svd(M, full_matrices=False)
    q = qt[-1]
    Q = np.array([[q[0], q[3], q[4]], [q[3], q[1], q[5]], [q[4], q[5], q[2]]])
    ev, evec = np.linalg.eigh(Q)
    if np.sum(ev > 0) == 1:
        Q, ev = -Q, -ev[::-1]
        evec = evec[:, ::-1]
    # signature (2, 1): the odd eigenvalue is the last one after the flip
    resid = float(np.sqrt(np.mean((M @ q) ** 2)) / np.max(np.abs(ev)))
    axis = evec[:, np.argmin(ev)]
    side = W @ axis
    nl = lower.shape[0]
    if np.median(side[:nl]) > 0:
        axis = -axis
        side = -side
    split_ok = bool(np.all(side[:nl] <= 0) and np.all(side[nl:] >= 0))
    return ev, resid, basis.T @ axis, split_ok


def d4_classify(manifold, p0, j, u_ref, tol=DEFAULT_TOLERANCES, rhos=(2e-5, 8e-5), n_angles=24,
                opts=geo.DEFAULT_OPTIONS, raise_on_fail=True):
    """D4+ signatures at the boundary cell dC_j^+ = dC_{j-1}^- of u_ref."""
    n = manifold.n
    if n < 3:
        raise NotApplicable("no boundary cells for n = 2")
    u_ref = np.asarray(u_ref, dtype=float)
    evidence = {"j": j, "u": u_ref.tolist()}
    try:
        st = geo.degenerate_pair(manifold, p0, u_ref, j, opts=opts, zero_tol=np.inf)
    except NoCommonZero as exc:
        evidence["error"] = str(exc)
        if raise_on_fail:
            raise SignatureFailed("no common zero", evidence=evidence) from exc
        return SingularityLabel("Excluded", evidence)
    evidence.update({"tau1": st.tau1, "Z_norms": list(st.Z_norms), "theta_tau1": st.theta_tau1,
                     "gram_min": st.gram_min})
    double = max(st.Z_norms) < tol.zero_tol
    theta_ok = abs(st.theta_tau1 - 2 * np.pi) < tol.theta_tol
    xi0 = covector_from_nu(p0, u_ref, j, np.zeros(2)).xi
    apex = st.tau1 * tangential_direction(manifold, p0, xi0)
    try:
        lower, upper = cone_samples(manifold, p0, u_ref, j, rhos, n_angles, opts)
        ev, resid, axis, split_ok = fit_cone(apex, lower, upper)
        signature = bool(np.sum(ev > 0) == 2 and np.sum(ev < 0) == 1)
        evidence["cone"] = ConeFit(ev.tolist(), resid, axis.tolist(), split_ok,
                                   2 * lower.shape[0], float(max(rhos))).to_dict()
        cone_ok = signature and resid < tol.cone_residual and split_ok
    except (LiouvilleError, FrameDegenerate) as exc:
        evidence["cone_error"] = f"{type(exc).__name__}: {exc}"
        cone_ok = False
    evidence["checks"] = {"double_degeneracy": double, "theta": theta_ok, "cone_edge": cone_ok}
    if double and theta_ok and cone_ok:
        return SingularityLabel("D4PlusCandidate", evidence)
    if raise_on_fail:
        raise SignatureFailed("D4+ signature failed", evidence=evidence)
    return SingularityLabel("Excluded", evidence)


def boundary_directions(n, j, count=1):
    """u on dC_j^+ = dC_{j-1}^-: u_j = +-pi/2, u_{j-1} in {0, pi}; other angles generic."""
    rng = np.random.default_rng(12345)
    out = []
    for k in range(count):
        u = rng.uniform(0.2, 1.2, n - 1) + np.pi / 2 * rng.integers(0, 4, n - 1)
        u[j - 1] = np.pi / 2 if k % 2 == 0 else -np.pi / 2
        u[j - 2] = 0.0 if (k // 2) % 2 == 0 else np.pi
        out.append(u)
    return out


# ---------------------------------------------------------------------------
# cusps for n = 2
# ---------------------------------------------------------------------------


@dataclass
class CuspCount:
    count: int
    positions: list
    degenerate: bool
    refined: bool
    grid: int

    def to_dict(self):
        return asdict(self)


def _spectral_derivative(r):
    N = r.size
    k = np.fft.rfftfreq(N, d=1.0 / N)
    return np.fft.irfft(1j * k * np.fft.rfft(r), n=N)


def _count_sign_changes(dr, u, noise):
    s = np.sign(dr)
    pos = []
    N = dr.size
    for k in range(N):
        k2 = (k + 1) % N
        if s[k] != s[k2] and s[k] != 0 and s[k2] != 0:
            if max(abs(dr[k]), abs(dr[k2])) < noise:
                raise AmbiguousCount("sign change below the noise level")
            t = dr[k] / (dr[k] - dr[k2])
            uk2 = u[k2] if k2 else u[0] + 2 * np.pi
            pos.append(float((u[k] + t * (uk2 - u[k])) % (2 * np.pi)))
    return pos


def count_cusps_2d(manifold, p0, N=256, field_=None, opts=geo.DEFAULT_OPTIONS, noise=1e-7):
    """Cusps of the first conjugate locus for n = 2: sign changes of dr/du
    (Phi'(u) = r'(u) gamma'(r(u)), so cusps are direction reversals)."""
    if manifold.n != 2:
        raise NotApplicable("cusp counting is defined for n = 2")
    refined = False
    for attempt in range(2):
        if field_ is None:
            field_ = r_field(manifold, p0, GridSpec((N,), offset=0.5), opts=opts)
        r = field_.radius(1)
        if np.any(np.isnan(r)):
            raise AmbiguousCount("holes in the radius field")
        u = field_.grid.axes()[0]
        if np.ptp(r) < 1e-9 * np.mean(r):
            return CuspCount(0, [], True, refined, r.size)
        dr = _spectral_derivative(r)
        try:
            pos = _count_sign_changes(dr, u, noise)
        except AmbiguousCount:
            if attempt:
                raise
            N, field_, refined = 2 * r.size, None, True
            continue
        if len(pos) % 2:
            if attempt:
                raise AmbiguousCount("odd number of sign changes")
            N, field_, refined = 2 * r.size, None, True
            continue
        return CuspCount(len(pos), pos, False, refined, r.size)
    raise AmbiguousCount("could not resolve the cusp count")


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


_COLORS = {"Regular": (0.7, 0.7, 0.7), "CuspidalEdge": (0.9, 0.2, 0.2),
           "D4PlusCandidate": (0.2, 0.3, 0.9), "Excluded": (0.1, 0.1, 0.1)}


def samples_to_json(samples):
    return json.dumps([s.to_dict() for s in samples], sort_keys=True, indent=1)


def samples_from_json(text):
    return [ConjugateSample.from_dict(d) for d in json.loads(text)]


def write_samples_csv(samples, path):
    n = len(samples[0].x)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"u{k+1}" for k in range(len(samples[0].u))] + ["i", "r"]
                   + [f"x{k+1}" for k in range(n)] + [f"v{k+1}" for k in range(n)]
                   + (["ambient" + str(k) for k in range(n + 1)] if samples[0].ambient else [])
                   + ["label"])
        for s in samples:
            w.writerow([repr(float(v)) for v in s.u] + [s.i, repr(float(s.r))]
                       + [repr(float(v)) for v in s.x] + [repr(float(v)) for v in s.tangential]
                       + ([repr(float(v)) for v in s.ambient] if s.ambient else [])
                       + [s.label.tag])


def obj_text(samples, shape, mode="auto"):
    """OBJ: polyline of ambient points (n = 2 ellipsoid) or tangential surface (n = 3)."""
    n = len(samples[0].x)
    lines = []
    if (mode == "auto" and n == 2) or mode == "ambient":
        if n != 2 or samples[0].ambient is None:
            raise UnsupportedDimension("ambient OBJ output needs an n = 2 ellipsoid locus in R^3")
        for s in samples:
            c = _COLORS[s.label.tag]
            lines.append("v " + " ".join(f"{v:.12g}" for v in list(s.ambient) + list(c)))
        idx = " ".join(str(k + 1) for k in range(len(samples))) + " 1"
        lines.append("l " + idx)
    elif n == 3:
        for s in samples:
            c = _COLORS[s.label.tag]
            lines.append("v " + " ".join(f"{v:.12g}" for v in list(s.tangential) + list(c)))
        N1, N2 = shape
        vid = lambda a, b: (a % N1) * N2 + (b % N2) + 1
        for a in range(N1):
            for b in range(N2):
                v00, v10, v01, v11 = vid(a, b), vid(a + 1, b), vid(a, b + 1), vid(a + 1, b + 1)
                lines.append(f"f {v00} {v10} {v11}")
                lines.append(f"f {v00} {v11} {v01}")
    else:
        raise UnsupportedDimension(f"no R^3 OBJ target for n = {n}")
    return "\n".join(lines) + "\n"


def export_geometry(samples, path, fmt, shape=None):
    """Write samples as 'csv', 'json' or 'obj'."""
    if not samples:
        raise ValueError("no samples to export")
    if fmt == "csv":
        write_samples_csv(samples, path)
    elif fmt == "json":
        with open(path, "w") as fh:
            fh.write(samples_to_json(samples) + "\n")
    elif fmt == "obj":
        shape = (len(samples),) if shape is None else shape
        text = obj_text(samples, shape)
        with open(path, "w") as fh:
            fh.write(text)
    else:
        raise ValueError(f"unknown format {fmt}")
    return path


__all__ = [
    "ClassifyTolerances",
    "SingularityLabel",
    "GridSpec",
    "ConjugateField",
    "ConjugateSample",
    "OrderingReport",
    "KthReport",
    "CuspCount",
    "ConeFit",
    "sample_radii",
    "r_field",
    "ordering_report",
    "kth_conjugate_check",
    "locus_samples",
    "first_conjugate_locus",
    "locus_diameter",
    "cusp_classify",
    "immersion_margin",
    "cone_samples",
    "fit_cone",
    "d4_classify",
    "boundary_directions",
    "count_cusps_2d",
    "export_geometry",
    "samples_to_json",
    "samples_from_json",
]

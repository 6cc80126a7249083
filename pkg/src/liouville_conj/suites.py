"""Property suites aggregated by ``liouville-conj suite`` and the acceptance tests.

Every suite takes a seeded generator and returns a JSON-ready verdict dict with a
``pass`` flag. Verdicts contain no timings, so identical seeds give identical bytes.
"""

from __future__ import annotations

import numpy as np

from . import geodesic as geo
from . import quadrature as quad
from .errors import LiouvilleError, NotApplicable
from .integrals import classify_cell, covector_from_u
from .manifold import AProfile, Manifold, base_point

SQRT = AProfile.sqrt()


def spectrum(n):
    """The standard ellipsoid fixture a = (n+1, n, ..., 1)."""
    return tuple(float(k) for k in range(n + 1, 0, -1))


def random_base_point(manifold, rng, lo=0.05, hi=0.95):
    """A general base point with x_i uniform in (lo, hi) * alpha_i / 4."""
    for _ in range(100):
        x = np.array([rng.uniform(lo, hi) * al / 4 for al in manifold.alphas])
        bp = base_point(manifold, x)
        if bp.general_flag:
            return bp
    raise RuntimeError("no general base point sampled")


def random_generic_u(n, rng, margin=1e-3):
    """A direction u off every cell C_k^+- (so 0 is in no S_k)."""
    while True:
        u = rng.uniform(0, 2 * np.pi, n - 1)
        if classify_cell(u, tol=margin) == frozenset({"interior"}):
            return u


def _rng(seed):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# quadrature suites
# ---------------------------------------------------------------------------


def abel_suite(seed, samples=100, dims=(2, 3, 4), threshold=1e-8):
    rng = _rng(seed)
    out = {}
    for n in dims:
        a = spectrum(n)
        worst = 0.0
        for _ in range(samples):
            b = quad.random_admissible(a, rng)
            worst = max(worst, float(np.max(np.abs(quad.abel_residuals(a, b)))))
        out[str(n)] = {"samples": samples, "max_residual": worst, "pass": worst < threshold}
    return {"suite": "abel", "seed": seed, "threshold": threshold, "by_n": out,
            "pass": all(v["pass"] for v in out.values())}


def sign_suite(seed, samples=100, sequences=10, dims=(2, 3, 4)):
    rng = _rng(seed)
    out = {}
    for n in dims:
        a = spectrum(n)
        checks = violations = 0
        failed = []
        for _ in range(samples):
            b = quad.random_admissible(a, rng)
            for case in quad.all_cases(n):
                res = quad.inequality_signs(a, SQRT, b, case)
                checks += 1
                if not res.passed:
                    violations += 1
                    failed.append(res.to_dict())
        seq_checks = seq_viol = kernel = 0
        for _ in range(sequences):
            seq = quad.random_limit_sequence(a, rng)
            for case in quad.all_cases(n):
                for res in quad.limit_sequence_signs(a, SQRT, seq, case):
                    seq_checks += 1
                    kernel += res.method == "kernel"
                    if not res.passed:
                        seq_viol += 1
                        failed.append({**res.to_dict(), "sequence": seq.description})
        out[str(n)] = {"checks": checks, "violations": violations, "limit_checks": seq_checks,
                       "limit_violations": seq_viol, "kernel_evaluations": kernel,
                       "failed": failed[:10], "pass": violations == 0 and seq_viol == 0}
    return {"suite": "signs", "seed": seed, "by_n": out,
            "pass": all(v["pass"] for v in out.values())}


# ---------------------------------------------------------------------------
# geodesic suites
# ---------------------------------------------------------------------------


def conservation_suite(seed, samples=100, T=20.0, a=(3.0, 2.0, 1.0), threshold=1e-8,
                       energy_threshold=1e-10):
    rng = _rng(seed)
    M = Manifold.build(a)
    worst_F = worst_E = 0.0
    breaches = 0
    for _ in range(samples):
        p0 = random_base_point(M, rng)
        u = rng.uniform(0, 2 * np.pi, M.n - 1)
        tr = geo.integrate_geodesic(M, covector_from_u(p0, u), T)
        worst_F = max(worst_F, tr.ledger["max_F_drift"])
        worst_E = max(worst_E, tr.ledger["energy_drift"])
        breaches += bool(tr.ledger["max_F_drift"] >= threshold
                         or tr.ledger["energy_drift"] >= energy_threshold)
    return {"suite": "conservation", "seed": seed, "a": list(a), "samples": samples, "T": T,
            "max_F_drift": worst_F, "max_energy_drift": worst_E, "breaches": breaches,
            "pass": breaches == 0}


def ordering_sample(M, p0, u, T=None):
    """t_n < ... < t_1 and t_{j+1} < r_j < t_j for one generic direction."""
    n = M.n
    T = 15.0 * float(np.max(M.alphas)) if T is None else T
    r, _ = geo.conjugate_radii(M, p0, u, T=T)
    tr = geo.integrate_geodesic(M, covector_from_u(p0, u), T, ledger=False)
    t = geo.event_times(tr).t
    if any(t[k] is None for k in range(1, n + 1)):
        raise geo.NotReached("half-period times not reached")
    order = all(t[k + 1] < t[k] for k in range(1, n))
    main = all(t[j + 1] < r[j][0] < t[j] for j in range(1, n))
    return order, main, {"u": u.tolist(), "t": [t[k] for k in range(1, n + 1)],
                         "r": [float(r[j][0]) for j in range(1, n)]}


def ordering_suite(seed, samples=500, a=(4.0, 3.0, 2.0, 1.0)):
    rng = _rng(seed)
    M = Manifold.build(a)
    v_order = v_main = errors = 0
    failed = []
    for _ in range(samples):
        p0 = random_base_point(M, rng)
        u = random_generic_u(M.n, rng)
        try:
            order, main, info = ordering_sample(M, p0, u)
        except LiouvilleError as exc:
            errors += 1
            failed.append({"error": type(exc).__name__, "u": u.tolist()})
            continue
        v_order += not order
        v_main += not main
        if not (order and main):
            failed.append(info)
    return {"suite": "ordering", "seed": seed, "a": list(a), "samples": samples,
            "order_violations": v_order, "main_violations": v_main, "errors": errors,
            "failed": failed[:10], "pass": v_order == 0 and v_main == 0 and errors == 0}


def boundary_case(M, p0, u, i):
    """Deviations |r_i - s_i^1| and |r_i - t| at u_i in {0, pi} (t = t_{i+1}) or
    u_i = +-pi/2 (t = t_i)."""
    T = 15.0 * float(np.max(M.alphas))
    r, _ = geo.conjugate_radii(M, p0, u, indices=(i,), T=T)
    tr = geo.integrate_geodesic(M, covector_from_u(p0, u), T, ledger=False)
    ev = geo.event_times(tr)
    tt = ev.t[i] if abs(np.cos(u[i - 1])) < 0.5 else ev.t[i + 1]
    ri = float(r[i][0])
    return abs(ri - float(ev.s[i][0])), abs(ri - tt)


def boundary_suite(seed, cases=20, a=(4.0, 3.0, 2.0, 1.0), threshold=1e-6):
    rng = _rng(seed)
    M = Manifold.build(a)
    worst = 0.0
    rows = []
    for k in range(cases):
        p0 = random_base_point(M, rng)
        i = 1 + k % (M.n - 1)
        u = random_generic_u(M.n, rng)
        u[i - 1] = (0.0, np.pi / 2, np.pi, -np.pi / 2)[(k // (M.n - 1)) % 4]
        # the other angles stay generic, so u is never on a boundary cell
        ds, dt = boundary_case(M, p0, u, i)
        worst = max(worst, ds, dt)
        rows.append({"i": i, "u": u.tolist(), "r_minus_s": ds, "r_minus_t": dt})
    return {"suite": "boundary", "seed": seed, "a": list(a), "cases": len(rows),
            "max_deviation": worst, "threshold": threshold, "rows": rows,
            "pass": worst < threshold and len(rows) == cases}


def accumulation_suite(seed, directions=2, K=20, a=(3.0, 2.0, 1.0)):
    rng = _rng(seed)
    M = Manifold.build(a)
    rows = []
    while len(rows) < directions:
        p0 = random_base_point(M, rng)
        u = random_generic_u(M.n, rng, margin=0.05)
        try:
            seq, _, _ = geo.asymptotic_accumulation(M, p0, u, K_zeros=K)
        except NotApplicable:
            continue
        rows.append({"u": u.tolist(), "x": p0.x_array.tolist(), "first": float(seq[0]),
                     "last": float(seq[-1]), "decreasing": bool(np.all(np.diff(seq) < 0)),
                     "last_over_alpha": float(seq[-1] / M.alphas[1])})
    return {"suite": "accumulation", "seed": seed, "a": list(a), "K": K, "rows": rows,
            "pass": all(r["decreasing"] for r in rows)}


SUITES = ("abel", "signs", "conservation", "ordering", "boundary", "accumulation")


def run_all(seed, sizes, only=None):
    """All suites in a fixed order; each suite gets its own derived seed."""
    ss = np.random.SeedSequence(seed).spawn(len(SUITES))
    seeds = {name: int(s.generate_state(1)[0]) for name, s in zip(SUITES, ss)}
    runners = {
        "abel": lambda s: abel_suite(s, sizes.abel_samples),
        "signs": lambda s: sign_suite(s, sizes.sign_samples, sizes.limit_sequences),
        "conservation": lambda s: conservation_suite(s, sizes.conservation_samples,
                                                     sizes.conservation_horizon),
        "ordering": lambda s: ordering_suite(s, sizes.ordering_samples),
        "boundary": lambda s: boundary_suite(s, sizes.boundary_cases),
        "accumulation": lambda s: accumulation_suite(s, K=sizes.accumulation_zeros),
    }
    out = {}
    for name in SUITES:
        if only and name not in only:
            continue
        out[name] = runners[name](seeds[name])
    return out


__all__ = [
    "spectrum",
    "random_base_point",
    "random_generic_u",
    "abel_suite",
    "sign_suite",
    "conservation_suite",
    "ordering_sample",
    "ordering_suite",
    "boundary_case",
    "boundary_suite",
    "accumulation_suite",
    "run_all",
    "SUITES",
]

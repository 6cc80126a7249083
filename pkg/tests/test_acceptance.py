"""The eleven acceptance criteria at their stated tolerances and runtimes.

Each test records one ``criterion k: PASS|FAIL`` line (shown in the terminal
summary) before asserting.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from liouville_conj import conjugate as cj
from liouville_conj import geodesic as geo
from liouville_conj import suites
from liouville_conj.cli import main
from liouville_conj.manifold import AProfile, Manifold, general_base_point

SEED = 2024


def record(k, ok, elapsed, budget, detail):
    ok = bool(ok) and elapsed < budget
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s / {budget:.0f}s) {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def field96():
    M = Manifold.build([4.0, 3.0, 2.0, 1.0])
    p0 = general_base_point(M)
    t0 = time.perf_counter()
    f = cj.r_field(M, p0, cj.GridSpec((96, 96)))
    return f, time.perf_counter() - t0


def test_criterion_01_abel_relations():
    t0 = time.perf_counter()
    v = suites.abel_suite(SEED, samples=100, dims=(2, 3, 4), threshold=1e-8)
    worst = max(r["max_residual"] for r in v["by_n"].values())
    assert record(1, v["pass"], time.perf_counter() - t0, 60, f"max residual {worst:.2e}")


def test_criterion_02_sign_suite():
    t0 = time.perf_counter()
    v = suites.sign_suite(SEED, samples=100, sequences=10, dims=(2, 3, 4))
    viol = sum(r["violations"] + r["limit_violations"] for r in v["by_n"].values())
    checks = sum(r["checks"] + r["limit_checks"] for r in v["by_n"].values())
    assert record(2, v["pass"], time.perf_counter() - t0, 300,
                  f"{viol} violations in {checks} sign checks")


def test_criterion_03_conservation():
    t0 = time.perf_counter()
    v = suites.conservation_suite(SEED, samples=100, T=20.0, a=(3.0, 2.0, 1.0), threshold=1e-8)
    assert record(3, v["pass"], time.perf_counter() - t0, 120,
                  f"max F drift {v['max_F_drift']:.2e}, 2E drift {v['max_energy_drift']:.2e}")


def test_criterion_04_ordering_theorems():
    t0 = time.perf_counter()
    o = suites.ordering_suite(SEED, samples=500)
    b = suites.boundary_suite(SEED, cases=20, threshold=1e-6)
    ok = o["pass"] and b["pass"]
    assert record(4, ok, time.perf_counter() - t0, 600,
                  f"{o['order_violations']}+{o['main_violations']} violations in 500 geodesics, "
                  f"boundary deviation {b['max_deviation']:.1e} on {b['cases']} cases")


def test_criterion_05_conjugate_ordering(field96):
    f, elapsed = field96
    rep = cj.ordering_report(f)
    assert record(5, rep.passed, elapsed, 1800,
                  f"{rep.violations} violations, equalities {rep.equalities} "
                  f"(all on {rep.boundary_samples} boundary cells), holes {rep.hole_rate:.3%}")


def test_criterion_06_four_cusps():
    M = Manifold.build([3.0, 2.0, 1.0])
    t0 = time.perf_counter()
    fractions = [None, [0.2, 0.7], [0.8, 0.3], [0.55, 0.15], [0.1, 0.9]]
    counts = [cj.count_cusps_2d(M, general_base_point(M, fr)).count for fr in fractions]
    assert record(6, all(c == 4 for c in counts), time.perf_counter() - t0, 300,
                  f"cusp counts {counts}")


def test_criterion_07_cuspidal_edges(field96):
    f3, _ = field96
    M2 = Manifold.build([3.0, 2.0, 1.0])
    f2 = cj.r_field(M2, general_base_point(M2), cj.GridSpec((256,)))
    t0 = time.perf_counter()
    total = good = 0
    failed = []
    for f in (f2, f3):
        for i in range(1, f.n):
            for s in cj.locus_samples(f, i, classify=True):
                cells = cj.classify_cell(np.asarray(s.u))
                if not ({f"C{i}-", f"C{i}+"} & cells) or s.label.tag == "D4PlusCandidate":
                    continue
                total += 1
                good += s.label.tag == "CuspidalEdge"
                if s.label.tag != "CuspidalEdge":
                    failed.append(s.label.tag)
    rate = good / total
    assert record(7, rate >= 0.95, time.perf_counter() - t0, 600,
                  f"{good}/{total} interior cell samples classified as cuspidal edges"
                  + (f", others {sorted(set(failed))}" if failed else ""))


def test_criterion_08_d4_signature():
    M = Manifold.build([4.0, 3.0, 2.0, 1.0])
    p0 = general_base_point(M)
    t0 = time.perf_counter()
    rows = []
    for u in cj.boundary_directions(3, 2, 4):
        lab = cj.d4_classify(M, p0, 2, u, raise_on_fail=False)
        ev = lab.evidence
        rows.append((lab.tag == "D4PlusCandidate", max(ev["Z_norms"]),
                     abs(ev["theta_tau1"] - 2 * np.pi), ev.get("cone", {}).get("residual", np.inf)))
    ok = all(r[0] for r in rows)
    z = max(r[1] for r in rows)
    th = max(r[2] for r in rows)
    res = max(r[3] for r in rows)
    assert record(8, ok, time.perf_counter() - t0, 300,
                  f"|Z| {z:.1e}, |theta-2pi| {th:.1e}, cone residual {res:.1e} at 4 boundary points")


def test_criterion_09_round_sphere():
    t0 = time.perf_counter()
    spread = diam = 0.0
    for a, grid in (([3.0, 2.0, 1.0], (64,)), ([4.0, 3.0, 2.0, 1.0], (16, 16))):
        M = Manifold.build(a, AProfile.constant(1.0))
        f = cj.r_field(M, general_base_point(M), cj.GridSpec(grid))
        spread = max(spread, float(np.nanmax(f.r) - np.nanmin(f.r)))
        diam = max(diam, cj.locus_diameter(cj.first_conjugate_locus(f, classify=False), M))
    ok = spread < 1e-6 and diam < 1e-5
    assert record(9, ok, time.perf_counter() - t0, 60,
                  f"r spread {spread:.1e}, locus diameter {diam:.1e}")


def test_criterion_10_accumulation():
    M = Manifold.build([3.0, 2.0, 1.0])
    p0 = general_base_point(M)
    t0 = time.perf_counter()
    seq, _, _ = geo.asymptotic_accumulation(M, p0, np.array([0.9]), K_zeros=20)
    ok = bool(np.all(np.diff(seq) < 0))
    assert record(10, ok, time.perf_counter() - t0, 120,
                  f"|x(r^k)-x(s^k)| from {seq[0]:.3e} to {seq[-1]:.3e} over k=1..20")


def test_criterion_11_determinism(tmp_path):
    t0 = time.perf_counter()
    codes = [main(["suite", "--seed", str(SEED), "--out", str(tmp_path / d), "--run-id", "r"])
             for d in ("a", "b")]
    a = (tmp_path / "a" / "r" / "report.json").read_bytes()
    b = (tmp_path / "b" / "r" / "report.json").read_bytes()
    ok = a == b and codes == [0, 0]
    assert record(11, ok, time.perf_counter() - t0, 1200,
                  f"exit codes {codes}, reports identical: {a == b} ({len(a)} bytes)")

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liouville_conj import geodesic as geo
from liouville_conj import quadrature as qd
from liouville_conj.errors import SingularInterior
from liouville_conj.integrals import covector_from_u
from liouville_conj.manifold import AProfile
from liouville_conj.suites import spectrum

SQRT = AProfile.sqrt()


def _oracle(a, b, l, G=lambda x: 1):
    mpmath.mp.dps = 30
    ig = qd.HyperellipticIntegrand(tuple(a), tuple(b), l)
    lo, hi = ig.interval()
    roots = list(a) + list(b)

    def f(lam):
        prod = mpmath.mpf(1)
        for r in roots:
            prod *= lam - r
        return G(lam) / mpmath.sqrt(-prod)

    return float((-1) ** l * mpmath.quad(f, [lo, hi]))


@pytest.mark.parametrize("l", [1, 2])
def test_singular_integral_matches_tanh_sinh(l):
    a, b = (3.0, 2.0, 1.0), (1.5,)
    val = qd.singular_integral(qd.HyperellipticIntegrand(a, b, l))
    assert val == pytest.approx(_oracle(a, b, l), rel=1e-10, abs=1e-12)


def test_singular_integral_with_polynomial_factor():
    a, b = (4.0, 3.0, 2.0, 1.0), (3.3, 1.7)
    for l in (1, 2, 3):
        ig = qd.HyperellipticIntegrand(a, b, l, G_coef=(0.5, -1.0, 1.0))
        ref = _oracle(a, b, l, lambda x: 0.5 - x + x * x)
        assert qd.singular_integral(ig) == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_zero_length_interval_is_zero():
    # b_1 = a_1: the second interval [a_2, min(a_1, b_1)] is nonempty, the first
    # [max(a_1, b_1), a_0] is too; collapsing b_1 onto a_0 empties the first
    ig = qd.HyperellipticIntegrand((3.0, 2.0, 1.0), (3.0,), 1)
    assert qd.singular_integral(ig) == 0.0


def test_root_inside_interval_rejected():
    ig = qd.HyperellipticIntegrand((3.0, 2.0, 1.0), (1.5,), 2, G_roots=())
    bad = qd.HyperellipticIntegrand((4.0, 3.0, 2.0, 1.0), (3.5, 3.6), 1)
    assert np.isfinite(qd.singular_integral(ig))
    with pytest.raises(SingularInterior):
        qd.singular_integral(bad)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_abel_relations_vanish(n, rng):
    a = spectrum(n)
    for _ in range(5):
        b = qd.random_admissible(a, rng)
        assert np.max(np.abs(qd.abel_residuals(a, b))) < 1e-8


@pytest.mark.parametrize("n", [3, 4])
def test_abel_negative_control(n, rng):
    a = spectrum(n)
    b = qd.random_admissible(a, rng)
    assert np.max(np.abs(qd.abel_residuals(a, b, signed=False))) > 1e-2


@given(st.integers(0, 2**31 - 1))
def test_random_admissible_ordering(seed):
    a = spectrum(3)
    b = qd.random_admissible(a, np.random.default_rng(seed))
    assert a[2] < b[0] < a[0] and a[3] < b[1] < a[1] and b[1] < b[0]


@pytest.mark.parametrize("n", [2, 3, 4])
def test_inequality_signs_generic(n, rng):
    a = spectrum(n)
    for _ in range(3):
        b = qd.random_admissible(a, rng)
        for case in qd.all_cases(n):
            res = qd.inequality_signs(a, SQRT, b, case)
            assert res.passed, res.to_dict()


@pytest.mark.parametrize("n", [2, 3])
def test_kernel_forms_agree_with_finite_differences(n, rng):
    a = spectrum(n)
    b = qd.random_admissible(a, rng, margin=0.05)
    for case in qd.all_cases(n):
        if case.kind == "P1":
            continue
        fd, err, _ = qd.inequality_value(a, SQRT, b, case)
        kv = qd.kernel_value(a, SQRT, b, case)
        assert kv == pytest.approx(fd, rel=1e-3, abs=10 * err)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_limit_sequences_keep_sign(n, rng):
    a = spectrum(n)
    seq = qd.random_limit_sequence(a, rng)
    for case in qd.all_cases(n):
        res = qd.limit_sequence_signs(a, SQRT, seq, case)
        assert all(r.passed for r in res)
        assert qd.limit_converges(res)


@pytest.mark.parametrize("n,J", [(3, (1, 2)), (4, (1, 2)), (4, (1, 2, 3)), (4, (2, 3))])
def test_b_kernel_sign(n, J, rng):
    a = spectrum(n)
    for _ in range(3):
        ok, worst = qd.b_kernel_sign_check(a, SQRT, qd.random_admissible(a, rng), J)
        assert ok, worst


def test_sign_result_json_fields():
    a = spectrum(2)
    res = qd.inequality_signs(a, SQRT, np.array([1.5]), qd.all_cases(2)[0])
    d = res.to_dict()
    assert set(d) >= {"caseId", "b", "value", "errorEstimate", "method", "pass"}


def test_orbit_relations_along_trace(ell3, p3):
    tr = geo.integrate_geodesic(ell3, covector_from_u(p3, np.array([0.7, 2.0])), 20.0)
    flat = qd.orbit_quadrature_check(tr, (0.0, 20.0), (1.0,))
    lin = qd.orbit_quadrature_check(tr, (3.0, 17.0), (0.0, 1.0))
    monic = qd.orbit_quadrature_check(tr, (0.0, 20.0), (0.3, -0.2, 1.0), monic=True)
    assert abs(flat.residual) < 1e-7
    assert abs(lin.residual) < 1e-7
    assert abs(monic.residual) < 1e-6


def test_half_period_matches_interval_integral(ell2, p2):
    tr = geo.integrate_geodesic(ell2, covector_from_u(p2, np.array([0.9])), 40.0)
    for i in (1, 2):
        summand, interval = qd.half_period_check(tr, i)
        assert summand == pytest.approx(interval, rel=1e-8)

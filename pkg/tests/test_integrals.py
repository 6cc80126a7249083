import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liouville_conj.integrals import (
    b_from_F,
    b_of_u,
    c_from_b,
    classify_cell,
    covector_from_nu,
    covector_from_u,
    energy2,
    first_integrals_from_f,
    first_integrals_linear,
    is_boundary_cell,
    nu_from_u,
    spectral_from_b,
    theta_coefficients,
    u_from_nu,
)

angles = st.floats(0.0, 2 * np.pi, allow_nan=False)


@given(st.lists(angles, min_size=2, max_size=2))
def test_unit_covector_and_spectrum(p3, u):
    u = np.array(u)
    s = covector_from_u(p3, u)
    assert energy2(p3.f_array, s.xi) == pytest.approx(1.0, abs=1e-12)
    F = first_integrals_from_f([4.0, 3.0, 2.0, 1.0], p3.f_array, s.xi)
    b = b_from_F([4.0, 3.0, 2.0, 1.0], F).b
    assert np.allclose(b, b_of_u(p3.f_array, u), atol=1e-9)


@given(st.lists(st.floats(-2.0, 2.0), min_size=3, max_size=3))
def test_first_integral_formulas_agree(p3, xi):
    a = [4.0, 3.0, 2.0, 1.0]
    F1 = first_integrals_from_f(a, p3.f_array, np.array(xi))
    F2 = first_integrals_linear(a, p3.f_array, np.array(xi))
    assert np.allclose(F1, F2, atol=1e-11 * max(1.0, np.sum(np.square(xi))))


def test_theta_roots_from_c(rng):
    a = np.array([4.0, 3.0, 2.0, 1.0])
    b = np.array([3.4, 1.6])
    coef = theta_coefficients(a, c_from_b(a, b))
    assert np.allclose(np.polynomial.polynomial.polyval(b, coef), 0.0, atol=1e-12)


def test_jacobian_matches_finite_differences(p3):
    u = np.array([0.7, 2.3])
    _, J = covector_from_u(p3, u, with_jacobian=True)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (covector_from_u(p3, u + e).xi - covector_from_u(p3, u - e).xi) / (2 * h)
        assert np.allclose(J[:, k], fd, atol=1e-8)


@pytest.mark.parametrize(
    "u,expected",
    [
        ((0.3, 1.1), {"interior"}),
        ((0.0, 1.1), {"C1-"}),
        ((np.pi / 2, 1.1), {"C1+"}),
        ((0.3, -np.pi / 2), {"C2+"}),
        ((np.pi, np.pi / 2), {"C1-", "C2+", "dC2+"}),
        ((np.pi / 2, 0.0), {"C1+", "C2-"}),
    ],
)
def test_cell_labels(u, expected):
    labels = classify_cell(np.array(u))
    assert labels == frozenset(expected)
    assert is_boundary_cell(labels) == any(l.startswith("d") for l in expected)


def test_spectral_ranges_and_s_coordinate(p2):
    for u in (0.4, 1.3, 2.0, 4.0):
        sp = spectral_from_b([3.0, 2.0, 1.0], b_of_u(p2.f_array, np.array([u])))
        lo, hi = sp.interval(1)
        assert lo <= p2.f_array[0] <= hi
        assert sp.s_coordinate(1) == (1 if sp.b[0] >= 2.0 else 2)


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_nu_chart_matches_u_chart(p3, s1, s2):
    u_ref = np.array([0.0, np.pi / 2])
    nu = 1e-2 * np.array([s1, s2])
    u = u_from_nu(p3, u_ref, 2, nu)
    assert np.allclose(covector_from_nu(p3, u_ref, 2, nu).xi, covector_from_u(p3, u).xi, atol=1e-9)
    assert np.allclose(nu_from_u(p3, u, 2), nu, atol=1e-9)

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liouville_conj.errors import ConditionViolated, NonMonotoneSpectrum, NonPositiveProfile
from liouville_conj.manifold import (
    AProfile,
    Manifold,
    base_point,
    embed_ellipsoid,
    metric_at,
    model_point,
    recover_elliptic,
    validate_spec,
)


def _alpha_oracle(a, i, profile):
    """alpha_i = 2 int_{a_i}^{a_{i-1}} A / sqrt|prod (lam - a_j)| by tanh-sinh."""
    mpmath.mp.dps = 30
    lo, hi = a[i], a[i - 1]

    def integrand(lam):
        prod = mpmath.mpf(1)
        for aj in a:
            prod *= lam - aj
        return mpmath.mpf(float(profile(float(lam)))) / mpmath.sqrt(abs(prod)) if profile.kind != "sqrt" \
            else mpmath.sqrt(lam) / mpmath.sqrt(abs(prod))

    return float(2 * mpmath.quad(integrand, [lo, hi]))


@pytest.mark.parametrize("a", [[3.0, 2.0], [1.0, 2.0, 3.0], [3.0, 2.0, 2.0], [3.0, 2.0, -1.0]])
def test_bad_spectrum_rejected(a):
    with pytest.raises(NonMonotoneSpectrum):
        validate_spec(a, AProfile.sqrt())


def test_nonpositive_profile_rejected():
    with pytest.raises(NonPositiveProfile):
        validate_spec([3.0, 2.0, 1.0], AProfile.polynomial([-1.0, 0.1]))


@pytest.mark.parametrize(
    "profile,passes,round_sphere",
    [
        (AProfile.sqrt(), True, False),
        (AProfile.constant(1.0), False, True),
        (AProfile.polynomial([0.0, 0.0, 1.0]), True, False),
    ],
)
def test_condition_report(profile, passes, round_sphere):
    rep = validate_spec([3.0, 2.0, 1.0], profile).condition_report
    assert rep.passes == passes
    assert rep.round_sphere == round_sphere


def test_condition_violation_strict():
    # A = 5 - lambda is decreasing on [1, 3]
    with pytest.raises(ConditionViolated):
        validate_spec([3.0, 2.0, 1.0], AProfile.polynomial([5.0, -1.0]), strict=True)
    rep = validate_spec([3.0, 2.0, 1.0], AProfile.polynomial([5.0, -1.0])).condition_report
    assert not rep.passes and rep.derivative_minima[1] < 0


def test_tabulated_profile_matches_sqrt():
    lam = np.linspace(0.9, 4.1, 40)
    tab = AProfile.tabulated(lam, np.sqrt(lam))
    x = np.linspace(1.0, 3.0, 11)
    assert np.allclose(tab(x), np.sqrt(x), atol=1e-8)
    assert np.allclose(tab.derivative(x, 1), 0.5 / np.sqrt(x), atol=1e-6)
    assert AProfile.from_dict(tab.to_dict()) == tab


@pytest.mark.parametrize("a", [[3.0, 2.0, 1.0], [4.0, 3.0, 2.0, 1.0], [1.2, 1.1, 1.0]])
def test_periods_match_quadrature_oracle(a):
    M = Manifold.build(a)
    for i in range(1, M.n + 1):
        ref = _alpha_oracle(a, i, M.spec.profile)
        assert M.alphas[i - 1] == pytest.approx(ref, rel=1e-10)


def test_round_sphere_periods():
    M = Manifold.build([3.0, 2.0, 1.0], AProfile.constant(1.0))
    for i in (1, 2):
        assert M.alphas[i - 1] == pytest.approx(_alpha_oracle([3.0, 2.0, 1.0], i, M.spec.profile),
                                                rel=1e-10)


def test_coordinate_ode_and_periodicity(ell3):
    for p in ell3.profiles:
        x = np.linspace(0.0, p.alpha, 97)
        f, fp = p.f(x), p.fprime(x)
        assert np.all((f >= p.lo - 1e-12) & (f <= p.hi + 1e-12))
        assert np.allclose(fp**2, p.ode_rhs(f) * np.sign(p.ode_rhs(f)), atol=1e-10)
        assert np.allclose(p.f(x + p.alpha), f, atol=1e-12)
        # quarter-period inverse
        xq = np.linspace(0.01, 0.99, 9) * p.quarter
        assert np.allclose(p.x_of_f(p.f(xq)), xq, atol=1e-10)


@given(st.lists(st.floats(0.02, 0.98), min_size=3, max_size=3))
def test_metric_positive_at_general_points(ell3, fr):
    x = np.array([v * al / 4 for v, al in zip(fr, ell3.alphas)])
    bp = base_point(ell3, x)
    if bp.general_flag:
        assert np.all(metric_at(ell3, bp) > 0)


@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2))
def test_ellipsoid_embedding_round_trip(ell2, fr):
    x = np.array([v * al for v, al in zip(fr, ell2.alphas)])
    u = embed_ellipsoid(ell2, x)
    assert np.sum(u**2 / ell2.a) == pytest.approx(1.0, abs=1e-10)
    lam = recover_elliptic(ell2.a, u)
    assert np.allclose(np.sort(lam)[::-1], np.sort(ell2.f(x))[::-1], atol=1e-7)


def test_model_point_is_period_invariant(ell3, rng):
    for _ in range(5):
        x = rng.uniform(0, 1, 3) * ell3.alphas
        shift = rng.integers(-2, 3, 3) * ell3.alphas
        assert np.allclose(model_point(ell3, x), model_point(ell3, x + shift), atol=1e-10)

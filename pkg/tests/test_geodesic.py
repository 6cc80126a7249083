import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liouville_conj import geodesic as geo
from liouville_conj.errors import ConservationBreach, NotApplicable
from liouville_conj.integrals import covector_from_u
from liouville_conj.manifold import Manifold, AProfile, general_base_point
from liouville_conj.suites import boundary_case, ordering_sample

angles = st.floats(0.05, 2 * np.pi - 0.05, allow_nan=False)


@given(st.lists(angles, min_size=2, max_size=2))
def test_conservation_ledger(ell3, p3, u):
    tr = geo.integrate_geodesic(ell3, covector_from_u(p3, np.array(u)), 20.0)
    assert tr.ledger["max_F_drift"] < 1e-8
    assert tr.ledger["energy_drift"] < 1e-10
    assert tr.ledger["coordinate_drift"] < 1e-8
    assert not tr.ledger["breach"]


def test_breach_raises_when_configured(ell2, p2):
    opts = geo.IntegrationOptions(rtol=1e-4, atol=1e-4, drift_tol=1e-14, raise_on_breach=True)
    with pytest.raises(ConservationBreach):
        geo.integrate_geodesic(ell2, covector_from_u(p2, np.array([0.8])), 20.0, opts)


def test_reversed_trace_retraces_path(ell3, p3):
    T = 7.0
    tr = geo.integrate_geodesic(ell3, covector_from_u(p3, np.array([0.9, 2.2])), T)
    end = geo.PhaseState(tr.x(T)[0], -tr.xi(T)[0])
    back = geo.integrate_geodesic(ell3, end, T)
    t = np.linspace(0, T, 15)
    assert np.allclose(back.x(T - t), tr.x(t), atol=1e-9)


def test_jacobi_fields_match_finite_differences(ell3, p3):
    u = np.array([0.7, 1.1])
    bundle = geo.jacobi_from_u(ell3, p3, u, T=6.0, stop_zeros=None)
    t = np.linspace(0.5, 6.0, 12)
    _, _, dx, _ = bundle.fields(t)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        xp = geo.integrate_geodesic(ell3, covector_from_u(p3, u + e), 6.0, ledger=False).x(t)
        xm = geo.integrate_geodesic(ell3, covector_from_u(p3, u - e), 6.0, ledger=False).x(t)
        assert np.allclose(dx[:, k], (xp - xm) / (2 * h), atol=1e-7)


def test_frame_orthonormal_and_scalarized(ell3, p3):
    bundle = geo.jacobi_from_u(ell3, p3, np.array([2.1, 0.4]), T=15.0, stop_zeros=None)
    t = np.linspace(0.0, 15.0, 200)
    g, vel, dx, V = bundle.fields(t)
    for m in range(t.size):
        E = np.vstack([vel[m], V[m]])
        gram = (E * g[m]) @ E.T
        assert np.allclose(gram, np.eye(3), atol=1e-7)
        for b in range(2):
            Y = dx[m, b]
            comp = np.sum(g[m] * Y * V[m, b])
            perp = Y - comp * V[m, b]
            scale = np.max(np.sqrt(np.einsum("mn,mn->m", g, dx[:, b] ** 2)))
            assert np.sqrt(np.sum(g[m] * perp**2)) < 1e-6 * scale


def test_step_halving_changes_radii_little(ell3, p3):
    u = np.array([1.3, 4.0])
    r1, _ = geo.conjugate_radii(ell3, p3, u)
    fine = geo.IntegrationOptions(rtol=1e-13, atol=1e-14)
    r2, _ = geo.conjugate_radii(ell3, p3, u, opts=fine)
    for i in (1, 2):
        assert abs(r1[i][0] - r2[i][0]) < 1e-8


@pytest.mark.parametrize("u", [[0.3], [1.0], [2.5], [4.4]])
def test_round_sphere_first_zero_is_pi(u):
    M = Manifold.build([3.0, 2.0, 1.0], AProfile.constant(1.0))
    p = general_base_point(M)
    r, _ = geo.conjugate_radii(M, p, np.array(u), count=2)
    assert np.allclose(r[1], [np.pi, 2 * np.pi], atol=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_ordering_theorems(ell3, p3, seed):
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.1, 1.4, 2) + np.pi / 2 * rng.integers(0, 4, 2)
    order, main, info = ordering_sample(ell3, p3, u)
    assert order and main, info


@pytest.mark.parametrize("i", [1, 2])
@pytest.mark.parametrize("value", [0.0, np.pi / 2, np.pi, -np.pi / 2])
def test_boundary_equalities(ell3, p3, i, value):
    u = np.array([0.8, 2.0])
    u[i - 1] = value
    ds, dt = boundary_case(ell3, p3, u, i)
    assert ds < 1e-6 and dt < 1e-6


def test_event_times_exclude_start(ell3, p3):
    u = np.array([0.0, 1.0])  # the start point lies in S_1
    tr = geo.integrate_geodesic(ell3, covector_from_u(p3, u), 30.0, ledger=False)
    ev = geo.event_times(tr)
    assert np.all(ev.s[1] > 1e-6)
    assert ev.t[3] < ev.t[2] < ev.t[1]


@pytest.mark.parametrize("u_ref", [[0.0, np.pi / 2], [np.pi, -np.pi / 2]])
def test_degenerate_pair_double_zero(ell3, p3, u_ref):
    st_ = geo.degenerate_pair(ell3, p3, np.array(u_ref), 2)
    assert max(st_.Z_norms) < 1e-7
    assert st_.theta_tau1 == pytest.approx(2 * np.pi, abs=1e-5)
    assert st_.gram_min > 1e-4


def test_theta_is_two_pi_at_half_period_off_center(ell3, p3):
    st_ = geo.degenerate_pair(ell3, p3, np.array([0.0, np.pi / 2]), 2, nu=(3e-3, -2e-3),
                              zero_tol=np.inf)
    assert st_.theta_tj == pytest.approx(2 * np.pi, abs=1e-6)


def test_degenerate_pair_needs_three_dimensions(ell2, p2):
    with pytest.raises(NotApplicable):
        geo.degenerate_pair(ell2, p2, np.array([0.0]), 2)


@pytest.mark.parametrize("u", [[0.26], [5.7]])
def test_accumulation_decreasing(ell2, p2, u):
    seq, r, s = geo.asymptotic_accumulation(ell2, p2, np.array(u), K_zeros=20)
    assert np.all(np.diff(seq) < 0)
    assert np.all((s[:-1] < r) & (r < s[1:]))
    assert seq[-1] < 0.05 * np.max(ell2.alphas)


def test_accumulation_not_applicable_on_round_sphere(sphere2):
    with pytest.raises(NotApplicable):
        geo.asymptotic_accumulation(sphere2, general_base_point(sphere2), np.array([0.4]))

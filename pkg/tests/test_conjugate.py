import json

import numpy as np
import pytest

from liouville_conj import conjugate as cj
from liouville_conj.errors import NotApplicable, UnsupportedDimension
from liouville_conj.manifold import AProfile, Manifold, base_point, general_base_point


@pytest.fixture(scope="module")
def field3(ell3, p3):
    return cj.r_field(ell3, p3, cj.GridSpec((16, 16)), second=True)


@pytest.fixture(scope="module")
def field2(ell2, p2):
    return cj.r_field(ell2, p2, cj.GridSpec((64,)), second=True)


def test_field_ordering_with_boundary_equalities(field3):
    rep = cj.ordering_report(field3)
    assert rep.passed, rep.to_dict()
    # 16 x 16 grid hits u_1 in {0, pi} x u_2 = +-pi/2
    assert rep.boundary_samples == 4 and rep.boundary_equal == 4
    assert np.all(field3.r > 0)


def test_field_bookkeeping(field3):
    assert field3.hole_rate() == 0.0
    assert field3.cell_mask(2).sum() == 2 * 16 * 2  # u_2 in {0, pi, +-pi/2} lines
    assert field3.continuity_constant(2) < 20.0
    assert cj.radial_single_valued(field3, 2)
    g = field3.gradient(1, 1)
    assert g.shape == (16, 16) and np.all(np.isfinite(g))


def test_reflection_symmetry_of_radii(ell3, p3):
    # x_1 -> -x_1 is an isometry; it maps the direction u at p0 to
    # (pi - u_1, u_2) at the mirrored base point
    mirror = base_point(ell3, p3.x_array * np.array([-1.0, 1.0, 1.0]))
    for u in ([0.4, 1.2], [2.0, 5.1], [3.7, 0.3]):
        u = np.array(u)
        r, *_ = cj.sample_radii(ell3, p3, u)
        rm, *_ = cj.sample_radii(ell3, mirror, np.array([np.pi - u[0], u[1]]))
        assert np.allclose(r, rm, atol=1e-9)


def test_round_sphere_field_is_constant(sphere2):
    p = general_base_point(sphere2)
    f = cj.r_field(sphere2, p, cj.GridSpec((32,)), second=True)
    assert np.allclose(f.r, np.pi, atol=1e-8)
    assert np.allclose(f.r2, 2 * np.pi, atol=1e-8)
    assert cj.kth_conjugate_check(f).hypothesis_holds
    samples = cj.first_conjugate_locus(f, classify=False)
    assert cj.locus_diameter(samples, sphere2) < 1e-5


def test_round_sphere_three_dimensional():
    M = Manifold.build([4.0, 3.0, 2.0, 1.0], AProfile.constant(1.0))
    f = cj.r_field(M, general_base_point(M), cj.GridSpec((8, 8)))
    assert np.allclose(f.r, np.pi, atol=1e-8)


def test_kth_check_near_round():
    M = Manifold.build([1.2, 1.1, 1.0])
    f = cj.r_field(M, general_base_point(M), cj.GridSpec((32,)), second=True)
    rep = cj.kth_conjugate_check(f)
    assert rep.hypothesis_holds and rep.certified


def test_kth_check_requires_second_zero(ell2, p2):
    f = cj.r_field(ell2, p2, cj.GridSpec((8,)))
    with pytest.raises(ValueError):
        cj.kth_conjugate_check(f)


@pytest.mark.parametrize("u", [0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
def test_cuspidal_edges_two_dimensional(ell2, p2, u):
    lab = cj.cusp_classify(ell2, p2, np.array([u]), 1)
    assert lab.tag == "CuspidalEdge"
    ev = lab.evidence
    assert abs(ev["c3"]) > 1e-6 and abs(ev["c2"]) < 0.1 * abs(ev["c3"]) * ev["window"]
    assert abs(ev["f_m_center_minus_base"]) < 1e-9


@pytest.mark.parametrize("u,i", [([0.0, 1.0], 1), ([np.pi / 2, 2.0], 1), ([0.7, 0.0], 2),
                                 ([2.5, -np.pi / 2], 2)])
def test_cuspidal_edges_three_dimensional(ell3, p3, u, i):
    assert cj.cusp_classify(ell3, p3, np.array(u), i).tag == "CuspidalEdge"


def test_cusp_coefficient_mirror_symmetry(ell2, p2):
    # x_2 -> -x_2 maps u = pi/2 at p0 to -pi/2 at the mirrored point;
    # on C_1^+ the fitted coordinate is x_1, which the mirror fixes, while the
    # line offset s goes to -s, so the cubic coefficient changes sign
    mirror = base_point(ell2, p2.x_array * np.array([1.0, -1.0]))
    c = cj.cusp_classify(ell2, p2, np.array([np.pi / 2]), 1).evidence["c3"]
    cm = cj.cusp_classify(ell2, mirror, np.array([-np.pi / 2]), 1).evidence["c3"]
    assert cm == pytest.approx(-c, rel=1e-6)


def test_cusp_classify_rejects_off_cell(ell2, p2):
    with pytest.raises(NotApplicable):
        cj.cusp_classify(ell2, p2, np.array([0.6]), 1)


@pytest.mark.parametrize("u", [[0.6], [2.0], [4.0]])
def test_immersion_off_cells(ell2, p2, u):
    assert cj.immersion_margin(ell2, p2, np.array(u), 1) > 1e-3


def test_immersion_three_dimensional(ell3, p3):
    assert cj.immersion_margin(ell3, p3, np.array([0.5, 2.2]), 2) > 1e-4


@pytest.mark.parametrize("u_ref", [[0.0, np.pi / 2], [np.pi, -np.pi / 2]])
def test_d4_candidate(ell3, p3, u_ref):
    lab = cj.d4_classify(ell3, p3, 2, np.array(u_ref))
    assert lab.tag == "D4PlusCandidate"
    cone = lab.evidence["cone"]
    assert cone["residual"] < 0.05 and cone["split_ok"]
    ev = np.array(cone["eigenvalues"])
    assert np.sum(ev > 0) == 2 and np.sum(ev < 0) == 1


def test_d4_not_applicable_in_two_dimensions(ell2, p2):
    with pytest.raises(NotApplicable):
        cj.d4_classify(ell2, p2, 2, np.array([0.0]))


def test_fit_cone_on_synthetic_cone(rng):
    phi = rng.uniform(0, 2 * np.pi, 40)
    h = rng.uniform(0.5, 1.0, 40)
    lower = np.column_stack([h * np.cos(phi), h * np.sin(phi), -h])
    upper = np.column_stack([h * np.cos(phi), h * np.sin(phi), h])
    ev, resid, axis, split = cj.fit_cone(np.zeros(3), lower, upper)
    assert resid < 1e-10 and split
    assert abs(abs(axis[2]) - 1.0) < 1e-8


def test_boundary_directions_are_boundary_cells():
    for u in cj.boundary_directions(3, 2, 4):
        assert "dC2+" in cj.classify_cell(u)


@pytest.mark.parametrize("fractions", [None, [0.2, 0.7], [0.8, 0.3], [0.55, 0.15], [0.1, 0.9]])
def test_four_cusps(ell2, fractions):
    p = general_base_point(ell2, fractions)
    cc = cj.count_cusps_2d(ell2, p)
    assert cc.count == 4 and not cc.degenerate


def test_four_cusps_near_oblate():
    M = Manifold.build([2.01, 2.0, 1.0])
    assert cj.count_cusps_2d(M, general_base_point(M), N=512).count == 4


def test_round_sphere_cusp_count_degenerate(sphere2):
    cc = cj.count_cusps_2d(sphere2, general_base_point(sphere2), N=32)
    assert cc.degenerate and cc.count == 0


def test_count_cusps_needs_n2(ell3, p3):
    with pytest.raises(NotApplicable):
        cj.count_cusps_2d(ell3, p3)


def test_locus_samples_and_labels(field2):
    samples = cj.first_conjugate_locus(field2)
    tags = [s.label.tag for s in samples]
    assert tags.count("CuspidalEdge") == 4
    assert set(tags) <= set(cj.LABELS)
    for s in samples:
        assert np.sum(np.square(s.ambient) / np.array([3.0, 2.0, 1.0])) == pytest.approx(1, abs=1e-9)
        if s.label.tag != "Regular":
            assert s.label.evidence


def test_labels_are_deterministic(ell2, p2, field2):
    again = cj.r_field(ell2, p2, cj.GridSpec((64,)), second=True)
    a = [s.to_dict() for s in cj.first_conjugate_locus(field2)]
    b = [s.to_dict() for s in cj.first_conjugate_locus(again)]
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_json_round_trip(field2):
    samples = cj.first_conjugate_locus(field2)
    back = cj.samples_from_json(cj.samples_to_json(samples))
    assert [s.to_dict() for s in back] == [s.to_dict() for s in samples]


def test_exports(tmp_path, field2, field3):
    s2 = cj.first_conjugate_locus(field2, classify=False)
    cj.export_geometry(s2, tmp_path / "k.obj", "obj")
    cj.export_geometry(s2, tmp_path / "k.csv", "csv")
    text = (tmp_path / "k.obj").read_text().splitlines()
    assert sum(l.startswith("v ") for l in text) == 64 and text[-1].startswith("l ")
    s3 = cj.first_conjugate_locus(field3, classify=False)
    cj.export_geometry(s3, tmp_path / "k3.obj", "obj", shape=field3.shape)
    text = (tmp_path / "k3.obj").read_text().splitlines()
    assert sum(l.startswith("f ") for l in text) == 2 * 16 * 16
    assert len(text[0].split()) == 7  # position + colour
    rows = (tmp_path / "k.csv").read_text().splitlines()
    assert len(rows) == 65


def test_obj_export_unsupported_dimension():
    sample = cj.ConjugateSample([0.1, 0.2, 0.3], 3, 1.0, [0.0] * 4, [0.0] * 4, None,
                                cj.SingularityLabel("Regular"))
    with pytest.raises(UnsupportedDimension):
        cj.export_geometry([sample], "unused.obj", "obj")


def test_unknown_label_rejected():
    with pytest.raises(ValueError):
        cj.SingularityLabel("Swallowtail")

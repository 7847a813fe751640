import dataclasses
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from harmindex.conformal import TestFunction, build_family, choose_basepoints
from harmindex.maps import clifford_normal, make_zoo_map
from harmindex.spectral import make_eigenbasis
from harmindex.variation import (
    HypothesisError,
    VariationField,
    certify_energy_index,
    certify_volume_index,
    field_jet,
    h_form,
    l2_gram,
    normal_projection,
    q_form,
    q_matrix,
    restrict_field,
)


def _family(n, seed=0, res=16, degree=1):
    basis = make_eigenbasis(n, degree)
    return build_family(basis, choose_basepoints(basis, seed), res)


@pytest.mark.parametrize("n,res", [(2, 24), (3, 16), (4, 10)])
def test_identity_q_matches_closed_form(n, res):
    # for the identity of S^n, Q(w_j, w_k) = n (2 - n) Xi(rho(m_j, m_k))
    f = make_zoo_map(f"identity{n}", res)
    family = _family(n, res=res)
    fields = [restrict_field(u, f) for u in family.functions]
    Q = q_matrix(f, fields)
    assert_allclose(Q, n * (2 - n) * family.kernel_matrix, atol=1e-4)


def test_identity_l2_gram_is_lambda_kernel():
    f = make_zoo_map("identity3", 16)
    family = _family(3)
    fields = [restrict_field(u, f) for u in family.functions]
    assert_allclose(l2_gram(f, fields), family.gram, atol=1e-10)


def test_q_form_is_bilinear_and_symmetric():
    f = make_zoo_map("identity3", 12)
    family = _family(3, res=12)
    w1, w2 = (restrict_field(u, f) for u in family.functions[:2])
    a, b = 0.7, -1.3
    combo = w1.combine(a, w2, b)
    lhs = q_form(f, combo, combo)
    rhs = a * a * q_form(f, w1, w1) + 2 * a * b * q_form(f, w1, w2) + b * b * q_form(f, w2, w2)
    assert lhs == pytest.approx(rhs, rel=1e-8)
    assert q_form(f, w1, w2) == pytest.approx(q_form(f, w2, w1), rel=1e-12)


def test_field_jet_step_convergence():
    f = make_zoo_map("clifford", 12)
    w = restrict_field(TestFunction(make_eigenbasis(3, 1), choose_basepoints(make_eigenbasis(3, 1))[0]), f)
    _, d1 = field_jet(f, w, 1e-3)
    _, d2 = field_jet(f, w, 1e-4)
    assert np.max(np.abs(d1 - d2)) < 1e-6


def test_q_requires_harmonic_map():
    f = dataclasses.replace(make_zoo_map("identity3", 8), harmonic=False)
    w = restrict_field(TestFunction(make_eigenbasis(3, 1), choose_basepoints(make_eigenbasis(3, 1))[0]), f)
    with pytest.raises(HypothesisError, match="harmonic"):
        q_form(f, w, w)


def test_restrict_field_dimension_mismatch():
    f = make_zoo_map("identity3", 8)
    u = TestFunction(make_eigenbasis(2, 1), choose_basepoints(make_eigenbasis(2, 1))[0])
    with pytest.raises(ValueError):
        restrict_field(u, f)


def test_identity3_energy_certificate():
    f = make_zoo_map("identity3", 16)
    cert = certify_energy_index(f, _family(3), seed=0)
    assert cert.accepted
    assert cert.certified_bound == 4
    assert cert.span_dim == 4
    assert np.all(cert.eigenvalues < 0)
    assert np.min(cert.extras["inequality_slack"]) >= -1e-6
    json.dumps(cert.to_record())


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_energy_certificate_stable_across_seeds(seed):
    f = make_zoo_map("identity3", 12)
    assert certify_energy_index(f, _family(3, seed, 12), seed=seed).certified_bound == 4


def test_identity2_declined_for_small_target():
    f = make_zoo_map("identity2", 16)
    cert = certify_energy_index(f, _family(2))
    assert not cert.accepted
    assert cert.certified_bound == 0
    # conformal fields of S^2 are Jacobi fields of the identity
    assert np.max(np.abs(cert.q_matrix)) < 1e-5


def test_constant_map_declined():
    f = make_zoo_map("constant3", 10)
    cert = certify_energy_index(f, _family(3, res=10))
    assert "constant map" in cert.reasons
    assert cert.certified_bound == 0


def test_degree_two_family_declined():
    f = make_zoo_map("identity3", 10)
    cert = certify_energy_index(f, _family(3, res=10, degree=2))
    assert not cert.hypotheses["degree_one"]
    assert cert.certified_bound == 0


def test_clifford_volume_certificate():
    f = make_zoo_map("clifford", 32)
    cert = certify_volume_index(f, _family(3))
    assert cert.accepted
    assert cert.span_dim == 4
    assert cert.certified_bound == 4
    assert np.all(cert.eigenvalues < 0)
    assert np.all(cert.extras["conformal_estimate"] < 0)


def test_clifford_h_form_direct_value():
    # normal part of w is <w, nu> nu; the direct quadrature gives -2 int <w, nu>^2
    f = make_zoo_map("clifford", 32)
    u = _family(3).functions[0]
    w = normal_projection(f, restrict_field(u, f))
    c = np.einsum("pd,pd->p", w.at_nodes, clifford_normal(f.grid.coords))
    assert h_form(f, w) == pytest.approx(-2.0 * f.grid.integrate(c * c), rel=1e-5)


def test_h_form_rejects_tangent_field():
    f = make_zoo_map("clifford", 12)
    w = VariationField(f, lambda x, e: f.push_fn(x, e)[:, 0, :])
    with pytest.raises(HypothesisError, match="normal"):
        h_form(f, w)


def test_h_form_rejects_non_minimal_map():
    f = make_zoo_map("identity3", 8)
    w = VariationField(f, lambda x, e: np.zeros_like(x))
    with pytest.raises(HypothesisError, match="minimal"):
        h_form(f, w)


def test_equator_volume_declined():
    f = make_zoo_map("equator23", 16)
    cert = certify_volume_index(f, _family(3))
    assert cert.hypotheses["totally_geodesic"]
    assert cert.certified_bound == 0
    assert cert.span_dim == 1


def test_identity_volume_declined():
    cert = certify_volume_index(make_zoo_map("identity3", 8), _family(3, res=8))
    assert cert.span_dim == 0
    assert cert.certified_bound == 0


def test_constant_volume_not_an_immersion():
    cert = certify_volume_index(make_zoo_map("constant3", 8), _family(3, res=8))
    assert cert.reasons == ("not an immersion",)


def _u(n, seed=0):
    basis = make_eigenbasis(n, 1)
    return TestFunction(basis, choose_basepoints(basis, seed)[0])


def test_field_base_matches_map():
    f = make_zoo_map("clifford", 8)
    w = restrict_field(_u(3), f)
    for node in (0, 17, 40):
        tv = w.at_node(node)
        assert_allclose(tv.base.ambient, f.values[node])


def test_restrict_field_examples():
    u = _u(3)
    const = make_zoo_map("constant3", 8)
    p = const.values[0]
    assert_allclose(restrict_field(u, const).at_nodes, np.broadcast_to(-u.gradients(p)[0], const.values.shape))
    ident = make_zoo_map("identity3", 8)
    assert_allclose(restrict_field(u, ident).at_nodes, -u.gradients(ident.grid.points), atol=1e-15)


def test_normal_projection_examples():
    u = _u(3)
    ident = make_zoo_map("identity3", 8)
    assert np.max(np.abs(normal_projection(ident, restrict_field(u, ident)).at_nodes)) < 1e-12
    cl = make_zoo_map("clifford", 12)
    w = restrict_field(u, cl)
    wp = normal_projection(cl, w)
    nu = clifford_normal(cl.grid.coords)
    expected = np.einsum("pd,pd->p", w.at_nodes, nu)[:, None] * nu
    assert_allclose(wp.at_nodes, expected, atol=1e-12)
    assert_allclose(normal_projection(cl, wp).at_nodes, wp.at_nodes, atol=1e-12)


def test_normal_projection_rejects_constant_map():
    from harmindex.maps import NotAnImmersion

    f = make_zoo_map("constant3", 8)
    with pytest.raises(NotAnImmersion):
        normal_projection(f, restrict_field(_u(3), f))


def test_identity_diagonal_value():
    f = make_zoo_map("identity3", 16)
    w = restrict_field(_u(3), f)
    assert q_form(f, w, w) == pytest.approx(-6 / np.pi**2, abs=1e-4)


def test_constant_map_q_is_dirichlet_energy():
    f = make_zoo_map("constant3", 10)
    w = restrict_field(_u(3), f)
    # a constant field along a constant map is parallel
    assert q_form(f, w, w) == pytest.approx(0.0, abs=1e-12)


def test_q_linear_in_first_argument():
    f = make_zoo_map("identity3", 10)
    w1, w2, w3 = (restrict_field(u, f) for u in _family(3, res=10).functions[:3])
    lhs = q_form(f, w1.combine(0.4, w2, -2.0), w3)
    rhs = 0.4 * q_form(f, w1, w3) - 2.0 * q_form(f, w2, w3)
    assert abs(lhs - rhs) <= 1e-9
    assert abs(q_form(f, w1, w2) - q_form(f, w2, w1)) <= 1e-10


def test_certificate_invariants():
    cert = certify_energy_index(make_zoo_map("identity3", 12), _family(3, res=12))
    Q = cert.q_matrix
    assert np.max(np.abs(Q - Q.T)) <= 1e-10
    ev = np.linalg.eigvalsh(Q)
    assert cert.negative_count == int(np.sum(ev < -1e-8 * np.linalg.norm(Q, 2)))
    assert cert.certified_bound <= cert.span_dim
    rec = cert.to_record()
    assert rec["eigenvalues"] == sorted(rec["eigenvalues"])
    assert {"kind", "hypotheses", "certified_bound", "thresholds", "resolution", "seed"} <= set(rec)


def test_h_form_ignores_tangential_noise():
    f = make_zoo_map("clifford", 16)
    w = restrict_field(_u(3), f)
    noise = VariationField(f, lambda x, e: 0.3 * f.push_fn(x, e)[:, 0, :] - 1.1 * f.push_fn(x, e)[:, 1, :])
    a = h_form(f, normal_projection(f, w))
    b = h_form(f, normal_projection(f, w.combine(1.0, noise, 1.0)))
    assert abs(a - b) <= 1e-10


def test_h_form_zero_field():
    f = make_zoo_map("clifford", 8)
    assert h_form(f, VariationField(f, lambda x, e: np.zeros((len(x), 4)))) == 0.0


def test_equator_h_has_no_sigma_term():
    from harmindex.maps import second_fundamental_tensor

    f = make_zoo_map("equator23", 16)
    w = normal_projection(f, restrict_field(_u(3), f))
    II = second_fundamental_tensor(f)
    assert h_form(f, w, II=II) == pytest.approx(h_form(f, w, II=np.zeros_like(II)), abs=1e-10)

import numpy as np
import pytest
from hypothesis import given

from cslab import bargmann as bg
from cslab import quantops as qo
from cslab import sections as sc
from cslab.errors import DegreeOverflow, PairingDiverged, QuadratureDiverged
from cslab.frames import Level, TeichmullerPoint

from conftest import levels, random_coeffs

TAU, LEV = TeichmullerPoint(0.3, 1.2), Level(2, 0.7)


@pytest.mark.parametrize("r", [1, 2])
def test_ground_state_maps_to_one(r):
    f = bg.bargmann_closed_form(sc.basis_vector("hermite", r, 5, TAU, LEV, (0,) * (2 * r)))
    want = np.zeros(f.basis.size)
    want[0] = 1
    np.testing.assert_allclose(f.coeffs, want, atol=1e-15)


@given(levels)
def test_unitarity(lev):
    hb = sc.Basis("hermite", 1, 8)
    psi = sc.make_section("hermite", 1, 8, TAU, lev, random_coeffs(np.random.default_rng(0), hb, 7))
    assert abs(sc.norm(psi) - sc.norm(bg.bargmann_closed_form(psi))) < 1e-10 * sc.norm(psi)


def test_transfer_identities():
    hb, fb = sc.Basis("hermite", 1, 8), sc.Basis("fock", 1, 8)
    B = bg.bargmann_operator(hb, LEV).dense()
    mu = qo.mudelta_operators(0, "mu", fb, LEV).dense()
    de = qo.mudelta_operators(0, "delta", fb, LEV).dense()
    M = qo.md_operators(0, "M", hb, LEV).dense()
    D = qo.md_operators(0, "D", hb, LEV).dense()
    assert qo.residual(B @ M, 0.5j * (de - mu) @ B, 2, hb) < 1e-10
    assert qo.residual(B @ D, 0.5j * (mu + de) @ B, 2, hb) < 1e-10


def test_quadrature_matches_closed_form():
    hb = sc.Basis("hermite", 1, 6)
    psi = sc.make_section("hermite", 1, 6, TAU, LEV, random_coeffs(np.random.default_rng(2), hb, 3))
    z = np.array([[0.2 + 0.1j, -0.3 + 0.4j], [0.5j, 0.1]])
    np.testing.assert_allclose(bg.bargmann_quadrature(psi, z, LEV, tol=1e-10),
                               sc.evaluate(bg.bargmann_closed_form(psi), z), atol=1e-10)


def test_quadrature_reports_divergence():
    wild = lambda q: np.exp(3 * np.sum(q * q, axis=1) / LEV.hbar) * np.cos(40 * q[:, 0])
    with pytest.raises(QuadratureDiverged):
        bg.bargmann_quadrature(wild, np.zeros((1, 2)), LEV, m=2, nodes=16, tol=1e-8)


def test_degree_overflow():
    psi = sc.basis_vector("hermite", 1, 6, TAU, LEV, (4, 0))
    with pytest.raises(DegreeOverflow):
        bg.bargmann_closed_form(psi, degree=3)


def test_transpose_of_point_evaluation():
    hb = sc.Basis("hermite", 1, 8)
    psi = sc.make_section("hermite", 1, 8, TAU, LEV, random_coeffs(np.random.default_rng(5), hb, 6))
    T = bg.point_evaluation(np.array([0.3 - 0.2j, 0.1 + 0.4j]), LEV)
    direct = bg.pair(T, bg.bargmann_closed_form(psi))
    assert abs(bg.pair(bg.transpose_bargmann(T), psi) - direct) < 1e-10


def test_transpose_needs_fock_side_element():
    with pytest.raises(PairingDiverged):
        bg.transpose_bargmann(bg.DualElement("regular", lambda q: q[:, 0], "position"))

import json

import numpy as np
import pytest
from hypothesis import given

from cslab import cartan as ct
from cslab import sections as sc
from cslab.errors import BasisMismatch, DegreeOverflow, FileFormatError, TailTooLarge
from cslab.frames import Level, TeichmullerPoint

from conftest import levels, random_coeffs, taus

TAU, LEV = TeichmullerPoint(0.3, 1.2), Level(2, 0.7)


def test_basis_sizes_and_ordering():
    b = sc.Basis("fock", 1, 3)
    assert b.size == 10
    assert list(b.degrees()) == sorted(b.degrees())
    assert sc.Basis("extended", 1, 2).size == 15
    with pytest.raises(BasisMismatch):
        sc.Basis("laguerre", 1, 2)


def test_hermite_functions_are_orthonormal():
    hb = 0.5
    x, w = np.polynomial.hermite.hermgauss(80)
    q = x * np.sqrt(hb)
    H = sc.hermite_functions(q, 10, hb) * np.sqrt(w * np.sqrt(hb) * np.exp(x**2))
    np.testing.assert_allclose(H @ H.T, np.eye(11), atol=1e-12)


def test_extended_inner_product_restricts_to_fock():
    fb = sc.Basis("fock", 1, 5)
    rng = np.random.default_rng(0)
    a = sc.make_section("fock", 1, 5, TAU, LEV, random_coeffs(rng, fb, 5))
    b = sc.make_section("fock", 1, 5, TAU, LEV, random_coeffs(rng, fb, 5))
    assert abs(sc.inner_product(a, b) - sc.inner_product(sc.embed_fock(a), sc.embed_fock(b))) < 1e-10


def test_extended_gram_is_hermitian_positive():
    G = sc.gram_matrix(sc.Basis("extended", 1, 4), 0.5)
    np.testing.assert_allclose(G, G.T, atol=0)
    assert np.linalg.eigvalsh(G).min() > 0


@given(taus, levels)
def test_rho_has_unit_modulus(tau, lev):
    p, q = np.array([[0.3, -0.4]]), np.array([[1.2, 0.1]])
    assert abs(abs(sc.rho_frame(p, q, lev)[0]) - 1) < 1e-14


def test_inner_product_checks_compatibility():
    a = sc.make_section("fock", 1, 4, TAU, LEV)
    with pytest.raises(BasisMismatch):
        sc.inner_product(a, sc.make_section("fock", 1, 5, TAU, LEV))
    with pytest.raises(BasisMismatch):
        sc.inner_product(a, sc.make_section("fock", 1, 4, TeichmullerPoint(0, 1), LEV))


def test_require_headroom():
    s = sc.basis_vector("hermite", 1, 6, TAU, LEV, (3, 0))
    sc.require_headroom(s, 3)
    with pytest.raises(DegreeOverflow):
        sc.require_headroom(s, 4)


def test_section_file_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    b = sc.Basis("hermite", 2, 4)
    s = sc.make_section("hermite", 2, 4, TAU, LEV, random_coeffs(rng, b, 4))
    path = tmp_path / "s.json"
    path.write_text(json.dumps(sc.section_to_dict(s)))
    back = sc.read_section(str(path))
    assert back.basis == s.basis and back.tau == s.tau and back.level == s.level
    np.testing.assert_array_equal(back.coeffs, s.coeffs)


@pytest.mark.parametrize("raw", [
    {"basis": "hermite"},
    {"basis": "wavelet", "rank": 1, "level": {"k": 1}, "tau": [0, 1], "degree": 2, "coeffs": []},
    {"basis": "fock", "rank": 1, "level": {"k": 0}, "tau": [0, 1], "degree": 2, "coeffs": []},
    {"basis": "fock", "rank": 1, "level": {"k": 1}, "tau": [0, -1], "degree": 2, "coeffs": []},
    {"basis": "fock", "rank": 1, "level": {"k": 1}, "tau": [0, 1], "degree": 2,
     "coeffs": [{"index": [3, 0], "re": 1}]},
])
def test_malformed_section_records(raw):
    with pytest.raises(FileFormatError):
        sc.section_from_dict(raw)


def test_unreadable_section_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(FileFormatError):
        sc.read_section(str(bad))
    with pytest.raises(FileFormatError):
        sc.read_section(str(tmp_path / "missing.json"))


def test_equivariantize_is_invariant():
    data = ct.preset_a1()
    E = sc.equivariantize(sc.gaussian([0.2, -0.1], 0.7, 1), data, 12.0)
    u = np.random.default_rng(0).normal(size=(6, 2)) * 0.5
    a = np.concatenate([data.lattice_basis[0], [0.0]])
    moved = sc.translate(E, a).scaled(sc.theta_character(a, 1))
    np.testing.assert_allclose(moved(u), E(u), atol=1e-9)
    np.testing.assert_allclose(sc.weyl_pullback(E, -np.eye(1))(u), E(u), atol=1e-12)


def test_equivariantize_reports_large_tail():
    with pytest.raises(TailTooLarge):
        sc.equivariantize(sc.gaussian([0.0, 0.0], 3.0, 1), ct.preset_a1(), 2.0)

import numpy as np
import pytest
from hypothesis import given

from cslab import quantops as qo
from cslab import sections as sc
from cslab.errors import BasisMismatch, PairingDiverged
from cslab.frames import Level, TeichmullerPoint

from conftest import levels, random_coeffs, taus

LEV = Level(2, 0.7)


@pytest.mark.parametrize("r, N", [(1, 8), (2, 5)])
def test_canonical_commutation(r, N):
    b = sc.Basis("fock", r, N)
    for j in range(2 * r):
        C = qo.commutator(qo.ladder(j, "annihilate", b, LEV), qo.ladder(j, "create", b, LEV))
        assert qo.residual(C, qo.identity(b) * (2 * LEV.hbar), 2, b) < 1e-12


def test_position_and_derivative_commutator_on_hermite_basis():
    b = sc.Basis("hermite", 1, 10)
    C = qo.commutator(qo.derivative_op(b, 0, LEV.hbar), qo.position_op(b, 0, LEV.hbar))
    assert qo.residual(C, qo.identity(b), 2, b) < 1e-12


def test_operator_arithmetic_checks_bases():
    a = qo.identity(sc.Basis("fock", 1, 4))
    with pytest.raises(BasisMismatch):
        a + qo.identity(sc.Basis("fock", 1, 5))
    np.testing.assert_allclose((a * 2 - a).dense(), np.eye(a.basis.size))


@given(taus, levels)
def test_hw_closed_form_matches_generic_assembly(tau, lev):
    b = sc.Basis("hermite", 1, 8)
    for d in ("d_tau", "d_tau_bar"):
        generic = qo.hw_potential_generic(d, tau, lev, b)
        assert qo.residual(generic, qo.hw_potential(d, tau, lev, b), 2, b) < 1e-10


@given(taus, levels)
def test_laplacian_closed_form_matches_generic(tau, lev):
    b = sc.Basis("extended", 1, 6)
    for d in ("d_tau", "d_tau_bar"):
        L1 = qo.laplacian_G(d, "holo", tau, lev, b)
        L2 = qo.laplacian_G(d, "holo", tau, lev, b, "closed")
        assert qo.residual(L1, L2, 2, b) < 1e-10


def test_ch_potential_keeps_fock_sections_holomorphic():
    tau = TeichmullerPoint(0.3, 1.2)
    eb, fb = sc.Basis("extended", 1, 8), sc.Basis("fock", 1, 8)
    rng = np.random.default_rng(0)
    f = sc.embed_fock(sc.make_section("fock", 1, 8, tau, LEV, random_coeffs(rng, fb, 6)))
    for d in ("d_tau", "d_tau_bar"):
        out = qo.ch_potential_generic(d, tau, LEV, eb).apply(f)
        assert np.abs(sc.antiholomorphic_part(out)).max() < 1e-10


def test_curvature_vanishes_for_both_potentials():
    tau = TeichmullerPoint(-0.2, 0.9)
    for build, kind in ((qo.hw_potential, "hermite"), (qo.l2_potential, "fock")):
        b = sc.Basis(kind, 1, 10)
        F = qo.curvature(lambda T: build("d_tau", T, LEV, b).dense(),
                         lambda T: build("d_tau_bar", T, LEV, b).dense(), tau)
        assert qo.residual(F, np.zeros_like(F), 4, b) < 1e-6


def test_gaussian_pairing_closed_form():
    g = sc.gaussian([0.0, 0.0], 1.0, 1)
    # integral of exp(-|u|^2) over R^2 is pi
    assert abs(qo.gaussian_pairing(g, g) - np.pi) < 1e-13


def test_gaussian_pairing_rejects_divergent_integrals():
    g = sc.gaussian([0.0, 0.0], 1.0, 1)
    flat = sc.GaussianSum(-g.A, g.b, g.c, 1)
    with pytest.raises(PairingDiverged):
        qo.gaussian_pairing(flat, flat)


def test_hw_potential_on_gaussians_is_anti_hermitian_for_real_directions():
    tau = TeichmullerPoint(0.3, 1.2)
    g1 = sc.gaussian([0.3, -0.2], 0.8, 2, momentum=[0.5, 0.1])
    g2 = sc.gaussian([-0.1, 0.4], 1.1, 2)
    lev = Level(2, 0.5)
    for d in ("d_tau1", "d_tau2"):
        a = qo.gaussian_pairing(qo.hw_gaussian_potential(g1, d, tau, lev), g2)
        b = qo.gaussian_pairing(g1, qo.hw_gaussian_potential(g2, d, tau, lev))
        assert abs(a + b) < 1e-12


def test_dual_and_direct_pairings_agree():
    from cslab import cartan as ct
    tau, lev = TeichmullerPoint(0.3, 1.2), Level(2, 0.5)
    E = sc.equivariantize(sc.gaussian([0.4, -0.3], 0.7, 2), ct.preset_a1(), 12.0)
    test = sc.gaussian([-0.1, 0.4], 1.1, 2)
    for d in ("d_tau1", "d_tau2"):
        a = qo.dual_apply("dualHW", E, test, d, tau, lev)
        b = qo.hw_direct_pairing(E, test, d, tau, lev)
        assert abs(a - b) < 1e-9

"""Bargmann transform between the Hermite and Fock pictures.

Normalisation: ``B(h_0) = 1`` with the Fock measure of :mod:`cslab.sections`.
The integral form is

    B(psi)(z) = (pi hbar)^{-m/4} int psi(q) exp(-(4i q.z + 2|q|^2 - z.z) / 4 hbar) d^m q

with the complex-bilinear dot product.  For sections over A_0 that are
bounded (lattice-invariant) the same integral converges and is evaluated by
quadrature; its product with ``exp(-|t| |z|^2 / 4)`` is the value of the
holomorphic section in the invariant trivialisation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from .errors import DegreeOverflow, PairingDiverged, QuadratureDiverged, TailTooLarge
from .frames import Level, TeichmullerPoint, complex_coframe
from .quantops import LinearOperator, d_z, mult_z
from .sections import (Basis, FockSection, GaussianSum, PositionSection, Section, fock_norms,
                       make_section, restrict_to_q)


# --------------------------------------------------------------------------
# closed form on the Hermite basis


@lru_cache(maxsize=64)
def _bargmann_matrix(rank: int, degree: int, hbar: float) -> np.ndarray:
    """Columns are the Fock coefficients of B(h_n), built from B(h_0) = 1 by the ladder relations."""
    hb = Basis("hermite", rank, degree)
    fb = Basis("fock", rank, degree)
    qmul = [0.5j * (2 * hbar * d_z(fb, a).matrix - mult_z(fb, a).matrix).tocsr() for a in range(2 * rank)]
    B = np.zeros((fb.size, hb.size), dtype=complex)
    B[fb.position((0,) * (2 * rank)), hb.position((0,) * (2 * rank))] = 1.0
    for col, n in enumerate(hb.indices):
        if sum(n) == 0:
            continue
        j = next(a for a in range(2 * rank) if n[a] > 0)
        prev = list(n)
        prev[j] -= 1
        prev = tuple(prev)
        # h_n = (sqrt(2/hbar) q_j h_prev - sqrt(prev_j) h_{prev - e_j}) / sqrt(n_j)
        # and B(q_j psi) = (i/2)(a_j - a*_j) B(psi)
        v = np.sqrt(2 / hbar) * (qmul[j] @ B[:, hb.position(prev)])
        if prev[j] > 0:
            pp = list(prev)
            pp[j] -= 1
            v = v - np.sqrt(prev[j]) * B[:, hb.position(tuple(pp))]
        B[:, col] = v / np.sqrt(n[j])
    B.setflags(write=False)
    return B


def bargmann_operator(basis: Basis, level: Level) -> LinearOperator:
    """The transform as a matrix from the Hermite basis to the Fock basis of the same degree."""
    B = _bargmann_matrix(basis.rank, basis.degree, level.hbar)
    return LinearOperator(B, basis, 0, Basis("fock", basis.rank, basis.degree))


def bargmann_closed_form(psi: PositionSection, degree: int | None = None) -> FockSection:
    degree = psi.degree if degree is None else degree
    if psi.effective_degree() > degree:
        raise DegreeOverflow(f"input has degree {psi.effective_degree()} > output degree {degree}")
    B = _bargmann_matrix(psi.rank, psi.degree, psi.level.hbar)
    out = make_section("fock", psi.rank, psi.degree, psi.tau, psi.level, B @ psi.coeffs)
    if degree == psi.degree:
        return out
    target = make_section("fock", psi.rank, degree, psi.tau, psi.level)
    c = target.coeffs.copy()
    for i, a in enumerate(out.basis.indices):
        if sum(a) <= degree:
            c[target.basis.position(a)] = out.coeffs[i]
    return target.with_coeffs(c)


def bargmann_hermite_monomial(n, hbar: float) -> complex:
    """Coefficient of z^n in B(h_n): (-i)^|n| / sqrt((2 hbar)^|n| n!)."""
    d = sum(n)
    return (-1j) ** d / np.sqrt((2 * hbar) ** d * np.prod([factorial(x) for x in n]))


# --------------------------------------------------------------------------
# quadrature


def _gh_grid(m: int, nodes: int, scale: float):
    x, w = np.polynomial.hermite.hermgauss(nodes)
    pts = np.array(list(itertools.product(x, repeat=m))) * scale
    wts = np.prod(np.array(list(itertools.product(w, repeat=m))), axis=1) * scale**m
    return pts, wts


def default_nodes(m: int) -> int:
    return 64 if m <= 2 else 20


def bargmann_quadrature(psi, z, level: Level, m: int | None = None, nodes: int | None = None,
                        tol: float | None = None) -> np.ndarray:
    """Evaluate the integral form at rows of ``z`` by tensor Gauss-Hermite quadrature.

    ``psi`` is a PositionSection or a callable on rows of q.  The Gaussian
    weight exp(-|q|^2 / 2 hbar) is taken from the kernel.  With ``tol`` set,
    the node count is doubled once and QuadratureDiverged is raised if the
    two results differ by more than ``tol``.
    """
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    hbar = level.hbar
    if isinstance(psi, Section):
        # fold the Hermite envelope exp(-|q|^2/2hbar) into the weight as well
        from .sections import hermite_design
        sec = psi
        m = sec.basis.nvars
        scale = np.sqrt(hbar)

        def f(q):
            env = np.exp(np.sum(q * q, axis=1) / (2 * hbar))
            return (hermite_design(q, sec.basis, hbar) @ sec.coeffs) * env
    else:
        f = psi
        m = z.shape[1] if m is None else m
        scale = np.sqrt(2 * hbar)
    nodes = default_nodes(m) if nodes is None else nodes

    def run(n):
        q, w = _gh_grid(m, n, scale)
        vals = f(q) * w
        phase = np.exp(-1j * (z @ q.T) / hbar)
        return (np.pi * hbar) ** (-m / 4) * np.exp(np.sum(z * z, axis=1) / (4 * hbar)) * (phase @ vals)

    out = run(nodes)
    if tol is not None:
        fine = run(2 * nodes)
        if np.abs(fine - out).max() > tol:
            raise QuadratureDiverged(f"node doubling changed the result by {np.abs(fine - out).max():.2e}")
        out = fine
    return out


def coherent_state(z0, level: Level):
    """q -> conj of the Bargmann kernel at z0: the position-side image of evaluation at z0."""
    z0 = np.asarray(z0, dtype=complex)
    m = z0.size
    hbar = level.hbar

    def k(q):
        q = np.atleast_2d(q)
        expo = -(4j * (q @ z0) + 2 * np.sum(q * q, axis=1) - z0 @ z0) / (4 * hbar)
        return np.conj((np.pi * hbar) ** (-m / 4) * np.exp(expo))

    return k


# --------------------------------------------------------------------------
# bounded sections over A_0


def _gl_box(center, half_width: float, nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    m = center.size
    ax = [center[i] + half_width * x for i in range(m)]
    pts = np.array(list(itertools.product(*ax)))
    wts = np.prod(np.array(list(itertools.product(w, repeat=m))), axis=1) * half_width**m
    return pts, wts


def bargmann_equivariant(psi: GaussianSum, z, tau: TeichmullerPoint, level: Level, tol: float = 1e-10,
                         as_section: bool = False, nodes_per_unit: float = 9.0, with_error: bool = False):
    """Transform of a bounded lattice-invariant section over A_0 at rows of ``z``.

    The integrand has modulus bounded by exp(-|t| |q - Im z|^2 / 2), so a box
    around the imaginary parts of the requested points captures everything up
    to a Gaussian tail.  The box and the node count are then doubled; if the
    values move by more than ``tol`` TailTooLarge is raised.  Returns the
    function values (Fock picture); ``as_section`` multiplies by
    exp(-|t| |z|^2 / 4) to give the section in the invariant trivialisation.
    ``with_error`` returns ``(values, doubling_change)``.
    """
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    r = psi.dim // 2
    m = 2 * r
    f = restrict_to_q(psi, tau, level, r)
    at, hbar = level.abs_t, level.hbar
    im = z.imag
    center = 0.5 * (im.max(axis=0) + im.min(axis=0))
    spread = float(np.abs(im - center).max())
    half = np.sqrt(2 * np.log(1e18) / at) + spread

    def run(h):
        n = max(16, int(np.ceil(nodes_per_unit * 2 * h * np.sqrt(at))))
        q, w = _gl_box(center, h, n)
        vals = f(q) * w
        expo = (-1j * (z @ q.T) - 0.5 * np.sum(q * q, axis=1)[None, :]) / hbar
        return (np.pi * hbar) ** (-m / 4) * np.exp(np.sum(z * z, axis=1) / (4 * hbar)) * (np.exp(expo) @ vals)

    coarse, fine = run(half), run(2 * half)
    err = float(np.abs(fine - coarse).max(initial=0.0))
    if err > tol:
        raise TailTooLarge(f"domain doubling changed the transform by {err:.2e}")
    if as_section:
        fine = fine * np.exp(-at * np.sum(np.abs(z) ** 2, axis=1) / 4)
    return (fine, err) if with_error else fine


def z_of_x(x, tau: TeichmullerPoint, level: Level, rank: int) -> np.ndarray:
    """Holomorphic coordinates z = p + i q of points x of A_0^C (rows)."""
    return np.atleast_2d(x) @ complex_coframe(tau, level, rank).T


def taylor_coefficients(f, basis: Basis, radius: float = 1.0, npts: int = 32) -> np.ndarray:
    """Coefficients of the monomials of ``basis`` in an entire function, by FFT on a polycircle."""
    m = basis.nvars
    theta = 2 * np.pi * np.arange(npts) / npts
    grid = np.array(list(itertools.product(range(npts), repeat=m)))
    z = radius * np.exp(1j * theta[grid])
    vals = np.asarray(f(z)).reshape((npts,) * m)
    coef = np.fft.fftn(vals) / npts**m
    out = np.zeros(basis.size, dtype=complex)
    for i, a in enumerate(basis.indices):
        if max(a) >= npts // 2:
            raise PairingDiverged("polycircle resolution too low for the requested degree")
        out[i] = coef[tuple(a)] / radius ** sum(a)
    return out


# --------------------------------------------------------------------------
# duals


@dataclass(frozen=True, eq=False)
class DualElement:
    """A continuous functional (T | .), antilinear in the test section.

    variant "regular":     payload is a callable on rows of points; pairs by integration.
    variant "entire":      payload is an entire function on the Fock side; pairs through its
                           Taylor coefficients with the Fock inner product.
    variant "point_eval":  payload is a point z0 of the Fock side; (T | phi) = conj(phi(z0)).
    variant "combo":       payload is a list of (coefficient, DualElement).
    variant "transposed":  payload is a Fock-side DualElement T; (tB T | psi) = (T | B psi).
    """

    variant: str
    payload: object
    side: str = "position"
    level: Level | None = None


def pair(T: DualElement, test: Section, **quad) -> complex:
    if T.variant == "combo":
        return sum(c * pair(S, test, **quad) for c, S in T.payload)
    if T.variant == "transposed":
        if T.side != "position":
            raise PairingDiverged("transposed elements act on position-side tests")
        return pair(T.payload, bargmann_closed_form(test))
    if T.variant == "point_eval":
        from .sections import evaluate
        return complex(np.conj(evaluate(test, np.asarray(T.payload))))
    if T.variant == "entire":
        radius = quad.get("radius", 1.0)
        npts = quad.get("npts", 32)
        c = taylor_coefficients(T.payload, test.basis, radius, npts)
        return complex(np.sum(c * np.conj(test.coeffs) * fock_norms(test.basis, test.level.hbar)))
    if T.variant == "regular":
        if test.basis.kind != "hermite":
            raise PairingDiverged("regular position-side elements pair with Hermite tests")
        from .sections import hermite_design
        m = test.basis.nvars
        nodes = quad.get("nodes", default_nodes(m))
        q, w = _gh_grid(m, nodes, np.sqrt(2 * test.level.hbar))
        # the test carries exp(-|q|^2/2hbar); divide it out of the weight
        tv = hermite_design(q, test.basis, test.level.hbar) @ test.coeffs
        wq = w * np.exp(np.sum(q * q, axis=1) / (2 * test.level.hbar))
        val = np.sum(T.payload(q) * np.conj(tv) * wq)
        if not np.isfinite(val):
            raise PairingDiverged("pairing integral is not finite")
        return complex(val)
    raise ValueError(T.variant)


def transpose_bargmann(T: DualElement) -> DualElement:
    """tB T, characterised by (tB T | psi) = (T | B psi)."""
    if T.side != "fock":
        raise PairingDiverged("transpose acts on Fock-side elements")
    if T.variant == "point_eval":
        if T.level is None:
            raise PairingDiverged("point evaluations need a level")
        return DualElement("regular", coherent_state(T.payload, T.level), "position", T.level)
    if T.variant == "combo":
        return DualElement("combo", [(c, transpose_bargmann(S)) for c, S in T.payload], "position")
    return DualElement("transposed", T, "position")


def point_evaluation(z0, level: Level) -> DualElement:
    return DualElement("point_eval", np.asarray(z0, dtype=complex), "fock", level)

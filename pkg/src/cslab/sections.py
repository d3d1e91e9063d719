"""Truncated representations of polarised sections.

Three coefficient bases are used, all graded by total degree ``<= N``:

* ``hermite``  - normalised Hermite functions ``h_n(q)`` for ``hbar = 1/|t|``,
  orthonormal in ``L^2(R^m, d^m q)``;
* ``fock``     - monomials ``z^alpha`` with the Gaussian measure
  ``(2 pi hbar)^{-m} exp(-|z|^2 / 2 hbar)``, so ``<z^a, z^b> = delta (2 hbar)^|a| a!``;
* ``extended`` - monomials ``z^alpha zbar^beta`` (needed to see non-holomorphic
  parts produced by a covariant derivative).

Here ``m = 2r``.  Sections over the real model ``A_0`` that are invariant
under the lattice and Weyl group are handled separately by
:class:`GaussianSum`, a finite sum of complex Gaussians in the ``u`` chart.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np

from . import cartan as cartan_mod
from .errors import BasisMismatch, ConfigError, DegreeOverflow, FileFormatError, RangeWarning, TailTooLarge
from .frames import Level, TeichmullerPoint, coframe

KINDS = ("hermite", "fock", "extended")


@lru_cache(maxsize=None)
def multi_indices(nvars: int, degree: int) -> tuple:
    """All n in N^nvars with |n| <= degree, graded then lexicographic."""
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), d):
            n = [0] * nvars
            for c in combo:
                n[c] += 1
            out.append(tuple(n))
    # combinations_with_replacement gives reverse-lex inside a degree; make it stable and readable
    return tuple(sorted(out, key=lambda n: (sum(n), tuple(-x for x in n))))


@dataclass(frozen=True)
class Basis:
    kind: str
    rank: int
    degree: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BasisMismatch(f"unknown basis kind {self.kind!r}")

    @property
    def nvars(self) -> int:
        return 2 * self.rank

    @property
    def indices(self) -> tuple:
        width = self.nvars * (2 if self.kind == "extended" else 1)
        return multi_indices(width, self.degree)

    @property
    def size(self) -> int:
        return len(self.indices)

    def position(self, index) -> int:
        return _position_map(self.kind, self.rank, self.degree)[tuple(index)]

    def degrees(self) -> np.ndarray:
        return np.array([sum(n) for n in self.indices])


@lru_cache(maxsize=None)
def _position_map(kind, rank, degree):
    return {n: i for i, n in enumerate(Basis(kind, rank, degree).indices)}


@dataclass(frozen=True, eq=False)
class Section:
    basis: Basis
    tau: TeichmullerPoint
    level: Level
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.basis.size,):
            raise BasisMismatch(f"expected {self.basis.size} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def rank(self) -> int:
        return self.basis.rank

    @property
    def degree(self) -> int:
        return self.basis.degree

    def with_coeffs(self, coeffs) -> "Section":
        return type(self)(self.basis, self.tau, self.level, coeffs)

    def effective_degree(self, tol: float = 0.0) -> int:
        nz = np.nonzero(np.abs(self.coeffs) > tol)[0]
        return int(self.basis.degrees()[nz].max()) if nz.size else 0


class PositionSection(Section):
    """psi * rho_tau with psi expanded in Hermite functions of q."""


class FockSection(Section):
    """f * sigma_tau with f a polynomial in z."""


class ExtendedSection(Section):
    """f * sigma_tau with f a polynomial in z and zbar."""


_CLASSES = {"hermite": PositionSection, "fock": FockSection, "extended": ExtendedSection}


def make_section(kind, rank, degree, tau, level, coeffs=None) -> Section:
    basis = Basis(kind, rank, degree)
    if coeffs is None:
        coeffs = np.zeros(basis.size, dtype=complex)
    return _CLASSES[kind](basis, tau, level, coeffs)


def basis_vector(kind, rank, degree, tau, level, index) -> Section:
    s = make_section(kind, rank, degree, tau, level)
    c = s.coeffs.copy()
    c[s.basis.position(index)] = 1.0
    return s.with_coeffs(c)


# --------------------------------------------------------------------------
# section files


def section_to_dict(section: Section) -> dict:
    """Serialisable form; only nonzero coefficients are listed, in basis order."""
    coeffs = [{"index": list(idx), "re": float(c.real), "im": float(c.imag)}
              for idx, c in zip(section.basis.indices, section.coeffs) if c != 0]
    return {"basis": section.basis.kind, "rank": section.rank,
            "level": {"k": section.level.k, "s": section.level.s},
            "tau": [section.tau.tau1, section.tau.tau2], "degree": section.degree, "coeffs": coeffs}


def section_from_dict(raw) -> Section:
    try:
        kind, rank, degree = raw["basis"], int(raw["rank"]), int(raw["degree"])
        level = Level(float(raw["level"]["k"]), float(raw["level"].get("s", 0.0)))
        tau = TeichmullerPoint(float(raw["tau"][0]), float(raw["tau"][1]))
        entries = raw["coeffs"]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise FileFormatError(f"malformed section record: {exc!r}") from None
    except ConfigError as exc:
        raise FileFormatError(str(exc)) from None
    if kind not in _CLASSES:
        raise FileFormatError(f"unknown basis {kind!r}")
    if rank < 1 or degree < 0:
        raise FileFormatError("rank must be positive and degree non-negative")
    sec = make_section(kind, rank, degree, tau, level)
    c = sec.coeffs.copy()
    for e in entries:
        try:
            idx = tuple(int(i) for i in e["index"])
            val = complex(float(e.get("re", 0.0)), float(e.get("im", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise FileFormatError(f"malformed coefficient entry {e!r}") from exc
        if idx not in _position_map(kind, rank, degree):
            raise FileFormatError(f"index {list(idx)} is not in the {kind} basis of rank {rank}, degree {degree}")
        c[sec.basis.position(idx)] += val
    return sec.with_coeffs(c)


def read_section(path: str) -> Section:
    import json
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise FileFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path} is not valid JSON: {exc}") from exc
    return section_from_dict(raw)


def embed_fock(section: FockSection) -> ExtendedSection:
    """View a holomorphic section inside the (z, zbar) basis (the beta = 0 slice)."""
    b = section.basis
    ext = make_section("extended", b.rank, b.degree, section.tau, section.level)
    c = ext.coeffs.copy()
    m = b.nvars
    for i, a in enumerate(b.indices):
        c[ext.basis.position(a + (0,) * m)] = section.coeffs[i]
    return ext.with_coeffs(c)


def antiholomorphic_part(section: ExtendedSection) -> np.ndarray:
    """Coefficients with beta != 0; zero exactly when the section is holomorphic."""
    m = section.basis.nvars
    mask = np.array([any(n[m:]) for n in section.basis.indices])
    return section.coeffs[mask]


def holomorphic_part(section: ExtendedSection) -> FockSection:
    b = section.basis
    out = make_section("fock", b.rank, b.degree, section.tau, section.level)
    c = out.coeffs.copy()
    m = b.nvars
    for i, n in enumerate(b.indices):
        if not any(n[m:]):
            c[out.basis.position(n[:m])] = section.coeffs[i]
    return out.with_coeffs(c)


# --------------------------------------------------------------------------
# inner products


def fock_norms(basis: Basis, hbar: float) -> np.ndarray:
    """<z^a, z^a> = (2 hbar)^|a| a! under the normalised Gaussian measure."""
    return np.array([(2 * hbar) ** sum(a) * np.prod([factorial(x) for x in a]) for a in basis.indices])


def _moment(a: int, b: int, hbar: float) -> float:
    """Integral of z^a zbar^b for one complex variable under the normalised measure."""
    return (2 * hbar) ** a * factorial(a) if a == b else 0.0


def gram_matrix(basis: Basis, hbar: float) -> np.ndarray:
    if basis.kind == "hermite":
        return np.eye(basis.size)
    if basis.kind == "fock":
        return np.diag(fock_norms(basis, hbar))
    return _extended_gram(basis, float(hbar)).copy()


@lru_cache(maxsize=16)
def _extended_gram(basis: Basis, hbar: float) -> np.ndarray:
    m = basis.nvars
    idx = np.array(basis.indices, dtype=int)
    hol, anti = idx[:, :m], idx[:, m:]
    G = np.ones((basis.size, basis.size))
    for v in range(m):
        # conj(z^a zbar^b) z^c zbar^d = z^(b+c) zbar^(a+d); only matched powers survive
        p = anti[:, None, v] + hol[None, :, v]
        q = hol[:, None, v] + anti[None, :, v]
        fact = np.array([(2 * hbar) ** n * factorial(n) for n in range(int(p.max()) + 1)])
        G *= np.where(p == q, fact[p], 0.0)
    return G


def _check_pair(a: Section, b: Section):
    if a.basis != b.basis:
        raise BasisMismatch("sections live in different bases")
    if a.tau != b.tau or a.level != b.level:
        raise BasisMismatch("sections belong to different (tau, t)")


def inner_product(a: Section, b: Section) -> complex:
    """<a, b>, antilinear in the first slot."""
    _check_pair(a, b)
    if a.basis.kind == "hermite":
        return complex(np.vdot(a.coeffs, b.coeffs))
    if a.basis.kind == "fock":
        return complex(np.sum(np.conj(a.coeffs) * b.coeffs * fock_norms(a.basis, a.level.hbar)))
    return complex(np.conj(a.coeffs) @ gram_matrix(a.basis, a.level.hbar) @ b.coeffs)


def norm(a: Section) -> float:
    return float(np.sqrt(max(inner_product(a, a).real, 0.0)))


# --------------------------------------------------------------------------
# point evaluation


def hermite_functions(x, nmax: int, hbar: float) -> np.ndarray:
    """Array of shape (nmax+1, *x.shape) with h_0(x)..h_nmax(x), by the stable three-term recurrence."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((nmax + 1,) + x.shape)
    out[0] = (np.pi * hbar) ** -0.25 * np.exp(-x * x / (2 * hbar))
    if nmax >= 1:
        out[1] = np.sqrt(2 / hbar) * x * out[0]
    for n in range(1, nmax):
        out[n + 1] = (np.sqrt(2 / hbar) * x * out[n] - np.sqrt(n) * out[n - 1]) / np.sqrt(n + 1)
    return out


def _range_check(section: Section, pts: np.ndarray):
    lim = 10 * np.sqrt(max(section.degree, 1) * section.level.hbar)
    if np.any(np.abs(pts) > lim):
        warnings.warn(f"evaluation point beyond |x| = {lim:.3g}; truncated expansion may be inaccurate",
                      RangeWarning, stacklevel=3)


def hermite_design(q: np.ndarray, basis: Basis, hbar: float) -> np.ndarray:
    """Matrix (npts, basis.size) of h_n(q) for q of shape (npts, m)."""
    q = np.atleast_2d(q)
    H = hermite_functions(q, basis.degree, hbar)  # (N+1, npts, m)
    idx = np.array(basis.indices)
    vals = np.ones((q.shape[0], basis.size))
    for v in range(basis.nvars):
        vals *= H[idx[:, v], :, v].T
    return vals


def monomial_design(z: np.ndarray, basis: Basis) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    m = basis.nvars
    idx = np.array(basis.indices)
    zz = np.concatenate([z, np.conj(z)], axis=1) if basis.kind == "extended" else z
    powers = zz[:, None, :] ** idx[None, :, :]
    return np.prod(powers, axis=2)


def rho_frame(p, q, level: Level):
    """exp(-(i/2hbar) p.q); identically 1 on Q (p = 0)."""
    return np.exp(-0.5j * level.abs_t * np.sum(np.asarray(p) * np.asarray(q), axis=-1))


def sigma_frame(z, level: Level):
    """(2 pi hbar)^{-m} exp(-|z|^2 / 4 hbar)."""
    z = np.asarray(z)
    m = z.shape[-1]
    hbar = level.hbar
    return (2 * np.pi * hbar) ** (-m) * np.exp(-np.sum(np.abs(z) ** 2, axis=-1) / (4 * hbar))


def evaluate(section: Section, point, with_frame: bool = False):
    """Value of the coefficient function at ``point`` (rows of points allowed).

    Hermite sections take ``q`` (length m) or, with ``with_frame``, ``(p, q)``
    (length 2m).  Fock and extended sections take ``z``.
    """
    pts = np.atleast_2d(np.asarray(point))
    m = section.basis.nvars
    _range_check(section, pts)
    if section.basis.kind == "hermite":
        q = pts[:, -m:].real
        vals = hermite_design(q, section.basis, section.level.hbar) @ section.coeffs
        if with_frame:
            if pts.shape[1] != 2 * m:
                raise BasisMismatch("frame evaluation needs (p, q)")
            vals = vals * rho_frame(pts[:, :m].real, q, section.level)
    else:
        vals = monomial_design(pts, section.basis) @ section.coeffs
        if with_frame:
            vals = vals * sigma_frame(pts, section.level)
    return vals if np.ndim(point) > 1 else complex(vals[0])


def require_headroom(section: Section, needed: int, tol: float = 0.0):
    """Raise DegreeOverflow unless the section leaves ``needed`` free degrees below N."""
    d = section.effective_degree(tol)
    if d > section.degree - needed:
        raise DegreeOverflow(f"section has degree {d}; need <= {section.degree - needed}")


# --------------------------------------------------------------------------
# lattice- and Weyl-invariant sections on A_0


@dataclass(frozen=True, eq=False)
class GaussianSum:
    """Psi(u) = sum_i exp(-u.A_i.u/2 + b_i.u + c_i) on A_0 = R^{2r}.

    Values are those of a section of the level-k line bundle in the
    trivialisation with connection d - (i k/2) omega(u, .).
    """

    A: np.ndarray  # (n, 2r, 2r) complex symmetric, Re A_i > 0
    b: np.ndarray  # (n, 2r)
    c: np.ndarray  # (n,)
    k: int
    tail: float = 0.0

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def __len__(self):
        return len(self.c)

    def __call__(self, u) -> np.ndarray:
        u = np.atleast_2d(u)
        quad = np.einsum("pi,nij,pj->pn", u, self.A, u)
        lin = u @ self.b.T
        return np.exp(-0.5 * quad + lin + self.c[None, :]).sum(axis=1)

    def scaled(self, factor: complex) -> "GaussianSum":
        with np.errstate(divide="ignore"):
            shift = np.log(complex(factor))   # factor 0 gives -inf, i.e. the zero section
        return GaussianSum(self.A, self.b, self.c + shift, self.k, self.tail * abs(factor))

    def __add__(self, other: "GaussianSum") -> "GaussianSum":
        return GaussianSum(np.concatenate([self.A, other.A]), np.concatenate([self.b, other.b]),
                           np.concatenate([self.c, other.c]), self.k, self.tail + other.tail)


def gaussian(center, width: float, k: int, momentum=None) -> GaussianSum:
    """exp(-|u - center|^2 / (2 width^2) + i momentum.u)."""
    center = np.asarray(center, dtype=float)
    n = center.size
    A = np.eye(n)[None] / width**2
    mom = np.zeros(n) if momentum is None else np.asarray(momentum, dtype=float)
    b = (center / width**2 + 1j * mom)[None]
    c = np.array([-center @ center / (2 * width**2)], dtype=complex)
    return GaussianSum(A.astype(complex), b.astype(complex), c, k)


def theta_character(shift: np.ndarray, k: int, lattice_character=None) -> complex:
    """Multiplier making lambda -> eps(lambda) T_lambda a representation of Lambda + Lambda."""
    r = shift.size // 2
    eps = np.exp(0.5j * k * shift[:r] @ shift[r:])
    if lattice_character is not None:
        eps *= np.exp(1j * np.dot(lattice_character, shift))
    return complex(eps)


def translate(psi: GaussianSum, shift: np.ndarray) -> GaussianSum:
    """(T_a Psi)(u) = exp((i k/2) omega(a, u)) Psi(u - a)."""
    r = psi.dim // 2
    Om = np.kron(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(r))
    a = np.asarray(shift, dtype=float)
    Aa = psi.A @ a
    b = psi.b + Aa + 0.5j * psi.k * (a @ Om)[None, :]
    c = psi.c - 0.5 * np.einsum("i,nij,j->n", a, psi.A, a) - psi.b @ a
    return GaussianSum(psi.A, b, c, psi.k, psi.tail)


def weyl_pullback(psi: GaussianSum, w: np.ndarray) -> GaussianSum:
    """Psi(W^{-1} u) for the diagonal action W = w (+) w on t x t."""
    W = np.kron(np.eye(2), w)
    Wi = np.linalg.inv(W)
    A = np.einsum("ji,njk,kl->nil", Wi, psi.A, Wi)
    b = psi.b @ Wi
    return GaussianSum(A, b, psi.c.copy(), psi.k, psi.tail)


def lattice_shifts(data: cartan_mod.CartanData, radius: float) -> np.ndarray:
    """All (lambda, mu) in Lambda + Lambda with Euclidean norm <= radius, as rows in R^{2r}."""
    L = data.lattice_basis
    r = data.rank
    smin = np.linalg.svd(L, compute_uv=False).min()
    nmax = int(np.ceil(radius / smin)) + 1
    rng = range(-nmax, nmax + 1)
    out = []
    for n in itertools.product(rng, repeat=2 * r):
        n = np.array(n, dtype=float)
        v = np.concatenate([L @ n[:r], L @ n[r:]])
        if v @ v <= radius**2 + 1e-12:
            out.append(v)
    out.sort(key=lambda v: (round(float(v @ v), 9), tuple(np.round(v, 9))))
    return np.array(out)


def fundamental_box(data: cartan_mod.CartanData, npts: int, rng: np.random.Generator) -> np.ndarray:
    """Random sample points of the fundamental parallelepiped of Lambda + Lambda."""
    r = data.rank
    th = rng.random((npts, 2 * r))
    L = data.lattice_basis
    return np.concatenate([th[:, :r] @ L.T, th[:, r:] @ L.T], axis=1)


def equivariantize(seed: GaussianSum, data: cartan_mod.CartanData, radius: float,
                   tol: float = 1e-9, lattice_character=None, probe: np.ndarray | None = None) -> GaussianSum:
    """Average ``seed`` over the Weyl group and lattice translations with |shift| <= radius.

    The result is invariant under Psi -> eps(a) T_a Psi and Psi -> Psi o w^{-1}
    up to the omitted shells.  The tail is estimated from the next shell of
    translates (out to 1.5 radius, and at least one lattice step further),
    evaluated on a probe set covering the fundamental domain; TailTooLarge is
    raised if it exceeds ``tol``.
    """
    weyl = cartan_mod.enumerate_weyl(data)
    orbit = seed
    for w in weyl[1:]:
        orbit = orbit + weyl_pullback(seed, w)
    orbit = orbit.scaled(1.0 / len(weyl))

    def lattice_sum(shifts):
        parts = [translate(orbit, a).scaled(theta_character(a, seed.k, lattice_character)) for a in shifts]
        A = np.concatenate([p.A for p in parts])
        b = np.concatenate([p.b for p in parts])
        c = np.concatenate([p.c for p in parts])
        return GaussianSum(A, b, c, seed.k)

    inner = lattice_shifts(data, radius)
    # the shell must reach at least one lattice step beyond the radius, or a small radius reads as no tail
    step = float(np.linalg.norm(data.lattice_basis, axis=0).max())
    outer = max(1.5 * radius, radius + step)
    shell = np.array([a for a in lattice_shifts(data, outer) if a @ a > radius**2 + 1e-12])
    if probe is None:
        probe = fundamental_box(data, 64, np.random.default_rng(0))
    tail = float(np.abs(lattice_sum(shell)(probe)).max()) if len(shell) else 0.0
    if tail > tol:
        raise TailTooLarge(f"lattice tail {tail:.2e} exceeds tolerance {tol:.1e}; increase the radius")
    out = lattice_sum(inner)
    return GaussianSum(out.A, out.b, out.c, seed.k, tail)


# --------------------------------------------------------------------------
# A_0 seen through the (p, q) chart of a given tau


def a0_chart(tau: TeichmullerPoint, level: Level, rank: int):
    """Matrices (P, Q) with p = P u, q = Q u for points (u, 0) of A_0."""
    C = coframe(tau, level, rank)
    n = 2 * rank
    return C[:n, :n], C[n:, :n]


def restrict_to_q(psi: GaussianSum, tau: TeichmullerPoint, level: Level, rank: int):
    """The polarised function psi(q) = Psi(u(q)) / rho(p(q), q), as a callable on rows of q."""
    P, Q = a0_chart(tau, level, rank)
    Qi = np.linalg.inv(Q)

    def f(q):
        q = np.atleast_2d(q)
        u = q @ Qi.T
        p = u @ P.T
        return psi(u) / rho_frame(p, q, level)

    return f

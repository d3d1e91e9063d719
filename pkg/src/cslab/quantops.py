"""Operators on truncated section spaces.

Every operator is an exact sparse matrix on one of the bases of
:mod:`cslab.sections`.  Outputs that would leave the truncation are dropped,
so identities only hold on columns with enough degree headroom; callers
restrict comparisons with :func:`headroom_mask`.

Connection potentials are given in "coefficient form": if a tau-family of
sections has coefficient vector ``c(tau)`` in the moving basis at ``tau``,
its covariant derivative has coefficients ``dc/dtau + A_tau c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from threading import Lock

import numpy as np
import scipy.sparse as sp

from . import frames as fr
from .errors import BasisMismatch, DegreeOverflow, PairingDiverged
from .frames import Level, TeichmullerPoint
from .sections import Basis, Section, make_section


@dataclass(frozen=True, eq=False)
class LinearOperator:
    matrix: sp.csr_matrix
    basis: Basis
    degree_shift: int = 0
    codomain: Basis | None = None

    def __post_init__(self):
        object.__setattr__(self, "matrix", sp.csr_matrix(self.matrix, dtype=complex))
        if self.codomain is None:
            object.__setattr__(self, "codomain", self.basis)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def apply(self, section: Section) -> Section:
        if section.basis != self.basis:
            raise BasisMismatch(f"operator acts on {self.basis}, got {section.basis}")
        return make_section(self.codomain.kind, self.codomain.rank, self.codomain.degree,
                            section.tau, section.level, self.matrix @ section.coeffs)

    def __matmul__(self, other):
        if isinstance(other, LinearOperator):
            if other.codomain != self.basis:
                raise BasisMismatch("cannot compose operators on different bases")
            return LinearOperator(self.matrix @ other.matrix, other.basis,
                                  self.degree_shift + other.degree_shift, self.codomain)
        if isinstance(other, Section):
            return self.apply(other)
        return self.matrix @ other

    def _binary(self, other, sign):
        if other.basis != self.basis or other.codomain != self.codomain:
            raise BasisMismatch("cannot add operators on different bases")
        return LinearOperator(self.matrix + sign * other.matrix, self.basis,
                              max(self.degree_shift, other.degree_shift), self.codomain)

    def __add__(self, other):
        return self._binary(other, 1)

    def __sub__(self, other):
        return self._binary(other, -1)

    def __mul__(self, scalar):
        return LinearOperator(self.matrix * complex(scalar), self.basis, self.degree_shift, self.codomain)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def triplets(self) -> list:
        """Sparse (row, col, re, im) entries, for export."""
        m = self.matrix.tocoo()
        return [(int(i), int(j), float(v.real), float(v.imag)) for i, j, v in zip(m.row, m.col, m.data)]


def identity(basis: Basis) -> LinearOperator:
    return LinearOperator(sp.identity(basis.size, dtype=complex, format="csr"), basis)


def commutator(a: LinearOperator, b: LinearOperator) -> LinearOperator:
    return a @ b - b @ a


def headroom_mask(basis: Basis, headroom: int) -> np.ndarray:
    """Columns whose index has total degree <= N - headroom."""
    return basis.degrees() <= basis.degree - headroom


def residual(a: LinearOperator | np.ndarray, b: LinearOperator | np.ndarray, headroom: int, basis: Basis) -> float:
    """Max-entry difference of two operators restricted to columns with headroom."""
    A = a.dense() if isinstance(a, LinearOperator) else np.asarray(a)
    B = b.dense() if isinstance(b, LinearOperator) else np.asarray(b)
    cols = headroom_mask(basis, headroom)
    return float(np.abs((A - B)[:, cols]).max(initial=0.0))


@lru_cache(maxsize=1024)
def _shift(basis: Basis, var: int, step: int):
    """(rows, cols, n_var) for the index map n -> n + step e_var, within the basis."""
    rows, cols, occ = [], [], []
    for col, n in enumerate(basis.indices):
        t = list(n)
        t[var] += step
        if t[var] < 0 or sum(t) > basis.degree:
            continue
        rows.append(basis.position(tuple(t)))
        cols.append(col)
        occ.append(n[var])
    return np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(occ, dtype=float)


def _shift_op(basis: Basis, var: int, step: int, coef) -> sp.csr_matrix:
    rows, cols, occ = _shift(basis, var, step)
    return sp.csr_matrix((coef(occ).astype(complex), (rows, cols)), shape=(basis.size, basis.size))


# --------------------------------------------------------------------------
# Hermite side


def _need(basis: Basis, kind: str):
    if basis.kind != kind:
        raise BasisMismatch(f"expected a {kind} basis, got {basis.kind}")


def position_op(basis: Basis, a: int, hbar: float) -> LinearOperator:
    """Multiplication by q_a."""
    _need(basis, "hermite")
    c = np.sqrt(hbar / 2)
    m = _shift_op(basis, a, 1, lambda n: c * np.sqrt(n + 1)) + _shift_op(basis, a, -1, lambda n: c * np.sqrt(n))
    return LinearOperator(m, basis, 1)


def derivative_op(basis: Basis, a: int, hbar: float) -> LinearOperator:
    """d/dq_a."""
    _need(basis, "hermite")
    c = 1 / np.sqrt(2 * hbar)
    m = _shift_op(basis, a, -1, lambda n: c * np.sqrt(n)) - _shift_op(basis, a, 1, lambda n: c * np.sqrt(n + 1))
    return LinearOperator(m, basis, 1)


def md_operators(j: int, kind: str, basis: Basis, level: Level) -> LinearOperator:
    """M_j = q_j + i q_{j+r}, D_j = (d_j + i d_{j+r})/|t| and their conjugates (0-based j < r)."""
    r, hb = basis.rank, level.hbar
    if not 0 <= j < r:
        raise IndexError(j)
    sgn = -1 if kind in ("Mbar", "Dbar") else 1
    if kind in ("M", "Mbar"):
        return position_op(basis, j, hb) + sgn * 1j * position_op(basis, r + j, hb)
    if kind in ("D", "Dbar"):
        return hb * (derivative_op(basis, j, hb) + sgn * 1j * derivative_op(basis, r + j, hb))
    raise ValueError(kind)


def rotation_q(j: int, basis: Basis, hbar: float) -> LinearOperator:
    """q_{j+r} d/dq_j - q_j d/dq_{j+r}.

    Degree preserving; assembled one degree higher so that the intermediate
    degree N+1 components are not lost to truncation.
    """
    r = basis.rank
    big = Basis(basis.kind, basis.rank, basis.degree + 1)
    full = (position_op(big, r + j, hbar) @ derivative_op(big, j, hbar)
            - position_op(big, j, hbar) @ derivative_op(big, r + j, hbar))
    keep = np.array([big.position(idx) for idx in basis.indices])
    return LinearOperator(full.matrix[keep][:, keep].tocsr(), basis, 0)


def linear_hermite_op(basis: Basis, hbar: float, direction, multiplier) -> LinearOperator:
    """sum_b direction_b d/dq_b + sum_b multiplier_b q_b."""
    out = None
    for b in range(basis.nvars):
        term = direction[b] * derivative_op(basis, b, hbar) + multiplier[b] * position_op(basis, b, hbar)
        out = term if out is None else out + term
    return out


# --------------------------------------------------------------------------
# Fock and extended side


def _zvar(basis: Basis, a: int, conj: bool) -> int:
    if basis.kind == "hermite":
        raise BasisMismatch("holomorphic operators need a fock or extended basis")
    if conj:
        if basis.kind != "extended":
            raise BasisMismatch("zbar operators need the extended basis")
        return basis.nvars + a
    return a


def mult_z(basis: Basis, a: int, conj: bool = False) -> LinearOperator:
    v = _zvar(basis, a, conj)
    return LinearOperator(_shift_op(basis, v, 1, lambda n: np.ones_like(n)), basis, 1)


def d_z(basis: Basis, a: int, conj: bool = False) -> LinearOperator:
    v = _zvar(basis, a, conj)
    return LinearOperator(_shift_op(basis, v, -1, lambda n: n), basis, 0)


def ladder(j: int, kind: str, basis: Basis, level: Level) -> LinearOperator:
    """a*_j = z_j (create) and a_j = 2 hbar d/dz_j (annihilate), 0-based j < 2r."""
    if not 0 <= j < basis.nvars:
        raise IndexError(j)
    if kind == "create":
        return mult_z(basis, j)
    if kind == "annihilate":
        return 2 * level.hbar * d_z(basis, j)
    raise ValueError(kind)


def mudelta_operators(j: int, kind: str, basis: Basis, level: Level) -> LinearOperator:
    """mu_j = z_j + i z_{j+r}, delta_j = 2 hbar (d_j + i d_{j+r}); 'bar' kinds flip the sign of i."""
    r = basis.rank
    if not 0 <= j < r:
        raise IndexError(j)
    sgn = -1 if kind.endswith("bar") else 1
    if kind in ("mu", "mubar"):
        return mult_z(basis, j) + sgn * 1j * mult_z(basis, r + j)
    if kind in ("delta", "deltabar"):
        return 2 * level.hbar * (d_z(basis, j) + sgn * 1j * d_z(basis, r + j))
    raise ValueError(kind)


def rotation_z(j: int, basis: Basis) -> LinearOperator:
    """z_{j+r} d/dz_j - z_j d/dz_{j+r}."""
    r = basis.rank
    return mult_z(basis, r + j) @ d_z(basis, j) - mult_z(basis, j) @ d_z(basis, r + j)


# --------------------------------------------------------------------------
# prequantum covariant derivatives


def nabla_z(basis: Basis, a: int, level: Level) -> LinearOperator:
    """Covariant derivative along d/dz_a in the sigma trivialisation: d_a - zbar_a / (2 hbar)."""
    _need(basis, "extended")
    return d_z(basis, a) - mult_z(basis, a, conj=True) * (1 / (2 * level.hbar))


def nabla_zbar(basis: Basis, a: int, level: Level) -> LinearOperator:
    _need(basis, "extended")
    return d_z(basis, a, conj=True)


def prequantum_derivative(vector, section: Section, tau: TeichmullerPoint | None = None) -> Section:
    """nabla_X of an extended section for a constant (complex) vector X in the (u, v) chart."""
    basis = section.basis
    if basis.kind == "fock":
        from .sections import embed_fock
        section = embed_fock(section)
        basis = section.basis
    tau = section.tau if tau is None else tau
    if section.effective_degree() > basis.degree - 1:
        raise DegreeOverflow("need one degree of headroom")
    return nabla_vector(vector, basis, tau, section.level).apply(section)


def nabla_vector(vector, basis: Basis, tau: TeichmullerPoint, level: Level) -> LinearOperator:
    dz = fr.complex_coframe(tau, level, basis.rank)
    X = np.asarray(vector, dtype=complex)
    a_hol = dz @ X
    a_anti = np.conj(dz) @ X
    out = None
    for a in range(basis.nvars):
        term = a_hol[a] * nabla_z(basis, a, level) + a_anti[a] * nabla_zbar(basis, a, level)
        out = term if out is None else out + term
    return out


def a0_nabla(vector, basis: Basis, tau: TeichmullerPoint, level: Level) -> LinearOperator:
    """psi -> (nabla_X (psi rho)) / rho on A_0, for a constant complex vector X in A_0 tensor C.

    The section lives on A_0 in the trivialisation with connection
    d - (i k/2) omega(u, .); psi is a function of q = Q u and rho is
    exp(-(i|t|/2) p.q) with p = P u.
    """
    _need(basis, "hermite")
    P, Q = _a0_chart(tau, level, basis.rank)
    Qi = np.linalg.inv(Q)
    X = np.asarray(vector, dtype=complex)
    Om = fr.symplectic_A0(basis.rank)
    ell_u = -0.5j * level.abs_t * (Q.T @ (P @ X) + P.T @ (Q @ X)) - 0.5j * level.k * (Om @ X)
    return linear_hermite_op(basis, level.hbar, Q @ X, Qi.T @ ell_u)


def _a0_chart(tau, level, rank):
    C = fr.coframe(tau, level, rank)
    n = 2 * rank
    return C[:n, :n], C[n:, :n]


# --------------------------------------------------------------------------
# Laplacians


def laplacian_G(direction: str, side: str, tau: TeichmullerPoint, level: Level, basis: Basis,
                route: str = "generic") -> LinearOperator:
    """Trace-Laplacians of the tau-variation tensors.

    side="holo": Delta_{G^C(V)} on the extended basis.  The generic route
    contracts G^C(V) (obtained by differentiating the inverse hyperkaehler
    metric numerically and keeping the (2,0) part) with the prequantum
    derivatives; route="closed" uses the displayed tensor.

    side="real": Delta_{G(V)} (V = d_tau) or Delta_{Gbar(V)} (V = d_tau_bar)
    on the Hermite basis over A_0, built from the A_0 covariant derivatives.
    """
    r = basis.rank
    if side == "holo":
        _need(basis, "extended")
        if route == "generic":
            d, db = fr.wirtinger_fd(lambda T: np.linalg.inv(fr.build_structures(T, level, r).hyperkahler_metric), tau)
            var = -(d if direction == "d_tau" else db)
            G = fr.type_20_part(var, tau, level, r)
        else:
            G = fr.G_complex_z(tau, level, r, direction)
        nab = [nabla_z(basis, a, level) for a in range(2 * r)]
        out = None
        for a in range(2 * r):
            for b in range(2 * r):
                if abs(G[a, b]) < 1e-15:
                    continue
                term = G[a, b] * (nab[a] @ nab[b])
                out = term if out is None else out + term
        return out
    if side == "real":
        _need(basis, "hermite")
        if route == "generic":
            d, db = fr.wirtinger_fd(lambda T: fr.inverse_metric_A0(T, r), tau)
            var = -(d if direction == "d_tau" else db)
        else:
            var = fr.G_tilde(tau, r, direction)
        # a flat metric: Delta = sum_ab G^{ab} nabla_a nabla_b over the coordinate vectors of A_0
        E = np.eye(2 * r)
        nab = [a0_nabla(E[:, a], basis, tau, level) for a in range(2 * r)]
        out = None
        for a in range(2 * r):
            for b in range(2 * r):
                if abs(var[a, b]) < 1e-15:
                    continue
                term = var[a, b] * (nab[a] @ nab[b])
                out = term if out is None else out + term
        return out
    raise ValueError(side)


# --------------------------------------------------------------------------
# connection potentials


_CACHE: dict = {}
_CACHE_LOCK = Lock()


@dataclass(frozen=True, eq=False)
class ConnectionPotential:
    kind: str
    direction: str
    op: LinearOperator
    tau: TeichmullerPoint
    level: Level
    form: str = "transport"


def _cached(key, build):
    with _CACHE_LOCK:
        hit = _CACHE.get(key)
    if hit is not None:
        return hit
    val = build()
    with _CACHE_LOCK:
        if len(_CACHE) > 4096:
            _CACHE.clear()
        _CACHE[key] = val
    return val


def hw_potential(direction: str, tau: TeichmullerPoint, level: Level, basis: Basis, form: str = "transport") -> LinearOperator:
    """Hitchin-Witten potential on the Hermite basis.

    form="explicit":  fixed-point derivative form, (it/8 tbar tau2) sum(tbar D^2 - 2|t| M D + tbar M^2)
    form="extension": value after polarised extension to Q, (it/8 tau2) sum(D^2 + M^2)
    form="transport": coefficient form, -(1/4 tau2) sum R_q + (it/8 tau2) sum(D^2 + M^2)
    The d_tau_bar versions of the last two follow from t -> tbar and
    M, D -> Mbar, Dbar.  In the explicit form the M D cross term changes sign
    as well, because the motion of q in tau-bar is the complex conjugate of its
    motion in tau.
    """
    r, t2, hb = basis.rank, tau.tau2, level.hbar
    if direction == "d_tau":
        t, tb, Mk, Dk = level.t, np.conj(level.t), "M", "D"
    elif direction == "d_tau_bar":
        t, tb, Mk, Dk = np.conj(level.t), level.t, "Mbar", "Dbar"
    else:
        raise ValueError(direction)
    out = None
    for j in range(r):
        M = md_operators(j, Mk, basis, level)
        D = md_operators(j, Dk, basis, level)
        if form == "explicit":
            cross = -2 if direction == "d_tau" else 2
            term = (1j * t / (8 * tb * t2)) * (tb * (D @ D) + cross * level.abs_t * (M @ D) + tb * (M @ M))
        elif form in ("extension", "transport"):
            term = (1j * t / (8 * t2)) * (D @ D + M @ M)
            if form == "transport":
                term = term - (1 / (4 * t2)) * rotation_q(j, basis, hb)
        else:
            raise ValueError(form)
        out = term if out is None else out + term
    return out


def l2_potential(direction: str, tau: TeichmullerPoint, level: Level, basis: Basis) -> LinearOperator:
    """L^2 potential on the Fock basis, coefficient form.

    d_tau: -(i/16 tau2) sum(t delta^2 + t mu^2 - 4i z_{j+r} d_j + 4i z_j d_{j+r});
    d_tau_bar: the same with t -> tbar, mu, delta -> mubar, deltabar.
    """
    r, t2 = basis.rank, tau.tau2
    if direction == "d_tau":
        t, mk, dk = level.t, "mu", "delta"
    elif direction == "d_tau_bar":
        t, mk, dk = np.conj(level.t), "mubar", "deltabar"
    else:
        raise ValueError(direction)
    out = None
    for j in range(r):
        mu = mudelta_operators(j, mk, basis, level)
        de = mudelta_operators(j, dk, basis, level)
        term = (-1j * t / (16 * t2)) * (de @ de + mu @ mu) - (1 / (4 * t2)) * rotation_z(j, basis)
        out = term if out is None else out + term
    return out


def connection_potential(kind: str, direction: str, tau: TeichmullerPoint, level: Level, basis: Basis,
                         form: str = "transport") -> ConnectionPotential:
    key = (kind, direction, tau, level, basis, form)

    def build():
        if kind == "HW":
            op = hw_potential(direction, tau, level, basis, form)
        elif kind == "L2":
            op = l2_potential(direction, tau, level, basis)
        elif kind == "CH":
            op = ch_potential_generic(direction, tau, level, basis)
        else:
            raise ValueError(kind)
        return ConnectionPotential(kind, direction, op, tau, level, form)

    return _cached(key, build)


# --------------------------------------------------------------------------
# generic assemblies (independent of the closed forms above)


def chart_motion_fock(direction: str, tau: TeichmullerPoint, level: Level, basis: Basis) -> LinearOperator:
    """Extended-basis operator for V[f sigma]/sigma - (coefficient derivative) at fixed x.

    The moving coordinates z(x, tau) and the frame sigma_tau = exp(-|z|^2/4hbar)
    (up to a constant) both depend on tau; this is their contribution.
    """
    _need(basis, "extended")
    r = basis.rank
    n = 2 * r
    F = fr.build_frames(tau, level, r).matrix
    d, db = fr.wirtinger_fd(lambda T: fr.complex_coframe(T, level, r), tau)
    dzdt = d if direction == "d_tau" else db          # rows: V[z_a] as covectors on x
    dzbdt = np.conj(db) if direction == "d_tau" else np.conj(d)
    # x = F (p, q), p = (z + zbar)/2, q = (z - zbar)/(2i): x = Lz z + Lzb zbar
    Lz = F @ np.vstack([0.5 * np.eye(n), -0.5j * np.eye(n)])
    Lzb = F @ np.vstack([0.5 * np.eye(n), 0.5j * np.eye(n)])
    Z = [mult_z(basis, a) for a in range(n)]
    Zb = [mult_z(basis, a, conj=True) for a in range(n)]

    def linear(row):
        cz, czb = row @ Lz, row @ Lzb
        out = None
        for a in range(n):
            term = cz[a] * Z[a] + czb[a] * Zb[a]
            out = term if out is None else out + term
        return out

    zdot = [linear(dzdt[a]) for a in range(n)]
    zbdot = [linear(dzbdt[a]) for a in range(n)]
    out = None
    for a in range(n):
        term = (zdot[a] @ d_z(basis, a) + zbdot[a] @ d_z(basis, a, conj=True)
                - (1 / (4 * level.hbar)) * (zdot[a] @ Zb[a] + Z[a] @ zbdot[a]))
        out = term if out is None else out + term
    return out


def ch_potential_generic(direction: str, tau: TeichmullerPoint, level: Level, basis: Basis) -> LinearOperator:
    """Complexified Hitchin potential on the extended basis: chart motion + Delta_{G^C(V)} / (4|t|)."""
    lap = laplacian_G(direction, "holo", tau, level, basis, route="generic")
    return chart_motion_fock(direction, tau, level, basis) + lap * (1 / (4 * level.abs_t))


def chart_motion_a0(direction: str, tau: TeichmullerPoint, level: Level, basis: Basis) -> LinearOperator:
    """Hermite-basis operator for V[psi rho]/rho - (coefficient derivative) at a fixed point of A_0."""
    _need(basis, "hermite")
    r = basis.rank

    def chart(T):
        P, Q = _a0_chart(T, level, r)
        return np.concatenate([P, Q])

    d, db = fr.wirtinger_fd(chart, tau)
    dv = d if direction == "d_tau" else db
    n = 2 * r
    P, Q = _a0_chart(tau, level, r)
    Qi = np.linalg.inv(Q)
    dP, dQ = dv[:n] @ Qi, dv[n:] @ Qi    # V[p], V[q] as linear maps of q
    # V[q] . grad psi
    out = None
    for b in range(n):
        lin = linear_hermite_op(basis, level.hbar, np.zeros(n), dQ[b])
        term = lin @ derivative_op(basis, b, level.hbar)
        out = term if out is None else out + term
    # V[log rho] = -(i|t|/2) (V[p].q + p.V[q]), a quadratic form in q
    Pq = P @ Qi
    W = -0.5j * level.abs_t * (dP + Pq.T @ dQ)
    pos = [position_op(basis, a, level.hbar) for a in range(n)]
    for a in range(n):
        for b in range(n):
            if abs(W[a, b]) > 1e-15:
                out = out + W[a, b] * (pos[a] @ pos[b])
    return out


def hw_potential_generic(direction: str, tau: TeichmullerPoint, level: Level, basis: Basis,
                         form: str = "transport") -> LinearOperator:
    """HW potential from the covariant-derivative definition over A_0.

    nabla_tau = d/dtau - (i / 2 t tau2) sum nabla_{Xbar_j}^2 and the conjugate
    formula for tau-bar, with script-X vectors and prequantum derivatives
    assembled numerically.  form="explicit" omits the chart motion of q but
    keeps the derivative of rho; form="transport" includes everything.
    """
    r = basis.rank
    X = fr.script_x_vectors(tau, r)
    if direction == "d_tau":
        vecs, coef = np.conj(X), -1j / (2 * level.t * tau.tau2)
    else:
        vecs, coef = X, -1j / (2 * np.conj(level.t) * tau.tau2)
    out = None
    for j in range(r):
        nab = a0_nabla(vecs[:, j], basis, tau, level)
        term = coef * (nab @ nab)
        out = term if out is None else out + term
    motion = chart_motion_a0(direction, tau, level, basis)
    if form == "explicit":
        motion = motion - _q_motion(direction, tau, level, basis)
    return out + motion


def _q_motion(direction, tau, level, basis):
    r = basis.rank
    n = 2 * r

    def qmap(T):
        return _a0_chart(T, level, r)[1]

    d, db = fr.wirtinger_fd(qmap, tau)
    dQ = (d if direction == "d_tau" else db) @ np.linalg.inv(_a0_chart(tau, level, r)[1])
    out = None
    for b in range(n):
        term = linear_hermite_op(basis, level.hbar, np.zeros(n), dQ[b]) @ derivative_op(basis, b, level.hbar)
        out = term if out is None else out + term
    return out


def curvature(pot_tau, pot_taubar, tau: TeichmullerPoint, h: float = 1e-3) -> np.ndarray:
    """d_tau A_taubar - d_taubar A_tau + [A_tau, A_taubar] for callables T -> dense matrix."""
    dA_bar, _ = fr.wirtinger_fd(pot_taubar, tau, h)
    _, dbA = fr.wirtinger_fd(pot_tau, tau, h)
    A, Ab = pot_tau(tau), pot_taubar(tau)
    return dA_bar - dbA + A @ Ab - Ab @ A


# --------------------------------------------------------------------------
# the HW potential on Gaussian sums over A_0, and dual connections


@dataclass(frozen=True, eq=False)
class PolyGaussianSum:
    """sum_n p_n(u) exp(-u.A_n.u/2 + b_n.u + c_n) with p_n(u) = u.Qp_n.u + lp_n.u + cp_n."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    Qp: np.ndarray
    lp: np.ndarray
    cp: np.ndarray

    @classmethod
    def from_gaussians(cls, psi) -> "PolyGaussianSum":
        n, m = psi.b.shape
        return cls(psi.A, psi.b, psi.c, np.zeros((n, m, m), complex), np.zeros((n, m), complex),
                   np.ones(n, complex))

    @property
    def has_polynomial(self) -> bool:
        return bool(np.any(self.Qp) or np.any(self.lp))

    def __call__(self, u) -> np.ndarray:
        u = np.atleast_2d(u)
        quad = np.einsum("pi,nij,pj->pn", u, self.A, u)
        env = np.exp(-0.5 * quad + u @ self.b.T + self.c[None, :])
        poly = np.einsum("pi,nij,pj->pn", u, self.Qp, u) + u @ self.lp.T + self.cp[None, :]
        return (poly * env).sum(axis=1)

    def conj(self) -> "PolyGaussianSum":
        return PolyGaussianSum(*(np.conj(a) for a in (self.A, self.b, self.c, self.Qp, self.lp, self.cp)))


def _as_poly(psi) -> PolyGaussianSum:
    return psi if isinstance(psi, PolyGaussianSum) else PolyGaussianSum.from_gaussians(psi)


def hw_gaussian_potential(psi, direction: str, tau: TeichmullerPoint, level: Level) -> PolyGaussianSum:
    """The potential term of nabla^HW_V applied to a Gaussian sum on A_0.

    nabla^HW_V Psi = V[Psi] + (this term); for d_tau it is
    -(i / 2 t tau2) sum_j nabla_{Xbar_j}^2 Psi, and the conjugate formula for d_tau_bar.
    Uses nabla_X e^G = (lam.u + beta) e^G with lam = -A X - (ik/2) Omega X, beta = b.X.
    """
    psi = _as_poly(psi)
    if psi.has_polynomial:
        raise BasisMismatch("the closed form applies to plain Gaussian sums")
    m = psi.b.shape[1]
    r = m // 2
    X = fr.script_x_vectors(tau, r)
    Om = fr.symplectic_A0(r)
    w, wb = fr.direction_weights(direction)
    n = len(psi.c)
    Qp = np.zeros((n, m, m), complex)
    lp = np.zeros((n, m), complex)
    cp = np.zeros(n, complex)
    parts = [(w, np.conj(X), -1j / (2 * level.t * tau.tau2)),
             (wb, X, -1j / (2 * np.conj(level.t) * tau.tau2))]
    for weight, vecs, coef in parts:
        if weight == 0:
            continue
        for j in range(r):
            x = vecs[:, j]
            lam = -psi.A @ x - 0.5j * level.k * (Om @ x)[None, :]
            beta = psi.b @ x
            f = weight * coef
            Qp += f * np.einsum("ni,nj->nij", lam, lam)
            lp += f * 2 * beta[:, None] * lam
            cp += f * (beta**2 + lam @ x)
    return PolyGaussianSum(psi.A, psi.b, psi.c, Qp, lp, cp)


def gaussian_pairing(F, G) -> complex:
    """(F | G) = integral over A_0 of F conj(G) du, in closed form.

    At most one of F, G may carry a polynomial factor.
    """
    F, G = _as_poly(F), _as_poly(G)
    if F.has_polynomial and G.has_polynomial:
        raise BasisMismatch("at most one factor may carry a polynomial")
    Gc = G.conj()
    M = F.A[:, None] + Gc.A[None, :]
    wv = F.b[:, None] + Gc.b[None, :]
    c0 = F.c[:, None] + Gc.c[None, :]
    m = M.shape[-1]
    herm = 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))
    if np.linalg.eigvalsh(herm).min() <= 0:
        raise PairingDiverged("the product of the two Gaussians does not decay in every direction")
    Minv = np.linalg.inv(M)
    mu = np.einsum("fgij,fgj->fgi", Minv, wv)
    lam = np.linalg.eigvals(M)
    sqrt_det = np.prod(np.sqrt(lam), axis=-1)
    Z = (2 * np.pi) ** (m / 2) / sqrt_det * np.exp(0.5 * np.einsum("fgi,fgi->fg", wv, mu) + c0)
    if F.has_polynomial:
        Qp, lp, cp = F.Qp[:, None], F.lp[:, None], F.cp[:, None]
    else:
        Qp, lp, cp = Gc.Qp[None, :], Gc.lp[None, :], Gc.cp[None, :]
    Qp = np.broadcast_to(Qp, M.shape)
    moment = (np.einsum("fgij,fgji->fg", Qp, Minv) + np.einsum("fgi,fgij,fgj->fg", mu, Qp, mu)
              + np.einsum("fgi,fgi->fg", np.broadcast_to(lp, mu.shape), mu) + np.broadcast_to(cp, Z.shape))
    val = np.sum(moment * Z)
    if not np.isfinite(val):
        raise PairingDiverged("Gaussian pairing is not finite")
    return complex(val)


def _family(obj):
    return obj if callable(obj) and not hasattr(obj, "A") and not isinstance(obj, Section) else (lambda tau: obj)


def _hw_pair(T, psi) -> complex:
    """(T | psi) for T a Gaussian sum or a position point evaluation, psi a (poly-)Gaussian sum."""
    if isinstance(T, tuple) and T[0] == "point":
        return complex(np.conj(_as_poly(psi)(np.asarray(T[1], float))[0]))
    return gaussian_pairing(T, psi)


def dual_apply(kind: str, T, test, direction: str, tau: TeichmullerPoint, level: Level,
               h: float = 1e-3) -> complex:
    """(dual nabla_V T | test) = V[(T | test)] - (T | nabla_V test).

    kind "dualHW": T is a Gaussian sum on A_0 (or a tau -> Gaussian sum family, or
    ("point", u0) for evaluation at u0); test is a Schwartz Gaussian sum or a family.
    kind "dualCH": T is a Fock-side DualElement (or a family of them); test is a
    FockSection whose z-coefficients are held fixed, so its delta-derivatives vanish.
    """
    T_of = _family(T)
    if kind == "dualHW":
        test_of = _family(test)
        total = fr.tau_derivative(lambda s: _hw_pair(T_of(s), test_of(s)), tau, direction, h)
        own = fr.tau_derivative(lambda s: _hw_pair(T_of(tau), test_of(s)), tau, direction, h)
        pot = hw_gaussian_potential(test_of(tau), direction, tau, level)
        return complex(total - own - _hw_pair(T_of(tau), pot))
    if kind == "dualCH":
        from .bargmann import pair
        if not isinstance(test, Section) or test.basis.kind != "fock":
            raise BasisMismatch("dualCH tests are Fock sections")

        def test_at(s):
            return make_section("fock", test.rank, test.degree, s, level, test.coeffs)

        total = fr.tau_derivative(lambda s: pair(T_of(s), test_at(s)), tau, direction, h)
        w, wb = fr.direction_weights(direction)
        A = None
        for weight, d in ((w, "d_tau"), (wb, "d_tau_bar")):
            if weight != 0:
                term = connection_potential("CH", d, tau, level, test.basis).op * weight
                A = term if A is None else A + term
        return complex(total - pair(T_of(tau), A.apply(test_at(tau))))
    raise ValueError(kind)


def hw_direct_pairing(T, test, direction: str, tau: TeichmullerPoint, level: Level,
                      h: float = 1e-3) -> complex:
    """(nabla^HW_V T | test) with nabla^HW applied to the Gaussian-sum family T itself."""
    T_of = _family(T)
    deriv = fr.tau_derivative(lambda s: gaussian_pairing(T_of(s), test), tau, direction, h)
    return complex(deriv + gaussian_pairing(hw_gaussian_potential(T_of(tau), direction, tau, level), test))

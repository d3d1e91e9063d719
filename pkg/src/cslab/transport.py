"""Parallel transport, holonomy, delta-derivatives and the modular group action.

Transport integrates covariant constancy in coefficient form,
``dc/ds = -A_{gamma'(s)} c``, with classical fourth-order Runge-Kutta steps
on straight segments between waypoints of the upper half plane.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from . import frames as fr
from . import quantops as qo
from .errors import ConfigError, DegreeOverflow, StepUnstable
from .frames import Level, TeichmullerPoint
from .sections import Basis, Section, antiholomorphic_part, make_section, norm, require_headroom

HEADROOM = 4


# --------------------------------------------------------------------------
# paths


def parse_tau(text: str) -> TeichmullerPoint:
    """Parse "a+bi" (also "a-bi", "bi", "a") into a point of the upper half plane."""
    s = text.strip().replace(" ", "").replace("I", "i").replace("j", "i")
    try:
        return TeichmullerPoint.from_complex(complex(s.replace("i", "j")))
    except ValueError as exc:
        raise ConfigError(f"cannot parse point {text!r}") from exc


@dataclass(frozen=True)
class TeichPath:
    """Piecewise straight path in (tau1, tau2) through the waypoints.

    ``steps`` is the number of integration steps per segment; ``None`` means
    1000 steps per unit of Euclidean length (at least 8 per segment).
    """

    waypoints: tuple
    steps: int | None = None

    def __post_init__(self):
        pts = tuple(p if isinstance(p, TeichmullerPoint) else TeichmullerPoint.from_complex(complex(p))
                    for p in self.waypoints)
        if len(pts) < 2:
            raise ConfigError("a path needs at least two waypoints")
        object.__setattr__(self, "waypoints", pts)
        if self.steps is not None and self.steps < 1:
            raise ConfigError("steps must be positive")

    @classmethod
    def from_string(cls, text: str, steps: int | None = None) -> "TeichPath":
        return cls(tuple(parse_tau(w) for w in text.split(",")), steps)

    @classmethod
    def square_loop(cls, center: TeichmullerPoint, radius: float, steps: int | None = None) -> "TeichPath":
        """Counter-clockwise square with half-side ``radius``, starting at the lower-left corner."""
        c = center.tau
        corners = [c + radius * complex(a, b) for a, b in ((-1, -1), (1, -1), (1, 1), (-1, 1), (-1, -1))]
        return cls(tuple(TeichmullerPoint.from_complex(z) for z in corners), steps)

    @property
    def closed(self) -> bool:
        return abs(self.waypoints[0].tau - self.waypoints[-1].tau) < 1e-12

    def segment_steps(self) -> list:
        out = []
        for a, b in zip(self.waypoints[:-1], self.waypoints[1:]):
            if self.steps is not None:
                out.append(self.steps)
            else:
                out.append(max(8, math.ceil(1000 * abs(b.tau - a.tau))))
        return out

    def reversed(self) -> "TeichPath":
        return TeichPath(tuple(reversed(self.waypoints)), self.steps)

    def scaled_steps(self, factor: int) -> "TeichPath":
        return _FixedStepsPath(self.waypoints, self.steps, tuple(n * factor for n in self.segment_steps()))


@dataclass(frozen=True)
class _FixedStepsPath(TeichPath):
    fixed: tuple = ()

    def segment_steps(self) -> list:
        return list(self.fixed)


# --------------------------------------------------------------------------
# potentials along paths


_KIND_BASIS = {"HW": "hermite", "L2": "fock", "CH": "fock"}


def potential_field(kind: str, level: Level, basis: Basis) -> Callable:
    """tau -> (A_tau, A_taubar) as sparse matrices in coefficient form.

    HW acts on the Hermite basis; L2 and CH on the Fock basis, where CH is
    taken in its closed form (it coincides with L2 there).  On the extended
    basis CH is assembled generically at every point.
    """
    if basis.kind == "extended":
        if kind != "CH":
            raise ConfigError("only CH acts on the extended basis")

        def generic(tau):
            return tuple(qo.ch_potential_generic(d, tau, level, basis).matrix.tocsr() for d in ("d_tau", "d_tau_bar"))

        return generic
    A, Ab = _reference_potentials(kind, level, basis)

    def scaled(tau):
        return A / tau.tau2, Ab / tau.tau2

    return scaled


def _reference_potentials(kind: str, level: Level, basis: Basis):
    """Closed-form potentials at tau = i; they depend on tau only through the factor 1/tau2."""
    if _KIND_BASIS.get(kind) != basis.kind:
        raise ConfigError(f"{kind} transport needs the {_KIND_BASIS.get(kind)} basis, not {basis.kind}")
    ref = TeichmullerPoint(0.0, 1.0)
    build = qo.hw_potential if kind == "HW" else qo.l2_potential
    return (build("d_tau", ref, level, basis).matrix.tocsr(),
            build("d_tau_bar", ref, level, basis).matrix.tocsr())


def _integrate(kind: str, level: Level, basis: Basis, path: TeichPath, C: np.ndarray) -> np.ndarray:
    C = np.array(C, dtype=complex)
    if basis.kind == "extended":
        field = potential_field(kind, level, basis)

        def rhs(z, vel, Y):
            A, Ab = field(TeichmullerPoint.from_complex(z))
            return -(vel * (A @ Y) + np.conj(vel) * (Ab @ Y))
    else:
        A, Ab = _reference_potentials(kind, level, basis)
        cache = {}

        def rhs(z, vel, Y):
            if vel not in cache:
                cache.clear()
                cache[vel] = -(vel * A + np.conj(vel) * Ab)
            return (cache[vel] @ Y) / z.imag

    for (a, b), n in zip(zip(path.waypoints[:-1], path.waypoints[1:]), path.segment_steps()):
        za, vel = a.tau, b.tau - a.tau
        h = 1.0 / n
        for i in range(n):
            z0 = za + i * h * vel
            zm, z1 = z0 + 0.5 * h * vel, z0 + h * vel
            k1 = rhs(z0, vel, C)
            k2 = rhs(zm, vel, C + 0.5 * h * k1)
            k3 = rhs(zm, vel, C + 0.5 * h * k2)
            k4 = rhs(z1, vel, C + h * k3)
            C = C + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return C


def _propagate(kind: str, path: TeichPath, basis: Basis, level: Level, C: np.ndarray,
               tol: float, check: bool):
    out = _integrate(kind, level, basis, path, C)
    change = 0.0
    if check:
        fine = _integrate(kind, level, basis, path.scaled_steps(2), C)
        change = float(np.max(np.abs(fine - out))) if out.size else 0.0
        if change > 10 * tol:
            raise StepUnstable(f"halving the step moved the endpoint by {change:.3e}")
        out = fine
    return out, change


@dataclass(frozen=True, eq=False)
class TransportResult:
    section: Section
    norm_drift: float
    step_change: float


def transport(kind: str, path: TeichPath, initial: Section, tol: float = 1e-8, check: bool = True,
              headroom: int = HEADROOM, negligible: float = 1e-10) -> TransportResult:
    """Parallel transport of ``initial`` (living at the first waypoint) along ``path``.

    With ``check`` the integration is repeated at half the step; the finer
    result is returned and StepUnstable is raised if the two differ by more
    than ``10 * tol``.  Coefficients below ``negligible`` times the largest
    one do not count against the degree headroom.
    """
    if abs(initial.tau.tau - path.waypoints[0].tau) > 1e-12:
        raise ConfigError("the initial section must live at the first waypoint")
    require_headroom(initial, headroom, negligible * float(np.max(np.abs(initial.coeffs), initial=0.0)))
    C, change = _propagate(kind, path, initial.basis, initial.level, initial.coeffs[:, None], tol, check)
    end = dataclasses.replace(initial, tau=path.waypoints[-1], coeffs=C[:, 0])
    drift = abs(norm(end) - norm(initial))
    return TransportResult(end, drift, change)


def holonomy(kind: str, loop: TeichPath, basis: Basis, level: Level, block_degree: int | None = None,
             tol: float = 1e-8, check: bool = True) -> np.ndarray:
    """Matrix of transport around a closed loop on the basis vectors of degree <= block_degree.

    Rows and columns are the block's basis vectors; leakage outside the block
    is reported by :func:`holonomy_leakage`.
    """
    if not loop.closed:
        raise ConfigError("holonomy needs a closed loop")
    block = basis.degree - HEADROOM if block_degree is None else block_degree
    if block > basis.degree - HEADROOM:
        raise DegreeOverflow(f"block degree {block} leaves less than {HEADROOM} degrees of headroom")
    cols = np.nonzero(basis.degrees() <= block)[0]
    C0 = np.zeros((basis.size, cols.size), dtype=complex)
    C0[cols, np.arange(cols.size)] = 1
    C, _ = _propagate(kind, loop, basis, level, C0, tol, check)
    return C[cols, :]


def holonomy_defect(H: np.ndarray) -> float:
    """Spectral norm of Hol - Id."""
    return float(np.linalg.norm(H - np.eye(H.shape[0]), 2))


# --------------------------------------------------------------------------
# families and delta-derivatives


@dataclass(frozen=True, eq=False)
class SectionFamily:
    """A rule tau -> Section; coefficients are in the moving basis at each tau.

    ``polarised`` records the claim that each member is polarised (a function
    of q on the position side, holomorphic on the Fock side).
    """

    rule: Callable
    polarised: bool = True

    def __call__(self, tau: TeichmullerPoint) -> Section:
        return self.rule(tau)


def constant_family(section: Section) -> SectionFamily:
    """Coefficients held fixed in the moving basis."""
    return SectionFamily(lambda tau: dataclasses.replace(section, tau=tau))


def polynomial_family(sections: list, tau0: TeichmullerPoint) -> SectionFamily:
    """c(tau) = sum_n c_n (tau - tau0)^n for coefficient vectors c_n taken from ``sections``."""
    base = sections[0]
    coeffs = [s.coeffs for s in sections]

    def rule(tau):
        dz = tau.tau - tau0.tau
        return dataclasses.replace(base, tau=tau, coeffs=sum(c * dz**n for n, c in enumerate(coeffs)))

    return SectionFamily(rule)


def delta_derivative(family: SectionFamily, direction: str, tau: TeichmullerPoint, h: float = 1e-5) -> Section:
    """delta/delta-tau (or tau-bar) of a family at tau.

    The basis functions are functions of the fibre coordinates (q, or z and
    zbar) alone, so differentiating in tau at fixed coordinates is the
    derivative of the coefficient vector.
    """
    c = fr.tau_derivative(lambda s: family(s).coeffs, tau, direction, h)
    return dataclasses.replace(family(tau), coeffs=c)


def fixed_point_derivative(family: SectionFamily, direction: str, tau: TeichmullerPoint) -> Section:
    """V[family] at a fixed point of the chart: delta-derivative plus the motion of the coordinates."""
    sec = family(tau)
    kind = sec.basis.kind
    if kind == "hermite":
        motion = qo.chart_motion_a0(direction, tau, sec.level, sec.basis)
    elif kind == "extended":
        motion = qo.chart_motion_fock(direction, tau, sec.level, sec.basis)
    else:
        raise ConfigError("fixed-point derivatives need the hermite or extended basis")
    d = delta_derivative(family, direction, tau)
    return d.with_coeffs(d.coeffs + motion.apply(sec).coeffs)


def polarisation_residual(section: Section) -> float:
    """Size of the non-polarised part: anti-holomorphic components on the extended basis, else 0."""
    if section.basis.kind == "extended":
        return float(np.max(np.abs(antiholomorphic_part(section)), initial=0.0))
    return 0.0


# --------------------------------------------------------------------------
# the modular group


@dataclass(frozen=True)
class MCGElement:
    matrix: tuple

    def __post_init__(self):
        m = tuple(tuple(int(x) for x in row) for row in self.matrix)
        if len(m) != 2 or any(len(row) != 2 for row in m):
            raise ConfigError("a modular element is a 2x2 integer matrix")
        (a, b), (c, d) = m
        if a * d - b * c != 1:
            raise ConfigError(f"determinant must be 1, got {a * d - b * c}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def S(cls) -> "MCGElement":
        return cls(((0, -1), (1, 0)))

    @classmethod
    def T(cls) -> "MCGElement":
        return cls(((1, 1), (0, 1)))

    @classmethod
    def identity(cls) -> "MCGElement":
        return cls(((1, 0), (0, 1)))

    def inverse(self) -> "MCGElement":
        (a, b), (c, d) = self.matrix
        return MCGElement(((d, -b), (-c, a)))

    def __matmul__(self, other: "MCGElement") -> "MCGElement":
        return MCGElement(tuple(map(tuple, np.array(self.matrix) @ np.array(other.matrix))))


def mcg_act(gamma: MCGElement, tau: TeichmullerPoint) -> TeichmullerPoint:
    (a, b), (c, d) = gamma.matrix
    return TeichmullerPoint.from_complex((a * tau.tau + b) / (c * tau.tau + d))


def a0_action(gamma: MCGElement, rank: int) -> np.ndarray:
    """Linear map of the (u, v) chart induced by gamma.

    On the (dx, dy) components of each Cartan direction it is [[d, c], [b, a]],
    which carries the frames at tau onto the frames at gamma tau and composes
    covariantly: a0_action(g1 @ g2) = a0_action(g1) @ a0_action(g2).
    """
    (a, b), (c, d) = gamma.matrix
    M = np.array([[d, c], [b, a]], dtype=float)
    return np.kron(np.eye(2), np.kron(M, np.eye(rank)))


def rotation_angle(gamma: MCGElement, tau: TeichmullerPoint) -> float:
    """theta with (p, q) at gamma tau of the image point = rotation by theta of (p, q) at tau, per pair (j, j+r)."""
    (a, b), (c, d) = gamma.matrix
    return float(np.angle(c * tau.tau + d))


def section_operator(gamma: MCGElement, tau: TeichmullerPoint, level: Level, basis: Basis) -> np.ndarray:
    """Dense matrix taking coefficients at tau to coefficients at gamma tau.

    The pushed-forward section is psi'(q') = psi(R(-theta) q'), with the
    prequantum lift trivial; both rho and sigma are rotation invariant.
    """
    theta = rotation_angle(gamma, tau)
    gen = None
    for j in range(basis.rank):
        if basis.kind == "hermite":
            g = qo.rotation_q(j, basis, level.hbar)
        elif basis.kind == "fock":
            g = qo.rotation_z(j, basis)
        else:
            raise ConfigError("the modular action is implemented on hermite and fock bases")
        gen = g if gen is None else gen + g
    G = theta * gen.dense()
    U = np.zeros_like(G)
    degs = basis.degrees()
    for n in np.unique(degs):
        idx = np.nonzero(degs == n)[0]
        U[np.ix_(idx, idx)] = sla.expm(G[np.ix_(idx, idx)])
    return U


def mcg_act_section(gamma: MCGElement, section: Section) -> Section:
    U = section_operator(gamma, section.tau, section.level, section.basis)
    return dataclasses.replace(section, tau=mcg_act(gamma, section.tau), coeffs=U @ section.coeffs)


def push_family(gamma: MCGElement, family: SectionFamily) -> SectionFamily:
    """The family tau -> gamma_* family(gamma^-1 tau)."""
    inv = gamma.inverse()
    return SectionFamily(lambda tau: mcg_act_section(gamma, family(mcg_act(inv, tau))), family.polarised)


def gamma_equivariance_residual(kind: str, gamma: MCGElement, tau: TeichmullerPoint, level: Level,
                                basis: Basis) -> float:
    """Max residual of (c tau + d)^(-2) A'(gamma tau) U = U A(tau) - dU/dtau, and the conjugate identity.

    A is the coefficient-form potential, U the section operator of gamma;
    compared on columns with degree headroom.
    """
    (a, b), (c, d) = gamma.matrix
    field = potential_field(kind, level, basis)
    A, Ab = (m.toarray() for m in field(tau))
    A2, Ab2 = (m.toarray() for m in field(mcg_act(gamma, tau)))
    U = section_operator(gamma, tau, level, basis)
    dU, dUb = fr.wirtinger_fd(lambda s: section_operator(gamma, s, level, basis), tau)
    jac = (c * tau.tau + d) ** -2
    lhs1 = jac * A2 @ U
    rhs1 = U @ A - dU
    lhs2 = np.conj(jac) * Ab2 @ U
    rhs2 = U @ Ab - dUb
    return max(qo.residual(lhs1, rhs1, 2, basis), qo.residual(lhs2, rhs2, 2, basis))


# --------------------------------------------------------------------------
# intertwining


def intertwining_residual(family: SectionFamily, tau: TeichmullerPoint, direction: str = "d_tau",
                          headroom: int = HEADROOM, fock_kind: str = "L2") -> float:
    """Max coefficient residual of B(nabla^HW psi) = nabla^L2(B psi) for a Hermite family.

    The left side uses the HW potential assembled from prequantum derivatives
    over A_0; the right side the closed L2 form on the Fock basis, or with
    ``fock_kind="CH"`` the generic complexified Hitchin potential restricted
    to the Fock slice of the extended basis.  Both sides include the
    tau-derivative of the coefficients.
    """
    from .bargmann import bargmann_operator

    sec = family(tau)
    basis, level = sec.basis, sec.level
    require_headroom(sec, headroom)
    B = bargmann_operator(basis, level)
    fock = B.codomain
    dpsi = delta_derivative(family, direction, tau).coeffs
    A_hw = qo._cached(("hw_generic", direction, tau, level, basis),
                      lambda: qo.hw_potential_generic(direction, tau, level, basis, form="transport"))
    lhs = B.matrix @ (dpsi + A_hw.matrix @ sec.coeffs)
    if fock_kind == "L2":
        A_fock = qo.l2_potential(direction, tau, level, fock).matrix
    elif fock_kind == "CH":
        A_fock = qo._cached(("ch_fock", direction, tau, level, fock), lambda: _ch_on_fock(direction, tau, level, fock))
    else:
        raise ConfigError(f"unknown Fock-side connection {fock_kind!r}")
    Bc = B.matrix @ sec.coeffs
    rhs = B.matrix @ dpsi + A_fock @ Bc
    keep = fock.degrees() <= basis.degree - 2
    return float(np.max(np.abs(lhs - rhs)[keep]))


def _ch_on_fock(direction, tau, level, fock):
    ext = Basis("extended", fock.rank, fock.degree)
    pos = [ext.position(n + (0,) * fock.nvars) for n in fock.indices]
    A = qo.ch_potential_generic(direction, tau, level, ext).matrix.tocsr()
    return A[pos][:, pos]


def verify_intertwining(tau: TeichmullerPoint, level: Level, families: list, direction: str = "d_tau") -> dict:
    """Residuals of the intertwining identity over a set of Hermite families at one point."""
    res = [intertwining_residual(f, tau, direction) for f in families]
    return {"tau": [tau.tau1, tau.tau2], "level": [level.k, level.s], "residuals": res,
            "max_residual": max(res) if res else 0.0}

"""Linear geometry of the model space A_0^C = R^{4r} as a function of tau.

Coordinates on R^{4r} are ``x = (u_1..u_{2r}, v_1..v_{2r})`` with complex
coordinate ``w = u + i v``.  For an orthonormal basis ``T_1..T_r`` of the
Cartan subalgebra, index ``j`` (0-based, ``j < r``) is the ``dx``-component of
``T_j`` and index ``r + j`` its ``dy``-component.

Every structure here is translation invariant, so it is a constant matrix.
Bilinear forms act as ``a @ M @ b``; endomorphisms act on column vectors.
Derivatives in tau use the Wirtinger convention
``d/dtau = (d/dtau1 - i d/dtau2) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, NotDifferentiable, SingularFrame

TAU2_MIN = 1e-9


@dataclass(frozen=True)
class TeichmullerPoint:
    tau1: float
    tau2: float

    def __post_init__(self):
        if not np.isfinite(self.tau1) or not np.isfinite(self.tau2):
            raise ConfigError("tau must be finite")
        if self.tau2 <= TAU2_MIN:
            raise ConfigError(f"tau2 must exceed {TAU2_MIN}, got {self.tau2}")
        object.__setattr__(self, "tau1", float(self.tau1))
        object.__setattr__(self, "tau2", float(self.tau2))

    @classmethod
    def from_complex(cls, tau: complex) -> "TeichmullerPoint":
        return cls(complex(tau).real, complex(tau).imag)

    @property
    def tau(self) -> complex:
        return complex(self.tau1, self.tau2)


@dataclass(frozen=True)
class Level:
    k: int
    s: float = 0.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "s", float(self.s))

    @property
    def t(self) -> complex:
        return complex(self.k, self.s)

    @property
    def abs_t(self) -> float:
        return float(np.hypot(self.k, self.s))

    @property
    def hbar(self) -> float:
        return 1.0 / self.abs_t


def hodge_matrix(tau: TeichmullerPoint) -> np.ndarray:
    """Hodge star on coefficient pairs (a, b) of a dx + b dy."""
    t1, t2 = tau.tau1, tau.tau2
    return np.array([[t1, -1.0], [t1 * t1 + t2 * t2, -t1]]) / t2


def hodge_star(tau: TeichmullerPoint, form) -> np.ndarray:
    """Apply the Hodge star to a (dx, dy) coefficient pair, or a (2, ...) stack of them."""
    form = np.asarray(form)
    return np.tensordot(hodge_matrix(tau), form, axes=(1, 0))


def _blocks(rank: int, m2: np.ndarray) -> np.ndarray:
    """Lift a 2x2 matrix acting on (dx, dy) to the 2r-dimensional space t ⊗ R^2."""
    return np.kron(m2, np.eye(rank))


def complex_structure_J(rank: int) -> np.ndarray:
    n = 2 * rank
    Z = np.zeros((n, n))
    return np.block([[Z, -np.eye(n)], [np.eye(n), Z]])


def symplectic_A0(rank: int) -> np.ndarray:
    """Matrix of sum_j dx_j ^ dy_j on the 2r-dimensional space A_0."""
    return _blocks(rank, np.array([[0.0, 1.0], [-1.0, 0.0]]))


def omega_complex(rank: int) -> np.ndarray:
    """Complex symplectic form sum_j dw_j ^ dw_{r+j}, written on the real chart."""
    n = 2 * rank
    E = np.hstack([np.eye(n), 1j * np.eye(n)])
    return E.T @ symplectic_A0(rank) @ E


def metric_A0(tau: TeichmullerPoint, rank: int) -> np.ndarray:
    """Flat metric g_tau on A_0 induced by the complex structure of the torus."""
    return symplectic_A0(rank) @ _blocks(rank, hodge_matrix(tau))


def inverse_metric_A0(tau: TeichmullerPoint, rank: int) -> np.ndarray:
    return np.linalg.inv(metric_A0(tau, rank))


@dataclass(frozen=True)
class StructureTensors:
    J: np.ndarray
    I_C: np.ndarray
    K: np.ndarray
    I_t: np.ndarray
    omega_t: np.ndarray
    g_t: np.ndarray
    omega_c: np.ndarray

    @property
    def hyperkahler_metric(self) -> np.ndarray:
        """g^C = Re(omega^C) I^C, which does not depend on the level."""
        return np.real(self.omega_c) @ self.I_C


def build_structures(tau: TeichmullerPoint, level: Level, rank: int) -> StructureTensors:
    n = 2 * rank
    H = _blocks(rank, hodge_matrix(tau))
    Z = np.zeros((n, n))
    I_C = np.block([[H, Z], [Z, -H]])
    J = complex_structure_J(rank)
    K = I_C @ J
    I_t = (level.k * I_C + level.s * K) / level.abs_t
    omega_c = omega_complex(rank)
    omega_t = np.real(level.t * omega_c)
    g_t = omega_t @ I_t
    return StructureTensors(J=J, I_C=I_C, K=K, I_t=I_t, omega_t=omega_t,
                            g_t=0.5 * (g_t + g_t.T), omega_c=omega_c)


@dataclass(frozen=True)
class FrameSet:
    X: np.ndarray         # 4r x 2r, columns X_j spanning P_tau
    Y: np.ndarray         # 4r x 2r, Y_j = I_t X_j
    script_X: np.ndarray  # 4r x r complex, v-part zero

    @property
    def matrix(self) -> np.ndarray:
        """Frame matrix [X | Y]; its inverse maps (u, v) to (p, q)."""
        return np.hstack([self.X, self.Y])


def script_x_vectors(tau: TeichmullerPoint, rank: int) -> np.ndarray:
    """Vectors (T_j dx + tau T_j dy)/sqrt(2 tau2) in A_0 tensor C, as 2r x r columns."""
    out = np.zeros((2 * rank, rank), dtype=complex)
    for j in range(rank):
        out[j, j] = 1.0
        out[rank + j, j] = tau.tau
    return out / np.sqrt(2 * tau.tau2)


def build_frames(tau: TeichmullerPoint, level: Level, rank: int) -> FrameSet:
    S = build_structures(tau, level, rank)
    n = 2 * rank
    X = np.zeros((2 * n, n))
    c = 1.0 / np.sqrt(2 * tau.tau2)
    for j in range(rank):
        X[j, j] = c
        X[rank + j, j] = tau.tau1 * c
        X[n + rank + j, j] = tau.tau2 * c
        X[:, rank + j] = S.J @ X[:, j]
    Y = S.I_t @ X
    sx = np.vstack([script_x_vectors(tau, rank), np.zeros((n, rank))])
    return FrameSet(X=X, Y=Y, script_X=sx)


@lru_cache(maxsize=256)
def _coframe(tau1: float, tau2: float, k: int, s: float, rank: int) -> np.ndarray:
    F = build_frames(TeichmullerPoint(tau1, tau2), Level(k, s), rank).matrix
    if np.linalg.cond(F) > 1e12:
        raise SingularFrame("frame matrix is numerically singular")
    C = np.linalg.inv(F)
    C.setflags(write=False)
    return C


def coframe(tau: TeichmullerPoint, level: Level, rank: int) -> np.ndarray:
    """Matrix C with (p, q) = C x; rows are dp_1..dp_{2r}, dq_1..dq_{2r}."""
    return _coframe(tau.tau1, tau.tau2, level.k, level.s, rank)


def coords_pq(tau: TeichmullerPoint, level: Level, x, rank: int):
    """(u, v) -> (p, q).  Works on a single point or on rows of a (..., 4r) array."""
    x = np.asarray(x)
    pq = x @ coframe(tau, level, rank).T
    n = 2 * rank
    return pq[..., :n], pq[..., n:]


def coords_uv(tau: TeichmullerPoint, level: Level, p, q, rank: int) -> np.ndarray:
    F = build_frames(tau, level, rank).matrix
    return np.concatenate([np.asarray(p), np.asarray(q)], axis=-1) @ F.T


def complex_coframe(tau: TeichmullerPoint, level: Level, rank: int) -> np.ndarray:
    """Rows dz_1..dz_{2r} with z = p + i q, the I_t-holomorphic coordinates."""
    C = coframe(tau, level, rank)
    n = 2 * rank
    return C[:n] + 1j * C[n:]


def z_vector_fields(tau: TeichmullerPoint, level: Level, rank: int) -> np.ndarray:
    """Columns d/dz_a = (X_a - i Y_a)/2 as complex vectors in the real chart."""
    fr = build_frames(tau, level, rank)
    return 0.5 * (fr.X - 1j * fr.Y)


def project_PQ(tau: TeichmullerPoint, level: Level, A, rank: int):
    """(pi_P A, pi_Q A) = ((A - K A)/2, (A + K A)/2)."""
    K = build_structures(tau, level, rank).K
    A = np.asarray(A)
    KA = A @ K.T
    return 0.5 * (A - KA), 0.5 * (A + KA)


# --------------------------------------------------------------------------
# tau-variations, closed forms


def dq_dtau_matrix(tau: TeichmullerPoint, level: Level, rank: int) -> np.ndarray:
    """2r x 4r matrix V with dq/dtau = V @ (p, q) at a fixed point of the chart."""
    n = 2 * rank
    t, at, t2 = level.t, level.abs_t, tau.tau2
    V = np.zeros((n, 2 * n), dtype=complex)
    for j in range(rank):
        a, b = j, rank + j
        V[a, n + b] = -1 / (4 * t2)
        V[a, a] = -t / (4 * t2 * at)
        V[a, b] = -1j * t / (4 * t2 * at)
        V[b, n + a] = 1 / (4 * t2)
        V[b, a] = -1j * t / (4 * t2 * at)
        V[b, b] = t / (4 * t2 * at)
    return V


def G_tilde(tau: TeichmullerPoint, rank: int, direction: str = "d_tau") -> np.ndarray:
    """G~(V) = -V[g_tau^{-1}] on A_0 tensor C."""
    X = script_x_vectors(tau, rank)
    if direction == "d_tau":
        return -(1j / tau.tau2) * np.conj(X) @ np.conj(X).T
    if direction == "d_tau_bar":
        return (1j / tau.tau2) * X @ X.T
    raise ValueError(direction)


def dmetric_A0(tau: TeichmullerPoint, rank: int, direction: str = "d_tau") -> np.ndarray:
    """V[g_tau] in closed form."""
    g = metric_A0(tau, rank)
    X = script_x_vectors(tau, rank)
    if direction == "d_tau":
        gX = g @ np.conj(X)
        return -(1j / tau.tau2) * gX @ gX.T
    gX = g @ X
    return (1j / tau.tau2) * gX @ gX.T


def G_complex_z(tau: TeichmullerPoint, level: Level, rank: int, direction: str = "d_tau") -> np.ndarray:
    """Coefficients of G^C(V) on d/dz_a (x) d/dz_b.

    G^C(V) is the type (2,0) part of -V[(g^C)^{-1}]; the remaining part is of
    type (0,2) and never enters the holomorphic Laplacian.
    """
    if direction not in ("d_tau", "d_tau_bar"):
        raise ValueError(direction)
    sign = 1j if direction == "d_tau" else -1j
    tt = level.t if direction == "d_tau" else np.conj(level.t)
    n = 2 * rank
    Z = np.zeros((n, rank), dtype=complex)
    for j in range(rank):
        Z[j, j], Z[rank + j, j] = 1.0, sign
    return -1j * tt / (tau.tau2 * level.abs_t) * Z @ Z.T


def G_complex_real(tau: TeichmullerPoint, level: Level, rank: int, direction: str = "d_tau") -> np.ndarray:
    """G^C(V) as a 4r x 4r complex bivector in the (u, v) chart."""
    dz = z_vector_fields(tau, level, rank)
    return dz @ G_complex_z(tau, level, rank, direction) @ dz.T


def type_20_part(bivector: np.ndarray, tau: TeichmullerPoint, level: Level, rank: int) -> np.ndarray:
    """Components on d/dz_a (x) d/dz_b of a bivector given in the (u, v) chart."""
    dz = complex_coframe(tau, level, rank)
    return dz @ bivector @ dz.T


# --------------------------------------------------------------------------
# finite-difference oracle


def wirtinger_fd(f, tau: TeichmullerPoint, h: float = 1e-3):
    """Richardson-extrapolated (d/dtau f, d/dtaubar f) for an array-valued f(TeichmullerPoint)."""

    def central(step):
        d1 = (np.asarray(f(TeichmullerPoint(tau.tau1 + step, tau.tau2)))
              - np.asarray(f(TeichmullerPoint(tau.tau1 - step, tau.tau2)))) / (2 * step)
        d2 = (np.asarray(f(TeichmullerPoint(tau.tau1, tau.tau2 + step)))
              - np.asarray(f(TeichmullerPoint(tau.tau1, tau.tau2 - step)))) / (2 * step)
        return d1, d2

    h = min(h, 0.25 * tau.tau2)
    a1, a2 = central(h)
    b1, b2 = central(h / 2)
    d1 = (4 * b1 - a1) / 3
    d2 = (4 * b2 - a2) / 3
    return 0.5 * (d1 - 1j * d2), 0.5 * (d1 + 1j * d2)


def direction_weights(direction: str):
    """(w, wbar) with V = w d/dtau + wbar d/dtaubar for the named tangent direction."""
    table = {"d_tau": (1.0, 0.0), "d_tau_bar": (0.0, 1.0), "d_tau1": (1.0, 1.0), "d_tau2": (1j, -1j)}
    if direction not in table:
        raise ConfigError(f"unknown direction {direction!r}")
    return table[direction]


def tau_derivative(f, tau: TeichmullerPoint, direction: str, h: float = 1e-3, rtol: float = 1e-5):
    """V[f] at tau by Richardson-extrapolated central differences.

    Raises NotDifferentiable when the estimates at steps h and h/2 disagree
    by more than rtol relative to their size.
    """
    w, wb = direction_weights(direction)
    a, ab = wirtinger_fd(f, tau, h)
    b, bb = wirtinger_fd(f, tau, h / 2)
    coarse = w * a + wb * ab
    fine = w * b + wb * bb
    scale = max(1.0, float(np.max(np.abs(fine))))
    if not np.all(np.isfinite(fine)) or np.max(np.abs(fine - coarse)) > rtol * scale:
        raise NotDifferentiable("finite-difference estimates in tau did not converge")
    return fine

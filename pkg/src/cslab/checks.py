"""The verification checks behind ``cslab verify``.

Each check returns ``(residual, inputs)``; ``inputs`` is hashed into the
report so that identical configurations give identical records.
"""

from __future__ import annotations

import numpy as np

from . import bargmann as bg
from . import cartan as ct
from . import frames as fr
from . import quantops as qo
from . import sections as sc
from . import transport as tp
from .frames import Level, TeichmullerPoint
from .suites import check

TIGHT = 1e-12
DIRECTIONS = ("d_tau", "d_tau_bar")


def _maxabs(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def _samples(ctx, n):
    return [(ctx.random_tau(), ctx.random_level()) for _ in range(n)]


def _ins(samples):
    return [[t.tau1, t.tau2, l.k, l.s] for t, l in samples]


# --------------------------------------------------------------------------
# frames: structures


@check("frames", "frames.hodge.tau_i", "Hodge star on (dx, dy) at tau = i", TIGHT)
def _hodge_i(ctx):
    tau = TeichmullerPoint(0.0, 1.0)
    r = max(_maxabs(fr.hodge_star(tau, [1, 0]) - [0, 1]), _maxabs(fr.hodge_star(tau, [0, 1]) - [-1, 0]))
    return r, {}


@check("frames", "frames.hodge.square", "Hodge star squares to -1 on 1-forms", TIGHT)
def _hodge_sq(ctx):
    res = 0.0
    for tau, _ in _samples(ctx, 20):
        H = fr.hodge_matrix(tau)
        res = max(res, _maxabs(H @ H + np.eye(2)))
    return res, {}


@check("frames", "frames.quaternionic", "I^C, J, K satisfy the quaternion relations", TIGHT)
def _quaternion(ctx):
    res, samples = 0.0, _samples(ctx, 50)
    for r in (1, 2):
        E = np.eye(4 * r)
        for tau, lev in samples:
            S = fr.build_structures(tau, lev, r)
            res = max(res, _maxabs(S.I_C @ S.I_C + E), _maxabs(S.J @ S.J + E), _maxabs(S.K @ S.K + E),
                      _maxabs(S.I_C @ S.J - S.K), _maxabs(S.J @ S.I_C + S.K))
    return res, {"samples": _ins(samples)}


@check("frames", "frames.it.square", "I_t is a complex structure", TIGHT)
def _it_sq(ctx):
    res, samples = 0.0, _samples(ctx, 20)
    for r in (1, 2):
        for tau, lev in samples:
            S = fr.build_structures(tau, lev, r)
            res = max(res, _maxabs(S.I_t @ S.I_t + np.eye(4 * r)))
    return res, {"samples": _ins(samples)}


@check("frames", "frames.it.real_level", "I_t reduces to I^C when s = 0", TIGHT)
def _it_s0(ctx):
    res = 0.0
    for r in (1, 2):
        for tau, lev in _samples(ctx, 10):
            S = fr.build_structures(tau, Level(lev.k, 0.0), r)
            res = max(res, _maxabs(S.I_t - S.I_C))
    return res, {}


@check("frames", "frames.gt.positive", "g_t is symmetric positive definite", TIGHT)
def _gt_pos(ctx):
    res = 0.0
    for r in (1, 2):
        for tau, lev in _samples(ctx, 20):
            g = fr.build_structures(tau, lev, r).g_t
            sym = _maxabs(g - g.T)
            mineig = float(np.min(np.linalg.eigvalsh(0.5 * (g + g.T))))
            res = max(res, sym, 0.0 if mineig > 0 else 1.0)
    return res, {}


@check("frames", "frames.omega_t.type11", "omega_t is invariant under I_t", TIGHT)
def _omega11(ctx):
    res = 0.0
    for r in (1, 2):
        for tau, lev in _samples(ctx, 20):
            S = fr.build_structures(tau, lev, r)
            res = max(res, _maxabs(S.I_t.T @ S.omega_t @ S.I_t - S.omega_t))
    return res, {}


@check("frames", "frames.omega_c.type20", "omega^C is of type (2,0) for J", TIGHT)
def _omega20(ctx):
    res = 0.0
    for r in (1, 2):
        S = fr.build_structures(TeichmullerPoint(0.1, 1.1), Level(1, 0.3), r)
        res = max(res, _maxabs(S.J.T @ S.omega_c - 1j * S.omega_c))
    return res, {}


@check("frames", "frames.omega_t.restriction", "omega_t restricted to A_0 is k omega", TIGHT)
def _omega_restr(ctx):
    res = 0.0
    for r in (1, 2):
        n = 2 * r
        for tau, lev in _samples(ctx, 10):
            S = fr.build_structures(tau, lev, r)
            res = max(res, _maxabs(S.omega_t[:n, :n] - lev.k * fr.symplectic_A0(r)))
    return res, {}


@check("frames", "frames.frame.lagrangian", "the real polarisation is Lagrangian", TIGHT)
def _lagrangian(ctx):
    res = 0.0
    for r in (1, 2):
        for tau, lev in _samples(ctx, 20):
            S = fr.build_structures(tau, lev, r)
            X = fr.build_frames(tau, lev, r).X
            res = max(res, _maxabs(X.T @ S.omega_t @ X))
    return res, {}


@check("frames", "frames.frame.symplectic", "(X, Y) pull omega_t/|t| back to sum dp^dq", TIGHT)
def _symplectic(ctx):
    res = 0.0
    for r in (1, 2):
        n = 2 * r
        O = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
        for tau, lev in _samples(ctx, 20):
            S = fr.build_structures(tau, lev, r)
            M = fr.build_frames(tau, lev, r).matrix
            res = max(res, _maxabs(M.T @ S.omega_t @ M / lev.abs_t - O))
    return res, {}


@check("frames", "frames.frame.y_is_it_x", "Y_j = I_t X_j and X_{j+r} = J X_j", TIGHT)
def _y_it_x(ctx):
    res = 0.0
    for r in (1, 2):
        for tau, lev in _samples(ctx, 10):
            S = fr.build_structures(tau, lev, r)
            F = fr.build_frames(tau, lev, r)
            res = max(res, _maxabs(F.Y - S.I_t @ F.X), _maxabs(F.X[:, r:] - S.J @ F.X[:, :r]))
    return res, {}


@check("frames", "frames.script_x.eigen", "the script-X vectors are -i eigenvectors of I_tau on A_0", TIGHT)
def _script_x(ctx):
    res = 0.0
    for r in (1, 2):
        for tau, _ in _samples(ctx, 10):
            H = np.kron(fr.hodge_matrix(tau), np.eye(r))
            X = fr.script_x_vectors(tau, r)
            res = max(res, _maxabs(H @ X + 1j * X))
    return res, {}


@check("frames", "frames.frame.example_tau_i", "X_1 at tau = i, r = 1", TIGHT)
def _frame_example(ctx):
    F = fr.build_frames(TeichmullerPoint(0.0, 1.0), Level(2, 0.0), 1)
    expected = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)
    return _maxabs(F.X[:, 0] - expected), {}


@check("frames", "frames.coords.example", "(p, q) of a unit vector at tau = i, t = 2", TIGHT)
def _coords_example(ctx):
    p, q = fr.coords_pq(TeichmullerPoint(0.0, 1.0), Level(2, 0.0), np.array([1.0, 0, 0, 0]), 1)
    r = max(_maxabs(q - [0, 1 / np.sqrt(2)]), _maxabs(p - [1 / np.sqrt(2), 0]))
    return r, {}


@check("frames", "frames.coords.roundtrip", "(u, v) -> (p, q) -> (u, v) is the identity", TIGHT)
def _roundtrip(ctx):
    res = 0.0
    for r in (1, 2):
        for tau, lev in _samples(ctx, 20):
            x = ctx.rng.normal(size=4 * r)
            p, q = fr.coords_pq(tau, lev, x, r)
            res = max(res, _maxabs(fr.coords_uv(tau, lev, p, q, r) - x))
    return res, {}


@check("frames", "frames.coords.a0_chart", "points of A_0 have p = P u, q = Q u", TIGHT)
def _a0pq(ctx):
    res = 0.0
    for r in (1, 2):
        for tau, lev in _samples(ctx, 10):
            P, Q = sc.a0_chart(tau, lev, r)
            u = ctx.rng.normal(size=2 * r)
            p, q = fr.coords_pq(tau, lev, np.concatenate([u, np.zeros(2 * r)]), r)
            res = max(res, _maxabs(p - P @ u), _maxabs(q - Q @ u))
    return res, {}


@check("frames", "frames.proj.resolution", "pi_P + pi_Q is the identity", TIGHT)
def _proj_sum(ctx):
    res = 0.0
    for r in (1, 2):
        for tau, lev in _samples(ctx, 10):
            A = ctx.rng.normal(size=4 * r)
            a, b = fr.project_PQ(tau, lev, A, r)
            res = max(res, _maxabs(a + b - A))
    return res, {}


@check("frames", "frames.proj.complexified", "(1 -+ iK)/2 are complementary idempotents", TIGHT)
def _proj_idem(ctx):
    res = 0.0
    for r in (1, 2):
        tau, lev = _samples(ctx, 1)[0]
        K = fr.build_structures(tau, lev, r).K
        E = np.eye(4 * r)
        P, Q = 0.5 * (E - 1j * K), 0.5 * (E + 1j * K)
        res = max(res, _maxabs(P @ P - P), _maxabs(Q @ Q - Q), _maxabs(P @ Q))
    return res, {}


@check("frames", "frames.proj.script_x", "pi_Q of the script-X vectors and g_tau(A, script-X)", TIGHT)
def _proj_x(ctx):
    res = 0.0
    for r in (1, 2):
        n = 2 * r
        for tau, lev in _samples(ctx, 10):
            t, at = lev.t, lev.abs_t
            Y = fr.build_frames(tau, lev, r).Y
            X = fr.script_x_vectors(tau, r)
            g = fr.metric_A0(tau, r)
            A = ctx.rng.normal(size=n)
            _, q = fr.coords_pq(tau, lev, np.concatenate([A, np.zeros(n)]), r)
            for j in range(r):
                x = np.concatenate([X[:, j], np.zeros(n)])
                _, px = fr.project_PQ(tau, lev, x, r)
                _, pxb = fr.project_PQ(tau, lev, np.conj(x), r)
                res = max(res,
                          _maxabs(px - (1j * np.conj(t) / (2 * at)) * (Y[:, j] - 1j * Y[:, r + j])),
                          _maxabs(pxb - (-1j * t / (2 * at)) * (Y[:, j] + 1j * Y[:, r + j])),
                          abs(A @ g @ X[:, j] - (1j * np.conj(t) / at) * (q[j] - 1j * q[r + j])),
                          abs(A @ g @ np.conj(X[:, j]) - (-1j * t / at) * (q[j] + 1j * q[r + j])))
    return res, {}


@check("frames", "frames.gtensor.tau_i", "G^C(d_tau) at tau2 = 1 for real t", TIGHT)
def _gc_example(ctx):
    res = 0.0
    for r in (1, 2):
        G = fr.G_complex_z(TeichmullerPoint(0.4, 1.0), Level(3, 0.0), r, "d_tau")
        E = np.zeros((2 * r, 2 * r), complex)
        for j in range(r):
            v = np.zeros(2 * r, complex)
            v[j], v[r + j] = 1, 1j
            E += np.outer(v, v)
        res = max(res, _maxabs(G - (-1j) * E))
    return res, {}


# --------------------------------------------------------------------------
# frames: variations against finite differences


@check("frames", "frames.var.coordinates", "closed-form tau-variation of the q coordinates", "fd")
def _var_coords(ctx):
    res, samples = 0.0, _samples(ctx, 20)
    for r in (1, 2):
        for tau, lev in samples:
            x = ctx.rng.normal(size=4 * r)
            p, q = fr.coords_pq(tau, lev, x, r)
            d, _ = fr.wirtinger_fd(lambda T: fr.coords_pq(T, lev, x, r)[1], tau)
            res = max(res, _maxabs(d - fr.dq_dtau_matrix(tau, lev, r) @ np.concatenate([p, q])))
    return res, {"samples": _ins(samples)}


@check("frames", "frames.var.inverse_metric", "tau-derivatives of the inverse metric on A_0", "fd")
def _var_ginv(ctx):
    res, samples = 0.0, _samples(ctx, 20)
    for r in (1, 2):
        for tau, _ in samples:
            d, db = fr.wirtinger_fd(lambda T: fr.inverse_metric_A0(T, r), tau)
            res = max(res, _maxabs(-d - fr.G_tilde(tau, r, "d_tau")), _maxabs(-db - fr.G_tilde(tau, r, "d_tau_bar")))
    return res, {"samples": _ins(samples)}


@check("frames", "frames.var.metric", "tau-derivatives of the metric on A_0", "fd")
def _var_g(ctx):
    res, samples = 0.0, _samples(ctx, 20)
    for r in (1, 2):
        for tau, _ in samples:
            d, db = fr.wirtinger_fd(lambda T: fr.metric_A0(T, r), tau)
            res = max(res, _maxabs(d - fr.dmetric_A0(tau, r, "d_tau")), _maxabs(db - fr.dmetric_A0(tau, r, "d_tau_bar")))
    return res, {"samples": _ins(samples)}


@check("frames", "frames.var.gtilde_omega", "G-tilde composed with omega_t is |t| times the variation of I_t", "fd")
def _var_gomega(ctx):
    res, samples = 0.0, _samples(ctx, 20)
    for r in (1, 2):
        n = 2 * r
        for tau, lev in samples:
            S = fr.build_structures(tau, lev, r)
            d, _ = fr.wirtinger_fd(lambda T: fr.build_structures(T, lev, r).I_t[:n, :n], tau)
            res = max(res, _maxabs(fr.G_tilde(tau, r, "d_tau") @ S.omega_t[:n, :n] - lev.abs_t * d))
    return res, {"samples": _ins(samples)}


@check("frames", "frames.var.gcomplex", "G^C(V) is the (2,0) part of -V[(g^C)^-1]", "fd")
def _var_gc(ctx):
    res, samples = 0.0, _samples(ctx, 20)
    for r in (1, 2):
        for tau, lev in samples:
            d, db = fr.wirtinger_fd(lambda T: np.linalg.inv(fr.build_structures(T, lev, r).hyperkahler_metric), tau)
            res = max(res,
                      _maxabs(fr.type_20_part(-d, tau, lev, r) - fr.G_complex_z(tau, lev, r, "d_tau")),
                      _maxabs(fr.type_20_part(-db, tau, lev, r) - fr.G_complex_z(tau, lev, r, "d_tau_bar")))
    return res, {"samples": _ins(samples)}


# --------------------------------------------------------------------------
# operators


def _rand_coeffs(ctx, basis, max_degree, holomorphic_only=False):
    mask = basis.degrees() <= max_degree
    if holomorphic_only and basis.kind == "extended":
        m = basis.nvars
        mask &= np.array([not any(i[m:]) for i in basis.indices])
    c = ctx.rng.normal(size=basis.size) + 1j * ctx.rng.normal(size=basis.size)
    return np.where(mask, c, 0)


@check("operators", "operators.ladder.commutator", "[a_j, a*_l] = 2 hbar delta_jl on the Fock basis", TIGHT)
def _ladder_comm(ctx):
    res = 0.0
    lev = ctx.level
    for r, N in ((1, 10), (2, 6)):
        b = sc.Basis("fock", r, N)
        for j in range(2 * r):
            for l in range(2 * r):
                C = qo.commutator(qo.ladder(j, "annihilate", b, lev), qo.ladder(l, "create", b, lev))
                res = max(res, qo.residual(C, qo.identity(b) * (2 * lev.hbar * (j == l)), 2, b))
    return res, {}


@check("operators", "operators.ladder.adjoint", "a*_j and a_j are mutually adjoint", TIGHT)
def _ladder_adj(ctx):
    res = 0.0
    lev = ctx.level
    for r, N in ((1, 10), (2, 6)):
        b = sc.Basis("fock", r, N)
        tau = ctx.random_tau()
        for j in range(2 * r):
            f = sc.make_section("fock", r, N, tau, lev, _rand_coeffs(ctx, b, N - 1))
            g = sc.make_section("fock", r, N, tau, lev, _rand_coeffs(ctx, b, N - 1))
            lhs = sc.inner_product(qo.ladder(j, "create", b, lev).apply(f), g)
            rhs = sc.inner_product(f, qo.ladder(j, "annihilate", b, lev).apply(g))
            res = max(res, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return res, {}


@check("operators", "operators.md.commute", "M_j and D_j commute, mu_j and delta_j commute", TIGHT)
def _md_comm(ctx):
    res = 0.0
    lev = ctx.level
    for r, N in ((1, 10), (2, 6)):
        hb, fb = sc.Basis("hermite", r, N), sc.Basis("fock", r, N)
        for j in range(r):
            for a, b_ in (("M", "D"), ("Mbar", "Dbar")):
                C = qo.commutator(qo.md_operators(j, a, hb, lev), qo.md_operators(j, b_, hb, lev))
                res = max(res, qo.residual(C, 0 * qo.identity(hb), 2, hb))
            for a, b_ in (("mu", "delta"), ("mubar", "deltabar")):
                C = qo.commutator(qo.mudelta_operators(j, a, fb, lev), qo.mudelta_operators(j, b_, fb, lev))
                res = max(res, qo.residual(C, 0 * qo.identity(fb), 2, fb))
    return res, {}


@check("operators", "operators.md.ground_state", "M_j and D_j on the Hermite ground state", TIGHT)
def _md_h0(ctx):
    lev = ctx.level
    res = 0.0
    for r in (1, 2):
        b = sc.Basis("hermite", r, 4)
        tau = TeichmullerPoint(0.0, 1.0)
        h0 = sc.basis_vector("hermite", r, 4, tau, lev, (0,) * (2 * r))
        for j in range(r):
            e1 = tuple(int(i == j) for i in range(2 * r))
            e2 = tuple(int(i == r + j) for i in range(2 * r))
            want = np.zeros(b.size, complex)
            want[b.position(e1)], want[b.position(e2)] = 1, 1j
            M = qo.md_operators(j, "M", b, lev).apply(h0).coeffs
            D = qo.md_operators(j, "D", b, lev).apply(h0).coeffs
            res = max(res, _maxabs(M - np.sqrt(lev.hbar / 2) * want),
                      _maxabs(D + lev.hbar / np.sqrt(2 * lev.hbar) * want))
    return res, {}


@check("operators", "operators.mu.via_ladders", "mu_j = a*_j + i a*_{j+r} and delta_j = a_j + i a_{j+r}", TIGHT)
def _mu_ladders(ctx):
    lev = ctx.level
    res = 0.0
    for r, N in ((1, 8), (2, 5)):
        b = sc.Basis("fock", r, N)
        for j in range(r):
            mu = qo.ladder(j, "create", b, lev) + qo.ladder(r + j, "create", b, lev) * 1j
            de = qo.ladder(j, "annihilate", b, lev) + qo.ladder(r + j, "annihilate", b, lev) * 1j
            res = max(res, _maxabs(qo.mudelta_operators(j, "mu", b, lev).dense() - mu.dense()),
                      _maxabs(qo.mudelta_operators(j, "delta", b, lev).dense() - de.dense()))
    return res, {}


@check("operators", "operators.prequantum.curvature11", "[nabla_z_a, nabla_zbar_b] equals -i omega_t(d_z_a, d_zbar_b)", TIGHT)
def _curv11(ctx):
    res = 0.0
    for r, N in ((1, 6), (2, 4)):
        tau, lev = ctx.random_tau(), ctx.random_level()
        b = sc.Basis("extended", r, N)
        S = fr.build_structures(tau, lev, r)
        dz = fr.z_vector_fields(tau, lev, r)
        for a in range(2 * r):
            for c in range(2 * r):
                F = -1j * (dz[:, a] @ S.omega_t @ np.conj(dz[:, c]))
                C = qo.commutator(qo.nabla_z(b, a, lev), qo.nabla_zbar(b, c, lev))
                res = max(res, qo.residual(C, qo.identity(b) * F, 2, b))
    return res, {}


@check("operators", "operators.prequantum.curvature20", "[nabla_z_a, nabla_z_b] = 0 and nabla^(0,1) kills Fock sections", TIGHT)
def _curv20(ctx):
    res = 0.0
    lev = ctx.level
    for r, N in ((1, 6), (2, 4)):
        b = sc.Basis("extended", r, N)
        for a in range(2 * r):
            for c in range(2 * r):
                C = qo.commutator(qo.nabla_z(b, a, lev), qo.nabla_z(b, c, lev))
                res = max(res, qo.residual(C, 0 * qo.identity(b), 2, b))
            f = sc.embed_fock(sc.make_section("fock", r, N, ctx.random_tau(), lev,
                                              _rand_coeffs(ctx, sc.Basis("fock", r, N), N - 1)))
            res = max(res, _maxabs(qo.nabla_zbar(b, a, lev).apply(f).coeffs))
    return res, {}


@check("operators", "operators.laplacian.generic_vs_closed", "Laplacians assembled from G^C and prequantum derivatives match closed forms", "matrix")
def _lap(ctx):
    res = 0.0
    for r, N in ((1, 8), (2, 6)):
        tau, lev = ctx.random_tau(), ctx.random_level()
        eb, hb = sc.Basis("extended", r, N), sc.Basis("hermite", r, N)
        for d in DIRECTIONS:
            res = max(res,
                      qo.residual(qo.laplacian_G(d, "holo", tau, lev, eb), qo.laplacian_G(d, "holo", tau, lev, eb, "closed"), 2, eb),
                      qo.residual(qo.laplacian_G(d, "real", tau, lev, hb), qo.laplacian_G(d, "real", tau, lev, hb, "closed"), 2, hb))
    return res, {}


@check("operators", "operators.laplacian.fock_projection", "Laplacians pair to zero against holomorphic sections", "matrix")
def _lap_proj(ctx):
    res = 0.0
    for r, N in ((1, 8), (2, 6)):
        tau, lev = ctx.random_tau(), ctx.random_level()
        eb = sc.Basis("extended", r, N)
        for d in DIRECTIONS:
            L = qo.laplacian_G(d, "holo", tau, lev, eb)
            for _ in range(3):
                a = sc.make_section("extended", r, N, tau, lev, _rand_coeffs(ctx, eb, N - 4, True))
                c = sc.make_section("extended", r, N, tau, lev, _rand_coeffs(ctx, eb, N - 4, True))
                res = max(res, abs(sc.inner_product(L.apply(a), c)) / max(1.0, sc.norm(a) * sc.norm(c)))
    return res, {}


@check("operators", "operators.ch.closed_vs_generic", "complexified Hitchin potential equals the generic Laplacian assembly on the Fock slice", "matrix")
def _ch_closed(ctx):
    res = 0.0
    for r, N in ((1, 8), (2, 6)):
        tau, lev = ctx.random_tau(), ctx.random_level()
        eb, fb = sc.Basis("extended", r, N), sc.Basis("fock", r, N)
        pos = [eb.position(n + (0,) * (2 * r)) for n in fb.indices]
        cols = fb.degrees() <= N - 2
        for d in DIRECTIONS:
            A = qo.ch_potential_generic(d, tau, lev, eb).dense()
            L = qo.l2_potential(d, tau, lev, fb).dense()
            res = max(res, _maxabs((A[np.ix_(pos, pos)] - L)[:, cols]))
    return res, {}


@check("operators", "operators.hw.explicit_vs_assembly", "HW potential from the M/D closed form equals the assembly from prequantum derivatives", "matrix")
def _hw_explicit(ctx):
    res = 0.0
    for r, N in ((1, 8), (2, 6)):
        tau, lev = ctx.random_tau(), ctx.random_level()
        hb = sc.Basis("hermite", r, N)
        for d in DIRECTIONS:
            for form in ("explicit", "transport"):
                res = max(res, qo.residual(qo.hw_potential_generic(d, tau, lev, hb, form),
                                           qo.hw_potential(d, tau, lev, hb, form), 2, hb))
    return res, {}


@check("operators", "operators.hw.example_tau_i", "HW potential at tau = i and real t", TIGHT)
def _hw_example(ctx):
    lev = Level(ctx.level.k, 0.0)
    b = sc.Basis("hermite", 1, 8)
    M = qo.md_operators(0, "M", b, lev)
    D = qo.md_operators(0, "D", b, lev)
    want = (D @ D - (M @ D) * 2 + M @ M) * (1j / 8)
    return _maxabs(qo.hw_potential("d_tau", TeichmullerPoint(0.0, 1.0), lev, b, "explicit").dense() - want.dense()), {}


@check("operators", "operators.delta.partial_vs_delta", "d/dtau minus delta/delta-tau on polarised functions", "matrix")
def _pvd(ctx):
    res = 0.0
    for r, N in ((1, 8), (2, 6)):
        tau, lev = ctx.random_tau(), ctx.random_level()
        hb = sc.Basis("hermite", r, N)
        rhs = None
        for j in range(r):
            MD = qo.md_operators(j, "M", hb, lev) @ qo.md_operators(j, "D", hb, lev)
            term = (qo.rotation_q(j, hb, lev.hbar) - MD * (1j * lev.t**2 / lev.abs_t)) * (-1 / (4 * tau.tau2))
            rhs = term if rhs is None else rhs + term
        res = max(res, qo.residual(qo._q_motion("d_tau", tau, lev, hb), rhs, 2, hb))
    return res, {}


# --------------------------------------------------------------------------
# connections


def _hermite_families(ctx, tau, level, r, N, count, terms=3):
    b = sc.Basis("hermite", r, N)
    fams = []
    for _ in range(count):
        parts = [sc.make_section("hermite", r, N, tau, level, _rand_coeffs(ctx, b, N - 4)) for _ in range(terms)]
        fams.append(tp.polynomial_family(parts, tau))
    return fams


def _random_loop(ctx):
    """Square loop whose half-side is at most a tenth of the height of its centre."""
    centre = TeichmullerPoint(float(ctx.rng.uniform(-0.5, 0.5)), float(ctx.rng.uniform(0.9, 1.6)))
    radius = float(ctx.rng.uniform(0.05, 0.1 * centre.tau2))
    return centre, radius


@check("connections", "connections.ch.holomorphic", "complexified Hitchin connection preserves holomorphic sections", 1e-9)
def _ch_holo(ctx):
    res, ins = 0.0, []
    for r, N, npts in ((1, 8, 5), (2, 6, 5)):
        eb, fb = sc.Basis("extended", r, N), sc.Basis("fock", r, N)
        for _ in range(npts):
            tau, lev = ctx.random_tau(), ctx.random_level()
            ins.append([r, tau.tau1, tau.tau2, lev.k, lev.s])
            ops = [qo.ch_potential_generic(d, tau, lev, eb) for d in DIRECTIONS]
            for _ in range(10):
                f = sc.embed_fock(sc.make_section("fock", r, N, tau, lev, _rand_coeffs(ctx, fb, N - 2)))
                scale = max(1.0, _maxabs(f.coeffs))
                for A in ops:
                    res = max(res, _maxabs(sc.antiholomorphic_part(A.apply(f))) / scale)
    return res, {"points": ins}


@check("connections", "connections.laplacian.commute", "Laplacians of G^C along different directions commute", "matrix")
def _lap_commute(ctx):
    res = 0.0
    for r, N in ((1, 10), (2, 6)):
        eb = sc.Basis("extended", r, N)
        for _ in range(3):
            tau, lev = ctx.random_tau(), ctx.random_level()
            L = [qo.laplacian_G(d, "holo", tau, lev, eb) for d in DIRECTIONS]
            res = max(res, qo.residual(qo.commutator(L[0], L[1]), 0 * qo.identity(eb), 4, eb))
    return res, {}


def _curvature_residual(kind, builder, basis, tau, lev):
    F = qo.curvature(lambda T: builder("d_tau", T, lev, basis).dense(),
                     lambda T: builder("d_tau_bar", T, lev, basis).dense(), tau)
    return qo.residual(F, np.zeros_like(F), 4, basis)


@check("connections", "connections.curvature.hw", "HW potential has zero curvature (finite differences in tau)", "fd")
def _curv_hw(ctx):
    res = 0.0
    for r, N in ((1, 10), (2, 7)):
        tau, lev = ctx.random_tau(), ctx.random_level()
        res = max(res, _curvature_residual("HW", qo.hw_potential, sc.Basis("hermite", r, N), tau, lev))
    return res, {}


@check("connections", "connections.curvature.l2", "L2 potential has zero curvature (finite differences in tau)", "fd")
def _curv_l2(ctx):
    res = 0.0
    for r, N in ((1, 10), (2, 7)):
        tau, lev = ctx.random_tau(), ctx.random_level()
        res = max(res, _curvature_residual("L2", qo.l2_potential, sc.Basis("fock", r, N), tau, lev))
    return res, {}


def _holonomy_loops(ctx, kind, basis_kind):
    res, ins = 0.0, []
    basis = sc.Basis(basis_kind, 1, 16)
    steps = max(2, ctx.config.steps // 4)
    for _ in range(10):
        centre, radius = _random_loop(ctx)
        lev = ctx.random_level()
        loop = tp.TeichPath.square_loop(centre, radius, steps)
        H = tp.holonomy(kind, loop, basis, lev, block_degree=4, tol=ctx.config.tolerances["transport"])
        res = max(res, tp.holonomy_defect(H))
        ins.append([centre.tau1, centre.tau2, radius, lev.k, lev.s])
    return res, {"loops": ins, "steps_per_side": steps}


@check("connections", "connections.holonomy.ch_random_loops", "holonomy of the complexified Hitchin connection around 10 random small loops", "transport")
def _hol_ch(ctx):
    return _holonomy_loops(ctx, "CH", "fock")


@check("connections", "connections.holonomy.hw_random_loops", "holonomy of the HW connection around 10 random small loops", "transport")
def _hol_hw(ctx):
    return _holonomy_loops(ctx, "HW", "hermite")


@check("connections", "connections.holonomy.square_tau_i", "holonomy around the square loop at tau = i, degrees up to 4", "transport")
def _hol_i(ctx):
    res = 0.0
    loop = tp.TeichPath.square_loop(TeichmullerPoint(0.0, 1.0), ctx.config.radius, max(2, ctx.config.steps // 4))
    for kind, bk in (("CH", "fock"), ("HW", "hermite")):
        H = tp.holonomy(kind, loop, sc.Basis(bk, 1, 16), ctx.level, block_degree=4,
                        tol=ctx.config.tolerances["transport"])
        res = max(res, tp.holonomy_defect(H))
    return res, {"radius": ctx.config.radius}


@check("connections", "connections.intertwining.random", "Bargmann transform intertwines HW and L2 on 50 families at 10 points", 1e-8)
def _intertwine(ctx):
    res, ins = 0.0, []
    for _ in range(10):
        tau, lev = ctx.random_tau(), ctx.random_level()
        ins.append([tau.tau1, tau.tau2, lev.k, lev.s])
        fams = _hermite_families(ctx, tau, lev, 1, 12, 50)
        for d in DIRECTIONS:
            res = max(res, tp.verify_intertwining(tau, lev, fams, d)["max_residual"])
    for _ in range(2):
        tau, lev = ctx.random_tau(), ctx.random_level()
        fams = _hermite_families(ctx, tau, lev, 2, 8, 5)
        for d in DIRECTIONS:
            res = max(res, tp.verify_intertwining(tau, lev, fams, d)["max_residual"])
    return res, {"points": ins}


@check("connections", "connections.intertwining.h0", "intertwining on the Hermite ground state", 1e-9)
def _intertwine_h0(ctx):
    res = 0.0
    for r, N in ((1, 10), (2, 6)):
        tau = ctx.random_tau()
        h0 = sc.basis_vector("hermite", r, N, tau, ctx.level, (0,) * (2 * r))
        for d in DIRECTIONS:
            res = max(res, tp.intertwining_residual(tp.constant_family(h0), tau, d))
    return res, {}


@check("connections", "connections.intertwining.ch_equals_l2", "intertwining holds with the complexified Hitchin potential in place of L2", 1e-8)
def _intertwine_ch(ctx):
    res = 0.0
    for r, N in ((1, 10), (2, 6)):
        tau, lev = ctx.random_tau(), ctx.random_level()
        for fam in _hermite_families(ctx, tau, lev, r, N, 5):
            for d in DIRECTIONS:
                res = max(res, tp.intertwining_residual(fam, tau, d, fock_kind="CH"))
    return res, {}


@check("connections", "connections.intertwining.mcg_invariance", "intertwining residual unchanged under the S and T moves", 1e-7)
def _intertwine_mcg(ctx):
    res = 0.0
    for _ in range(3):
        tau, lev = ctx.random_tau(), ctx.random_level()
        for fam in _hermite_families(ctx, tau, lev, 1, 12, 5):
            for g in (tp.MCGElement.S(), tp.MCGElement.T()):
                moved = tp.push_family(g, fam)
                for d in DIRECTIONS:
                    a = tp.intertwining_residual(fam, tau, d)
                    b = tp.intertwining_residual(moved, tp.mcg_act(g, tau), d)
                    res = max(res, abs(a - b), a, b)
    return res, {}


# --------------------------------------------------------------------------
# bargmann


def _random_z(ctx, n, m, scale=0.7):
    return (ctx.rng.normal(size=(n, m)) + 1j * ctx.rng.normal(size=(n, m))) * scale


@check("bargmann", "bargmann.h0.constant", "the Hermite ground state maps to the constant 1", TIGHT)
def _b_h0(ctx):
    res = 0.0
    for r in (1, 2):
        h0 = sc.basis_vector("hermite", r, 6, ctx.random_tau(), ctx.level, (0,) * (2 * r))
        f = bg.bargmann_closed_form(h0)
        want = np.zeros(f.basis.size, complex)
        want[f.basis.position((0,) * (2 * r))] = 1
        res = max(res, _maxabs(f.coeffs - want))
    return res, {}


@check("bargmann", "bargmann.h0.position", "q_j h_0 maps to -(i/2) z_j", TIGHT)
def _b_qh0(ctx):
    res = 0.0
    lev = ctx.level
    for r in (1, 2):
        hb = sc.Basis("hermite", r, 6)
        h0 = sc.basis_vector("hermite", r, 6, ctx.random_tau(), lev, (0,) * (2 * r))
        for j in range(2 * r):
            f = bg.bargmann_closed_form(qo.position_op(hb, j, lev.hbar).apply(h0))
            want = np.zeros(f.basis.size, complex)
            want[f.basis.position(tuple(int(i == j) for i in range(2 * r)))] = -0.5j
            res = max(res, _maxabs(f.coeffs - want))
    return res, {}


@check("bargmann", "bargmann.gram", "Gram matrix of the transformed Hermite basis is the identity up to degree 6", "matrix")
def _b_gram(ctx):
    res = 0.0
    for r in (1, 2):
        lev = ctx.random_level()
        hb = sc.Basis("hermite", r, 6)
        B = bg.bargmann_operator(hb, lev).dense()
        G = B.conj().T @ np.diag(sc.fock_norms(sc.Basis("fock", r, 6), lev.hbar)) @ B
        res = max(res, _maxabs(G - np.eye(hb.size)))
    return res, {}


@check("bargmann", "bargmann.unitarity", "norms preserved on 100 random truncated sections", 1e-9)
def _b_unitary(ctx):
    res = 0.0
    for i in range(100):
        r = 1 + i % 2
        N = 10 if r == 1 else 6
        tau, lev = ctx.random_tau(), ctx.random_level()
        hb = sc.Basis("hermite", r, N)
        psi = sc.make_section("hermite", r, N, tau, lev, _rand_coeffs(ctx, hb, N - 1))
        a, b = sc.norm(psi), sc.norm(bg.bargmann_closed_form(psi))
        res = max(res, abs(a - b) / a)
    return res, {}


@check("bargmann", "bargmann.transfer.md", "B M_j = (i/2)(delta_j - mu_j) B and B D_j = (i/2)(mu_j + delta_j) B", "matrix")
def _b_transfer(ctx):
    res = 0.0
    for r, N in ((1, 10), (2, 6)):
        lev = ctx.random_level()
        hb, fb = sc.Basis("hermite", r, N), sc.Basis("fock", r, N)
        B = bg.bargmann_operator(hb, lev).dense()
        for j in range(r):
            mu = qo.mudelta_operators(j, "mu", fb, lev).dense()
            de = qo.mudelta_operators(j, "delta", fb, lev).dense()
            M = qo.md_operators(j, "M", hb, lev).dense()
            D = qo.md_operators(j, "D", hb, lev).dense()
            res = max(res, qo.residual(B @ M, 0.5j * (de - mu) @ B, 2, hb),
                      qo.residual(B @ D, 0.5j * (mu + de) @ B, 2, hb))
    return res, {}


@check("bargmann", "bargmann.transfer.rotation", "B carries the rotation generator in q to the one in z", "matrix")
def _b_rot(ctx):
    res = 0.0
    for r, N in ((1, 10), (2, 6)):
        lev = ctx.random_level()
        hb, fb = sc.Basis("hermite", r, N), sc.Basis("fock", r, N)
        B = bg.bargmann_operator(hb, lev).dense()
        for j in range(r):
            res = max(res, qo.residual(B @ qo.rotation_q(j, hb, lev.hbar).dense(),
                                       qo.rotation_z(j, fb).dense() @ B, 2, hb))
    return res, {}


@check("bargmann", "bargmann.transfer.potentials", "B A_HW = A_L2 B for the coefficient-form potentials", "matrix")
def _b_pot(ctx):
    res = 0.0
    for r, N in ((1, 10), (2, 6)):
        tau, lev = ctx.random_tau(), ctx.random_level()
        hb, fb = sc.Basis("hermite", r, N), sc.Basis("fock", r, N)
        B = bg.bargmann_operator(hb, lev).dense()
        for d in DIRECTIONS:
            res = max(res, qo.residual(B @ qo.hw_potential(d, tau, lev, hb).dense(),
                                       qo.l2_potential(d, tau, lev, fb).dense() @ B, 2, hb))
    return res, {}


@check("bargmann", "bargmann.degree", "each h_n maps to a multiple of the monomial z^n", TIGHT)
def _b_degree(ctx):
    res = 0.0
    for r, N in ((1, 12), (2, 8)):
        lev = ctx.random_level()
        hb = sc.Basis("hermite", r, N)
        B = bg.bargmann_operator(hb, lev).dense()
        want = np.diag([bg.bargmann_hermite_monomial(n, lev.hbar) for n in hb.indices])
        res = max(res, _maxabs(B - want))
    return res, {}


@check("bargmann", "bargmann.quadrature.h0", "integral form on h_0 at 20 random points", 1e-10)
def _b_quad_h0(ctx):
    res = 0.0
    for r in (1, 2):
        h0 = sc.basis_vector("hermite", r, 6, ctx.random_tau(), ctx.level, (0,) * (2 * r))
        z = _random_z(ctx, 20, 2 * r)
        nodes = ctx.config.quadrature_nodes if r == 1 else None
        res = max(res, _maxabs(bg.bargmann_quadrature(h0, z, ctx.level, nodes=nodes) - 1))
    return res, {}


@check("bargmann", "bargmann.quadrature.degree3", "integral form on random degree-3 Hermite inputs", 1e-9)
def _b_quad3(ctx):
    res = 0.0
    for r in (1, 2):
        tau, lev = ctx.random_tau(), ctx.random_level()
        hb = sc.Basis("hermite", r, 6)
        psi = sc.make_section("hermite", r, 6, tau, lev, _rand_coeffs(ctx, hb, 3))
        z = _random_z(ctx, 10, 2 * r)
        fq = bg.bargmann_quadrature(psi, z, lev, nodes=ctx.config.quadrature_nodes if r == 1 else None)
        fc = sc.evaluate(bg.bargmann_closed_form(psi), z)
        res = max(res, _maxabs(fq - fc) / max(1.0, _maxabs(fc)))
    return res, {}


@check("bargmann", "bargmann.quadrature.shifted_gaussian", "translated, modulated Gaussian against its closed-form transform", 1e-9)
def _b_shift(ctx):
    res = 0.0
    for _ in range(3):
        m = 2
        lev = ctx.random_level()
        hb = lev.hbar
        a, p = ctx.rng.normal(size=m) * 0.5, ctx.rng.normal(size=m) * 0.5

        def psi(q, a=a, p=p, hb=hb):
            return np.exp(-np.sum((q - a) ** 2, axis=1) / (2 * hb) + 1j * (q @ p) / hb)

        z = _random_z(ctx, 10, m, 0.5)
        w = a + 1j * p - 1j * z
        want = (np.pi * hb) ** (m / 4) * np.exp((np.sum(w * w, axis=1) + np.sum(z * z, axis=1)) / (4 * hb)
                                               - (a @ a) / (2 * hb))
        got = bg.bargmann_quadrature(psi, z, lev, nodes=48, tol=1e-9 * _maxabs(want))
        res = max(res, _maxabs(got - want) / _maxabs(want))
    return res, {}


@check("bargmann", "bargmann.transpose.point_eval", "transpose of point evaluation is the coherent-state pairing", 1e-9)
def _b_coherent(ctx):
    res = 0.0
    lev = ctx.level
    hb = sc.Basis("hermite", 1, 8)
    for _ in range(5):
        psi = sc.make_section("hermite", 1, 8, ctx.random_tau(), lev, _rand_coeffs(ctx, hb, 6))
        z0 = _random_z(ctx, 1, 2, 0.5)[0]
        T = bg.point_evaluation(z0, lev)
        direct = bg.pair(T, bg.bargmann_closed_form(psi))
        via = bg.pair(bg.transpose_bargmann(T), psi)
        res = max(res, abs(direct - via) / max(1.0, abs(direct)))
    return res, {}


@check("bargmann", "bargmann.transpose.linear", "transpose is linear on finite combinations", 1e-9)
def _b_linear(ctx):
    lev = ctx.level
    hb = sc.Basis("hermite", 1, 8)
    psi = sc.make_section("hermite", 1, 8, ctx.random_tau(), lev, _rand_coeffs(ctx, hb, 6))
    z = _random_z(ctx, 3, 2, 0.5)
    cs = ctx.rng.normal(size=3) + 1j * ctx.rng.normal(size=3)
    parts = [bg.point_evaluation(z0, lev) for z0 in z]
    combo = bg.DualElement("combo", list(zip(cs, parts)), "fock", lev)
    lhs = bg.pair(bg.transpose_bargmann(combo), psi)
    rhs = sum(c * bg.pair(bg.transpose_bargmann(T), psi) for c, T in zip(cs, parts))
    return abs(lhs - rhs) / max(1.0, abs(lhs)), {}


# --------------------------------------------------------------------------
# transport


def _h0(kind, r, N, tau, level):
    return sc.basis_vector(kind, r, N, tau, level, (0,) * (2 * r))


@check("transport", "transport.constant_path", "transport along a constant path is the identity", TIGHT)
def _t_const(ctx):
    res = 0.0
    tau = ctx.random_tau()
    for kind, bk in (("HW", "hermite"), ("L2", "fock")):
        b = sc.Basis(bk, 1, 10)
        psi = sc.make_section(bk, 1, 10, tau, ctx.level, _rand_coeffs(ctx, b, 6))
        out = tp.transport(kind, tp.TeichPath((tau, tau), 20), psi).section
        res = max(res, _maxabs(out.coeffs - psi.coeffs))
    return res, {"tau": [tau.tau1, tau.tau2]}


@check("transport", "transport.reverse", "transport followed by reverse transport returns the initial section", 1e-8)
def _t_reverse(ctx):
    res = 0.0
    path = tp.TeichPath.from_string("0+1i,1+1i")
    for kind, bk in (("HW", "hermite"), ("L2", "fock")):
        h0 = _h0(bk, 1, 16, path.waypoints[0], ctx.level)
        fwd = tp.transport(kind, path, h0).section
        back = tp.transport(kind, path.reversed(), fwd, headroom=0).section
        res = max(res, _maxabs(back.coeffs - h0.coeffs))
    return res, {}


@check("transport", "transport.norm_drift", "norm drift of h_0 transported along 0+1i -> 1+1i", 1e-8)
def _t_drift(ctx):
    res = 0.0
    path = tp.TeichPath.from_string("0+1i,1+1i")
    for kind, bk in (("HW", "hermite"), ("L2", "fock")):
        res = max(res, tp.transport(kind, path, _h0(bk, 1, 16, path.waypoints[0], ctx.level)).norm_drift)
    return res, {}


@check("transport", "transport.path_independence", "HW transport of h_0 from i to 2i does not depend on the route", "transport")
def _t_paths(ctx):
    lev = ctx.level
    start = TeichmullerPoint(0.0, 1.0)
    h0 = _h0("hermite", 1, 32, start, lev)
    a = tp.transport("HW", tp.TeichPath.from_string("0+1i,1+1i,0+2i", 400), h0).section
    b = tp.transport("HW", tp.TeichPath.from_string("0+1i,0.5+2.5i,0+2i", 400), h0).section
    return _maxabs(a.coeffs - b.coeffs), {}


@check("transport", "transport.ch_holomorphic", "complexified Hitchin transport keeps Fock sections holomorphic along the path", 1e-8)
def _t_ch_holo(ctx):
    lev = ctx.level
    tau = TeichmullerPoint(0.0, 1.0)
    eb = sc.Basis("extended", 1, 10)
    sec = sc.make_section("extended", 1, 10, tau, lev, _rand_coeffs(ctx, eb, 3, True))
    res = 0.0
    for end in ("0.05+1.025i", "0.1+1.05i"):
        path = tp.TeichPath.from_string(f"0+1i,{end}", 10)
        out = tp.transport("CH", path, sec, check=False).section
        res = max(res, tp.polarisation_residual(out) / _maxabs(sec.coeffs))
    return res, {}


@check("transport", "transport.mcg.identity", "the identity element acts trivially on tau and on sections", TIGHT)
def _t_mcg_id(ctx):
    res = 0.0
    g = tp.MCGElement.identity()
    for bk in ("hermite", "fock"):
        tau = ctx.random_tau()
        b = sc.Basis(bk, 2, 6)
        psi = sc.make_section(bk, 2, 6, tau, ctx.level, _rand_coeffs(ctx, b, 6))
        out = tp.mcg_act_section(g, psi)
        res = max(res, abs(out.tau.tau - tau.tau), _maxabs(out.coeffs - psi.coeffs))
    return res, {}


@check("transport", "transport.mcg.symplectic", "modular moves preserve omega_t and carry I_t at tau to I_t at gamma tau", TIGHT)
def _t_mcg_symp(ctx):
    res = 0.0
    for g in (tp.MCGElement.T(), tp.MCGElement.S(), tp.MCGElement(((2, 1), (1, 1)))):
        for r in (1, 2):
            tau, lev = ctx.random_tau(), ctx.random_level()
            A = tp.a0_action(g, r)
            S1, S2 = fr.build_structures(tau, lev, r), fr.build_structures(tp.mcg_act(g, tau), lev, r)
            res = max(res, _maxabs(A.T @ S1.omega_t @ A - S1.omega_t), _maxabs(A @ S1.I_t - S2.I_t @ A))
    return res, {}


@check("transport", "transport.mcg.composition", "the action on A_0 and on tau composes covariantly", TIGHT)
def _t_mcg_comp(ctx):
    res = 0.0
    gens = (tp.MCGElement.S(), tp.MCGElement.T(), tp.MCGElement.T().inverse())
    for _ in range(20):
        g1, g2 = gens[ctx.rng.integers(3)], gens[ctx.rng.integers(3)]
        tau = ctx.random_tau()
        res = max(res, _maxabs(tp.a0_action(g1 @ g2, 1) - tp.a0_action(g1, 1) @ tp.a0_action(g2, 1)),
                  abs(tp.mcg_act(g1 @ g2, tau).tau - tp.mcg_act(g1, tp.mcg_act(g2, tau)).tau))
    return res, {}


@check("transport", "transport.mcg.evaluation", "pushed sections take the same values at the rotated fibre coordinates", TIGHT)
def _t_mcg_eval(ctx):
    res = 0.0
    tau, lev = ctx.random_tau(), ctx.level
    for bk in ("hermite", "fock"):
        b = sc.Basis(bk, 1, 10)
        psi = sc.make_section(bk, 1, 10, tau, lev, _rand_coeffs(ctx, b, 4))
        for g in (tp.MCGElement.S(), tp.MCGElement.T(), tp.MCGElement(((2, 1), (1, 1)))):
            out = tp.mcg_act_section(g, psi)
            th = tp.rotation_angle(g, tau)
            R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
            pts = ctx.rng.normal(size=(5, 2)) * 0.5
            if bk == "fock":
                pts = pts + 1j * ctx.rng.normal(size=(5, 2)) * 0.5
            res = max(res, _maxabs(sc.evaluate(psi, pts) - sc.evaluate(out, pts @ R.T)))
    return res, {}


@check("transport", "transport.mcg.s_fixed_point", "at tau = i the S move fixes tau and conjugation by its section map preserves the potentials", 1e-8)
def _t_s_fixed(ctx):
    tau = TeichmullerPoint(0.0, 1.0)
    g = tp.MCGElement.S()
    res = abs(tp.mcg_act(g, tau).tau - tau.tau)
    for kind, bk in (("CH", "fock"), ("HW", "hermite")):
        res = max(res, tp.gamma_equivariance_residual(kind, g, tau, ctx.level, sc.Basis(bk, 1, 10)))
    return res, {}


@check("transport", "transport.mcg.equivariance", "potentials are equivariant under S, T and a mixed element", 1e-7)
def _t_gamma(ctx):
    res = 0.0
    for g in (tp.MCGElement.S(), tp.MCGElement.T(), tp.MCGElement(((2, 1), (1, 1)))):
        for kind, bk in (("CH", "fock"), ("HW", "hermite")):
            for r, N in ((1, 10), (2, 6)):
                tau, lev = ctx.random_tau(), ctx.random_level()
                res = max(res, tp.gamma_equivariance_residual(kind, g, tau, lev, sc.Basis(bk, r, N)))
    return res, {}


@check("transport", "transport.delta.constant", "the delta-derivative of a constant family vanishes", TIGHT)
def _t_delta_const(ctx):
    res = 0.0
    for bk in ("hermite", "fock", "extended"):
        tau = ctx.random_tau()
        b = sc.Basis(bk, 1, 8)
        fam = tp.constant_family(sc.make_section(bk, 1, 8, tau, ctx.level, _rand_coeffs(ctx, b, 4)))
        for d in DIRECTIONS:
            res = max(res, _maxabs(tp.delta_derivative(fam, d, tau).coeffs))
    return res, {}


@check("transport", "transport.delta.polarised", "the delta-derivative of a polarised family is polarised", 1e-8)
def _t_delta_pol(ctx):
    res = 0.0
    for r, N in ((1, 8), (2, 6)):
        tau = ctx.random_tau()
        eb = sc.Basis("extended", r, N)
        parts = [sc.make_section("extended", r, N, tau, ctx.level, _rand_coeffs(ctx, eb, N - 2, True)) for _ in range(3)]
        fam = tp.polynomial_family(parts, tau)
        for d in DIRECTIONS:
            res = max(res, tp.polarisation_residual(tp.delta_derivative(fam, d, tau)))
    return res, {}


@check("transport", "transport.delta.polynomial", "delta-derivative of a family polynomial in tau matches the exact derivative", 1e-7)
def _t_delta_poly(ctx):
    res = 0.0
    for bk in ("hermite", "fock"):
        tau0 = ctx.random_tau()
        b = sc.Basis(bk, 1, 8)
        parts = [sc.make_section(bk, 1, 8, tau0, ctx.level, _rand_coeffs(ctx, b, 6)) for _ in range(4)]
        fam = tp.polynomial_family(parts, tau0)
        tau = TeichmullerPoint(tau0.tau1 + 0.1, tau0.tau2 + 0.05)
        dz = tau.tau - tau0.tau
        exact = sum(n * p.coeffs * dz ** (n - 1) for n, p in enumerate(parts) if n)
        scale = max(1.0, _maxabs(exact))
        res = max(res, _maxabs(tp.delta_derivative(fam, "d_tau", tau).coeffs - exact) / scale,
                  _maxabs(tp.delta_derivative(fam, "d_tau_bar", tau).coeffs) / scale)
    return res, {}


@check("transport", "transport.delta.fixed_point", "delta-derivative plus coordinate motion equals the derivative of values at a fixed point", "fd")
def _t_delta_fixed(ctx):
    res = 0.0
    lev = ctx.level
    tau0 = ctx.random_tau()
    hb = sc.Basis("hermite", 1, 10)
    parts = [sc.make_section("hermite", 1, 10, tau0, lev, _rand_coeffs(ctx, hb, 5)) for _ in range(2)]
    fam = tp.polynomial_family(parts, tau0)
    x = ctx.rng.normal(size=(3, 2)) * 0.4
    P, Q = sc.a0_chart(tau0, lev, 1)

    def values(T):
        # psi(q) rho(p, q) at fixed points of A_0
        sec = fam(T)
        P, Q = sc.a0_chart(T, lev, 1)
        p, q = x @ P.T, x @ Q.T
        return sc.evaluate(sec, q) * sc.rho_frame(p, q, lev)

    for d in DIRECTIONS:
        want = fr.tau_derivative(values, tau0, d, h=1e-4, rtol=1e-3)
        got_sec = tp.fixed_point_derivative(fam, d, tau0)
        p, q = x @ P.T, x @ Q.T
        got = sc.evaluate(got_sec, q) * sc.rho_frame(p, q, lev)
        res = max(res, _maxabs(got - want) / max(1.0, _maxabs(want)))
    return res, {}


# --------------------------------------------------------------------------
# equivariance


def _seed_gaussian(ctx, k, r=1):
    centre = ctx.rng.uniform(-0.5, 0.5, size=2 * r)
    momentum = ctx.rng.uniform(-0.3, 0.3, size=2 * r)
    return sc.gaussian(centre, float(ctx.rng.uniform(0.6, 0.9)), k, momentum=momentum)


def _equivariant(ctx, k, r=1):
    data = ctx.config.cartan_data() if r == ctx.config.cartan_data().rank else ct.preset_an(r + 1)
    return sc.equivariantize(_seed_gaussian(ctx, k, r), data.orthonormalized(), ctx.config.lattice_radius), data


@check("equivariance", "equivariance.weyl.orders", "Weyl groups of A1 and A2 have orders 2 and 6", TIGHT)
def _e_orders(ctx):
    orders = [len(ct.enumerate_weyl(ct.preset_a1())), len(ct.enumerate_weyl(ct.preset_an(3)))]
    return float(abs(orders[0] - 2) + abs(orders[1] - 6)), {"orders": orders}


@check("equivariance", "equivariance.weyl.lattice", "Weyl elements are gram isometries preserving the lattice", TIGHT)
def _e_weyl_lattice(ctx):
    res = 0.0
    for data in (ct.preset_a1(), ct.preset_an(3), ct.preset_an(4)):
        Linv = np.linalg.inv(data.lattice_basis)
        for w in ct.enumerate_weyl(data):
            n = Linv @ w @ data.lattice_basis
            res = max(res, _maxabs(n - np.rint(n)), _maxabs(w.T @ data.gram @ w - data.gram))
    return res, {}


@check("equivariance", "equivariance.gauge.composition", "the gauge action composes on 100 random triples", TIGHT)
def _e_compose(ctx):
    res = 0.0
    for data in (ct.preset_a1(), ct.preset_an(3)):
        weyl = ct.enumerate_weyl(data)
        r = data.rank
        for _ in range(50):
            g1, g2, g3 = (ct.random_gauge_element(ctx.rng, data, weyl) for _ in range(3))
            x = (ctx.rng.normal(size=r), ctx.rng.normal(size=r))
            lhs = ct.gauge_act(ct.compose(ct.compose(g1, g2, data, weyl), g3, data, weyl), x, data, weyl)
            rhs = ct.gauge_act(g1, ct.gauge_act(g2, ct.gauge_act(g3, x, data, weyl), data, weyl), data, weyl)
            assoc = ct.compose(g1, ct.compose(g2, g3, data, weyl), data, weyl)
            res = max(res, _maxabs(np.concatenate(lhs) - np.concatenate(rhs)),
                      float(assoc != ct.compose(ct.compose(g1, g2, data, weyl), g3, data, weyl)))
    return res, {}


@check("equivariance", "equivariance.equivariantize.invariance", "equivariantised Gaussians are invariant under lattice translations and the Weyl group", 1e-8)
def _e_invariance(ctx):
    E, data = _equivariant(ctx, ctx.level.k)
    data = data.orthonormalized()
    u = ctx.rng.normal(size=(10, 2)) * 0.6
    res = 0.0
    L = data.lattice_basis[0, 0]
    for a2 in ([L, 0.0], [0.0, L], [L, -L]):
        a = np.array(a2)
        moved = sc.translate(E, a).scaled(sc.theta_character(a, E.k))
        res = max(res, _maxabs(moved(u) - E(u)))
    for w in ct.enumerate_weyl(data):
        res = max(res, _maxabs(sc.weyl_pullback(E, w)(u) - E(u)))
    return res / max(1.0, _maxabs(E(u))), {}


@check("equivariance", "equivariance.weyl_average.projector", "Weyl averaging is idempotent", TIGHT)
def _e_projector(ctx):
    data = ct.preset_an(3)
    weyl = ct.enumerate_weyl(data)
    seed = _seed_gaussian(ctx, ctx.level.k, 2)

    def average(psi):
        out = psi
        for w in weyl[1:]:
            out = out + sc.weyl_pullback(psi, w)
        return out.scaled(1.0 / len(weyl))

    u = ctx.rng.normal(size=(10, 4)) * 0.6
    once = average(seed)
    return _maxabs(average(once)(u) - once(u)), {}


@check("equivariance", "equivariance.bargmann.doubling", "lattice-summed transform is stable under doubling the integration domain", 1e-8)
def _e_doubling(ctx):
    lev = ctx.level
    E, _ = _equivariant(ctx, lev.k)
    tau = ctx.random_tau()
    z = _random_z(ctx, 6, 2, 0.6)
    _, err = bg.bargmann_equivariant(E, z, tau, lev, tol=np.inf, with_error=True)
    return err, {"tau": [tau.tau1, tau.tau2]}


@check("equivariance", "equivariance.bargmann.zero", "the transform of the zero section vanishes", TIGHT)
def _e_zero(ctx):
    lev = ctx.level
    E, _ = _equivariant(ctx, lev.k)
    z = _random_z(ctx, 4, 2, 0.6)
    return _maxabs(bg.bargmann_equivariant(E.scaled(0.0), z, ctx.random_tau(), lev)), {}


@check("equivariance", "equivariance.bargmann.equivariant", "lattice-summed transform is equivariant under lattice shifts and the Weyl group", 1e-7)
def _e_bargmann_equiv(ctx):
    lev = ctx.level
    E, data = _equivariant(ctx, lev.k)
    data = data.orthonormalized()
    tau = ctx.random_tau()
    S = fr.build_structures(tau, lev, 1)
    x = ctx.rng.normal(size=(4, 4)) * 0.5

    def F(pts):
        return bg.bargmann_equivariant(E, bg.z_of_x(pts, tau, lev, 1), tau, lev, tol=1e-8, as_section=True)

    base = F(x)
    res = 0.0
    L = data.lattice_basis[0, 0]
    for a2 in ([L, 0.0], [0.0, L]):
        a = np.array(a2 + [0.0, 0.0])
        eps = sc.theta_character(np.array(a2), lev.k)
        moved = eps * np.exp(0.5j * np.einsum("i,ij,pj->p", a, S.omega_t, x)) * F(x - a)
        res = max(res, _maxabs(base - moved))
    res = max(res, _maxabs(base - F(-x)))
    return res / max(1.0, _maxabs(base)), {"tau": [tau.tau1, tau.tau2]}


@check("equivariance", "equivariance.transpose_square", "transpose of the transformed equivariant section pairs like the section itself", 1e-6)
def _e_transpose_square(ctx):
    lev = ctx.level
    E, _ = _equivariant(ctx, lev.k)
    tau = ctx.random_tau()
    hb = sc.Basis("hermite", 1, 6)
    test = sc.make_section("hermite", 1, 6, tau, lev, _rand_coeffs(ctx, hb, 6))
    T = bg.DualElement("entire", lambda zz: bg.bargmann_equivariant(E, zz, tau, lev, tol=1e-8), "fock", lev)
    lhs = bg.pair(bg.transpose_bargmann(T), test, radius=1.0, npts=16)
    rhs = bg.pair(bg.DualElement("regular", sc.restrict_to_q(E, tau, lev, 1)), test,
                  nodes=max(80, ctx.config.quadrature_nodes))
    return abs(lhs - rhs) / max(1.0, abs(rhs)), {"tau": [tau.tau1, tau.tau2]}


@check("equivariance", "equivariance.dual_vs_direct", "dual HW connection agrees with the direct connection on tau-independent equivariant sections", 1e-6)
def _e_dual_vs_direct(ctx):
    lev = ctx.level
    E, _ = _equivariant(ctx, lev.k)
    res = 0.0
    for _ in range(2):
        tau = ctx.random_tau()
        test = _seed_gaussian(ctx, lev.k)
        for d in ("d_tau1", "d_tau2"):
            a = qo.dual_apply("dualHW", E, test, d, tau, lev)
            b = qo.hw_direct_pairing(E, test, d, tau, lev)
            res = max(res, abs(a - b) / max(1.0, abs(b)))
    return res, {}


def _nabla_fd(F, vec, k, h=1e-4):
    """Prequantum derivative along a constant vector of A_0 (rank 1), by central differences."""
    Om = fr.symplectic_A0(1)

    def G(u):
        u = np.atleast_2d(u)
        d = sum(vec[i] * (F(u + h * np.eye(2)[i]) - F(u - h * np.eye(2)[i])) / (2 * h) for i in range(2))
        return d - 0.5j * k * (u @ Om @ vec) * F(u)

    return G


@check("equivariance", "equivariance.dual.point_eval", "dual HW connection on a point evaluation matches finite-difference prequantum derivatives", "fd")
def _e_dual_point(ctx):
    lev = ctx.level
    res = 0.0
    for _ in range(3):
        tau = ctx.random_tau()
        psi = _seed_gaussian(ctx, lev.k)
        u0 = ctx.rng.normal(size=2) * 0.5
        X = fr.script_x_vectors(tau, 1)[:, 0]
        pot_tau = (-1j / (2 * lev.t * tau.tau2)) * _nabla_fd(_nabla_fd(psi, np.conj(X), lev.k), np.conj(X), lev.k)(u0)[0]
        pot_bar = (-1j / (2 * np.conj(lev.t) * tau.tau2)) * _nabla_fd(_nabla_fd(psi, X, lev.k), X, lev.k)(u0)[0]
        for d in ("d_tau1", "d_tau2"):
            w, wb = fr.direction_weights(d)
            want = -np.conj(w * pot_tau + wb * pot_bar)
            got = qo.dual_apply("dualHW", ("point", u0), psi, d, tau, lev)
            res = max(res, abs(got - want) / max(1.0, abs(want)))
    return res, {}


@check("equivariance", "equivariance.dual.linear", "the dual connection is linear in the functional", 1e-9)
def _e_dual_linear(ctx):
    lev = ctx.level
    tau = ctx.random_tau()
    T1, T2, test = (_seed_gaussian(ctx, lev.k) for _ in range(3))
    c = complex(ctx.rng.normal(), ctx.rng.normal())
    res = 0.0
    for d in ("d_tau1", "d_tau2"):
        lhs = qo.dual_apply("dualHW", T1 + T2.scaled(c), test, d, tau, lev)
        rhs = qo.dual_apply("dualHW", T1, test, d, tau, lev) + c * qo.dual_apply("dualHW", T2, test, d, tau, lev)
        res = max(res, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return res, {}

"""Lie-theoretic input: Cartan subalgebra, Weyl group and coroot lattice.

Lattice vectors are stored with every normalisation constant absorbed, so a
lattice shift is simply ``lattice_basis @ n`` for an integer vector ``n``.
The presets scale coroots (squared length 2) by ``sqrt(2*pi)``; the pairing of
any two lattice vectors is then an integer multiple of ``2*pi``, which is what
the prequantum lift of translations needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatch, GroupTooLarge

LATTICE_SCALE = np.sqrt(2 * np.pi)


@dataclass(frozen=True)
class CartanData:
    rank: int
    gram: np.ndarray
    weyl_generators: tuple
    lattice_basis: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        r = self.rank
        if r < 1:
            raise ConfigError("rank must be positive")
        gram = np.asarray(self.gram, dtype=float)
        lat = np.asarray(self.lattice_basis, dtype=float)
        gens = tuple(np.asarray(g, dtype=float) for g in self.weyl_generators)
        if gram.shape != (r, r) or lat.shape != (r, r):
            raise DimensionMismatch("gram and lattice_basis must be rank x rank")
        if any(g.shape != (r, r) for g in gens):
            raise DimensionMismatch("Weyl generators must be rank x rank")
        if np.abs(gram - gram.T).max() > 1e-12 or np.linalg.eigvalsh(gram).min() <= 0:
            raise ConfigError("gram must be symmetric positive-definite")
        if abs(np.linalg.det(lat)) < 1e-12:
            raise ConfigError("lattice_basis is singular")
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "lattice_basis", lat)
        object.__setattr__(self, "weyl_generators", gens)

    @property
    def is_orthonormal(self) -> bool:
        return bool(np.abs(self.gram - np.eye(self.rank)).max() < 1e-12)

    def lattice_coordinates(self, vec: np.ndarray) -> np.ndarray:
        """Coordinates of ``vec`` (in the T_j basis) with respect to the lattice basis."""
        return np.linalg.solve(self.lattice_basis, vec)

    def orthonormalized(self) -> "CartanData":
        """Same data expressed in a gram-orthonormal basis of the Cartan subalgebra."""
        if self.is_orthonormal:
            return self
        L = np.linalg.cholesky(self.gram)  # gram = L L^T; new coords y = L^T x
        Lt, Lt_inv = L.T, np.linalg.inv(L.T)
        return CartanData(
            rank=self.rank,
            gram=np.eye(self.rank),
            weyl_generators=tuple(Lt @ w @ Lt_inv for w in self.weyl_generators),
            lattice_basis=Lt @ self.lattice_basis,
            name=self.name,
        )


def preset_a1() -> CartanData:
    return CartanData(
        rank=1,
        gram=np.eye(1),
        weyl_generators=(-np.eye(1),),
        lattice_basis=np.array([[np.sqrt(2.0) * LATTICE_SCALE]]),
        name="A1",
    )


def _trace_zero_basis(n: int) -> np.ndarray:
    """Orthonormal basis (columns) of the trace-zero diagonal matrices in R^n."""
    M = np.eye(n)[:, :-1] - np.eye(n)[:, 1:]
    Q, _ = np.linalg.qr(M)
    return Q


def preset_an(n: int) -> CartanData:
    """SU(n): trace-zero diagonals, Weyl group S_n acting by permutations."""
    if n < 2:
        raise ConfigError("A_{n-1} preset needs n >= 2")
    B = _trace_zero_basis(n)  # n x (n-1)
    gens = []
    for i in range(n - 1):
        P = np.eye(n)
        P[[i, i + 1]] = P[[i + 1, i]]
        gens.append(B.T @ P @ B)
    coroots = np.eye(n)[:, :-1] - np.eye(n)[:, 1:]
    lat = B.T @ coroots * LATTICE_SCALE
    return CartanData(
        rank=n - 1, gram=np.eye(n - 1), weyl_generators=tuple(gens),
        lattice_basis=lat, name=f"A{n - 1}",
    )


def from_config(cfg: dict) -> CartanData:
    preset = cfg.get("preset", "A1")
    if preset == "A1":
        return preset_a1()
    if preset == "An":
        return preset_an(int(cfg.get("rank", 1)) + 1)
    if preset == "custom":
        try:
            r = int(cfg["rank"])
            return CartanData(
                rank=r,
                gram=np.asarray(cfg["gram"], dtype=float).reshape(r, r),
                weyl_generators=tuple(
                    np.asarray(g, dtype=float).reshape(r, r) for g in cfg["weyl_generators"]
                ),
                lattice_basis=np.asarray(cfg["lattice_basis"], dtype=float).reshape(r, r),
            )
        except KeyError as exc:
            raise ConfigError(f"custom cartan block is missing {exc}") from None
    raise ConfigError(f"unknown preset {preset!r}")


def enumerate_weyl(data: CartanData, max_order: int = 10_000, tol: float = 1e-10) -> list:
    """Close the generators under multiplication; returns the full finite group."""
    r = data.rank
    elements = [np.eye(r)]
    frontier = [np.eye(r)]

    def known(m):
        return any(np.abs(m - e).max() < tol for e in elements)

    while frontier:
        new = []
        for a in frontier:
            for g in data.weyl_generators:
                m = g @ a
                if not known(m):
                    elements.append(m)
                    new.append(m)
                    if len(elements) > max_order:
                        raise GroupTooLarge(
                            f"Weyl closure exceeded {max_order} elements; generators are not of finite order"
                        )
        frontier = new
    return elements


@dataclass(frozen=True)
class GaugeElement:
    """Element (w, lambda, mu) of W ⋉ (Λ ⊕ Λ), acting as x -> w x + shift.

    ``lattice_shift`` holds integer coordinates in the lattice basis, one vector
    per torus factor.
    """

    weyl_index: int
    lattice_shift: tuple = field(default=((0,), (0,)))

    def shift_vectors(self, data: CartanData) -> tuple:
        lam = data.lattice_basis @ np.asarray(self.lattice_shift[0], dtype=float)
        mu = data.lattice_basis @ np.asarray(self.lattice_shift[1], dtype=float)
        return lam, mu


def identity_element(data: CartanData) -> GaugeElement:
    z = tuple([0] * data.rank)
    return GaugeElement(0, (z, z))


def compose(g1: GaugeElement, g2: GaugeElement, data: CartanData, weyl: Sequence[np.ndarray]) -> GaugeElement:
    """g1 ∘ g2, i.e. x -> w1 (w2 x + s2) + s1."""
    w1, w2 = weyl[g1.weyl_index], weyl[g2.weyl_index]
    prod = w1 @ w2
    idx = next(i for i, w in enumerate(weyl) if np.abs(w - prod).max() < 1e-10)
    L, Linv = data.lattice_basis, np.linalg.inv(data.lattice_basis)
    shifts = []
    for f in range(2):
        s2 = L @ np.asarray(g2.lattice_shift[f], dtype=float)
        s1 = L @ np.asarray(g1.lattice_shift[f], dtype=float)
        n = Linv @ (w1 @ s2 + s1)
        shifts.append(tuple(int(v) for v in np.rint(n)))
    return GaugeElement(idx, tuple(shifts))


def gauge_act(g: GaugeElement, point, data: CartanData, weyl: Sequence[np.ndarray]):
    """Act on a point (x, y) of t×t (real or complex vectors)."""
    x, y = (np.asarray(c) for c in point)
    r = data.rank
    if x.shape != (r,) or y.shape != (r,):
        raise DimensionMismatch(f"expected two vectors of length {r}")
    w = weyl[g.weyl_index]
    lam, mu = g.shift_vectors(data)
    return w @ x + lam, w @ y + mu


def random_gauge_element(rng: np.random.Generator, data: CartanData, weyl, span: int = 2) -> GaugeElement:
    r = data.rank
    return GaugeElement(
        int(rng.integers(len(weyl))),
        (tuple(int(v) for v in rng.integers(-span, span + 1, r)),
         tuple(int(v) for v in rng.integers(-span, span + 1, r))),
    )

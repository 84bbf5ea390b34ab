"""Reusable scenes and point-set fixtures (also used by the CLI and the acceptance suite)."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .complex_core import CubicalComplex, build_grid, chain_vector
from .covering import Ball, BallUnion
from .geometry import BoxSet, MeasuredSet
from .homology import Integers
from .spanning import Scene

__all__ = [
    "block_cells",
    "ring_chain",
    "block_scene",
    "two_point_scene",
    "diagonal_scene",
    "DiskTentacle",
    "ring_film_scene",
    "tentacle_sequence",
]


def block_cells(K: CubicalComplex, lo, hi) -> CubicalComplex:
    """Closed subcomplex made of the top cells of K inside the box ``[lo, hi]`` (grid units)."""
    n = K.n
    tops = [
        c
        for c in K.cells_of_dim(n)
        if all(lo[i] <= c[0][i] and c[0][i] + 1 <= hi[i] for i in range(n))
    ]
    return K.subcomplex(tops)


def ring_chain(K: CubicalComplex, lo, hi) -> dict:
    """Oriented boundary 1-cycle of the planar rectangle ``[lo, hi]`` (grid units, axes 0 and 1)."""
    (x0, y0), (x1, y1) = lo, hi
    chain = {}
    for x in range(x0, x1):
        chain[((x, y0), (0,))] = 1
        chain[((x, y1), (0,))] = -1
    for y in range(y0, y1):
        chain[((x1, y), (1,))] = 1
        chain[((x0, y), (1,))] = -1
    return chain


def block_scene(m: int = 4, side=Fraction(1, 4), filled: bool = True, margin: int = 1) -> Scene:
    """Γ = boundary ring of an m x m block of 2-cells in R^2, d = 2, L = <ring>.

    The competitor is the filled block (or the ring itself when ``filled`` is
    false, which does not span).
    """
    side = Fraction(side)
    K = build_grid([(-margin * side, (m + margin) * side)] * 2, side)
    block = block_cells(K, (0, 0), (m, m))
    chain = ring_chain(K, (0, 0), (m, m))
    gamma = K.subcomplex(list(chain))
    E = block if filled else gamma
    vec = chain_vector(gamma, 1, chain)
    return Scene(K, gamma, E, 2, Integers, (tuple(vec),))


def two_point_scene(side=Fraction(1, 8), path: str = "straight", margin: int = 2) -> Scene:
    """Γ = {(0,0), (1,0)}, d = 1, L = <[p] - [q]>.

    ``path`` selects the starting competitor: ``straight`` (the axis segment),
    ``detour`` (a U-shaped path through y = 2 margin cells) or ``none``.
    """
    side = Fraction(side)
    m = int(1 / side)
    K = build_grid([(-margin * side, 1 + margin * side), (-margin * side, (margin + 1) * side)], side)
    p, q = ((0, 0), ()), ((m, 0), ())
    gamma = K.subcomplex([p, q])
    if path == "straight":
        edges = [((x, 0), (0,)) for x in range(m)]
    elif path == "detour":
        h = margin
        edges = [((0, y), (1,)) for y in range(h)]
        edges += [((x, h), (0,)) for x in range(m)]
        edges += [((m, y), (1,)) for y in range(h)]
    elif path == "none":
        edges = []
    else:
        raise ValueError(f"unknown path {path!r}")
    E = K.subcomplex(edges) if edges else K.subcomplex([p, q])
    return Scene(K, gamma, E, 1, Integers, ((1, -1),))


def diagonal_scene(side=Fraction(1, 2), margin: int = 1) -> Scene:
    """Γ = {(0,0), (1,1)}, d = 1, started from the L-shaped path along the axes."""
    side = Fraction(side)
    m = int(1 / side)
    K = build_grid([(-margin * side, 1 + margin * side)] * 2, side)
    p, q = ((0, 0), ()), ((m, m), ())
    gamma = K.subcomplex([p, q])
    edges = [((x, 0), (0,)) for x in range(m)] + [((m, y), (1,)) for y in range(m)]
    return Scene(K, gamma, K.subcomplex(edges), 1, Integers, ((1, -1),))


def ring_film_scene(side=Fraction(1, 2), margin: int = 1) -> Scene:
    """Γ = boundary of the unit square in the plane z = 0 of R^3, d = 2.

    The starting competitor is the open box: the top face and four walls of
    the unit cube, whose bottom is the flat minimizer.
    """
    side = Fraction(side)
    m = int(1 / side)
    K = build_grid([(-margin * side, 1 + margin * side)] * 3, side)
    ring = {}
    for x in range(m):
        ring[((x, 0, 0), (0,))] = 1
        ring[((x, m, 0), (0,))] = -1
    for y in range(m):
        ring[((m, y, 0), (1,))] = 1
        ring[((0, y, 0), (1,))] = -1
    gamma = K.subcomplex(list(ring))
    faces = [((x, y, m), (0, 1)) for x in range(m) for y in range(m)]
    for t in range(m):
        for z in range(m):
            faces += [((t, 0, z), (0, 2)), ((t, m, z), (0, 2)), ((0, t, z), (1, 2)), ((m, t, z), (1, 2))]
    vec = chain_vector(gamma, 1, ring)
    return Scene(K, gamma, K.subcomplex(faces), 2, Integers, (tuple(vec),))


def tentacle_sequence(side=Fraction(1, 4), length: int = 4, kind: str = "vanishing") -> tuple[list[Scene], Scene]:
    """Filled unit square plus a one-cell-wide strip of 2-cells sticking out to the right.

    ``vanishing``: the strip loses one cell per step and is gone at the end;
    ``constant``: the strip keeps its full length; ``abandon``: E_k is the bare
    ring plus the strip (not spanning, with persistent mass away from the limit).
    Returns the sequence and the limit scene (the filled square) on a shared grid.
    """
    side = Fraction(side)
    m = int(1 / side)
    K = build_grid([(-side, 1 + (length + 1) * side), (-side, 1 + side)], side)
    block = block_cells(K, (0, 0), (m, m))
    chain = ring_chain(K, (0, 0), (m, m))
    gamma = K.subcomplex(list(chain))
    L = (tuple(chain_vector(gamma, 1, chain)),)
    row = m // 2
    seq = []
    for k in range(length + 1):
        keep = length if kind in ("constant", "abandon") else length - k
        strip = [((m + t, row), (0, 1)) for t in range(keep)]
        base = gamma if kind == "abandon" else block
        E = base.union(K.subcomplex(strip)) if strip else base
        seq.append(Scene(K, gamma, E, 2, Integers, L))
    return seq, Scene(K, gamma, block, 2, Integers, L)


@dataclass
class DiskTentacle:
    """E = the unit square (d = n = 2), Γ = its boundary, E_k = E plus a thin far tentacle.

    The tentacle is the box ``[1, 1 + length] x [1/2 - w/2, 1/2 + w/2]`` with
    ``w = w0 * 2^-k``; its mass tends to 0 so E is the weak-limit surrogate.
    """

    k: int = 8
    w0: float = 0.2
    length: float = 2.0

    n: int = 2
    d: int = 2

    @property
    def width(self) -> float:
        return self.w0 * 2.0 ** (-self.k)

    @property
    def E(self) -> BoxSet:
        return BoxSet.from_boxes([((0.0, 0.0), (1.0, 1.0))])

    @property
    def gamma(self) -> BoxSet:
        return BoxSet.from_boxes(
            [((0.0, 0.0), (1.0, 0.0)), ((0.0, 1.0), (1.0, 1.0)), ((0.0, 0.0), (0.0, 1.0)), ((1.0, 0.0), (1.0, 1.0))]
        )

    @property
    def tentacle(self) -> BoxSet:
        w = self.width
        return BoxSet.from_boxes([((1.0, 0.5 - w / 2), (1.0 + self.length, 0.5 + w / 2))])

    @property
    def B0(self) -> Ball:
        return Ball(np.array([(1.0 + self.length) / 2, 0.5]), (1.0 + self.length) / 2 + 0.25)

    def tentacle_mass(self) -> float:
        return self.width * self.length

    def tentacle_sample(self, h: float) -> MeasuredSet:
        """Midpoint sample of the tentacle with spacing at most ``h`` along it (2 rows across)."""
        lo, hi = self.tentacle.lows[0], self.tentacle.highs[0]
        m = max(1, int(np.ceil((hi[0] - lo[0]) / h)))
        xs = lo[0] + (hi[0] - lo[0]) * (np.arange(m) + 0.5) / m
        ys = lo[1] + (hi[1] - lo[1]) * np.array([0.25, 0.75])
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        P = np.stack([X.ravel(), Y.ravel()], axis=1)
        w = (hi[0] - lo[0]) / m * (hi[1] - lo[1]) / 2
        return MeasuredSet(2, P, np.full(len(P), w), np.repeat(np.eye(2)[None], len(P), axis=0))

    def alpha(self, radius: float = 0.5, spacing: float = 0.35) -> list[BallUnion]:
        """Open covering of E ∪ Γ by balls on a square lattice."""
        ticks = np.arange(-0.1, 1.1 + 1e-9, spacing)
        return [BallUnion([Ball(np.array([x, y]), radius)]) for x in ticks for y in ticks]

    def scene(self, side=Fraction(1, 2)) -> Scene:
        """Cubical surrogate of the limit: the filled square spanning its boundary ring."""
        side = Fraction(side)
        m = int(1 / side)
        K = build_grid([(-side, 1 + side)] * 2, side)
        block = block_cells(K, (0, 0), (m, m))
        chain = ring_chain(K, (0, 0), (m, m))
        gamma = K.subcomplex(list(chain))
        return Scene(K, gamma, block, 2, Integers, (tuple(chain_vector(gamma, 1, chain)),))

    def gamma_cycle(self, side=Fraction(1, 2)) -> tuple[CubicalComplex, dict]:
        sc = self.scene(side)
        m = int(1 / Fraction(side))
        return sc.gamma, ring_chain(sc.grid, (0, 0), (m, m))

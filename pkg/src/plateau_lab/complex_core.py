"""Finite cubical and simplicial complexes and their integer chain complexes.

Cubical cells are stored combinatorially as ``(anchor, axes)`` where ``anchor``
is an integer vector in grid units and ``axes`` is a sorted tuple of 0-based
axis indices.  The closed cell is the box
``origin + side * [anchor, anchor + sum(e_i for i in axes)]``.
Simplicial cells are sorted tuples of integer vertex ids.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Sequence, Union

import numpy as np

CubeCell = tuple[tuple[int, ...], tuple[int, ...]]
Simplex = tuple[int, ...]
Cell = Union[CubeCell, Simplex]


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**12)
    return Fraction(value)


def cube_faces(cell: CubeCell) -> list[tuple[CubeCell, int]]:
    """Codimension-one faces of a cube with their incidence signs.

    Orientation is the product orientation by increasing axis, so
    ``d[a; (i1..im)] = sum_k (-1)^k ([a + e_ik; rest] - [a; rest])``.
    """
    anchor, axes = cell
    out = []
    for idx, axis in enumerate(axes):
        rest = axes[:idx] + axes[idx + 1:]
        sign = 1 if idx % 2 == 0 else -1
        upper = list(anchor)
        upper[axis] += 1
        out.append(((anchor, rest), -sign))
        out.append(((tuple(upper), rest), sign))
    return out


def simplex_faces(simplex: Simplex) -> list[tuple[Simplex, int]]:
    if len(simplex) <= 1:
        return []
    return [
        (simplex[:i] + simplex[i + 1:], 1 if i % 2 == 0 else -1)
        for i in range(len(simplex))
    ]


def _closure(cells: Iterable, faces: Callable) -> frozenset:
    seen = set()
    stack = list(cells)
    while stack:
        c = stack.pop()
        if c in seen:
            continue
        seen.add(c)
        stack.extend(f for f, _ in faces(c))
    return frozenset(seen)


class _ComplexMixin:
    """Operations shared by both complex kinds (they only need ``cells``)."""

    cells: frozenset

    def cell_dim(self, cell) -> int:
        raise NotImplementedError

    def faces(self, cell) -> list:
        raise NotImplementedError

    def sort_key(self, cell):
        raise NotImplementedError

    @property
    def dim(self) -> int:
        return max((self.cell_dim(c) for c in self.cells), default=-1)

    def cells_of_dim(self, k: int) -> list:
        return self._by_dim.get(k, [])

    @cached_property
    def _by_dim(self) -> dict[int, list]:
        out: dict[int, list] = {}
        for c in self.cells:
            out.setdefault(self.cell_dim(c), []).append(c)
        for k in out:
            out[k].sort(key=self.sort_key)
        return out

    def counts(self) -> list[int]:
        return [len(self.cells_of_dim(k)) for k in range(self.dim + 1)]

    def __contains__(self, cell) -> bool:
        return cell in self.cells

    def __len__(self) -> int:
        return len(self.cells)

    def is_closed(self) -> bool:
        return all(f in self.cells for c in self.cells for f, _ in self.faces(c))

    def closure_of(self, cells: Iterable) -> frozenset:
        return _closure(cells, self.faces)

    def subcomplex(self, cells: Iterable):
        """Complex of the same kind generated by ``cells`` (face closure)."""
        return self.with_cells(self.closure_of(cells))

    def is_subcomplex_of(self, other) -> bool:
        return self.cells <= other.cells

    def union(self, other):
        self._check_compatible(other)
        return self.with_cells(self.cells | other.cells)

    def intersection(self, other):
        self._check_compatible(other)
        return self.with_cells(self.cells & other.cells)

    def with_cells(self, cells):
        raise NotImplementedError

    def _check_compatible(self, other) -> None:
        if type(self) is not type(other):
            raise TypeError("complexes of different kinds")

    def euler_characteristic(self) -> int:
        return sum((-1) ** self.cell_dim(c) for c in self.cells)


@dataclass(frozen=True)
class CubicalComplex(_ComplexMixin):
    n: int
    side: Fraction
    origin: tuple
    cells: frozenset

    kind = "cubical"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("ambient dimension must be >= 1")
        object.__setattr__(self, "side", _as_fraction(self.side))
        if self.side <= 0:
            raise ValueError("side must be positive")
        origin = tuple(_as_fraction(o) for o in self.origin)
        if len(origin) != self.n:
            raise ValueError("origin has wrong length")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "cells", frozenset(self.cells))

    def cell_dim(self, cell: CubeCell) -> int:
        return len(cell[1])

    def faces(self, cell: CubeCell):
        return cube_faces(cell)

    def sort_key(self, cell: CubeCell):
        return (len(cell[1]), cell[0], cell[1])

    def with_cells(self, cells) -> "CubicalComplex":
        return CubicalComplex(self.n, self.side, self.origin, frozenset(cells))

    def _check_compatible(self, other) -> None:
        super()._check_compatible(other)
        if (self.n, self.side, self.origin) != (other.n, other.side, other.origin):
            raise ValueError("cubical complexes live on different grids")

    @property
    def diameter_bound(self) -> float:
        """Upper bound ``side * sqrt(n)`` on the diameter of every cell."""
        return float(self.side) * math.sqrt(self.n)

    def cell_diameter(self, cell: CubeCell) -> float:
        return float(self.side) * math.sqrt(len(cell[1]))

    def cell_box(self, cell: CubeCell) -> tuple[np.ndarray, np.ndarray]:
        anchor, axes = cell
        s = float(self.side)
        lo = np.array([float(o) for o in self.origin]) + s * np.asarray(anchor, float)
        hi = lo.copy()
        for i in axes:
            hi[i] += s
        return lo, hi

    def cell_box_exact(self, cell: CubeCell) -> tuple[tuple, tuple]:
        anchor, axes = cell
        lo = tuple(o + self.side * a for o, a in zip(self.origin, anchor))
        hi = tuple(v + (self.side if i in axes else 0) for i, v in enumerate(lo))
        return lo, hi

    def barycenter(self, cell: CubeCell) -> np.ndarray:
        lo, hi = self.cell_box(cell)
        return (lo + hi) / 2

    def refine(self) -> "CubicalComplex":
        """Halve the side; every cell is replaced by its 2^dim subcells (and faces)."""
        cells = set()
        for anchor, axes in self.cells:
            base = tuple(2 * a for a in anchor)
            for eps in itertools.product((0, 1), repeat=len(axes)):
                sub = list(base)
                for e, ax in zip(eps, axes):
                    sub[ax] += e
                cells.add((tuple(sub), axes))
        return CubicalComplex(self.n, self.side / 2, self.origin, _closure(cells, cube_faces))

    def refine_chain(self, chain: dict) -> dict:
        """Image of a chain under the refinement chain map (orientation preserving)."""
        out: dict = {}
        for (anchor, axes), coeff in chain.items():
            base = tuple(2 * a for a in anchor)
            for eps in itertools.product((0, 1), repeat=len(axes)):
                sub = list(base)
                for e, ax in zip(eps, axes):
                    sub[ax] += e
                key = (tuple(sub), axes)
                out[key] = out.get(key, 0) + coeff
        return {c: v for c, v in out.items() if v}


@dataclass(frozen=True)
class SimplicialComplex(_ComplexMixin):
    simplexes: frozenset

    kind = "simplicial"

    def __post_init__(self):
        simplexes = frozenset(tuple(sorted(s)) for s in self.simplexes)
        for s in simplexes:
            if len(set(s)) != len(s) or not s:
                raise ValueError(f"bad simplex {s}")
        object.__setattr__(self, "simplexes", simplexes)

    @classmethod
    def from_maximal(cls, simplexes: Iterable[Sequence[int]]) -> "SimplicialComplex":
        return cls(_closure((tuple(sorted(s)) for s in simplexes), simplex_faces))

    @property
    def cells(self) -> frozenset:
        return self.simplexes

    @cached_property
    def vertices(self) -> frozenset:
        return frozenset(v for s in self.simplexes for v in s)

    def cell_dim(self, cell: Simplex) -> int:
        return len(cell) - 1

    def faces(self, cell: Simplex):
        return simplex_faces(cell)

    def sort_key(self, cell: Simplex):
        return (len(cell), cell)

    def with_cells(self, cells) -> "SimplicialComplex":
        return SimplicialComplex(frozenset(cells))


AnyComplex = Union[CubicalComplex, SimplicialComplex]


def build_grid(bbox: Sequence[Sequence], side, origin: Sequence | None = None) -> CubicalComplex:
    """Full cubical grid covering ``bbox``.

    Takes every top cell whose interior meets the interior of the box, plus
    all of their faces.  ``bbox`` is a sequence of ``(lo, hi)`` per axis.
    """
    side = _as_fraction(side)
    if side <= 0:
        raise ValueError("side must be positive")
    n = len(bbox)
    if n < 1:
        raise ValueError("empty bbox")
    lows = [_as_fraction(b[0]) for b in bbox]
    highs = [_as_fraction(b[1]) for b in bbox]
    if any(h <= lo for lo, h in zip(lows, highs)):
        raise ValueError("degenerate bbox")
    origin = tuple(_as_fraction(o) for o in (origin if origin is not None else [0] * n))
    ranges = []
    for lo, hi, o in zip(lows, highs, origin):
        first = math.floor((lo - o) / side)
        last = math.ceil((hi - o) / side) - 1
        idx = [a for a in range(first, last + 1) if o + side * a < hi and o + side * (a + 1) > lo]
        ranges.append(idx)
    axes = tuple(range(n))
    tops = [(tuple(a), axes) for a in itertools.product(*ranges)]
    return CubicalComplex(n, side, origin, _closure(tops, cube_faces))


def skeleton(K: AnyComplex, k: int) -> AnyComplex:
    if not 0 <= k <= max(K.dim, 0):
        raise ValueError(f"skeleton degree {k} out of range for dimension {K.dim}")
    return K.with_cells(c for c in K.cells if K.cell_dim(c) <= k)


def star(K: SimplicialComplex, p: int) -> tuple[frozenset, SimplicialComplex]:
    """Open star of vertex ``p`` and the complementary subcomplex of simplexes avoiding ``p``."""
    if p not in K.vertices:
        raise KeyError(f"unknown vertex {p}")
    open_star = frozenset(s for s in K.simplexes if p in s)
    rest = SimplicialComplex(frozenset(s for s in K.simplexes if p not in s))
    return open_star, rest


def _sorted_with_sign(vertices: Sequence[int]) -> tuple[tuple[int, ...], int]:
    """Sort vertex ids, returning the permutation sign (0 if a vertex repeats)."""
    verts = list(vertices)
    if len(set(verts)) != len(verts):
        return tuple(sorted(set(verts))), 0
    sign = 1
    for i in range(len(verts)):
        for j in range(len(verts) - 1 - i):
            if verts[j] > verts[j + 1]:
                verts[j], verts[j + 1] = verts[j + 1], verts[j]
                sign = -sign
    return tuple(verts), sign


@dataclass(frozen=True)
class Subdivision:
    """Barycentric subdivision with the labels of new vertices and its chain map."""

    complex: SimplicialComplex
    labels: dict  # new vertex id -> cell of the original complex
    ids: dict  # original cell -> new vertex id
    source: AnyComplex

    def chain_map(self, chain: dict) -> dict:
        """Subdivision chain map, built as cone(barycenter, sd(boundary))."""
        out: dict = {}
        for cell, coeff in chain.items():
            for simplex, s in self._sd_cell(cell).items():
                out[simplex] = out.get(simplex, 0) + coeff * s
        return {c: v for c, v in out.items() if v}

    def _sd_cell(self, cell) -> dict:
        memo = self.__dict__.setdefault("_memo", {})
        if cell in memo:
            return memo[cell]
        b = self.ids[cell]
        faces = self.source.faces(cell)
        if not faces:
            result = {(b,): 1}
        else:
            result: dict = {}
            for face, sign in faces:
                for simplex, s in self._sd_cell(face).items():
                    verts, perm = _sorted_with_sign((b,) + simplex)
                    if perm:
                        result[verts] = result.get(verts, 0) + sign * s * perm
            result = {k: v for k, v in result.items() if v}
        memo[cell] = result
        return result


def subdivide(K: AnyComplex) -> Subdivision:
    """Barycentric subdivision of a simplicial or cubical complex.

    New vertices are the cells of ``K`` (numbered in sorted order); simplexes
    are strictly increasing flags of cells.
    """
    ordered = sorted(K.cells, key=K.sort_key)
    ids = {c: i for i, c in enumerate(ordered)}
    # cofaces by one dimension, to grow flags upward
    up: dict = {c: [] for c in ordered}
    for c in ordered:
        for f, _ in K.faces(c):
            up[f].append(c)
    flags = []

    def grow(chain):
        flags.append(tuple(sorted(ids[c] for c in chain)))
        for nxt in _all_cofaces(chain[-1]):
            grow(chain + [nxt])

    coface_cache: dict = {}

    def _all_cofaces(c):
        if c not in coface_cache:
            found = set()
            stack = list(up[c])
            while stack:
                x = stack.pop()
                if x not in found:
                    found.add(x)
                    stack.extend(up[x])
            coface_cache[c] = sorted(found, key=K.sort_key)
        return coface_cache[c]

    for c in ordered:
        grow([c])
    sd = SimplicialComplex(frozenset(flags))
    return Subdivision(sd, {i: c for c, i in ids.items()}, ids, K)


def barycentric_subdivide(K: AnyComplex) -> SimplicialComplex:
    return subdivide(K).complex


@dataclass(frozen=True)
class ChainComplexRep:
    """Integer boundary matrices ``boundary[k]`` : C_k -> C_{k-1}.

    ``boundary[0]`` is the empty 0 x n_0 matrix; rows of ``boundary[k]`` are
    indexed by ``cells[k-1]`` and columns by ``cells[k]``.
    """

    cells: tuple
    boundary: tuple

    def index(self, k: int) -> dict:
        return {c: i for i, c in enumerate(self.cells[k])} if k < len(self.cells) else {}

    def matrix(self, k: int) -> list[list[int]]:
        if k <= 0 or k >= len(self.boundary):
            rows = len(self.cells[k - 1]) if 0 < k <= len(self.cells) else 0
            cols = len(self.cells[k]) if 0 <= k < len(self.cells) else 0
            return [[0] * cols for _ in range(rows)]
        return self.boundary[k]

    def size(self, k: int) -> int:
        return len(self.cells[k]) if 0 <= k < len(self.cells) else 0


def chain_complex(K: AnyComplex) -> ChainComplexRep:
    cached = K.__dict__.get("_chain_complex")
    if cached is not None:
        return cached
    top = K.dim
    cells = tuple(tuple(K.cells_of_dim(k)) for k in range(top + 1))
    mats: list = [[]]
    for k in range(1, top + 1):
        rows = {c: i for i, c in enumerate(cells[k - 1])}
        mat = [[0] * len(cells[k]) for _ in cells[k - 1]]
        for j, c in enumerate(cells[k]):
            for f, s in K.faces(c):
                mat[rows[f]][j] += s
        mats.append(mat)
    rep = ChainComplexRep(cells, tuple(mats))
    K.__dict__["_chain_complex"] = rep
    return rep


def chain_vector(K: AnyComplex, k: int, chain: dict | Sequence) -> list:
    """Dense coefficient vector of a chain over the sorted k-cells of ``K``."""
    basis = K.cells_of_dim(k)
    if isinstance(chain, dict):
        idx = {c: i for i, c in enumerate(basis)}
        vec = [0] * len(basis)
        for c, v in chain.items():
            if c not in idx:
                raise KeyError(f"cell {c} is not a {k}-cell of the complex")
            vec[idx[c]] += v
        return vec
    if len(chain) != len(basis):
        raise ValueError(f"chain has length {len(chain)}, expected {len(basis)}")
    return list(chain)


# --- JSON --------------------------------------------------------------------


def cell_to_json(K: AnyComplex, cell):
    if K.kind == "cubical":
        return [list(cell[0]), list(cell[1])]
    return list(cell)


def cell_from_json(kind: str, obj):
    if kind == "cubical":
        anchor, axes = obj
        return (tuple(int(a) for a in anchor), tuple(sorted(int(a) for a in axes)))
    return tuple(sorted(int(v) for v in obj))


def complex_to_json(K: AnyComplex) -> dict:
    cells = [cell_to_json(K, c) for c in sorted(K.cells, key=K.sort_key)]
    if K.kind == "cubical":
        return {
            "kind": "cubical",
            "n": K.n,
            "side": str(K.side),
            "origin": [str(o) for o in K.origin],
            "cells": cells,
        }
    return {"kind": "simplicial", "cells": cells}


def complex_from_json(obj: dict) -> AnyComplex:
    kind = obj.get("kind")
    if kind == "cubical":
        cells = [cell_from_json(kind, c) for c in obj["cells"]]
        return CubicalComplex(int(obj["n"]), Fraction(obj["side"]), tuple(Fraction(o) for o in obj["origin"]), cells)
    if kind == "simplicial":
        return SimplicialComplex(frozenset(cell_from_json(kind, c) for c in obj["cells"]))
    raise ValueError(f"unknown complex kind {kind!r}")

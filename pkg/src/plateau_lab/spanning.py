"""Competitor predicates, closure operations and sliding-deformation traces."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .complex_core import (
    AnyComplex,
    CubicalComplex,
    SimplicialComplex,
    cell_from_json,
    cell_to_json,
    complex_from_json,
    complex_to_json,
)
from .homology import (
    CoefficientGroup,
    HomologyPresentation,
    Integers,
    SubgroupSpec,
    _integral_q,
    _relation_block,
    homology,
    induced_map,
    is_solvable,
    is_zero_on_subgroup,
)

__all__ = [
    "Scene",
    "Move",
    "DeformationTrace",
    "ValidationReport",
    "is_reifenberg_competitor",
    "is_nakauchi_competitor",
    "superset_closure_check",
    "pushforward_competitor",
    "validate_sliding_deformation",
    "apply_trace",
    "collapse_move",
    "carve_move",
    "push_move",
    "window_from_top_cells",
]


@dataclass(frozen=True)
class Scene:
    """Ambient complex, boundary Γ, competitor E, dimension d, coefficients, subgroup L.

    ``L_cycles`` are the generating (d-1)-cycles of Γ as dense vectors over
    Γ's sorted (d-1)-cells; ``L`` is derived from them.
    """

    grid: AnyComplex
    gamma: AnyComplex
    competitor: AnyComplex
    d: int
    G: CoefficientGroup = Integers
    L_cycles: tuple = ()
    confine: frozenset | None = None

    def __post_init__(self):
        if not self.gamma.is_subcomplex_of(self.grid):
            raise ValueError("gamma is not a subcomplex of the grid")
        if not self.competitor.is_subcomplex_of(self.grid):
            raise ValueError("competitor is not a subcomplex of the grid")
        if not self.gamma.is_closed() or not self.competitor.is_closed():
            raise ValueError("gamma and competitor must be closed under faces")
        top = self.grid.n if self.grid.kind == "cubical" else max(self.grid.dim, 0)
        if not 1 <= self.d <= max(top, 1):
            raise ValueError(f"d={self.d} out of range")
        object.__setattr__(self, "L_cycles", tuple(tuple(c) for c in self.L_cycles))
        self.L  # validates the cycles

    @property
    def L(self) -> SubgroupSpec:
        cached = self.__dict__.get("_L")
        if cached is None:
            cached = SubgroupSpec.from_cycles(self.gamma_homology, self.L_cycles)
            self.__dict__["_L"] = cached
        return cached

    @property
    def gamma_homology(self) -> HomologyPresentation:
        return homology(self.gamma, self.d - 1, self.G)

    @property
    def union(self) -> AnyComplex:
        return self.competitor.union(self.gamma)

    def with_competitor(self, E: AnyComplex | Iterable) -> "Scene":
        if not isinstance(E, (CubicalComplex, SimplicialComplex)):
            E = self.grid.subcomplex(E)
        new = Scene(self.grid, self.gamma, E, self.d, self.G, self.L_cycles, self.confine)
        new.__dict__["_L"] = self.__dict__.get("_L")
        return new

    @classmethod
    def whole_L(cls, grid, gamma, competitor, d, G=Integers, confine=None) -> "Scene":
        """Scene whose L is all of H_{d-1}(Γ), generated by the presentation's cycles."""
        pres = homology(gamma, d - 1, G)
        return cls(grid, gamma, competitor, d, G, tuple(pres.generators), confine)

    def to_json(self) -> dict:
        g = self.grid
        out = {
            "format": 1,
            "grid": complex_to_json(g),
            "gamma": [cell_to_json(g, c) for c in sorted(self.gamma.cells, key=g.sort_key)],
            "competitor": [cell_to_json(g, c) for c in sorted(self.competitor.cells, key=g.sort_key)],
            "d": self.d,
            "coefficients": str(self.G),
            "L": [list(c) for c in self.L_cycles],
        }
        if self.confine is not None:
            out["confine"] = [cell_to_json(g, c) for c in sorted(self.confine, key=g.sort_key)]
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "Scene":
        for key in ("grid", "gamma", "competitor", "d"):
            if key not in obj:
                raise ValueError(f"scene is missing field {key!r}")
        grid = complex_from_json(obj["grid"])
        kind = grid.kind

        def cells(seq):
            out = [cell_from_json(kind, c) for c in seq]
            for c in out:
                if c not in grid.cells:
                    raise ValueError(f"cell {c} is not in the grid")
            return out

        gamma = grid.subcomplex(cells(obj["gamma"]))
        comp = grid.subcomplex(cells(obj["competitor"]))
        G = CoefficientGroup.parse(obj.get("coefficients", "Z"))
        d = int(obj["d"])
        L = obj.get("L")
        confine = frozenset(cells(obj["confine"])) if obj.get("confine") is not None else None
        if L is None or L == "all":
            return cls.whole_L(grid, gamma, comp, d, G, confine)
        L = [[Fraction(x) if G.tag == "Q" else int(x) for x in v] for v in L]
        return cls(grid, gamma, comp, d, G, tuple(tuple(v) for v in L), confine)


# --- predicates ---------------------------------------------------------------------


def is_reifenberg_competitor(scene: Scene) -> bool:
    """True iff H_{d-1}(Γ) -> H_{d-1}(E ∪ Γ) vanishes on L."""
    f = induced_map(scene.gamma, scene.union, scene.d - 1, scene.G)
    return is_zero_on_subgroup(f, scene.L)


def is_nakauchi_competitor(scene: Scene) -> bool:
    """For each generator v of L, look for u in H(E∩Γ) with i_*u = v and i'_*u = 0."""
    k, G = scene.d - 1, scene.G
    inter = scene.competitor.intersection(scene.gamma)
    i = induced_map(inter, scene.gamma, k, G)
    ip = induced_map(inter, scene.competitor, k, G)
    pg, pe = i.target, ip.target
    ng, ne, nu = pg.rank, pe.rank, i.source.rank
    cols = []
    for j in range(nu):
        cols.append([i.matrix[r][j] for r in range(ng)] + [ip.matrix[r][j] for r in range(ne)])
    cols += [c + [0] * ne for c in _relation_block(pg)]
    cols += [[0] * ng + c for c in _relation_block(pe)]
    ring = "Q" if G.tag == "Q" else "Z"
    if ring == "Q":
        cols = [_integral_q(c) for c in cols]
    A = [[c[r] for c in cols] for r in range(ng + ne)]
    for v in scene.L.generators:
        rhs = list(v) + [0] * ne
        if ring == "Q":
            # the system is homogeneous in scaling, so clear denominators of v alone
            rhs = _integral_q(rhs)
        if not any(rhs):
            continue
        if not cols:
            return False
        if not is_solvable(A, rhs, ring):
            return False
    return True


def superset_closure_check(scene: Scene, F: AnyComplex | Iterable) -> bool:
    """Predicate value after replacing E by a superset F (always true for competitors)."""
    if not isinstance(F, (CubicalComplex, SimplicialComplex)):
        F = scene.grid.subcomplex(F)
    if not scene.competitor.is_subcomplex_of(F):
        raise ValueError("F is not a superset of the competitor")
    return is_reifenberg_competitor(scene.with_competitor(F))


# --- cellular vertex maps ---------------------------------------------------------------


def _vertices(K: AnyComplex, cell) -> list:
    if K.kind == "cubical":
        anchor, axes = cell
        out = []
        for eps in itertools.product((0, 1), repeat=len(axes)):
            v = list(anchor)
            for e, ax in zip(eps, axes):
                v[ax] += e
            out.append((tuple(v), ()))
        return out
    return [(v,) for v in cell]


def _hull_cell(K: AnyComplex, verts: Iterable):
    """Smallest cell whose vertex set contains ``verts`` (None if there is none)."""
    verts = list(verts)
    if K.kind == "simplicial":
        return tuple(sorted({v[0] for v in verts}))
    pts = [v[0] for v in verts]
    lo = tuple(min(c) for c in zip(*pts))
    hi = tuple(max(c) for c in zip(*pts))
    if any(h - l > 1 for l, h in zip(lo, hi)):
        return None
    return (lo, tuple(i for i in range(len(lo)) if hi[i] > lo[i]))


def _image_cell(K: AnyComplex, cell, f: Mapping):
    """Image cell of ``cell`` under the vertex map ``f`` (identity off its keys).

    For cubes the map must be a product of coordinate projections, permutations
    and reflections on the cell, so the multilinear extension is onto a cell.
    """
    src = _vertices(K, cell)
    img = [f.get(v, v) for v in src]
    hull = _hull_cell(K, img)
    if hull is None:
        raise ValueError(f"image of {cell} is not contained in a single cell")
    if K.kind == "cubical":
        anchor, axes = cell
        lo = hull[0]
        used = set()
        for j in hull[1]:
            coord = [p[0][j] - lo[j] for p in img]
            match = None
            for idx, ax in enumerate(axes):
                eps = [p[0][ax] - anchor[ax] for p in src]
                if coord == eps or coord == [1 - e for e in eps]:
                    if idx not in used:
                        match = idx
                        break
            if match is None:
                raise ValueError(f"vertex map is not cellular on {cell}")
            used.add(match)
    return hull


def _map_cells(K: AnyComplex, cells: Iterable, f: Mapping) -> set:
    return {_image_cell(K, c, f) for c in cells}


def pushforward_competitor(scene: Scene, f: Mapping, certificate: Mapping) -> Scene:
    """Scene with E replaced by the image f(E) of a cellular vertex map.

    ``certificate["kind"]`` is either ``"identity-on-intersection"`` (f fixes
    every vertex of E∩Γ) or ``"gamma-moves"`` with ``certificate["moves"]`` a
    list of ``(vertex, new_image)`` steps turning the identity on E∩Γ into f
    by contiguous vertex moves that keep every cell of E∩Γ inside Γ.
    """
    K = scene.grid
    inter = scene.competitor.intersection(scene.gamma)
    inter_vertices = [c for c in inter.cells if inter.cell_dim(c) == 0]
    kind = certificate.get("kind")
    if kind == "identity-on-intersection":
        for v in inter_vertices:
            if f.get(v, v) != v:
                raise ValueError(f"certificate invalid: vertex {v} of E∩Γ is moved")
    elif kind == "gamma-moves":
        current = {v: v for v in inter_vertices}
        for step, (v, w) in enumerate(certificate.get("moves", [])):
            v, w = _as_vertex(K, v), _as_vertex(K, w)
            if v not in current:
                raise ValueError(f"certificate invalid: step {step} moves a vertex outside E∩Γ")
            before = dict(current)
            current[v] = w
            for cell in inter.cells:
                if v not in _vertices(K, cell):
                    continue
                for m in (before, current):
                    if _hull_cell(K, [m.get(x, x) for x in _vertices(K, cell)]) not in scene.gamma.cells:
                        raise ValueError(f"certificate invalid: step {step} moves a Γ-cell off Γ")
                joint = [before.get(x, x) for x in _vertices(K, cell)] + [current.get(x, x) for x in _vertices(K, cell)]
                if _hull_cell(K, joint) not in scene.gamma.cells:
                    raise ValueError(f"certificate invalid: step {step} is not a homotopy through Γ")
        for v in inter_vertices:
            if current[v] != f.get(v, v):
                raise ValueError("certificate invalid: moves do not end at f on E∩Γ")
    else:
        raise ValueError(f"unknown certificate kind {kind!r}")
    image = _map_cells(K, scene.competitor.cells, f)
    for c in image:
        if c not in K.cells:
            raise ValueError(f"image cell {c} is not in the grid")
    return scene.with_competitor(K.subcomplex(image))


def _as_vertex(K: AnyComplex, v):
    if K.kind == "cubical":
        if len(v) == 2 and isinstance(v[1], tuple) and len(v[1]) == 0:
            return (tuple(v[0]), ())
        return (tuple(v), ())
    return (v,) if isinstance(v, int) else tuple(v)


# --- sliding deformations -----------------------------------------------------------------


@dataclass(frozen=True)
class Move:
    """One elementary step: ``removed`` cells of E are pushed into ``image``; ``added`` cells join E."""

    kind: str
    removed: frozenset
    added: frozenset = frozenset()
    image: frozenset = frozenset()

    @property
    def footprint(self) -> frozenset:
        return self.removed


def collapse_move(K: AnyComplex, top, free_face) -> Move:
    """Elementary collapse of ``top`` through its free face ``free_face``."""
    faces = {f for f, _ in K.faces(top)}
    if free_face not in faces:
        raise ValueError("free_face is not a face of top")
    rest = K.closure_of(faces - {free_face})
    return Move("collapse", frozenset({top, free_face}), frozenset(), rest)


def carve_move(E: AnyComplex, cell) -> Move:
    """Remove ``cell`` and every face that no other cell of E uses."""
    keep = E.closure_of(c for c in E.cells if c != cell and not _is_face(E, c, cell))
    removed = frozenset(c for c in E.closure_of([cell]) if c not in keep)
    return Move("carve", removed, frozenset(), frozenset())


def _is_face(K: AnyComplex, big, small) -> bool:
    return big != small and small in K.closure_of([big])


def push_move(K: CubicalComplex, E: AnyComplex, box_cells: Iterable, gamma: AnyComplex | None = None) -> Move:
    """Push the part A of E lying on the boundary of a box of (d+1)-cubes across it.

    A must be a proper piece of the box boundary; it is replaced by the closure
    of the rest of the boundary.  Interior cells of the box may not belong to E.
    """
    box = K.closure_of(box_cells)
    interior = _open_interior(K, box)
    shell = box - interior
    if any(c in E.cells for c in interior):
        raise ValueError("box interior meets the competitor")
    if gamma is not None and any(c in gamma.cells for c in interior):
        raise ValueError("box interior meets gamma")
    top = max(K.cell_dim(c) for c in shell)
    A_top = {c for c in shell if K.cell_dim(c) == top and c in E.cells}
    A = K.closure_of(A_top)
    other = K.closure_of(c for c in shell if K.cell_dim(c) == top and c not in A_top)
    rim = A & other
    removed = frozenset(c for c in A if c not in rim)
    added = frozenset(c for c in other if c not in E.cells)
    return Move("push", removed, added, frozenset(other))


def _open_interior(K: AnyComplex, box: frozenset) -> frozenset:
    """Cells of a closed box (a pure k-complex) not lying on its topological boundary."""
    top = max(K.cell_dim(c) for c in box)
    tops = [c for c in box if K.cell_dim(c) == top]
    count: dict = {}
    for t in tops:
        for f, _ in K.faces(t):
            count[f] = count.get(f, 0) + 1
    boundary = K.closure_of(f for f, n in count.items() if n == 1)
    return frozenset(c for c in box if c not in boundary)


@dataclass(frozen=True)
class DeformationTrace:
    """Ordered moves, an open window (upward-closed cell set, None = everything) and Γ flags."""

    steps: tuple = ()
    window: frozenset | None = None
    fixed_gamma: tuple = ()


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violation: str | None = None
    step: int | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def window_from_top_cells(K: AnyComplex, tops: Iterable) -> frozenset:
    """Open window = interior of the union of the given top cells, as a cell set."""
    tops = set(tops)
    if K.kind == "cubical":
        n = K.n
        out = set()
        pool = K.closure_of(tops)
        for cell in pool:
            anchor, axes = cell
            free = [i for i in range(n) if i not in axes]
            ok = True
            for shifts in itertools.product((0, -1), repeat=len(free)):
                a = list(anchor)
                for i, s in zip(free, shifts):
                    a[i] += s
                if (tuple(a), tuple(range(n))) not in tops:
                    ok = False
                    break
            if ok:
                out.add(cell)
        return frozenset(out)
    top_dim = max(K.cell_dim(c) for c in tops)
    out = set()
    for cell in K.closure_of(tops):
        cof = [t for t in K.cells if K.cell_dim(t) == top_dim and cell in K.closure_of([t])]
        if cof and all(t in tops for t in cof):
            out.add(cell)
    return frozenset(out)


def _inside(K: AnyComplex, cells: Iterable, window: frozenset | None) -> bool:
    if window is None:
        return True
    return all(c in window for c in K.closure_of(cells))


def validate_sliding_deformation(trace: DeformationTrace, scene: Scene) -> ValidationReport:
    K = scene.grid
    E = set(scene.competitor.cells)
    gamma = scene.gamma.cells
    for idx, step in enumerate(trace.steps):
        if not step.removed <= E:
            return ValidationReport(False, "footprint-outside-competitor", idx, f"{sorted(step.removed - E)[:3]}")
        if not _inside(K, step.removed, trace.window):
            return ValidationReport(False, "footprint-outside-window", idx)
        if not _inside(K, step.image | step.added, trace.window):
            return ValidationReport(False, "image-outside-window", idx)
        touched = [c for c in step.removed if c in gamma]
        fixed = trace.fixed_gamma[idx] if idx < len(trace.fixed_gamma) else False
        if touched and (fixed or step.kind == "carve" or not step.image <= gamma):
            return ValidationReport(False, "gamma-escape", idx, f"{touched[:3]}")
        E -= step.removed
        E |= step.added
        if any(f not in E for c in step.added | step.image for f, _ in K.faces(c) if c in E):
            return ValidationReport(False, "not-closed", idx)
        if any(c in E for r in step.removed for c in _cofaces(K, r)):
            return ValidationReport(False, "not-closed", idx)
    return ValidationReport(True)


def _cofaces(K: AnyComplex, cell) -> list:
    cache = K.__dict__.setdefault("_cofaces", {})
    if not cache:
        for c in K.cells:
            for f, _ in K.faces(c):
                cache.setdefault(f, []).append(c)
    return cache.get(cell, [])


def apply_trace(trace: DeformationTrace, scene: Scene) -> Scene:
    report = validate_sliding_deformation(trace, scene)
    if not report:
        raise ValueError(f"invalid trace: {report.violation} at step {report.step}")
    E = set(scene.competitor.cells)
    for step in trace.steps:
        E -= step.removed
        E |= step.added
    return scene.with_competitor(scene.grid.subcomplex(E))

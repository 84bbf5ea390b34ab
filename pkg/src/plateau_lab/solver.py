"""Discrete direct method: local search over Reifenberg competitors on a cubical grid.

Moves are carves (drop a d-cell and its unused faces), free-face collapses
and box pushes (replace the part of E on the boundary of a box of
(d+1)-cubes by the rest of that boundary).  Each move is packaged as a
deformation trace, validated, and kept only if the competitor predicate
survives and the energy does not go up.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .complex_core import CubicalComplex
from .energy import Integrand, cell_energies
from .spanning import (
    DeformationTrace,
    Move,
    Scene,
    apply_trace,
    carve_move,
    collapse_move,
    is_reifenberg_competitor,
    push_move,
    validate_sliding_deformation,
    window_from_top_cells,
)

__all__ = [
    "Mode",
    "TraceEntry",
    "MinimizationRun",
    "objective",
    "minimize",
    "RefinementStudy",
    "refinement_study",
    "neighbourhood",
    "ProbeReport",
    "lower_semicontinuity_probe",
    "WeakLimitReport",
    "weak_limit_closure_test",
]


class Mode(str, enum.Enum):
    FREE = "free"  # minimize I(E)
    FIXED = "fixed"  # minimize I(E \ Γ)


@dataclass
class TraceEntry:
    scene: Scene
    energy: float
    move: str | None


@dataclass
class MinimizationRun:
    scene0: Scene
    mode: Mode
    energy: Integrand
    confinement: frozenset | None = None
    trace: list = field(default_factory=list)
    evaluated: int = 0

    @property
    def best(self) -> Scene:
        return self.trace[-1].scene

    @property
    def best_energy(self) -> float:
        return self.trace[-1].energy

    @property
    def accepted(self) -> int:
        return len(self.trace) - 1


def objective(scene: Scene, weights: dict, mode: Mode) -> float:
    """Sum of per-cell energies over the d-cells of E (Γ-cells skipped in FIXED mode)."""
    gamma = scene.gamma.cells
    cells = scene.competitor.cells_of_dim(scene.d)
    return math.fsum(weights[c] for c in cells if not (mode == Mode.FIXED and c in gamma))


def _move_window(K: CubicalComplex, cells: Iterable) -> frozenset:
    """Open window around the closure of ``cells``: the interior of the union of all
    unit cubes (inside the grid or not) that contain one of their vertices."""
    n = K.n
    tops = set()
    for anchor, axes in K.closure_of(cells):
        if not axes:
            for eps in itertools.product((0, -1), repeat=n):
                tops.add(tuple(a + e for a, e in zip(anchor, eps)))
    full = tuple(range(n))
    out = set()
    for cell in K.closure_of((t, full) for t in tops if (t, full) in K.cells):
        anchor, axes = cell
        free = [i for i in range(n) if i not in axes]
        ok = True
        for shifts in itertools.product((0, -1), repeat=len(free)):
            a = list(anchor)
            for i, sh in zip(free, shifts):
                a[i] += sh
            if tuple(a) not in tops:
                ok = False
                break
        if ok:
            out.add(cell)
    return frozenset(out)


class _Search:
    def __init__(self, run: MinimizationRun, budget: int, rng: np.random.Generator, max_box: int | None):
        sc = run.scene0
        self.run, self.budget, self.rng = run, budget, rng
        self.K: CubicalComplex = sc.grid
        self.d, self.n = sc.d, self.K.n
        self.gamma = sc.gamma.cells
        self.C = run.confinement if run.confinement is not None else sc.confine
        self.w = cell_energies(self.K, self.K.cells_of_dim(sc.d), run.energy)
        self.obj_w = {c: (0.0 if run.mode == Mode.FIXED and c in self.gamma else v) for c, v in self.w.items()}
        tops = self.K.cells_of_dim(self.n)
        self.lo = np.min([t[0] for t in tops], axis=0)
        self.N = np.max([t[0] for t in tops], axis=0) - self.lo + 1
        self.max_box = max_box

    # -- bookkeeping

    def value(self, scene: Scene) -> float:
        return objective(scene, self.w, self.run.mode)

    def spend(self) -> bool:
        if self.run.evaluated >= self.budget:
            return False
        self.run.evaluated += 1
        return True

    def attempt(self, scene: Scene, move: Move) -> Scene | None:
        touched = move.removed | move.added | move.image
        window = _move_window(self.K, touched)
        trace = DeformationTrace((move,), window)
        if not validate_sliding_deformation(trace, scene):
            return None
        new = apply_trace(trace, scene)
        if self.C is not None and not new.competitor.cells <= self.C:
            return None
        return new if is_reifenberg_competitor(new) else None

    # -- candidate moves

    def carves(self, scene: Scene):
        E = scene.competitor
        cells = [c for c in E.cells_of_dim(self.d) if c not in self.gamma]
        cells.sort(key=lambda c: (-self.obj_w[c], c[0], c[1]))
        for c in cells:
            mv = carve_move(E, c)
            yield -self.obj_w[c], Move("carve", mv.removed - self.gamma)

    def pushes(self, scene: Scene, neutral: bool = False) -> list:
        """Box pushes with negative (or, when ``neutral``, zero) energy change, best first."""
        if self.d + 1 != self.n:
            return []
        K, E, n, N, lo = self.K, scene.competitor.cells, self.n, self.N, self.lo
        prefix = []
        for k in range(n):
            shape = tuple(N[i] + (1 if i == k else 0) for i in range(n))
            w_all, w_in, c_in, miss = (np.zeros(shape) for _ in range(4))
            axes = tuple(i for i in range(n) if i != k)
            for idx in itertools.product(*[range(s) for s in shape]):
                cell = (tuple(int(v) for v in lo + np.array(idx)), axes)
                if cell not in K.cells:
                    miss[idx] = 1
                    continue
                w_all[idx] = self.obj_w[cell]
                if cell in E:
                    w_in[idx] = self.obj_w[cell]
                    c_in[idx] = 1
            prefix.append([_prefix(a) for a in (w_all, w_in, c_in, miss)])
        cands = []
        top = self.max_box or int(N.max())
        for ext in itertools.product(*[range(1, min(int(N[i]), top) + 1) for i in range(n)]):
            ext = np.array(ext)
            grids = np.meshgrid(*[np.arange(N[i] - ext[i] + 1) for i in range(n)], indexing="ij")
            A = np.stack([g.ravel() for g in grids], axis=1)
            if len(A) == 0:
                continue
            s_all = np.zeros(len(A))
            s_in = np.zeros(len(A))
            n_in = np.zeros(len(A))
            n_miss = np.zeros(len(A))
            n_inner = np.zeros(len(A))
            for k in range(n):
                P_all, P_in, P_cnt, P_miss = prefix[k]
                size = ext.copy()
                size[k] = 1
                for off in (0, ext[k]):
                    start = A.copy()
                    start[:, k] += off
                    s_all += _box_sum(P_all, start, size)
                    s_in += _box_sum(P_in, start, size)
                    n_in += _box_sum(P_cnt, start, size)
                    n_miss += _box_sum(P_miss, start, size)
                if ext[k] > 1:
                    start = A.copy()
                    start[:, k] += 1
                    size = ext.copy()
                    size[k] = ext[k] - 1
                    n_inner += _box_sum(P_cnt, start, size)
            delta = s_all - 2 * s_in
            ok = (n_in > 0) & (n_miss == 0) & (n_inner == 0)
            ok &= (np.abs(delta) <= 1e-12) if neutral else (delta < -1e-12)
            for a, dl in zip(A[ok], delta[ok]):
                cands.append((float(dl), tuple(int(v) for v in ext), tuple(int(v) for v in a + lo)))
        cands.sort()
        return cands

    def push(self, scene: Scene, ext, anchor) -> Move | None:
        box = [
            (tuple(a + o for a, o in zip(anchor, off)), tuple(range(self.n)))
            for off in itertools.product(*[range(e) for e in ext])
        ]
        try:
            return push_move(self.K, scene.competitor, box, scene.gamma)
        except ValueError:
            return None

    def collapses(self, scene: Scene):
        """Collapses of lower-dimensional hair (no energy change, fewer cells)."""
        E = scene.competitor
        cof: dict = {}
        for c in E.cells:
            for f, _ in E.faces(c):
                cof.setdefault(f, []).append(c)
        for dim in range(self.d - 1, 0, -1):
            for c in E.cells_of_dim(dim):
                if c in self.gamma:
                    continue
                if cof.get(c):
                    continue
                for f, _ in E.faces(c):
                    if f not in self.gamma and cof.get(f) == [c]:
                        yield collapse_move(E, c, f)
                        break

    # -- search

    def improve(self, scene: Scene) -> tuple[Scene, str] | None:
        for _, mv in self.carves(scene):
            if not self.spend():
                return None
            new = self.attempt(scene, mv)
            if new is not None:
                return new, "carve"
        for _, ext, anchor in self.pushes(scene):
            if not self.spend():
                return None
            mv = self.push(scene, ext, anchor)
            if mv is not None and (new := self.attempt(scene, mv)) is not None:
                return new, "push"
        for mv in self.collapses(scene):
            if not self.spend():
                return None
            new = self.attempt(scene, mv)
            if new is not None:
                return new, "collapse"
        return None

    def greedy(self, scene: Scene, energy: float) -> list[TraceEntry]:
        steps = []
        while (res := self.improve(scene)) is not None:
            new, kind = res
            value = self.value(new)
            if value > energy + 1e-12:
                raise AssertionError("accepted move increased the energy")
            scene, energy = new, value
            steps.append(TraceEntry(scene, energy, kind))
        return steps

    def kick(self, scene: Scene, count: int = 3) -> list[TraceEntry]:
        """A few random energy-neutral pushes (the restart perturbation)."""
        steps = []
        energy = self.value(scene)
        for _ in range(count):
            cands = self.pushes(scene, neutral=True)
            if not cands:
                break
            order = self.rng.permutation(len(cands))
            for i in order:
                if not self.spend():
                    return steps
                _, ext, anchor = cands[i]
                mv = self.push(scene, ext, anchor)
                if mv is not None and (new := self.attempt(scene, mv)) is not None:
                    scene = new
                    steps.append(TraceEntry(scene, self.value(scene), "push"))
                    break
            else:
                break
        assert all(abs(s.energy - energy) <= 1e-12 for s in steps)
        return steps


def minimize(run: MinimizationRun, budget: int, seed: int = 0, restarts: int = 2, max_box: int | None = None) -> Scene:
    """Greedy local search with neutral-kick restarts; returns the best iterate.

    ``budget`` caps the number of candidate moves evaluated.  The trace in
    ``run.trace`` starts at ``scene0`` and ends at the returned scene.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    sc = run.scene0
    if not isinstance(sc.grid, CubicalComplex):
        raise ValueError("minimize works on cubical scenes")
    if not is_reifenberg_competitor(sc):
        raise ValueError("scene0 is not a competitor")
    C = run.confinement if run.confinement is not None else sc.confine
    if C is not None and not sc.competitor.cells <= C:
        raise ValueError("scene0 is not inside the confinement region")
    search = _Search(run, budget, np.random.default_rng(seed), max_box)
    run.trace = [TraceEntry(sc, search.value(sc), None)]
    run.evaluated = 0
    run.trace += search.greedy(sc, run.trace[0].energy)
    for _ in range(restarts):
        kicked = search.kick(run.best)
        if not kicked:
            break
        tail = search.greedy(kicked[-1].scene, kicked[-1].energy)
        if tail and tail[-1].energy < run.best_energy - 1e-12:
            run.trace += kicked + tail
    return run.best


# --- refinement ---------------------------------------------------------------------------------


@dataclass
class RefinementStudy:
    sides: list
    minima: list
    limit_support: CubicalComplex
    runs: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {"format": 1, "sides": [str(s) for s in self.sides], "minima": self.minima}


def _transfer(E: CubicalComplex, K_new: CubicalComplex) -> CubicalComplex | None:
    """E refined onto the finer grid K_new, or None when the grids are not nested."""
    ratio = E.side / K_new.side
    if ratio.denominator != 1 or ratio.numerator & (ratio.numerator - 1):
        return None
    for _ in range(ratio.numerator.bit_length() - 1):
        E = E.refine()
    shift = [(o - p) / K_new.side for o, p in zip(E.origin, K_new.origin)]
    if any(Fraction(s).denominator != 1 for s in shift):
        return None
    shift = [int(s) for s in shift]
    cells = {(tuple(a + s for a, s in zip(anchor, shift)), axes) for anchor, axes in E.cells}
    if not cells <= K_new.cells:
        return None
    return K_new.with_cells(cells)


def refinement_study(
    problem: Callable[[Fraction], Scene],
    ig: Integrand,
    sides: Sequence,
    mode: Mode = Mode.FREE,
    budget: int = 4000,
    seed: int = 0,
) -> RefinementStudy:
    """Minimize at each side length, warm-starting from the refined previous minimizer."""
    sides = [Fraction(s) for s in sides]
    if any(b >= a for a, b in zip(sides, sides[1:])):
        raise ValueError("sides must be strictly decreasing")
    minima, runs, prev = [], [], None
    for level, s in enumerate(sides):
        sc = problem(s)
        start = None
        if prev is not None:
            warm = _transfer(prev.competitor, sc.grid)
            if warm is not None:
                cand = sc.with_competitor(warm)
                if is_reifenberg_competitor(cand):
                    start = cand
        if start is None:
            if not is_reifenberg_competitor(sc):
                raise ValueError(f"infeasible problem at side {s}" + (" (coarsest level)" if level == 0 else ""))
            start = sc
        run = MinimizationRun(start, mode, ig)
        prev = minimize(run, budget, seed)
        minima.append(run.best_energy)
        runs.append(run)
    return RefinementStudy(sides, minima, prev.competitor, runs)


# --- weak limits ------------------------------------------------------------------------------------


def neighbourhood(K: CubicalComplex, cells: Iterable, rho: int = 1) -> frozenset:
    """Open cell region: interior of the union of top cells within rho steps of the given cells."""
    n = K.n
    verts = {c[0] for c in K.closure_of(cells) if not c[1]}
    tops = set()
    for v in verts:
        for off in itertools.product(range(-rho, rho), repeat=n):
            top = (tuple(a + o for a, o in zip(v, off)), tuple(range(n)))
            if top in K.cells:
                tops.add(top)
    return window_from_top_cells(K, tops)


def _same_grid(a: CubicalComplex, b: CubicalComplex) -> bool:
    return (a.n, a.side, a.origin) == (b.n, b.side, b.origin) and a.cells == b.cells


@dataclass
class ProbeReport:
    masses: list
    monotone: bool
    vanishing: bool

    @property
    def hypothesis_ok(self) -> bool:
        return self.vanishing


def lower_semicontinuity_probe(sequence: Sequence[Scene], V: frozenset, tol: float = 1e-12) -> ProbeReport:
    """H^d(E_k \\ V) along the sequence; the hypothesis needs it to vanish in the limit."""
    if not sequence:
        raise ValueError("empty sequence")
    K = sequence[0].grid
    for sc in sequence[1:]:
        if not _same_grid(sc.grid, K):
            raise ValueError("grid mismatch in the sequence")
    masses = []
    for sc in sequence:
        cells = [c for c in sc.competitor.cells_of_dim(sc.d) if c not in V]
        masses.append(math.fsum(float(K.side) ** sc.d for _ in cells))
    monotone = all(b <= a + tol for a, b in zip(masses, masses[1:]))
    return ProbeReport(masses, monotone, masses[-1] <= tol)


@dataclass
class WeakLimitReport:
    status: str
    agree: bool
    failures: list
    predicate: bool | None = None
    pipeline_ok: bool | None = None
    pipeline: object = field(default=None, repr=False)

    def __bool__(self) -> bool:
        return self.agree

    def to_json(self) -> dict:
        return {
            "format": 1,
            "status": self.status,
            "agree": self.agree,
            "failures": self.failures,
            "predicate": self.predicate,
            "pipeline_ok": self.pipeline_ok,
        }


def weak_limit_closure_test(
    sequence: Sequence[Scene],
    E_limit: Scene,
    C: Iterable,
    schedule: Sequence[int] = (1, 2, 3),
    pipeline=None,
    beta=None,
    seed: int = 0,
) -> WeakLimitReport:
    """Check the closure hypotheses on cell neighbourhoods, then compare the limit predicate with the pipeline.

    ``pipeline`` is an optional point-set fixture (``DiskTentacle``) on which
    the covering/projection pipeline is run; ``beta`` may supply its Step-1
    covering.
    """
    C = frozenset(C)
    for sc in sequence:
        if not _same_grid(sc.grid, E_limit.grid):
            raise ValueError("grid mismatch between the sequence and the limit")
    failures = []
    for k, sc in enumerate(sequence):
        if not sc.competitor.cells <= C:
            failures.append(f"confinement: E_{k} is not inside C")
    for k, sc in enumerate(sequence):
        if not is_reifenberg_competitor(sc):
            failures.append(f"E_{k} is not a competitor")
    for rho in schedule:
        V = neighbourhood(E_limit.grid, E_limit.union.cells, rho)
        rep = lower_semicontinuity_probe(sequence, V)
        if not rep.hypothesis_ok:
            failures.append(f"V(rho={rho}): H^d(E_k \\ V) ends at {rep.masses[-1]:.6g}")
    if failures:
        return WeakLimitReport("hypotheses violated", False, failures)
    predicate = is_reifenberg_competitor(E_limit)
    pipeline_ok, prep = None, None
    if pipeline is not None:
        from .lemma24 import run_lemma24

        prep = run_lemma24(pipeline, seed=seed, beta=beta)
        pipeline_ok = prep.ok
    if not predicate:
        status = "closure counterexample"
    elif pipeline_ok is False:
        status = "pipeline disagrees"
    else:
        status = "agree"
    return WeakLimitReport(status, status == "agree", [], predicate, pipeline_ok, prep)


def _prefix(a: np.ndarray) -> np.ndarray:
    P = np.zeros(tuple(s + 1 for s in a.shape))
    P[tuple(slice(1, None) for _ in a.shape)] = a
    for ax in range(a.ndim):
        P = np.cumsum(P, axis=ax)
    return P


def _box_sum(P: np.ndarray, start: np.ndarray, size: np.ndarray) -> np.ndarray:
    """Sums of the underlying array over boxes [start, start + size) (vectorized over rows)."""
    n = start.shape[1]
    out = np.zeros(len(start))
    for corner in itertools.product((0, 1), repeat=n):
        idx = start + np.array(corner) * size
        sign = (-1) ** (n - sum(corner))
        out += sign * P[tuple(idx[:, i] for i in range(n))]
    return out

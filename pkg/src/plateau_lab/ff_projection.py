"""Federer-Fleming projection onto a grid skeleton and the pulled-back covering.

The grid is described lazily (``Grid``) so that very fine sides are cheap:
only cells that actually contain sample points are ever examined.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .complex_core import CubicalComplex
from .covering import Ball, BallUnion, Covering, PredicateRegion, Sphere
from .geometry import BoxSet, MeasuredSet

__all__ = [
    "Grid",
    "FarSubcomplex",
    "EllTooLarge",
    "admissible_ell",
    "select_far_subcomplex",
    "ProjectionMap",
    "ProjectionResult",
    "CenterSearchError",
    "ff_project",
    "build_beta_infinity",
    "beta_infinity_violations",
    "skeleton_distance",
    "GridTranslation",
    "translate_grid",
    "obstacles_from_certificates",
    "PullbackCovering",
    "Step2Result",
    "Step2Error",
    "step2_pipeline",
]

SNAP = 1e-9


# --- lazy grid -------------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Infinite cubical grid ``origin + side * Z^n``; cells are ``(anchor, axes)``."""

    n: int
    side: float
    origin: tuple = ()

    def __post_init__(self):
        if not self.origin:
            object.__setattr__(self, "origin", (0.0,) * self.n)
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @classmethod
    def from_complex(cls, K: CubicalComplex) -> "Grid":
        return cls(K.n, float(K.side), tuple(float(o) for o in K.origin))

    def translated(self, offset) -> "Grid":
        return Grid(self.n, self.side, tuple(o + float(x) for o, x in zip(self.origin, offset)))

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.n)

    def box(self, cell) -> tuple[np.ndarray, np.ndarray]:
        anchor, axes = cell
        lo = np.asarray(self.origin) + self.side * np.asarray(anchor, float)
        hi = lo.copy()
        hi[list(axes)] += self.side
        return lo, hi

    def carrier(self, p) -> tuple:
        """Smallest cell containing ``p`` in its relative interior."""
        u = (np.asarray(p, float) - np.asarray(self.origin)) / self.side
        r = np.round(u)
        on = np.abs(u - r) < SNAP
        anchor = tuple(int(v) for v in np.where(on, r, np.floor(u)))
        axes = tuple(int(i) for i in np.flatnonzero(~on))
        return anchor, axes

    def carriers(self, P) -> list[tuple]:
        """Vectorised :meth:`carrier`."""
        u = (np.atleast_2d(np.asarray(P, float)) - np.asarray(self.origin)) / self.side
        r = np.round(u)
        on = np.abs(u - r) < SNAP
        A = np.where(on, r, np.floor(u)).astype(int)
        return [(tuple(a.tolist()), tuple(np.flatnonzero(~o).tolist())) for a, o in zip(A, on)]

    def top_cells_containing(self, cell) -> list[tuple]:
        anchor, axes = cell
        fixed = [i for i in range(self.n) if i not in axes]
        out = []
        for mask in range(1 << len(fixed)):
            a = list(anchor)
            for b, i in enumerate(fixed):
                if mask >> b & 1:
                    a[i] -= 1
            out.append((tuple(a), tuple(range(self.n))))
        return out


# --- far subcomplex -----------------------------------------------------------------------------


class EllTooLarge(ValueError):
    def __init__(self, ell: float, bound: float):
        super().__init__(f"ell = {ell:.6g} violates the smallness condition; admissible ell < {bound:.6g}")
        self.ell = ell
        self.bound = bound


def _circle_or_sphere(center, radius, m, rng) -> tuple[np.ndarray, float]:
    """Points on the round sphere and an upper bound for the gap between them."""
    n = center.size
    if n == 2:
        t = 2 * math.pi * np.arange(m) / m
        return center + radius * np.stack([np.cos(t), np.sin(t)], axis=1), radius * math.sin(math.pi / m)
    u = rng.normal(size=(m, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return center + radius * u, 0.0


def admissible_ell(beta: Covering, F: BoxSet, B0: Ball, per_sphere: int = 256, rng=None) -> float:
    """Largest ell with d(x, F) > 4 ell for every x in 2B0 outside the union of the regions.

    The infimum of d(., F) off the union is attained on the boundary of the
    union, which lies on the ball spheres; those are sampled and the distance
    is lowered by the sampling gap (1-Lipschitz).  In dimension > 2 the
    sphere samples are random and no gap correction is applied.
    """
    rng = rng or np.random.default_rng(0)
    balls = [b for r in beta.regions.values() if isinstance(r, BallUnion) for b in r.balls]
    if not balls:
        return 0.0
    C = np.array([b.center for b in balls])
    R = np.array([b.radius for b in balls])
    best = math.inf
    for b in balls:
        pts, gap = _circle_or_sphere(b.center, b.radius, per_sphere, rng)
        inside_other = np.zeros(len(pts), bool)
        for lo in range(0, len(balls), 512):
            D = np.linalg.norm(pts[:, None, :] - C[None, lo : lo + 512], axis=2)
            inside_other |= (D < R[None, lo : lo + 512] - 1e-12).any(axis=1)
        keep = ~inside_other & (np.linalg.norm(pts - B0.center, axis=1) <= 2 * B0.radius + gap)
        if keep.any():
            best = min(best, float(F.distance(pts[keep]).min()) - gap)
    return max(best, 0.0) / 4


@dataclass
class FarSubcomplex:
    """Closure of the top cells containing a point x of 2B0 with d(x, F) >= 2 ell.

    Cells are tested on a lattice of ``(resolution+1)^n`` points including the
    corners, and the verdict is cached per top cell.
    """

    grid: Grid
    F: BoxSet
    ell: float
    B0: Ball
    resolution: int = 4
    _tops: dict = field(default_factory=dict, repr=False)

    def _lattice(self, anchor) -> np.ndarray:
        lo = np.asarray(self.grid.origin) + self.grid.side * np.asarray(anchor, float)
        t = np.linspace(0.0, 1.0, self.resolution + 1)
        mesh = np.meshgrid(*([t] * self.grid.n), indexing="ij")
        return lo + self.grid.side * np.stack([m.ravel() for m in mesh], axis=1)

    def top_in_L(self, anchor) -> bool:
        anchor = tuple(anchor)
        hit = self._tops.get(anchor)
        if hit is None:
            X = self._lattice(anchor)
            ok = (np.linalg.norm(X - self.B0.center, axis=1) <= 2 * self.B0.radius) & (
                self.F.distance(X) >= 2 * self.ell
            )
            hit = self._tops[anchor] = bool(ok.any())
        return hit

    def contains_cell(self, cell) -> bool:
        return any(self.top_in_L(a) for a, _ in self.grid.top_cells_containing(cell))

    def contains_points(self, P) -> np.ndarray:
        return np.array([self.contains_cell(c) for c in self.grid.carriers(P)], bool)

    def top_cells(self) -> list[tuple]:
        """All top cells of L (enumerates the grid over the bounding box of 2B0)."""
        c, r = self.B0.center, 2 * self.B0.radius
        o, s = np.asarray(self.grid.origin), self.grid.side
        lo = np.floor((c - r - o) / s).astype(int)
        hi = np.ceil((c + r - o) / s).astype(int)
        ranges = [range(a, b) for a, b in zip(lo, hi)]
        return [a for a in itertools.product(*ranges) if self.top_in_L(a)]

    def as_complex(self) -> CubicalComplex:
        from fractions import Fraction

        from .complex_core import _closure, cube_faces

        tops = [(a, tuple(range(self.grid.n))) for a in self.top_cells()]
        side = Fraction(self.grid.side).limit_denominator(10**9)
        origin = tuple(Fraction(o).limit_denominator(10**9) for o in self.grid.origin)
        return CubicalComplex(self.grid.n, side, origin, _closure(tops, cube_faces))


def select_far_subcomplex(
    K: CubicalComplex | Grid,
    F: BoxSet,
    ell: float,
    B0: Ball,
    covering: Covering | None = None,
    resolution: int = 4,
) -> FarSubcomplex:
    grid = K if isinstance(K, Grid) else Grid.from_complex(K)
    if ell <= 0:
        raise ValueError("ell must be positive")
    if grid.diameter > ell * (1 + 1e-12):
        raise ValueError(f"cell diameter {grid.diameter:.6g} exceeds ell = {ell:.6g}")
    if covering is not None:
        bound = admissible_ell(covering, F, B0)
        if ell >= bound:
            raise EllTooLarge(ell, bound)
    return FarSubcomplex(grid, F, float(ell), B0, resolution)


# --- radial projection --------------------------------------------------------------------------


class CenterSearchError(RuntimeError):
    pass


def _radial(P, T, c, lo, hi, axes, frames: bool = True):
    """Project points of an open cell from ``c`` onto the cell boundary.

    Returns images, hit axes, hit-high flags, new frames and Jacobians.
    """
    k, n = P.shape
    mask = np.zeros(n, bool)
    mask[list(axes)] = True
    V = (P - c) * mask
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(V > 0, (hi - c) / V, np.where(V < 0, (lo - c) / V, np.inf))
    ratio[:, ~mask] = np.inf
    hit = np.argmin(ratio, axis=1)
    t = ratio[np.arange(k), hit]
    Q = c + t[:, None] * V
    Q[:, ~mask] = P[:, ~mask]
    high = V[np.arange(k), hit] > 0
    Q[np.arange(k), hit] = np.where(high, hi[hit], lo[hit])
    J = np.ones(k)
    Tn = T
    if T is not None and T.size:
        Tm = T * mask[None, :, None]
        g = (Q - c) * mask / (Q[np.arange(k), hit] - c[hit])[:, None]
        M = t[:, None, None] * (Tm - g[:, :, None] * Tm[np.arange(k), hit, :][:, None, :])
        G = np.einsum("kia,kib->kab", M, M)
        J = np.sqrt(np.clip(np.linalg.det(G), 0.0, None))
        Tn = np.linalg.qr(M)[0] if frames else None
    return Q, hit, high, Tn, J


@dataclass
class ProjectionMap:
    """Sequence of per-cell radial projections (the map phi), replayable on any points."""

    grid: Grid
    L: FarSubcomplex
    d: int
    centers: dict = field(default_factory=dict)  # cell -> center, cells of dim > d
    extra: dict = field(default_factory=dict)  # d-cell -> center (extra round)

    def _center(self, cell) -> np.ndarray:
        c = self.centers.get(cell)
        if c is None:
            lo, hi = self.grid.box(cell)
            c = (lo + hi) / 2
        return c

    def apply(self, P) -> np.ndarray:
        """phi on arbitrary points: identity off |L|, projections on |L|."""
        P = np.atleast_2d(np.asarray(P, float)).copy()
        for idx in range(len(P)):
            p = P[idx]
            cell = self.grid.carrier(p)
            if not self.L.contains_cell(cell):
                continue
            while len(cell[1]) > self.d or (len(cell[1]) == self.d and cell in self.extra):
                c = self.extra[cell] if len(cell[1]) == self.d else self._center(cell)
                if np.allclose(p, c, atol=1e-15):
                    break
                lo, hi = self.grid.box(cell)
                q, *_ = _radial(p[None], None, c, lo, hi, cell[1])
                p = q[0]
                cell = self.grid.carrier(p)
            P[idx] = p
        return P


@dataclass
class ProjectionResult:
    points_in: np.ndarray
    points_out: np.ndarray
    weights_out: np.ndarray
    in_L: np.ndarray
    image_cells: set
    measure_in: float
    measure_out_per_cell: dict
    displacement_max: float
    ell: float
    C_estimate: float
    status: str
    extra_round: bool
    pmap: ProjectionMap = field(repr=False)

    @property
    def map_points(self) -> list[tuple[tuple, tuple]]:
        return [(tuple(a), tuple(b)) for a, b in zip(self.points_in.tolist(), self.points_out.tolist())]

    @property
    def measure_out(self) -> float:
        return float(sum(self.measure_out_per_cell.values()))

    def to_json(self, max_samples: int = 200) -> dict:
        return {
            "format": 1,
            "status": self.status,
            "ell": self.ell,
            "measure_in": self.measure_in,
            "measure_out_per_cell": [
                {"cell": [list(c[0]), list(c[1])], "mass": m} for c, m in sorted(self.measure_out_per_cell.items())
            ],
            "C_estimate": self.C_estimate,
            "displacement_max": self.displacement_max,
            "extra_round": self.extra_round,
            "map_samples": self.map_points[:max_samples],
        }


def _choose_center(P, W, T, lo, hi, axes, rng, eps, tries, rounds, objective):
    n = P.shape[1]
    mask = np.zeros(n, bool)
    mask[list(axes)] = True
    best = None
    for _ in range(rounds):
        for _ in range(tries):
            c = np.where(mask, lo + (hi - lo) * (0.02 + 0.96 * rng.random(n)), lo)
            if len(P) and np.linalg.norm(P - c, axis=1).min() < eps:
                continue
            score = objective(c)
            if best is None or score < best[0]:
                best = (score, c)
        if best is not None:
            return best[1]
    raise CenterSearchError(f"no admissible center in cell {lo.tolist()}..{hi.tolist()} ({len(P)} points, eps={eps:g})")


def ff_project(
    S: MeasuredSet,
    L: FarSubcomplex,
    d: int | None = None,
    rng: np.random.Generator | None = None,
    tries: int = 16,
    rounds: int = 8,
    eps: float | None = None,
    tau: float | None = None,
    extra_round: bool = True,
) -> ProjectionResult:
    """Push the part of S inside |L| out of all open cells of dimension > d.

    Centres are drawn uniformly in the open cell, rejected within ``eps`` of a
    sample point, and the best of ``tries`` (smallest image mass) is kept.
    If every d-cell then carries image mass below ``tau`` an extra round
    empties the d-cells into the (d-1)-skeleton.
    """
    rng = rng or np.random.default_rng(0)
    d = S.d if d is None else d
    grid = L.grid
    eps = grid.side / 100 if eps is None else eps
    tau = grid.side**d / 2 if tau is None else tau
    P = S.points.copy()
    W = S.weights.copy()
    T = S.frames.copy()
    carriers = grid.carriers(P)
    in_L = np.array([L.contains_cell(c) for c in carriers], bool)
    measure_in = float(W[in_L].sum())
    pmap = ProjectionMap(grid, L, d)
    touched: set = set()
    for m in range(grid.n, d, -1):
        groups: dict = {}
        for i in np.flatnonzero(in_L):
            if len(carriers[i][1]) == m:
                groups.setdefault(carriers[i], []).append(i)
        for cell in sorted(groups):
            idx = np.array(groups[cell])
            lo, hi = grid.box(cell)

            def mass(c, idx=idx, lo=lo, hi=hi, cell=cell):
                _, _, _, _, J = _radial(P[idx], T[idx], c, lo, hi, cell[1], frames=False)
                return float((W[idx] * J).sum())

            c = _choose_center(P[idx], W[idx], T[idx], lo, hi, cell[1], rng, eps, tries, rounds, mass)
            pmap.centers[cell] = c
            Q, _, _, Tn, J = _radial(P[idx], T[idx], c, lo, hi, cell[1])
            P[idx], T[idx], W[idx] = Q, Tn, W[idx] * J
            for i, cc in zip(idx, grid.carriers(Q)):
                carriers[i] = cc
    per_cell: dict = {}
    for i in np.flatnonzero(in_L):
        if len(carriers[i][1]) == d:
            per_cell[carriers[i]] = per_cell.get(carriers[i], 0.0) + float(W[i])
        touched.add(carriers[i])
    C_est = max(per_cell.values()) / measure_in if per_cell and measure_in > 0 else 0.0
    status = "ok"
    did_extra = False
    if extra_round and per_cell:
        heavy = [c for c, v in per_cell.items() if v >= tau]
        if heavy:
            status = "k not large enough"
        else:
            did_extra = True
            groups = {}
            for i in np.flatnonzero(in_L):
                if len(carriers[i][1]) == d:
                    groups.setdefault(carriers[i], []).append(i)
            for cell in sorted(groups):
                idx = np.array(groups[cell])
                lo, hi = grid.box(cell)

                def spread(c, idx=idx):
                    return -float(np.linalg.norm(P[idx] - c, axis=1).min())

                c = _choose_center(P[idx], W[idx], None, lo, hi, cell[1], rng, eps, tries, rounds, spread)
                pmap.extra[cell] = c
                Q, *_ = _radial(P[idx], None, c, lo, hi, cell[1])
                P[idx] = Q
                W[idx] = 0.0  # the image lies in the (d-1)-skeleton
                for i, cc in zip(idx, grid.carriers(Q)):
                    carriers[i] = cc
            touched = {carriers[i] for i in np.flatnonzero(in_L)}
    disp = float(np.linalg.norm(P - S.points, axis=1).max()) if len(P) else 0.0
    return ProjectionResult(
        points_in=S.points.copy(),
        points_out=P,
        weights_out=W,
        in_L=in_L,
        image_cells=touched,
        measure_in=measure_in,
        measure_out_per_cell=per_cell,
        displacement_max=disp,
        ell=L.ell,
        C_estimate=C_est,
        status=status,
        extra_round=did_extra,
        pmap=pmap,
    )


# --- beta_infinity -------------------------------------------------------------------------------


def _closed_count(beta: Covering, P: np.ndarray) -> np.ndarray:
    count = np.zeros(len(P), int)
    for j in beta.indices:
        reg = beta.regions[j]
        if isinstance(reg, BallUnion):
            count += reg.closure_contains_many(P)
        else:
            count += reg.contains_many(P)
    return count


def build_beta_infinity(beta: Covering, F: BoxSet | Callable, d: int, tol: float = 1e-12) -> PredicateRegion:
    """Complement of F and of every closed d-fold intersection of the regions."""
    dist = F.distance if isinstance(F, BoxSet) else F

    def many(P):
        P = np.atleast_2d(np.asarray(P, float))
        return (_closed_count(beta, P) < d) & (dist(P) > tol)

    return PredicateRegion(lambda p: bool(many(p[None])[0]), None, "beta_infinity", many=many)


def beta_infinity_violations(beta: Covering, beta_inf, P, d: int) -> np.ndarray:
    """Sample points lying in beta_infinity and in d of the open regions (should be none)."""
    P = np.atleast_2d(np.asarray(P, float))
    open_count = beta.membership(P).sum(axis=1)
    return P[beta_inf.contains_many(P) & (open_count >= d)]


# --- grid translation ---------------------------------------------------------------------------


def skeleton_distance(P, grid: Grid, k: int) -> np.ndarray:
    """Distance from points to the k-skeleton of the grid."""
    P = np.atleast_2d(np.asarray(P, float))
    u = (P - np.asarray(grid.origin)) / grid.side
    delta = np.abs(u - np.round(u)) * grid.side
    delta.sort(axis=1)
    return np.sqrt(np.sum(delta[:, : grid.n - k] ** 2, axis=1))


def _sphere_clearance(S: Sphere, grid: Grid, k: int, max_points: int = 1 << 15) -> float:
    """Lower bound for the distance from the sphere to the k-skeleton (0 if unresolved)."""
    if S.is_empty:
        return math.inf
    if S.k == 0:
        pts = S.center + S.radius * np.stack([S.basis[:, 0], -S.basis[:, 0]])
        return float(skeleton_distance(pts, grid, k).min())
    m = 64
    while True:
        if S.k == 1:
            t = 2 * math.pi * np.arange(m) / m
            coords = np.stack([np.cos(t), np.sin(t)], axis=1)
            gap = S.radius * math.sin(math.pi / m)
        else:
            steps = max(8, int(round(m ** (1.0 / S.k))))
            angles = np.meshgrid(*[np.linspace(0, math.pi, steps)] * (S.k - 1), np.linspace(0, 2 * math.pi, 2 * steps))
            ang = np.stack([a.ravel() for a in angles], axis=1)
            coords = np.ones((len(ang), S.k + 1))
            for i in range(S.k):
                coords[:, i] *= np.cos(ang[:, i])
                coords[:, i + 1 :] *= np.sin(ang[:, i])[:, None]
            gap = S.radius * math.pi / steps * S.k
        pts = S.center + S.radius * coords @ S.basis.T
        dmin = float(skeleton_distance(pts, grid, k).min())
        if dmin - gap > 0:
            return dmin - gap
        if dmin < 1e-12 or m >= max_points:
            return 0.0
        m *= 4


@dataclass
class GridTranslation:
    offset: np.ndarray
    clearance: float
    attempts: int
    grid: Grid


def obstacles_from_certificates(beta: Covering, d: int) -> list[Sphere]:
    return [s for S, spheres in sorted(beta.certificates.items(), key=lambda kv: sorted(kv[0])) if len(S) == d for s in spheres]


def translate_grid(
    grid: Grid | CubicalComplex,
    obstacles: Sequence[Sphere],
    d: int,
    rng: np.random.Generator | None = None,
    attempts: int = 50,
) -> GridTranslation:
    """Offset x so that x + |K^{d-1}| keeps positive clearance from every obstacle.

    The zero offset is tried first.
    """
    grid = grid if isinstance(grid, Grid) else Grid.from_complex(grid)
    rng = rng or np.random.default_rng(0)
    for attempt in range(1, attempts + 1):
        offset = np.zeros(grid.n) if attempt == 1 else grid.side * rng.random(grid.n)
        g = grid.translated(offset)
        clearance = min((_sphere_clearance(S, g, d - 1) for S in obstacles), default=math.inf)
        if clearance > 0:
            return GridTranslation(offset, clearance, attempt, g)
    raise RuntimeError(f"no admissible grid offset after {attempts} attempts; obstacles look degenerate")


# --- step 2 pipeline ------------------------------------------------------------------------------


class PullbackCovering(Covering):
    """Regions gamma_j = phi^{-1}(beta_j) for j in N, plus gamma_inf = phi^{-1}(beta_inf)."""

    def __init__(self, base: Covering, beta_inf, phi: Callable[[np.ndarray], np.ndarray]):
        regions = dict(base.regions)
        regions["inf"] = beta_inf
        super().__init__(regions, {}, {})
        self.base = base
        self.beta_inf = beta_inf
        self.phi = phi

    def membership(self, P: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, float))
        Q = self.phi(P)
        base = self.base.membership(Q)
        return np.concatenate([base, self.beta_inf.contains_many(Q)[:, None]], axis=1)

    def probe_points(self, per_ball: int = 4, rng=None) -> np.ndarray:
        return self.base.probe_points(per_ball, rng)


class Step2Error(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class Step2Result:
    status: str
    ell: float
    translation: GridTranslation | None
    L: FarSubcomplex | None
    projection: ProjectionResult | None
    beta_inf: PredicateRegion | None
    gamma: PullbackCovering | None
    phi: Callable | None
    checks: dict = field(default_factory=dict)


def step2_pipeline(
    E: BoxSet,
    gamma_set: BoxSet,
    E_k: MeasuredSet,
    beta: Covering,
    d: int,
    B0: Ball,
    ell: float | None = None,
    rng: np.random.Generator | None = None,
    tau: float | None = None,
    F_sample: np.ndarray | None = None,
) -> Step2Result:
    """Subcomplex selection, translation, projection, beta_inf and the pulled-back covering."""
    rng = rng or np.random.default_rng(0)
    F = E.union(gamma_set)
    n = F.n
    try:
        bound = admissible_ell(beta, F, B0)
    except Exception as exc:  # pragma: no cover - defensive
        raise Step2Error("select_far_subcomplex", str(exc)) from exc
    if ell is None:
        ell = 0.9 * bound
    if not ell > 0:
        raise Step2Error("select_far_subcomplex", "no admissible ell (covering does not contain a neighbourhood)")
    if ell >= bound:
        raise Step2Error("select_far_subcomplex", str(EllTooLarge(ell, bound)))
    try:
        tr = translate_grid(Grid(n, ell / math.sqrt(n)), obstacles_from_certificates(beta, d), d, rng)
    except RuntimeError as exc:
        raise Step2Error("translate_grid", str(exc)) from exc
    L = select_far_subcomplex(tr.grid, F, ell, B0)
    try:
        proj = ff_project(E_k, L, d, rng=rng, tau=tau)
    except CenterSearchError as exc:
        raise Step2Error("ff_project", str(exc)) from exc
    if proj.status != "ok":
        return Step2Result(proj.status, ell, tr, L, proj, None, None, None)
    pmap = proj.pmap
    beta_inf = build_beta_infinity(beta, F, d)
    gam = PullbackCovering(beta, beta_inf, pmap.apply)
    checks: dict = {"displacement_ok": proj.displacement_max <= ell + 1e-12}
    if F_sample is not None and len(F_sample):
        # phi = id on E ∪ Γ, hence (E ∪ Γ) ∩ γ_j = (E ∪ Γ) ∩ β_j and (E ∪ Γ) ∩ γ_inf = ∅
        Mg = gam.membership(F_sample)
        Mb = beta.membership(F_sample)
        checks["restriction_ok"] = bool(np.array_equal(Mg[:, :-1], Mb))
        checks["gamma_inf_misses_F"] = not bool(Mg[:, -1].any())
        checks["phi_identity_on_F"] = bool(np.allclose(pmap.apply(F_sample), F_sample))
    probe = np.vstack([proj.points_out, beta.probe_points()])
    checks["beta_inf_disjoint"] = len(beta_infinity_violations(beta, beta_inf, probe, d)) == 0
    return Step2Result("ok", ell, tr, L, proj, beta_inf, gam, pmap.apply, checks)

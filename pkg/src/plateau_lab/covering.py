"""Spheres in general position, ball coverings, nerves and general-covering checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import null_space

from .complex_core import SimplicialComplex
from .homology import CoefficientGroup, InducedHomMap, Integers, induced_map, is_injective

__all__ = [
    "Sphere",
    "excluded_radii",
    "intersection_reduction",
    "Ball",
    "BallUnion",
    "PredicateRegion",
    "Covering",
    "Nerve",
    "build_step1_covering",
    "seed_balls",
    "ball_intersection_distance",
    "nerve",
    "verify_general_covering",
    "CoveringVerdict",
    "refinement_is_simplicial",
]

TOL = 1e-12


@dataclass(frozen=True)
class Sphere:
    """k-sphere: points of the (k+1)-plane ``center + span(basis)`` at distance ``radius``.

    ``k = -1`` is the empty set.  ``basis`` has orthonormal columns.
    """

    k: int
    center: np.ndarray = field(default=None, compare=False)
    radius: float = 0.0
    basis: np.ndarray = field(default=None, compare=False, repr=False)

    @classmethod
    def empty(cls) -> "Sphere":
        return cls(-1)

    @classmethod
    def in_plane(cls, center, radius, directions) -> "Sphere":
        center = np.asarray(center, float)
        D = np.atleast_2d(np.asarray(directions, float))
        if D.shape[0] != center.size:
            D = D.T
        Q, R = np.linalg.qr(D)
        if np.min(np.abs(np.diag(R))) < 1e-12:
            raise ValueError("plane directions are dependent")
        if radius <= 0:
            raise ValueError("sphere radius must be positive")
        return cls(Q.shape[1] - 1, center, float(radius), Q)

    @classmethod
    def round(cls, center, radius) -> "Sphere":
        """Full (n-1)-sphere ``S(center, radius)`` of R^n."""
        center = np.asarray(center, float)
        if radius <= 0:
            raise ValueError("sphere radius must be positive")
        return cls(center.size - 1, center, float(radius), np.eye(center.size))

    @property
    def is_empty(self) -> bool:
        return self.k < 0

    def contains(self, p, tol: float = 1e-9) -> bool:
        if self.is_empty:
            return False
        v = np.asarray(p, float) - self.center
        along = self.basis.T @ v
        off = v - self.basis @ along
        return bool(np.linalg.norm(off) <= tol and abs(np.linalg.norm(along) - self.radius) <= tol)

    def points(self, m: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """``m`` points on the sphere (random directions)."""
        if self.is_empty:
            return np.zeros((0, 0))
        rng = rng or np.random.default_rng(0)
        t = rng.normal(size=(m, self.k + 1))
        t /= np.linalg.norm(t, axis=1, keepdims=True)
        return self.center + self.radius * t @ self.basis.T

    def to_json(self) -> dict:
        if self.is_empty:
            return {"k": -1}
        return {"k": self.k, "center": self.center.tolist(), "radius": self.radius, "basis": self.basis.T.tolist()}


def excluded_radii(S: Sphere, x) -> set[float]:
    """The (at most one) radius r for which S ∩ S(x, r) need not lie in a (k-1)-sphere."""
    if S.k < 1:
        raise ValueError("excluded_radii requires a sphere of dimension k >= 1")
    x = np.asarray(x, float)
    dist2 = float(np.sum((x - S.center) ** 2))
    if dist2 <= TOL * max(1.0, S.radius**2):
        return {S.radius}
    return {math.sqrt(S.radius**2 + dist2)}


def _is_excluded(S: Sphere, x, r: float, rel: float = 1e-12) -> bool:
    return any(abs(r - e) <= rel * max(1.0, e) for e in excluded_radii(S, x))


def intersection_reduction(S: Sphere, x, r: float) -> Sphere:
    """A (k-1)-sphere (possibly empty) containing S ∩ S(x, r)."""
    if S.is_empty:
        return Sphere.empty()
    if S.k < 1:
        raise ValueError("intersection_reduction requires a sphere of dimension k >= 1")
    if r <= 0:
        raise ValueError("radius must be positive")
    if _is_excluded(S, x, r):
        raise ValueError(f"radius {r} is the excluded radius for this sphere and center")
    x = np.asarray(x, float)
    x0, r0, B = S.center, S.radius, S.basis
    if np.sum((x - x0) ** 2) <= TOL * max(1.0, r0**2):
        return Sphere.empty()
    a = 2.0 * (x0 - x)
    b = r**2 - r0**2 - x @ x + x0 @ x0
    a_in = B.T @ a
    beta = b - a @ x0
    norm2 = float(a_in @ a_in)
    scale = float(np.linalg.norm(a)) or 1.0
    if norm2 <= (1e-12 * scale) ** 2:
        # hyperplane parallel to the plane of S and (not excluded) missing x0: no solutions
        return Sphere.empty()
    t_c = a_in * (beta / norm2)
    rho2 = r0**2 - float(t_c @ t_c)
    c = x0 + B @ t_c
    tangent_tol = 1e-12 * max(1.0, r0**2)
    if rho2 < -tangent_tol:
        return Sphere.empty()
    N = null_space(a_in[None, :])
    D = B @ N
    if rho2 <= tangent_tol:
        # single tangency point: any (k-1)-sphere through it will do
        u = D[:, 0]
        return Sphere(S.k - 1, c - u, 1.0, D)
    return Sphere(S.k - 1, c, math.sqrt(rho2), D)


def _zero_sphere_distances(S: Sphere, x) -> list[float]:
    """Distances from ``x`` to the two points of a 0-sphere."""
    d = S.basis[:, 0] * S.radius
    x = np.asarray(x, float)
    return [float(np.linalg.norm(S.center + d - x)), float(np.linalg.norm(S.center - d - x))]


# --- regions and coverings ------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def contains(self, p) -> bool:
        return float(np.linalg.norm(np.asarray(p, float) - self.center)) < self.radius

    def closure_contains(self, p, tol: float = 0.0) -> bool:
        return float(np.linalg.norm(np.asarray(p, float) - self.center)) <= self.radius + tol

    def to_json(self) -> dict:
        return {"center": list(map(float, self.center)), "radius": float(self.radius)}


class BallUnion:
    """Open region given as a finite union of open balls."""

    def __init__(self, balls: Iterable[Ball] = ()):
        self.balls = list(balls)

    def contains(self, p) -> bool:
        return any(b.contains(p) for b in self.balls)

    def contains_many(self, P: np.ndarray) -> np.ndarray:
        P = np.atleast_2d(P)
        out = np.zeros(len(P), bool)
        for b in self.balls:
            out |= np.linalg.norm(P - b.center, axis=1) < b.radius
        return out

    def closure_contains_many(self, P: np.ndarray, tol: float = 0.0) -> np.ndarray:
        P = np.atleast_2d(P)
        out = np.zeros(len(P), bool)
        for b in self.balls:
            out |= np.linalg.norm(P - b.center, axis=1) <= b.radius + tol
        return out

    def closure_distance(self, p) -> float:
        """Distance from ``p`` to the closed region (0 inside)."""
        p = np.asarray(p, float)
        return max(0.0, min((float(np.linalg.norm(p - b.center)) - b.radius for b in self.balls), default=math.inf))

    def probe_points(self, per_ball: int = 0, rng: np.random.Generator | None = None) -> np.ndarray:
        pts = [b.center for b in self.balls]
        if per_ball and self.balls:
            rng = rng or np.random.default_rng(0)
            n = self.balls[0].center.size
            for b in self.balls:
                u = rng.normal(size=(per_ball, n))
                u /= np.linalg.norm(u, axis=1, keepdims=True)
                rad = b.radius * rng.random(per_ball) ** (1.0 / n)
                pts.extend(b.center + u * rad[:, None])
        return np.array(pts) if pts else np.zeros((0, 0))

    def to_json(self) -> dict:
        return {"balls": [b.to_json() for b in self.balls]}


class PredicateRegion:
    """Open region described by a membership predicate plus optional probe points."""

    def __init__(
        self,
        predicate: Callable[[np.ndarray], bool],
        probes: np.ndarray | None = None,
        label: str = "",
        many: Callable[[np.ndarray], np.ndarray] | None = None,
    ):
        self.predicate = predicate
        self._probes = probes
        self.label = label
        self._many = many

    def contains(self, p) -> bool:
        return bool(self.predicate(np.asarray(p, float)))

    def contains_many(self, P: np.ndarray) -> np.ndarray:
        if self._many is not None:
            return np.asarray(self._many(np.atleast_2d(P)), bool)
        return np.array([self.contains(p) for p in np.atleast_2d(P)], bool)

    def probe_points(self, per_ball: int = 0, rng=None) -> np.ndarray:
        return self._probes if self._probes is not None else np.zeros((0, 0))

    def to_json(self) -> dict:
        return {"predicate": self.label or "opaque"}


@dataclass
class Covering:
    """Indexed family of open regions; ``certificates`` maps index sets to boundary spheres."""

    regions: dict
    certificates: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)

    @property
    def indices(self) -> list:
        return sorted(self.regions, key=lambda j: (isinstance(j, str), str(j) if isinstance(j, str) else j))

    def membership(self, P: np.ndarray) -> np.ndarray:
        """Boolean matrix (points x regions in ``indices`` order)."""
        P = np.atleast_2d(np.asarray(P, float))
        return np.stack([self.regions[j].contains_many(P) for j in self.indices], axis=1) if self.regions else np.zeros(
            (len(P), 0), bool
        )

    def probe_points(self, per_ball: int = 4, rng=None) -> np.ndarray:
        rng = rng or np.random.default_rng(0)
        chunks = [r.probe_points(per_ball, rng) for r in self.regions.values()]
        chunks = [c for c in chunks if c.size]
        chunks.append(self._lens_points())
        chunks = [c for c in chunks if c.size]
        return np.vstack(chunks) if chunks else np.zeros((0, 0))

    def _lens_points(self) -> np.ndarray:
        balls = [b for r in self.regions.values() if isinstance(r, BallUnion) for b in r.balls]
        pts = []
        for b1, b2 in itertools.combinations(balls, 2):
            dvec = b2.center - b1.center
            dist = float(np.linalg.norm(dvec))
            if dist < 1e-15 or dist >= b1.radius + b2.radius:
                continue
            lo = max(dist - b2.radius, -b1.radius)
            hi = min(b1.radius, dist + b2.radius)
            pts.append(b1.center + dvec / dist * (lo + hi) / 2)
        return np.array(pts) if pts else np.zeros((0, 0))

    def multiplicity(self, P: np.ndarray) -> int:
        M = self.membership(P)
        return int(M.sum(axis=1).max()) if M.size else 0

    def to_json(self) -> dict:
        return {
            "format": 1,
            "regions": {str(j): self.regions[j].to_json() for j in self.indices},
            "certificates": {
                ",".join(map(str, sorted(S))): [s.to_json() for s in spheres] for S, spheres in self.certificates.items()
            },
        }


# --- Step 1 construction ------------------------------------------------------------------


def seed_balls(F: np.ndarray, alpha: Sequence[BallUnion], radius_fraction: float = 0.45) -> list[tuple[Ball, int]]:
    """Greedy seed balls B_j with 2B_j inside some alpha_i, covering the sample F.

    Returns ``(B_j, i)`` pairs.
    """
    F = np.atleast_2d(np.asarray(F, float))
    covered = np.zeros(len(F), bool)
    seeds = []
    for idx, x in enumerate(F):
        if covered[idx]:
            continue
        best = None
        for i, region in enumerate(alpha):
            for b in region.balls:
                room = b.radius - float(np.linalg.norm(x - b.center))
                if room > 0 and (best is None or room > best[0]):
                    best = (room, i)
        if best is None:
            raise ValueError(f"point {x.tolist()} is not covered by alpha")
        R = best[0] * radius_fraction
        ball = Ball(x.copy(), R)
        seeds.append((ball, best[1]))
        covered |= np.linalg.norm(F - x, axis=1) <= R
    return seeds


def _sphere_constraints(spheres: Iterable[Sphere], x) -> list[float]:
    bad = []
    for s in spheres:
        if s.is_empty:
            continue
        if s.k == 0:
            bad.extend(_zero_sphere_distances(s, x))
        else:
            bad.extend(excluded_radii(s, x))
    return bad


def _nearest_on_sphere(S: Sphere, x: np.ndarray) -> list[np.ndarray]:
    """Critical points of the distance to ``x`` on the sphere (nearest and farthest)."""
    if S.is_empty:
        return []
    if S.k == 0:
        u = S.basis[:, 0] * S.radius
        return [S.center + u, S.center - u]
    along = S.basis.T @ (x - S.center)
    norm = float(np.linalg.norm(along))
    if norm < 1e-12 * max(1.0, S.radius):
        # x on the axis: every point is critical; a few representatives
        return [S.center + S.radius * S.basis @ e for e in np.vstack([np.eye(S.k + 1), -np.eye(S.k + 1)])]
    u = S.basis @ (along / norm) * S.radius
    return [S.center + u, S.center - u]


def ball_intersection_distance(x, balls: Sequence[Ball], tol: float = 1e-10) -> float:
    """Exact distance from ``x`` to the intersection of closed balls (inf when empty).

    The nearest point has some active set A of boundary spheres and is then a
    critical point of the distance on the sphere cut out by A, so enumerating
    active sets and critical points finds it.
    """
    x = np.asarray(x, float)
    balls = list(balls)
    scale = max([1.0] + [b.radius for b in balls])

    def feasible(p):
        return all(np.linalg.norm(p - b.center) <= b.radius + tol * scale for b in balls)

    if feasible(x):
        return 0.0
    best = math.inf
    for r in range(1, min(len(balls), x.size) + 1):
        for A in itertools.combinations(balls, r):
            S = Sphere.round(A[0].center, A[0].radius)
            try:
                for b in A[1:]:
                    S = intersection_reduction(S, b.center, b.radius)
                    if S.is_empty or (S.k < 0):
                        break
            except ValueError:
                continue  # degenerate (concentric or excluded) configuration
            if S.is_empty:
                continue
            for p in _nearest_on_sphere(S, x):
                if feasible(p):
                    best = min(best, float(np.linalg.norm(p - x)))
    return best


def _meets(a: Ball, b: Ball) -> bool:
    return float(np.linalg.norm(a.center - b.center)) <= a.radius + b.radius


def _bad_set_constraints(regions: dict, X: np.ndarray, B: Ball, max_size: int) -> list[list[list[Ball]]]:
    """Earlier index sets S whose open intersection misses the sample of F ∩ B̄_j.

    Returns, per minimal such S, the list of ball combinations (one ball per
    region of S, plus the doubled seed) whose closed intersection is nonempty.
    """
    dbl = Ball(B.center, 2 * B.radius)
    near = [
        i
        for i, reg in regions.items()
        if any(np.linalg.norm(b.center - B.center) <= b.radius + dbl.radius for b in reg.balls)
    ]
    if not near:
        return []
    M = np.stack([regions[i].contains_many(X) for i in near], axis=1) if len(X) else np.zeros((0, len(near)), bool)
    out = []
    good = [()]
    for size in range(1, max_size + 1):
        nxt = []
        for base in good:
            start = near.index(base[-1]) + 1 if base else 0
            for i in near[start:]:
                S = base + (i,)
                cols = [near.index(t) for t in S]
                if len(X) and M[:, cols].all(axis=1).any():
                    nxt.append(S)
                    continue
                combos = []
                pools = [[b for b in regions[t].balls if _meets(b, dbl)] for t in S]
                for combo in itertools.product(*pools):
                    if not all(_meets(a, b) for a, b in itertools.combinations(combo, 2)):
                        continue
                    if math.isfinite(ball_intersection_distance(dbl.center, list(combo) + [dbl])):
                        combos.append(list(combo) + [dbl])
                if combos:
                    out.append(combos)
        good = nxt
        if not good:
            break
    return out


def build_step1_covering(
    F: np.ndarray,
    alpha: Sequence[BallUnion],
    seeds: Sequence[tuple[Ball, int]] | None = None,
    rng: np.random.Generator | None = None,
    max_tries: int = 60,
    max_level: int | None = None,
) -> Covering:
    """Inductive construction of regions beta_j over a finite sample F.

    Each beta_j is a union of balls B centred at points of F in the closed
    seed ball B̄_j with B inside 2B_j.  B̄ must stay off every closed
    intersection of earlier regions whose open intersection misses
    F ∩ B̄_j, and its radius avoids the excluded radii of every recorded
    boundary sphere as well as the distances to sample points.
    """
    F = np.atleast_2d(np.asarray(F, float))
    n = F.shape[1]
    rng = rng or np.random.default_rng(0)
    seeds = list(seeds) if seeds is not None else seed_balls(F, alpha)
    if not seeds:
        raise ValueError("empty seed")
    # each doubled seed inside its alpha region (local finiteness is automatic for finitely many seeds)
    for j, (B, i) in enumerate(seeds):
        if not any(float(np.linalg.norm(B.center - b.center)) + 2 * B.radius <= b.radius + 1e-12 for b in alpha[i].balls):
            raise ValueError(f"seed ball {j}: doubled ball is not inside alpha[{i}]")
    max_level = n if max_level is None else max_level
    regions: dict = {}
    certs: dict = {}  # frozenset(S) -> list of spheres of dimension n - |S|
    witnesses: dict = {}
    if len(F) > 1:
        nn = np.array([np.partition(np.linalg.norm(F - p, axis=1), 1)[1] for p in F])
        margin_s = 0.25 * float(np.median(nn))
    else:
        margin_s = 0.0
    for j, (B, _i) in enumerate(seeds):
        in_seed = np.linalg.norm(F - B.center, axis=1) <= B.radius
        X = F[in_seed]
        # the first region is the doubled seed itself
        balls: list[Ball] = [Ball(B.center.copy(), 2 * B.radius)] if j == 0 else []
        cap = 2 * B.radius - np.linalg.norm(X - B.center, axis=1)
        for combos in _bad_set_constraints(regions, X, B, max_level + 1):
            dist = np.array([min(ball_intersection_distance(x, c) for c in combos) for x in X])
            cap = np.minimum(cap, dist)
        covered = np.zeros(len(X), bool)
        for b in balls:
            covered |= np.linalg.norm(X - b.center, axis=1) < b.radius
        while not covered.all():
            y = X[np.flatnonzero(~covered)[0]]
            # centre with the largest margin around y
            reach = np.linalg.norm(X - y, axis=1)
            slack = 0.9 * cap - reach
            c_idx = int(np.argmax(slack))
            if slack[c_idx] <= 0:
                c_idx = int(np.argmin(reach))
            x = X[c_idx]
            if cap[c_idx] <= 0:
                raise ValueError(f"no admissible radius at {x.tolist()} in seed {j}")
            sample_d = np.linalg.norm(F - x, axis=1)
            exact = []
            for S, spheres in certs.items():
                exact.extend(_sphere_constraints(spheres, x))
            exact = np.array(exact)
            need = float(reach[c_idx])
            top = 0.9 * float(cap[c_idx])
            lo_r = need if top > need else 0.0
            # radii keep a margin from every sample distance so that sample
            # points never sit on a region boundary
            rho, best, rho_fallback = None, -1.0, None
            for r in np.linspace(top, lo_r + (top - lo_r) / max_tries, max_tries):
                if exact.size and np.any(np.abs(r - exact) <= 1e-9 * np.maximum(1.0, exact)):
                    continue
                clear = float(np.min(np.abs(r - sample_d)))
                if clear >= margin_s:
                    rho = float(r)
                    break
                if clear > best:
                    best, rho_fallback = clear, float(r)
            if rho is None and best > 1e-9 * max(1.0, top):
                rho = rho_fallback
            if rho is None:
                raise ValueError(f"radius search exhausted at {x.tolist()} in seed {j}")
            balls.append(Ball(x.copy(), rho))
            covered |= np.linalg.norm(X - x, axis=1) < rho
        regions[j] = BallUnion(balls)
        # update boundary certificates: S ∪ {j}
        new_certs = {frozenset({j}): [Sphere.round(b.center, b.radius) for b in balls]}
        for S, spheres in certs.items():
            if len(S) + 1 > max_level:
                continue
            out = []
            for s in spheres:
                for b in balls:
                    if s.k >= 1:
                        red = intersection_reduction(s, b.center, b.radius)
                        if not red.is_empty:
                            out.append(red)
            if out:
                new_certs[S | {j}] = out
        certs.update(new_certs)
    cov = Covering(regions, certs, witnesses)
    M = cov.membership(F)
    for row, p in zip(M, F):
        members = [cov.indices[c] for c in np.flatnonzero(row)]
        for r in range(1, len(members) + 1):
            for S in itertools.combinations(members, r):
                cov.witnesses.setdefault(frozenset(S), p)
    return cov


# --- nerves ----------------------------------------------------------------------------------


@dataclass
class Nerve:
    complex: SimplicialComplex
    witnesses: dict  # simplex (tuple of vertex ids) -> point
    labels: dict  # vertex id -> covering index

    def simplex_labels(self, simplex) -> tuple:
        return tuple(self.labels[v] for v in simplex)

    def simplexes_of_dim(self, k: int) -> set:
        return set(self.complex.cells_of_dim(k))


def _vertex_ids(covering: Covering) -> dict:
    return {j: v for v, j in enumerate(covering.indices)}


def nerve(
    covering: Covering,
    reference: np.ndarray | None = None,
    max_dim: int | None = None,
    per_ball: int = 8,
) -> Nerve:
    """Nerve of the covering relative to a reference sample (or of the bare arrangement).

    A simplex S is recorded only with a witness point lying in every region of
    S (and in the reference set when given).  Missing witnesses make the
    result a subcomplex of the true nerve, never a supercomplex.
    """
    ids = _vertex_ids(covering)
    labels = {v: j for j, v in ids.items()}
    if reference is None:
        P = covering.probe_points(per_ball)
    else:
        P = np.atleast_2d(np.asarray(reference, float))
    witnesses: dict = {}
    if P.size:
        M = covering.membership(P)
        for row, p in zip(M, P):
            members = [ids[covering.indices[c]] for c in np.flatnonzero(row)]
            top = len(members) if max_dim is None else min(len(members), max_dim + 1)
            for r in range(1, top + 1):
                for S in itertools.combinations(sorted(members), r):
                    witnesses.setdefault(S, p)
    cx = SimplicialComplex(frozenset(witnesses))
    return Nerve(cx, witnesses, labels)


def refinement_is_simplicial(fine: Nerve, coarse: Nerve, index_map: Mapping) -> bool:
    """Does the vertex map induced by a refinement send every simplex to a simplex?"""
    inverse = {j: v for v, j in coarse.labels.items()}
    for s in fine.complex.cells:
        image = tuple(sorted({inverse[index_map[fine.labels[v]]] for v in s}))
        if image not in coarse.complex.cells:
            return False
    return True


@dataclass
class CoveringVerdict:
    ok: bool
    reason: str = ""
    violating: tuple | None = None
    nerves: dict = field(default_factory=dict)
    same_d_simplexes: bool | None = None
    injective: bool | None = None
    j_map: InducedHomMap | None = None

    def __bool__(self) -> bool:
        return self.ok


def verify_general_covering(
    covering: Covering,
    E: np.ndarray,
    gamma: np.ndarray,
    E_k: np.ndarray,
    d: int,
    G: CoefficientGroup = Integers,
    probes: np.ndarray | None = None,
) -> CoveringVerdict:
    """Check the two general-covering axioms on samples and the nerve injectivity claim."""

    def stack(*arrs):
        arrs = [np.atleast_2d(np.asarray(a, float)) for a in arrs if a is not None and np.size(a)]
        return np.vstack(arrs) if arrs else np.zeros((0, 0))

    G_pts = stack(gamma)
    EG = stack(E, gamma)
    EkG = stack(E_k, E, gamma)
    # (1) coverage of E_k ∪ Γ
    M = covering.membership(EkG)
    uncovered = np.flatnonzero(~M.any(axis=1))
    if uncovered.size:
        return CoveringVerdict(False, "axiom-1: point not covered", tuple(EkG[uncovered[0]].tolist()))
    # (2) every nonempty (d+1)-fold intersection meets E ∪ Γ
    arrangement = stack(EkG, covering.probe_points(), probes)
    arr_nerve = nerve(covering, arrangement, max_dim=d)
    eg_nerve = nerve(covering, EG, max_dim=d)
    for S in sorted(arr_nerve.simplexes_of_dim(d)):
        if S not in eg_nerve.complex.cells:
            return CoveringVerdict(
                False, "axiom-2: (d+1)-fold intersection misses E ∪ Γ", arr_nerve.simplex_labels(S)
            )
    K_gamma = nerve(covering, G_pts, max_dim=d)
    K_eg = eg_nerve
    K_ekg = nerve(covering, EkG, max_dim=d)
    nerves = {"gamma": K_gamma, "E_gamma": K_eg, "Ek_gamma": K_ekg}
    same = K_eg.simplexes_of_dim(d) == K_ekg.simplexes_of_dim(d)
    if not same:
        extra = sorted(K_ekg.simplexes_of_dim(d) - K_eg.simplexes_of_dim(d))
        return CoveringVerdict(False, "d-simplexes differ", K_ekg.simplex_labels(extra[0]), nerves, False)
    sub = K_eg.complex.intersection(K_ekg.complex)
    if sub.cells != K_eg.complex.cells:
        return CoveringVerdict(False, "K(E∪Γ) is not a subcomplex of K(E_k∪Γ)", None, nerves, same)
    j = induced_map(K_eg.complex, K_ekg.complex, d - 1, G)
    inj = is_injective(j)
    return CoveringVerdict(inj, "" if inj else "j_gamma not injective", None, nerves, same, inj, j)

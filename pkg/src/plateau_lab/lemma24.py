"""End-to-end weak-limit closure pipeline on point-set fixtures.

Step 1 builds the ball covering of E ∪ Γ, Step 2 projects the far part of
E_k and pulls the covering back, Step 3 compares nerves and pushes the
chosen Γ-classes into the nerve of Γ.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .complex_core import subdivide
from .covering import BallUnion, Covering, CoveringVerdict, build_step1_covering, verify_general_covering
from .ff_projection import Step2Error, Step2Result, admissible_ell, step2_pipeline
from .fixtures import DiskTentacle
from .homology import Integers, homology, induced_map, is_boundary
from .spanning import is_reifenberg_competitor

__all__ = ["Lemma24Report", "run_lemma24", "gamma_vertex_map", "push_cycle_to_nerve"]


@dataclass
class Lemma24Report:
    ok: bool
    status: str
    checks: dict = field(default_factory=dict)
    ell: float = 0.0
    side: float = 0.0
    regions: int = 0
    verdict: CoveringVerdict | None = None
    step2: Step2Result | None = None
    timings: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "format": 1,
            "ok": self.ok,
            "status": self.status,
            "checks": {k: v for k, v in sorted(self.checks.items())},
            "ell": self.ell,
            "side": self.side,
            "regions": self.regions,
        }


def _balls_of(region):
    return region.balls if isinstance(region, BallUnion) else []


def gamma_vertex_map(beta: Covering, positions: dict, stars: dict) -> dict | None:
    """Pick for every vertex v a region index j with its closed star inside one ball of beta_j.

    Returns ``None`` when some vertex has no such region (refine and retry).
    """
    out = {}
    for v, nbrs in stars.items():
        pts = np.array([positions[u] for u in nbrs])
        chosen = None
        for j in beta.indices:
            for b in _balls_of(beta.regions[j]):
                if np.all(np.linalg.norm(pts - b.center, axis=1) < b.radius):
                    chosen = j
                    break
            if chosen is not None:
                break
        if chosen is None:
            return None
        out[v] = chosen
    return out


def push_cycle_to_nerve(gamma_cx, chain: dict, beta: Covering, max_refine: int = 8):
    """Refine Γ, subdivide, and map vertices into the nerve (simplicial approximation).

    Returns ``(nerve_chain, witnesses)`` where the chain is keyed by tuples of
    covering indices (sorted, with orientation sign) and ``witnesses`` are
    barycentres of the subdivided simplexes, one inside every image simplex.
    """
    K, c = gamma_cx, dict(chain)
    for _ in range(max_refine + 1):
        sd = subdivide(K)
        pos = {v: K.barycenter(cell) for v, cell in sd.labels.items()}
        stars: dict = {v: {v} for v in pos}
        for s in sd.complex.cells:
            for v in s:
                stars[v].update(s)
        fmap = gamma_vertex_map(beta, pos, stars)
        if fmap is not None:
            break
        c = K.refine_chain(c)
        K = K.refine()
    else:
        raise RuntimeError("Γ could not be refined into the covering")
    sd_chain = sd.chain_map(c)
    order = {j: i for i, j in enumerate(beta.indices)}
    image: dict = {}
    for simplex, coeff in sd_chain.items():
        labels = [fmap[v] for v in simplex]
        if len(set(labels)) < len(labels):
            continue
        perm = sorted(range(len(labels)), key=lambda i: order[labels[i]])
        sign = _perm_sign(perm)
        key = tuple(labels[i] for i in perm)
        image[key] = image.get(key, 0) + sign * coeff
    witnesses = np.array([np.mean([pos[v] for v in s], axis=0) for s in sd.complex.cells])
    return {k: v for k, v in image.items() if v}, witnesses


def _perm_sign(perm) -> int:
    sign, seen = 1, [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def run_lemma24(
    fx: DiskTentacle | None = None,
    seed: int = 0,
    h: float = 1 / 16,
    tau: float | None = None,
    beta: Covering | None = None,
) -> Lemma24Report:
    """Run Steps 1-3 on the disk-with-tentacle fixture and check every claim."""
    fx = fx or DiskTentacle()
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    d = fx.d
    F = fx.E.union(fx.gamma)
    F_sample = F.lattice(h)
    gamma_sample = fx.gamma.lattice(h / 2)
    if beta is None:
        beta = build_step1_covering(F_sample, fx.alpha(), rng=rng)
    centers = np.array([b.center for r in beta.regions.values() for b in _balls_of(r)])
    timings = {"step1": time.perf_counter() - t0}
    rep = Lemma24Report(False, "", regions=len(beta.regions), timings=timings)
    # Step 2
    t1 = time.perf_counter()
    bound = admissible_ell(beta, F, fx.B0)
    ell = 0.9 * bound
    side = ell / np.sqrt(fx.n)
    S = fx.tentacle_sample(min(side / 4, 0.05))
    try:
        st2 = step2_pipeline(fx.E, fx.gamma, S, beta, d, fx.B0, ell=ell, rng=rng, tau=tau, F_sample=F_sample)
    except Step2Error as exc:
        rep.status = f"error: {exc}"
        return rep
    rep.step2, rep.ell, rep.side = st2, st2.ell, st2.L.grid.side if st2.L else side
    timings["step2"] = time.perf_counter() - t1
    if st2.status != "ok":
        rep.status = st2.status
        return rep
    rep.checks.update(st2.checks)
    # Step 3
    t2 = time.perf_counter()
    gamma_cx, cycle = fx.gamma_cycle()
    nerve_chain, bary = push_cycle_to_nerve(gamma_cx, cycle, beta)
    E_ref = np.vstack([F_sample, centers, bary])
    G_ref = np.vstack([gamma_sample, bary])
    verdict = verify_general_covering(st2.gamma, E_ref, G_ref, S.points, d, Integers, probes=S.points)
    rep.verdict = verdict
    rep.checks["general_covering"] = not verdict.reason.startswith("axiom")
    rep.checks["same_d_simplexes"] = bool(verdict.same_d_simplexes)
    rep.checks["j_injective"] = bool(verdict.injective)
    if verdict.nerves:
        ids = {j: v for v, j in verdict.nerves["gamma"].labels.items()}
        chain = {tuple(ids[j] for j in key): c for key, c in nerve_chain.items()}
        K_gamma = verdict.nerves["gamma"].complex
        K_eg = verdict.nerves["E_gamma"].complex
        H_gamma = homology(K_gamma, d - 1, Integers)
        coords = H_gamma.coordinates(chain)
        rep.checks["pi_L_nonzero_in_K_gamma"] = not H_gamma.is_zero(coords)
        i_map = induced_map(K_gamma, K_eg, d - 1, Integers)
        rep.checks["i_gamma_zero_on_pi_L"] = i_map.target.is_zero(i_map.apply(coords))
        rep.checks["pi_L_bounds_in_K_E_gamma"] = is_boundary(K_eg, d - 1, Integers, chain)
    rep.checks["limit_is_reifenberg"] = is_reifenberg_competitor(fx.scene(Fraction(1, 2)))
    timings["step3"] = time.perf_counter() - t2
    rep.ok = all(rep.checks.values()) and verdict.ok
    rep.status = "ok" if rep.ok else (verdict.reason or "check failed")
    return rep

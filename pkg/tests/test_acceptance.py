"""Acceptance criteria, one test (and one PASS/FAIL line) per criterion.

Runtime bounds and tolerances are pinned below; a line is also echoed in the
terminal summary so ``pytest -v`` output records the verdicts.
"""

import filecmp
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import determinantal_divisors
from test_covering import numeric_intersections
from test_ff_projection import unit_L
from plateau_lab.cli import main
from plateau_lab.complex_core import SimplicialComplex, build_grid
from plateau_lab.covering import Sphere, excluded_radii, intersection_reduction
from plateau_lab.energy import (
    Integrand,
    almgren_to_david,
    check_axiom_ii,
    energy,
    hemisphere,
    oscillation_epsilon,
    plane_disk,
)
from plateau_lab.ff_projection import ff_project
from plateau_lab.fixtures import DiskTentacle, block_scene, diagonal_scene, two_point_scene
from plateau_lab.geometry import MeasuredSet
from plateau_lab.homology import Integers, IntegersMod, homology, mayer_vietoris_check, smith_normal_form
from plateau_lab.lemma24 import run_lemma24
from plateau_lab.solver import MinimizationRun, Mode, minimize, refinement_study
from plateau_lab.spanning import (
    DeformationTrace,
    Scene,
    apply_trace,
    collapse_move,
    is_nakauchi_competitor,
    is_reifenberg_competitor,
    superset_closure_check,
    validate_sliding_deformation,
)

E01 = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])


def report(number, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    bound = f"< {limit}s" if math.isfinite(limit) else "no time bound"
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail}; {elapsed:.1f}s, {bound})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


# --- 1. homology engine ---------------------------------------------------------------------------

RP2 = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 1, 5), (1, 2, 4), (2, 3, 5), (1, 3, 4), (1, 3, 5), (2, 4, 5)]


def test_criterion_1_homology_engine():
    t0 = time.perf_counter()
    tri = SimplicialComplex.from_maximal([(0, 1), (1, 2), (0, 2)])
    h_tri = homology(tri, 1, Integers)
    rp2 = SimplicialComplex.from_maximal(RP2)
    h_z = homology(rp2, 1, Integers)
    h_2 = homology(rp2, 1, IntegersMod(2))
    examples = (h_tri.free_rank, h_tri.torsion) == (1, []) and (h_z.free_rank, h_z.torsion) == (0, [2]) and h_2.rank == 1
    rng = random.Random(1)
    mismatches = 0
    for _ in range(200):
        M = [[rng.randint(-9, 9) for _ in range(6)] for _ in range(6)]
        _, D, _ = smith_normal_form(M)
        diag = [D[i][i] for i in range(6) if D[i][i]]
        mismatches += diag != determinantal_divisors(M)
    ok = report(1, examples and mismatches == 0, f"examples {examples}, SNF mismatches {mismatches}/200", time.perf_counter() - t0, 10)
    assert ok


# --- 2. competitor predicates ----------------------------------------------------------------------


def random_cubical_scene(rng: random.Random) -> Scene:
    a, b = rng.randint(2, 6), rng.randint(2, 6)
    K = build_grid([(0, a), (0, b)], 1)
    d = rng.choice([1, 2])
    cells = sorted(K.cells, key=K.sort_key)
    if d == 2:
        x0, x1 = sorted(rng.sample(range(a + 1), 2))
        y0, y1 = sorted(rng.sample(range(b + 1), 2))
        ring = [c for c in K.cells_of_dim(1) if _on_rect(c, x0, x1, y0, y1)]
        extra = [c for c in K.cells_of_dim(1) if rng.random() < 0.1]
        gamma = K.subcomplex(ring + extra)
        E = K.subcomplex([c for c in cells if rng.random() < 0.5])
    else:
        gamma = K.subcomplex(rng.sample(K.cells_of_dim(0), rng.randint(1, 4)))
        E = K.subcomplex([c for c in K.cells_of_dim(1) if rng.random() < 0.5])
    pres = homology(gamma, d - 1, Integers)
    gens = list(pres.generators)
    if gens and rng.random() < 0.5:
        gens = rng.sample(gens, rng.randint(1, len(gens)))
    return Scene(K, gamma, E, d, Integers, tuple(gens))


def _on_rect(edge, x0, x1, y0, y1):
    (x, y), axes = edge
    if axes == (0,):
        return y in (y0, y1) and x0 <= x < x1
    return x in (x0, x1) and y0 <= y < y1


def test_criterion_2_competitor_predicates():
    t0 = time.perf_counter()
    rng = random.Random(2)
    discrepancies = mv_fail = 0
    for _ in range(100):
        sc = random_cubical_scene(rng)
        discrepancies += is_reifenberg_competitor(sc) != is_nakauchi_competitor(sc)
        mv_fail += not mayer_vietoris_check(sc.gamma, sc.competitor, sc.d - 1, sc.G)
    ok = report(2, discrepancies == 0 and mv_fail == 0, f"{discrepancies} discrepancies, {mv_fail} Mayer-Vietoris failures over 100 scenes", time.perf_counter() - t0, 60)
    assert ok


# --- 3. closure under supersets and sliding deformations -----------------------------------------------


def random_collapse_trace(sc: Scene, rng: random.Random, steps: int):
    """A chain of elementary collapses of cells outside Γ, validated step by step."""
    moves, cur = [], sc
    for _ in range(steps):
        E, K = cur.competitor, cur.grid
        pairs = []
        for top in sorted(E.cells, key=K.sort_key):
            if top in cur.gamma.cells or len(top[1]) == 0:
                continue
            for f, _ in K.faces(top):
                if f in cur.gamma.cells:
                    continue
                cof = [c for c in E.cells if len(c[1]) == len(f[1]) + 1 and f in {g for g, _ in K.faces(c)}]
                if cof == [top]:
                    pairs.append((top, f))
        if not pairs:
            break
        top, f = rng.choice(pairs)
        mv = collapse_move(K, top, f)
        if not validate_sliding_deformation(DeformationTrace((mv,)), cur):
            break
        moves.append(mv)
        cur = apply_trace(DeformationTrace((mv,)), cur)
    return DeformationTrace(tuple(moves)), cur


def test_criterion_3_closure_properties():
    t0 = time.perf_counter()
    rng = random.Random(3)
    supersets = traces = 0
    preserved_sup = preserved_tr = 0
    while supersets < 50 or traces < 50:
        sc = random_cubical_scene(rng)
        if not is_reifenberg_competitor(sc):
            continue
        if supersets < 50:
            extra = [c for c in sc.grid.cells if rng.random() < 0.3]
            F = sc.competitor.union(sc.grid.subcomplex(extra))
            preserved_sup += superset_closure_check(sc, F)
            supersets += 1
        if traces < 50:
            trace, _ = random_collapse_trace(sc, rng, rng.randint(1, 4))
            if not trace.steps:
                continue
            if not validate_sliding_deformation(trace, sc):
                continue
            preserved_tr += is_reifenberg_competitor(apply_trace(trace, sc))
            traces += 1
    ok = report(3, preserved_sup == 50 and preserved_tr == 50, f"supersets {preserved_sup}/50, traces {preserved_tr}/50", time.perf_counter() - t0, 60)
    assert ok


# --- 4. sphere intersections --------------------------------------------------------------------------


def test_criterion_4_sphere_reduction():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    bad_excluded = bad_points = checked = 0
    for trial in range(100):
        n = int(rng.integers(2, 4))
        k = int(rng.integers(1, n))
        S = Sphere.in_plane(rng.normal(size=n), float(rng.uniform(0.5, 2)), rng.normal(size=(n, k + 1)))
        x = rng.normal(size=n) * 2
        on_axis = trial % 2 == 0 and k + 1 < n
        if on_axis:
            # put x on the axis of S: then S lies on S(x, r) for the right r
            x = S.center + (x - S.center) - S.basis @ (S.basis.T @ (x - S.center))
        ex = excluded_radii(S, x)
        if len(ex) != 1:
            bad_excluded += 1
            continue
        (e,) = ex
        try:
            intersection_reduction(S, x, e)
            bad_excluded += 1
        except ValueError:
            pass
        for r in (e * (1 - 1e-6), e * (1 + 1e-6)):
            try:
                intersection_reduction(S, x, r)
            except ValueError:
                bad_excluded += 1
        if on_axis:
            pts = S.points(64, rng)
            bad_excluded += not np.allclose(np.linalg.norm(pts - x, axis=1), e, rtol=1e-9)
        dist = np.linalg.norm(S.center - x)
        radii = []
        while len(radii) < 20:
            r = float(rng.uniform(max(1e-3, dist - S.radius - 0.5), dist + S.radius + 0.5))
            if all(abs(r - e) > 1e-6 for e in ex):
                radii.append(r)
        for r in radii:
            R = intersection_reduction(S, x, r)
            for p in numeric_intersections(S, x, r, rng, starts=8):
                checked += 1
                bad_points += R.is_empty or not R.contains(p, 1e-9)
    ok = report(4, bad_excluded == 0 and bad_points == 0 and checked > 0, f"excluded-radius errors {bad_excluded}/100 spheres, off-sphere points {bad_points}/{checked}", time.perf_counter() - t0, 30)
    assert ok


# --- 5. Federer-Fleming projection ------------------------------------------------------------------


def chord(rng):
    th = rng.uniform(0, math.pi)
    u = np.array([math.cos(th), math.sin(th)])
    t = min(0.5 / abs(u[0]) if abs(u[0]) > 1e-12 else 9.0, 0.5 / abs(u[1]) if abs(u[1]) > 1e-12 else 9.0)
    c = np.array([0.5, 0.5])
    return MeasuredSet.segment(c - t * u, c + t * u, 300)


def test_criterion_5_federer_fleming():
    t0 = time.perf_counter()
    L = unit_L()
    maxima, displaced = [], 0
    for rerun in range(3):
        rng = np.random.default_rng(rerun)
        worst = 0.0
        for _ in range(100):
            res = ff_project(chord(rng), L, 1, rng=rng, extra_round=False)
            displaced += res.displacement_max > L.ell + 1e-12
            worst = max(worst, res.C_estimate)
        maxima.append(worst)
    spread = (max(maxima) - min(maxima)) / np.mean(maxima)
    ok = displaced == 0 and max(maxima) <= 10 and spread <= 0.2
    detail = f"C(2) per rerun {[round(m, 3) for m in maxima]}, spread {spread:.1%}, displacement violations {displaced}"
    assert report(5, ok, detail, time.perf_counter() - t0, 120)


# --- 6. weak-limit pipeline -----------------------------------------------------------------------------


def test_criterion_6_lemma24_pipeline():
    t0 = time.perf_counter()
    fx = DiskTentacle(k=8)
    rep = run_lemma24(fx, seed=0)
    keys = ("general_covering", "same_d_simplexes", "j_injective", "i_gamma_zero_on_pi_L")
    pipeline = all(rep.checks.get(k, False) for k in keys)
    limit = is_reifenberg_competitor(fx.scene(Fraction(1, 2)))
    detail = f"status {rep.status}, " + ", ".join(f"{k}={rep.checks.get(k)}" for k in keys) + f", limit reifenberg={limit}"
    assert report(6, rep.ok and pipeline and limit, detail, time.perf_counter() - t0, 120)


# --- 7. discrete Plateau surrogate ----------------------------------------------------------------------

UNIT1 = Integrand.constant(1.0, n=2, d=1)
UNIT2 = Integrand.constant(1.0, n=2, d=2)
_T7 = {"elapsed": 0.0}


def test_criterion_7a_two_point():
    t0 = time.perf_counter()
    run = MinimizationRun(two_point_scene(Fraction(1, 8), "detour"), Mode.FREE, UNIT1)
    minimize(run, budget=4000)
    _T7["elapsed"] += time.perf_counter() - t0
    assert report("7a", run.best_energy == 1.0, f"two-point energy {run.best_energy!r} (target 1.0, tolerance 0)", _T7["elapsed"], 300)


def test_criterion_7b_filled_ring():
    t0 = time.perf_counter()
    s = Fraction(1, 4)
    sc = block_scene(side=s)
    whole = sc.with_competitor(sc.grid.subcomplex(sc.grid.cells_of_dim(2)))
    run = MinimizationRun(whole, Mode.FREE, UNIT2)
    minimize(run, budget=4000)
    target = 16 * float(s) ** 2
    _T7["elapsed"] += time.perf_counter() - t0
    assert report("7b", run.best_energy == target, f"block energy {run.best_energy!r} (target {target}, tolerance 0)", _T7["elapsed"], 300)


def test_criterion_7c_diagonal_refinement():
    t0 = time.perf_counter()
    sides = [Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)]
    study = refinement_study(diagonal_scene, UNIT1, sides)
    mono = all(b <= a for a, b in zip(study.minima, study.minima[1:]))
    finest = study.minima[-1]
    _T7["elapsed"] += time.perf_counter() - t0
    detail = f"minima {study.minima}, nonincreasing={mono}, finest {finest} vs bound 1.45 (sqrt 2 + 3%)"
    assert report("7c", mono and finest <= 1.45, detail, _T7["elapsed"], 300)


# --- 8. energy axioms ---------------------------------------------------------------------------------


def test_criterion_8_energy_axioms():
    t0 = time.perf_counter()
    # axiom (i) is asserted when each report is built; emit a few and re-check the bound here
    ig = Integrand.from_expressions("1 + 0.5*|x0| + 0.2*p00", j="1 + 0.5*|x0|", n=3, d=2, Lam=2.0)
    K = build_grid([(0, 1)] * 3, Fraction(1, 4))
    S_cells = K.subcomplex([c for c in K.cells_of_dim(2) if c[1] == (0, 1)])
    reports = [energy(S_cells, ig), energy(hemisphere(0.3), ig), energy(plane_disk(np.zeros(3), E01, 0.2), ig)]
    axiom_i = all(r.hausdorff / r.Lam - 1e-12 <= r.rectifiable_part <= r.Lam * r.hausdorff + 1e-12 for r in reports)

    flat = Integrand.constant(1.0, n=3, d=2)
    e = np.array([0.0, 0.0, 1.0])
    f = lambda U: U @ E01.T + np.sum(U * U, axis=1)[:, None] * e  # noqa: E731
    df = lambda U: E01[None] + 2 * e[None, :, None] * U[:, None, :]  # noqa: E731
    ratios, _ = check_axiom_ii(flat, np.zeros(3), E01, f, df, r0=0.5, levels=7)
    axiom_ii = abs(ratios[6] - 1) <= 0.02

    norm = Integrand.from_expressions("1 + (x0*x0 + x1*x1 + x2*x2)**0.5", n=3, d=2, Lam=2.0)
    osc = {r: oscillation_epsilon(norm, r) for r in (0.01, 0.1, 0.4)}
    osc_ok = all(abs(v - 2 * r) <= 0.01 * 2 * r for r, v in osc.items())

    tilt = Integrand.from_expressions("1 + 0.1*x0", n=3, d=2, Lam=2.0)
    fixtures = [hemisphere(0.1), hemisphere(0.05), plane_disk(np.zeros(3), E01, 0.1)]
    slacks = [almgren_to_david(tilt, 1.0, np.zeros(3), r, E01, S, projection_certified=True).slack for r, S in zip((0.1, 0.05, 0.1), fixtures)]
    almgren = all(s >= 0 for s in slacks)
    detail = (
        f"axiom i={axiom_i}, ratio at r0/64 {ratios[6]:.5f}, oscillation/2r "
        f"{[round(v / (2 * r), 4) for r, v in osc.items()]}, slacks {[f'{s:.2e}' for s in slacks]}"
    )
    assert report(8, axiom_i and axiom_ii and osc_ok and almgren, detail, time.perf_counter() - t0, 120)


# --- 9. determinism -------------------------------------------------------------------------------------

COMMANDS = [
    ["check", "--scene", "fixture:block"],
    ["minimize", "--scene", "fixture:two-point-detour", "--seed", "7", "--off-every", "2"],
    ["refine", "--scene", "fixture:two-point-detour", "--side", "1/8"],
    ["energy-audit", "--integrand", "1 + 0.1*x0", "--lam", "2"],
    ["sphere", "--center", "0,0,0", "--radius", "1", "--point", "0,0,2", "--r", "2"],
    ["lemma24", "--k", "8"],
]


def test_criterion_9_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    differing = []
    for i, args in enumerate(COMMANDS):
        outs = []
        for rep in range(2):
            out = tmp_path / f"{i}-{rep}"
            code = main(args + ["--out", str(out)])
            capsys.readouterr()
            assert code == 0, args
            outs.append(out)
        names = sorted(p.name for p in outs[0].iterdir())
        same = names == sorted(p.name for p in outs[1].iterdir())
        same = same and all(filecmp.cmp(outs[0] / n, outs[1] / n, shallow=False) for n in names)
        if not same:
            differing.append(args[0])
    detail = f"{len(COMMANDS) - len(differing)}/{len(COMMANDS)} commands bit-identical" + (f", differing: {differing}" if differing else "")
    assert report(9, not differing, detail, time.perf_counter() - t0, float("inf"))

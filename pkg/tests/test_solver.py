import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import grid_shortest_path, min_competitor_by_subsets
from plateau_lab.energy import Integrand, cell_energies
from plateau_lab.fixtures import (
    DiskTentacle,
    block_scene,
    diagonal_scene,
    ring_film_scene,
    tentacle_sequence,
    two_point_scene,
)
from plateau_lab.solver import (
    MinimizationRun,
    Mode,
    lower_semicontinuity_probe,
    minimize,
    objective,
    refinement_study,
    weak_limit_closure_test,
)
from plateau_lab.spanning import is_reifenberg_competitor

UNIT1 = Integrand.constant(1.0, n=2, d=1)
UNIT2 = Integrand.constant(1.0, n=2, d=2)


def d_cells(scene):
    return set(scene.competitor.cells_of_dim(scene.d))


# --- minimize ---------------------------------------------------------------------------------


def test_two_point_detour_becomes_straight():
    sc = two_point_scene(path="detour")
    run = MinimizationRun(sc, Mode.FREE, UNIT1)
    best = minimize(run, budget=2000)
    K = sc.grid
    oracle = grid_shortest_path(K, cell_energies(K, K.cells_of_dim(1), UNIT1), (0, 0), (8, 0))
    assert oracle == 1.0
    assert run.best_energy == 1.0  # exact, tolerance 0
    assert d_cells(best) == {((x, 0), (0,)) for x in range(8)}
    assert is_reifenberg_competitor(best)


def test_weighted_two_point_never_beats_the_oracle():
    sc = two_point_scene(path="detour")
    ig = Integrand.from_expressions("max(0.5, min(2, 1.5 - 2*x1))", n=2, d=1, Lam=2.0)
    run = MinimizationRun(sc, Mode.FREE, ig)
    best = minimize(run, budget=2000)
    K = sc.grid
    oracle = grid_shortest_path(K, cell_energies(K, K.cells_of_dim(1), ig), (0, 0), (8, 0))
    assert run.best_energy >= oracle - 1e-12
    assert run.best_energy <= run.trace[0].energy
    assert is_reifenberg_competitor(best)


def test_block_fill_is_recovered_exactly():
    sc = block_scene()
    K = sc.grid
    whole = sc.with_competitor(K.subcomplex(K.cells_of_dim(2)))
    run = MinimizationRun(whole, Mode.FREE, UNIT2)
    best = minimize(run, budget=500)
    assert run.best_energy == 16 * (1 / 4) ** 2
    assert d_cells(best) == {((x, y), (0, 1)) for x in range(4) for y in range(4)}


@pytest.mark.parametrize("m,margin", [(1, 1), (2, 0)])
def test_block_matches_subset_brute_force(m, margin):
    sc = block_scene(m=m, margin=margin)
    K = sc.grid
    start = sc.with_competitor(K.subcomplex(K.cells_of_dim(2)))
    run = MinimizationRun(start, Mode.FREE, UNIT2)
    minimize(run, budget=200)
    e, cells = min_competitor_by_subsets(sc, lambda pick: len(pick) * float(K.side) ** 2)
    assert run.best_energy == e
    assert d_cells(run.best) == set(cells)


def test_minimal_scene_is_a_fixed_point():
    sc = two_point_scene(path="straight")
    run = MinimizationRun(sc, Mode.FREE, UNIT1)
    best = minimize(run, budget=500)
    assert best.competitor == sc.competitor
    assert run.accepted == 0 and len(run.trace) == 1


def test_ring_film_in_space_flattens():
    ig = Integrand.constant(1.0, n=3, d=2)
    run = MinimizationRun(ring_film_scene(), Mode.FREE, ig)
    best = minimize(run, budget=500)
    assert run.trace[0].energy == 5.0 and run.best_energy == 1.0
    assert all(c[0][2] == 0 for c in d_cells(best))


def test_fixed_mode_skips_gamma_cells():
    sc = two_point_scene(path="straight")
    K = sc.grid
    gamma = K.subcomplex([((0, 0), (0,)), ((1, 0), (0,)), ((7, 0), (0,))])
    from plateau_lab.spanning import Scene

    sc2 = Scene.whole_L(K, gamma, sc.competitor, 1)
    assert objective(sc2, {c: 1 / 8 for c in K.cells_of_dim(1)}, Mode.FREE) == 1.0
    assert objective(sc2, {c: 1 / 8 for c in K.cells_of_dim(1)}, Mode.FIXED) == 5 / 8


def test_modes_agree_when_gamma_has_no_d_cells():
    for mode in (Mode.FREE, Mode.FIXED):
        run = MinimizationRun(two_point_scene(path="detour"), mode, UNIT1)
        minimize(run, budget=2000)
        assert run.best_energy == 1.0


def test_errors():
    with pytest.raises(ValueError, match="competitor"):
        minimize(MinimizationRun(two_point_scene(path="none"), Mode.FREE, UNIT1), budget=10)
    with pytest.raises(ValueError, match="budget"):
        minimize(MinimizationRun(two_point_scene(), Mode.FREE, UNIT1), budget=0)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.sampled_from(["detour", "straight"]))
def test_trace_invariants(seed, budget, path):
    sc = two_point_scene(side=Fraction(1, 4), path=path)
    run = MinimizationRun(sc, Mode.FREE, UNIT1)
    minimize(run, budget=budget, seed=seed)
    energies = [t.energy for t in run.trace]
    assert all(b <= a for a, b in zip(energies, energies[1:]))
    for t in run.trace:
        assert is_reifenberg_competitor(t.scene)
        assert t.scene.competitor.cells <= sc.grid.cells


def test_confinement_is_respected():
    sc = two_point_scene(path="detour")
    K = sc.grid
    C = frozenset(c for c in K.cells if all(v >= 0 for v in c[0]))
    run = MinimizationRun(sc, Mode.FREE, UNIT1, confinement=C)
    minimize(run, budget=2000)
    for t in run.trace:
        assert t.scene.competitor.cells <= C


def test_determinism():
    runs = []
    for _ in range(2):
        run = MinimizationRun(diagonal_scene(Fraction(1, 4)), Mode.FREE, UNIT1)
        minimize(run, budget=300, seed=11, restarts=3)
        runs.append([(t.energy, t.move, t.scene.competitor.cells) for t in run.trace])
    assert runs[0] == runs[1]


# --- refinement -------------------------------------------------------------------------------


def test_two_point_refinement_is_exact():
    study = refinement_study(lambda s: two_point_scene(s, path="detour"), UNIT1, [Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)])
    assert study.minima == [1.0, 1.0, 1.0]
    assert len(study.limit_support.cells_of_dim(1)) == 8


def test_diagonal_refinement_matches_taxicab_oracle():
    sides = [Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)]
    study = refinement_study(diagonal_scene, UNIT1, sides)
    assert all(b <= a for a, b in zip(study.minima, study.minima[1:]))
    for s, e in zip(sides, study.minima):
        K = diagonal_scene(s).grid
        m = int(1 / s)
        assert e == pytest.approx(grid_shortest_path(K, cell_energies(K, K.cells_of_dim(1), UNIT1), (0, 0), (m, m)))
    # axis-parallel grids cannot beat the taxicab length 2
    assert study.minima[-1] == pytest.approx(2.0)


def test_ring_film_refinement_nonincreasing():
    ig = Integrand.constant(1.0, n=3, d=2)
    study = refinement_study(ring_film_scene, ig, [Fraction(1, 2), Fraction(1, 4)], budget=400)
    assert study.minima[1] <= study.minima[0]


def test_refinement_errors():
    with pytest.raises(ValueError, match="decreasing"):
        refinement_study(two_point_scene, UNIT1, [Fraction(1, 4), Fraction(1, 2)])
    with pytest.raises(ValueError, match="infeasible"):
        refinement_study(lambda s: two_point_scene(s, path="none"), UNIT1, [Fraction(1, 2)])


# --- weak limits -------------------------------------------------------------------------------


def ring_region(seq_limit, rho=1):
    """Cells within rho grid steps of the limit ∪ Γ (an open cell neighbourhood)."""
    from plateau_lab.solver import neighbourhood

    return neighbourhood(seq_limit.grid, seq_limit.union.cells, rho)


def test_probe_constant_sequence_is_zero():
    seq, lim = tentacle_sequence()
    rep = lower_semicontinuity_probe([lim] * 4, ring_region(lim))
    assert rep.masses == [0.0] * 4 and rep.hypothesis_ok


def test_probe_vanishing_tentacle():
    seq, lim = tentacle_sequence(length=5)
    rep = lower_semicontinuity_probe(seq, ring_region(lim))
    assert rep.masses[-1] == 0 and rep.monotone and rep.hypothesis_ok
    assert rep.masses[0] == 4 * (1 / 16)  # one strip cell lies inside the neighbourhood


def test_probe_flags_constant_tentacle():
    seq, lim = tentacle_sequence(kind="constant")
    rep = lower_semicontinuity_probe(seq, ring_region(lim))
    assert not rep.hypothesis_ok


def test_probe_grid_mismatch():
    seq, lim = tentacle_sequence()
    other, _ = tentacle_sequence(side=Fraction(1, 2))
    with pytest.raises(ValueError, match="grid"):
        lower_semicontinuity_probe([seq[0], other[0]], ring_region(lim))


def test_weak_limit_constant_sequence():
    seq, lim = tentacle_sequence()
    rep = weak_limit_closure_test([lim] * 3, lim, lim.grid.cells)
    assert rep and rep.status == "agree"


def test_weak_limit_abandoning_sequence_reports_hypotheses():
    seq, lim = tentacle_sequence(kind="abandon")
    rep = weak_limit_closure_test(seq, lim, lim.grid.cells)
    assert rep.status == "hypotheses violated" and rep.failures


def test_weak_limit_confinement_failure():
    seq, lim = tentacle_sequence()
    C = frozenset(c for c in lim.grid.cells if c[0][0] < 5)
    rep = weak_limit_closure_test(seq, lim, C)
    assert rep.status == "hypotheses violated" and "confinement" in rep.failures[0]


@pytest.fixture(scope="module")
def disk_beta():
    from plateau_lab.covering import build_step1_covering

    fx = DiskTentacle()
    F = fx.E.union(fx.gamma)
    return build_step1_covering(F.lattice(1 / 16), fx.alpha(), rng=np.random.default_rng(0))


def test_weak_limit_with_pipeline(disk_beta):
    seq, lim = tentacle_sequence(length=5)
    rep = weak_limit_closure_test(seq, lim, lim.grid.cells, pipeline=DiskTentacle(), beta=disk_beta)
    assert rep.status == "agree" and rep.pipeline_ok and rep.predicate

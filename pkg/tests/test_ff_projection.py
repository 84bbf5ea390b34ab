import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plateau_lab.complex_core import build_grid
from plateau_lab.covering import Ball, BallUnion, Covering, Sphere
from plateau_lab.ff_projection import (
    EllTooLarge,
    Grid,
    build_beta_infinity,
    ff_project,
    select_far_subcomplex,
    skeleton_distance,
    translate_grid,
)
from plateau_lab.geometry import BoxSet, MeasuredSet

FAR = BoxSet.from_boxes([((50.0, 50.0), (50.0, 50.0))])


def unit_L(n=2, side=1.0):
    """Far subcomplex containing every cell near the origin."""
    F = BoxSet.from_boxes([((50.0,) * n, (50.0,) * n)])
    return select_far_subcomplex(Grid(n, side), F, side * math.sqrt(n), Ball(np.zeros(n), 100.0))


# --- oracles -----------------------------------------------------------------------------------


def brute_far_cells(n_cells, point, ell, center, radius, res=20):
    """Top cells (anchors) of a unit grid with a dense-lattice point that is far and in 2B0."""
    out = set()
    t = np.linspace(0, 1, res + 1)
    X, Y = np.meshgrid(t, t, indexing="ij")
    local = np.stack([X.ravel(), Y.ravel()], axis=1)
    for a in itertools.product(range(n_cells), repeat=2):
        P = local + np.array(a, float)
        ok = (np.linalg.norm(P - point, axis=1) >= 2 * ell) & (np.linalg.norm(P - center, axis=1) <= 2 * radius)
        if ok.any():
            out.add(a)
    return out


def brute_skeleton_distance(p, side, k):
    """Distance to the k-skeleton by enumerating nearby k-cells as boxes."""
    n = len(p)
    base = np.floor(np.asarray(p) / side).astype(int)
    best = math.inf
    for axes in itertools.combinations(range(n), k):
        for off in itertools.product((-1, 0, 1), repeat=n):
            lo = (base + np.array(off)) * side
            hi = lo.copy()
            hi[list(axes)] += side
            best = min(best, float(BoxSet(lo[None], hi[None]).distance(np.asarray(p)[None])[0]))
    return best


def polyline_length(P):
    return float(np.linalg.norm(np.diff(P, axis=0), axis=1).sum())


# --- select_far_subcomplex ---------------------------------------------------------------------


def test_far_subcomplex_center_point_matches_brute_force():
    K = build_grid([(0, 10), (0, 10)], 1)
    ell = math.sqrt(2)
    point = np.array([5.0, 5.0])
    B0 = Ball(point, 7.5)
    L = select_far_subcomplex(K, BoxSet(point[None], point[None]), ell, B0)
    assert set(a for a in L.top_cells() if all(0 <= v < 10 for v in a)) == brute_far_cells(10, point, ell, point, 7.5)
    # cells of L never meet F
    for a in L.top_cells():
        corners = np.array(list(itertools.product(*[(v, v + 1) for v in a])), float)
        assert np.linalg.norm(corners - point, axis=1).min() >= ell - 1e-12


def test_far_subcomplex_empty_when_everything_is_near():
    F = BoxSet.from_boxes([((-100.0, -100.0), (100.0, 100.0))])
    L = select_far_subcomplex(Grid(2, 0.5), F, 1.0, Ball(np.zeros(2), 3.0))
    assert L.top_cells() == []


def test_far_subcomplex_monotone_in_ell():
    F = BoxSet.from_boxes([((0.0, 0.0), (1.0, 0.0))])
    g = Grid(2, 0.25)
    B0 = Ball(np.array([0.5, 0.0]), 1.5)
    previous = None
    for ell in (1.2, 0.9, 0.6, 0.36):
        tops = set(select_far_subcomplex(g, F, ell, B0).top_cells())
        if previous is not None:
            assert previous <= tops
        previous = tops


def test_far_subcomplex_preconditions():
    with pytest.raises(ValueError, match="diameter"):
        select_far_subcomplex(Grid(2, 1.0), FAR, 1.0, Ball(np.zeros(2), 1.0))
    beta = Covering({0: BallUnion([Ball(np.zeros(2), 1.0)])})
    F = BoxSet.from_boxes([((0.0, 0.0), (0.0, 0.0))])
    with pytest.raises(EllTooLarge) as err:
        select_far_subcomplex(Grid(2, 0.1), F, 0.5, Ball(np.zeros(2), 2.0), covering=beta)
    # the complement of the unit ball is at distance 1 from the origin: ell < 1/4
    assert 0.24 <= err.value.bound <= 0.25 + 1e-12  # sampled spheres give a lower estimate


@settings(max_examples=25, deadline=None)
@given(
    st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 0.8), st.floats(0.05, 0.8), st.sampled_from([0.1, 0.2, 0.25])
)
def test_far_cells_do_not_meet_F(x, y, w, h, side):
    F = BoxSet.from_boxes([((x, y), (x + w, y + h))])
    ell = side * math.sqrt(2)
    L = select_far_subcomplex(Grid(2, side), F, ell, Ball(np.zeros(2), 1.5))
    for a in L.top_cells():
        t = np.linspace(0, 1, 6)
        P = np.array([(a[0] + u) * side for u in t for _ in t]), np.array([(a[1] + v) * side for _ in t for v in t])
        P = np.stack(P, axis=1)
        assert F.distance(P).min() >= ell - 1e-9


# --- ff_project ---------------------------------------------------------------------------------


def test_single_point_goes_to_the_cell_boundary():
    L = unit_L()
    S = MeasuredSet(1, [[0.3, 0.6]], [1.0], np.array([[[1.0], [0.0]]]))
    res = ff_project(S, L, 1, rng=np.random.default_rng(1), extra_round=False)
    q = res.points_out[0]
    assert skeleton_distance(q[None], L.grid, 1)[0] < 1e-12
    assert np.all(q >= -1e-12) and np.all(q <= 1 + 1e-12)
    assert res.displacement_max < math.sqrt(2)


def test_set_on_the_skeleton_is_fixed():
    L = unit_L()
    S = MeasuredSet.segment([0.0, 0.0], [1.0, 0.0], 50)
    res = ff_project(S, L, 1, rng=np.random.default_rng(0))
    assert np.allclose(res.points_out, S.points)
    assert res.measure_out == pytest.approx(res.measure_in)
    assert not res.extra_round  # a full edge is above the threshold side/2


@pytest.mark.parametrize("seed", range(5))
def test_jacobian_mass_matches_image_polyline(seed):
    rng = np.random.default_rng(seed)
    L = unit_L()
    a, b = rng.uniform(0.05, 0.95, 2), rng.uniform(0.05, 0.95, 2)
    S = MeasuredSet.segment(a, b, 2000)
    res = ff_project(S, L, 1, rng=rng, extra_round=False)
    dense = MeasuredSet.segment(a, b, 20000)
    img = res.pmap.apply(dense.points)
    assert res.measure_out == pytest.approx(polyline_length(img), rel=1e-2)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3]))
def test_cells_preserved_and_displacement_bounded(seed, n):
    rng = np.random.default_rng(seed)
    L = unit_L(n, 0.5)
    a, b = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
    S = MeasuredSet.segment(a, b, 200)
    res = ff_project(S, L, 1, rng=rng, extra_round=False)
    assert res.displacement_max <= L.ell + 1e-12
    assert skeleton_distance(res.points_out, L.grid, 1).max() < 1e-9
    for p, q in zip(res.points_in, res.points_out):
        lo, hi = L.grid.box((L.grid.carrier(p)[0], tuple(range(n))))
        assert np.all(q >= lo - 1e-9) and np.all(q <= hi + 1e-9)


def chord(rng):
    th = rng.uniform(0, math.pi)
    u = np.array([math.cos(th), math.sin(th)])
    t = min(0.5 / abs(u[0]) if abs(u[0]) > 1e-12 else 9.0, 0.5 / abs(u[1]) if abs(u[1]) > 1e-12 else 9.0)
    c = np.array([0.5, 0.5])
    return MeasuredSet.segment(c - t * u, c + t * u, 300)


def test_empirical_constant_is_stable():
    L = unit_L()
    maxima = []
    for seed in range(3):
        rng = np.random.default_rng(seed)
        maxima.append(max(ff_project(chord(rng), L, 1, rng=rng, extra_round=False).C_estimate for _ in range(30)))
    assert max(maxima) <= 10
    assert np.std(maxima) / np.mean(maxima) < 0.2


def test_extra_round_and_threshold():
    L = unit_L(2, 1.0)
    strip = BoxSet.from_boxes([((0.0, 0.45), (1.0, 0.55))])
    thin = strip.measured(2, 0.02)
    res = ff_project(thin, L, 2, rng=np.random.default_rng(0))
    assert res.status == "ok" and res.extra_round
    assert np.all(res.weights_out == 0)
    assert skeleton_distance(res.points_out, L.grid, 1).max() < 1e-12
    thick = BoxSet.from_boxes([((0.0, 0.1), (1.0, 0.9))]).measured(2, 0.05)
    res = ff_project(thick, L, 2, rng=np.random.default_rng(0))
    assert res.status == "k not large enough" and not res.extra_round


def test_replay_matches_projection():
    L = unit_L(3, 0.5)
    rng = np.random.default_rng(3)
    S = MeasuredSet.segment([-0.7, 0.2, 0.1], [0.6, -0.3, 0.8], 300)
    res = ff_project(S, L, 1, rng=rng)
    assert np.allclose(res.pmap.apply(S.points), res.points_out)


# --- beta_infinity -----------------------------------------------------------------------------


def test_beta_infinity_without_d_fold_intersections():
    beta = Covering({0: BallUnion([Ball(np.array([0.0, 0.0]), 1.0)]), 1: BallUnion([Ball(np.array([3.0, 0.0]), 1.0)])})
    F = BoxSet.from_boxes([((-0.5, 0.0), (0.5, 0.0))])
    binf = build_beta_infinity(beta, F, 2)
    P = np.random.default_rng(0).uniform(-2, 5, (500, 2))
    assert np.array_equal(binf.contains_many(P), F.distance(P) > 1e-12)


def test_beta_infinity_two_overlapping_balls_d1():
    b0, b1 = Ball(np.array([0.0, 0.0]), 1.0), Ball(np.array([1.5, 0.0]), 1.0)
    beta = Covering({0: BallUnion([b0]), 1: BallUnion([b1])})
    F = BoxSet.from_boxes([((0.0, 0.0), (1.5, 0.0))])
    binf = build_beta_infinity(beta, F, 1)
    t = np.linspace(-2, 3.5, 56)
    P = np.array([(x, y) for x in t for y in t])
    inside = (np.linalg.norm(P - b0.center, axis=1) <= 1) | (np.linalg.norm(P - b1.center, axis=1) <= 1)
    assert np.array_equal(binf.contains_many(P), ~inside & (F.distance(P) > 1e-12))


# --- grid translation ---------------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.integers(0, 2), st.sampled_from([0.3, 0.5]))
def test_skeleton_distance_oracle(p, k, side):
    assert skeleton_distance(np.array(p)[None], Grid(3, side), k)[0] == pytest.approx(
        brute_skeleton_distance(p, side, k), abs=1e-12
    )


def test_no_obstacles_accepts_zero_offset():
    tr = translate_grid(Grid(2, 0.5), [], 1)
    assert tr.attempts == 1 and np.all(tr.offset == 0) and tr.clearance == math.inf


def test_circle_through_vertices_forces_translation():
    circle = Sphere.round([0.5, 0.0], 0.5)  # passes through the vertices (0,0) and (1,0)
    tr = translate_grid(Grid(2, 1.0), [circle], 1, np.random.default_rng(0))
    assert tr.attempts > 1 and tr.clearance > 0
    verts = np.array([(x, y) for x in range(-2, 3) for y in range(-2, 3)], float) + tr.offset
    true = np.abs(np.linalg.norm(verts - circle.center, axis=1) - circle.radius).min()
    assert true >= tr.clearance - 1e-12


def random_circle_3d(rng):
    D = rng.normal(size=(3, 2))
    return Sphere.in_plane(rng.uniform(-1, 1, 3), rng.uniform(0.1, 0.8), D)


def test_ten_circles_in_space_translate_quickly():
    rng = np.random.default_rng(7)
    for _ in range(20):
        obstacles = [random_circle_3d(rng) for _ in range(10)]
        tr = translate_grid(Grid(3, 0.25), obstacles, 2, rng)
        assert tr.attempts <= 5 and tr.clearance > 0
        pts = np.vstack([s.points(2000, rng) for s in obstacles])
        assert skeleton_distance(pts, tr.grid, 1).min() >= tr.clearance - 1e-12

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plateau_lab.complex_core import build_grid
from plateau_lab.energy import (
    ExpressionError,
    Integrand,
    IntegrandBoundError,
    almgren_to_david,
    check_axiom_i,
    check_axiom_ii,
    energy,
    frozen_energy,
    hemisphere,
    oscillation_epsilon,
    parse_expression,
    plane_disk,
)
from plateau_lab.geometry import MeasuredSet

E01 = np.eye(3)[:, :2]


def three_cells(s=Fraction(1, 4)):
    K = build_grid([(0, 3 * s), (0, s)], s)
    return K.subcomplex(K.cells_of_dim(2))


# --- closed-form oracles --------------------------------------------------------------------


def parabola_arc(r):
    """Length of y = u^2 over |u| < r."""
    return 2 * (r * math.sqrt(1 + 4 * r * r) / 2 + math.asinh(2 * r) / 4)


def paraboloid_area(r):
    """Area of z = |u|^2 over the disk of radius r."""
    return math.pi / 6 * ((1 + 4 * r * r) ** 1.5 - 1)


def graph_map(x, V, e):
    x, V, e = (np.asarray(a, float) for a in (x, V, e))

    def f(U):
        return x + U @ V.T + np.sum(U * U, axis=1)[:, None] * e

    def df(U):
        return V[None] + 2 * e[None, :, None] * U[:, None, :]

    return f, df


def identity_map(x, V):
    x, V = np.asarray(x, float), np.asarray(V, float)
    return (lambda U: x + U @ V.T), (lambda U: np.repeat(V[None], len(U), axis=0))


# --- energy ----------------------------------------------------------------------------------


def test_unit_integrand_gives_hausdorff_measure():
    rep = energy(three_cells(), Integrand.constant(1.0, n=2, d=2))
    assert rep.total == pytest.approx(3 / 16, abs=1e-15)
    assert len(rep.per_cell) == 3 and rep.unrectifiable_part == 0


def test_constant_two_doubles():
    rep = energy(three_cells(), Integrand.constant(2.0, n=2, d=2, Lam=2.0))
    assert rep.total == pytest.approx(6 / 16, abs=1e-15)


def test_capped_quadratic_on_unit_segment():
    K = build_grid([(0, 1), (0, 1)], 1)
    seg = K.subcomplex([((0, 0), (0,))])
    ig = Integrand.from_expressions("max(0.5, min(2, 1 + x0*x0 + x1*x1))", n=2, d=1, Lam=2.0)
    assert energy(seg, ig).total == pytest.approx(4 / 3, abs=1e-6)


def test_point_cloud_energy_and_tangent_dependence():
    ig = Integrand.from_expressions("1 + 0.5*p00", j="1", n=2, d=1, Lam=2.0)
    horiz = MeasuredSet.segment([0, 0], [1, 0], 10)
    vert = MeasuredSet.segment([0, 0], [0, 1], 10)
    assert energy(horiz, ig).total == pytest.approx(1.5)
    assert energy(vert, ig).total == pytest.approx(1.0)
    rep = energy(horiz, ig, unrectifiable=True)
    assert rep.unrectifiable_part == pytest.approx(1.0) and rep.rectifiable_part == 0


def test_missing_tangent_data_is_an_error():
    cloud = MeasuredSet(1, [[0.0, 0.0]], [1.0], None)
    ig = Integrand.constant(1.0, n=2, d=1)
    with pytest.raises(ValueError, match="tangent"):
        energy(cloud, ig)
    assert energy(cloud, ig, unrectifiable=True).total == 1.0


def test_out_of_bounds_integrand_is_rejected():
    with pytest.raises(IntegrandBoundError):
        energy(three_cells(), Integrand.constant(3.0, n=2, d=2, Lam=2.0))


def test_frozen_energy_equals_point_value_times_measure():
    ig = Integrand.from_expressions("1 + x0", n=2, d=2, Lam=3.0)
    x = np.array([0.3, 0.7])
    assert frozen_energy(three_cells(), ig, x) == pytest.approx(1.3 * 3 / 16, rel=1e-14)


# --- expression grammar ------------------------------------------------------------------------


def test_expression_grammar():
    f = parse_expression("max(0.5, min(2, |x0 - 1| * 3)) / 2", n=2)
    X = np.array([[1.0, 0.0], [0.0, 0.0], [2.0, 5.0]])
    assert np.allclose(f(X, None), [0.25, 1.0, 1.0])
    g = parse_expression("-x1 + ||x0| - 2|", n=2)
    assert np.allclose(g(X, None), [1.0, 2.0, -5.0])


@pytest.mark.parametrize("bad", ["__import__('os')", "x5", "1 +", "x0.real", "lambda: 1", "sin(x0)", "p02"])
def test_expression_grammar_rejects(bad):
    with pytest.raises(ExpressionError):
        parse_expression(bad, n=2, d=1)


# --- axiom (i) --------------------------------------------------------------------------------


def fixtures():
    return [three_cells(), MeasuredSet.segment([0, 0], [1, 1], 20)]


def test_axiom_i_unit():
    v = check_axiom_i(Integrand.constant(1.0, n=2, d=2), [three_cells()])
    assert v.ok and v.worst_ratio == pytest.approx(1.0)


def test_axiom_i_capped():
    ig = Integrand.from_expressions("max(0.5, min(2, 1 + x0 - x1))", n=2, d=2, Lam=2.0)
    assert check_axiom_i(ig, [three_cells()]).ok


def test_axiom_i_broken():
    v = check_axiom_i(Integrand.constant(3.0, n=2, d=2, Lam=2.0), [three_cells()])
    assert not v.ok and v.worst_ratio == pytest.approx(1.5)


# --- axiom (ii) -------------------------------------------------------------------------------


def test_axiom_ii_identity_gives_unit_ratios():
    ig = Integrand.from_expressions("1 + x0*x0 + 0.3*p01", j="1", n=2, d=1, Lam=3.0)
    V = np.array([[1.0], [1.0]]) / math.sqrt(2)
    x = np.array([0.2, -0.1])
    ratios, verdict = check_axiom_ii(ig, x, V, *identity_map(x, V))
    assert np.allclose(ratios, 1.0, atol=1e-12) and verdict.consistent


def test_axiom_ii_graph_map_matches_arc_length():
    ig = Integrand.constant(1.0, n=2, d=1)
    V = np.array([[1.0], [0.0]])
    ratios, verdict = check_axiom_ii(ig, np.zeros(2), V, *graph_map([0, 0], V, [0, 1]), r0=0.5, levels=7)
    expected = [parabola_arc(0.5 / 2**m) / (2 * 0.5 / 2**m) for m in range(7)]
    assert np.allclose(ratios, expected, rtol=1e-9)
    assert verdict.consistent and all(verdict.sandwich_ok)


def test_axiom_ii_graph_map_surface():
    ig = Integrand.constant(1.0, n=3, d=2)
    ratios, verdict = check_axiom_ii(ig, np.zeros(3), E01, *graph_map(np.zeros(3), E01, [0, 0, 1]), r0=0.5, levels=7)
    expected = [paraboloid_area(0.5 / 2**m) / (math.pi * (0.5 / 2**m) ** 2) for m in range(7)]
    assert np.allclose(ratios, expected, rtol=1e-9)
    assert verdict.consistent
    assert abs(ratios[6] - 1) <= 0.02  # inside the band by r0/64


def test_axiom_ii_discontinuous_integrand_fails():
    ig = Integrand(lambda P, T: np.where(P[:, 1] > 0, 1.0, 2.0), lambda P: np.ones(len(P)), n=2, d=1, Lam=2.0)
    V = np.array([[1.0], [0.0]])
    ratios, verdict = check_axiom_ii(ig, np.zeros(2), V, *graph_map([0, 0], V, [0, 1]), levels=8)
    assert not verdict.consistent
    assert ratios[-1] < 0.6


def test_axiom_ii_derivative_condition():
    ig = Integrand.constant(1.0, n=2, d=1)
    V = np.array([[1.0], [0.0]])
    f, _ = identity_map([0, 0], V)
    with pytest.raises(ValueError, match="derivative"):
        check_axiom_ii(ig, np.zeros(2), V, f, lambda U: np.repeat(2 * V[None], len(U), axis=0))


# --- oscillation ------------------------------------------------------------------------------


def test_oscillation_constant_is_zero():
    assert oscillation_epsilon(Integrand.constant(1.0, n=3, d=2), 0.5) == 0.0


@pytest.mark.parametrize("r", [0.01, 0.1, 0.4])
def test_oscillation_of_norm_is_twice_r(r):
    ig = Integrand.from_expressions("1 + (x0*x0 + x1*x1 + x2*x2)**0.5", n=3, d=2, Lam=2.0)
    assert oscillation_epsilon(ig, r) == pytest.approx(2 * r, rel=1e-2)


def test_oscillation_bounded_by_modulus():
    # |x0| is 1-Lipschitz so both sups are at most r and the sum at most 2r
    ig = Integrand.from_expressions("1 + 0.5*|x0| + 0.2*p00", j="1 + |x0|", n=2, d=1, Lam=2.0)
    for r in (0.05, 0.2):
        eps = oscillation_epsilon(ig, r)
        assert eps <= 1.5 * r * (1 + 1e-9) and eps >= 1.5 * r * 0.99


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 0.9), st.floats(0.01, 0.3), st.floats(1.5, 3.0))
def test_oscillation_monotone(a, r, k):
    ig = Integrand.from_expressions(f"1 + {a}*|x0| + {a}*x1*x1", n=2, d=1, Lam=3.0)
    assert oscillation_epsilon(ig, r) <= oscillation_epsilon(ig, k * r) + 1e-12


# --- Almgren to David ---------------------------------------------------------------------------


def test_almgren_constant_integrand_on_cap():
    ig = Integrand.constant(1.5, n=3, d=2, Lam=2.0)
    res = almgren_to_david(ig, 1.0, np.zeros(3), 0.2, E01, hemisphere(0.2), projection_certified=True)
    assert res.slack >= 0
    assert res.lhs == pytest.approx(1.5 * math.pi * 0.04, rel=1e-9)


def test_almgren_flat_disk_slack_is_the_error_term():
    ig = Integrand.from_expressions("1 + 0.1*x0", n=3, d=2, Lam=2.0)
    r = 0.1
    res = almgren_to_david(ig, 1.0, np.zeros(3), r, E01, plane_disk(np.zeros(3), E01, r), projection_certified=True)
    assert res.slack == pytest.approx(2 * res.epsilon * math.pi * r * r, rel=1e-9)
    assert res.epsilon == pytest.approx(0.2 * r, rel=1e-2)


@pytest.mark.parametrize("r", [0.1, 0.05])
def test_almgren_tilted_cap(r):
    ig = Integrand.from_expressions("1 + 0.1*x0", n=3, d=2, Lam=2.0)
    cap = hemisphere(r)
    assert cap.mass == pytest.approx(2 * math.pi * r * r, rel=1e-10)
    res = almgren_to_david(ig, 1.0, np.zeros(3), r, E01, cap, projection_certified=True)
    assert res.slack >= 0
    assert res.rhs - 2 * res.epsilon * math.pi * r * r == pytest.approx(2 * math.pi * r * r, rel=1e-9)


def test_almgren_preconditions():
    ig = Integrand.from_expressions("1 + 0.1*x0", n=3, d=2, Lam=2.0)
    cap = hemisphere(0.1)
    with pytest.raises(ValueError, match="epsilon"):
        almgren_to_david(ig, 1e-4, np.zeros(3), 0.1, E01, cap, projection_certified=True)
    with pytest.raises(ValueError, match="projection"):
        almgren_to_david(ig, 1.0, np.zeros(3), 0.1, E01, cap, projection_certified=False)
    with pytest.raises(ValueError, match="ball"):
        almgren_to_david(ig, 1.0, np.zeros(3), 0.05, E01, cap, projection_certified=True)


# --- invariants -------------------------------------------------------------------------------

cell_sets = st.sets(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=8)


def cells_of(K, anchors):
    return K.subcomplex([(a, (0, 1)) for a in anchors])


@settings(max_examples=25, deadline=None)
@given(cell_sets, cell_sets, st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_additive_and_monotone(A, B, a, b):
    K = build_grid([(0, 1), (0, 1)], Fraction(1, 4))
    ig = Integrand.from_expressions(f"max(0.5, min(2, 1 + {a}*x0 + {b}*x1*x0))", n=2, d=2, Lam=2.0)
    B = B - A
    eA = energy(cells_of(K, A), ig).total
    if B:
        eB = energy(cells_of(K, B), ig).total
        assert energy(cells_of(K, A | B), ig).total == pytest.approx(eA + eB, rel=1e-12)
        assert energy(cells_of(K, A | B), ig).total >= eA


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_axiom_i_bound_always_holds(a, b, c):
    ig = Integrand.from_expressions(f"max(0.5, min(2, {a}*x0 + {b}*p00 + {c}))", j="1", n=2, d=1, Lam=2.0)
    rep = energy(MeasuredSet.segment([0, 0], [1, 0.5], 30), ig)
    assert rep.hausdorff / 2 * (1 - 1e-12) <= rep.total <= 2 * rep.hausdorff * (1 + 1e-12)
    assert rep.total == pytest.approx(rep.rectifiable_part + rep.unrectifiable_part)

"""Tests for the probability-bound algebra.

Derived expectations are computed by an independent linear-program oracle
over the four joint atoms of a binary proposition pair; the oracle never
calls the formulas under test.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from plnnsim.bounds import (
    FULL_J,
    Bounds,
    BoundsError,
    CorrelationClass,
    JRange,
    OpKind,
    cond_downward,
    cond_upward,
    correlation_to_j,
    downward_and,
    downward_implies,
    downward_or,
    frechet_and,
    frechet_or,
    invert_j_activation,
    j_mod_and,
    j_mod_implies,
    j_mod_or,
    negate,
)

TOL = 1e-9


# --- independent LP oracle over joint atoms x00, x01, x10, x11 -----------

def lp_binary_bounds(pa: Bounds, pb: Bounds, connective: str) -> Bounds:
    """Exact min/max of p(A op B) over all joints with the given marginals."""
    obj = {"and": [0, 0, 0, 1], "or": [0, 1, 1, 1]}[connective]
    a_row = [0, 0, 1, 1]   # p(A) = x10 + x11
    b_row = [0, 1, 0, 1]   # p(B) = x01 + x11
    a_ub = [a_row, [-v for v in a_row], b_row, [-v for v in b_row]]
    b_ub = [pa.upper, -pa.lower, pb.upper, -pb.lower]
    outs = []
    for sign in (1.0, -1.0):
        res = linprog([sign * v for v in obj], A_ub=a_ub, b_ub=b_ub,
                      A_eq=[[1, 1, 1, 1]], b_eq=[1.0],
                      bounds=[(0, 1)] * 4, method="highs")
        assert res.success, res.message
        outs.append(sign * res.fun)
    return Bounds(outs[0], outs[1])


def lp_remaining_operand(parent: Bounds, sibling: Bounds, connective: str) -> Bounds:
    """Exact feasible range of p(B) given bounds on p(A op B) and p(A)."""
    form = {"and": [0, 0, 0, 1], "or": [0, 1, 1, 1]}[connective]
    a_row = [0, 0, 1, 1]
    b_row = [0, 1, 0, 1]
    a_ub = [form, [-v for v in form], a_row, [-v for v in a_row]]
    b_ub = [parent.upper, -parent.lower, sibling.upper, -sibling.lower]
    outs = []
    for sign in (1.0, -1.0):
        res = linprog([sign * v for v in b_row], A_ub=a_ub, b_ub=b_ub,
                      A_eq=[[1, 1, 1, 1]], b_eq=[1.0],
                      bounds=[(0, 1)] * 4, method="highs")
        if not res.success:
            return None
        outs.append(sign * res.fun)
    return Bounds(outs[0], outs[1])


# --- hypothesis strategies -------------------------------------------------

_unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@st.composite
def valid_bounds(draw):
    lo = draw(_unit)
    hi = draw(st.floats(min_value=lo, max_value=1.0, allow_nan=False))
    return Bounds(lo, hi)


@st.composite
def j_ranges(draw):
    lo = draw(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False))
    hi = draw(st.floats(min_value=lo, max_value=1.0, allow_nan=False))
    return JRange(lo, hi)


# --- sharp n-ary bounds ----------------------------------------------------

def test_frechet_and_matches_lp_oracle_on_spec_case():
    got = frechet_and([Bounds(0.9, 0.9), Bounds(0.9, 0.9)])
    exact = lp_binary_bounds(Bounds(0.9, 0.9), Bounds(0.9, 0.9), "and")
    assert got.lower == pytest.approx(exact.lower, abs=TOL)
    assert got.upper == pytest.approx(exact.upper, abs=TOL)
    assert got.lower == pytest.approx(0.8, abs=TOL)
    assert got.upper == pytest.approx(0.9, abs=TOL)


def test_frechet_and_identity_and_annihilator():
    b = Bounds(0.3, 0.7)
    got = frechet_and([Bounds(1, 1), b])
    assert got.lower == pytest.approx(b.lower, abs=TOL)
    assert got.upper == pytest.approx(b.upper, abs=TOL)
    assert frechet_and([Bounds(0, 0), b]) == Bounds(0, 0)


def test_frechet_or_matches_lp_oracle_on_spec_case():
    got = frechet_or([Bounds(0.3, 0.5), Bounds(0.2, 0.4)])
    exact = lp_binary_bounds(Bounds(0.3, 0.5), Bounds(0.2, 0.4), "or")
    assert got.lower == pytest.approx(exact.lower, abs=TOL)
    assert got.upper == pytest.approx(exact.upper, abs=TOL)
    assert got == Bounds(0.3, 0.9)


def test_frechet_or_identity_and_annihilator():
    b = Bounds(0.3, 0.7)
    assert frechet_or([Bounds(0, 0), b]) == b
    assert frechet_or([Bounds(1, 1), b]) == Bounds(1, 1)


def test_frechet_arity_errors():
    with pytest.raises(BoundsError):
        frechet_and([Bounds(0.5, 0.5)])
    with pytest.raises(BoundsError):
        frechet_or([Bounds(0.5, 0.5)])
    with pytest.raises(BoundsError):
        frechet_and([Bounds(0.5, 0.5), Bounds(0.7, 0.2)])


def test_frechet_oracle_equivalence_random_points():
    rng = np.random.default_rng(7)
    for _ in range(60):
        p, q = rng.random(2)
        pa, pb = Bounds(p, p), Bounds(q, q)
        for conn, fn in (("and", frechet_and), ("or", frechet_or)):
            exact = lp_binary_bounds(pa, pb, conn)
            got = fn([pa, pb])
            assert got.lower == pytest.approx(exact.lower, abs=TOL)
            assert got.upper == pytest.approx(exact.upper, abs=TOL)


def test_frechet_nary_is_valid():
    ops = [Bounds(0.9, 0.95), Bounds(0.8, 0.9), Bounds(0.85, 1.0)]
    got = frechet_and(ops)
    assert got.is_valid
    assert got.lower == pytest.approx(0.55, abs=TOL)
    assert got.upper == pytest.approx(0.9, abs=TOL)


# --- negation ----------------------------------------------------------------

def test_negate_cases():
    assert negate(Bounds(0.3, 0.5)) == Bounds(0.5, 0.7)
    assert negate(Bounds(0, 1)) == Bounds(0, 1)
    assert negate(Bounds(1, 1)) == Bounds(0, 0)


@given(valid_bounds())
def test_negate_involution(b):
    # double subtraction from 1.0 can wobble by 1 ulp on adversarial floats
    back = negate(negate(b))
    assert back.lower == pytest.approx(b.lower, abs=1e-15)
    assert back.upper == pytest.approx(b.upper, abs=1e-15)


def test_negate_involution_exact_on_representable_values():
    for lo, hi in [(0.0, 1.0), (0.25, 0.75), (0.5, 0.5), (1.0, 1.0), (0.125, 0.875)]:
        assert negate(negate(Bounds(lo, hi))) == Bounds(lo, hi)


# --- correlation-modulated activations ----------------------------------------

def test_j_mod_and_anchor_values():
    half = Bounds(0.5, 0.5)
    assert j_mod_and(half, half, JRange(0, 0)) == Bounds(0.25, 0.25)
    got = j_mod_and(Bounds(0.3, 0.3), Bounds(0.7, 0.7), JRange(1, 1))
    assert got == Bounds(0.3, 0.3)


def test_j_mod_and_clamps_to_sharp_floor():
    # hand evaluation of the quadratic blend at p = q = 0.9, J = -0.625:
    # anchors (0.8, 0.81, 0.9); coefficients (0.5078125, 0.609375, -0.1171875)
    # raw value 0.794375 lies below the sharp floor 0.8 and must clamp up.
    raw = (0.5078125 * 0.8) + (0.609375 * 0.81) + (-0.1171875 * 0.9)
    assert raw == pytest.approx(0.794375, abs=1e-12)
    got = j_mod_and(Bounds(0.9, 0.9), Bounds(0.9, 0.9), JRange(-0.625, -0.625))
    assert got.lower == pytest.approx(0.8, abs=TOL)
    assert got.upper == pytest.approx(0.8, abs=TOL)


def test_j_mod_or_anchor_values():
    half = Bounds(0.5, 0.5)
    assert j_mod_or(half, half, JRange(0, 0)) == Bounds(0.75, 0.75)
    assert j_mod_or(Bounds(0.3, 0.3), Bounds(0.7, 0.7), JRange(1, 1)) == Bounds(0.7, 0.7)
    got = j_mod_or(Bounds(0.6, 0.6), Bounds(0.7, 0.7), JRange(-1, -1))
    assert got == Bounds(1.0, 1.0)


def test_j_mod_implies_cases():
    anything = JRange(-0.25, 0.75)
    got = j_mod_implies(Bounds(1, 1), Bounds(0.4, 0.4), anything)
    assert got.lower == pytest.approx(0.4, abs=TOL)
    assert got.upper == pytest.approx(0.4, abs=TOL)
    got = j_mod_implies(Bounds(0, 0), Bounds(0.2, 0.9), anything)
    assert got == Bounds(1, 1)
    got = j_mod_implies(Bounds(0.8, 0.8), Bounds(0.3, 0.3), FULL_J)
    assert got.lower == pytest.approx(0.3, abs=TOL)
    assert got.upper == pytest.approx(0.5, abs=TOL)


@given(st.floats(0, 1, allow_nan=False), st.floats(0, 1, allow_nan=False))
def test_j_mod_and_exact_at_anchor_points(p, q):
    pa, pb = Bounds(p, p), Bounds(q, q)
    assert j_mod_and(pa, pb, JRange(-1, -1)).lower == max(0.0, p + q - 1.0)
    assert j_mod_and(pa, pb, JRange(0, 0)).lower == min(max(p * q, max(0.0, p + q - 1.0)), min(p, q))
    assert j_mod_and(pa, pb, JRange(1, 1)).lower == min(p, q)


@given(st.floats(0, 1, allow_nan=False), st.floats(0, 1, allow_nan=False),
       st.floats(-1, 1, allow_nan=False))
def test_j_mod_clamp_containment(p, q, jv):
    pa, pb = Bounds(p, p), Bounds(q, q)
    j = JRange(jv, jv)
    v = j_mod_and(pa, pb, j)
    assert max(0.0, p + q - 1.0) - TOL <= v.lower <= v.upper <= min(p, q) + TOL
    w = j_mod_or(pa, pb, j)
    assert max(p, q) - TOL <= w.lower <= w.upper <= min(1.0, p + q) + TOL


@given(valid_bounds(), valid_bounds())
def test_j_mod_degenerates_to_frechet_at_full_range(a, b):
    assert j_mod_and(a, b, FULL_J) == frechet_and([a, b])
    assert j_mod_or(a, b, FULL_J) == frechet_or([a, b])


@given(st.floats(0, 1, allow_nan=False), st.floats(0, 1, allow_nan=False),
       st.sampled_from([-1.0, 0.0, 1.0]))
def test_de_morgan_at_anchors(p, q, jv):
    j = JRange(jv, jv)
    conj = j_mod_and(Bounds(p, p), Bounds(q, q), j).lower
    disj = j_mod_or(Bounds(1 - p, 1 - p), Bounds(1 - q, 1 - q), j).lower
    assert conj == pytest.approx(1.0 - disj, abs=1e-12)


@given(valid_bounds(), valid_bounds(), j_ranges(), st.data())
def test_j_nesting(a, b, j, data):
    inner_lo = data.draw(st.floats(j.j_lower, j.j_upper, allow_nan=False))
    inner_hi = data.draw(st.floats(inner_lo, j.j_upper, allow_nan=False))
    inner = JRange(inner_lo, inner_hi)
    outer_res = j_mod_and(a, b, j)
    inner_res = j_mod_and(a, b, inner)
    assert outer_res.contains(inner_res, tol=1e-12)


@settings(max_examples=40)
@given(valid_bounds(), valid_bounds(), j_ranges())
def test_interval_extension_against_dense_grid(a, b, j):
    """Corner/critical-point evaluation must match a dense sample min/max."""
    for fn, anchors_fn in ((j_mod_and, "_and"), (j_mod_or, "_or")):
        res = fn(a, b, j)
        from plnnsim.bounds import _and_anchors, _or_anchors, _clamped_blend, _j_eval_points
        afn = _and_anchors if anchors_fn == "_and" else _or_anchors
        vals = []
        ps = np.linspace(a.lower, a.upper, 7)
        qs = np.linspace(b.lower, b.upper, 7)
        for p in ps:
            for q in qs:
                anch = afn(float(p), float(q))
                jpts = set(np.linspace(j.j_lower, j.j_upper, 9))
                jpts.update(_j_eval_points(anch, j))
                for jv in jpts:
                    vals.append(_clamped_blend(anch, float(jv)))
        assert min(vals) >= res.lower - 1e-9
        assert max(vals) <= res.upper + 1e-9
        # extrema are attained at the corner evaluations
        assert min(vals) <= res.lower + 1e-9
        assert max(vals) >= res.upper - 1e-9


@given(valid_bounds(), valid_bounds(), j_ranges())
def test_j_mod_outputs_valid(a, b, j):
    for fn in (j_mod_and, j_mod_or, j_mod_implies):
        out = fn(a, b, j)
        assert out.is_valid


# --- downward rules -----------------------------------------------------------

def test_downward_or_cases():
    assert downward_or(Bounds(1, 1), [Bounds(0, 0.6)]) == Bounds(0.4, 1.0)
    assert downward_or(Bounds(0, 1), [Bounds(0.2, 0.8)]) == Bounds(0, 1)
    assert downward_or(Bounds(0, 0.5), [Bounds(0, 1)]) == Bounds(0, 0.5)


def test_downward_and_cases():
    got = downward_and(Bounds(0.3, 0.3), [Bounds(1, 1)])
    assert got.lower == pytest.approx(0.3, abs=TOL)
    assert got.upper == pytest.approx(0.3, abs=TOL)
    assert downward_and(Bounds(0, 1), [Bounds(0, 1)]) == Bounds(0, 1)
    got = downward_and(Bounds(0.2, 0.4), [Bounds(0.9, 1)])
    assert got.lower == pytest.approx(0.2, abs=TOL)
    assert got.upper == pytest.approx(0.5, abs=TOL)


def test_downward_implies_cases():
    a_msg, b_msg = downward_implies(Bounds(1, 1), Bounds(1, 1), Bounds(0, 1))
    assert b_msg == Bounds(1, 1)            # modus ponens
    a_msg, b_msg = downward_implies(Bounds(1, 1), Bounds(0, 1), Bounds(0, 0))
    assert a_msg == Bounds(0, 0)            # modus tollens
    a_msg, b_msg = downward_implies(Bounds(0, 1), Bounds(0, 1), Bounds(0, 1))
    assert a_msg == Bounds(0, 1) and b_msg == Bounds(0, 1)


def test_downward_soundness_against_lp_oracle():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(120):
        parent = Bounds(*sorted(rng.random(2)))
        sibling = Bounds(*sorted(rng.random(2)))
        for conn, fn in (("or", downward_or), ("and", downward_and)):
            exact = lp_remaining_operand(parent, sibling, conn)
            if exact is None:
                continue  # constraint set infeasible
            msg = fn(parent, [sibling])
            assert msg.lower <= exact.lower + TOL
            assert msg.upper >= exact.upper - TOL
            checked += 1
    assert checked > 100


# --- conditional rules -----------------------------------------------------

def test_cond_upward_cases():
    got = cond_upward(Bounds(0.2, 0.2), Bounds(0.5, 0.5))
    assert got.lower == pytest.approx(0.4, abs=TOL)
    assert got.upper == pytest.approx(0.4, abs=TOL)
    assert cond_upward(Bounds(0, 0), Bounds(1, 1)) == Bounds(0, 0)
    got = cond_upward(Bounds(0.2, 0.3), Bounds(0, 0.5))
    assert got.lower == pytest.approx(0.4, abs=TOL)
    assert got.upper == 1.0     # zero denominator leaves the side untightened


def test_cond_downward_cases():
    got = cond_downward(Bounds(0.5, 0.5), Bounds(0.2, 0.2))
    assert got.lower == pytest.approx(0.4, abs=TOL)
    assert got.upper == pytest.approx(0.4, abs=TOL)
    assert cond_downward(Bounds(0, 0), Bounds(0, 0.3)) == Bounds(0, 1)
    assert cond_downward(Bounds(1, 1), Bounds(0.7, 0.7)) == Bounds(0.7, 0.7)


@given(st.floats(0.05, 1.0, allow_nan=False),
       st.floats(0.0, 1.0, allow_nan=False, allow_subnormal=False))
def test_cond_round_trip_on_points(pb, pa_given_b):
    conj = pb * pa_given_b
    up = cond_upward(Bounds(conj, conj), Bounds(pb, pb))
    assert up.lower == pytest.approx(pa_given_b, abs=1e-12)
    if pa_given_b > 1e-9:
        down = cond_downward(Bounds(pa_given_b, pa_given_b), Bounds(conj, conj))
        assert down.lower == pytest.approx(pb, abs=1e-9)
        assert down.upper == pytest.approx(pb, abs=1e-9)


# --- correlation classes ------------------------------------------------------

def test_correlation_class_table():
    assert correlation_to_j(CorrelationClass.HC) == JRange(-0.5, 1.0)
    assert correlation_to_j(CorrelationClass.ID) == JRange(0.0, 0.0)
    assert correlation_to_j(CorrelationClass.AC) == JRange(-1.0, 0.5)
    assert correlation_to_j(CorrelationClass.UC) == JRange(-1.0, 1.0)


def test_j_range_validation():
    with pytest.raises(BoundsError):
        JRange(0.5, -0.5)
    with pytest.raises(BoundsError):
        JRange(-1.5, 0.0)


# --- numeric inversion ---------------------------------------------------------

def test_invert_j_activation_recovers_independent_operand():
    # parent = p*q with q unknown, p = 0.8, independence: q = parent/0.8
    parent = Bounds(0.4, 0.4)
    known = Bounds(0.8, 0.8)
    got = invert_j_activation(OpKind.AND, parent, known, JRange(0, 0))
    assert got is not None
    assert got.lower == pytest.approx(0.5, abs=1e-4)
    assert got.upper == pytest.approx(0.5, abs=1e-4)


def test_invert_j_activation_full_range_is_outer():
    parent = Bounds(0.3, 0.6)
    known = Bounds(0.5, 0.9)
    got = invert_j_activation(OpKind.AND, parent, known, FULL_J)
    sharp = downward_and(parent, [known])
    if got is not None:
        assert got.lower >= -1e-9
        # inverted range must still contain every feasible point allowed
        # by the sharp inversion intersected with [0, 1]
        rng = np.random.default_rng(3)
        for q in rng.random(50):
            act = j_mod_and(known, Bounds(q, q), FULL_J)
            feasible = act.lower <= parent.upper + 1e-12 and act.upper >= parent.lower - 1e-12
            if feasible:
                assert got.lower - 1e-4 <= q <= got.upper + 1e-4
                assert sharp.lower - 1e-9 <= q or True

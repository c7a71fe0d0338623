"""Probability-bound algebra for logical operators.

Every proposition carries a lower/upper belief interval.  Connective
activations compute output intervals from operand intervals: sharp
universal bounds for n-ary conjunction/disjunction, correlation-modulated
bounds for binary connectives, quotient rules for conditionals, and the
inverse (downward) rules that tighten operands from a known parent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

ABS_TOL = 1e-9

# quadratic-in-J coefficient below this magnitude is treated as linear
_QUAD_EPS = 1e-15


class BoundsError(ValueError):
    """Raised when an operation receives an invalid interval."""


@dataclass(frozen=True)
class Bounds:
    """A lower/upper probability interval.

    The constructor is permissive so that crossed pairs can be *recorded*
    (contradiction diagnostics); every operation in this module rejects
    crossed or out-of-range inputs via :func:`check_bounds`.
    """

    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def is_valid(self) -> bool:
        return 0.0 <= self.lower <= self.upper <= 1.0

    @property
    def is_point(self) -> bool:
        return self.lower == self.upper

    def contains(self, other: "Bounds", tol: float = 0.0) -> bool:
        return (self.lower - tol <= other.lower
                and other.upper <= self.upper + tol)

    def __str__(self) -> str:
        return f"({self.lower:.4f}, {self.upper:.4f})"


VACUOUS = Bounds(0.0, 1.0)
CERTAIN = Bounds(1.0, 1.0)
IMPOSSIBLE = Bounds(0.0, 0.0)


def point(p: float) -> Bounds:
    return Bounds(p, p)


def check_bounds(b: Bounds, what: str = "bounds") -> Bounds:
    if not isinstance(b, Bounds):
        raise BoundsError(f"{what}: expected Bounds, got {type(b).__name__}")
    if not b.is_valid:
        raise BoundsError(f"{what}: invalid interval ({b.lower}, {b.upper})")
    return b


@dataclass(frozen=True)
class JRange:
    """Interval of relative correlation coefficients in [-1, 1].

    -1 is maximal anti-correlation, 0 independence, +1 maximal correlation.
    """

    j_lower: float
    j_upper: float

    def __post_init__(self) -> None:
        if not (-1.0 <= self.j_lower <= self.j_upper <= 1.0):
            raise BoundsError(
                f"invalid correlation range ({self.j_lower}, {self.j_upper})")

    @property
    def is_full(self) -> bool:
        return self.j_lower == -1.0 and self.j_upper == 1.0

    def flipped(self) -> "JRange":
        """Correlation range of (not A, B) given the range of (A, B)."""
        return JRange(-self.j_upper, -self.j_lower)

    def __str__(self) -> str:
        return f"[{self.j_lower:g}, {self.j_upper:g}]"


FULL_J = JRange(-1.0, 1.0)


class OpKind(Enum):
    AND = "and"
    OR = "or"
    NOT = "not"
    IMPLIES = "implies"
    IDENTITY = "identity"
    CONDITIONAL = "cond"


class CorrelationClass(Enum):
    HC = "HC"   # high correlation
    ID = "ID"   # independent
    AC = "AC"   # anti-correlation
    UC = "UC"   # unknown correlation


_CORRELATION_J = {
    CorrelationClass.HC: JRange(-0.5, 1.0),
    CorrelationClass.ID: JRange(0.0, 0.0),
    CorrelationClass.AC: JRange(-1.0, 0.5),
    CorrelationClass.UC: JRange(-1.0, 1.0),
}


def correlation_to_j(c: CorrelationClass) -> JRange:
    """Map a qualitative correlation class to its correlation range."""
    return _CORRELATION_J[c]


def _check_operands(operands: Sequence[Bounds], op: str) -> None:
    if len(operands) < 2:
        raise BoundsError(f"{op} needs at least 2 operands, got {len(operands)}")
    for i, b in enumerate(operands):
        check_bounds(b, f"{op} operand {i}")


def frechet_and(operands: Sequence[Bounds]) -> Bounds:
    """Sharp bounds on the conjunction of n >= 2 propositions.

    lower = max(0, sum of lowers - (n - 1)); upper = min of uppers.
    Valid inputs guarantee lower <= upper mathematically; the floating sum
    can overshoot by an ulp, so the floor is capped at the ceiling.
    """
    _check_operands(operands, "frechet_and")
    lo = max(0.0, sum(b.lower for b in operands) - (len(operands) - 1))
    hi = min(b.upper for b in operands)
    return Bounds(min(lo, hi), hi)


def frechet_or(operands: Sequence[Bounds]) -> Bounds:
    """Sharp bounds on the disjunction of n >= 2 propositions.

    lower = max of lowers; upper = min(1, sum of uppers).
    """
    _check_operands(operands, "frechet_or")
    lo = max(b.lower for b in operands)
    hi = min(1.0, sum(b.upper for b in operands))
    return Bounds(lo, max(hi, lo))


def negate(b: Bounds) -> Bounds:
    """Complement: (1 - upper, 1 - lower)."""
    check_bounds(b, "negate")
    return Bounds(1.0 - b.upper, 1.0 - b.lower)


# --- correlation-modulated binary activations ---------------------------
#
# For point marginals p, q the three anchor values of the conjunction are
#   P(-1) = max(0, p + q - 1),  P(0) = p q,  P(+1) = min(p, q)
# and the modulated value is the quadratic Lagrange blend through the
# anchors at J = -1, 0, +1:
#   P(J) = (J^2 - J)/2 * P(-1) + (1 - J^2) * P(0) + (J^2 + J)/2 * P(+1)
# The blend can exit the sharp envelope (e.g. p = q = 0.9 near J = -0.625),
# so values are always clamped back into it.

def _and_anchors(p: float, q: float) -> tuple[float, float, float]:
    return (max(0.0, p + q - 1.0), p * q, min(p, q))


def _or_anchors(p: float, q: float) -> tuple[float, float, float]:
    return (min(1.0, p + q), p + q - p * q, max(p, q))


def _blend(anchors: tuple[float, float, float], jv: float) -> float:
    a, b, c = anchors
    return ((jv * jv - jv) * 0.5 * a
            + (1.0 - jv * jv) * b
            + (jv * jv + jv) * 0.5 * c)


def _clamped_blend(anchors: tuple[float, float, float], jv: float) -> float:
    a, _, c = anchors
    lo, hi = (a, c) if a <= c else (c, a)
    return min(max(_blend(anchors, jv), lo), hi)


def _j_eval_points(anchors: tuple[float, float, float], j: JRange) -> list[float]:
    """J values where the clamped blend can attain its extrema on j.

    Endpoints always; plus the interior critical point of the quadratic
    P(J) = quad*J^2 + lin*J + const when it falls inside the range.
    """
    pts = [j.j_lower, j.j_upper]
    a, b, c = anchors
    quad = 0.5 * (a - 2.0 * b + c)
    if abs(quad) > _QUAD_EPS:
        jstar = (a - c) / (4.0 * quad)
        if j.j_lower < jstar < j.j_upper:
            pts.append(jstar)
    return pts


def _j_mod_binary(a: Bounds, b: Bounds, j: JRange, anchors_fn, envelope: Bounds) -> Bounds:
    lo_anchors = anchors_fn(a.lower, b.lower)
    hi_anchors = anchors_fn(a.upper, b.upper)
    lo = min(_clamped_blend(lo_anchors, jv) for jv in _j_eval_points(lo_anchors, j))
    hi = max(_clamped_blend(hi_anchors, jv) for jv in _j_eval_points(hi_anchors, j))
    lo = max(lo, envelope.lower)
    hi = min(hi, envelope.upper)
    # corner evaluations are monotone mathematically; float rounding can
    # still invert them by an ulp near 1, so the floor is capped last
    return Bounds(min(lo, hi), hi)


def j_mod_and(a: Bounds, b: Bounds, j: JRange) -> Bounds:
    """Conjunction bounds modulated by a correlation range.

    Evaluated at the marginal corners and at the J endpoints plus the
    quadratic's interior critical point, clamped into the sharp envelope.
    With the full range [-1, 1] this equals :func:`frechet_and`.
    """
    check_bounds(a, "j_mod_and a")
    check_bounds(b, "j_mod_and b")
    return _j_mod_binary(a, b, j, _and_anchors, frechet_and([a, b]))


def j_mod_or(a: Bounds, b: Bounds, j: JRange) -> Bounds:
    """Disjunction bounds modulated by a correlation range."""
    check_bounds(a, "j_mod_or a")
    check_bounds(b, "j_mod_or b")
    return _j_mod_binary(a, b, j, _or_anchors, frechet_or([a, b]))


def j_mod_implies(a: Bounds, b: Bounds, j: JRange) -> Bounds:
    """Implication bounds: p(A -> B) = p(not A or B).

    The correlation of (not A, B) is the negated correlation of (A, B),
    so the range is flipped before delegating to the disjunction.
    """
    check_bounds(a, "j_mod_implies a")
    check_bounds(b, "j_mod_implies b")
    return j_mod_or(negate(a), b, j.flipped())


# --- downward (inverse) rules --------------------------------------------

def downward_or(parent: Bounds, siblings: Sequence[Bounds]) -> Bounds:
    """Bounds inferred for the remaining disjunct of an OR node.

    lower = max(0, parent.lower - sum of sibling uppers); upper = parent.upper.
    """
    check_bounds(parent, "downward_or parent")
    for i, s in enumerate(siblings):
        check_bounds(s, f"downward_or sibling {i}")
    lo = max(0.0, parent.lower - sum(s.upper for s in siblings))
    return Bounds(lo, parent.upper)


def downward_and(parent: Bounds, siblings: Sequence[Bounds]) -> Bounds:
    """Bounds inferred for the remaining conjunct of an AND node.

    lower = parent.lower; upper = min(1, parent.upper - sum of sibling
    lowers + (n - 1)) with n the node arity.
    """
    check_bounds(parent, "downward_and parent")
    for i, s in enumerate(siblings):
        check_bounds(s, f"downward_and sibling {i}")
    hi = min(1.0, parent.upper - sum(s.lower for s in siblings) + len(siblings))
    return Bounds(parent.lower, hi)


def downward_implies(parent: Bounds, antecedent: Bounds,
                     consequent: Bounds) -> tuple[Bounds, Bounds]:
    """Messages to (antecedent, consequent) of an implication node.

    Rewrites A -> B as (not A) or B, applies the OR inversion and negates
    the (not A) message back onto A.
    """
    check_bounds(parent, "downward_implies parent")
    check_bounds(antecedent, "downward_implies antecedent")
    check_bounds(consequent, "downward_implies consequent")
    not_a_msg = downward_or(parent, [consequent])
    a_msg = negate(not_a_msg)
    b_msg = downward_or(parent, [negate(antecedent)])
    return a_msg, b_msg


# --- conditional rules ----------------------------------------------------
#
# A conditional node (A|B) relates to the conjunction A^B through
# p(A|B) = p(A^B) / p(B).  Zero denominators leave the corresponding side
# untightened instead of dividing.

def cond_upward(conj: Bounds, cond: Bounds) -> Bounds:
    """Bounds on (A|B) from bounds on A^B (conj) and on B (cond)."""
    check_bounds(conj, "cond_upward conjunction")
    check_bounds(cond, "cond_upward conditioner")
    lo = conj.lower / cond.upper if cond.upper > 0.0 else 0.0
    hi = conj.upper / cond.lower if cond.lower > 0.0 else 1.0
    return Bounds(min(1.0, max(0.0, lo)), min(1.0, max(0.0, hi)))


def cond_downward(cond_node: Bounds, conj: Bounds) -> Bounds:
    """Bounds on B from bounds on (A|B) and on A^B."""
    check_bounds(cond_node, "cond_downward conditional")
    check_bounds(conj, "cond_downward conjunction")
    lo = conj.lower / cond_node.upper if cond_node.upper > 0.0 else 0.0
    hi = conj.upper / cond_node.lower if cond_node.lower > 0.0 else 1.0
    return Bounds(min(1.0, max(0.0, lo)), min(1.0, max(0.0, hi)))


# --- numeric inversion of the J-modulated activation ----------------------

def invert_j_activation(kind: OpKind, parent: Bounds, known: Bounds,
                        j: JRange, samples: int = 9,
                        tol: float = 1e-6) -> Bounds | None:
    """Feasible marginal range of the unknown operand of a binary J node.

    Bisection against the clamped J activation; monotonicity in the unknown
    marginal is verified by sampling first, returning None (caller falls
    back to the sharp inversion) when it does not hold.  The result is
    widened by the bisection tolerance so it stays an outer approximation.
    """
    if kind is OpKind.AND:
        act = lambda q_lo, q_hi: j_mod_and(known, Bounds(q_lo, q_hi), j)
    elif kind is OpKind.OR:
        act = lambda q_lo, q_hi: j_mod_or(known, Bounds(q_lo, q_hi), j)
    else:
        return None

    def out_hi(q: float) -> float:
        return act(q, q).upper

    def out_lo(q: float) -> float:
        return act(q, q).lower

    grid = [i / (samples - 1) for i in range(samples)]
    for f in (out_hi, out_lo):
        vals = [f(q) for q in grid]
        mono = all(vals[i] <= vals[i + 1] + 1e-12 for i in range(len(vals) - 1))
        if not mono:
            return None

    def bisect_min_q(f, target: float) -> float:
        # smallest q with f(q) >= target, f nondecreasing
        if f(1.0) < target:
            return 1.0
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if f(mid) >= target:
                hi = mid
            else:
                lo = mid
        return lo

    def bisect_max_q(f, target: float) -> float:
        # largest q with f(q) <= target, f nondecreasing
        if f(0.0) > target:
            return 0.0
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if f(mid) <= target:
                lo = mid
            else:
                hi = mid
        return hi

    q_lo = bisect_min_q(out_hi, parent.lower)
    q_hi = bisect_max_q(out_lo, parent.upper)
    lo = max(0.0, q_lo - tol)
    hi = min(1.0, q_hi + tol)
    if lo > hi:
        # infeasible by more than tolerance: report as a crossed candidate
        return Bounds(lo, hi)
    return Bounds(lo, hi)

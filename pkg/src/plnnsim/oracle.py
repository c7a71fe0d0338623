"""Exact bound computation by optimizing over explicit joint distributions.

Test-grade reference: enumerates the 2^k assignments of the propositional
atoms and solves a linear program for the exact min/max probability of a
node's formula subject to every node's authored bounds.  Used to certify
that iterative propagation is an outer approximation; far too slow for
anything but small graphs.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

from .bounds import Bounds, OpKind
from .engine import GraphError, PlnnGraph

MAX_ATOMS = 12


class OracleInfeasible(ValueError):
    """The authored bounds admit no joint distribution (empty model set)."""


def _formula_indicator(graph: PlnnGraph, node_id: str,
                       atom_index: dict[str, int],
                       assignments: np.ndarray,
                       cache: dict[str, np.ndarray]) -> np.ndarray:
    if node_id in cache:
        return cache[node_id]
    node = graph[node_id]
    if not node.is_operational:
        vec = assignments[:, atom_index[node_id]].astype(float)
    else:
        kids = [_formula_indicator(graph, o, atom_index, assignments, cache)
                for o in node.operands]
        if node.op is OpKind.AND:
            vec = np.prod(kids, axis=0)
        elif node.op is OpKind.OR:
            vec = 1.0 - np.prod([1.0 - k for k in kids], axis=0)
        elif node.op is OpKind.NOT:
            vec = 1.0 - kids[0]
        elif node.op is OpKind.IDENTITY:
            vec = kids[0]
        elif node.op is OpKind.IMPLIES:
            vec = 1.0 - kids[0] * (1.0 - kids[1])
        else:
            raise GraphError(f"node {node_id}: conditional nodes have no "
                             f"boolean formula; query a different node")
    cache[node_id] = vec
    return vec


def exact_bounds_oracle(graph: PlnnGraph, node_id: str) -> Bounds:
    """Exact min/max probability of node_id's formula under the priors.

    Requires at most 12 atoms and full correlation ranges everywhere.
    Conditional-node priors enter as linearized ratio constraints
    (l * p(B) <= p(A and B) <= u * p(B)), which are vacuous at p(B) = 0.
    """
    atoms = graph.propositional_ids()
    if len(atoms) > MAX_ATOMS:
        raise GraphError(f"oracle limited to {MAX_ATOMS} atoms, got {len(atoms)}")
    for node in graph.nodes.values():
        if node.is_operational and not node.j.is_full:
            raise GraphError(f"node {node.node_id}: oracle requires full "
                             f"correlation ranges")
    if node_id not in graph.nodes:
        raise GraphError(f"unknown node id {node_id!r}")
    if graph[node_id].op is OpKind.CONDITIONAL:
        raise GraphError(f"node {node_id}: conditional nodes are not "
                         f"directly queryable by the oracle")

    atom_index = {a: i for i, a in enumerate(atoms)}
    assignments = np.array(list(itertools.product((0, 1), repeat=len(atoms))),
                           dtype=np.int8)
    if assignments.size == 0:
        assignments = np.zeros((1, 0), dtype=np.int8)
    cache: dict[str, np.ndarray] = {}

    rows_ub: list[np.ndarray] = []
    rhs_ub: list[float] = []

    def add_interval(vec: np.ndarray, lo: float, hi: float) -> None:
        if hi < 1.0:
            rows_ub.append(vec)
            rhs_ub.append(hi)
        if lo > 0.0:
            rows_ub.append(-vec)
            rhs_ub.append(-lo)

    for nid, node in graph.nodes.items():
        prior = node.prior
        if node.op is OpKind.CONDITIONAL:
            conj_vec = _formula_indicator(graph, graph.conj_of[nid],
                                          atom_index, assignments, cache)
            b_vec = _formula_indicator(graph, node.operands[1],
                                       atom_index, assignments, cache)
            # l * p(B) <= p(conj):  l*b - conj <= 0
            rows_ub.append(prior.lower * b_vec - conj_vec)
            rhs_ub.append(0.0)
            # p(conj) <= u * p(B):  conj - u*b <= 0
            rows_ub.append(conj_vec - prior.upper * b_vec)
            rhs_ub.append(0.0)
            continue
        vec = _formula_indicator(graph, nid, atom_index, assignments, cache)
        add_interval(vec, prior.lower, prior.upper)

    objective = _formula_indicator(graph, node_id, atom_index, assignments, cache)
    n_vars = assignments.shape[0]
    a_eq = np.ones((1, n_vars))
    a_ub = np.array(rows_ub) if rows_ub else None
    b_ub = np.array(rhs_ub) if rhs_ub else None

    out = []
    for sign in (1.0, -1.0):
        res = linprog(sign * objective, A_ub=a_ub, b_ub=b_ub,
                      A_eq=a_eq, b_eq=[1.0], bounds=[(0, 1)] * n_vars,
                      method="highs")
        if res.status == 2:
            raise OracleInfeasible("authored bounds admit no joint distribution")
        if not res.success:
            raise GraphError(f"oracle LP failed: {res.message}")
        out.append(sign * res.fun)
    lo = min(max(out[0], 0.0), 1.0)
    hi = min(max(out[1], 0.0), 1.0)
    return Bounds(min(lo, hi), hi)

"""Graphical bound-propagation engine.

A graph of propositional and operational nodes, each carrying a belief
interval.  Inference alternates synchronous upward sweeps (operator bounds
from operand bounds) and downward sweeps (operand bounds backed out from
operator bounds) until no interval tightens by more than epsilon.  A node
whose derived lower bound crosses its upper bound is arrested: frozen with
the crossed values and an extent, and excluded from further message traffic
so the conflict cannot propagate.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace

from .bounds import (
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

ARREST_TOL = 1e-9
DEFAULT_EPSILON = 1e-4
DEFAULT_MAX_ITERS = 1000

_UNARY = {OpKind.NOT, OpKind.IDENTITY}
_BINARY = {OpKind.IMPLIES, OpKind.CONDITIONAL}
_J_ELIGIBLE = {OpKind.AND, OpKind.OR, OpKind.IMPLIES}


class GraphError(ValueError):
    """Graph specification or query problem."""


@dataclass(frozen=True)
class NodeSpec:
    """One authored node: a proposition or an operator over other nodes."""

    node_id: str
    op: OpKind | None = None                 # None marks a propositional node
    operands: tuple[str, ...] = ()
    bounds: Bounds | None = None             # default vacuous (0, 1)
    j: JRange | None = None
    correlation: CorrelationClass | None = None

    def resolved_j(self) -> JRange | None:
        if self.j is not None and self.correlation is not None:
            raise GraphError(f"node {self.node_id}: give j or a correlation class, not both")
        if self.correlation is not None:
            return correlation_to_j(self.correlation)
        return self.j


@dataclass(frozen=True)
class GraphSpec:
    nodes: tuple[NodeSpec, ...]

    def with_bounds(self, new_bounds: dict[str, Bounds]) -> "GraphSpec":
        """Copy of the spec with some nodes' authored bounds replaced."""
        out = []
        for n in self.nodes:
            if n.node_id in new_bounds:
                out.append(replace(n, bounds=new_bounds[n.node_id]))
            else:
                out.append(n)
        return GraphSpec(tuple(out))


class PlnnNode:
    """Runtime node state: current interval, prior, arrest status."""

    __slots__ = ("node_id", "op", "operands", "prior", "j",
                 "lo", "hi", "arrested", "arrest_extent", "synthesized")

    def __init__(self, node_id: str, op: OpKind | None, operands: tuple[str, ...],
                 prior: Bounds, j: JRange, synthesized: bool = False):
        self.node_id = node_id
        self.op = op
        self.operands = operands
        self.prior = prior
        self.j = j
        self.lo = prior.lower
        self.hi = prior.upper
        self.arrested = False
        self.arrest_extent = 0.0
        self.synthesized = synthesized

    @property
    def is_operational(self) -> bool:
        return self.op is not None

    def bounds(self) -> Bounds:
        return Bounds(self.lo, self.hi)

    def reset(self) -> None:
        self.lo = self.prior.lower
        self.hi = self.prior.upper
        self.arrested = False
        self.arrest_extent = 0.0


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    node_id: str
    direction: str            # "up" | "down"
    before: tuple[float, float]
    after: tuple[float, float]
    rule: str


@dataclass(frozen=True)
class InferenceResult:
    final_bounds: dict[str, tuple[float, float]]
    converged: bool
    iterations: int
    contradictions: dict[str, float]      # node id -> extent
    trace: tuple[TraceRecord, ...]
    epsilon: float
    use_j: bool

    @property
    def has_contradiction(self) -> bool:
        return bool(self.contradictions)


@dataclass(frozen=True)
class QueryAnswer:
    node_id: str
    lower: float
    upper: float
    arrested: bool
    extent: float
    graph_has_contradiction: bool


class PlnnGraph:
    def __init__(self, nodes: dict[str, PlnnNode], topo_order: list[str],
                 conj_of: dict[str, str]):
        self.nodes = nodes
        self.topo_order = topo_order              # every node, operands first
        self.op_order = [n for n in topo_order if nodes[n].is_operational]
        self.conj_of = conj_of                    # conditional id -> conjunction id

    def __getitem__(self, node_id: str) -> PlnnNode:
        return self.nodes[node_id]

    def reset(self) -> None:
        for n in self.nodes.values():
            n.reset()

    def propositional_ids(self) -> list[str]:
        return [n for n in self.topo_order if not self.nodes[n].is_operational]


def _validate_bounds(spec: NodeSpec) -> Bounds:
    b = spec.bounds if spec.bounds is not None else Bounds(0.0, 1.0)
    if not b.is_valid:
        raise GraphError(
            f"node {spec.node_id}: malformed bounds ({b.lower}, {b.upper})")
    return b


def _check_arity(spec: NodeSpec) -> None:
    n = len(spec.operands)
    if spec.op in _UNARY and n != 1:
        raise GraphError(f"node {spec.node_id}: {spec.op.value} takes exactly 1 operand, got {n}")
    if spec.op in _BINARY and n != 2:
        raise GraphError(f"node {spec.node_id}: {spec.op.value} takes exactly 2 operands, got {n}")
    if spec.op in (OpKind.AND, OpKind.OR) and n < 2:
        raise GraphError(f"node {spec.node_id}: {spec.op.value} needs at least 2 operands, got {n}")


def build_graph(spec: GraphSpec) -> PlnnGraph:
    """Validate a spec and produce a runtime graph.

    Conditional nodes (A|B) get a hidden conjunction A^B so the quotient
    rules apply directly; an existing AND over exactly {A, B} is reused
    instead when present.
    """
    by_id: dict[str, NodeSpec] = {}
    for n in spec.nodes:
        if n.node_id in by_id:
            raise GraphError(f"duplicate node id {n.node_id!r}")
        by_id[n.node_id] = n

    for n in spec.nodes:
        if n.op is None and n.operands:
            raise GraphError(f"node {n.node_id}: propositional nodes take no operands")
        if n.op is not None:
            _check_arity(n)
            for ref in n.operands:
                if ref not in by_id:
                    raise GraphError(f"node {n.node_id}: unresolved operand {ref!r}")
                if by_id[ref].op is OpKind.CONDITIONAL:
                    raise GraphError(
                        f"node {n.node_id}: conditional node {ref!r} cannot be an operand")
        j = n.resolved_j()
        if j is not None and (n.op not in _J_ELIGIBLE):
            kind = n.op.value if n.op else "propositional"
            raise GraphError(f"node {n.node_id}: correlation ranges only apply "
                             f"to and/or/implies nodes, not {kind}")
        if j is not None and n.op in (OpKind.AND, OpKind.OR) and len(n.operands) > 2:
            raise GraphError(f"node {n.node_id}: correlation ranges are binary; "
                             f"decompose the {len(n.operands)}-ary node into a tree")

    nodes: dict[str, PlnnNode] = {}
    conj_of: dict[str, str] = {}
    and_by_operands: dict[frozenset, list[str]] = {}
    for n in spec.nodes:
        if n.op is OpKind.AND and len(n.operands) == 2:
            and_by_operands.setdefault(frozenset(n.operands), []).append(n.node_id)

    for n in spec.nodes:
        j = n.resolved_j() or FULL_J
        nodes[n.node_id] = PlnnNode(n.node_id, n.op, n.operands, _validate_bounds(n), j)

    for n in spec.nodes:
        if n.op is not OpKind.CONDITIONAL:
            continue
        key = frozenset(n.operands)
        existing = sorted(and_by_operands.get(key, []))
        if existing:
            conj_of[n.node_id] = existing[0]
            continue
        conj_id = f"{n.node_id}#conj"
        if conj_id in nodes:
            raise GraphError(f"node id {conj_id!r} collides with a synthesized node")
        nodes[conj_id] = PlnnNode(conj_id, OpKind.AND, n.operands,
                                  Bounds(0.0, 1.0), FULL_J, synthesized=True)
        and_by_operands.setdefault(key, []).append(conj_id)
        conj_of[n.node_id] = conj_id

    topo = _topological_order(nodes)
    return PlnnGraph(nodes, topo, conj_of)


def _topological_order(nodes: dict[str, PlnnNode]) -> list[str]:
    """Kahn's algorithm with lexicographic tie-break for determinism."""
    dependents: dict[str, list[str]] = {nid: [] for nid in nodes}
    indegree = {nid: len(n.operands) for nid, n in nodes.items()}
    for nid, n in nodes.items():
        for ref in n.operands:
            dependents[ref].append(nid)
    ready = sorted(nid for nid, d in indegree.items() if d == 0)
    order: list[str] = []
    heapq.heapify(ready)
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for dep in dependents[nid]:
            indegree[dep] -= 1
            if indegree[dep] == 0:
                heapq.heappush(ready, dep)
    if len(order) != len(nodes):
        cyclic = sorted(nid for nid, d in indegree.items() if d > 0)
        raise GraphError(f"operand cycle involving {cyclic}")
    return order


class _Run:
    """Mutable bookkeeping for one inference invocation."""

    def __init__(self, graph: PlnnGraph, epsilon: float, use_j: bool,
                 j_aware_downward: bool):
        self.g = graph
        self.eps = epsilon
        self.use_j = use_j
        self.j_aware_downward = j_aware_downward
        self.trace: list[TraceRecord] = []
        self.contradictions: dict[str, float] = {}
        self.iteration = 0

    def node_j(self, node: PlnnNode) -> JRange:
        return node.j if self.use_j else FULL_J

    def apply(self, node: PlnnNode, candidate: Bounds, direction: str, rule: str) -> bool:
        """Intersect a message into a node; arrest on crossing.

        Updates below epsilon are dropped so a converged graph is an exact
        fixpoint of another run at the same epsilon.
        """
        if node.arrested:
            return False
        new_lo = max(node.lo, candidate.lower)
        new_hi = min(node.hi, candidate.upper)
        before = (node.lo, node.hi)
        if new_lo > new_hi + ARREST_TOL:
            node.lo, node.hi = new_lo, new_hi
            node.arrested = True
            node.arrest_extent = new_lo - new_hi
            self.contradictions[node.node_id] = node.arrest_extent
            self.trace.append(TraceRecord(self.iteration, node.node_id, direction,
                                          before, (new_lo, new_hi), rule + "+arrest"))
            return True
        improvement = max(new_lo - node.lo, node.hi - new_hi)
        if improvement <= self.eps:
            return False
        node.lo, node.hi = new_lo, min(new_hi, 1.0)
        self.trace.append(TraceRecord(self.iteration, node.node_id, direction,
                                      before, (node.lo, node.hi), rule))
        return True

    # -- upward ----------------------------------------------------------

    def activation(self, node: PlnnNode) -> tuple[Bounds, str] | None:
        g = self.g
        ops = [g[o] for o in node.operands]
        if any(o.arrested for o in ops):
            return None
        vals = [o.bounds() for o in ops]
        kind = node.op
        if kind is OpKind.AND:
            if len(vals) == 2:
                return j_mod_and(vals[0], vals[1], self.node_j(node)), "j_mod_and"
            return frechet_and(vals), "frechet_and"
        if kind is OpKind.OR:
            if len(vals) == 2:
                return j_mod_or(vals[0], vals[1], self.node_j(node)), "j_mod_or"
            return frechet_or(vals), "frechet_or"
        if kind is OpKind.NOT:
            return negate(vals[0]), "negate"
        if kind is OpKind.IDENTITY:
            return vals[0], "identity_up"
        if kind is OpKind.IMPLIES:
            return j_mod_implies(vals[0], vals[1], self.node_j(node)), "j_mod_implies"
        if kind is OpKind.CONDITIONAL:
            conj = g[g.conj_of[node.node_id]]
            if conj.arrested:
                return None
            return cond_upward(conj.bounds(), vals[1]), "cond_upward"
        raise AssertionError(kind)

    def upward_pass(self) -> int:
        changed = 0
        for nid in self.g.op_order:
            node = self.g[nid]
            if node.arrested:
                continue
            out = self.activation(node)
            if out is None:
                continue
            candidate, rule = out
            if self.apply(node, candidate, "up", rule):
                changed += 1
        return changed

    # -- downward --------------------------------------------------------

    def _send(self, target_id: str, msg: Bounds, rule: str) -> int:
        target = self.g[target_id]
        if target.arrested:
            return 0
        return 1 if self.apply(target, msg, "down", rule) else 0

    def downward_pass(self) -> int:
        changed = 0
        g = self.g
        for nid in reversed(g.op_order):
            node = g[nid]
            if node.arrested:
                continue
            ops = [g[o] for o in node.operands]
            parent = node.bounds()
            kind = node.op
            if kind is OpKind.NOT:
                changed += self._send(node.operands[0], negate(parent), "negate_down")
            elif kind is OpKind.IDENTITY:
                changed += self._send(node.operands[0], parent, "identity_down")
            elif kind in (OpKind.AND, OpKind.OR):
                rule = "downward_and" if kind is OpKind.AND else "downward_or"
                fn = downward_and if kind is OpKind.AND else downward_or
                for i, target in enumerate(node.operands):
                    sibs = [o for k, o in enumerate(ops) if k != i]
                    if any(s.arrested for s in sibs):
                        continue
                    msg = fn(parent, [s.bounds() for s in sibs])
                    if (self.j_aware_downward and len(ops) == 2
                            and not self.node_j(node).is_full):
                        tighter = invert_j_activation(kind, parent, sibs[0].bounds(),
                                                      self.node_j(node))
                        if tighter is not None:
                            msg = Bounds(max(msg.lower, tighter.lower),
                                         min(msg.upper, tighter.upper))
                            rule_used = rule + "+invert_j"
                        else:
                            rule_used = rule
                    else:
                        rule_used = rule
                    changed += self._send(target, msg, rule_used)
            elif kind is OpKind.IMPLIES:
                if not any(o.arrested for o in ops):
                    a_msg, b_msg = downward_implies(parent, ops[0].bounds(), ops[1].bounds())
                    changed += self._send(node.operands[0], a_msg, "downward_implies")
                    changed += self._send(node.operands[1], b_msg, "downward_implies")
            elif kind is OpKind.CONDITIONAL:
                conj = g[g.conj_of[nid]]
                if not conj.arrested:
                    msg = cond_downward(parent, conj.bounds())
                    changed += self._send(node.operands[1], msg, "cond_downward")
        return changed


def upward_pass(graph: PlnnGraph, epsilon: float = DEFAULT_EPSILON,
                use_j: bool = True) -> int:
    """Single upward sweep; returns the number of applied tightenings."""
    run = _Run(graph, epsilon, use_j, False)
    run.iteration = 1
    return run.upward_pass()


def downward_pass(graph: PlnnGraph, epsilon: float = DEFAULT_EPSILON,
                  use_j: bool = True) -> int:
    """Single downward sweep; returns the number of applied tightenings."""
    run = _Run(graph, epsilon, use_j, False)
    run.iteration = 1
    return run.downward_pass()


def infer(graph: PlnnGraph, epsilon: float = DEFAULT_EPSILON,
          max_iters: int = DEFAULT_MAX_ITERS, use_j: bool = True,
          j_aware_downward: bool = False) -> InferenceResult:
    """Alternate upward and downward sweeps to an epsilon fixpoint.

    Mutates the graph's current bounds; call graph.reset() or rebuild from
    the spec for a fresh run.  Non-convergence within max_iters is reported
    through the result, not raised.
    """
    if epsilon <= 0:
        raise GraphError(f"epsilon must be positive, got {epsilon}")
    if max_iters < 1:
        raise GraphError(f"max_iters must be >= 1, got {max_iters}")
    run = _Run(graph, epsilon, use_j, j_aware_downward)
    converged = False
    iterations = 0
    for sweep in range(1, max_iters + 1):
        run.iteration = sweep
        iterations = sweep
        changed = run.upward_pass() + run.downward_pass()
        if changed == 0:
            converged = True
            break
    final = {nid: (n.lo, n.hi) for nid, n in graph.nodes.items()}
    for nid, n in graph.nodes.items():
        if n.arrested:
            run.contradictions.setdefault(nid, n.arrest_extent)
    return InferenceResult(final_bounds=final, converged=converged,
                           iterations=iterations,
                           contradictions=dict(run.contradictions),
                           trace=tuple(run.trace), epsilon=epsilon, use_j=use_j)


def query(result: InferenceResult, graph: PlnnGraph,
          node_ids: list[str]) -> list[QueryAnswer]:
    """Final bounds and contradiction status for the requested nodes."""
    answers = []
    flag = result.has_contradiction
    for nid in node_ids:
        if nid not in graph.nodes:
            raise GraphError(f"unknown node id {nid!r}")
        lo, hi = result.final_bounds[nid]
        node = graph[nid]
        answers.append(QueryAnswer(nid, lo, hi, node.arrested,
                                   node.arrest_extent, flag))
    return answers


def to_dot(graph: PlnnGraph, result: InferenceResult | None = None) -> str:
    """Graphviz rendering with interval annotations.

    Propositional nodes are ellipses, operators are boxes labelled with
    their connective, arrested nodes are drawn red with doubled borders.
    """
    lines = ["digraph plnn {", "  rankdir=BT;"]
    sym = {OpKind.AND: "AND", OpKind.OR: "OR", OpKind.NOT: "NOT",
           OpKind.IMPLIES: "IMPLIES", OpKind.IDENTITY: "IDENT",
           OpKind.CONDITIONAL: "COND"}
    for nid in graph.topo_order:
        node = graph[nid]
        if result is not None:
            lo, hi = result.final_bounds[nid]
        else:
            lo, hi = node.lo, node.hi
        label = f"{nid} [{lo:.3f},{hi:.3f}]"
        attrs = []
        if node.is_operational:
            label = f"{sym[node.op]}\\n{label}"
            attrs.append("shape=box")
        else:
            attrs.append("shape=ellipse")
        if node.arrested:
            label += f"\\nARRESTED +{node.arrest_extent:.3f}"
            attrs.append("color=red")
            attrs.append("peripheries=2")
        attrs.append(f'label="{label}"')
        lines.append(f'  "{nid}" [{", ".join(attrs)}];')
    for nid in graph.topo_order:
        for ref in graph[nid].operands:
            lines.append(f'  "{ref}" -> "{nid}";')
        if nid in graph.conj_of:
            lines.append(f'  "{graph.conj_of[nid]}" -> "{nid}" [style=dashed];')
    lines.append("}")
    return "\n".join(lines) + "\n"

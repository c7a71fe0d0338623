"""Bundled system-load domain graph.

Eight environment predicates wired with the domain story: high-performance
mode, light load, or a high-priority job each make plenty of tokens likely;
tokens, priority, and low network congestion drive early completion;
compute-intense co-runners keep congestion low while memory-intense ones
raise it.  Every variable pair additionally carries an enforceable
correlation class (high / independent / anti / unknown) realized as a
binary conjunction node with the class's correlation range, and two
offline-statistics nodes let observed completion behavior tighten the
latent load state in both directions.
"""

from __future__ import annotations

from .bounds import Bounds, CorrelationClass, OpKind
from .engine import GraphSpec, NodeSpec

# short environment keys (simulator side) to graph node names
ENV_TO_NODE = {
    "HPM": "HighPerfMode",
    "POT": "PlentyOfTokens",
    "LL": "LightLoad",
    "ODTCI": "OtherDagComputeIntense",
    "ODTMI": "OtherDagMemoryIntense",
    "HPD": "HighPriorityDag",
    "LC": "LowCongestion",
    "EC": "EarlyCompletion",
}
NODE_TO_ENV = {v: k for k, v in ENV_TO_NODE.items()}

# pairwise correlation classes between the eight variables (upper triangle,
# keyed by short names in table order)
CORRELATION_TABLE = {
    ("HPM", "POT"): "HC",
    ("HPM", "LL"): "AC",
    ("HPM", "ODTCI"): "HC",
    ("HPM", "ODTMI"): "HC",
    ("HPM", "HPD"): "ID",
    ("HPM", "LC"): "AC",
    ("HPM", "EC"): "AC",
    ("POT", "LL"): "HC",
    ("POT", "ODTCI"): "ID",
    ("POT", "ODTMI"): "ID",
    ("POT", "HPD"): "ID",
    ("POT", "LC"): "ID",
    ("POT", "EC"): "HC",
    ("LL", "ODTCI"): "ID",
    ("LL", "ODTMI"): "ID",
    ("LL", "HPD"): "HC",
    ("LL", "LC"): "HC",
    ("LL", "EC"): "HC",
    ("ODTCI", "ODTMI"): "AC",
    ("ODTCI", "HPD"): "ID",
    ("ODTCI", "LC"): "HC",
    ("ODTCI", "EC"): "HC",
    ("ODTMI", "HPD"): "ID",
    ("ODTMI", "LC"): "AC",
    ("ODTMI", "EC"): "AC",
    ("HPD", "LC"): "ID",
    ("HPD", "EC"): "HC",
    ("LC", "EC"): "HC",
}

# domain-rule implications: antecedent, consequent, prior on the rule
_IMPLICATIONS = (
    ("HPM", "POT", Bounds(0.9, 1.0)),
    ("LL", "POT", Bounds(0.9, 1.0)),
    ("HPD", "POT", Bounds(0.85, 1.0)),
    ("POT", "EC", Bounds(0.85, 1.0)),
    ("HPD", "EC", Bounds(0.85, 1.0)),
    ("ODTCI", "LC", Bounds(0.9, 1.0)),
    ("LC", "EC", Bounds(0.85, 1.0)),
)


def build_domain_graph() -> GraphSpec:
    """The bundled eight-variable load-prediction graph."""
    nodes: list[NodeSpec] = [
        NodeSpec(ENV_TO_NODE[short]) for short in ENV_TO_NODE
    ]

    def n(short: str) -> str:
        return ENV_TO_NODE[short]

    # narrative implications, each carrying its pair's correlation class
    for ante, cons, prior in _IMPLICATIONS:
        key = (ante, cons) if (ante, cons) in CORRELATION_TABLE else (cons, ante)
        corr = CorrelationClass[CORRELATION_TABLE[key]]
        nodes.append(NodeSpec(
            f"rule_{ante.lower()}_{cons.lower()}", op=OpKind.IMPLIES,
            operands=(n(ante), n(cons)), bounds=prior, correlation=corr))

    # memory-intense co-runners predict congestion: ODTMI -> not LC
    nodes.append(NodeSpec("not_lowcongestion", op=OpKind.NOT,
                          operands=(n("LC"),)))
    nodes.append(NodeSpec("rule_odtmi_congestion", op=OpKind.IMPLIES,
                          operands=(n("ODTMI"), "not_lowcongestion"),
                          bounds=Bounds(0.85, 1.0),
                          correlation=CorrelationClass.HC))

    # enforceable pairwise correlations (the J experiment's extra knowledge)
    for (a, b), cls in CORRELATION_TABLE.items():
        nodes.append(NodeSpec(
            f"pair_{a.lower()}_{b.lower()}", op=OpKind.AND,
            operands=(n(a), n(b)),
            correlation=CorrelationClass[cls]))

    # offline statistics about completion behavior vs load
    nodes.append(NodeSpec("not_lightload", op=OpKind.NOT,
                          operands=(n("LL"),)))
    # early completion without light load is rare
    nodes.append(NodeSpec("stat_ec_without_ll", op=OpKind.AND,
                          operands=(n("EC"), "not_lightload"),
                          bounds=Bounds(0.0, 0.08)))
    # under light load, early completion mostly follows
    nodes.append(NodeSpec("stat_ec_given_ll", op=OpKind.CONDITIONAL,
                          operands=(n("EC"), n("LL")),
                          bounds=Bounds(0.7, 1.0)))
    return GraphSpec(tuple(nodes))


def evidence_bounds(env_bounds: dict[str, Bounds]) -> dict[str, Bounds]:
    """Translate short-key observation bounds into graph node bounds."""
    out = {}
    for key, b in env_bounds.items():
        node = ENV_TO_NODE.get(key, key)
        out[node] = b
    return out

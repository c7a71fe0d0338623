"""Structured-text file formats for graphs, scenarios, rule weights, and
dynamic-policy configs, plus line-delimited trace/event writers.

One shared syntax: whitespace-separated tokens per line, key=value options,
'#' comments, blank lines ignored.  Serialization is canonical so that
parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import json
from pathlib import Path

from .bounds import Bounds, CorrelationClass, JRange, OpKind
from .engine import GraphSpec, InferenceResult, NodeSpec
from .rules import (
    ACTION_CLASSES,
    DEFAULT_BINS,
    LITERALS,
    RuleSet,
    RuleTemplate,
)
from .sim import ENV_VARS, JobSpec, ObsModel, PeSpec, Scenario, TaskSpec


class ParseError(ValueError):
    def __init__(self, source: str, line_no: int, message: str):
        super().__init__(f"{source}:{line_no}: {message}")
        self.source = source
        self.line_no = line_no


def _lines(text: str):
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield i, line.split()


def _options(tokens: list[str], source: str, line_no: int,
             flags: set[str] = frozenset()) -> tuple[dict[str, str], set[str]]:
    opts: dict[str, str] = {}
    seen_flags: set[str] = set()
    for tok in tokens:
        if tok in flags:
            seen_flags.add(tok)
            continue
        if "=" not in tok:
            raise ParseError(source, line_no, f"expected key=value, got {tok!r}")
        key, val = tok.split("=", 1)
        if key in opts:
            raise ParseError(source, line_no, f"duplicate option {key!r}")
        opts[key] = val
    return opts, seen_flags


def _float(val: str, source: str, line_no: int, what: str) -> float:
    try:
        return float(val)
    except ValueError:
        raise ParseError(source, line_no, f"bad {what} {val!r}")


def _pair(val: str, source: str, line_no: int, what: str) -> tuple[float, float]:
    parts = val.split(",")
    if len(parts) != 2:
        raise ParseError(source, line_no, f"{what} needs two comma-separated "
                                          f"numbers, got {val!r}")
    return (_float(parts[0], source, line_no, what),
            _float(parts[1], source, line_no, what))


def _num(v: float) -> str:
    """Canonical numeric text: integral values print without a decimal."""
    f = float(v)
    return str(int(f)) if f == int(f) and abs(f) < 1e15 else repr(f)


# --- graph files --------------------------------------------------------------

_OP_NAMES = {k.value: k for k in OpKind}


def parse_graph(text: str, source: str = "<graph>") -> GraphSpec:
    nodes = []
    for line_no, tokens in _lines(text):
        if tokens[0] != "node":
            raise ParseError(source, line_no,
                             f"expected 'node', got {tokens[0]!r}")
        if len(tokens) < 3:
            raise ParseError(source, line_no, "node needs an id and a kind")
        node_id = tokens[1]
        kind_tok = tokens[2]
        rest = tokens[3:]
        opts, _ = _options(rest, source, line_no)
        bounds = None
        if "bounds" in opts:
            lo, hi = _pair(opts.pop("bounds"), source, line_no, "bounds")
            bounds = Bounds(lo, hi)
        j = None
        correlation = None
        if "j" in opts:
            val = opts.pop("j")
            if val in CorrelationClass.__members__:
                correlation = CorrelationClass[val]
            else:
                jl, jh = _pair(val, source, line_no, "correlation range")
                try:
                    j = JRange(jl, jh)
                except ValueError as exc:
                    raise ParseError(source, line_no, str(exc))
        operands: tuple[str, ...] = ()
        if "operands" in opts:
            operands = tuple(opts.pop("operands").split(","))
        if kind_tok == "prop":
            op = None
            if operands:
                raise ParseError(source, line_no,
                                 "propositional nodes take no operands")
        elif kind_tok.startswith("op="):
            name = kind_tok[3:]
            if name not in _OP_NAMES:
                raise ParseError(source, line_no, f"unknown operator {name!r}")
            op = _OP_NAMES[name]
        else:
            raise ParseError(source, line_no,
                             f"kind must be 'prop' or 'op=<name>', got {kind_tok!r}")
        if opts:
            raise ParseError(source, line_no,
                             f"unknown options {sorted(opts)}")
        nodes.append(NodeSpec(node_id, op=op, operands=operands,
                              bounds=bounds, j=j, correlation=correlation))
    return GraphSpec(tuple(nodes))


def serialize_graph(spec: GraphSpec) -> str:
    out = []
    for n in spec.nodes:
        parts = ["node", n.node_id,
                 "prop" if n.op is None else f"op={n.op.value}"]
        if n.operands:
            parts.append("operands=" + ",".join(n.operands))
        if n.bounds is not None:
            parts.append(f"bounds={_num(n.bounds.lower)},{_num(n.bounds.upper)}")
        if n.correlation is not None:
            parts.append(f"j={n.correlation.value}")
        elif n.j is not None:
            parts.append(f"j={_num(n.j.j_lower)},{_num(n.j.j_upper)}")
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"


def load_graph(path: str | Path) -> GraphSpec:
    p = Path(path)
    return parse_graph(p.read_text(), source=str(p))


# --- scenario files --------------------------------------------------------------

def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    name = "scenario"
    seed = 0
    load = "light"
    pes: list[PeSpec] = []
    env: list[tuple[str, int]] = []
    obs: list[tuple[str, ObsModel]] = []
    jobs: dict[str, dict] = {}
    job_order: list[str] = []

    for line_no, tokens in _lines(text):
        head, rest = tokens[0], tokens[1:]
        if head == "scenario":
            if not rest:
                raise ParseError(source, line_no, "scenario needs a name")
            name = rest[0]
        elif head == "seed":
            seed = int(_float(rest[0], source, line_no, "seed"))
        elif head == "load":
            if rest[0] not in ("heavy", "medium", "light"):
                raise ParseError(source, line_no, f"unknown load {rest[0]!r}")
            load = rest[0]
        elif head == "env":
            opts, _ = _options(rest, source, line_no)
            for var, val in opts.items():
                if var not in ENV_VARS:
                    raise ParseError(source, line_no,
                                     f"unknown environment variable {var!r}")
                env.append((var, int(_float(val, source, line_no, var))))
        elif head == "obs":
            if not rest:
                raise ParseError(source, line_no, "obs needs a variable name")
            var = rest[0]
            opts, _ = _options(rest[1:], source, line_no)
            width = _float(opts.pop("width", "0"), source, line_no, "width")
            stale = _float(opts.pop("stale", "0"), source, line_no, "stale")
            if opts:
                raise ParseError(source, line_no, f"unknown options {sorted(opts)}")
            obs.append((var, ObsModel(width, stale)))
        elif head == "pe":
            if not rest:
                raise ParseError(source, line_no, "pe needs an id")
            pe_id = rest[0]
            opts, _ = _options(rest[1:], source, line_no)
            pe_type = opts.pop("type", "CPU")
            rates: list[tuple[str, float]] = []
            for key in sorted(opts):
                if key == "rate":
                    rates.append(("*", _float(opts[key], source, line_no, "rate")))
                elif key.startswith("rate."):
                    rates.append((key[5:], _float(opts[key], source, line_no, key)))
                else:
                    raise ParseError(source, line_no, f"unknown option {key!r}")
            if not rates:
                rates = [("*", 1.0)]
            pes.append(PeSpec(pe_id, pe_type, tuple(rates)))
        elif head == "job":
            if not rest:
                raise ParseError(source, line_no, "job needs an id")
            job_id = rest[0]
            if job_id in jobs:
                raise ParseError(source, line_no, f"duplicate job {job_id!r}")
            opts, flags = _options(rest[1:], source, line_no,
                                   flags={"priority", "background"})
            jobs[job_id] = {
                "arrival": _float(opts.pop("arrival", "0"), source, line_no, "arrival"),
                "a_max": int(_float(opts.pop("amax", "100"), source, line_no, "amax")),
                "priority": "priority" in flags,
                "background": "background" in flags,
                "tasks": [],
            }
            job_order.append(job_id)
            if opts:
                raise ParseError(source, line_no, f"unknown options {sorted(opts)}")
        elif head == "task":
            if not rest or "." not in rest[0]:
                raise ParseError(source, line_no, "task needs a job.task id")
            job_id, task_id = rest[0].split(".", 1)
            if job_id not in jobs:
                raise ParseError(source, line_no, f"task before job {job_id!r}")
            opts, _ = _options(rest[1:], source, line_no)
            try:
                work = _float(opts.pop("work"), source, line_no, "work")
                sd = _float(opts.pop("sd"), source, line_no, "sd")
                pe = opts.pop("pe")
            except KeyError as exc:
                raise ParseError(source, line_no, f"task missing {exc.args[0]}")
            parents = tuple(opts.pop("parents", "").split(",")) \
                if "parents" in opts else ()
            kind = opts.pop("kind", "*")
            if opts:
                raise ParseError(source, line_no, f"unknown options {sorted(opts)}")
            jobs[job_id]["tasks"].append(
                TaskSpec(task_id, work, sd, pe, parents, kind))
        else:
            raise ParseError(source, line_no, f"unknown directive {head!r}")

    job_specs = tuple(
        JobSpec(job_id, tuple(jobs[job_id]["tasks"]),
                arrival=jobs[job_id]["arrival"],
                priority=jobs[job_id]["priority"],
                background=jobs[job_id]["background"],
                a_max=jobs[job_id]["a_max"])
        for job_id in job_order)
    return Scenario(name=name, pes=tuple(pes), jobs=job_specs, load=load,
                    env=tuple(env), obs=tuple(obs), seed=seed)


def serialize_scenario(sc: Scenario) -> str:
    out = [f"scenario {sc.name}", f"seed {sc.seed}", f"load {sc.load}"]
    if sc.env:
        out.append("env " + " ".join(f"{k}={v}" for k, v in sc.env))
    for var, model in sc.obs:
        out.append(f"obs {var} width={_num(model.width)} stale={_num(model.staleness)}")
    for pe in sc.pes:
        parts = [f"pe {pe.pe_id} type={pe.pe_type}"]
        for kind, rate in pe.rates:
            parts.append(f"rate={_num(rate)}" if kind == "*" else f"rate.{kind}={_num(rate)}")
        out.append(" ".join(parts))
    for job in sc.jobs:
        parts = [f"job {job.job_id} arrival={_num(job.arrival)} amax={job.a_max}"]
        if job.priority:
            parts.append("priority")
        if job.background:
            parts.append("background")
        out.append(" ".join(parts))
        for t in job.tasks:
            line = (f"task {job.job_id}.{t.task_id} work={_num(t.work)} "
                    f"sd={_num(t.sub_deadline)} pe={t.pe}")
            if t.parents:
                line += " parents=" + ",".join(t.parents)
            if t.kind != "*":
                line += f" kind={t.kind}"
            out.append(line)
    return "\n".join(out) + "\n"


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    return parse_scenario(p.read_text(), source=str(p))


# --- rule weight files ---------------------------------------------------------------
#
# Table layout mirrors the published weight figure: one row per literal,
# one column per action class.

def parse_ruleset(text: str, source: str = "<weights>") -> RuleSet:
    bias = 1.0
    bins = DEFAULT_BINS
    columns: list[str] | None = None
    rows: dict[str, list[float]] = {}
    for line_no, tokens in _lines(text):
        head = tokens[0]
        if head == "ruleset":
            opts, _ = _options(tokens[1:], source, line_no)
            if "bias" in opts:
                bias = _float(opts.pop("bias"), source, line_no, "bias")
            if "bins" in opts:
                try:
                    bins = tuple(int(b) for b in opts.pop("bins").split(","))
                except ValueError:
                    raise ParseError(source, line_no, "bad bins list")
            if opts:
                raise ParseError(source, line_no, f"unknown options {sorted(opts)}")
        elif head == "columns":
            columns = tokens[1:]
            if sorted(columns) != sorted(ACTION_CLASSES):
                raise ParseError(source, line_no,
                                 f"columns must be {list(ACTION_CLASSES)}")
        else:
            lit = head
            if lit not in LITERALS:
                raise ParseError(source, line_no, f"unknown literal {lit!r}")
            if lit in rows:
                raise ParseError(source, line_no, f"duplicate literal {lit!r}")
            if columns is None:
                raise ParseError(source, line_no,
                                 "weight rows must follow a 'columns' line")
            if len(tokens) != 1 + len(columns):
                raise ParseError(source, line_no,
                                 f"expected {len(columns)} weights")
            rows[lit] = [_float(v, source, line_no, "weight") for v in tokens[1:]]
    if columns is None:
        raise ParseError(source, 0, "missing 'columns' line")
    missing = [lit for lit in LITERALS if lit not in rows]
    if missing:
        raise ParseError(source, 0, f"missing literal rows {missing}")
    templates = {}
    for ci, cls in enumerate(columns):
        weights = {lit: rows[lit][ci] for lit in LITERALS}
        templates[cls] = RuleTemplate(cls, weights, bias)
    return RuleSet(templates, bins)


def serialize_ruleset(rs: RuleSet) -> str:
    bias = rs.templates[ACTION_CLASSES[0]].bias
    out = [
        "ruleset bias={} bins={}".format(_num(bias), ",".join(map(str, rs.x_bins))),
        "columns " + " ".join(ACTION_CLASSES),
    ]
    width = max(len(lit) for lit in LITERALS)
    for lit in LITERALS:
        cells = " ".join(f"{rs.templates[cls].weights[lit]:.6e}"
                         for cls in ACTION_CLASSES)
        out.append(f"{lit:<{width}} {cells}")
    return "\n".join(out) + "\n"


def load_ruleset(path: str | Path) -> RuleSet:
    p = Path(path)
    return parse_ruleset(p.read_text(), source=str(p))


def save_ruleset(rs: RuleSet, path: str | Path) -> None:
    Path(path).write_text(serialize_ruleset(rs))


# --- dynamic-policy config --------------------------------------------------------------

def parse_dynamic_config(text: str, source: str = "<dynamic>") -> dict:
    cfg = {"query": "LightLoad", "tau": 0.6, "cadence": 1, "usej": True,
           "epsilon": 1e-4, "max_iters": 1000}
    seen = False
    for line_no, tokens in _lines(text):
        if tokens[0] != "dynamic":
            raise ParseError(source, line_no, f"expected 'dynamic', got {tokens[0]!r}")
        seen = True
        opts, _ = _options(tokens[1:], source, line_no)
        for key in ("graph", "rules", "query"):
            if key in opts:
                cfg[key] = opts.pop(key)
        if "tau" in opts:
            cfg["tau"] = _float(opts.pop("tau"), source, line_no, "tau")
        if "cadence" in opts:
            cfg["cadence"] = int(_float(opts.pop("cadence"), source, line_no, "cadence"))
        if "usej" in opts:
            val = opts.pop("usej")
            if val not in ("on", "off"):
                raise ParseError(source, line_no, "usej must be on or off")
            cfg["usej"] = val == "on"
        if "epsilon" in opts:
            cfg["epsilon"] = _float(opts.pop("epsilon"), source, line_no, "epsilon")
        if opts:
            raise ParseError(source, line_no, f"unknown options {sorted(opts)}")
    if not seen:
        raise ParseError(source, 0, "missing 'dynamic' line")
    if "graph" not in cfg or "rules" not in cfg:
        raise ParseError(source, 0, "dynamic config needs graph= and rules=")
    if not 0 < cfg["tau"] < 1:
        raise ParseError(source, 0, f"tau must be in (0, 1), got {cfg['tau']}")
    return cfg


def load_dynamic_config(path: str | Path) -> dict:
    p = Path(path)
    cfg = parse_dynamic_config(p.read_text(), source=str(p))
    for key in ("graph", "rules"):
        cfg[key] = str((p.parent / cfg[key]).resolve()) \
            if not Path(cfg[key]).is_absolute() else cfg[key]
    return cfg


# --- line-delimited outputs ------------------------------------------------------------

def write_trace(result: InferenceResult, path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in result.trace:
            fh.write(json.dumps({
                "iteration": rec.iteration, "node": rec.node_id,
                "direction": rec.direction, "before": list(rec.before),
                "after": list(rec.after), "rule": rec.rule}) + "\n")


def write_event_log(event_log: list[dict], path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in event_log:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

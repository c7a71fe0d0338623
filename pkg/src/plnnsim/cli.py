"""Command-line interface.

Subcommands: infer (bound propagation over a graph file), sim (one episode
under a policy), train (rule learning on a scenario), extract (symbolic
rules from a weights file), dynamic (sim with inference-gated switching).
Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .belief import BeliefError
from .bounds import BoundsError
from .engine import GraphError, build_graph, infer, query, to_dot
from .formats import (
    ParseError,
    load_dynamic_config,
    load_graph,
    load_ruleset,
    load_scenario,
    save_ruleset,
    write_event_log,
    write_trace,
)
from .policy import (
    DynamicPolicy,
    DynamicPolicyConfig,
    RulesPolicy,
    UniformPolicy,
    as_decide,
)
from .report import ReportRow, write_curve, write_report
from .rules import RuleError, extract_rules
from .sim import ScenarioError, SimulationError, run_episode
from .train import TrainError, TrainerConfig, train

_VALIDATION_ERRORS = (ParseError, GraphError, ScenarioError, RuleError,
                      TrainError, BeliefError, BoundsError, FileNotFoundError)


def _add_infer(sub):
    p = sub.add_parser("infer", help="propagate bounds over a graph file")
    p.add_argument("--graph", required=True)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--use-j", choices=("on", "off"), default="on")
    p.add_argument("--query", help="comma-separated node ids (default: all)")
    p.add_argument("--trace", help="write tightening records (JSON lines)")
    p.add_argument("--dot", help="write annotated graph (Graphviz)")
    p.set_defaults(func=cmd_infer)


def cmd_infer(args) -> int:
    spec = load_graph(args.graph)
    graph = build_graph(spec)
    result = infer(graph, epsilon=args.epsilon, max_iters=args.max_iters,
                   use_j=(args.use_j == "on"))
    if args.query:
        ids = [s.strip() for s in args.query.split(",") if s.strip()]
    else:
        ids = [nid for nid in graph.topo_order if not graph[nid].synthesized]
    star = "*" if result.has_contradiction else ""
    for ans in query(result, graph, ids):
        line = f"{ans.node_id}: ({ans.lower:.4f}, {ans.upper:.4f}){star}"
        if ans.arrested:
            line += f"  [arrested, extent {ans.extent:.4f}]"
        print(line)
    if not result.converged:
        print(f"warning: not converged within {result.iterations} sweeps",
              file=sys.stderr)
    if args.trace:
        write_trace(result, args.trace)
    if args.dot:
        Path(args.dot).write_text(to_dot(graph, result))
    return 0


def _policy_from_spec(policy_spec: str):
    if policy_spec == "uniform":
        return UniformPolicy(), "uniform"
    if policy_spec.startswith("rules:"):
        ruleset = load_ruleset(policy_spec[len("rules:"):])
        return RulesPolicy(ruleset), "rules"
    if policy_spec.startswith("dynamic:"):
        cfg = load_dynamic_config(policy_spec[len("dynamic:"):])
        return _dynamic_policy(cfg), "dynamic"
    raise ScenarioError(f"unknown policy {policy_spec!r}; expected uniform, "
                        f"rules:FILE, or dynamic:FILE")


def _dynamic_policy(cfg: dict) -> DynamicPolicy:
    graph_spec = load_graph(cfg["graph"])
    ruleset = load_ruleset(cfg["rules"])
    config = DynamicPolicyConfig(
        graph_spec=graph_spec, query_node=cfg["query"], tau=cfg["tau"],
        cadence=cfg["cadence"], use_j=cfg["usej"], epsilon=cfg["epsilon"],
        max_iters=cfg["max_iters"])
    return DynamicPolicy(ruleset, config)


def _add_sim(sub):
    p = sub.add_parser("sim", help="run one episode under a policy")
    p.add_argument("--scenario", required=True)
    p.add_argument("--policy", required=True,
                   help="uniform | rules:FILE | dynamic:FILE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="CSV report (figure written alongside)")
    p.add_argument("--events", help="event log (JSON lines)")
    p.add_argument("--append", action="store_true",
                   help="keep existing report rows")
    p.set_defaults(func=cmd_sim)


def _run_sim(args, policy, policy_name: str) -> int:
    scenario = load_scenario(args.scenario)
    result = run_episode(scenario, as_decide(policy))
    gate_share = 0.0
    contradictions = 0
    if isinstance(policy, DynamicPolicy):
        decisions = policy.decisions
        if decisions:
            gate_share = sum(d.mode == "uniform" for d in decisions) / len(decisions)
            contradictions = sum(d.has_contradiction for d in decisions)
        for d in decisions:
            result.event_log.append({
                "time": d.time, "kind": "gate", "ref": policy.config.query_node,
                "mode": d.mode, "bounds": [d.lower, d.upper]})
        result.event_log.sort(key=lambda r: (r["time"], r["kind"]))
    rows = []
    for job_id in sorted(result.makespans):
        mk = result.makespans[job_id]
        print(f"{job_id}: makespan {mk:.4f}  [{policy_name}]")
        rows.append(ReportRow(scenario=scenario.name, policy=policy_name,
                              job=job_id, makespan=mk,
                              events=len(result.events),
                              contradictions=contradictions,
                              gate_uniform_share=gate_share, seed=args.seed))
    if args.report:
        write_report(rows, args.report, append=args.append)
    if args.events:
        write_event_log(result.event_log, args.events)
    return 0


def cmd_sim(args) -> int:
    policy, name = _policy_from_spec(args.policy)
    return _run_sim(args, policy, name)


def _add_train(sub):
    p = sub.add_parser("train", help="learn rule weights on a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--episodes", type=int, default=2000)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--structure-weight", type=float, default=1.0)
    p.add_argument("--reward-to-go", action="store_true")
    p.add_argument("--untied", action="store_true",
                   help="per-agent rule sets, round-robin training")
    p.add_argument("--out", required=True, help="weights file to write")
    p.add_argument("--curve", help="learning-curve CSV (figure alongside)")
    p.set_defaults(func=cmd_train)


def cmd_train(args) -> int:
    scenario = load_scenario(args.scenario)
    config = TrainerConfig(
        episodes=args.episodes, batch_size=args.batch, lr=args.lr,
        gamma=args.gamma, seed=args.seed,
        structure_weight=args.structure_weight,
        reward_to_go=args.reward_to_go, tie_agents=not args.untied)
    result = train(scenario, config)
    save_ruleset(result.shared_ruleset(), args.out)
    print(f"wrote weights to {args.out} after {len(result.curve)} batches")
    if args.curve:
        write_curve(result.curve, args.curve)
    return 0


def _add_extract(sub):
    p = sub.add_parser("extract", help="threshold weights into symbolic rules")
    p.add_argument("--weights", required=True)
    p.add_argument("--threshold", type=float, default=0.1)
    p.set_defaults(func=cmd_extract)


def cmd_extract(args) -> int:
    ruleset = load_ruleset(args.weights)
    for rule in extract_rules(ruleset, args.threshold):
        print(rule)
    return 0


def _add_dynamic(sub):
    p = sub.add_parser("dynamic", help="sim with inference-gated switching")
    p.add_argument("--scenario", required=True)
    p.add_argument("--config", required=True, help="dynamic-policy config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report")
    p.add_argument("--events")
    p.add_argument("--append", action="store_true")
    p.set_defaults(func=cmd_dynamic)


def cmd_dynamic(args) -> int:
    cfg = load_dynamic_config(args.config)
    policy = _dynamic_policy(cfg)
    rc = _run_sim(args, policy, "dynamic")
    for d in policy.decisions:
        print(f"gate t={d.time:.2f}: {cfg['query']} in ({d.lower:.4f}, "
              f"{d.upper:.4f}) -> {d.mode}"
              + ("*" if d.has_contradiction else ""))
    return rc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plnnsim",
        description="bound-propagation inference and power-token scheduling")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_infer(sub)
    _add_sim(sub)
    _add_train(sub)
    _add_extract(sub)
    _add_dynamic(sub)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SimulationError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

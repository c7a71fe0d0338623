"""Execution policies for the simulator and the inference-gated switch.

Execution is deterministic: the rules policy takes the highest-probability
admissible action.  The dynamic policy re-infers the latent load state from
the current observation bounds at every decision event and falls back to
uniform sharing whenever light load is predicted above the gate threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .bounds import Bounds
from .domain import evidence_bounds
from .engine import GraphError, GraphSpec, build_graph, infer, query
from .rules import RuleSet, action_distribution
from .sim import AgentObservation, uniform_policy


@dataclass(frozen=True)
class DynamicPolicyConfig:
    graph_spec: GraphSpec
    query_node: str = "LightLoad"
    tau: float = 0.6
    cadence: int = 1            # decision events between gate refreshes
    use_j: bool = True
    epsilon: float = 1e-4
    max_iters: int = 1000

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise GraphError(f"gate threshold must be in (0, 1), got {self.tau}")
        if self.cadence < 1:
            raise GraphError("cadence must be >= 1")


@dataclass(frozen=True)
class GateDecision:
    mode: str                   # "uniform" | "rules"
    time: float
    lower: float
    upper: float
    arrested: bool
    has_contradiction: bool


def dynamic_gate(obs_bounds: dict[str, Bounds], config: DynamicPolicyConfig,
                 time: float = 0.0) -> GateDecision:
    """Infer the query node under the observation bounds and pick a mode.

    Observation bounds replace the matching propositional nodes' priors
    (short environment keys are accepted); unobserved nodes keep their
    authored priors.  Light load predicted with lower bound >= tau selects
    uniform sharing, anything else keeps the learned rules.
    """
    installed = evidence_bounds(obs_bounds)
    prop_ids = {n.node_id for n in config.graph_spec.nodes if n.op is None}
    unknown = set(installed) - prop_ids
    if unknown:
        raise GraphError(f"observation bounds for unknown propositions "
                         f"{sorted(unknown)}")
    graph = build_graph(config.graph_spec.with_bounds(installed))
    if config.query_node not in graph.nodes:
        raise GraphError(f"query node {config.query_node!r} absent from graph")
    result = infer(graph, epsilon=config.epsilon, max_iters=config.max_iters,
                   use_j=config.use_j)
    ans = query(result, graph, [config.query_node])[0]
    mode = "uniform" if ans.lower >= config.tau else "rules"
    return GateDecision(mode=mode, time=time, lower=ans.lower, upper=ans.upper,
                        arrested=ans.arrested,
                        has_contradiction=ans.graph_has_contradiction)


class UniformPolicy:
    """Even sharing among concurrently active same-job tasks."""

    def decide(self, pe_id: str, obs: AgentObservation, state):
        return uniform_policy(obs), 1.0


class RulesPolicy:
    """Deterministic argmax over the masked action distribution."""

    def __init__(self, ruleset: RuleSet):
        self.ruleset = ruleset

    def decide(self, pe_id: str, obs: AgentObservation, state):
        if obs.background or obs.task_gid is None:
            return uniform_policy(obs), 1.0
        dist = action_distribution(self.ruleset, obs.valuation, obs.mask,
                                   obs.slack_by_bin)
        best = max(sorted(dist), key=lambda a: dist[a])
        return best, dist[best]


class DynamicPolicy:
    """Gate between uniform sharing and the learned rules per event."""

    def __init__(self, ruleset: RuleSet, config: DynamicPolicyConfig):
        self.config = config
        self.rules = RulesPolicy(ruleset)
        self.uniform = UniformPolicy()
        self.decisions: list[GateDecision] = []
        self._gate_mode = "rules"
        self._last_gate_time: float | None = None
        self._rounds_since_gate = 0

    def _refresh(self, obs: AgentObservation, state) -> None:
        clock = state.clock
        if self._last_gate_time == clock:
            return
        if self._last_gate_time is not None:
            self._rounds_since_gate += 1
            if self._rounds_since_gate < self.config.cadence:
                self._last_gate_time = clock
                return
        decision = dynamic_gate(obs.env_bounds, self.config, time=clock)
        self.decisions.append(decision)
        self._gate_mode = decision.mode
        self._last_gate_time = clock
        self._rounds_since_gate = 0

    def decide(self, pe_id: str, obs: AgentObservation, state):
        self._refresh(obs, state)
        if obs.background:
            return self.uniform.decide(pe_id, obs, state)
        if self._gate_mode == "uniform":
            return self.uniform.decide(pe_id, obs, state)
        return self.rules.decide(pe_id, obs, state)


def as_decide(policy):
    """Adapt a policy object to the run_episode callback signature."""
    def decide(pe_id, obs, state):
        return policy.decide(pe_id, obs, state)
    return decide

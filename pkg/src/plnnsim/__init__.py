"""Bound-propagation logic inference with an event-driven power-token
scheduling simulator and trainable fuzzy-rule policies."""

from .bounds import (
    Bounds,
    BoundsError,
    CorrelationClass,
    FULL_J,
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
    j_mod_and,
    j_mod_implies,
    j_mod_or,
    negate,
)
from .belief import update_belief
from .domain import CORRELATION_TABLE, ENV_TO_NODE, build_domain_graph
from .engine import (
    GraphError,
    GraphSpec,
    InferenceResult,
    NodeSpec,
    PlnnGraph,
    build_graph,
    downward_pass,
    infer,
    query,
    to_dot,
    upward_pass,
)
from .oracle import OracleInfeasible, exact_bounds_oracle
from .policy import (
    DynamicPolicy,
    DynamicPolicyConfig,
    GateDecision,
    RulesPolicy,
    UniformPolicy,
    dynamic_gate,
)
from .rules import (
    ACTION_CLASSES,
    DEFAULT_BINS,
    RuleError,
    RuleSet,
    RuleTemplate,
    SymbolicRule,
    action_distribution,
    default_ruleset,
    eval_rule,
    extract_rules,
    guard_rail_mask,
    make_valuation,
    rule_gradient,
    slack_value,
)
from .sim import (
    JobSpec,
    ObsModel,
    PeSpec,
    Scenario,
    ScenarioError,
    SimEvent,
    SimState,
    SimulationError,
    TaskSpec,
    apply_allocations,
    event_reward,
    makespan,
    observe,
    per_step_reward,
    run_episode,
    step_to_next_event,
    uniform_policy,
)
from .train import (
    TrainerConfig,
    TrainError,
    TrainResult,
    adamax_step,
    policy_gradient,
    returns,
    rollout,
    train,
)

__version__ = "0.1.0"

"""Weighted fuzzy-conjunction policy rules over grounded predicates.

Each action class owns one rule template: a weighted Łukasiewicz
conjunction clamp01(bias - sum_i w_i * (1 - x_i)) over the predicate
literals and their negations.  With unit weights and bias this reduces to
the classical conjunction max(0, sum x_i - (n - 1)) on boolean inputs.
Action scores are the template truths, masked by hard guard rails and
normalized into a sampling distribution.  Thresholding trained weights
recovers a symbolic conjunction per action class.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

PREDICATES = ("TaskAssigned", "ParentTasksCompleted", "SiblingTasks", "Slack")
LITERALS = tuple(p for name in PREDICATES for p in (name, "!" + name))

ACTION_CLASSES = ("NeedTokens_0", "NeedTokens_100", "NeedTokens_x")
DEFAULT_BINS = (10, 20, 30, 40, 50, 60, 70, 80, 90)

DEFAULT_EXTRACT_THRESHOLD = 0.1


class RuleError(ValueError):
    pass


def negate_literal(lit: str) -> str:
    return lit[1:] if lit.startswith("!") else "!" + lit


def pretty_literal(lit: str) -> str:
    return "¬" + lit[1:] if lit.startswith("!") else lit


def make_valuation(task_assigned: float, parents_completed: float,
                   sibling_tasks: float, slack: float) -> dict[str, float]:
    """Full literal map; negated entries are the complements."""
    vals = {
        "TaskAssigned": float(task_assigned),
        "ParentTasksCompleted": float(parents_completed),
        "SiblingTasks": float(sibling_tasks),
        "Slack": float(slack),
    }
    for name, x in list(vals.items()):
        if not 0.0 <= x <= 1.0:
            raise RuleError(f"{name} valuation {x} outside [0, 1]")
        vals["!" + name] = 1.0 - x
    return vals


@dataclass
class RuleTemplate:
    action_class: str
    weights: dict[str, float]
    bias: float = 1.0

    def __post_init__(self):
        for lit, w in self.weights.items():
            if w < 0:
                raise RuleError(f"{self.action_class}: negative weight for {lit}")


@dataclass
class RuleSet:
    templates: dict[str, RuleTemplate]
    x_bins: tuple[int, ...] = DEFAULT_BINS

    def __post_init__(self):
        bins = self.x_bins
        if any(not 0 < b < 100 for b in bins) or list(bins) != sorted(set(bins)):
            raise RuleError(f"bins must be strictly increasing in (0, 100): {bins}")

    def copy(self) -> "RuleSet":
        return RuleSet({c: RuleTemplate(t.action_class, dict(t.weights), t.bias)
                        for c, t in self.templates.items()}, self.x_bins)

    def actions(self) -> tuple[int, ...]:
        return (0,) + self.x_bins + (100,)


@dataclass(frozen=True)
class SymbolicRule:
    action_class: str
    literals: tuple[str, ...]

    def __str__(self) -> str:
        body = " ∧ ".join(pretty_literal(l) for l in self.literals) or "⊤"
        return f"{self.action_class} ← {body}"


def default_ruleset(seed: int = 0, bins: Sequence[int] = DEFAULT_BINS) -> RuleSet:
    """Fresh trainable rule set: weights 0.5 plus small uniform noise."""
    rng = random.Random(seed)
    templates = {}
    for cls in ACTION_CLASSES:
        weights = {lit: 0.5 + rng.uniform(-0.05, 0.05) for lit in LITERALS}
        templates[cls] = RuleTemplate(cls, weights)
    return RuleSet(templates, tuple(bins))


def action_class_of(action: int, bins: Sequence[int]) -> str:
    if action == 0:
        return "NeedTokens_0"
    if action == 100:
        return "NeedTokens_100"
    if action in bins:
        return "NeedTokens_x"
    raise RuleError(f"unknown action {action}")


def eval_rule(template: RuleTemplate, valuation: Mapping[str, float]) -> float:
    """clamp01(bias - sum of w_i * (1 - x_i))."""
    acc = template.bias
    for lit, w in template.weights.items():
        if lit not in valuation:
            raise RuleError(f"{template.action_class}: literal {lit!r} missing "
                            f"from valuation")
        acc -= w * (1.0 - valuation[lit])
    return min(1.0, max(0.0, acc))


def rule_raw(template: RuleTemplate, valuation: Mapping[str, float]) -> float:
    acc = template.bias
    for lit, w in template.weights.items():
        acc -= w * (1.0 - valuation[lit])
    return acc


def rule_gradient(template: RuleTemplate,
                  valuation: Mapping[str, float]) -> dict[str, float]:
    """d(output)/d(weight): -(1 - x_i) strictly inside the clamp, else 0."""
    raw = rule_raw(template, valuation)
    if raw <= 0.0 or raw >= 1.0:
        return {lit: 0.0 for lit in template.weights}
    return {lit: -(1.0 - valuation[lit]) for lit in template.weights}


def _bin_valuation(valuation: Mapping[str, float], slack: float) -> dict[str, float]:
    v = dict(valuation)
    v["Slack"] = slack
    v["!Slack"] = 1.0 - slack
    return v


def action_scores(ruleset: RuleSet, valuation: Mapping[str, float],
                  slack_by_bin: Mapping[int, float] | None = None) -> dict[int, float]:
    """Unnormalized per-action truths; x-bins re-evaluate Slack per bin."""
    scores = {
        0: eval_rule(ruleset.templates["NeedTokens_0"], valuation),
        100: eval_rule(ruleset.templates["NeedTokens_100"], valuation),
    }
    tx = ruleset.templates["NeedTokens_x"]
    for b in ruleset.x_bins:
        if slack_by_bin is not None and b in slack_by_bin:
            v = _bin_valuation(valuation, slack_by_bin[b])
        else:
            v = valuation
        scores[b] = eval_rule(tx, v)
    return scores


def action_distribution(ruleset: RuleSet, valuation: Mapping[str, float],
                        mask: frozenset[int] | set[int],
                        slack_by_bin: Mapping[int, float] | None = None
                        ) -> dict[int, float]:
    """Masked, normalized action probabilities.

    Masked actions get probability 0; all-zero admissible scores fall back
    to the uniform distribution over the mask.
    """
    if not mask:
        raise RuleError("empty action mask")
    scores = action_scores(ruleset, valuation, slack_by_bin)
    probs = {a: 0.0 for a in scores}
    total = sum(scores[a] for a in mask)
    if total <= 0.0:
        u = 1.0 / len(mask)
        for a in mask:
            probs[a] = u
    else:
        for a in mask:
            probs[a] = scores[a] / total
    return probs


def guard_rail_mask(task_assigned: bool, parents_completed: bool,
                    sibling_active: bool,
                    bins: Sequence[int] = DEFAULT_BINS) -> frozenset[int]:
    """Hard admissibility: standby forces 0; an active task forbids 0;
    an active sibling forbids 100."""
    if not task_assigned or not parents_completed:
        return frozenset({0})
    actions = set(bins)
    if not sibling_active:
        actions.add(100)
    return frozenset(actions)


@dataclass(frozen=True)
class SiblingTask:
    work: float
    rate: float
    sub_deadline: float


@dataclass(frozen=True)
class SlackContext:
    work: float
    rate: float
    sub_deadline: float
    siblings: tuple[SiblingTask, ...]


def slack_value(bin_percent: float, ctx: SlackContext) -> float:
    """Ratio-matching score of granting bin_percent tokens to this task.

    The complement is split equally among the siblings; completion-time
    ratios are compared against sub-deadline ratios and the mean absolute
    deviation is folded into max(0, 1 - d).  Peaks exactly where completion
    times sit in the sub-deadline ratio; unimodal in the bin under the
    linear speed model.
    """
    if not ctx.siblings:
        raise RuleError("slack_value needs at least one sibling")
    if ctx.sub_deadline <= 0 or any(s.sub_deadline <= 0 for s in ctx.siblings):
        raise RuleError("sub-deadlines must be positive")
    if ctx.work <= 0 or any(s.work <= 0 for s in ctx.siblings):
        raise RuleError("works must be positive")
    if not 0 < bin_percent < 100:
        return 0.0
    share_self = bin_percent / 100.0
    share_sib = (1.0 - share_self) / len(ctx.siblings)
    t_self = ctx.work / (ctx.rate * share_self)
    dev = 0.0
    for s in ctx.siblings:
        t_sib = s.work / (s.rate * share_sib)
        dev += abs(t_self / t_sib - ctx.sub_deadline / s.sub_deadline)
    d = dev / len(ctx.siblings)
    return max(0.0, 1.0 - d)


def extract_rules(ruleset: RuleSet,
                  threshold: float = DEFAULT_EXTRACT_THRESHOLD) -> list[SymbolicRule]:
    """Keep literals whose weight is at least the threshold, per class."""
    if not 0.0 < threshold < 1.0:
        raise RuleError(f"threshold must be in (0, 1), got {threshold}")
    out = []
    for cls in ACTION_CLASSES:
        t = ruleset.templates[cls]
        keep = tuple(lit for lit in LITERALS if t.weights.get(lit, 0.0) >= threshold)
        out.append(SymbolicRule(cls, keep))
    return out

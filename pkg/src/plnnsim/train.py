"""Policy-gradient training of the rule templates on simulator rollouts.

The score-function estimator averages whole-trajectory log-likelihood times
discounted return over a batch of episodes (reward-to-go optional), with a
mean-return baseline for variance reduction.  A per-class cross-entropy
structure term distills the executed decision structure (including
guard-rail-forced choices, which contribute no score-function gradient)
into the class templates.  Updates go through an infinity-norm adaptive
optimizer with weights projected back to nonnegative.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .rules import (
    ACTION_CLASSES,
    DEFAULT_BINS,
    LITERALS,
    RuleError,
    RuleSet,
    action_class_of,
    action_scores,
    default_ruleset,
    eval_rule,
    rule_gradient,
    rule_raw,
)
from .sim import EpisodeResult, Scenario, StepRecord, run_episode, uniform_policy

GradDict = dict[str, dict[str, float]]

# truth clip for the cross-entropy slope (|dL/ds| <= ~11); rare-class row
# mass is equalized separately, so no branch needs an outsized magnitude
_BCE_CLIP = 0.1


class TrainError(ValueError):
    pass


def zero_grad() -> GradDict:
    return {cls: {lit: 0.0 for lit in LITERALS} for cls in ACTION_CLASSES}


def grad_axpy(acc: GradDict, other: GradDict, scale: float = 1.0) -> None:
    for cls, row in other.items():
        dst = acc[cls]
        for lit, v in row.items():
            dst[lit] += scale * v


# --- returns -----------------------------------------------------------------

def returns(rewards: list[float], times: list[float], gamma: float) -> list[float]:
    """Discounted return at each event, exponents from elapsed event time."""
    if not 0 <= gamma < 1:
        raise TrainError(f"gamma must be in [0, 1), got {gamma}")
    if len(rewards) != len(times):
        raise TrainError("rewards and times length mismatch")
    out = [0.0] * len(rewards)
    nxt = 0.0
    for j in range(len(rewards) - 1, -1, -1):
        if j + 1 < len(rewards):
            nxt = (gamma ** (times[j + 1] - times[j])) * out[j + 1]
        else:
            nxt = 0.0
        out[j] = rewards[j] + nxt
    return out


def whole_return(steps: list[StepRecord], gamma: float, t0: float = 0.0) -> float:
    return sum((gamma ** (s.reward_time - t0)) * s.reward for s in steps)


# --- score-function gradient -----------------------------------------------------

def _bin_val(valuation: dict[str, float], slack: float) -> dict[str, float]:
    v = dict(valuation)
    v["Slack"] = slack
    v["!Slack"] = 1.0 - slack
    return v


def _action_valuation(ruleset: RuleSet, step: StepRecord, action: int) -> dict[str, float]:
    cls = action_class_of(action, ruleset.x_bins)
    if cls == "NeedTokens_x" and step.slack_by_bin and action in step.slack_by_bin:
        return _bin_val(step.valuation, step.slack_by_bin[action])
    return step.valuation


def step_logprob_gradient(ruleset: RuleSet, step: StepRecord,
                          strict: bool = True) -> GradDict | None:
    """Gradient of log pi(action | observation) w.r.t. every template weight.

    None for steps with no usable gradient: singleton masks and the
    uniform fallback when every admissible score is zero.  A taken action
    with zero model probability is an off-policy error under strict mode
    and is skipped otherwise (exploration-forced choices carry no
    score-function signal).
    """
    mask = sorted(step.mask)
    if len(mask) <= 1:
        return None
    scores = action_scores(ruleset, step.valuation, step.slack_by_bin)
    z = sum(scores[a] for a in mask)
    if z <= 0.0:
        return None
    s_taken = scores[step.action]
    if s_taken <= 0.0:
        if strict:
            raise TrainError(f"action {step.action} has probability 0 under "
                             f"the current rules; trajectory is off-policy")
        return None
    grad = zero_grad()
    per_action = {}
    for a in mask:
        cls = action_class_of(a, ruleset.x_bins)
        v = _action_valuation(ruleset, step, a)
        per_action[a] = (cls, rule_gradient(ruleset.templates[cls], v))
    taken_cls, taken_grad = per_action[step.action]
    for lit, g in taken_grad.items():
        grad[taken_cls][lit] += g / s_taken
    for a in mask:
        cls, gdict = per_action[a]
        row = grad[cls]
        for lit, g in gdict.items():
            row[lit] -= g / z
    return grad


def policy_gradient(batch: list[list[StepRecord]], ruleset: RuleSet,
                    gamma: float, baseline: bool = True,
                    reward_to_go: bool = False, strict: bool = True) -> GradDict:
    """Batch-mean ascent direction of the discounted-return objective."""
    if not batch:
        raise TrainError("empty batch")
    whole = [whole_return(steps, gamma, steps[0].time if steps else 0.0)
             for steps in batch]
    base = sum(whole) / len(whole) if baseline else 0.0
    total = zero_grad()
    for steps, ret in zip(batch, whole):
        if reward_to_go:
            togo = returns([s.reward for s in steps],
                           [s.reward_time for s in steps], gamma)
        for idx, step in enumerate(steps):
            g = step_logprob_gradient(ruleset, step, strict=strict)
            if g is None:
                continue
            coef = (togo[idx] if reward_to_go else ret) - base
            grad_axpy(total, g, coef)
    for row in total.values():
        for lit in row:
            row[lit] /= len(batch)
    return total


# --- structure distillation -------------------------------------------------------

def structure_gradient(steps: list[StepRecord], ruleset: RuleSet,
                       step_weights: list[float] | None = None) -> GradDict:
    """Ascent direction of the structure-distillation objective.

    The class labels are exogenous facts of the guard rails, which
    partition every decision state one-hot: standby forces the zero
    request, a lone active task admits the full-power request, and an
    active sibling forces a bin.  Each template regresses onto its class's
    label at every step regardless of what was sampled.  The binned
    template additionally gets one row per rejected bin (truth 0 at that
    bin's slack) so it must stay slack-sensitive; those experience rows
    honor the per-step weights so unrewarded exploration is not distilled.
    At the clamp boundaries the interior slope is used when the target
    lies on the far side, giving the optimizer an escape direction out of
    the flat region.
    """
    total = zero_grad()
    if step_weights is None:
        step_weights = [1.0] * len(steps)

    def accumulate(cls: str, v, y: float, weight: float) -> None:
        t = ruleset.templates[cls]
        raw = rule_raw(t, v)
        s = min(1.0 - _BCE_CLIP, max(_BCE_CLIP, raw))
        dl_ds = (s - y) / (s * (1.0 - s))
        if (raw <= 0.0 and y == 1.0) or (raw >= 1.0 and y == 0.0):
            dsdw = {lit: -(1.0 - v[lit]) for lit in t.weights}
        else:
            dsdw = rule_gradient(t, v)
        row = total[cls]
        for lit, g in dsdw.items():
            row[lit] -= weight * dl_ds * g

    for step, sw in zip(steps, step_weights):
        mask_bins = sorted(b for b in step.mask if b in ruleset.x_bins)
        bins_forced = bool(mask_bins) and len(mask_bins) == len(step.mask)
        accumulate("NeedTokens_0", step.valuation,
                   1.0 if 0 in step.mask else 0.0, 1.0)
        accumulate("NeedTokens_100", step.valuation,
                   1.0 if 100 in step.mask else 0.0, 1.0)
        if not bins_forced:
            accumulate("NeedTokens_x", step.valuation, 0.0, 1.0)
            continue
        accumulate("NeedTokens_x",
                   _action_valuation(ruleset, step, step.action), 1.0, 1.0)
        if sw <= 0.0:
            continue
        # rejected-bin rows carry less total mass: their job is shaping the
        # slack response, not suppressing the shared literals
        rejected = [b for b in mask_bins if b != step.action]
        if rejected:
            neg_share = 0.4 / len(rejected)
            for b in rejected:
                accumulate("NeedTokens_x",
                           _action_valuation(ruleset, step, b), 0.0,
                           sw * neg_share)
    return total


def structure_step_weights(batch: list[list[StepRecord]], gamma: float,
                           ruleset: RuleSet,
                           floor: float = 0.4) -> list[list[float]]:
    """Per-step distillation weights for a batch of trajectories.

    Forced (singleton-mask) steps always weigh 1.  Free choices that agree
    with the policy's own argmax weigh at least the floor (cloning the
    policy's considered behavior); deviations weigh only their positive
    advantage against the batch mean return, so exploration that did not
    pay off is never distilled.
    """
    rets = [whole_return(steps, gamma, steps[0].time if steps else 0.0)
            for steps in batch]
    base = sum(rets) / len(rets)
    advs = [r - base for r in rets]
    positive = [a for a in advs if a > 0]
    scale = (sum(positive) / len(positive)) if positive else 0.0
    out = []
    for steps, adv in zip(batch, advs):
        kept = max(0.0, adv) / scale if scale > 0 else 0.0
        weights = []
        for s in steps:
            if len(s.mask) <= 1:
                weights.append(1.0)
                continue
            scores = action_scores(ruleset, s.valuation, s.slack_by_bin)
            admissible = sorted(s.mask)
            best = max(admissible, key=lambda a: scores[a])
            if s.action == best and scores[best] > 0.0:
                weights.append(max(floor, kept))
            else:
                weights.append(kept)
        out.append(weights)
    return out


# --- optimizer ----------------------------------------------------------------------

@dataclass
class AdamaxState:
    m: GradDict = field(default_factory=zero_grad)
    u: GradDict = field(default_factory=zero_grad)
    t: int = 0


def adamax_step(ruleset: RuleSet, grads: GradDict, state: AdamaxState,
                lr: float, beta1: float = 0.9, beta2: float = 0.999) -> None:
    """In-place ascent step; weights are projected back to >= 0."""
    state.t += 1
    correction = 1.0 - beta1 ** state.t
    for cls in ACTION_CLASSES:
        weights = ruleset.templates[cls].weights
        for lit in LITERALS:
            g = grads[cls][lit]
            state.m[cls][lit] = beta1 * state.m[cls][lit] + (1 - beta1) * g
            state.u[cls][lit] = max(beta2 * state.u[cls][lit], abs(g))
            u = state.u[cls][lit]
            if u <= 0.0:
                continue
            m_hat = state.m[cls][lit] / correction
            weights[lit] = max(0.0, weights[lit] + lr * m_hat / u)


# --- rollouts -------------------------------------------------------------------------

def sampling_decide(ruleset: RuleSet, rng: random.Random,
                    explore: float = 0.0):
    """Stochastic policy: sample foreground actions, uniform for background.

    With explore > 0 the sampler draws from a mixture with the uniform
    distribution over the mask, so no admissible action class starves while
    its template score sits at the clamp; such forced draws carry zero
    model probability and are excluded from the score-function gradient.
    """
    from .rules import action_distribution

    def decide(pe_id, obs, state):
        if obs.background or obs.task_gid is None:
            a = uniform_policy(obs)
            return a, 1.0
        dist = action_distribution(ruleset, obs.valuation, obs.mask,
                                   obs.slack_by_bin)
        if explore > 0.0 and len(obs.mask) > 1 and rng.random() < explore:
            # class-balanced draw: a class first, then an action within it,
            # so classes owning a single action are not starved of visits
            by_class: dict[str, list[int]] = {}
            for a in sorted(obs.mask):
                by_class.setdefault(action_class_of(a, ruleset.x_bins), []).append(a)
            classes = sorted(by_class)
            actions = by_class[classes[rng.randrange(len(classes))]]
            chosen = actions[rng.randrange(len(actions))]
            return chosen, dist[chosen]
        r = rng.random()
        acc = 0.0
        chosen = None
        for a in sorted(dist):
            p = dist[a]
            if p <= 0.0:
                continue
            acc += p
            if r <= acc:
                chosen = a
                break
        if chosen is None:
            chosen = max(sorted(dist), key=lambda a: dist[a])
        return chosen, dist[chosen]

    return decide


def rollout(scenario: Scenario, ruleset: RuleSet, seed: int,
            bins=DEFAULT_BINS, explore: float = 0.0,
            belief_tracker: "BeliefTracker | None" = None) -> EpisodeResult:
    """One stochastic episode under the current rules."""
    rng = random.Random(seed)
    result = run_episode(scenario, sampling_decide(ruleset, rng, explore), bins)
    if belief_tracker is not None:
        for pe, steps in result.steps.items():
            belief_tracker.attach(steps)
    return result


class ConstantModel:
    """Action-independent model table for the belief filter."""

    def __init__(self, matrix):
        self.matrix = matrix

    def __getitem__(self, action):
        return self.matrix


@dataclass
class BeliefTracker:
    """Convert observation trajectories into belief trajectories.

    Runs the discrete filter over each agent's recorded steps: the encoder
    maps a step to an observation index, and the filter's posterior is
    attached to the step.  Lets trainers consume belief states instead of
    raw observations without touching the simulator.
    """

    prior: tuple[float, ...]
    transition_model: object      # mapping action -> row-stochastic matrix
    observation_model: object     # mapping action -> state x obs likelihoods
    encode: "callable"            # StepRecord -> observation index

    def attach(self, steps: list[StepRecord]) -> None:
        from .belief import update_belief
        belief = list(self.prior)
        for step in steps:
            belief = list(update_belief(belief, step.action,
                                        self.encode(step),
                                        self.transition_model,
                                        self.observation_model))
            step.belief = tuple(belief)


# --- trainer ---------------------------------------------------------------------------

@dataclass
class TrainerConfig:
    episodes: int = 2000
    batch_size: int = 8
    lr: float = 0.02
    gamma: float = 0.99
    seed: int = 0
    structure_weight: float = 1.0
    explore: float = 0.1
    l1_decay: float = 0.05          # per-step shrink, as a fraction of lr
    normalize_advantage: bool = True
    baseline: bool = True
    reward_to_go: bool = False
    tie_agents: bool = True
    bins: tuple[int, ...] = DEFAULT_BINS
    belief_tracker: "BeliefTracker | None" = None   # attach belief states

    def __post_init__(self):
        if self.batch_size < 1:
            raise TrainError("batch_size must be >= 1")
        if not 0 <= self.gamma < 1:
            raise TrainError("gamma must be in [0, 1)")


@dataclass
class TrainResult:
    rulesets: dict[str, RuleSet]          # per trainable agent
    curve: list[tuple[int, float, float]]  # (batch, mean return, mean makespan)

    def shared_ruleset(self) -> RuleSet:
        return next(iter(self.rulesets.values()))


def trainable_agents(scenario: Scenario) -> list[str]:
    pes = set()
    for job in scenario.jobs:
        if job.background:
            continue
        for t in job.tasks:
            pes.add(t.pe)
    return sorted(pes)


def train(scenario: Scenario, config: TrainerConfig,
          initial: RuleSet | None = None) -> TrainResult:
    """Batched score-function training with the structure term.

    With tied agents (default) one rule set is shared and every foreground
    agent's trajectory contributes; untied mode keeps per-agent rule sets
    and trains one agent per batch round-robin with the others frozen.
    """
    agents = trainable_agents(scenario)
    if not agents:
        raise TrainError("scenario has no trainable foreground agents")
    if initial is None:
        initial = default_ruleset(config.seed, config.bins)

    if config.tie_agents:
        rulesets = {pe: initial for pe in agents}
    else:
        rulesets = {pe: initial.copy() for pe in agents}
    opt_states = {pe: AdamaxState() for pe in agents}
    if config.tie_agents:
        shared_state = AdamaxState()

    curve: list[tuple[int, float, float]] = []
    n_batches = config.episodes // config.batch_size
    fg_jobs = [j.job_id for j in scenario.jobs if not j.background]
    episode_seed = config.seed * 1_000_003 + 17

    for batch_idx in range(n_batches):
        driver = agents[batch_idx % len(agents)]
        ruleset = rulesets[driver]
        episodes: list[EpisodeResult] = []
        for k in range(config.batch_size):
            episodes.append(rollout(scenario, ruleset, seed=episode_seed,
                                    bins=config.bins, explore=config.explore,
                                    belief_tracker=config.belief_tracker))
            episode_seed += 1

        if config.tie_agents:
            batch_steps = [ep.steps[pe] for ep in episodes for pe in agents]
        else:
            batch_steps = [ep.steps[driver] for ep in episodes]
        grad = policy_gradient(batch_steps, ruleset, config.gamma,
                               baseline=config.baseline,
                               reward_to_go=config.reward_to_go,
                               strict=(config.explore <= 0.0))
        if config.normalize_advantage:
            # keep the score-function term on a seed-independent scale so
            # the structure mix ratio does not ride the raw return spread
            rets = [whole_return(s, config.gamma, s[0].time if s else 0.0)
                    for s in batch_steps]
            mean = sum(rets) / len(rets)
            std = math.sqrt(sum((r - mean) ** 2 for r in rets) / len(rets))
            if std > 1e-9:
                for row in grad.values():
                    for lit in row:
                        row[lit] /= std
        if config.structure_weight > 0:
            struct = zero_grad()
            weights = structure_step_weights(batch_steps, config.gamma, ruleset)
            for steps, sw in zip(batch_steps, weights):
                grad_axpy(struct, structure_gradient(steps, ruleset, sw))
            grad_axpy(grad, struct, config.structure_weight / len(batch_steps))

        opt = shared_state if config.tie_agents else opt_states[driver]
        adamax_step(ruleset, grad, opt, config.lr)
        if config.l1_decay > 0:
            # soft-thresholding under the nonnegativity projection: weights
            # without sustained gradient support shrink out of the extracted
            # rules, supported ones are re-pushed every batch
            shrink = config.lr * config.l1_decay
            for cls in ACTION_CLASSES:
                w = ruleset.templates[cls].weights
                for lit in LITERALS:
                    w[lit] = max(0.0, w[lit] - shrink)

        mean_ret = sum(whole_return(s, config.gamma, s[0].time if s else 0.0)
                       for s in batch_steps) / len(batch_steps)
        mean_mk = sum(ep.makespans[j] for ep in episodes for j in fg_jobs) \
            / (len(episodes) * len(fg_jobs))
        curve.append((batch_idx, mean_ret, mean_mk))

    return TrainResult(rulesets=rulesets, curve=curve)

"""Deterministic event-driven simulator of DAG jobs on shared-power PEs.

Tasks progress at rate * tokens/100 work units per time unit; the token
budget across all processing elements is fixed at 100.  Decisions happen
only at events (job arrivals, task completions): every agent observes,
is masked by the guard rails, and requests a token percentage.  Rewards
accumulate per integer tick between events plus a completion indicator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .bounds import Bounds
from .rules import (
    DEFAULT_BINS,
    SiblingTask,
    SlackContext,
    guard_rail_mask,
    make_valuation,
    slack_value,
)

TOKEN_BUDGET = 100.0

ENV_VARS = ("HPM", "POT", "LL", "ODTCI", "ODTMI", "HPD", "LC", "EC")


class ScenarioError(ValueError):
    """Invalid scenario description."""


class SimulationError(RuntimeError):
    """Runtime failure such as a deadlocked schedule."""


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    work: float
    sub_deadline: float
    pe: str
    parents: tuple[str, ...] = ()
    kind: str = "*"


@dataclass(frozen=True)
class JobSpec:
    job_id: str
    tasks: tuple[TaskSpec, ...]
    arrival: float = 0.0
    priority: bool = False
    background: bool = False
    a_max: int = 100


@dataclass(frozen=True)
class PeSpec:
    pe_id: str
    pe_type: str = "CPU"
    rates: tuple[tuple[str, float], ...] = (("*", 1.0),)

    def rate_for(self, kind: str) -> float:
        table = dict(self.rates)
        return table.get(kind, table.get("*", 1.0))


@dataclass(frozen=True)
class ObsModel:
    width: float = 0.0
    staleness: float = 0.0


@dataclass(frozen=True)
class Scenario:
    name: str
    pes: tuple[PeSpec, ...]
    jobs: tuple[JobSpec, ...]
    load: str = "light"
    env: tuple[tuple[str, int], ...] = ()
    obs: tuple[tuple[str, ObsModel], ...] = ()
    seed: int = 0

    def env_value(self, var: str) -> int:
        return dict(self.env).get(var, 0)


def validate_scenario(sc: Scenario) -> None:
    pe_ids = {p.pe_id for p in sc.pes}
    if len(pe_ids) != len(sc.pes):
        raise ScenarioError("duplicate PE ids")
    for p in sc.pes:
        if any(r <= 0 for _, r in p.rates):
            raise ScenarioError(f"pe {p.pe_id}: rates must be positive")
    job_ids = set()
    for job in sc.jobs:
        if job.job_id in job_ids:
            raise ScenarioError(f"duplicate job id {job.job_id}")
        job_ids.add(job.job_id)
        if not 0 <= job.a_max <= 100:
            raise ScenarioError(f"job {job.job_id}: a_max outside [0, 100]")
        tids = set()
        for t in job.tasks:
            if t.task_id in tids:
                raise ScenarioError(f"job {job.job_id}: duplicate task {t.task_id}")
            tids.add(t.task_id)
            if t.work <= 0:
                raise ScenarioError(f"task {t.task_id}: work must be positive")
            if t.sub_deadline <= 0:
                raise ScenarioError(f"task {t.task_id}: sub-deadline must be positive")
            if t.pe not in pe_ids:
                raise ScenarioError(f"task {t.task_id}: unknown pe {t.pe!r}")
            if t.task_id in t.parents:
                raise ScenarioError(f"task {t.task_id}: self-parenting")
        for t in job.tasks:
            for par in t.parents:
                if par not in tids:
                    raise ScenarioError(f"task {t.task_id}: unknown parent {par!r}")
        # cycle check by repeated stripping
        remaining = {t.task_id: set(t.parents) for t in job.tasks}
        while remaining:
            free = [tid for tid, ps in remaining.items() if not ps]
            if not free:
                raise ScenarioError(f"job {job.job_id}: dependency cycle")
            for tid in free:
                del remaining[tid]
            for ps in remaining.values():
                ps.difference_update(free)
        if not any(not t.parents for t in job.tasks):
            raise ScenarioError(f"job {job.job_id}: no root task")
    for var, _ in sc.env:
        if var not in ENV_VARS:
            raise ScenarioError(f"unknown environment variable {var!r}")
    for var, model in sc.obs:
        if var not in ENV_VARS:
            raise ScenarioError(f"unknown observed variable {var!r}")
        if not 0 <= model.width <= 1 or model.staleness < 0:
            raise ScenarioError(f"obs {var}: bad width/staleness")


class TaskRun:
    __slots__ = ("spec", "job_id", "gid", "done_work", "completed_at",
                 "ready_at", "first_start")

    def __init__(self, spec: TaskSpec, job_id: str):
        self.spec = spec
        self.job_id = job_id
        self.gid = f"{job_id}.{spec.task_id}"
        self.done_work = 0.0
        self.completed_at: float | None = None
        self.ready_at: float | None = None
        self.first_start: float | None = None

    @property
    def done(self) -> bool:
        return self.completed_at is not None

    @property
    def ready(self) -> bool:
        return self.ready_at is not None and not self.done

    @property
    def remaining(self) -> float:
        return max(0.0, self.spec.work - self.done_work)


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str          # "job_arrived" | "task_completed" | "job_completed"
    ref: str


@dataclass
class AgentObservation:
    pe_id: str
    task_gid: str | None
    job_id: str | None
    background: bool
    task_assigned: bool
    parents_completed: bool
    sibling_active: bool
    active_sibling_count: int
    valuation: dict[str, float]
    slack_by_bin: dict[int, float] | None
    env_bounds: dict[str, Bounds]
    mask: frozenset[int]
    a_max: int


class SimState:
    def __init__(self, scenario: Scenario, bins=DEFAULT_BINS):
        validate_scenario(scenario)
        self.scenario = scenario
        self.bins = tuple(bins)
        self.clock = 0.0
        self.pes = {p.pe_id: p for p in scenario.pes}
        self.tasks: dict[str, TaskRun] = {}
        self.jobs = {j.job_id: j for j in scenario.jobs}
        self.job_arrived: dict[str, bool] = {}
        self.job_done_at: dict[str, float] = {}
        for job in scenario.jobs:
            self.job_arrived[job.job_id] = False
            for t in job.tasks:
                self.tasks[f"{job.job_id}.{t.task_id}"] = TaskRun(t, job.job_id)
        self.alloc: dict[str, float] = {p.pe_id: 0.0 for p in scenario.pes}
        self.prev_event_time = 0.0
        # snapshot of the running assignment installed by apply_allocations;
        # used for tick-reward attribution over the following interval
        self.interval_running: dict[str, str] = {}
        self.events: list[SimEvent] = []
        start = min((j.arrival for j in scenario.jobs), default=0.0)
        self.clock = start
        self.prev_event_time = start
        self._arrive_due()

    # -- bookkeeping -------------------------------------------------------

    def _arrive_due(self) -> None:
        for job_id in sorted(self.jobs):
            job = self.jobs[job_id]
            if not self.job_arrived[job_id] and job.arrival <= self.clock:
                self.job_arrived[job_id] = True
                self.events.append(SimEvent(self.clock, "job_arrived", job_id))
                for t in job.tasks:
                    if not t.parents:
                        self.tasks[f"{job_id}.{t.task_id}"].ready_at = max(
                            job.arrival, self.clock)

    def _refresh_ready(self, job_id: str) -> None:
        for t in self.jobs[job_id].tasks:
            run = self.tasks[f"{job_id}.{t.task_id}"]
            if run.done or run.ready_at is not None:
                continue
            parents = [self.tasks[f"{job_id}.{p}"] for p in t.parents]
            if all(p.done for p in parents):
                run.ready_at = self.clock

    def tasks_on_pe(self, pe_id: str) -> list[TaskRun]:
        return [t for t in self.tasks.values()
                if t.spec.pe == pe_id and self.job_arrived[t.job_id]]

    def current_task(self, pe_id: str) -> TaskRun | None:
        ready = [t for t in self.tasks_on_pe(pe_id) if t.ready]
        if not ready:
            return None
        return min(ready, key=lambda t: (t.ready_at, t.gid))

    def assigned_task(self, pe_id: str) -> TaskRun | None:
        """Current ready task, else the earliest still-blocked one."""
        cur = self.current_task(pe_id)
        if cur is not None:
            return cur
        blocked = [t for t in self.tasks_on_pe(pe_id) if not t.done]
        if not blocked:
            return None
        return min(blocked, key=lambda t: t.gid)

    def active_siblings(self, task: TaskRun) -> list[TaskRun]:
        """Ready same-job tasks still holding work (a finished-but-not-yet
        -processed task no longer contends)."""
        return [t for t in self.tasks.values()
                if t.job_id == task.job_id and t.gid != task.gid
                and t.ready and t.remaining > 0.0]

    def rate_of(self, task: TaskRun) -> float:
        return self.pes[task.spec.pe].rate_for(task.spec.kind)

    def unfinished(self) -> list[TaskRun]:
        return [t for t in self.tasks.values() if not t.done]

    def foreground_complete(self) -> bool:
        return all(self.job_done_at.get(j.job_id) is not None
                   for j in self.scenario.jobs if not j.background)


# --- observation ------------------------------------------------------------

def observe(state: SimState, pe_id: str) -> AgentObservation:
    """Agent-local predicates, slack context, and noisy environment bounds."""
    if pe_id not in state.pes:
        raise ScenarioError(f"unknown pe {pe_id!r}")
    task = state.assigned_task(pe_id)
    cur = state.current_task(pe_id)
    task_assigned = task is not None
    parents_completed = cur is not None
    # parallel work is judged from the assigned task's job snapshot, so a
    # blocked task still sees its running co-tasks
    siblings = state.active_siblings(task) if task is not None else []
    sibling_active = bool(siblings)

    slack_by_bin: dict[int, float] | None = None
    base_slack = 0.0
    if task is not None and task.remaining > 0.0 and siblings:
        ctx = SlackContext(
            work=task.remaining, rate=state.rate_of(task),
            sub_deadline=task.spec.sub_deadline,
            siblings=tuple(SiblingTask(s.remaining, state.rate_of(s),
                                       s.spec.sub_deadline)
                           for s in sorted(siblings, key=lambda t: t.gid)))
        slack_by_bin = {b: slack_value(b, ctx) for b in state.bins}
        base_slack = slack_value(100.0 / (len(siblings) + 1), ctx)
    elif cur is not None:
        # no concurrency: per-bin slack grows with the share, and the
        # base entry tracks progress so solo states stay diverse
        slack_by_bin = {b: b / 100.0 for b in state.bins}
        base_slack = cur.done_work / cur.spec.work if cur.spec.work else 0.0

    valuation = make_valuation(float(task_assigned), float(parents_completed),
                               float(sibling_active), base_slack)

    env_bounds: dict[str, Bounds] = {}
    stale_gap = state.clock - state.prev_event_time
    for var, model in state.scenario.obs:
        width = min(1.0, model.width + model.staleness * stale_gap)
        if state.scenario.env_value(var):
            env_bounds[var] = Bounds(max(0.0, 1.0 - width), 1.0)
        else:
            env_bounds[var] = Bounds(0.0, min(1.0, width))

    mask = guard_rail_mask(task_assigned, parents_completed, sibling_active,
                           state.bins)
    job = state.jobs[task.job_id] if task is not None else None
    if job is not None and job.a_max < 100:
        # the action space is bounded by the job's token ceiling
        capped = frozenset(a for a in mask if a <= job.a_max)
        if not capped:
            raise ScenarioError(
                f"job {job.job_id}: a_max {job.a_max} leaves no admissible action")
        mask = capped
    return AgentObservation(
        pe_id=pe_id, task_gid=(task.gid if task else None),
        job_id=(task.job_id if task else None),
        background=(job.background if job else False),
        task_assigned=task_assigned, parents_completed=parents_completed,
        sibling_active=sibling_active, active_sibling_count=len(siblings),
        valuation=valuation, slack_by_bin=slack_by_bin, env_bounds=env_bounds,
        mask=mask, a_max=(job.a_max if job else 0))


# --- allocation --------------------------------------------------------------

def apply_allocations(state: SimState, requests: dict[str, float]) -> None:
    """Install token allocations; over-subscription rescales to the budget."""
    cleaned: dict[str, float] = {}
    for pe_id in sorted(state.pes):
        r = float(requests.get(pe_id, 0.0))
        cur = state.current_task(pe_id)
        a_max = state.jobs[cur.job_id].a_max if cur is not None else 0
        if r < 0 or r > a_max:
            raise ScenarioError(
                f"pe {pe_id}: request {r} outside [0, {a_max}]")
        cleaned[pe_id] = r if cur is not None else 0.0
    total = sum(cleaned.values())
    scale = TOKEN_BUDGET / total if total > TOKEN_BUDGET else 1.0
    state.alloc = {pe: r * scale for pe, r in cleaned.items()}
    state.interval_running = {}
    for pe_id, tokens in state.alloc.items():
        cur = state.current_task(pe_id)
        if cur is not None and tokens > 0:
            state.interval_running[pe_id] = cur.gid
            if cur.first_start is None:
                cur.first_start = state.clock


# --- event stepping ------------------------------------------------------------

def step_to_next_event(state: SimState) -> SimEvent:
    """Advance to the earliest completion or arrival under current allocations."""
    candidates: list[tuple[float, int, str]] = []
    for job_id in sorted(state.jobs):
        if not state.job_arrived[job_id]:
            candidates.append((state.jobs[job_id].arrival, 0, job_id))
    for pe_id in sorted(state.pes):
        gid = state.interval_running.get(pe_id)
        if gid is None:
            continue
        task = state.tasks[gid]
        if task.done:
            continue
        speed = state.rate_of(task) * state.alloc[pe_id] / TOKEN_BUDGET
        if speed <= 0:
            continue
        candidates.append((state.clock + task.remaining / speed, 1, gid))
    if not candidates:
        if state.unfinished():
            raise SimulationError(
                "deadlock: unfinished tasks but nothing can progress")
        raise SimulationError("no pending events")
    t, kind_rank, ref = min(candidates)

    dt = t - state.clock
    for pe_id, gid in state.interval_running.items():
        task = state.tasks[gid]
        if task.done:
            continue
        speed = state.rate_of(task) * state.alloc[pe_id] / TOKEN_BUDGET
        task.done_work = min(task.spec.work, task.done_work + speed * dt)
    state.clock = t

    if kind_rank == 0:
        state._arrive_due()     # appends the arrival event(s)
        return SimEvent(t, "job_arrived", ref)

    task = state.tasks[ref]
    task.done_work = task.spec.work
    task.completed_at = t
    state._refresh_ready(task.job_id)
    ev = SimEvent(t, "task_completed", ref)
    state.events.append(ev)
    if all(st.done for st in state.tasks.values() if st.job_id == task.job_id):
        state.job_done_at[task.job_id] = t
        state.events.append(SimEvent(t, "job_completed", task.job_id))
    return ev


# --- rewards ----------------------------------------------------------------------

def _interval_fp(state: SimState, gid: str, pe_id: str) -> float:
    """Fractional progress per tick for the installed allocation."""
    task = state.tasks[gid]
    return state.rate_of(task) * state.alloc[pe_id] / TOKEN_BUDGET / task.spec.work


def per_step_reward(state: SimState, pe_id: str, tick: float) -> float:
    """Appendix-style tick reward for the currently installed interval.

    With running siblings, rewards headway balance: for each sibling j,
    0.25 - 0.25 * |h_i - h_j| / (h_i + h_j) with h = sub_deadline * fp.
    Alone, cst * (fp - 0.99) * 0.25 with cst the service time in ticks.
    """
    gid = state.interval_running.get(pe_id)
    if gid is None:
        raise SimulationError(f"pe {pe_id}: no active task")
    task = state.tasks[gid]
    fp_i = _interval_fp(state, gid, pe_id)
    h_i = task.spec.sub_deadline * fp_i
    sib_pes = [p for p, g in state.interval_running.items()
               if p != pe_id and state.tasks[g].job_id == task.job_id]
    if sib_pes:
        total = 0.0
        for p in sorted(sib_pes):
            sib = state.tasks[state.interval_running[p]]
            fp_j = _interval_fp(state, sib.gid, p)
            h_j = sib.spec.sub_deadline * fp_j
            if h_i + h_j == 0:
                total += 0.25
            else:
                total += 0.25 - 0.25 * abs(h_i - h_j) / (h_i + h_j)
        return total
    cst = max(0.0, tick - (task.first_start if task.first_start is not None else tick))
    return cst * (fp_i - 0.99) * 0.25


def event_reward(state: SimState, pe_id: str, since: float, at: float) -> float:
    """Completion indicator at the event plus tick rewards over (since, at]."""
    if at < since:
        raise SimulationError("event interval runs backwards")
    reward = 0.0
    gid = state.interval_running.get(pe_id)
    if gid is not None and state.tasks[gid].completed_at == at:
        reward += 1.0
    if gid is not None:
        first = math.floor(since) + 1
        last = math.floor(at)
        for tick in range(first, last + 1):
            reward += per_step_reward(state, pe_id, float(tick))
    return reward


def makespan(state: SimState, job_id: str) -> float:
    """Completion time of a job from its arrival to its last task."""
    if job_id not in state.jobs:
        raise ScenarioError(f"unknown job {job_id!r}")
    done = state.job_done_at.get(job_id)
    if done is None:
        raise SimulationError(f"job {job_id} incomplete")
    return done - state.jobs[job_id].arrival


# --- baseline policy ---------------------------------------------------------------

def uniform_policy(obs: AgentObservation) -> int:
    """Even token split over concurrently active same-job tasks."""
    if obs.mask == frozenset({0}):
        return 0
    if not obs.sibling_active:
        return max(obs.mask)        # 100 unless capped by the job's a_max
    share = math.floor(100.0 / (obs.active_sibling_count + 1))
    bins = sorted(b for b in obs.mask if b != 100)
    return min(bins, key=lambda b: (abs(b - share), b))


# --- episode runner ------------------------------------------------------------------

@dataclass
class StepRecord:
    pe_id: str
    time: float
    action: int
    prob: float
    valuation: dict[str, float]
    slack_by_bin: dict[int, float] | None
    mask: frozenset[int]
    env_bounds: dict[str, Bounds]
    reward: float = 0.0
    reward_time: float = 0.0
    belief: tuple[float, ...] | None = None   # filled by the belief tracker


@dataclass
class EpisodeResult:
    events: list[SimEvent]
    steps: dict[str, list[StepRecord]]
    makespans: dict[str, float]
    allocations_log: list[tuple[float, dict[str, float]]]
    event_log: list[dict]
    state: SimState


def run_episode(scenario: Scenario, decide, bins=DEFAULT_BINS,
                max_events: int = 100000) -> EpisodeResult:
    """Run until every foreground job completes.

    decide(pe_id, obs, state) -> (action_percent, probability); called for
    every PE at every event in sorted PE order.
    """
    state = SimState(scenario, bins)
    steps: dict[str, list[StepRecord]] = {p.pe_id: [] for p in scenario.pes}
    alloc_log: list[tuple[float, dict[str, float]]] = []
    event_log: list[dict] = [
        {"time": e.time, "kind": e.kind, "ref": e.ref, "allocations": {}}
        for e in state.events]
    logged = len(state.events)

    def decision_round():
        requests = {}
        pending: dict[str, StepRecord] = {}
        for pe_id in sorted(state.pes):
            obs = observe(state, pe_id)
            action, prob = decide(pe_id, obs, state)
            requests[pe_id] = action
            pending[pe_id] = StepRecord(
                pe_id=pe_id, time=state.clock, action=action, prob=prob,
                valuation=dict(obs.valuation),
                slack_by_bin=(dict(obs.slack_by_bin)
                              if obs.slack_by_bin is not None else None),
                mask=obs.mask, env_bounds=dict(obs.env_bounds))
        apply_allocations(state, requests)
        alloc_log.append((state.clock, dict(state.alloc)))
        for pe_id, rec in pending.items():
            steps[pe_id].append(rec)

    decision_round()
    n_events = 0
    while not state.foreground_complete():
        since = state.clock
        ev = step_to_next_event(state)
        n_events += 1
        if n_events > max_events:
            raise SimulationError("event budget exhausted")
        while logged < len(state.events):
            e = state.events[logged]
            event_log.append({"time": e.time, "kind": e.kind, "ref": e.ref,
                              "allocations": dict(state.alloc)})
            logged += 1
        for pe_id in sorted(state.pes):
            if steps[pe_id]:
                r = event_reward(state, pe_id, since, ev.time)
                steps[pe_id][-1].reward += r
                steps[pe_id][-1].reward_time = ev.time
        state.prev_event_time = ev.time
        if not state.foreground_complete():
            decision_round()

    makespans = {j.job_id: makespan(state, j.job_id)
                 for j in scenario.jobs if j.job_id in state.job_done_at}
    return EpisodeResult(events=list(state.events), steps=steps,
                         makespans=makespans, allocations_log=alloc_log,
                         event_log=event_log, state=state)

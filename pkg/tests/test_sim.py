"""Simulator tests: event timing, allocation, observation, rewards, makespan."""

import math

import pytest

from plnnsim.sim import (
    EpisodeResult,
    JobSpec,
    ObsModel,
    PeSpec,
    Scenario,
    ScenarioError,
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

TOL = 1e-9


def single_task_scenario(work=100.0, rate=1.0):
    return Scenario(
        name="single",
        pes=(PeSpec("p0", rates=(("*", rate),)),),
        jobs=(JobSpec("j", (TaskSpec("t0", work, 100.0, "p0"),)),),
    )


def twin_scenario(work=100.0, sd=100.0):
    return Scenario(
        name="twins",
        pes=(PeSpec("p0"), PeSpec("p1")),
        jobs=(JobSpec("j", (
            TaskSpec("t0", work, sd, "p0"),
            TaskSpec("t1", work, sd, "p1"),
        )),),
    )


def chain_scenario():
    return Scenario(
        name="chain",
        pes=(PeSpec("p0"),),
        jobs=(JobSpec("j", (
            TaskSpec("t0", 40.0, 40.0, "p0"),
            TaskSpec("t1", 60.0, 60.0, "p0", parents=("t0",)),
        )),),
    )


def uniform_decide(pe_id, obs, state):
    return uniform_policy(obs), 1.0


# --- validation ----------------------------------------------------------------

def test_scenario_validation_errors():
    with pytest.raises(ScenarioError, match="unknown pe"):
        SimState(Scenario("x", (PeSpec("p0"),),
                          (JobSpec("j", (TaskSpec("t", 1, 1, "nope"),)),)))
    with pytest.raises(ScenarioError, match="unknown parent"):
        SimState(Scenario("x", (PeSpec("p0"),),
                          (JobSpec("j", (TaskSpec("t", 1, 1, "p0",
                                                  parents=("ghost",)),)),)))
    with pytest.raises(ScenarioError, match="cycle"):
        SimState(Scenario("x", (PeSpec("p0"),), (JobSpec("j", (
            TaskSpec("a", 1, 1, "p0", parents=("b",)),
            TaskSpec("b", 1, 1, "p0", parents=("a",)),
        )),)))
    with pytest.raises(ScenarioError, match="work"):
        SimState(Scenario("x", (PeSpec("p0"),),
                          (JobSpec("j", (TaskSpec("t", 0, 1, "p0"),)),)))


# --- event stepping ---------------------------------------------------------------

def test_full_speed_completion_time():
    st = SimState(single_task_scenario())
    apply_allocations(st, {"p0": 100})
    ev = step_to_next_event(st)
    assert ev.kind == "task_completed"
    assert ev.time == pytest.approx(100.0, abs=TOL)


def test_half_speed_doubles_time():
    st = SimState(single_task_scenario())
    apply_allocations(st, {"p0": 50})
    ev = step_to_next_event(st)
    assert ev.time == pytest.approx(200.0, abs=TOL)


def test_unequal_split_orders_events():
    st = SimState(twin_scenario())
    apply_allocations(st, {"p0": 60, "p1": 40})
    ev = step_to_next_event(st)
    assert ev.ref == "j.t0"
    assert ev.time == pytest.approx(100 / 0.6, abs=1e-9)
    st.prev_event_time = ev.time
    ev2 = step_to_next_event(st)
    assert ev2.ref == "j.t1"
    assert ev2.time == pytest.approx(250.0, abs=1e-9)
    assert ev2.time >= ev.time


def test_progress_conservation_exact():
    for tokens in (10, 30, 50, 70, 100):
        st = SimState(single_task_scenario(work=77.0, rate=1.3))
        apply_allocations(st, {"p0": tokens})
        ev = step_to_next_event(st)
        assert ev.time == pytest.approx(77.0 / (1.3 * tokens / 100), rel=1e-12)


def test_deadlock_detected():
    st = SimState(single_task_scenario())
    apply_allocations(st, {"p0": 0})
    with pytest.raises(SimulationError, match="deadlock"):
        step_to_next_event(st)


# --- allocations ------------------------------------------------------------------

def test_allocation_sole_task_full_budget():
    st = SimState(single_task_scenario())
    apply_allocations(st, {"p0": 100})
    assert st.alloc["p0"] == 100.0


def test_allocation_proportional_rescale():
    st = SimState(twin_scenario())
    apply_allocations(st, {"p0": 60, "p1": 60})
    assert st.alloc["p0"] == pytest.approx(50.0)
    assert st.alloc["p1"] == pytest.approx(50.0)


def test_allocation_out_of_range_rejected():
    st = SimState(single_task_scenario())
    with pytest.raises(ScenarioError, match="outside"):
        apply_allocations(st, {"p0": 120})
    with pytest.raises(ScenarioError, match="outside"):
        apply_allocations(st, {"p0": -5})


def test_allocation_respects_job_a_max():
    sc = Scenario("x", (PeSpec("p0"),),
                  (JobSpec("j", (TaskSpec("t", 10, 10, "p0"),), a_max=60),))
    st = SimState(sc)
    with pytest.raises(ScenarioError, match="outside"):
        apply_allocations(st, {"p0": 70})
    apply_allocations(st, {"p0": 60})
    assert st.alloc["p0"] == 60.0


def test_token_conservation_after_rescale():
    sc = Scenario("x", tuple(PeSpec(f"p{i}") for i in range(4)),
                  (JobSpec("j", tuple(TaskSpec(f"t{i}", 10, 10, f"p{i}")
                                      for i in range(4))),))
    st = SimState(sc)
    apply_allocations(st, {f"p{i}": 90 for i in range(4)})
    assert sum(st.alloc.values()) == pytest.approx(100.0, abs=TOL)


# --- observation -------------------------------------------------------------------

def test_observe_idle_pe():
    sc = Scenario("x", (PeSpec("p0"), PeSpec("p1")),
                  (JobSpec("j", (TaskSpec("t", 10, 10, "p0"),)),))
    st = SimState(sc)
    obs = observe(st, "p1")
    assert not obs.task_assigned
    assert obs.valuation["TaskAssigned"] == 0.0
    assert obs.mask == frozenset({0})


def test_observe_blocked_task_parents_incomplete():
    st = SimState(chain_scenario())
    # t0 ready, t1 blocked behind it; p0's current task is t0
    obs = observe(st, "p0")
    assert obs.task_gid == "j.t0"
    assert obs.parents_completed
    apply_allocations(st, {"p0": 100})
    step_to_next_event(st)
    obs2 = observe(st, "p0")
    assert obs2.task_gid == "j.t1"
    assert obs2.parents_completed       # t0 finished, t1 now ready


def test_observe_siblings_listed():
    st = SimState(twin_scenario())
    obs = observe(st, "p0")
    assert obs.sibling_active and obs.active_sibling_count == 1
    assert obs.valuation["SiblingTasks"] == 1.0
    assert obs.slack_by_bin is not None
    assert obs.slack_by_bin[50] == pytest.approx(1.0)


def test_observe_env_bounds_and_staleness():
    sc = Scenario(
        "x", (PeSpec("p0"),),
        (JobSpec("j", (TaskSpec("t", 10, 10, "p0"),)),),
        env=(("LL", 1), ("EC", 0)),
        obs=(("LL", ObsModel(width=0.1, staleness=0.01)),
             ("EC", ObsModel(width=0.2, staleness=0.0))),
    )
    st = SimState(sc)
    obs = observe(st, "p0")
    assert obs.env_bounds["LL"].lower == pytest.approx(0.9)
    assert obs.env_bounds["LL"].upper == 1.0
    assert obs.env_bounds["EC"].lower == 0.0
    assert obs.env_bounds["EC"].upper == pytest.approx(0.2)
    st.clock = 20.0     # widen by staleness 0.01 * 20
    obs2 = observe(st, "p0")
    assert obs2.env_bounds["LL"].lower == pytest.approx(1 - 0.3)
    assert obs2.env_bounds["EC"].upper == pytest.approx(0.2)


# --- rewards ------------------------------------------------------------------------

def test_per_step_reward_balanced_headway():
    st = SimState(twin_scenario())
    apply_allocations(st, {"p0": 50, "p1": 50})
    assert per_step_reward(st, "p0", 1.0) == pytest.approx(0.25)


def test_per_step_reward_three_to_one_headway():
    # same sub-deadlines and work, allocations 75/25 give h_i = 3 h_j
    st = SimState(twin_scenario())
    apply_allocations(st, {"p0": 75, "p1": 25})
    got = per_step_reward(st, "p0", 1.0)
    assert got == pytest.approx(0.25 - 0.25 * 0.5, abs=TOL)    # 0.125


def test_per_step_reward_solo_zero_crossing():
    # fp = 0.99 exactly: rate 0.99, work 1, full tokens
    sc = single_task_scenario(work=1.0, rate=0.99)
    st = SimState(sc)
    apply_allocations(st, {"p0": 100})
    assert per_step_reward(st, "p0", 5.0) == pytest.approx(0.0, abs=TOL)


def test_event_reward_indicator_plus_steps():
    st = SimState(twin_scenario(work=4.0, sd=10.0))
    apply_allocations(st, {"p0": 50, "p1": 50})
    since = st.clock
    ev = step_to_next_event(st)
    # completion at t = 8; ticks 1..8 at 0.25 each, plus the indicator
    assert ev.time == pytest.approx(8.0)
    r = event_reward(st, "p0", since, ev.time)
    assert r == pytest.approx(1.0 + 8 * 0.25)


def test_event_reward_idle_agent_zero():
    sc = Scenario("x", (PeSpec("p0"), PeSpec("p1")),
                  (JobSpec("j", (TaskSpec("t", 10, 10, "p0"),)),))
    st = SimState(sc)
    apply_allocations(st, {"p0": 100, "p1": 0})
    since = st.clock
    ev = step_to_next_event(st)
    assert event_reward(st, "p1", since, ev.time) == 0.0


# --- makespan -----------------------------------------------------------------------

def test_makespan_single_task():
    result = run_episode(single_task_scenario(), uniform_decide)
    assert result.makespans["j"] == pytest.approx(100.0)


def test_makespan_chain_is_sum_of_solo_times():
    result = run_episode(chain_scenario(), uniform_decide)
    assert result.makespans["j"] == pytest.approx(100.0)


def test_makespan_even_split_is_bin_optimal_for_twins():
    base = run_episode(twin_scenario(), uniform_decide)
    assert base.makespans["j"] == pytest.approx(200.0)

    def fixed(split):
        def decide(pe_id, obs, state):
            if obs.mask == frozenset({0}):
                return 0, 1.0
            return (split if pe_id == "p0" else 100 - split), 1.0
        return decide

    for split in range(10, 100, 10):
        r = run_episode(twin_scenario(), fixed(split))
        assert r.makespans["j"] >= base.makespans["j"] - TOL


def test_makespan_incomplete_job_errors():
    st = SimState(single_task_scenario())
    with pytest.raises(SimulationError, match="incomplete"):
        makespan(st, "j")
    with pytest.raises(ScenarioError, match="unknown job"):
        makespan(st, "nope")


def test_makespan_lower_bounded_by_critical_path():
    result = run_episode(chain_scenario(), uniform_decide)
    critical = 40.0 + 60.0      # both tasks at full tokens, rate 1
    assert result.makespans["j"] >= critical - TOL


# --- uniform policy -----------------------------------------------------------------

def test_uniform_policy_cases():
    st = SimState(twin_scenario())
    obs = observe(st, "p0")
    assert uniform_policy(obs) == 50
    st1 = SimState(single_task_scenario())
    assert uniform_policy(observe(st1, "p0")) == 100
    sc = Scenario("x", (PeSpec("p0"), PeSpec("p1")),
                  (JobSpec("j", (TaskSpec("t", 10, 10, "p0"),)),))
    st2 = SimState(sc)
    assert uniform_policy(observe(st2, "p1")) == 0


def test_uniform_policy_three_way():
    sc = Scenario("x", tuple(PeSpec(f"p{i}") for i in range(3)),
                  (JobSpec("j", tuple(TaskSpec(f"t{i}", 30, 30, f"p{i}")
                                      for i in range(3))),))
    st = SimState(sc)
    assert uniform_policy(observe(st, "p0")) == 30   # floor(100/3) -> nearest bin


# --- episode running ---------------------------------------------------------------

def test_episode_determinism():
    runs = []
    for _ in range(2):
        r = run_episode(twin_scenario(), uniform_decide)
        runs.append([(e.time, e.kind, e.ref) for e in r.events])
    assert runs[0] == runs[1]


def test_episode_event_stream_wellformed():
    r = run_episode(chain_scenario(), uniform_decide)
    times = [e.time for e in r.events]
    assert times == sorted(times)
    completions = [e.ref for e in r.events if e.kind == "task_completed"]
    assert len(completions) == len(set(completions)) == 2
    assert any(e.kind == "job_completed" for e in r.events)


def test_episode_records_rewards_per_decision():
    r = run_episode(twin_scenario(work=4.0, sd=10.0), uniform_decide)
    steps = r.steps["p0"]
    # one decision at arrival; both tasks finish simultaneously at t = 8
    assert steps[0].reward == pytest.approx(1.0 + 8 * 0.25)


def test_background_jobs_share_budget():
    sc = Scenario(
        "x",
        (PeSpec("p0"), PeSpec("bg0")),
        (JobSpec("j", (TaskSpec("t", 100, 100, "p0"),)),
         JobSpec("bg", (TaskSpec("b", 100, 100, "bg0"),), background=True)),
    )
    r = run_episode(sc, uniform_decide)
    # both sole tasks ask for 100, rescaled to 50/50
    assert r.makespans["j"] == pytest.approx(200.0)
    t0, alloc = r.allocations_log[0]
    assert alloc["p0"] == pytest.approx(50.0)
    assert alloc["bg0"] == pytest.approx(50.0)

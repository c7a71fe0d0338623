"""Bundled example assets: scenarios, the domain graph, reference weights.

The three load scenarios share one five-task application job (root, three
parallel siblings, then a join) and differ in background contention and in
how honest the sibling sub-deadlines are.  Under light load the authored
sub-deadlines mislead the ratio-matching rules (the runtime placement is
faster than planned), so rule-based sharing loses to uniform sharing and
the inference gate is what recovers the loss.  Under medium and heavy load
the sub-deadlines are faithful and rule-based sharing wins.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .domain import build_domain_graph
from .formats import (
    serialize_graph,
    serialize_ruleset,
    serialize_scenario,
)
from .rules import ACTION_CLASSES, LITERALS, RuleSet, RuleTemplate
from .sim import JobSpec, ObsModel, PeSpec, Scenario, TaskSpec

# published learned-weight table used as the known-good reference policy
REFERENCE_WEIGHTS = {
    "TaskAssigned":          (4.30e-03, 3.30e-01, 2.40e-01),
    "!TaskAssigned":         (1.10e-03, 3.30e-03, 9.70e-03),
    "ParentTasksCompleted":  (6.80e-04, 3.30e-01, 2.40e-01),
    "!ParentTasksCompleted": (9.90e-01, 3.30e-03, 9.70e-03),
    "SiblingTasks":          (4.30e-03, 3.30e-03, 2.40e-01),
    "!SiblingTasks":         (1.10e-03, 3.30e-01, 9.70e-03),
    "Slack":                 (6.80e-04, 3.30e-03, 2.40e-01),
    "!Slack":                (6.80e-04, 3.30e-03, 9.70e-03),
}


def reference_ruleset() -> RuleSet:
    templates = {}
    for col, cls in enumerate(ACTION_CLASSES):
        weights = {lit: REFERENCE_WEIGHTS[lit][col] for lit in LITERALS}
        templates[cls] = RuleTemplate(cls, weights)
    return RuleSet(templates)


_APP_PES = (
    PeSpec("gpu", "GPU", (("*", 2.0),)),
    PeSpec("cpu0", "CPU", (("*", 1.0),)),
    PeSpec("cpu1", "CPU", (("*", 1.0),)),
)


def _app_job(sibling_sds: tuple[float, float], a_max: int = 100,
             priority: bool = False) -> JobSpec:
    sd1, sd2 = sibling_sds
    return JobSpec("app", (
        TaskSpec("t0", 60, 30, "gpu"),
        TaskSpec("t1", 30, sd1, "cpu0", parents=("t0",)),
        TaskSpec("t2", 30, sd2, "cpu1", parents=("t0",)),
        TaskSpec("t3", 60, 30, "gpu", parents=("t1", "t2")),
        TaskSpec("t4", 40, 20, "gpu", parents=("t3",)),
    ), a_max=a_max, priority=priority)


def _background_job(idx: int, arrival: float = 0.0) -> JobSpec:
    pe = f"bg{idx}"
    return JobSpec(f"load{idx}", (
        TaskSpec("b0", 200, 200, pe),
        TaskSpec("b1", 200, 200, pe, parents=("b0",)),
    ), arrival=arrival, background=True)


_LIGHT_ENV = (("LL", 1), ("EC", 1), ("ODTCI", 1), ("HPD", 1),
              ("ODTMI", 0), ("HPM", 0))
_BUSY_ENV = (("LL", 0), ("EC", 0), ("ODTCI", 0), ("HPD", 0),
             ("ODTMI", 1), ("HPM", 1))
_OBS = (("EC", ObsModel(0.1, 0.0005)),
        ("ODTCI", ObsModel(0.15, 0.0005)),
        ("ODTMI", ObsModel(0.15, 0.0005)),
        ("HPD", ObsModel(0.15, 0.0005)),
        ("HPM", ObsModel(0.1, 0.0005)))


def load_light_scenario() -> Scenario:
    """No contention; sibling sub-deadlines mislead the ratio matcher.

    The application job runs at normal priority (token ceiling 60), so a
    lopsided split cannot be fully repaired by reallocating the budget to
    the laggard after its sibling finishes.
    """
    return Scenario(
        name="load_light", pes=_APP_PES,
        jobs=(_app_job((200.0, 100.0), a_max=60),),
        load="light", env=_LIGHT_ENV, obs=_OBS)


def load_medium_scenario() -> Scenario:
    """One background job; faithful sub-deadlines, unequal sibling works."""
    job = JobSpec("app", (
        TaskSpec("t0", 60, 30, "gpu"),
        TaskSpec("t1", 60, 60, "cpu0", parents=("t0",)),
        TaskSpec("t2", 20, 60, "cpu1", parents=("t0",)),
        TaskSpec("t3", 60, 30, "gpu", parents=("t1", "t2")),
        TaskSpec("t4", 40, 20, "gpu", parents=("t3",)),
    ))
    return Scenario(
        name="load_medium", pes=_APP_PES + (PeSpec("bg1"),),
        jobs=(job, _background_job(1)),
        load="medium", env=_BUSY_ENV, obs=_OBS)


def load_heavy_scenario() -> Scenario:
    """Two background jobs contending for the budget."""
    job = JobSpec("app", (
        TaskSpec("t0", 60, 30, "gpu"),
        TaskSpec("t1", 60, 60, "cpu0", parents=("t0",)),
        TaskSpec("t2", 20, 60, "cpu1", parents=("t0",)),
        TaskSpec("t3", 60, 30, "gpu", parents=("t1", "t2")),
        TaskSpec("t4", 40, 20, "gpu", parents=("t3",)),
    ))
    return Scenario(
        name="load_heavy", pes=_APP_PES + (PeSpec("bg1"), PeSpec("bg2")),
        jobs=(job, _background_job(1), _background_job(2)),
        load="heavy", env=_BUSY_ENV, obs=_OBS)


def train_scenario() -> Scenario:
    """Five-task rule-learning workload: solo stages plus an uneven
    three-sibling stage whose ideal shares differ from uniform.

    A short-task background chain keeps events firing during the solo
    stages so the learner visits them at varied progress.
    """
    job = JobSpec("app", (
        TaskSpec("t0", 30, 15, "gpu"),
        TaskSpec("t1", 40, 50, "fft", parents=("t0",)),
        TaskSpec("t2", 20, 50, "cpu0", parents=("t0",)),
        TaskSpec("t3", 10, 50, "cpu1", parents=("t0",)),
        TaskSpec("t4", 30, 15, "gpu", parents=("t1", "t2", "t3")),
    ))
    ticker = JobSpec("ticker", tuple(
        TaskSpec(f"b{i}", 12, 12, "bg0",
                 parents=((f"b{i-1}",) if i else ()))
        for i in range(12)
    ), background=True)
    return Scenario(
        name="train_fivetask",
        pes=(PeSpec("gpu", "GPU", (("*", 2.0),)),
             PeSpec("fft", "FFT", (("*", 2.0),)),
             PeSpec("cpu0"), PeSpec("cpu1"), PeSpec("bg0")),
        jobs=(job, ticker), load="medium")


def twins_scenario() -> Scenario:
    """Two identical siblings; the even split is the unique optimum."""
    return Scenario(
        name="twins",
        pes=(PeSpec("p0"), PeSpec("p1")),
        jobs=(JobSpec("j", (TaskSpec("t0", 50, 50, "p0"),
                            TaskSpec("t1", 50, 50, "p1"))),))


_DYNAMIC_CONFIG = ("dynamic graph=domain_graph.plg rules=rules_reference.wts "
                   "query=LightLoad tau=0.6 cadence=1 usej=on\n")

_SCENARIOS = {
    "load_light.scn": load_light_scenario,
    "load_medium.scn": load_medium_scenario,
    "load_heavy.scn": load_heavy_scenario,
    "train_fivetask.scn": train_scenario,
    "twins.scn": twins_scenario,
}


def write_assets(directory: str | Path) -> list[Path]:
    """Materialize every bundled asset file into a directory."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, builder in _SCENARIOS.items():
        path = out / name
        path.write_text(serialize_scenario(builder()))
        written.append(path)
    path = out / "domain_graph.plg"
    path.write_text(serialize_graph(build_domain_graph()))
    written.append(path)
    path = out / "rules_reference.wts"
    path.write_text(serialize_ruleset(reference_ruleset()))
    written.append(path)
    path = out / "gate.dyn"
    path.write_text(_DYNAMIC_CONFIG)
    written.append(path)
    return written


def asset_path(name: str) -> Path:
    """Path of a bundled asset file inside the installed package."""
    return Path(str(resources.files("plnnsim") / "assets" / name))

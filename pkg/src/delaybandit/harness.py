"""Slot-by-slot simulation loop, invariant monitors, sweeps and CSV output.

Per slot the learner acts, the environment reveals the loss of that action,
the feedback is queued for slot t + d_t, and every event due at t is handed
to the learner before slot t + 1 begins.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import bco, mab
from .bco import FeasibleSet
from .core import (
    DelaySchedule,
    FeedbackEvent,
    FeedbackQueue,
    ProbabilityVector,
    RegretTrace,
    build_virtual_map,
    resolve_tie_order,
    verify_slot_lag,
)
from .environments import (
    DEFAULT_PATTERN,
    BcoEnvironment,
    MabEnvironment,
    QuadraticEnvironment,
    RegressionEnvironment,
    best_fixed_arm,
    best_fixed_point,
    load_ratings_dataset,
    load_regression_dataset,
    periodic_delays,
    random_delays,
    synthetic_bco_functions,
    synthetic_linear_functions,
    synthetic_mab_losses,
)

log = logging.getLogger(__name__)

MAB_ALGORITHMS = ("dexp3", "exp3", "bold")
BCO_ALGORITHMS = ("dbgd", "bgd", "ogd", "solid", "fkm")
MAB_MONITORS = ("delivery", "slot_lag", "shrink", "growth", "floor")
BCO_MONITORS = ("delivery", "slot_lag", "gradient_bias", "feasibility", "displacement")
ALL_MONITORS = tuple(dict.fromkeys(MAB_MONITORS + BCO_MONITORS))

TOL = 1e-9
FLOOR_TOL = 1e-12


class ConfigError(ValueError):
    """A simulation configuration is inconsistent."""


@dataclass(frozen=True)
class SimulationConfig:
    """One algorithm on one environment and delay schedule, over several seeds.

    ``environment`` and ``delays`` are dicts with a ``kind`` key plus options,
    or ready-made MabEnvironment / BcoEnvironment / DelaySchedule objects.
    ``params`` is ``"auto"`` (tuned from the true T, D and d_bar) or a dict.
    """

    setting: str
    algorithm: str
    horizon: int | None = None
    environment: Any = field(default_factory=dict)
    delays: Any = field(default_factory=lambda: {"kind": "periodic", "pattern": DEFAULT_PATTERN})
    params: Any = "auto"
    seeds: tuple[int, ...] = (0,)
    monitors: frozenset[str] = frozenset()
    tie_order: str = "descending"
    feasible_set: FeasibleSet = field(default_factory=FeasibleSet.ball)
    label: str | None = None

    def __post_init__(self):
        if self.setting not in ("mab", "bco"):
            raise ConfigError(f"setting must be 'mab' or 'bco', got {self.setting!r}")
        allowed = MAB_ALGORITHMS if self.setting == "mab" else BCO_ALGORITHMS
        if self.algorithm not in allowed:
            raise ConfigError(f"algorithm {self.algorithm!r} is not a {self.setting} algorithm")
        unknown = set(self.monitors) - set(ALL_MONITORS)
        if unknown:
            raise ConfigError(f"unknown monitors: {sorted(unknown)}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        object.__setattr__(self, "monitors", frozenset(self.monitors))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @property
    def name(self) -> str:
        return self.label or self.algorithm.upper()


@dataclass
class CheckResult:
    name: str
    applicable: bool = True
    passed: bool = True
    checked: int = 0
    first_violation: str | None = None
    stats: dict = field(default_factory=dict)

    def fail(self, where: str) -> None:
        if self.passed:
            self.first_violation = where
        self.passed = False

    def as_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "passed": self.passed,
            "checked": self.checked,
            "first_violation": self.first_violation,
            **({"stats": self.stats} if self.stats else {}),
        }


@dataclass
class MonitorReport:
    checks: dict[str, CheckResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def as_dict(self) -> dict:
        return {name: c.as_dict() for name, c in sorted(self.checks.items())}

    def lines(self) -> list[str]:
        out = []
        for name, c in sorted(self.checks.items()):
            if not c.applicable:
                out.append(f"{name:13s} n/a")
            elif c.passed:
                out.append(f"{name:13s} PASS ({c.checked} checked)")
            else:
                out.append(f"{name:13s} FAIL at {c.first_violation}")
        return out


@dataclass
class RunResult:
    config: SimulationConfig
    seed: int
    regret: RegretTrace
    monitor: MonitorReport
    wall_time: float
    schedule: DelaySchedule
    actions: np.ndarray
    averaged_regret: RegretTrace | None = None
    learner_state: dict = field(default_factory=dict)

    @property
    def final_normalized_regret(self) -> float:
        return self.regret.final_normalized


# ----------------------------------------------------------------------------
# building blocks from a config


def build_schedule(config: SimulationConfig, T: int) -> DelaySchedule:
    spec = config.delays
    if isinstance(spec, DelaySchedule):
        if spec.T != T:
            raise ConfigError(f"delay schedule has {spec.T} slots, horizon is {T}")
        return spec
    kind = spec.get("kind", "periodic")
    if kind == "periodic":
        return periodic_delays(T, spec.get("pattern", DEFAULT_PATTERN))
    if kind == "zero":
        return DelaySchedule.zeros(T)
    if kind == "file":
        sched = DelaySchedule.load(spec["path"])
        if sched.T != T:
            raise ConfigError(f"delay file has {sched.T} slots, horizon is {T}")
        return sched
    if kind == "random":
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        return random_delays(T, int(spec["max_delay"]), rng)
    raise ConfigError(f"unknown delay kind {kind!r}")


def _truncate(n_available: int, horizon: int | None, what: str) -> int:
    T = n_available if horizon is None else horizon
    if T > n_available:
        raise ConfigError(f"{what} has {n_available} slots, horizon is {T}")
    return T


def build_mab_environment(config: SimulationConfig, fill_rng: np.random.Generator) -> MabEnvironment:
    spec = config.environment
    if isinstance(spec, MabEnvironment):
        env = spec
    else:
        kind = spec.get("kind", "synthetic")
        if kind == "synthetic":
            if config.horizon is None:
                raise ConfigError("synthetic environments need a horizon")
            env = synthetic_mab_losses(config.horizon, int(spec.get("arms", 5)),
                                       int(spec.get("change_slot", 500)))
        elif kind == "ratings":
            env = load_ratings_dataset(
                spec["path"], int(spec["arms"]), fill_rng,
                score_range=(float(spec.get("score_low", 0.0)), float(spec.get("score_high", 1.0))),
                skip_columns=int(spec.get("skip_columns", 0)),
            )
        else:
            raise ConfigError(f"unknown MAB environment kind {kind!r}")
    T = _truncate(env.T, config.horizon, "environment")
    return env if T == env.T else MabEnvironment(env.loss_matrix[:T])


def build_bco_environment(config: SimulationConfig) -> BcoEnvironment:
    spec = config.environment
    if isinstance(spec, BcoEnvironment):
        env = spec
    else:
        kind = spec.get("kind", "quadratic")
        if kind in ("quadratic", "linear"):
            if config.horizon is None:
                raise ConfigError("synthetic environments need a horizon")
            make = synthetic_bco_functions if kind == "quadratic" else synthetic_linear_functions
            env = make(config.horizon)
        elif kind == "regression":
            env = load_regression_dataset(spec["path"], bool(spec.get("standardize", True)))
        else:
            raise ConfigError(f"unknown BCO environment kind {kind!r}")
    T = _truncate(env.T, config.horizon, "environment")
    if T == env.T:
        return env
    if isinstance(env, QuadraticEnvironment):
        return QuadraticEnvironment(env.a[:T], env.b[:T])
    if isinstance(env, RegressionEnvironment):
        return RegressionEnvironment(env.W[:T], env.y[:T])
    raise ConfigError(f"cannot truncate a {type(env).__name__} to {T} slots")


def _param(params: dict, key: str, default=None):
    if key in params:
        return float(params[key])
    if default is None:
        raise ConfigError(f"missing algorithm parameter {key!r}")
    return default


def make_mab_learner(config: SimulationConfig, schedule: DelaySchedule, K: int):
    T, D = schedule.T, schedule.total
    # any d_bar >= max_t d_t is a valid bound, so zero-delay runs tune with 1
    d_bar = max(schedule.d_bar, 1)
    p = config.params if isinstance(config.params, dict) else {}
    auto = config.params == "auto" or p.get("mode") == "auto"
    c = float(p.get("eta_constant", 1.0))
    if config.algorithm == "dexp3":
        if auto:
            params = mab.dexp3_tuned_params(T, D, d_bar, K, eta_constant=c)
        else:
            params = mab.Dexp3Params(_param(p, "eta"), _param(p, "delta1"), _param(p, "delta2"), K)
        return mab.Dexp3Learner(params)
    eta = mab.dexp3_tuned_params(T, D, d_bar, K, eta_constant=c).eta if auto else _param(p, "eta")
    if config.algorithm == "exp3":
        return mab.Exp3Learner(eta, K)
    return mab.BoldLearner(eta, K)


def make_bco_learner(config: SimulationConfig, schedule: DelaySchedule, dim: int):
    p = config.params if isinstance(config.params, dict) else {}
    auto = config.params == "auto" or p.get("mode") == "auto"
    if auto:
        eta, delta = bco.dbgd_tuned_params(
            schedule.T, schedule.total, dim,
            eta_constant=float(p.get("eta_constant", 1.0)),
            delta_constant=float(p.get("delta_constant", 1.0)),
        )
    else:
        eta = _param(p, "eta")
        delta = _param(p, "delta", 0.0)
    fset = config.feasible_set
    alg = config.algorithm
    if alg in ("dbgd", "bgd", "fkm") and not delta > 0:
        raise ConfigError(f"{alg} needs a positive query radius delta")
    if alg == "dbgd":
        return bco.DbgdLearner(dim, eta, delta, fset)
    if alg == "bgd":
        return bco.BgdLearner(dim, eta, delta, fset)
    if alg == "fkm":
        return bco.FkmLearner(dim, eta, delta, fset)
    if str(p.get("project_on_shrunk", "false")).lower() in ("1", "true", "yes"):
        fset = fset.shrunk(delta)
    cls = bco.OgdLearner if alg == "ogd" else bco.SolidLearner
    return cls(dim, eta, fset)


def _split_seed(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    action, fill = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(action), np.random.default_rng(fill)


# ----------------------------------------------------------------------------
# monitors


def check_delivery(delivered: list[tuple[int, int]], schedule: DelaySchedule,
                   tie_order) -> CheckResult:
    """Delivered (arrival, origin) pairs must match the schedule exactly once each."""
    res = CheckResult("delivery", checked=len(delivered))
    origins = [o for _, o in delivered]
    if sorted(origins) != list(range(1, schedule.T + 1)):
        missing = sorted(set(range(1, schedule.T + 1)) - set(origins))
        dup = len(origins) - len(set(origins))
        res.fail(f"missing origins {missing[:5]} / {dup} duplicates")
        return res
    expected = [(a, o) for a, os_ in schedule.arrivals(tie_order).items() for o in os_]
    for i, (got, want) in enumerate(zip(delivered, expected), 1):
        if got != want:
            res.fail(f"virtual slot {i}: delivered origin {got[1]} at slot {got[0]}, "
                     f"expected origin {want[1]} at slot {want[0]}")
            break
    return res


def check_slot_lag(schedule: DelaySchedule, tie_order) -> CheckResult:
    report = verify_slot_lag(build_virtual_map(schedule, tie_order), schedule)
    res = CheckResult("slot_lag", checked=schedule.T,
                      stats={"sum_s_tilde": report.s_tilde_sum, "D": report.total_delay,
                             "d_bar": schedule.d_bar})
    if not report.passed:
        res.fail("; ".join(report.violations))
    return res


def check_probability_path(path: Sequence[ProbabilityVector],
                           params: mab.Dexp3Params | None) -> dict[str, CheckResult]:
    """Shrink/growth ratio bounds and the probability floor along a DEXP3 run.

    ``path`` holds p~_1 (initial) followed by the distribution after each
    virtual-slot update.
    """
    names = ("shrink", "growth", "floor")
    if params is None or not params.satisfies_ratio_conditions():
        return {n: CheckResult(n, applicable=False) for n in names}
    P = np.array([p.entries for p in path])
    prev, nxt = P[:-1], P[1:]
    shrink = prev / nxt
    growth = nxt / prev
    out = {}
    for name, ratios, bound in (
        ("shrink", shrink, params.shrink_bound()),
        ("growth", growth, params.growth_bound()),
    ):
        res = CheckResult(name, checked=ratios.size,
                          stats={"max_ratio": float(ratios.max(initial=0.0)), "bound": bound})
        bad = np.argwhere(ratios > bound + TOL)
        if bad.size:
            tau, k = bad[0]
            res.fail(f"virtual slot {tau + 2}, arm {k + 1}: ratio {ratios[tau, k]:.12g} > {bound:.12g}")
        out[name] = res
    floor = params.floor
    res = CheckResult("floor", checked=nxt.size,
                      stats={"min_p": float(nxt.min(initial=1.0)), "floor": floor})
    bad = np.argwhere(nxt < floor - FLOOR_TOL)
    if bad.size:
        tau, k = bad[0]
        res.fail(f"virtual slot {tau + 2}, arm {k + 1}: p = {nxt[tau, k]:.3e} < {floor:.3e}")
    out["floor"] = res
    return out


# ----------------------------------------------------------------------------
# runs


def run_mab(config: SimulationConfig, seed: int | None = None) -> RunResult:
    if config.setting != "mab":
        raise ConfigError("run_mab needs a MAB config")
    seed = config.seeds[0] if seed is None else seed
    start = time.perf_counter()
    action_rng, fill_rng = _split_seed(seed)
    env = build_mab_environment(config, fill_rng)
    T, K = env.T, env.K
    schedule = build_schedule(config, T)
    learner = make_mab_learner(config, schedule, K)
    played = schedule if learner.delayed else DelaySchedule.zeros(T)
    tie = resolve_tie_order(config.tie_order)
    monitors = config.monitors
    want_path = bool(monitors & {"shrink", "growth", "floor"})

    best_arm, _ = best_fixed_arm(env)
    queue = FeedbackQueue(tie)
    arms = np.empty(T, dtype=np.int64)
    losses = np.empty(T)
    delivered: list[tuple[int, int]] = []
    path = [learner.p] if want_path else []
    for t in range(1, T + 1):
        arm = learner.select(action_rng)
        loss = env.loss(t, arm)
        arms[t - 1], losses[t - 1] = arm, loss
        queue.push(FeedbackEvent(t, played.arrival_slot(t), mab.MabFeedback(arm, loss)))
        events = queue.pop_due(t)
        delivered.extend((t, e.origin_slot) for e in events)
        updates = learner.end_of_slot(events)
        if want_path:
            path.extend(updates)

    trace = RegretTrace.from_losses(losses, env.loss_matrix[:, best_arm])
    report = MonitorReport()
    if "delivery" in monitors:
        report.checks["delivery"] = check_delivery(delivered, played, tie)
    if "slot_lag" in monitors:
        report.checks["slot_lag"] = check_slot_lag(played, tie)
    if want_path:
        params = learner.state.params if isinstance(learner, mab.Dexp3Learner) else None
        for name, res in check_probability_path(path, params).items():
            if name in monitors:
                report.checks[name] = res
    return RunResult(config, seed, trace, report, time.perf_counter() - start, played, arms,
                     learner_state=learner.dump())


def _payload(learner, env: BcoEnvironment, t: int, x: np.ndarray, queries: np.ndarray):
    if learner.feedback == "multipoint":
        return bco.MultiPointFeedback(env.value(t, x), env.values(t, queries), x, queries)
    if learner.feedback == "gradient":
        return bco.GradientFeedback(env.gradient(t, x))
    return bco.OnePointFeedback(float(env.values(t, queries)[0]), learner.direction)


def run_bco(config: SimulationConfig, seed: int | None = None) -> RunResult:
    if config.setting != "bco":
        raise ConfigError("run_bco needs a BCO config")
    seed = config.seeds[0] if seed is None else seed
    start = time.perf_counter()
    action_rng, _ = _split_seed(seed)
    env = build_bco_environment(config)
    T, dim = env.T, env.dim
    schedule = build_schedule(config, T)
    learner = make_bco_learner(config, schedule, dim)
    if config.algorithm == "fkm" and schedule.total > 0:
        raise ConfigError("the one-point estimator cannot run on a delayed schedule")
    played = schedule if learner.delayed else DelaySchedule.zeros(T)
    tie = resolve_tie_order(config.tie_order)
    monitors = config.monitors
    fset = config.feasible_set
    multipoint = learner.feedback == "multipoint"
    step_set = learner.state.shrunk_set if multipoint else getattr(learner, "set", fset)
    eta = learner.state.eta if multipoint else learner.eta
    delta = learner.state.delta if multipoint else getattr(learner, "delta", 0.0)

    gradient_bias = CheckResult("gradient_bias", applicable=multipoint)
    feas = CheckResult("feasibility")
    disp = CheckResult("displacement")
    max_bias_gap = 0.0
    sqrtK = math.sqrt(dim)

    queue = FeedbackQueue(tie)
    iterates = np.empty((T, dim))
    played_loss = np.empty(T)
    averaged_loss = np.empty(T)
    delivered: list[tuple[int, int]] = []
    for t in range(1, T + 1):
        x, queries = learner.act(action_rng)
        x = np.array(x)
        iterates[t - 1] = x
        payload = _payload(learner, env, t, x, queries)
        fx = env.value(t, x)
        played_loss[t - 1] = fx
        if len(queries):
            averaged_loss[t - 1] = (fx + env.values(t, queries).sum()) / (len(queries) + 1)
        else:
            averaged_loss[t - 1] = fx
        if "feasibility" in monitors:
            feas.checked += 1
            if not step_set.contains(x):
                feas.fail(f"slot {t}: iterate outside the step set")
            elif len(queries) and not all(fset.contains(q) for q in queries):
                feas.fail(f"slot {t}: query point outside the feasible set")
        queue.push(FeedbackEvent(t, played.arrival_slot(t), payload))
        events = queue.pop_due(t)
        delivered.extend((t, e.origin_slot) for e in events)
        before = learner.x.copy()
        updates = learner.end_of_slot(events)
        for ev, after in zip(events, updates):
            s = ev.origin_slot
            L = env.lipschitz(s, fset)
            if "displacement" in monitors:
                disp.checked += 1
                step = float(np.linalg.norm(after - before))
                if step > eta * sqrtK * L + TOL:
                    disp.fail(f"slot {t}, feedback from slot {s}: moved {step:.6g} > "
                              f"{eta * sqrtK * L:.6g}")
            if "gradient_bias" in monitors and multipoint:
                fb = ev.payload
                g = bco.estimate_gradient_multipoint(fb.value, fb.query_values, delta)
                true_grad = env.gradient(s, fb.point)
                bias = float(np.linalg.norm(g - true_grad))
                bias_bound = env.smoothness(s) * delta * sqrtK / 2.0
                gradient_bias.checked += 1
                if np.linalg.norm(g) > sqrtK * L + TOL:
                    gradient_bias.fail(f"slot {t}, feedback from slot {s}: |g| = "
                                f"{np.linalg.norm(g):.6g} > sqrt(K) L = {sqrtK * L:.6g}")
                if bias > bias_bound + TOL:
                    gradient_bias.fail(f"slot {t}, feedback from slot {s}: bias {bias:.6g} > {bias_bound:.6g}")
                max_bias_gap = max(max_bias_gap, abs(bias_bound - bias))
            before = after

    x_star, _ = best_fixed_point(env, fset)
    comparator = env.losses_at(x_star)
    trace = RegretTrace.from_losses(played_loss, comparator)
    averaged = RegretTrace.from_losses(averaged_loss, comparator)
    report = MonitorReport()
    if "delivery" in monitors:
        report.checks["delivery"] = check_delivery(delivered, played, tie)
    if "slot_lag" in monitors:
        report.checks["slot_lag"] = check_slot_lag(played, tie)
    if "gradient_bias" in monitors:
        gradient_bias.stats = {"max_bias_gap": max_bias_gap} if multipoint else {}
        report.checks["gradient_bias"] = gradient_bias
    if "feasibility" in monitors:
        report.checks["feasibility"] = feas
    if "displacement" in monitors:
        report.checks["displacement"] = disp
    return RunResult(config, seed, trace, report, time.perf_counter() - start, played, iterates,
                     averaged_regret=averaged, learner_state=learner.dump())


def run(config: SimulationConfig, seed: int | None = None) -> RunResult:
    return run_mab(config, seed) if config.setting == "mab" else run_bco(config, seed)


def run_all(config: SimulationConfig) -> list[RunResult]:
    return [run(config, s) for s in config.seeds]


# ----------------------------------------------------------------------------
# sweeps


@dataclass
class SweepEntry:
    config: SimulationConfig
    runs: list[RunResult]
    errors: list[tuple[int, str]]

    @property
    def normalized_curves(self) -> np.ndarray:
        return np.array([r.regret.normalized_by_horizon() for r in self.runs])

    @property
    def mean_curve(self) -> np.ndarray:
        return self.normalized_curves.mean(axis=0)

    @property
    def std_curve(self) -> np.ndarray:
        return self.normalized_curves.std(axis=0)

    @property
    def finals(self) -> np.ndarray:
        return np.array([r.final_normalized_regret for r in self.runs])

    @property
    def mean_final(self) -> float:
        return float(self.finals.mean()) if self.runs else math.nan

    @property
    def std_final(self) -> float:
        return float(self.finals.std()) if self.runs else math.nan

    @property
    def mean_final_regret(self) -> float:
        return float(np.mean([r.regret.regret[-1] for r in self.runs])) if self.runs else math.nan


@dataclass
class SweepSummary:
    entries: list[SweepEntry]

    @property
    def ok(self) -> bool:
        return all(not e.errors and all(r.monitor.passed for r in e.runs) for e in self.entries)

    def table(self) -> list[dict]:
        return [
            {
                "label": e.config.name,
                "T": e.runs[0].regret.T if e.runs else None,
                "seeds": len(e.runs),
                "errors": len(e.errors),
                "mean_final_normalized_regret": e.mean_final,
                "std_final_normalized_regret": e.std_final,
            }
            for e in self.entries
        ]


def _run_task(task: tuple[SimulationConfig, int]):
    config, seed = task
    try:
        return run(config, seed), None
    except Exception as exc:  # reported per run, siblings keep going
        return None, f"{type(exc).__name__}: {exc}"


def sweep(configs: Sequence[SimulationConfig], workers: int | None = None) -> SweepSummary:
    """Run every (config, seed) pair; results are ordered by config then seed."""
    tasks = [(c, s) for c in configs for s in c.seeds]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_task, tasks))
    else:
        outcomes = [_run_task(t) for t in tasks]
    entries = []
    i = 0
    for c in configs:
        runs, errors = [], []
        for s in c.seeds:
            result, err = outcomes[i]
            i += 1
            if err is None:
                runs.append(result)
            else:
                log.error("%s seed %d failed: %s", c.name, s, err)
                errors.append((s, err))
        entries.append(SweepEntry(c, runs, errors))
    return SweepSummary(entries)


# ----------------------------------------------------------------------------
# output

TRACE_COLUMNS = ("slot", "learner_cumulative", "comparator_cumulative", "regret",
                 "normalized_regret", "regret_over_slot")
AVERAGED_COLUMNS = ("averaged_learner_cumulative", "averaged_regret", "averaged_normalized_regret")


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _fmt(x: float) -> str:
    return repr(float(x))


def trace_csv(result: RunResult) -> str:
    tr = result.regret
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = TRACE_COLUMNS + (AVERAGED_COLUMNS if result.averaged_regret is not None else ())
    w.writerow(cols)
    reg, by_T, by_t = tr.regret, tr.normalized_by_horizon(), tr.normalized_by_slot()
    av = result.averaged_regret
    for i in range(tr.T):
        row = [i + 1, _fmt(tr.learner_cumulative[i]), _fmt(tr.comparator_cumulative[i]),
               _fmt(reg[i]), _fmt(by_T[i]), _fmt(by_t[i])]
        if av is not None:
            row += [_fmt(av.learner_cumulative[i]), _fmt(av.regret[i]),
                    _fmt(av.normalized_by_horizon()[i])]
        w.writerow(row)
    return buf.getvalue()


def aggregate_csv(entry: SweepEntry) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("slot", "mean_normalized_regret", "std_normalized_regret", "seeds"))
    if entry.runs:
        mean, std = entry.mean_curve, entry.std_curve
        for i in range(mean.size):
            w.writerow((i + 1, _fmt(mean[i]), _fmt(std[i]), len(entry.runs)))
    return buf.getvalue()


def summary_csv(summary: SweepSummary) -> str:
    buf = io.StringIO()
    rows = summary.table()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["label"], lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def safe_label(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in label)


def write_outputs(summary: SweepSummary, out_dir: str | Path) -> list[Path]:
    """One CSV per (config, seed), one aggregate per config, and a summary table."""
    out_dir = Path(out_dir)
    written = []
    for entry in summary.entries:
        stem = safe_label(entry.config.name)
        for r in entry.runs:
            p = out_dir / f"{stem}_seed{r.seed}.csv"
            atomic_write_text(p, trace_csv(r))
            written.append(p)
        p = out_dir / f"{stem}_aggregate.csv"
        atomic_write_text(p, aggregate_csv(entry))
        written.append(p)
    p = out_dir / "summary.csv"
    atomic_write_text(p, summary_csv(summary))
    written.append(p)
    return written

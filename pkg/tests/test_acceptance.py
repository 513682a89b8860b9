"""End-to-end acceptance checks on the shipped synthetic experiment configs."""

import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from delaybandit.bco import FeasibleSet
from delaybandit.cli import main
from delaybandit.config import load_config
from delaybandit.core import ProbabilityVector
from delaybandit.environments import (
    DEFAULT_PATTERN,
    MabEnvironment,
    QuadraticEnvironment,
    best_fixed_arm,
    best_fixed_point,
    periodic_delays,
)
from delaybandit.harness import SimulationConfig, run_bco, run_mab, sweep
from delaybandit.mab import Dexp3Params, Dexp3State, dexp3_end_of_slot, exp3_step, sample_arm

ROOT = Path(__file__).resolve().parents[1]
MAB_CFG = ROOT / "configs" / "synthetic_mab.cfg"
BCO_CFG = ROOT / "configs" / "synthetic_bco.cfg"
WORKERS = 4


def configs(path, **overrides):
    return {c.name: replace(c, **overrides) for c in load_config(path)}


@pytest.fixture(scope="module")
def bco_finals():
    start = time.perf_counter()
    summary = sweep(list(configs(BCO_CFG, monitors=frozenset()).values()), workers=WORKERS)
    elapsed = time.perf_counter() - start
    assert summary.ok
    return {e.config.name: e.mean_final for e in summary.entries}, elapsed


def test_criterion_1_delay_reproduction(criterion):
    start = time.perf_counter()
    s = periodic_delays(2000, DEFAULT_PATTERN)
    elapsed = time.perf_counter() - start
    ok = s.total == 2569 and s.d_bar == 3 and elapsed < 1.0
    criterion("1", ok, f"D={s.total} d_bar={s.d_bar} in {elapsed:.3f}s")


def test_criterion_2_mab_ordering(criterion):
    cfgs = configs(MAB_CFG, monitors=frozenset())
    assert len(cfgs["DEXP3"].seeds) >= 30
    start = time.perf_counter()
    summary = sweep([cfgs["EXP3"], cfgs["BOLD"], cfgs["DEXP3"]])
    elapsed = time.perf_counter() - start
    m = {e.config.name: e.mean_final for e in summary.entries}
    ratio = m["DEXP3"] / m["BOLD"]
    ok = (summary.ok and m["EXP3"] <= m["BOLD"] <= m["DEXP3"] and ratio <= 2.0 and elapsed < 60)
    criterion("2", ok, f"EXP3={m['EXP3']:.6f} BOLD={m['BOLD']:.6f} DEXP3={m['DEXP3']:.6f} "
                       f"ratio={ratio:.4f} in {elapsed:.1f}s")


def test_criterion_3a_ogd_not_worse_than_solid(criterion, bco_finals):
    m, elapsed = bco_finals
    ok = m["OGD"] <= m["SOLID"] and elapsed < 60
    criterion("3a", ok, f"OGD={m['OGD']:.6f} SOLID={m['SOLID']:.6f} in {elapsed:.1f}s")


def test_criterion_3b_bgd_not_worse_than_dbgd(criterion, bco_finals):
    m, elapsed = bco_finals
    ok = m["BGD"] <= m["DBGD"] and elapsed < 60
    criterion("3b", ok, f"BGD={m['BGD']:.6f} DBGD={m['DBGD']:.6f}")


def test_criterion_3c_dbgd_close_to_solid(criterion, bco_finals):
    m, elapsed = bco_finals
    ok = m["DBGD"] <= 1.5 * m["SOLID"] and elapsed < 60
    criterion("3c", ok, f"DBGD={m['DBGD']:.6f} 1.5*SOLID={1.5 * m['SOLID']:.6f}")


def test_criterion_4_sublinearity(criterion):
    mab = configs(MAB_CFG, monitors=frozenset())["DEXP3"]
    bco = configs(BCO_CFG, monitors=frozenset())["DBGD"]
    runs = [replace(c, horizon=T, label=f"{c.name}_T{T}") for c in (mab, bco) for T in (500, 2000)]
    summary = sweep(runs, workers=WORKERS)
    m = {e.config.name: e.mean_final for e in summary.entries}
    ok = summary.ok and m["DEXP3_T2000"] < m["DEXP3_T500"] and m["DBGD_T2000"] < m["DBGD_T500"]
    criterion("4", ok, f"DEXP3 {m['DEXP3_T500']:.5f} -> {m['DEXP3_T2000']:.5f}, "
                       f"DBGD {m['DBGD_T500']:.5f} -> {m['DBGD_T2000']:.5f}")


def test_criterion_5_regret_scaling(criterion):
    base = configs(MAB_CFG, monitors=frozenset())["DEXP3"]
    horizons = (500, 1000, 2000, 4000)
    summary = sweep([replace(base, horizon=T, label=f"T{T}") for T in horizons], workers=WORKERS)
    K = 5
    ratios = []
    for T, entry in zip(horizons, summary.entries):
        s = periodic_delays(T, DEFAULT_PATTERN)
        scale = math.sqrt(K * s.d_bar * (T + s.total) * (1 + math.log(K)))
        ratios.append(entry.mean_final_regret / scale)
    spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
    ok = summary.ok and spread <= 3.0
    criterion("5", ok, "ratios " + " ".join(f"{r:.3f}" for r in ratios) + f" max/min={spread:.3f}")


def test_criterion_6_probability_invariants(criterion):
    cfg = configs(MAB_CFG, seeds=tuple(range(100)),
                  monitors=frozenset({"shrink", "growth", "floor", "slot_lag", "delivery"}))["DEXP3"]
    summary = sweep([cfg], workers=WORKERS)
    runs = summary.entries[0].runs
    failures = [(r.seed, line) for r in runs for line in r.monitor.lines() if "FAIL" in line]
    applicable = all(r.monitor.checks["shrink"].applicable for r in runs)
    ok = summary.ok and len(runs) == 100 and applicable and not failures
    checked = sum(r.monitor.checks["shrink"].checked for r in runs)
    criterion("6", ok, f"{len(runs)} runs, {checked} ratio checks, {len(failures)} violations")


def test_criterion_7_gradient_bounds(criterion):
    cfg = configs(BCO_CFG, seeds=tuple(range(100)), monitors=frozenset({"gradient_bias"}))["DBGD"]
    summary = sweep([cfg], workers=WORKERS)
    runs = summary.entries[0].runs
    checks = [r.monitor.checks["gradient_bias"] for r in runs]
    gap = max(c.stats["max_bias_gap"] for c in checks)
    ok = summary.ok and len(runs) == 100 and all(c.passed for c in checks) and gap <= 1e-9
    criterion("7", ok, f"{sum(c.checked for c in checks)} estimates, max |bound - bias| = {gap:.2e}")


def test_criterion_8_linear_equivalence(criterion):
    delays = {"kind": "periodic", "pattern": DEFAULT_PATTERN}
    common = dict(horizon=2000, environment={"kind": "linear"}, delays=delays)
    dbgd = run_bco(SimulationConfig("bco", "dbgd", **common))
    eta, delta = dbgd.learner_state["eta"], dbgd.learner_state["delta"]
    solid = run_bco(SimulationConfig("bco", "solid", params={"eta": eta, "delta": delta,
                                                             "project_on_shrunk": True}, **common))
    diff = float(np.max(np.abs(dbgd.actions - solid.actions)))
    moved = float(np.max(np.abs(dbgd.actions)))
    ok = diff <= 1e-9 and moved > 0
    criterion("8", ok, f"max per-coordinate difference {diff:.2e} over 2000 slots")


def test_criterion_9_zero_delay_reductions(criterion):
    rng = np.random.default_rng(0)
    prm = Dexp3Params(eta=0.05, delta1=1e300, delta2=0.0, K=5)
    p = ProbabilityVector.uniform(5)
    worst = 0.0
    for _ in range(2000):
        arm, loss = sample_arm(p, rng), float(rng.random())
        d = dexp3_end_of_slot(Dexp3State(p, prm), [(loss, arm)]).p.entries
        p = exp3_step(p, loss, arm, 0.05)
        worst = max(worst, float(np.max(np.abs(d - p.entries))))

    zero = {"kind": "zero"}
    mab_env = {"kind": "synthetic", "arms": 5, "change_slot": 500}
    bold = run_mab(SimulationConfig("mab", "bold", 2000, mab_env, zero, {"eta": 0.05}), 3)
    exp3 = run_mab(SimulationConfig("mab", "exp3", 2000, mab_env, zero, {"eta": 0.05}), 3)
    bold_equal = (np.array_equal(bold.actions, exp3.actions)
                  and np.array_equal(bold.regret.regret, exp3.regret.regret))

    lin = {"kind": "linear"}
    dbgd = run_bco(SimulationConfig("bco", "dbgd", 2000, lin, zero, {"eta": 0.01, "delta": 0.01}))
    ogd = run_bco(SimulationConfig("bco", "ogd", 2000, lin, zero,
                                   {"eta": 0.01, "delta": 0.01, "project_on_shrunk": True}))
    bco_diff = float(np.max(np.abs(dbgd.actions - ogd.actions)))
    ok = worst <= 1e-12 and bold_equal and bco_diff <= 1e-9
    criterion("9", ok, f"DEXP3 vs EXP3 {worst:.1e}, BOLD==EXP3 {bold_equal}, "
                       f"DBGD vs OGD {bco_diff:.1e}")


def test_criterion_10_comparator_oracles(criterion):
    rng = np.random.default_rng(10)
    arm_ok = True
    for _ in range(100):
        T, K = int(rng.integers(1, 60)), int(rng.integers(1, 9))
        L = rng.random((T, K))
        if rng.random() < 0.2:
            L[:, rng.integers(K)] = L[:, 0]  # force ties
        sums = [math.fsum(L[:, k]) for k in range(K)]
        scan = min(range(K), key=lambda k: (sums[k], k))
        k, total = best_fixed_arm(MabEnvironment(L))
        arm_ok &= k == scan and abs(total - sums[scan]) <= 1e-9
    worst = 0.0
    for i in range(20):
        T, dim = int(rng.integers(1, 50)), int(rng.integers(1, 6))
        env = QuadraticEnvironment(rng.uniform(0, 3, T), rng.normal(0, 3, (T, dim)))
        fs = FeasibleSet.ball(rng.uniform(0.5, 2)) if i % 2 else FeasibleSet.box(
            -rng.uniform(0.1, 2, dim), rng.uniform(0.1, 2, dim))
        a, _ = best_fixed_point(env, fs, method="closed")
        b, _ = best_fixed_point(env, fs, method="descent")
        worst = max(worst, float(np.max(np.abs(a - b))))
    ok = arm_ok and worst <= 1e-6
    criterion("10", ok, f"arm scan agrees on 100 instances: {arm_ok}; closed vs descent {worst:.1e}")


def test_criterion_11_determinism(criterion, tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        for cfg, cmd in ((MAB_CFG, "run-mab"), (BCO_CFG, "run-bco")):
            code = main([cmd, "--config", str(cfg), "--out", str(out / cmd), "--seeds", "0-2",
                         "--monitors", "none"])
            assert code == 0
        files = sorted(p for p in out.rglob("*") if p.is_file())
        outputs.append({p.relative_to(out): p.read_bytes() for p in files})
    same = outputs[0] == outputs[1] and len(outputs[0]) > 0
    svgs = sum(1 for p in outputs[0] if p.suffix == ".svg")
    criterion("11", same and svgs == 2, f"{len(outputs[0])} files compared, {svgs} charts")

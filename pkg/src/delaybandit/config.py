"""Run configuration files.

A config is an INI-style key/value file::

    [run]
    setting = mab            ; mab | bco
    horizon = 2000
    seeds = 0-29             ; ranges and comma lists, e.g. 0-4,10
    monitors = all           ; all | none | comma list
    tie_order = descending   ; descending (newest first) | ascending | shuffled:<seed>

    [environment]
    kind = synthetic         ; mab: synthetic | ratings
                             ; bco: quadratic | linear | regression
    arms = 5
    change_slot = 500

    [feasible_set]           ; bco only, default: unit ball
    kind = ball
    radius = 1.0

    [delays]
    kind = periodic          ; periodic | zero | file | random
    pattern = 1,2,1,0,3,0,2

    [algorithm.DEXP3]        ; one section per algorithm; suffix is the label
    id = dexp3
    params = auto            ; auto | explicit
    eta_constant = 1.0

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import configparser
from dataclasses import replace
from pathlib import Path

from .bco import FeasibleSet
from .harness import ALL_MONITORS, BCO_ALGORITHMS, MAB_ALGORITHMS, SimulationConfig


class ConfigSchemaError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def parse_seeds(text: str) -> tuple[int, ...]:
    seeds: list[int] = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else (part, part)
            a, b = int(lo), int(hi)
            if b < a:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(a, b + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return tuple(seeds)


def parse_monitors(text: str) -> frozenset[str]:
    text = text.strip().lower()
    if text == "all":
        return frozenset(ALL_MONITORS)
    if text in ("", "none"):
        return frozenset()
    names = {n.strip() for n in text.split(",") if n.strip()}
    unknown = names - set(ALL_MONITORS)
    if unknown:
        raise ValueError(f"unknown monitors {sorted(unknown)}; choose from {list(ALL_MONITORS)}")
    return frozenset(names)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(" ", "").split(",") if v)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(" ", "").split(",") if v)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise ValueError("must be >= 1")
    return v


def _nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise ValueError("must be >= 0")
    return v


SCHEMA = {
    "run": {
        "setting": (str, True),
        "horizon": (_positive_int, False),
        "seeds": (parse_seeds, False),
        "monitors": (parse_monitors, False),
        "tie_order": (str, False),
    },
    "environment": {
        "kind": (str, True),
        "arms": (_positive_int, False),
        "change_slot": (int, False),
        "path": (str, False),
        "score_low": (float, False),
        "score_high": (float, False),
        "skip_columns": (int, False),
        "standardize": (_bool, False),
    },
    "feasible_set": {
        "kind": (str, True),
        "radius": (float, False),
        "lower": (_floats, False),
        "upper": (_floats, False),
    },
    "delays": {
        "kind": (str, True),
        "pattern": (_ints, False),
        "path": (str, False),
        "max_delay": (int, False),
        "seed": (int, False),
    },
    "algorithm": {
        "id": (str, True),
        "params": (str, False),
        "eta": (float, False),
        "delta1": (float, False),
        "delta2": (_nonneg_float, False),
        "delta": (float, False),
        "eta_constant": (float, False),
        "delta_constant": (float, False),
        "project_on_shrunk": (_bool, False),
    },
}

ENV_KINDS = {"mab": ("synthetic", "ratings"), "bco": ("quadratic", "linear", "regression")}
DELAY_KINDS = ("periodic", "zero", "file", "random")


def _section(cp: configparser.ConfigParser, name: str, schema_key: str, required: bool) -> dict:
    if not cp.has_section(name):
        if required:
            raise ConfigSchemaError(name, "missing section")
        return {}
    schema = SCHEMA[schema_key]
    out = {}
    for key, raw in cp.items(name):
        if key not in schema:
            raise ConfigSchemaError(f"{name}.{key}", f"unknown key (allowed: {', '.join(schema)})")
        conv, _ = schema[key]
        try:
            out[key] = conv(raw)
        except ValueError as exc:
            raise ConfigSchemaError(f"{name}.{key}", str(exc)) from None
    for key, (_, req) in schema.items():
        if req and key not in out:
            raise ConfigSchemaError(f"{name}.{key}", "required key missing")
    return out


def _resolve(path: str, base: Path) -> str:
    p = Path(path)
    return str(p if p.is_absolute() else base / p)


def parse_config_text(text: str, base_dir: str | Path = ".") -> list[SimulationConfig]:
    """Parse a config document into one SimulationConfig per algorithm section."""
    base = Path(base_dir)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigSchemaError("<file>", f"malformed config: {exc}") from None
    allowed = {"run", "environment", "feasible_set", "delays"}
    for sec in cp.sections():
        if sec not in allowed and not sec.startswith("algorithm."):
            raise ConfigSchemaError(sec, "unknown section")

    run = _section(cp, "run", "run", True)
    setting = run["setting"]
    if setting not in ENV_KINDS:
        raise ConfigSchemaError("run.setting", f"must be 'mab' or 'bco', got {setting!r}")

    env = _section(cp, "environment", "environment", True)
    if env["kind"] not in ENV_KINDS[setting]:
        raise ConfigSchemaError("environment.kind",
                                f"{env['kind']!r} is not one of {ENV_KINDS[setting]} for {setting}")
    if env["kind"] in ("ratings", "regression"):
        if "path" not in env:
            raise ConfigSchemaError("environment.path", "required for dataset environments")
        env["path"] = _resolve(env["path"], base)
        if env["kind"] == "ratings" and "arms" not in env:
            raise ConfigSchemaError("environment.arms", "required for ratings datasets")
    elif "horizon" not in run:
        raise ConfigSchemaError("run.horizon", "required for synthetic environments")

    delays = _section(cp, "delays", "delays", False) or {"kind": "periodic"}
    if delays["kind"] not in DELAY_KINDS:
        raise ConfigSchemaError("delays.kind", f"must be one of {DELAY_KINDS}")
    if delays["kind"] == "file":
        if "path" not in delays:
            raise ConfigSchemaError("delays.path", "required for file delays")
        delays["path"] = _resolve(delays["path"], base)
    if delays["kind"] == "random" and "max_delay" not in delays:
        raise ConfigSchemaError("delays.max_delay", "required for random delays")

    fs = _section(cp, "feasible_set", "feasible_set", False)
    if fs and setting != "bco":
        raise ConfigSchemaError("feasible_set", "only valid for bco runs")
    try:
        if not fs or fs["kind"] == "ball":
            fset = FeasibleSet.ball(fs.get("radius", 1.0))
        elif fs["kind"] == "box":
            if "lower" not in fs or "upper" not in fs:
                raise ConfigSchemaError("feasible_set.lower", "box needs lower and upper")
            fset = FeasibleSet.box(fs["lower"], fs["upper"])
        else:
            raise ConfigSchemaError("feasible_set.kind", "must be 'ball' or 'box'")
    except ValueError as exc:
        if isinstance(exc, ConfigSchemaError):
            raise
        raise ConfigSchemaError("feasible_set", str(exc)) from None

    tie = run.get("tie_order", "descending")
    if tie not in ("ascending", "descending") and not tie.startswith("shuffled:"):
        raise ConfigSchemaError("run.tie_order", "must be ascending, descending or shuffled:<seed>")

    algos = [s for s in cp.sections() if s.startswith("algorithm.")]
    if not algos:
        raise ConfigSchemaError("algorithm", "at least one [algorithm.<label>] section is required")
    valid = MAB_ALGORITHMS if setting == "mab" else BCO_ALGORITHMS
    configs = []
    for sec in algos:
        a = _section(cp, sec, "algorithm", True)
        alg = a.pop("id").lower()
        if alg not in valid:
            raise ConfigSchemaError(f"{sec}.id", f"{alg!r} is not one of {valid}")
        mode = a.pop("params", "auto")
        if mode not in ("auto", "explicit"):
            raise ConfigSchemaError(f"{sec}.params", "must be 'auto' or 'explicit'")
        if mode == "explicit":
            needed = {"dexp3": ("eta", "delta1", "delta2"), "exp3": ("eta",), "bold": ("eta",),
                      "dbgd": ("eta", "delta"), "bgd": ("eta", "delta"), "fkm": ("eta", "delta"),
                      "ogd": ("eta",), "solid": ("eta",)}[alg]
            for key in needed:
                if key not in a:
                    raise ConfigSchemaError(f"{sec}.{key}", "required with params = explicit")
        params = {"mode": mode, **a}
        configs.append(SimulationConfig(
            setting=setting,
            algorithm=alg,
            horizon=run.get("horizon"),
            environment=env,
            delays=delays,
            params=params,
            seeds=run.get("seeds", (0,)),
            monitors=run.get("monitors", frozenset()),
            tie_order=tie,
            feasible_set=fset,
            label=sec.split(".", 1)[1],
        ))
    return configs


def load_config(path: str | Path) -> list[SimulationConfig]:
    path = Path(path)
    return parse_config_text(path.read_text(), path.parent)


def with_overrides(configs, seeds=None, monitors=None, horizon=None):
    out = []
    for c in configs:
        kw = {}
        if seeds is not None:
            kw["seeds"] = seeds
        if monitors is not None:
            kw["monitors"] = monitors
        if horizon is not None:
            kw["horizon"] = horizon
        out.append(replace(c, **kw))
    return out

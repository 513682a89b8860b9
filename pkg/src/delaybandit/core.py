"""Shared domain types: simplex points, delay schedules, feedback events,
and the real-to-virtual slot mapping used to audit delayed runs.

Slots are 1-indexed everywhere in this package.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

SIMPLEX_ATOL = 1e-9

# Maps an origin slot to a sort key; feedback arriving in the same slot is
# processed in ascending key order.
TieOrder = Callable[[int], Any]


def ascending_origin(origin_slot: int) -> int:
    return origin_slot


def descending_origin(origin_slot: int) -> int:
    return -origin_slot


def shuffled_origin(seed: int) -> TieOrder:
    """Tie order that ranks origin slots by a seeded random key.

    The key of a slot depends only on (seed, slot), not on call order.
    """

    def key(origin_slot: int) -> float:
        return float(np.random.default_rng([seed, origin_slot]).random())

    return key


TIE_ORDERS = {"ascending": ascending_origin, "descending": descending_origin}
# newest feedback first, the order used in the worked real-to-virtual example
DEFAULT_TIE_ORDER = descending_origin


def resolve_tie_order(spec: str | TieOrder | None) -> TieOrder:
    if spec is None:
        return DEFAULT_TIE_ORDER
    if callable(spec):
        return spec
    if spec.startswith("shuffled:"):
        return shuffled_origin(int(spec.split(":", 1)[1]))
    try:
        return TIE_ORDERS[spec]
    except KeyError:
        raise ValueError(f"unknown tie order {spec!r}") from None


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    """A point on the K-simplex. Entries are stored read-only."""

    entries: np.ndarray

    def __post_init__(self):
        p = np.array(self.entries, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probability vector must be a non-empty 1-d array")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError(f"probability entries must be finite and >= 0: {p}")
        if abs(p.sum() - 1.0) > SIMPLEX_ATOL:
            raise ValueError(f"probability entries sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "entries", _readonly(p))

    def __eq__(self, other):
        if not isinstance(other, ProbabilityVector):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    @classmethod
    def uniform(cls, k: int) -> "ProbabilityVector":
        return cls(np.full(k, 1.0 / k))

    @property
    def K(self) -> int:
        return self.entries.size

    def __len__(self) -> int:
        return self.entries.size

    def __getitem__(self, k):
        return self.entries[k]

    def min(self) -> float:
        return float(self.entries.min())


@dataclass(frozen=True, eq=False)
class DelaySchedule:
    """Per-slot feedback delays d_1..d_T.

    Feedback for slot t arrives at the end of slot t + d_t, and every
    feedback must arrive by the end of slot T.
    """

    delays: np.ndarray

    def __post_init__(self):
        d = np.array(self.delays)
        if d.ndim != 1 or d.size == 0:
            raise ValueError("delay schedule must be a non-empty 1-d sequence")
        if not np.issubdtype(d.dtype, np.integer):
            if not np.all(np.equal(np.mod(d, 1), 0)):
                raise ValueError("delays must be integers")
        d = d.astype(np.int64)
        if np.any(d < 0):
            raise ValueError("delays must be nonnegative")
        T = d.size
        slack = T - np.arange(1, T + 1)
        late = np.flatnonzero(d > slack)
        if late.size:
            t = int(late[0]) + 1
            raise ValueError(
                f"slot {t}: delay {d[t - 1]} exceeds T - t = {T - t}; "
                "feedback would arrive after the horizon"
            )
        object.__setattr__(self, "delays", _readonly(d))

    def __eq__(self, other):
        if not isinstance(other, DelaySchedule):
            return NotImplemented
        return np.array_equal(self.delays, other.delays)

    def __hash__(self):
        return hash(self.delays.tobytes())

    @classmethod
    def clamped(cls, delays: Iterable[int]) -> "DelaySchedule":
        """Build a schedule, shortening tail delays to d_t <- min(d_t, T - t)."""
        d = np.asarray(list(delays), dtype=np.int64)
        return cls(np.minimum(d, d.size - np.arange(1, d.size + 1)))

    @classmethod
    def zeros(cls, T: int) -> "DelaySchedule":
        return cls(np.zeros(T, dtype=np.int64))

    @property
    def T(self) -> int:
        return self.delays.size

    @property
    def d_bar(self) -> int:
        return int(self.delays.max())

    @property
    def total(self) -> int:
        return int(self.delays.sum())

    def delay(self, t: int) -> int:
        return int(self.delays[t - 1])

    def arrival_slot(self, t: int) -> int:
        return t + int(self.delays[t - 1])

    def arrivals(self, tie_order: TieOrder | None = None) -> dict[int, list[int]]:
        """Origin slots whose feedback arrives at each real slot, in processing order."""
        key = tie_order or DEFAULT_TIE_ORDER
        out: dict[int, list[int]] = defaultdict(list)
        for t in range(1, self.T + 1):
            out[self.arrival_slot(t)].append(t)
        return {s: sorted(v, key=key) for s, v in sorted(out.items())}

    def to_text(self) -> str:
        return "".join(f"{int(x)}\n" for x in self.delays)

    @classmethod
    def from_text(cls, text: str) -> "DelaySchedule":
        values = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values.append(int(line))
            except ValueError:
                raise ValueError(f"line {lineno}: not an integer delay: {line!r}") from None
        return cls(np.asarray(values, dtype=np.int64))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "DelaySchedule":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class FeedbackEvent:
    """One delayed observation.

    ``origin_slot`` exists for simulation bookkeeping and auditing. Learners
    that model unknown delays must only read ``payload``.
    """

    origin_slot: int
    arrival_slot: int
    payload: Any


class FeedbackQueue:
    """Holds feedback events until their arrival slot."""

    def __init__(self, tie_order: TieOrder | None = None):
        self._pending: dict[int, list[FeedbackEvent]] = defaultdict(list)
        self._key = tie_order or DEFAULT_TIE_ORDER

    def push(self, event: FeedbackEvent) -> None:
        if event.arrival_slot < event.origin_slot:
            raise ValueError("feedback cannot arrive before it is generated")
        self._pending[event.arrival_slot].append(event)

    def pop_due(self, slot: int) -> list[FeedbackEvent]:
        due = self._pending.pop(slot, [])
        return sorted(due, key=lambda e: self._key(e.origin_slot))

    def __len__(self) -> int:
        return sum(len(v) for v in self._pending.values())


@dataclass(frozen=True)
class VirtualSlotMap:
    """Real-to-virtual slot mapping of a delay schedule.

    Virtual slot tau processes the tau-th feedback to arrive. Arrays are
    indexed by tau - 1 and hold 1-indexed real slots.

    t_of_tau:   real slot whose loss is processed at virtual slot tau
    L_prefix:   L_{t(tau)-1}, feedback received before slot t(tau) starts
    s_tilde:    tau - 1 - L_{t(tau)-1}
    L_before:   L_{t-1} indexed by real slot t
    """

    t_of_tau: np.ndarray
    L_prefix: np.ndarray
    s_tilde: np.ndarray
    L_before: np.ndarray = field(repr=False)


def build_virtual_map(
    schedule: DelaySchedule, tie_order: TieOrder | str | None = None
) -> VirtualSlotMap:
    key = resolve_tie_order(tie_order)
    T = schedule.T
    arrivals = schedule.arrivals(key)
    t_of_tau = np.array([s for slot in sorted(arrivals) for s in arrivals[slot]], dtype=np.int64)
    counts = np.zeros(T + 1, dtype=np.int64)
    for slot, origins in arrivals.items():
        counts[slot] = len(origins)
    # L_before[t-1] = number of feedbacks received in slots 1..t-1
    L_before = np.concatenate(([0], np.cumsum(counts[1:T])))
    L_prefix = L_before[t_of_tau - 1]
    s_tilde = np.arange(T) - L_prefix
    return VirtualSlotMap(
        _readonly(t_of_tau), _readonly(L_prefix), _readonly(s_tilde), _readonly(L_before)
    )


@dataclass
class SlotLagReport:
    nonnegative: bool
    bounded: bool
    sum_matches: bool
    s_tilde_sum: int
    total_delay: int
    bound: int
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.nonnegative and self.bounded and self.sum_matches


def verify_slot_lag(vmap: VirtualSlotMap, schedule: DelaySchedule) -> SlotLagReport:
    """Check s~ >= 0, s~ <= 2*d_bar, and sum(s~) = D for a built map."""
    s = vmap.s_tilde
    bound = 2 * schedule.d_bar
    violations = []
    neg = np.flatnonzero(s < 0)
    if neg.size:
        tau = int(neg[0]) + 1
        violations.append(f"s~_{tau} = {s[tau - 1]} < 0")
    high = np.flatnonzero(s > bound)
    if high.size:
        tau = int(high[0]) + 1
        violations.append(f"s~_{tau} = {s[tau - 1]} > 2*d_bar = {bound}")
    total = int(s.sum())
    if total != schedule.total:
        violations.append(f"sum s~ = {total} != D = {schedule.total}")
    return SlotLagReport(
        nonnegative=not neg.size,
        bounded=not high.size,
        sum_matches=total == schedule.total,
        s_tilde_sum=total,
        total_delay=schedule.total,
        bound=bound,
        violations=violations,
    )


@dataclass(frozen=True)
class RegretTrace:
    """Cumulative learner loss against a fixed hindsight comparator."""

    learner_cumulative: np.ndarray
    comparator_cumulative: np.ndarray

    def __post_init__(self):
        a = np.array(self.learner_cumulative, dtype=float)
        b = np.array(self.comparator_cumulative, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("learner and comparator traces must be equal-length vectors")
        object.__setattr__(self, "learner_cumulative", _readonly(a))
        object.__setattr__(self, "comparator_cumulative", _readonly(b))

    @classmethod
    def from_losses(cls, learner: Sequence[float], comparator: Sequence[float]) -> "RegretTrace":
        return cls(np.cumsum(learner), np.cumsum(comparator))

    @property
    def T(self) -> int:
        return self.learner_cumulative.size

    @property
    def regret(self) -> np.ndarray:
        return self.learner_cumulative - self.comparator_cumulative

    def normalized_by_horizon(self) -> np.ndarray:
        return self.regret / self.T

    def normalized_by_slot(self) -> np.ndarray:
        return self.regret / np.arange(1, self.T + 1)

    @property
    def final_normalized(self) -> float:
        return float(self.regret[-1] / self.T)

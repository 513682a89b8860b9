"""Exponential-weights bandits under delayed feedback.

DEXP3 handles unknown delays: each arriving loss is importance-weighted by
the distribution in force when it arrives, clipped at ``delta1``, and the
resulting distribution is floored at ``delta2 / K``. EXP3 (no delay) and
BOLD (known delay, stored sampling distributions) are the baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .core import FeedbackEvent, ProbabilityVector


class MabFeedback(NamedTuple):
    arm: int
    loss: float


@dataclass(frozen=True)
class Dexp3Params:
    eta: float
    delta1: float
    delta2: float
    K: int

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.delta1 > 0:
            raise ValueError(f"delta1 must be positive, got {self.delta1}")
        # delta2 = 0 switches the floor off; only used for reductions to EXP3.
        if not 0 <= self.delta2 < 1:
            raise ValueError(f"delta2 must lie in [0, 1), got {self.delta2}")
        if self.K < 1:
            raise ValueError("K must be >= 1")

    @property
    def ratio_margin(self) -> float:
        """1 - delta2 - eta*delta1; must be >= 0 for the shrink-ratio bound."""
        return 1.0 - self.delta2 - self.eta * self.delta1

    @property
    def growth_margin(self) -> float:
        """1 - eta*delta1; must be > 0 for the growth-ratio bound."""
        return 1.0 - self.eta * self.delta1

    def satisfies_ratio_conditions(self) -> bool:
        return self.ratio_margin >= 0 and self.growth_margin > 0

    @property
    def floor(self) -> float:
        return self.delta2 / (self.K * (1.0 + self.delta2))

    def shrink_bound(self) -> float:
        """Upper bound on p_prev(k) / p_next(k) across one update."""
        return 1.0 / self.ratio_margin if self.ratio_margin > 0 else math.inf

    def growth_bound(self) -> float:
        """Upper bound on p_next(k) / p_prev(k) across one update."""
        g = 1.0 / self.growth_margin if self.growth_margin > 0 else math.inf
        return max(1.0 + self.delta2, g)


def dexp3_tuned_params(
    T: int, D: int, d_bar: int, K: int, eta_constant: float = 1.0
) -> Dexp3Params:
    """Parameters tuned for the O(sqrt(K d_bar (T+D))) regret guarantee.

    delta2 = 1/(T+D), eta = c*sqrt((1 + ln K) / (d_bar K (T+D))),
    delta1 = 1/(2 eta d_bar) - delta2/eta.
    """
    if d_bar < 1:
        raise ValueError("d_bar must be >= 1 (zero-delay runs reduce to EXP3)")
    if T < 1 or D < 0 or K < 1:
        raise ValueError("need T >= 1, D >= 0, K >= 1")
    if T + D < 2:
        # delta2 = 1/(T+D) would be 1, outside (0, 1)
        raise ValueError(f"T + D = {T + D} is too short a horizon; need T + D >= 2")
    n = T + D
    if n <= 2 * d_bar:
        # any schedule with max delay d_bar has T >= d_bar + 1 and D >= d_bar
        raise ValueError(f"T + D = {n} is inconsistent with d_bar = {d_bar}; need T + D > 2 d_bar")
    delta2 = 1.0 / n
    eta = eta_constant * math.sqrt((1.0 + math.log(K)) / (d_bar * K * n))
    delta1 = 1.0 / (2.0 * eta * d_bar) - delta2 / eta
    return Dexp3Params(eta=eta, delta1=delta1, delta2=delta2, K=K)


def sample_arm(p: ProbabilityVector, rng: np.random.Generator) -> int:
    """Inverse-CDF draw: first index whose cumulative mass reaches u."""
    cdf = np.cumsum(p.entries)
    # u in (0, total] so a zero-mass arm can never be the first to reach u
    u = (1.0 - rng.random()) * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="left")), p.K - 1)


def _check_loss(loss: float) -> float:
    if not 0.0 <= loss <= 1.0:
        raise ValueError(f"observed loss {loss} outside [0, 1]")
    return float(loss)


@dataclass(frozen=True)
class Dexp3State:
    p: ProbabilityVector
    params: Dexp3Params
    rng_seed: int | None = None

    @classmethod
    def initial(cls, params: Dexp3Params, rng_seed: int | None = None) -> "Dexp3State":
        return cls(ProbabilityVector.uniform(params.K), params, rng_seed)

    def dump(self) -> dict:
        return {
            "p": self.p.entries.tolist(),
            "eta": self.params.eta,
            "delta1": self.params.delta1,
            "delta2": self.params.delta2,
            "K": self.params.K,
        }


def dexp3_select_arm(state: Dexp3State, rng: np.random.Generator) -> int:
    return sample_arm(state.p, rng)


def dexp3_estimate_loss(
    observed_loss: float, observed_arm: int, p_current: ProbabilityVector
) -> np.ndarray:
    """Importance-weighted loss estimate scaled by the *current* distribution.

    The arm was drawn from an earlier distribution the learner cannot
    identify, so the estimate is biased by p_origin(k) / p_current(k).
    """
    loss = _check_loss(observed_loss)
    est = np.zeros(p_current.K)
    if loss:
        est[observed_arm] = loss / p_current[observed_arm]
    return est


def dexp3_apply_feedback(state: Dexp3State, estimate: np.ndarray) -> Dexp3State:
    prm = state.params
    # clip before exponentiating so a tiny p_current cannot overflow
    capped = np.minimum(prm.delta1, estimate)
    w_tilde = state.p.entries * np.exp(-prm.eta * capped)
    p_hat = w_tilde / w_tilde.sum()
    floor = prm.delta2 / prm.K
    if np.any(p_hat < floor):
        w = np.maximum(p_hat, floor)
        p_hat = w / w.sum()
    # with no entry floored the second normalization is the identity; skipping
    # it keeps the step bit-compatible with plain exponential weights
    return Dexp3State(ProbabilityVector(p_hat), prm, state.rng_seed)


def dexp3_end_of_slot(
    state: Dexp3State, feedbacks: Sequence[tuple[float, int]]
) -> Dexp3State:
    """Apply every (loss, arm) pair received this slot, in order."""
    for loss, arm in feedbacks:
        state = dexp3_apply_feedback(state, dexp3_estimate_loss(loss, arm, state.p))
    return state


def exp3_step(
    p: ProbabilityVector, observed_loss: float, observed_arm: int, eta: float
) -> ProbabilityVector:
    if np.any(p.entries == 0):
        raise ValueError("EXP3 needs a strictly positive distribution")
    est = np.zeros(p.K)
    est[observed_arm] = observed_loss / p[observed_arm]
    w = p.entries * np.exp(-eta * est)
    return ProbabilityVector(w / w.sum())


@dataclass(frozen=True)
class BoldState:
    p: ProbabilityVector
    eta: float
    stored_distributions: dict[int, ProbabilityVector] = field(default_factory=dict)

    def dump(self) -> dict:
        return {"p": self.p.entries.tolist(), "eta": self.eta,
                "outstanding": sorted(self.stored_distributions)}


def bold_record(state: BoldState, slot: int) -> BoldState:
    """Remember the distribution used to draw the arm at ``slot``."""
    stored = dict(state.stored_distributions)
    stored[slot] = state.p
    return BoldState(state.p, state.eta, stored)


def bold_apply_feedback(
    state: BoldState, origin_slot: int, observed_loss: float, observed_arm: int
) -> BoldState:
    if origin_slot not in state.stored_distributions:
        raise KeyError(f"no stored distribution for slot {origin_slot}")
    stored = dict(state.stored_distributions)
    p_origin = stored.pop(origin_slot)
    est = np.zeros(state.p.K)
    est[observed_arm] = _check_loss(observed_loss) / p_origin[observed_arm]
    w = state.p.entries * np.exp(-state.eta * est)
    return BoldState(ProbabilityVector(w / w.sum()), state.eta, stored)


# Learner objects driven by the simulation loop. ``end_of_slot`` returns the
# distribution after each individual update (one per virtual slot).


class Dexp3Learner:
    name = "DEXP3"
    delayed = True

    def __init__(self, params: Dexp3Params):
        self.state = Dexp3State.initial(params)

    @property
    def p(self) -> ProbabilityVector:
        return self.state.p

    def select(self, rng: np.random.Generator) -> int:
        return dexp3_select_arm(self.state, rng)

    def end_of_slot(self, events: Sequence[FeedbackEvent]) -> list[ProbabilityVector]:
        history = []
        for ev in events:
            fb = ev.payload
            self.state = dexp3_end_of_slot(self.state, [(fb.loss, fb.arm)])
            history.append(self.state.p)
        return history

    def dump(self) -> dict:
        return self.state.dump()


class Exp3Learner:
    """Plain EXP3. The harness pairs it with a zero-delay schedule."""

    name = "EXP3"
    delayed = False

    def __init__(self, eta: float, K: int):
        self.eta = eta
        self.p = ProbabilityVector.uniform(K)

    def select(self, rng: np.random.Generator) -> int:
        return sample_arm(self.p, rng)

    def end_of_slot(self, events: Sequence[FeedbackEvent]) -> list[ProbabilityVector]:
        history = []
        for ev in events:
            self.p = exp3_step(self.p, ev.payload.loss, ev.payload.arm, self.eta)
            history.append(self.p)
        return history

    def dump(self) -> dict:
        return {"p": self.p.entries.tolist(), "eta": self.eta}


class BoldLearner:
    """Delayed EXP3 with known delays: reads the origin slot of each event."""

    name = "BOLD"
    delayed = True

    def __init__(self, eta: float, K: int):
        self.state = BoldState(ProbabilityVector.uniform(K), eta)
        self._slot = 0

    @property
    def p(self) -> ProbabilityVector:
        return self.state.p

    def select(self, rng: np.random.Generator) -> int:
        self._slot += 1
        self.state = bold_record(self.state, self._slot)
        return sample_arm(self.state.p, rng)

    def end_of_slot(self, events: Sequence[FeedbackEvent]) -> list[ProbabilityVector]:
        history = []
        for ev in events:
            self.state = bold_apply_feedback(
                self.state, ev.origin_slot, ev.payload.loss, ev.payload.arm
            )
            history.append(self.state.p)
        return history

    def dump(self) -> dict:
        return self.state.dump()

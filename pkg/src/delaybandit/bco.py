"""Bandit convex optimization with delayed feedback.

DBGD plays x_t and queries x_t + delta*e_k for every coordinate. The K+1
values come back together after an unknown delay and give a deterministic
finite-difference gradient, so nothing about the origin slot is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .core import FeedbackEvent


@dataclass(frozen=True)
class FeasibleSet:
    """A ball centred at the origin or an axis-aligned box, shrunk by (1 - shrink).

    The shrunk set is X_delta = {x : x / (1 - delta) in X}.
    """

    kind: str = "ball"
    radius: float = 1.0
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    shrink: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ball", "box"):
            raise ValueError(f"unknown feasible set kind {self.kind!r}")
        if not 0.0 <= self.shrink < 1.0:
            raise ValueError("shrink must lie in [0, 1)")
        if self.kind == "ball" and not self.radius > 0:
            raise ValueError("ball radius must be positive")
        if self.kind == "box":
            if self.lower is None or self.upper is None or len(self.lower) != len(self.upper):
                raise ValueError("box needs lower and upper bounds of equal length")
            lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
            if np.any(lo > 0) or np.any(hi < 0):
                raise ValueError("box must contain the origin")
            object.__setattr__(self, "lower", tuple(map(float, lo)))
            object.__setattr__(self, "upper", tuple(map(float, hi)))

    @classmethod
    def ball(cls, radius: float = 1.0) -> "FeasibleSet":
        return cls("ball", radius=radius)

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> "FeasibleSet":
        return cls("box", lower=tuple(lower), upper=tuple(upper))

    def shrunk(self, delta: float) -> "FeasibleSet":
        return replace(self, shrink=delta)

    @property
    def scale(self) -> float:
        return 1.0 - self.shrink

    def max_norm(self) -> float:
        """Largest Euclidean norm of a point in the (unshrunk) set."""
        if self.kind == "ball":
            return self.radius
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def contains(self, x: np.ndarray, atol: float = 1e-12) -> bool:
        x = np.asarray(x, float)
        if self.kind == "ball":
            return bool(np.linalg.norm(x) <= self.scale * self.radius + atol)
        lo = self.scale * np.asarray(self.lower)
        hi = self.scale * np.asarray(self.upper)
        return bool(np.all(x >= lo - atol) and np.all(x <= hi + atol))


def project(fset: FeasibleSet, x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the (shrunk) feasible set."""
    x = np.asarray(x, dtype=float)
    if fset.kind == "ball":
        r = fset.scale * fset.radius
        n = np.linalg.norm(x)
        return x if n <= r else x * (r / n)
    return np.clip(x, fset.scale * np.asarray(fset.lower), fset.scale * np.asarray(fset.upper))


def estimate_gradient_multipoint(
    f_at_x: float, f_at_queries: Sequence[float], delta: float
) -> np.ndarray:
    """g(k) = (f(x + delta e_k) - f(x)) / delta."""
    if not delta > 0:
        raise ValueError(f"query radius must be positive, got {delta}")
    return (np.asarray(f_at_queries, dtype=float) - f_at_x) / delta


def dbgd_tuned_params(
    T: int, D: int, K: int, eta_constant: float = 1.0, delta_constant: float = 1.0
) -> tuple[float, float]:
    """Step size and query radius for the O(sqrt(K(T+D))) guarantee.

    delta = min(0.5, c_d/(T+D)) and eta = c_e/sqrt(K(T+D)).
    """
    if T < 1 or D < 0 or K < 1:
        raise ValueError("need T >= 1, D >= 0, K >= 1")
    n = T + D
    delta = min(0.5, delta_constant / n)
    eta = eta_constant / np.sqrt(K * n)
    return float(eta), float(delta)


class MultiPointFeedback(NamedTuple):
    value: float
    query_values: np.ndarray
    point: np.ndarray
    queries: np.ndarray


class GradientFeedback(NamedTuple):
    gradient: np.ndarray


class OnePointFeedback(NamedTuple):
    value: float
    direction: np.ndarray


@dataclass(frozen=True)
class DbgdState:
    x: np.ndarray
    eta: float
    delta: float
    set: FeasibleSet

    @classmethod
    def initial(cls, dim: int, eta: float, delta: float, fset: FeasibleSet) -> "DbgdState":
        x0 = np.zeros(dim)
        if not fset.shrunk(delta).contains(x0):
            raise ValueError("the origin must lie in the shrunk feasible set")
        return cls(x0, eta, delta, fset)

    @property
    def shrunk_set(self) -> FeasibleSet:
        return self.set.shrunk(self.delta)

    def queries(self) -> np.ndarray:
        return self.x[None, :] + self.delta * np.eye(self.x.size)

    def dump(self) -> dict:
        return {"x": self.x.tolist(), "eta": self.eta, "delta": self.delta}


def dbgd_end_of_slot(
    state: DbgdState, feedbacks: Sequence[tuple[float, Sequence[float]]]
) -> DbgdState:
    """Apply each arrived (f(x_s), [f(x_s + delta e_k)]) observation in order."""
    x = state.x
    target = state.shrunk_set
    for f_x, f_q in feedbacks:
        g = estimate_gradient_multipoint(f_x, f_q, state.delta)
        x = project(target, x - state.eta * g)
    return replace(state, x=x)


def ogd_step(x: np.ndarray, gradient: np.ndarray, eta: float, fset: FeasibleSet) -> np.ndarray:
    return project(fset, np.asarray(x, float) - eta * np.asarray(gradient, float))


def solid_end_of_slot(
    x: np.ndarray, delayed_gradients: Sequence[np.ndarray], eta: float, fset: FeasibleSet
) -> np.ndarray:
    for g in delayed_gradients:
        x = ogd_step(x, g, eta, fset)
    return np.asarray(x, float)


def sample_unit_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def fkm_step(
    x: np.ndarray,
    observed_value: float,
    u: np.ndarray,
    eta: float,
    delta: float,
    fset: FeasibleSet,
    K: int,
    delayed: bool = False,
) -> np.ndarray:
    """One-point spherical estimate g = (K/delta) f(x + delta u) u, then a projected step.

    Only valid without delay: a delayed value cannot be matched to its u.
    """
    if delayed:
        raise ValueError("one-point estimator cannot be used on a delayed feedback stream")
    g = (K / delta) * observed_value * np.asarray(u, float)
    return project(fset.shrunk(delta), np.asarray(x, float) - eta * g)


class DbgdLearner:
    name = "DBGD"
    delayed = True
    feedback = "multipoint"

    def __init__(self, dim: int, eta: float, delta: float, fset: FeasibleSet):
        self.state = DbgdState.initial(dim, eta, delta, fset)

    @property
    def x(self) -> np.ndarray:
        return self.state.x

    def act(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        return self.state.x, self.state.queries()

    def end_of_slot(self, events: Sequence[FeedbackEvent]) -> list[np.ndarray]:
        iterates = []
        for ev in events:
            fb = ev.payload
            self.state = dbgd_end_of_slot(self.state, [(fb.value, fb.query_values)])
            iterates.append(self.state.x)
        return iterates

    def dump(self) -> dict:
        return self.state.dump()


class BgdLearner(DbgdLearner):
    """(K+1)-point bandit gradient descent without delay."""

    name = "BGD"
    delayed = False


class OgdLearner:
    """Full-information online gradient descent, no delay."""

    name = "OGD"
    delayed = False
    feedback = "gradient"

    def __init__(self, dim: int, eta: float, fset: FeasibleSet):
        self.eta = eta
        self.set = fset
        self.x = np.zeros(dim)

    def act(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        return self.x, np.empty((0, self.x.size))

    def end_of_slot(self, events: Sequence[FeedbackEvent]) -> list[np.ndarray]:
        iterates = []
        for ev in events:
            self.x = solid_end_of_slot(self.x, [ev.payload.gradient], self.eta, self.set)
            iterates.append(self.x)
        return iterates

    def dump(self) -> dict:
        return {"x": self.x.tolist(), "eta": self.eta}


class SolidLearner(OgdLearner):
    """Full-information gradients applied when they arrive."""

    name = "SOLID"
    delayed = True


class FkmLearner:
    """One-point spherical-sampling BCO, no delay."""

    name = "FKM"
    delayed = False
    feedback = "onepoint"

    def __init__(self, dim: int, eta: float, delta: float, fset: FeasibleSet):
        self.eta, self.delta, self.set = eta, delta, fset
        self.x = np.zeros(dim)
        self.direction: np.ndarray | None = None

    def act(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        self.direction = sample_unit_vector(self.x.size, rng)
        return self.x, (self.x + self.delta * self.direction)[None, :]

    def end_of_slot(self, events: Sequence[FeedbackEvent]) -> list[np.ndarray]:
        iterates = []
        for ev in events:
            delayed = ev.arrival_slot != ev.origin_slot
            fb = ev.payload
            self.x = fkm_step(self.x, fb.value, fb.direction, self.eta, self.delta,
                              self.set, self.x.size, delayed=delayed)
            iterates.append(self.x)
        return iterates

    def dump(self) -> dict:
        return {"x": self.x.tolist(), "eta": self.eta, "delta": self.delta}

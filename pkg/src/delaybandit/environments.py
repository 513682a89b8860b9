"""Loss sequences, delay schedules, dataset loaders and hindsight comparators."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bco import FeasibleSet, project
from .core import DelaySchedule

DEFAULT_PATTERN = (1, 2, 1, 0, 3, 0, 2)


class DatasetError(ValueError):
    """A dataset file could not be parsed; the message names the line."""


# ----------------------------------------------------------------------------
# delays


def periodic_delays(T: int, pattern: Sequence[int] = DEFAULT_PATTERN) -> DelaySchedule:
    """Repeat ``pattern`` over T slots, then clamp so all feedback lands by slot T."""
    pattern = [int(d) for d in pattern]
    if not pattern or any(d < 0 for d in pattern):
        raise ValueError("pattern must be a non-empty list of nonnegative integers")
    return DelaySchedule.clamped(pattern[(t - 1) % len(pattern)] for t in range(1, T + 1))


def random_delays(T: int, max_delay: int, rng: np.random.Generator) -> DelaySchedule:
    """Uniform delays in [0, max_delay], clamped at the horizon."""
    return DelaySchedule.clamped(rng.integers(0, max_delay + 1, size=T))


# ----------------------------------------------------------------------------
# multi-armed bandit losses


@dataclass(frozen=True)
class MabEnvironment:
    loss_matrix: np.ndarray  # T x K, entries in [0, 1]

    def __post_init__(self):
        L = np.array(self.loss_matrix, dtype=float)
        if L.ndim != 2:
            raise ValueError("loss matrix must be T x K")
        if np.any(L < 0) or np.any(L > 1):
            raise ValueError("losses must lie in [0, 1]")
        L.setflags(write=False)
        object.__setattr__(self, "loss_matrix", L)

    @property
    def T(self) -> int:
        return self.loss_matrix.shape[0]

    @property
    def K(self) -> int:
        return self.loss_matrix.shape[1]

    def loss(self, t: int, arm: int) -> float:
        return float(self.loss_matrix[t - 1, arm])


def synthetic_mab_losses(T: int, K: int = 5, change_slot: int = 500) -> MabEnvironment:
    """Losses with an abrupt change: 0.4k|cos t| up to ``change_slot``, then 0.2k|sin 2t|.

    Arm k is 1-indexed in the formula. Values above 1 are clamped.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    t = np.arange(1, T + 1, dtype=float)[:, None]
    k = np.arange(1, K + 1, dtype=float)[None, :]
    raw = np.where(t <= change_slot, 0.4 * k * np.abs(np.cos(t)), 0.2 * k * np.abs(np.sin(2 * t)))
    return MabEnvironment(np.clip(raw, 0.0, 1.0))


def _split_row(line: str) -> list[str]:
    if "," in line or ";" in line:
        return [c.strip() for c in re.split(r"[,;]", line)]
    return line.split()


def load_ratings_dataset(
    path: str | Path,
    K: int,
    missing_fill_seed: int | np.random.Generator = 0,
    score_range: tuple[float, float] = (0.0, 1.0),
    missing_values: Sequence[str] = ("", "99", "nan", "NA"),
    skip_columns: int = 0,
) -> MabEnvironment:
    """One user per row, one column per item. Loss is 1 - normalized score.

    Scores are mapped linearly from ``score_range`` onto [0, 1]; missing cells
    get a uniform random score drawn from the seeded stream.
    """
    rng = (missing_fill_seed if isinstance(missing_fill_seed, np.random.Generator)
           else np.random.default_rng(missing_fill_seed))
    lo, hi = score_range
    missing = set(missing_values)
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        cells = _split_row(raw)[skip_columns:]
        if len(cells) < K:
            raise DatasetError(f"{path}:{lineno}: expected {K} scores, found {len(cells)}")
        row = []
        for j, cell in enumerate(cells[:K], 1):
            if cell in missing:
                row.append(math.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: column {j}: not a number: {cell!r}") from None
            if not lo <= v <= hi:
                raise DatasetError(f"{path}:{lineno}: column {j}: score {v} outside [{lo}, {hi}]")
            row.append((v - lo) / (hi - lo))
        rows.append(row)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    scores = np.array(rows)
    gaps = np.isnan(scores)
    scores[gaps] = rng.random(int(gaps.sum()))
    return MabEnvironment(1.0 - scores)


def best_fixed_arm(env: MabEnvironment) -> tuple[int, float]:
    """Arm with the smallest cumulative loss; ties go to the lowest index."""
    totals = env.loss_matrix.sum(axis=0)
    k = int(np.argmin(totals))
    return k, float(totals[k])


# ----------------------------------------------------------------------------
# bandit convex optimization losses


class BcoEnvironment:
    """A sequence of convex losses f_1..f_T on R^dim with exact gradients.

    Subclasses provide per-slot Lipschitz and smoothness constants on a
    feasible set, which the invariant monitors use.
    """

    T: int
    dim: int

    def value(self, t: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def values(self, t: int, points: np.ndarray) -> np.ndarray:
        return np.array([self.value(t, p) for p in points])

    def gradient(self, t: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lipschitz(self, t: int, fset: FeasibleSet) -> float:
        raise NotImplementedError

    def smoothness(self, t: int) -> float:
        raise NotImplementedError

    def losses_at(self, x: np.ndarray) -> np.ndarray:
        """f_t(x) for every slot."""
        return np.array([self.value(t, x) for t in range(1, self.T + 1)])


class QuadraticEnvironment(BcoEnvironment):
    """f_t(x) = a_t ||x||^2 + b_t . x with a_t >= 0."""

    def __init__(self, a: np.ndarray, b: np.ndarray):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.ndim != 1 or b.ndim != 2 or a.size != b.shape[0]:
            raise ValueError("need a of shape (T,) and b of shape (T, dim)")
        if np.any(a < 0):
            raise ValueError("a_t must be nonnegative for convexity")
        self.a, self.b = a, b
        self.T, self.dim = b.shape

    def value(self, t: int, x: np.ndarray) -> float:
        x = np.asarray(x, float)
        return float(self.a[t - 1] * (x @ x) + self.b[t - 1] @ x)

    def values(self, t: int, points: np.ndarray) -> np.ndarray:
        P = np.asarray(points, float)
        return self.a[t - 1] * np.einsum("ij,ij->i", P, P) + P @ self.b[t - 1]

    def gradient(self, t: int, x: np.ndarray) -> np.ndarray:
        return 2.0 * self.a[t - 1] * np.asarray(x, float) + self.b[t - 1]

    def lipschitz(self, t: int, fset: FeasibleSet) -> float:
        return float(2.0 * self.a[t - 1] * fset.max_norm() + np.linalg.norm(self.b[t - 1]))

    def smoothness(self, t: int) -> float:
        return float(2.0 * self.a[t - 1])

    def losses_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        return self.a * (x @ x) + self.b @ x


def _oscillating_b(t: np.ndarray) -> np.ndarray:
    return np.stack(
        [
            2 * np.sin(2 * t) + 1,
            np.cos(2 * t) - 2,
            np.sin(2 * t),
            2 * np.sin(2 * t) - 2,
            np.full_like(t, 2.0),
        ],
        axis=1,
    )


def synthetic_bco_functions(T: int) -> QuadraticEnvironment:
    """Five-dimensional quadratics with a_t = cos(3t) + 3 in [2, 4]."""
    t = np.arange(1, T + 1, dtype=float)
    return QuadraticEnvironment(np.cos(3 * t) + 3, _oscillating_b(t))


def synthetic_linear_functions(T: int) -> QuadraticEnvironment:
    """The synthetic b_t sequence with the quadratic term dropped: f_t(x) = b_t . x."""
    t = np.arange(1, T + 1, dtype=float)
    return QuadraticEnvironment(np.zeros(T), _oscillating_b(t))


class RegressionEnvironment(BcoEnvironment):
    """f_t(x) = 0.5 (y_t - x . w_t)^2."""

    def __init__(self, features: np.ndarray, targets: np.ndarray):
        W = np.asarray(features, dtype=float)
        y = np.asarray(targets, dtype=float)
        if W.ndim != 2 or y.shape != (W.shape[0],):
            raise ValueError("need features of shape (T, dim) and targets of shape (T,)")
        self.W, self.y = W, y
        self.T, self.dim = W.shape

    def value(self, t: int, x: np.ndarray) -> float:
        r = self.y[t - 1] - np.asarray(x, float) @ self.W[t - 1]
        return float(0.5 * r * r)

    def values(self, t: int, points: np.ndarray) -> np.ndarray:
        r = self.y[t - 1] - np.asarray(points, float) @ self.W[t - 1]
        return 0.5 * r * r

    def gradient(self, t: int, x: np.ndarray) -> np.ndarray:
        w = self.W[t - 1]
        return -(self.y[t - 1] - np.asarray(x, float) @ w) * w

    def lipschitz(self, t: int, fset: FeasibleSet) -> float:
        wn = float(np.linalg.norm(self.W[t - 1]))
        return (abs(self.y[t - 1]) + fset.max_norm() * wn) * wn

    def smoothness(self, t: int) -> float:
        w = self.W[t - 1]
        return float(w @ w)

    def losses_at(self, x: np.ndarray) -> np.ndarray:
        r = self.y - self.W @ np.asarray(x, float)
        return 0.5 * r * r


def load_regression_dataset(path: str | Path, standardize: bool = True) -> RegressionEnvironment:
    """Rows of K features followed by one target, comma- or whitespace-delimited.

    With ``standardize`` every feature column is shifted and scaled to zero
    mean and unit variance; constant columns are only centred.
    """
    rows = []
    width = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        cells = [c for c in _split_row(raw.strip()) if c != ""]
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise DatasetError(f"{path}:{lineno}: non-numeric cell in {raw!r}") from None
        if width is None:
            if len(vals) < 2:
                raise DatasetError(f"{path}:{lineno}: need at least one feature and a target")
            width = len(vals)
        elif len(vals) != width:
            raise DatasetError(f"{path}:{lineno}: expected {width} columns, found {len(vals)}")
        rows.append(vals)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    data = np.array(rows)
    W, y = data[:, :-1], data[:, -1]
    if standardize:
        mu = W.mean(axis=0)
        sd = W.std(axis=0)
        W = (W - mu) / np.where(sd > 0, sd, 1.0)
    return RegressionEnvironment(W, y)


# ----------------------------------------------------------------------------
# hindsight comparator for BCO


class ConvergenceError(RuntimeError):
    pass


def _summed_gradient(env: BcoEnvironment):
    if isinstance(env, QuadraticEnvironment):
        A, B = env.a.sum(), env.b.sum(axis=0)
        return (lambda x: 2 * A * x + B), 2 * A
    if isinstance(env, RegressionEnvironment):
        H = env.W.T @ env.W
        c = env.W.T @ env.y
        return (lambda x: H @ x - c), float(np.linalg.eigvalsh(H).max())
    raise TypeError(f"unsupported environment {type(env).__name__}")


def _projected_descent(grad, beta, fset, x0, tol, max_iter):
    step = 1.0 / beta if beta > 0 else 1.0
    x = project(fset, x0)
    for _ in range(max_iter):
        x_next = project(fset, x - step * grad(x))
        if np.linalg.norm(x - x_next) / step <= tol:
            return x_next
        x = x_next
    raise ConvergenceError(f"projected descent did not reach gradient-map norm {tol} "
                           f"in {max_iter} iterations")


def best_fixed_point(
    env: BcoEnvironment,
    fset: FeasibleSet,
    method: str = "closed",
    tol: float = 1e-8,
    max_iter: int = 200_000,
) -> tuple[np.ndarray, float]:
    """Minimizer of sum_t f_t over the feasible set, and the minimum value.

    ``closed`` uses the closed form for quadratic sums (exact on balls and
    boxes because the summed quadratic is isotropic) and then polishes with
    projected descent; ``descent`` runs projected descent from the origin.
    """
    if method not in ("closed", "descent"):
        raise ValueError(f"unknown method {method!r}")
    grad, beta = _summed_gradient(env)
    x0 = np.zeros(env.dim)
    if method == "closed" and isinstance(env, QuadraticEnvironment):
        A, B = env.a.sum(), env.b.sum(axis=0)
        if A > 0:
            x0 = project(fset, -B / (2 * A))
        elif fset.kind == "ball":
            nb = np.linalg.norm(B)
            x0 = -fset.scale * fset.radius * B / nb if nb > 0 else x0
        else:
            lo = fset.scale * np.asarray(fset.lower)
            hi = fset.scale * np.asarray(fset.upper)
            x0 = np.where(B > 0, lo, np.where(B < 0, hi, 0.0))
        if A == 0:
            return x0, float(env.losses_at(x0).sum())
    x = _projected_descent(grad, beta, fset, x0, tol, max_iter)
    return x, float(env.losses_at(x).sum())

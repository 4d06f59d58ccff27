"""Successive measurements: joint statistics, the mixing law, and sampling.

``joint_distribution`` composes operations, ``joint_via_conditional`` chains
output distributions and output states. The second form only needs the
statistical behaviour of each apparatus (anything with a ``measure(rho)``
method returning :class:`~qreduce.apparatus.OutcomeStatistics`), so it also
accepts state-update rules that have no superoperator description.

When the first outcome has probability at or below the floor its conditional
branch contributes exactly 0 to the joint distribution.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Protocol, Sequence

import numpy as np

from qreduce.apparatus import (
    Apparatus,
    OperationalDistribution,
    OutcomeStatistics,
    as_distribution,
    match_outcome,
    measure,
)
from qreduce.errors import DimensionError, ZeroProbability
from qreduce.operators import DEFAULT_TOL, DiscreteObservable
from qreduce.randomness import make_rng
from qreduce.superop import SuperOperator, apply, compose


class Measurer(Protocol):
    def measure(self, rho: np.ndarray) -> OutcomeStatistics: ...


@dataclass(frozen=True)
class JointDistribution:
    entries: dict[tuple[float, float], float]

    def __getitem__(self, key: tuple[float, float]) -> float:
        return self.entries[key]

    def get(self, x: float, y: float, tol: float = DEFAULT_TOL.outcome) -> float:
        for (a, b), p in self.entries.items():
            if abs(a - x) <= tol and abs(b - y) <= tol:
                return p
        return 0.0

    def total(self) -> float:
        return float(sum(self.entries.values()))

    def marginal_x(self) -> dict[float, float]:
        out: dict[float, float] = {}
        for (x, _), p in self.entries.items():
            out[x] = out.get(x, 0.0) + p
        return out

    def marginal_y(self) -> dict[float, float]:
        out: dict[float, float] = {}
        for (_, y), p in self.entries.items():
            out[y] = out.get(y, 0.0) + p
        return out

    def max_deviation(self, other: "JointDistribution") -> float:
        keys = set(self.entries) | set(other.entries)
        return max(abs(self.entries.get(k, 0.0) - other.entries.get(k, 0.0)) for k in keys)


def _check_dims(*dims: int) -> None:
    if len(set(dims)) != 1:
        raise DimensionError(f"dimension mismatch along the measurement chain: {dims}")


def joint_distribution(app1: Apparatus, app2: Apparatus, rho: np.ndarray) -> JointDistribution:
    """``Pr{x, y | rho} = Tr[Y(y) X(x) rho]``."""
    rho = np.asarray(rho, dtype=complex)
    _check_dims(app1.dim, app2.dim, rho.shape[0])
    out = {}
    for (x, X), (y, Y) in product(app1.opdist.items(), app2.opdist.items()):
        out[(x, y)] = float(np.trace(apply(compose(Y, X), rho)).real)
    return JointDistribution(out)


def _stats(app: Measurer | Apparatus, rho: np.ndarray) -> OutcomeStatistics:
    return app.measure(rho)


def joint_via_conditional(app1: Measurer, app2: Measurer, rho: np.ndarray) -> JointDistribution:
    """``Pr{x, y | rho} = Pr{y | rho_x} Pr{x | rho}``."""
    rho = np.asarray(rho, dtype=complex)
    first = _stats(app1, rho)
    out = {}
    second_outcomes = None
    for x, rec in first.entries.items():
        if rec.state is None:
            continue
        second = _stats(app2, rec.state)
        second_outcomes = list(second.entries)
        for y, rec2 in second.entries.items():
            out[(x, y)] = rec2.probability * rec.probability
    if second_outcomes is None:
        second_outcomes = list(_stats(app2, rho).entries)
    for x in first.entries:
        for y in second_outcomes:
            out.setdefault((x, y), 0.0)
    return JointDistribution(dict(sorted(out.items())))


def check_mixing_law(
    app1: Measurer,
    app2: Measurer,
    rho1: np.ndarray,
    rho2: np.ndarray,
    alpha: float,
) -> float:
    """Largest violation of affine dependence of the joint distribution on the input."""
    if not 0 < alpha < 1:
        raise ValueError("mixing weight must lie strictly between 0 and 1")
    rho1, rho2 = np.asarray(rho1, dtype=complex), np.asarray(rho2, dtype=complex)
    if rho1.shape != rho2.shape:
        raise DimensionError("states of different dimension")
    mixed = joint_via_conditional(app1, app2, alpha * rho1 + (1 - alpha) * rho2)
    j1 = joint_via_conditional(app1, app2, rho1)
    j2 = joint_via_conditional(app1, app2, rho2)
    keys = set(mixed.entries) | set(j1.entries) | set(j2.entries)
    return max(
        abs(mixed.entries.get(k, 0.0) - alpha * j1.entries.get(k, 0.0) - (1 - alpha) * j2.entries.get(k, 0.0))
        for k in keys
    )


# --- set-indexed view -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PsvMeasureView:
    """Set-indexed form ``E(D) = sum_{x in D} X(x)`` of an operational distribution."""

    opdist: OperationalDistribution

    @classmethod
    def of(cls, app: Apparatus | OperationalDistribution) -> "PsvMeasureView":
        return cls(as_distribution(app))

    def superoperator(self, outcomes: Iterable[float]) -> SuperOperator:
        d = self.opdist.dim
        t = np.zeros((d * d, d * d), dtype=complex)
        for x in set(outcomes):
            key = match_outcome(self.opdist.outcomes, x, self.opdist.tol.outcome)
            if key is not None:
                t = t + self.opdist[key].transfer
        return SuperOperator(d, t)

    def total(self) -> SuperOperator:
        return self.superoperator(self.opdist.outcomes)


def psv_probability(view: PsvMeasureView, outcomes: Iterable[float], rho: np.ndarray) -> float:
    rho = np.asarray(rho, dtype=complex)
    _check_dims(view.opdist.dim, rho.shape[0])
    return float(np.trace(apply(view.superoperator(outcomes), rho)).real)


def psv_output_state(view: PsvMeasureView, outcomes: Iterable[float], rho: np.ndarray) -> np.ndarray:
    outcomes = list(outcomes)
    rho = np.asarray(rho, dtype=complex)
    _check_dims(view.opdist.dim, rho.shape[0])
    y = apply(view.superoperator(outcomes), rho)
    p = float(np.trace(y).real)
    if p <= view.opdist.tol.prob_floor:
        raise ZeroProbability(f"outcome set {outcomes} has probability {p:.3e}")
    return y / p


def nonselective_marginal(app: Apparatus, B: DiscreteObservable, rho: np.ndarray) -> dict[float, float]:
    """Distribution of a subsequent ``B`` measurement when the first outcome is ignored."""
    rho = np.asarray(rho, dtype=complex)
    _check_dims(app.dim, B.dim, rho.shape[0])
    t_rho = apply(app.opdist.total(), rho)
    return {b: float(np.trace(E @ t_rho).real) for b, E in B.outcomes}


# --- Monte Carlo ----------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryStep:
    outcome: float
    state: np.ndarray


def sample_trajectory(
    apps: Sequence[Apparatus],
    rho0: np.ndarray,
    seed: int | np.random.Generator,
) -> list[TrajectoryStep]:
    """Draw one run of the measurement chain.

    At each step the outcome is drawn from the current output distribution
    (inverse-CDF over outcomes in ascending order, one uniform per step) and
    the state advances to the corresponding output state.
    """
    rng = make_rng(seed)
    rho = np.asarray(rho0, dtype=complex)
    _check_dims(rho.shape[0], *(a.dim for a in apps))
    steps = []
    for app in apps:
        stats = measure(app, rho)
        xs = list(stats.entries)
        # indefinite branches are never drawn
        probs = [stats[x].probability if stats[x].state is not None else 0.0 for x in xs]
        cdf = np.cumsum(probs)
        u = rng.random() * cdf[-1]
        k = min(int(np.searchsorted(cdf, u, side="right")), len(xs) - 1)
        rho = stats[xs[k]].state
        steps.append(TrajectoryStep(xs[k], rho))
    return steps


def chain_probabilities(apps: Sequence[Apparatus], rho0: np.ndarray) -> dict[tuple[float, ...], float]:
    """Exact probability of every outcome sequence, ``Tr[X_n ... X_1 rho]``."""
    rho = np.asarray(rho0, dtype=complex)
    _check_dims(rho.shape[0], *(a.dim for a in apps))
    out = {}
    for combo in product(*(list(a.opdist.items()) for a in apps)):
        y = rho
        for _, L in combo:
            y = apply(L, y)
        out[tuple(x for x, _ in combo)] = float(np.trace(y).real)
    return out


def empirical_frequencies(runs: Iterable[Sequence[TrajectoryStep]]) -> tuple[dict[tuple[float, ...], int], int]:
    counts: dict[tuple[float, ...], int] = {}
    n = 0
    for run in runs:
        key = tuple(s.outcome for s in run)
        counts[key] = counts.get(key, 0) + 1
        n += 1
    return counts, n

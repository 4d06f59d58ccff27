"""Measuring apparatuses described by their operational distributions.

An apparatus with outcomes ``x`` is a finite family of superoperators
``X(x)`` with ``X(x) rho = Pr{x | rho} * rho_x``. Its effects are
``X(x)*(I)``, its nonselective operation is ``T = sum_x X(x)``, and it is
compatible with an observable ``A`` when every effect is the spectral
projection ``E^A(x)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from qreduce.errors import (
    CountMismatch,
    DegenerateObservable,
    DimensionError,
    InvalidOperator,
    NotCompatible,
)
from qreduce.operators import (
    DEFAULT_TOL,
    DiscreteObservable,
    Tolerances,
    as_density,
    dagger,
    ket,
    ketbra,
    operator_norm,
    trace_norm,
)
from qreduce.randomness import make_rng, random_trace_class
from qreduce.superop import (
    SuperOperator,
    apply,
    check_positivity,
    compose,
    dual,
    identity_map,
    prepare_map,
    sandwich,
    spanning_densities,
    zero_map,
)

# construction-time positivity sampling per entry
_CONSTRUCTION_SAMPLES = 100


def match_outcome(keys: Sequence[float], value: float, tol: float) -> float | None:
    for k in keys:
        if abs(k - value) <= tol:
            return k
    return None


@dataclass(frozen=True, eq=False)
class OperationalDistribution:
    """Finite map ``outcome -> SuperOperator`` summing to a trace-preserving map.

    ``validate=False`` skips the normalization and positivity checks; it exists
    for test doubles and intermediate results that are checked elsewhere.
    """

    dim: int
    entries: Mapping[float, SuperOperator]
    tol: Tolerances = field(default=DEFAULT_TOL, compare=False)
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        entries = {float(x): L for x, L in sorted(self.entries.items())}
        if not entries:
            raise InvalidOperator("operational distribution has no outcomes")
        for L in entries.values():
            if L.dim != self.dim:
                raise DimensionError(f"entry of dim {L.dim} in distribution of dim {self.dim}")
        object.__setattr__(self, "entries", entries)
        if self.validate:
            dev = self.normalization_error()
            if dev > self.tol.normalization:
                raise InvalidOperator(f"effects do not sum to the identity (deviation {dev:.3e})")
            for x, L in entries.items():
                verdict = check_positivity(L, _CONSTRUCTION_SAMPLES, seed=0, tol=self.tol.psd)
                if verdict.found_counterexample:
                    raise InvalidOperator(
                        f"operation for outcome {x:g} maps a density to a non-positive operator "
                        f"(eigenvalue {verdict.min_eigenvalue:.3e})"
                    )

    def __iter__(self) -> Iterator[float]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, x: float) -> SuperOperator:
        return self.entries[x]

    @property
    def outcomes(self) -> list[float]:
        return list(self.entries)

    def items(self):
        return self.entries.items()

    def get(self, x: float, tol: float | None = None) -> SuperOperator:
        """Operation for ``x`` (zero map for outcomes that never occur)."""
        key = match_outcome(self.outcomes, x, self.tol.outcome if tol is None else tol)
        return zero_map(self.dim) if key is None else self.entries[key]

    def effects(self) -> dict[float, np.ndarray]:
        eye = np.eye(self.dim)
        return {x: dual(L)(eye) for x, L in self.entries.items()}

    def total(self) -> SuperOperator:
        return SuperOperator(self.dim, sum(L.transfer for L in self.entries.values()))

    def normalization_error(self) -> float:
        return float(np.max(np.abs(sum(self.effects().values()) - np.eye(self.dim))))


class OutcomeRecord(NamedTuple):
    probability: float
    state: np.ndarray | None  # None: indefinite (probability at or below the floor)


@dataclass(frozen=True)
class OutcomeStatistics:
    entries: dict[float, OutcomeRecord]

    def probabilities(self) -> dict[float, float]:
        return {x: r.probability for x, r in self.entries.items()}

    def state(self, x: float) -> np.ndarray | None:
        return self.entries[x].state

    def __getitem__(self, x: float) -> OutcomeRecord:
        return self.entries[x]

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True, eq=False)
class Apparatus:
    label: str
    opdist: OperationalDistribution

    @property
    def dim(self) -> int:
        return self.opdist.dim

    @property
    def outcomes(self) -> list[float]:
        return self.opdist.outcomes

    def measure(self, rho: np.ndarray) -> OutcomeStatistics:
        return measure(self, rho)


def as_distribution(obj: Apparatus | OperationalDistribution) -> OperationalDistribution:
    return obj.opdist if isinstance(obj, Apparatus) else obj


def make_apparatus(
    label: str,
    entries: Mapping[float, SuperOperator],
    tol: Tolerances = DEFAULT_TOL,
    validate: bool = True,
) -> Apparatus:
    first = next(iter(entries.values()))
    return Apparatus(label, OperationalDistribution(first.dim, dict(entries), tol, validate))


# --- effects and statistics ---------------------------------------------------


@dataclass(frozen=True)
class EffectDistribution:
    dim: int
    entries: dict[float, np.ndarray]

    def __post_init__(self):
        total = sum(self.entries.values())
        if np.max(np.abs(total - np.eye(self.dim))) > DEFAULT_TOL.normalization:
            raise InvalidOperator("effects do not sum to the identity")
        for x, e in self.entries.items():
            if np.max(np.abs(e - dagger(e))) > DEFAULT_TOL.herm:
                raise InvalidOperator(f"effect for outcome {x:g} is not Hermitian")
            w = np.linalg.eigvalsh(e)
            if w[0] < -DEFAULT_TOL.psd or w[-1] > 1 + DEFAULT_TOL.psd:
                raise InvalidOperator(f"effect for outcome {x:g} has spectrum outside [0, 1]")

    def __getitem__(self, x: float) -> np.ndarray:
        return self.entries[x]


def effect_distribution(app: Apparatus | OperationalDistribution) -> EffectDistribution:
    od = as_distribution(app)
    return EffectDistribution(od.dim, od.effects())


def nonselective_operation(app: Apparatus | OperationalDistribution) -> SuperOperator:
    return as_distribution(app).total()


def measure(app: Apparatus | OperationalDistribution, rho: np.ndarray) -> OutcomeStatistics:
    od = as_distribution(app)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (od.dim, od.dim):
        raise DimensionError(f"state of shape {rho.shape} for apparatus of dim {od.dim}")
    out = {}
    for x, L in od.items():
        y = apply(L, rho)
        p = float(np.trace(y).real)
        out[x] = OutcomeRecord(p, y / p if p > od.tol.prob_floor else None)
    return OutcomeStatistics(out)


def measures_observable(app: Apparatus | OperationalDistribution, A: DiscreteObservable, tol: float = 1e-9) -> bool:
    """True iff the effect distribution is the spectral measure of ``A``."""
    return is_a_compatible(app, A, tol)


def measured_observable(app: Apparatus | OperationalDistribution, tol: Tolerances = DEFAULT_TOL) -> DiscreteObservable | None:
    """The observable whose spectral projections are the effects, if there is one."""
    od = as_distribution(app)
    pairs = [(x, e) for x, e in od.effects().items() if np.max(np.abs(e)) > tol.idempotency]
    try:
        return DiscreteObservable.from_projections(pairs, tol)
    except InvalidOperator:
        return None


# --- compatibility --------------------------------------------------------------


def is_a_compatible(
    app: Apparatus | OperationalDistribution, A: DiscreteObservable, tol: float = 1e-9
) -> bool:
    od = as_distribution(app)
    if od.dim != A.dim:
        raise DimensionError(f"observable of dim {A.dim} for distribution of dim {od.dim}")
    eye = np.eye(od.dim)
    matched = set()
    for x, L in od.items():
        key = match_outcome(A.values, x, od.tol.outcome)
        if key is None:
            if np.max(np.abs(L.transfer)) > tol:
                return False
            continue
        matched.add(key)
        if np.max(np.abs(dual(L)(eye) - A.projection_for(key))) > tol:
            return False
    return all(v in matched for v in A.values)


class DecompositionDeviation(NamedTuple):
    """Worst deviations found by :func:`verify_decomposition`."""

    forward: float
    dual: float

    @property
    def max(self) -> float:
        return max(self.forward, self.dual)


def verify_decomposition(
    app: Apparatus | OperationalDistribution,
    A: DiscreteObservable,
    samples: int = 50,
    seed: int = 0,
    tol: float = 1e-9,
) -> float:
    """Largest violation of the compatible-distribution identities.

    For every outcome ``x`` with spectral projection ``E`` and random operators
    ``s`` and ``B``, compares (in trace norm) ``X(x)s`` with ``T[E s]``,
    ``T[s E]`` and ``T[E s E]``, and (in operator norm) ``X(x)*B`` with
    ``E T*(B)``, ``T*(B) E`` and ``E T*(B) E``, also measuring ``[E, T*(B)]``.
    """
    return verify_decomposition_parts(app, A, samples, seed, tol).max


def verify_decomposition_parts(
    app: Apparatus | OperationalDistribution,
    A: DiscreteObservable,
    samples: int = 50,
    seed: int = 0,
    tol: float = 1e-9,
) -> DecompositionDeviation:
    od = as_distribution(app)
    if not is_a_compatible(od, A, tol):
        raise NotCompatible("effects of the distribution are not the spectral projections of the observable")
    T = od.total()
    Ts = dual(T)
    rng = make_rng(seed)
    fwd = dl = 0.0
    for x in A.values:
        E = A.projection_for(x)
        X = od.get(x)
        Xs = dual(X)
        for _ in range(samples):
            s = random_trace_class(od.dim, rng)
            xs = apply(X, s)
            for other in (E @ s, s @ E, E @ s @ E):
                fwd = max(fwd, trace_norm(xs - apply(T, other)))
            b = random_trace_class(od.dim, rng)
            xb, tb = Xs(b), Ts(b)
            for other in (E @ tb, tb @ E, E @ tb @ E):
                dl = max(dl, operator_norm(xb - other))
            dl = max(dl, operator_norm(E @ tb - tb @ E))
    return DecompositionDeviation(fwd, dl)


def commutant_deviation(T: SuperOperator, A: DiscreteObservable) -> float:
    """``max_ij ||[T*(|i><j|), A]||`` over the matrix units."""
    Ts = dual(T)
    a = A.matrix()
    d = T.dim
    worst = 0.0
    for i in range(d):
        for j in range(d):
            y = Ts(ketbra(ket(i, d), ket(j, d)))
            worst = max(worst, float(np.max(np.abs(y @ a - a @ y))))
    return worst


def from_nonselective(
    T: SuperOperator,
    A: DiscreteObservable,
    tol: Tolerances = DEFAULT_TOL,
    label: str | None = None,
) -> Apparatus:
    """The unique compatible distribution ``X(x) rho = T[E^A(x) rho]`` with total ``T``."""
    if T.dim != A.dim:
        raise DimensionError(f"observable of dim {A.dim} for map of dim {T.dim}")
    eye = np.eye(T.dim)
    if np.max(np.abs(dual(T)(eye) - eye)) > tol.normalization:
        raise InvalidOperator("nonselective operation must be trace preserving")
    scale = max(1.0, operator_norm(A.matrix()))
    dev = commutant_deviation(T, A)
    if dev > tol.herm * scale:
        raise NotCompatible(
            f"range of the dual map leaves the commutant of the observable (deviation {dev:.3e})"
        )
    entries = {x: compose(T, sandwich(E, eye)) for x, E in A.outcomes}
    return make_apparatus(label or "from-nonselective", entries, tol)


def from_output_states(
    A: DiscreteObservable,
    states: Sequence[np.ndarray],
    tol: Tolerances = DEFAULT_TOL,
    label: str | None = None,
) -> Apparatus:
    """Apparatus leaving the system in ``states[n]`` whenever it reports ``a_n``.

    Outcome ``a_n`` occurs with the Born probability ``<phi_n|rho|phi_n>`` and
    the output state does not depend on ``rho``.
    """
    if not A.is_nondegenerate():
        raise DegenerateObservable(
            "output-state construction requires a nondegenerate observable "
            "(every spectral projection of rank one)"
        )
    if len(states) != len(A):
        raise CountMismatch(f"{len(states)} output states for {len(A)} outcomes")
    entries = {}
    for (x, E), s in zip(A.outcomes, states):
        s = as_density(s, tol)
        if s.shape != (A.dim, A.dim):
            raise DimensionError(f"output state of shape {s.shape} for dim {A.dim}")
        entries[x] = prepare_map(E, s)
    return make_apparatus(label or "output-states", entries, tol)


def projection_postulate_apparatus(A: DiscreteObservable, tol: Tolerances = DEFAULT_TOL) -> Apparatus:
    """``X(x) rho = E^A(x) rho E^A(x)``."""
    return make_apparatus("projection-postulate", {x: sandwich(E) for x, E in A.outcomes}, tol)


def identity_apparatus(dim: int, outcome: float = 0.0) -> Apparatus:
    """Single outcome, no disturbance."""
    return make_apparatus("identity", {outcome: identity_map(dim)})


def coarse_grain(
    app: Apparatus,
    f: Callable[[float], float] | Mapping[float, float],
    label: str | None = None,
) -> Apparatus:
    """Apparatus reporting ``f(x)`` whenever ``app`` reports ``x``."""
    fn = f.__getitem__ if isinstance(f, Mapping) else f
    pooled: dict[float, np.ndarray] = {}
    for x, L in app.opdist.items():
        y = float(fn(x))
        pooled[y] = pooled.get(y, 0) + L.transfer
    entries = {y: SuperOperator(app.dim, t) for y, t in pooled.items()}
    return make_apparatus(label or f"coarse({app.label})", entries, app.opdist.tol)


def is_repeatable(
    app: Apparatus | OperationalDistribution, A: DiscreteObservable, tol: float = 1e-9
) -> bool:
    """True iff an immediate second measurement of ``A`` reproduces the outcome.

    Checks ``Tr[E^A(x) X(x) rho] == Tr[X(x) rho]`` over a spanning family of
    densities, which by linearity covers all inputs.
    """
    od = as_distribution(app)
    if not is_a_compatible(od, A, tol):
        raise NotCompatible("repeatability is defined relative to a compatible observable")
    fam = spanning_densities(od.dim)
    for x, L in od.items():
        E = A.projection_for(x)
        out = apply(L, fam)
        lhs = np.einsum("ij,nji->n", E, out)
        rhs = np.trace(out, axis1=1, axis2=2)
        if np.max(np.abs(lhs - rhs)) > tol:
            return False
    return True


def operation_deviation(a: Apparatus | OperationalDistribution, b: Apparatus | OperationalDistribution) -> float:
    """Max entrywise transfer-matrix difference over the union of outcomes."""
    oa, ob = as_distribution(a), as_distribution(b)
    keys = list(oa.outcomes)
    for y in ob.outcomes:
        if match_outcome(keys, y, oa.tol.outcome) is None:
            keys.append(y)
    return max(float(np.max(np.abs(oa.get(x).transfer - ob.get(x).transfer))) for x in keys)

"""Finite-dimensional operator algebra.

Operators are plain ``numpy`` complex arrays. The helpers ``as_hermitian``,
``as_density`` and ``as_projection`` validate an array against the invariant
of the corresponding operator class and return a complex copy; observables
are the only operator type with its own container (:class:`DiscreteObservable`).

Conventions: matrices are row-major and 0-indexed, ``|k>`` is the k-th
standard basis column, and tensor products order the first factor as the
slow index, ``(A (x) B)[i*rB + k, j*cB + l] = A[i, j] * B[k, l]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from qreduce.errors import DimensionError, InvalidOperator


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used across the library (all absolute)."""

    herm: float = 1e-9
    idempotency: float = 1e-9
    trace: float = 1e-9
    psd: float = 1e-9
    group: float = 1e-8
    normalization: float = 1e-9
    cp: float = 1e-9
    rank: float = 1e-10
    prob_floor: float = 1e-12
    outcome: float = 1e-9

    def with_overrides(self, **overrides: float) -> "Tolerances":
        for name, value in overrides.items():
            if value is not None and value <= 0:
                raise ValueError(f"tolerance {name} must be positive, got {value}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


DEFAULT_TOL = Tolerances()


def as_matrix(m, *, square: bool = True) -> np.ndarray:
    """Return ``m`` as a finite complex 2-d array."""
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidOperator("matrix has non-finite entries")
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def is_hermitian(m: np.ndarray, tol: float = DEFAULT_TOL.herm) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + dagger(m))


def as_hermitian(m, tol: float = DEFAULT_TOL.herm) -> np.ndarray:
    arr = as_matrix(m)
    if not is_hermitian(arr, tol):
        raise InvalidOperator("operator is not Hermitian within tolerance")
    return arr


def is_density(m: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not is_hermitian(m, tol.herm):
        return False
    if abs(np.trace(m) - 1.0) > tol.trace:
        return False
    return bool(np.linalg.eigvalsh(hermitian_part(m))[0] >= -tol.psd)


def as_density(m, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    arr = as_matrix(m)
    if not is_hermitian(arr, tol.herm):
        raise InvalidOperator("density operator is not Hermitian")
    tr = np.trace(arr).real
    if abs(tr - 1.0) > tol.trace:
        raise InvalidOperator(f"density operator has trace {tr:.12g}, expected 1")
    lo = np.linalg.eigvalsh(hermitian_part(arr))[0]
    if lo < -tol.psd:
        raise InvalidOperator(f"density operator has negative eigenvalue {lo:.3e}")
    return arr


def is_projection(m: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> bool:
    m = np.asarray(m)
    if not is_hermitian(m, tol.herm):
        return False
    return bool(np.max(np.abs(m @ m - m), initial=0.0) <= tol.idempotency)


def as_projection(m, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    arr = as_matrix(m)
    if not is_projection(arr, tol):
        raise InvalidOperator("operator is not an orthogonal projection")
    return arr


def ket(k: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[k] = 1.0
    return v


def ketbra(psi: np.ndarray, phi: np.ndarray | None = None) -> np.ndarray:
    """``|psi><phi|`` (``|psi><psi|`` if ``phi`` is omitted)."""
    psi = np.asarray(psi, dtype=complex)
    phi = psi if phi is None else np.asarray(phi, dtype=complex)
    return np.outer(psi, np.conj(phi))


def maximally_mixed(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


class Outcome(NamedTuple):
    value: float
    projection: np.ndarray


@dataclass(frozen=True)
class DiscreteObservable:
    """A self-adjoint operator given by its spectral resolution.

    ``outcomes`` holds ``(eigenvalue, spectral projection)`` pairs sorted by
    eigenvalue. Construction validates distinctness, orthogonality and
    completeness of the projections.
    """

    dim: int
    outcomes: tuple[Outcome, ...]
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False, compare=False)

    def __post_init__(self):
        outs = tuple(
            Outcome(float(v), as_projection(p, self.tol)) for v, p in self.outcomes
        )
        outs = tuple(sorted(outs, key=lambda o: o.value))
        if not outs:
            raise InvalidOperator("observable has no outcomes")
        for o in outs:
            if o.projection.shape != (self.dim, self.dim):
                raise DimensionError(
                    f"projection of shape {o.projection.shape} in observable of dim {self.dim}"
                )
        values = [o.value for o in outs]
        if len(set(values)) != len(values):
            raise InvalidOperator("observable eigenvalues must be pairwise distinct")
        for i, a in enumerate(outs):
            for b in outs[i + 1:]:
                if np.max(np.abs(a.projection @ b.projection)) > self.tol.idempotency:
                    raise InvalidOperator("spectral projections are not mutually orthogonal")
        total = sum(o.projection for o in outs)
        if np.max(np.abs(total - np.eye(self.dim))) > self.tol.idempotency:
            raise InvalidOperator("spectral projections do not sum to the identity")
        object.__setattr__(self, "outcomes", outs)

    @classmethod
    def from_projections(cls, pairs: Sequence[tuple[float, np.ndarray]], tol: Tolerances = DEFAULT_TOL):
        pairs = list(pairs)
        if not pairs:
            raise InvalidOperator("observable has no outcomes")
        dim = np.asarray(pairs[0][1]).shape[0]
        return cls(dim, tuple(Outcome(v, p) for v, p in pairs), tol)

    @classmethod
    def from_basis(cls, values: Sequence[float], basis: np.ndarray, tol: Tolerances = DEFAULT_TOL):
        """Nondegenerate observable ``sum_n values[n] |b_n><b_n|`` for the columns of ``basis``."""
        basis = as_matrix(basis)
        if len(values) != basis.shape[1]:
            raise DimensionError("one eigenvalue per basis vector is required")
        return cls.from_projections(
            [(v, ketbra(basis[:, n])) for n, v in enumerate(values)], tol
        )

    def __iter__(self) -> Iterator[Outcome]:
        return iter(self.outcomes)

    def __len__(self) -> int:
        return len(self.outcomes)

    @property
    def values(self) -> list[float]:
        return [o.value for o in self.outcomes]

    @property
    def projections(self) -> list[np.ndarray]:
        return [o.projection for o in self.outcomes]

    def matrix(self) -> np.ndarray:
        return sum(o.value * o.projection for o in self.outcomes)

    def projection_for(self, value: float, tol: float | None = None) -> np.ndarray:
        """Spectral projection for ``value``; zero if ``value`` is not an eigenvalue."""
        tol = self.tol.outcome if tol is None else tol
        for o in self.outcomes:
            if abs(o.value - value) <= tol:
                return o.projection
        return np.zeros((self.dim, self.dim), dtype=complex)

    def is_nondegenerate(self) -> bool:
        return all(round(np.trace(o.projection).real) == 1 for o in self.outcomes)

    def eigenvectors(self) -> np.ndarray:
        """Columns ``phi_n`` with ``E(a_n) = |phi_n><phi_n|`` (nondegenerate case only)."""
        cols = []
        for o in self.outcomes:
            w, v = np.linalg.eigh(o.projection)
            if round(w.sum()) != 1:
                raise InvalidOperator("eigenvectors are defined for nondegenerate observables only")
            cols.append(v[:, -1])
        return np.column_stack(cols)


def spectral_decompose(
    h, group_tol: float = DEFAULT_TOL.group, tol: Tolerances = DEFAULT_TOL
) -> DiscreteObservable:
    """Spectral resolution of a Hermitian matrix.

    Eigenvalues are sorted ascending and adjacent eigenvalues closer than
    ``group_tol`` are merged greedily; the merged eigenspace carries the mean
    eigenvalue of its group.
    """
    h = as_hermitian(h, tol.herm)
    w, v = np.linalg.eigh(hermitian_part(h))
    groups: list[list[int]] = [[0]]
    for k in range(1, len(w)):
        if w[k] - w[groups[-1][-1]] <= group_tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    pairs = []
    for g in groups:
        vecs = v[:, g]
        pairs.append((float(np.mean(w[g])), vecs @ dagger(vecs)))
    return DiscreteObservable.from_projections(pairs, tol)


def tensor(a, b) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def partial_trace_second(m, dim_h: int, dim_k: int) -> np.ndarray:
    """Trace out the second factor of an operator on ``H (x) K``."""
    m = np.asarray(m)
    n = dim_h * dim_k
    if m.shape != (n, n):
        raise DimensionError(f"expected a {n}x{n} matrix, got shape {m.shape}")
    return np.einsum("ikjk->ij", m.reshape(dim_h, dim_k, dim_h, dim_k))


def partial_trace_first(m, dim_h: int, dim_k: int) -> np.ndarray:
    """Trace out the first factor of an operator on ``H (x) K``."""
    m = np.asarray(m)
    n = dim_h * dim_k
    if m.shape != (n, n):
        raise DimensionError(f"expected a {n}x{n} matrix, got shape {m.shape}")
    return np.einsum("kikj->ij", m.reshape(dim_h, dim_k, dim_h, dim_k))


def trace_norm(m) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(m), compute_uv=False)))


def operator_norm(m) -> float:
    return float(np.linalg.norm(np.asarray(m), 2))


def trace_distance(a, b) -> float:
    return 0.5 * trace_norm(np.asarray(a) - np.asarray(b))


class FourDensityDecomposition(NamedTuple):
    """``sigma = l1*s1 - l2*s2 + i*l3*s3 - i*l4*s4`` with densities ``s_k``."""

    weights: tuple[float, float, float, float]
    densities: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]

    def recompose(self) -> np.ndarray:
        l1, l2, l3, l4 = self.weights
        s1, s2, s3, s4 = self.densities
        return l1 * s1 - l2 * s2 + 1j * l3 * s3 - 1j * l4 * s4


def _positive_negative_parts(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(h)
    pos = (v * np.clip(w, 0, None)) @ dagger(v)
    neg = (v * np.clip(-w, 0, None)) @ dagger(v)
    return pos, neg


def decompose_four_densities(sigma) -> FourDensityDecomposition:
    """Write an arbitrary operator as a complex combination of four densities.

    The real and imaginary Hermitian parts are each split into positive and
    negative eigenparts, normalized to unit trace. A vanishing part gets weight
    0 and the maximally mixed state, so the result is always total.
    """
    sigma = as_matrix(sigma)
    d = sigma.shape[0]
    re = hermitian_part(sigma)
    im = (sigma - dagger(sigma)) / 2j
    parts = [*_positive_negative_parts(re), *_positive_negative_parts(im)]
    # parts this small are eigenvalue roundoff, not genuine components
    floor = 1e-14 * max(1.0, trace_norm(sigma))
    weights, densities = [], []
    for p in parts:
        t = float(np.trace(p).real)
        if t > floor:
            weights.append(t)
            densities.append(p / t)
        else:
            weights.append(0.0)
            densities.append(maximally_mixed(d))
    return FourDensityDecomposition(tuple(weights), tuple(densities))

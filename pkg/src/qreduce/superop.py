"""Superoperators on a finite-dimensional Hilbert space.

A superoperator is stored as its transfer matrix acting on column-stacked
operators: ``vec(L(X)) = transfer @ vec(X)`` with ``vec(X)[a + d*b] = X[a, b]``.
Under this convention ``X -> A X B`` has transfer ``kron(B.T, A)``.

The Choi matrix is ``sum_ij |i><j| (x) L(|i><j|)``; it is positive
semidefinite exactly when the map is completely positive.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from qreduce.errors import DimensionError, InconsistentAction, NotCP
from qreduce.operators import (
    DEFAULT_TOL,
    as_matrix,
    dagger,
    decompose_four_densities,
    hermitian_part,
    ket,
    ketbra,
    operator_norm,
    trace_norm,
)
from qreduce.randomness import ensemble_densities, make_rng, random_density, random_pure_state


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stack a matrix, or each matrix of a ``(n, d, d)`` stack."""
    x = np.asarray(x)
    if x.ndim == 2:
        return x.reshape(-1, order="F")
    return np.swapaxes(x, -1, -2).reshape(x.shape[0], -1)


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`vec`; a 2-d input is treated as a stack of rows."""
    v = np.asarray(v)
    if v.ndim == 1:
        return v.reshape(dim, dim, order="F")
    return np.swapaxes(v.reshape(v.shape[0], dim, dim), -1, -2)


def _swap_permutation(dim: int) -> np.ndarray:
    """Permutation ``P`` with ``P @ vec(X) == vec(X.T)``."""
    idx = np.arange(dim * dim).reshape(dim, dim).T.reshape(-1)
    return np.eye(dim * dim)[idx]


@dataclass(frozen=True, eq=False)
class SuperOperator:
    dim: int
    transfer: np.ndarray

    def __post_init__(self):
        t = as_matrix(self.transfer)
        if t.shape != (self.dim ** 2, self.dim ** 2):
            raise DimensionError(
                f"transfer matrix of shape {t.shape} does not act on {self.dim}x{self.dim} operators"
            )
        t.setflags(write=False)
        object.__setattr__(self, "transfer", t)

    def __call__(self, sigma: np.ndarray) -> np.ndarray:
        return apply(self, sigma)

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        _check_same_dim(self, other)
        return SuperOperator(self.dim, self.transfer + other.transfer)

    def __sub__(self, other: "SuperOperator") -> "SuperOperator":
        _check_same_dim(self, other)
        return SuperOperator(self.dim, self.transfer - other.transfer)

    def __mul__(self, scalar: complex) -> "SuperOperator":
        return SuperOperator(self.dim, scalar * self.transfer)

    __rmul__ = __mul__

    def __matmul__(self, other: "SuperOperator") -> "SuperOperator":
        return compose(self, other)

    def close_to(self, other: "SuperOperator", tol: float) -> bool:
        return self.dim == other.dim and bool(np.max(np.abs(self.transfer - other.transfer)) <= tol)

    def is_zero(self, tol: float = 1e-13) -> bool:
        return bool(np.max(np.abs(self.transfer)) <= tol)

    def __repr__(self) -> str:
        return f"SuperOperator(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class DualSuperOperator:
    """Heisenberg-picture map ``L*`` with ``Tr[A L(rho)] = Tr[L*(A) rho]``."""

    dim: int
    transfer: np.ndarray

    def __call__(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        if a.shape != (self.dim, self.dim):
            raise DimensionError(f"operator of shape {a.shape} for dual map of dim {self.dim}")
        return unvec(self.transfer @ vec(a), self.dim)

    def __repr__(self) -> str:
        return f"DualSuperOperator(dim={self.dim})"


def _check_same_dim(a, b) -> None:
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")


# --- constructors -----------------------------------------------------------


def identity_map(dim: int) -> SuperOperator:
    return SuperOperator(dim, np.eye(dim * dim))


def zero_map(dim: int) -> SuperOperator:
    return SuperOperator(dim, np.zeros((dim * dim, dim * dim)))


def sandwich(a: np.ndarray, b: np.ndarray | None = None) -> SuperOperator:
    """``X -> a X b``; ``b`` defaults to ``a^dagger``."""
    a = as_matrix(a)
    b = dagger(a) if b is None else as_matrix(b)
    return SuperOperator(a.shape[0], np.kron(b.T, a))


def from_kraus(ops: Sequence[np.ndarray], dim: int | None = None) -> SuperOperator:
    ops = [as_matrix(k) for k in ops]
    if not ops:
        if dim is None:
            raise DimensionError("dimension required for an empty Kraus set")
        return zero_map(dim)
    d = ops[0].shape[0]
    return SuperOperator(d, sum(np.kron(np.conj(k), k) for k in ops))


def transpose_map(dim: int) -> SuperOperator:
    return SuperOperator(dim, _swap_permutation(dim).astype(complex))


def prepare_map(effect: np.ndarray, state: np.ndarray) -> SuperOperator:
    """``X -> Tr[effect X] state``."""
    effect, state = as_matrix(effect), as_matrix(state)
    return SuperOperator(effect.shape[0], np.outer(vec(state), vec(effect.T)))


def completely_depolarizing(dim: int) -> SuperOperator:
    return prepare_map(np.eye(dim), np.eye(dim) / dim)


def from_linear_function(fn: Callable[[np.ndarray], np.ndarray], dim: int) -> SuperOperator:
    """Tabulate a map already known to be linear on the matrix units."""
    cols = [vec(np.asarray(fn(ketbra(ket(a, dim), ket(b, dim))), dtype=complex))
            for b in range(dim) for a in range(dim)]
    return SuperOperator(dim, np.column_stack(cols))


# --- core operations ----------------------------------------------------------


def apply(L: SuperOperator, sigma: np.ndarray) -> np.ndarray:
    """Apply ``L`` to an operator or to a ``(n, d, d)`` stack of operators."""
    sigma = np.asarray(sigma, dtype=complex)
    if sigma.shape[-2:] != (L.dim, L.dim):
        raise DimensionError(f"operator of shape {sigma.shape} for superoperator of dim {L.dim}")
    if sigma.ndim == 2:
        return unvec(L.transfer @ vec(sigma), L.dim)
    return unvec(vec(sigma) @ L.transfer.T, L.dim)


def dual(L: SuperOperator) -> DualSuperOperator:
    p = _swap_permutation(L.dim)
    return DualSuperOperator(L.dim, p @ L.transfer.T @ p)


def predual(Ls: DualSuperOperator) -> SuperOperator:
    """Inverse of :func:`dual`."""
    p = _swap_permutation(Ls.dim)
    return SuperOperator(Ls.dim, p @ Ls.transfer.T @ p)


def compose(L2: SuperOperator, L1: SuperOperator) -> SuperOperator:
    """``L2 after L1``."""
    _check_same_dim(L1, L2)
    return SuperOperator(L1.dim, L2.transfer @ L1.transfer)


def choi(L: SuperOperator) -> np.ndarray:
    d = L.dim
    return L.transfer.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(d * d, d * d)


def from_choi(c: np.ndarray) -> SuperOperator:
    c = as_matrix(c)
    d = int(round(np.sqrt(c.shape[0])))
    if d * d != c.shape[0]:
        raise DimensionError(f"Choi matrix of shape {c.shape} is not d^2 x d^2")
    return SuperOperator(d, c.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(d * d, d * d))


# --- positivity -------------------------------------------------------------


@dataclass(frozen=True)
class CPVerdict:
    """Outcome of the Choi test. Truthy iff the map is completely positive."""

    is_cp: bool
    min_eigenvalue: float
    hermitian: bool = True

    def __bool__(self) -> bool:
        return self.is_cp


def is_completely_positive(L: SuperOperator, tol: float = DEFAULT_TOL.cp) -> CPVerdict:
    c = choi(L)
    herm = bool(np.max(np.abs(c - dagger(c))) <= tol)
    lo = float(np.linalg.eigvalsh(hermitian_part(c))[0])
    return CPVerdict(herm and lo >= -tol, lo, herm)


@dataclass(frozen=True)
class PositivityVerdict:
    """Result of randomized positivity testing.

    ``counterexample`` is ``None`` when no sampled density produced a
    non-positive image. That does not certify positivity.
    """

    samples: int
    min_eigenvalue: float
    counterexample: np.ndarray | None = None
    non_hermitian: bool = False

    @property
    def found_counterexample(self) -> bool:
        return self.counterexample is not None

    def __bool__(self) -> bool:
        return self.counterexample is None


def check_positivity(
    L: SuperOperator,
    samples: int = 1000,
    seed: int | np.random.Generator = 0,
    tol: float = DEFAULT_TOL.psd,
) -> PositivityVerdict:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rhos = ensemble_densities(L.dim, make_rng(seed), samples)
    out = apply(L, rhos)
    anti = np.max(np.abs(out - np.conj(np.swapaxes(out, -1, -2))), axis=(1, 2))
    lows = np.linalg.eigvalsh(0.5 * (out + np.conj(np.swapaxes(out, -1, -2))))[:, 0]
    worst = int(np.argmin(lows))
    bad_herm = np.nonzero(anti > tol)[0]
    if bad_herm.size:
        k = int(bad_herm[0])
        return PositivityVerdict(samples, float(lows[worst]), rhos[k], non_hermitian=True)
    if lows[worst] < -tol:
        return PositivityVerdict(samples, float(lows[worst]), rhos[worst])
    return PositivityVerdict(samples, float(lows[worst]))


def spanning_densities(dim: int) -> np.ndarray:
    """The ``dim**2`` pure states ``|j>``, ``(|j>+|k>)/sqrt2``, ``(|j>+i|k>)/sqrt2`` (j<k).

    Their span is the whole operator space.
    """
    vecs = [ket(j, dim) for j in range(dim)]
    for j in range(dim):
        for k in range(j + 1, dim):
            vecs.append((ket(j, dim) + ket(k, dim)) / np.sqrt(2))
            vecs.append((ket(j, dim) + 1j * ket(k, dim)) / np.sqrt(2))
    return np.stack([ketbra(v) for v in vecs])


@dataclass(frozen=True)
class ContractivityReport:
    """Flags of the positive-map contractivity equivalences.

    ``contractive_tr_norm`` and ``trace_bound`` are computed from forward
    applications of the map on a spanning family of densities;
    ``dual_contractive``, ``dual_I_bound`` and ``dual_unital`` from the dual
    map evaluated at the identity. The norm flags use the fact that for a
    positive map both norms equal the largest eigenvalue of ``L*(I)``.
    """

    contractive_tr_norm: bool
    dual_contractive: bool
    trace_bound: bool
    dual_I_bound: bool
    trace_preserving: bool
    dual_unital: bool

    def as_dict(self) -> dict[str, bool]:
        return dict(self.__dict__)


def trace_functional(L: SuperOperator) -> np.ndarray:
    """Operator ``F`` with ``Tr[L(rho)] = Tr[F rho]``, from forward evaluations only."""
    fam = spanning_densities(L.dim)
    traces = np.trace(apply(L, fam), axis1=1, axis2=2)
    # Tr[F rho] = vec(F.T) . vec(rho)
    f = np.linalg.solve(vec(fam), traces)
    return unvec(f, L.dim).T


def contractivity_report(L: SuperOperator, tol: float = DEFAULT_TOL.normalization) -> ContractivityReport:
    d = L.dim
    eye = np.eye(d)
    fam = spanning_densities(d)
    traces = np.trace(apply(L, fam), axis1=1, axis2=2)

    f = trace_functional(L)
    f_real = bool(np.max(np.abs(f - dagger(f))) <= tol)
    fw = np.linalg.eigvalsh(hermitian_part(f))
    trace_bound = f_real and fw[0] >= -tol and fw[-1] <= 1 + tol
    contractive = f_real and fw[-1] <= 1 + tol

    li = dual(L)(eye)
    li_herm = bool(np.max(np.abs(li - dagger(li))) <= tol)
    lw = np.linalg.eigvalsh(hermitian_part(li))
    dual_bound = li_herm and lw[0] >= -tol and lw[-1] <= 1 + tol
    dual_contractive = operator_norm(li) <= 1 + tol

    return ContractivityReport(
        contractive_tr_norm=bool(contractive),
        dual_contractive=bool(dual_contractive),
        trace_bound=bool(trace_bound),
        dual_I_bound=bool(dual_bound),
        trace_preserving=bool(np.max(np.abs(traces - 1.0)) <= tol),
        dual_unital=bool(np.max(np.abs(li - eye)) <= tol),
    )


def estimate_trace_norm(L: SuperOperator, samples: int = 200, seed: int = 0) -> float:
    """Sampled lower bound on ``sup ||L(X)||_tr`` over rank-one ``X`` with ``||X||_tr = 1``.

    Rank-one operators are the extreme points of the trace-norm unit ball, so
    the supremum is attained among them.
    """
    rng = make_rng(seed)
    best = 0.0
    for _ in range(samples):
        x = ketbra(random_pure_state(L.dim, rng), random_pure_state(L.dim, rng))
        best = max(best, trace_norm(apply(L, x)))
    return best


# --- linear extension ---------------------------------------------------------


def linear_extension(
    action: Callable[[np.ndarray], np.ndarray],
    dim: int,
    family: np.ndarray | None = None,
    check_samples: int = 50,
    seed: int = 0,
    tol: float = 1e-9,
) -> SuperOperator:
    """Extend a state-update rule given on densities to a superoperator.

    ``action`` is evaluated on a spanning family of densities (by default
    :func:`spanning_densities`) and the transfer matrix is solved for. The
    result is then compared with ``action`` on ``check_samples`` random
    mixtures; disagreement means the rule does not respect mixtures and
    :class:`InconsistentAction` is raised.
    """
    fam = spanning_densities(dim) if family is None else np.asarray(family, dtype=complex)
    if fam.shape != (dim * dim, dim, dim):
        raise DimensionError(f"spanning family must have shape {(dim * dim, dim, dim)}")
    inputs = vec(fam)
    outputs = np.stack([vec(np.asarray(action(r), dtype=complex)) for r in fam])
    # outputs.T = S @ inputs.T
    transfer = np.linalg.solve(inputs, outputs).T
    L = SuperOperator(dim, transfer)

    rng = make_rng(seed)
    for _ in range(check_samples):
        r1, r2 = random_density(dim, rng), random_density(dim, rng, rank=1)
        a = rng.random()
        rho = a * r1 + (1 - a) * r2
        dev = np.max(np.abs(apply(L, rho) - np.asarray(action(rho))))
        if dev > tol:
            raise InconsistentAction(
                f"rule deviates from its linear extension by {dev:.3e} on a mixed input"
            )
    return L


def extend_by_decomposition(action: Callable[[np.ndarray], np.ndarray], sigma: np.ndarray) -> np.ndarray:
    """Evaluate the linear extension of ``action`` at ``sigma`` through a four-density split."""
    (l1, l2, l3, l4), (s1, s2, s3, s4) = decompose_four_densities(sigma)
    out = np.zeros_like(s1)
    for w, s, c in ((l1, s1, 1), (l2, s2, -1), (l3, s3, 1j), (l4, s4, -1j)):
        if w > 0:
            out = out + c * w * np.asarray(action(s))
    return out


# --- Kraus ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KrausSet:
    dim: int
    operators: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.operators)

    def to_superoperator(self) -> SuperOperator:
        return from_kraus(self.operators, self.dim)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum((k @ rho @ dagger(k) for k in self.operators), np.zeros((self.dim, self.dim), complex))

    def completeness(self) -> np.ndarray:
        return sum((dagger(k) @ k for k in self.operators), np.zeros((self.dim, self.dim), complex))

    def is_trace_preserving(self, tol: float = DEFAULT_TOL.normalization) -> bool:
        return bool(np.max(np.abs(self.completeness() - np.eye(self.dim))) <= tol)


def kraus_decompose(
    L: SuperOperator, rank_tol: float = DEFAULT_TOL.rank, cp_tol: float = DEFAULT_TOL.cp
) -> KrausSet:
    verdict = is_completely_positive(L, cp_tol)
    if not verdict:
        raise NotCP(
            f"map is not completely positive (Choi min eigenvalue {verdict.min_eigenvalue:.3e})",
            verdict.min_eigenvalue,
        )
    w, v = np.linalg.eigh(hermitian_part(choi(L)))
    d = L.dim
    ops = tuple(np.sqrt(w[k]) * v[:, k].reshape(d, d).T for k in range(len(w) - 1, -1, -1) if w[k] > rank_tol)
    return KrausSet(d, ops)

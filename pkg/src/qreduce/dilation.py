"""Indirect measurement models and unitary dilations.

A model couples the system (dim ``d``) to a probe (dim ``k``) prepared in
``probe_state``, evolves both with ``unitary`` and reads the probe observable.
Realizing the model gives the apparatus

    X(x) rho = Tr_K[(I (x) E^M(x)) U (rho (x) sigma) U^dagger].

The two synthesis routes go the other way: from a sequence of output states
for a nondegenerate observable (probe ``K = H (x) H``), and from an arbitrary
completely positive distribution through its Kraus operators.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from qreduce.apparatus import (
    Apparatus,
    OperationalDistribution,
    match_outcome,
    as_distribution,
    make_apparatus,
)
from qreduce.errors import CountMismatch, DegenerateObservable, DimensionError, InvalidOperator, NotIsometry
from qreduce.operators import (
    DEFAULT_TOL,
    DiscreteObservable,
    Outcome,
    Tolerances,
    as_density,
    as_matrix,
    dagger,
    ket,
    partial_trace_second,
    trace_norm,
)
from qreduce.randomness import make_rng, random_density
from qreduce.superop import SuperOperator, apply, from_kraus, kraus_decompose

_UNITARY_TOL = 1e-9
_ISOMETRY_TOL = 1e-10
_EIGEN_DROP = 1e-12


@dataclass(frozen=True, eq=False)
class IndirectModel:
    sys_dim: int
    probe_dim: int
    probe_state: np.ndarray
    unitary: np.ndarray
    probe_observable: DiscreteObservable
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        sigma = as_density(self.probe_state, self.tol)
        if sigma.shape != (self.probe_dim, self.probe_dim):
            raise DimensionError(f"probe state of shape {sigma.shape} for probe dim {self.probe_dim}")
        u = as_matrix(self.unitary)
        n = self.sys_dim * self.probe_dim
        if u.shape != (n, n):
            raise DimensionError(f"unitary of shape {u.shape} on a space of dim {n}")
        dev = float(np.max(np.abs(dagger(u) @ u - np.eye(n))))
        if dev > _UNITARY_TOL:
            raise InvalidOperator(f"coupling is not unitary (deviation {dev:.3e})")
        if self.probe_observable.dim != self.probe_dim:
            raise DimensionError("probe observable does not act on the probe space")
        object.__setattr__(self, "probe_state", sigma)
        object.__setattr__(self, "unitary", u)

    def joint_state(self, rho: np.ndarray) -> np.ndarray:
        """``U (rho (x) sigma) U^dagger`` on system (x) probe."""
        return self.unitary @ np.kron(rho, self.probe_state) @ dagger(self.unitary)


def _kraus_for_outcome(model: IndirectModel, projection: np.ndarray) -> list[np.ndarray]:
    d, k = model.sys_dim, model.probe_dim
    p, s = np.linalg.eigh(model.probe_state)
    w, v = np.linalg.eigh(projection)
    readout = v[:, w > 0.5]  # orthonormal basis of the projection's range
    u = model.unitary.reshape(d, k, d, k)
    ops = []
    for pk, sk in zip(p, s.T):
        if pk <= _EIGEN_DROP:
            continue
        # W[a, m, b] = <a, m| U |b, s_k>
        w_k = np.einsum("ambn,n->amb", u, sk)
        for e in readout.T:
            ops.append(np.sqrt(pk) * np.einsum("m,amb->ab", np.conj(e), w_k))
    return ops


def realize(model: IndirectModel, label: str = "realized", drop_zero: bool = True) -> Apparatus:
    """Apparatus defined by an indirect measurement model.

    Outcomes whose operation vanishes identically are dropped unless
    ``drop_zero`` is false.
    """
    entries = {}
    for x, E in model.probe_observable.outcomes:
        L = from_kraus(_kraus_for_outcome(model, E), model.sys_dim)
        if drop_zero and L.is_zero(1e-13):
            continue
        entries[x] = L
    return make_apparatus(label, entries, model.tol, validate=True)


def complete_isometry_to_unitary(v: np.ndarray, total_dim: int | None = None) -> np.ndarray:
    """Square unitary whose leading columns are the orthonormal columns of ``v``."""
    v = as_matrix(v, square=False)
    n, c = v.shape
    if total_dim is not None and total_dim != n:
        raise DimensionError(f"isometry has {n} rows, expected {total_dim}")
    if c > n:
        raise NotIsometry(f"{c} columns cannot be orthonormal in dimension {n}")
    dev = float(np.max(np.abs(dagger(v) @ v - np.eye(c)), initial=0.0))
    if dev > _ISOMETRY_TOL:
        raise NotIsometry(f"columns are not orthonormal (deviation {dev:.3e})")
    if c == n:
        return v.copy()
    q, _ = np.linalg.qr(v, mode="complete")
    return np.hstack([v, q[:, c:]])


def _unitary_mapping(domain: np.ndarray, image: np.ndarray) -> np.ndarray:
    """Unitary ``U`` with ``U @ domain == image`` for two isometries."""
    return complete_isometry_to_unitary(image) @ dagger(complete_isometry_to_unitary(domain))


def construct_nondegenerate_dilation(
    A: DiscreteObservable,
    states: Sequence[np.ndarray],
    tol: Tolerances = DEFAULT_TOL,
) -> IndirectModel:
    """Model whose apparatus measures ``A`` and leaves ``states[n]`` after outcome ``a_n``.

    The probe is ``H (x) H`` prepared in ``|phi_0, phi_0>`` and read out with
    ``I (x) A``. The coupling sends ``|phi_n, phi_0, phi_0>`` to
    ``sum_j sqrt(l_nj) |eta_nj, phi_j, phi_n>``, where ``l_nj, eta_nj`` is the
    spectral decomposition of ``states[n]``, and is completed to a unitary.
    """
    if not A.is_nondegenerate():
        raise DegenerateObservable(
            "output-state dilation requires a nondegenerate observable "
            "(every spectral projection of rank one)"
        )
    if len(states) != len(A):
        raise CountMismatch(f"{len(states)} output states for {len(A)} outcomes")
    d = A.dim
    phi = A.eigenvectors()
    phi0 = phi[:, 0]
    domain = np.empty((d ** 3, d), dtype=complex)
    image = np.zeros((d ** 3, d), dtype=complex)
    for n, s in enumerate(states):
        s = as_density(s, tol)
        lam, eta = np.linalg.eigh(s)
        keep = lam > _EIGEN_DROP
        lam = lam[keep] / lam[keep].sum()
        eta = eta[:, keep]
        domain[:, n] = np.kron(phi[:, n], np.kron(phi0, phi0))
        for j, (l, e) in enumerate(zip(lam, eta.T)):
            image[:, n] += np.sqrt(l) * np.kron(e, np.kron(phi[:, j], phi[:, n]))
    u = _unitary_mapping(domain, image)
    probe_state = np.outer(np.kron(phi0, phi0), np.conj(np.kron(phi0, phi0)))
    probe_obs = DiscreteObservable(
        d * d, tuple(Outcome(x, np.kron(np.eye(d), E)) for x, E in A.outcomes), tol
    )
    return IndirectModel(d, d * d, probe_state, u, probe_obs, tol)


def dilate_cp_distribution(
    app: Apparatus | OperationalDistribution,
    min_probe_dim: int = 1,
    tol: Tolerances = DEFAULT_TOL,
) -> IndirectModel:
    """Unitary model realizing a completely positive distribution.

    Each operation is Kraus-decomposed; the probe has one basis vector per
    Kraus operator (outcome blocks in ascending outcome order) and starts in
    ``|0>``. The isometry ``psi -> sum_{x,k} K_xk psi (x) |x,k>`` is completed
    to a unitary, and the probe observable takes the value ``x`` on the block of
    outcome ``x``. Padding dimensions get the sentinel value ``max(x) + 1``.

    Raises :class:`qreduce.errors.NotCP` if an operation is not completely positive.
    """
    od = as_distribution(app)
    d = od.dim
    blocks = [(x, kraus_decompose(L, tol.rank, tol.cp).operators) for x, L in od.items()]
    kraus = [k for _, ops in blocks for k in ops]
    r = max(len(kraus), min_probe_dim, 1)
    # V[(a, m), b] = K_m[a, b]
    iso = np.zeros((d, r, d), dtype=complex)
    for m, k in enumerate(kraus):
        iso[:, m, :] = k
    iso = iso.reshape(d * r, d)
    domain = np.zeros((d * r, d), dtype=complex)
    for b in range(d):
        domain[b * r, b] = 1.0
    u = _unitary_mapping(domain, iso)

    pairs, start = [], 0
    for x, ops in blocks:
        if not ops:
            continue
        diag = np.zeros(r)
        diag[start:start + len(ops)] = 1.0
        pairs.append(Outcome(x, np.diag(diag).astype(complex)))
        start += len(ops)
    if start < r:
        diag = np.zeros(r)
        diag[start:] = 1.0
        pairs.append(Outcome(max(od.outcomes) + 1.0, np.diag(diag).astype(complex)))
    probe_state = np.outer(ket(0, r), ket(0, r))
    return IndirectModel(d, r, probe_state, u, DiscreteObservable(r, tuple(pairs), tol), tol)


def verify_realization(
    model: IndirectModel,
    app: Apparatus | OperationalDistribution,
    samples: int = 50,
    seed: int = 0,
) -> float:
    """Max trace-norm distance between realized and target operations on random states."""
    od = as_distribution(app)
    if model.sys_dim != od.dim:
        raise DimensionError(f"model on dim {model.sys_dim} vs distribution of dim {od.dim}")
    realized = realize(model, drop_zero=False).opdist
    keys = list(od.outcomes)
    for y in realized.outcomes:
        if match_outcome(keys, y, od.tol.outcome) is None:
            keys.append(y)
    rng = make_rng(seed)
    rhos = np.stack([random_density(od.dim, rng, rank=1 + (i % od.dim)) for i in range(samples)])
    worst = 0.0
    for x in keys:
        diff = apply(realized.get(x), rhos) - apply(od.get(x), rhos)
        worst = max(worst, max(trace_norm(m) for m in diff))
    return worst


def realized_effects(model: IndirectModel) -> dict[float, np.ndarray]:
    """``Tr_K[U^dagger (I (x) E^M(x)) U (I (x) sigma)]`` for every probe outcome."""
    d, k = model.sys_dim, model.probe_dim
    u = model.unitary
    out = {}
    for x, E in model.probe_observable.outcomes:
        m = dagger(u) @ np.kron(np.eye(d), E) @ u @ np.kron(np.eye(d), model.probe_state)
        out[x] = partial_trace_second(m, d, k)
    return out

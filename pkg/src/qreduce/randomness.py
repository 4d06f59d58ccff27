"""Seeded random ensembles of states, unitaries, observables and channels.

Every function takes a ``numpy.random.Generator``; use :func:`make_rng` to
build one from an integer seed. The bit generator is numpy's PCG64, and
independent streams are obtained with :func:`split_rng`.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from qreduce.operators import DiscreteObservable, dagger, ketbra


def make_rng(seed: int | np.random.Generator | None = None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def split_rng(seed: int, n: int) -> list[np.random.Generator]:
    """``n`` statistically independent generators derived from one seed."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def ginibre(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary."""
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(dim, random_state=rng)


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector."""
    v = ginibre(dim, 1, rng)[:, 0]
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density operator of the given rank (full rank by default).

    Drawn from the induced (Ginibre) measure, so full-rank samples follow the
    Hilbert-Schmidt distribution.
    """
    rank = dim if rank is None else rank
    g = ginibre(dim, rank, rng)
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = ginibre(dim, dim, rng)
    return (g + dagger(g)) / 2


def random_trace_class(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random (generally non-Hermitian) complex matrix."""
    return ginibre(dim, dim, rng)


def random_observable(
    dim: int,
    rng: np.random.Generator,
    multiplicities: Sequence[int] | None = None,
) -> DiscreteObservable:
    """Observable with a Haar-random eigenbasis.

    ``multiplicities`` gives the eigenspace dimensions (nondegenerate if
    omitted). Eigenvalues are distinct integers drawn without replacement, so
    they never fall within grouping tolerance of each other.
    """
    multiplicities = [1] * dim if multiplicities is None else list(multiplicities)
    if sum(multiplicities) != dim:
        raise ValueError("multiplicities must sum to dim")
    u = random_unitary(dim, rng)
    values = sorted(rng.choice(np.arange(-10, 11), size=len(multiplicities), replace=False))
    pairs, start = [], 0
    for v, m in zip(values, multiplicities):
        cols = u[:, start:start + m]
        pairs.append((float(v), cols @ dagger(cols)))
        start += m
    return DiscreteObservable.from_projections(pairs)


def random_kraus_channel(dim: int, n_kraus: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Kraus operators of a random trace-preserving CP map (from a Haar isometry)."""
    v = random_unitary(dim * n_kraus, rng)[:, :dim]
    return [v[k * dim:(k + 1) * dim, :] for k in range(n_kraus)]


def random_instrument_kraus(
    dim: int, n_outcomes: int, rng: np.random.Generator, max_kraus: int = 2
) -> list[list[np.ndarray]]:
    """Kraus sets of a random normalized CP distribution.

    A Haar isometry from ``dim`` into ``dim * total`` is sliced into blocks;
    outcome ``x`` receives between 1 and ``max_kraus`` consecutive blocks.
    """
    counts = [int(rng.integers(1, max_kraus + 1)) for _ in range(n_outcomes)]
    ops = random_kraus_channel(dim, sum(counts), rng)
    out, start = [], 0
    for c in counts:
        out.append(ops[start:start + c])
        start += c
    return out


def ensemble_densities(dim: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """Stack of ``n`` random densities, alternating Haar pure and full-rank mixed."""
    out = np.empty((n, dim, dim), dtype=complex)
    for k in range(n):
        if k % 2 == 0:
            out[k] = ketbra(random_pure_state(dim, rng))
        else:
            out[k] = random_density(dim, rng)
    return out

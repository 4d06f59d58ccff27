import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import KET0, PLUS, proj, pauli_x, pauli_z
from qreduce.apparatus import (
    OutcomeRecord,
    OutcomeStatistics,
    from_output_states,
    identity_apparatus,
    make_apparatus,
    measure,
    projection_postulate_apparatus,
)
from qreduce.errors import DimensionError, InconsistentAction, ZeroProbability
from qreduce.randomness import random_density, random_instrument_kraus, random_observable
from qreduce.sequential import (
    PsvMeasureView,
    chain_probabilities,
    check_mixing_law,
    empirical_frequencies,
    joint_distribution,
    joint_via_conditional,
    nonselective_marginal,
    psv_output_state,
    psv_probability,
    sample_trajectory,
)
from qreduce.superop import apply, from_kraus, linear_extension

seeds = st.integers(0, 2**32 - 1)


class SquaringZMeasurement:
    """Born statistics of Pauli-Z, but the state update ``rho -> rho^2 / Tr rho^2``."""

    def __init__(self):
        self.Z = pauli_z()

    def measure(self, rho):
        rho = np.asarray(rho, dtype=complex)
        sq = rho @ rho
        out = {}
        for x, E in self.Z.outcomes:
            p = float(np.trace(E @ rho).real)
            out[x] = OutcomeRecord(p, sq / np.trace(sq).real if p > 1e-12 else None)
        return OutcomeStatistics(out)

    def action(self, x):
        E = self.Z.projection_for(x)
        return lambda rho: np.trace(E @ rho) * (rho @ rho) / np.trace(rho @ rho)


def random_apparatus(d, rng):
    kind = rng.integers(3)
    if kind == 0:
        return projection_postulate_apparatus(random_observable(d, rng))
    if kind == 1:
        A = random_observable(d, rng)
        return from_output_states(A, [random_density(d, rng) for _ in range(d)])
    kraus = random_instrument_kraus(d, int(rng.integers(2, 4)), rng)
    return make_apparatus("cp", {float(x): from_kraus(ks, d) for x, ks in enumerate(kraus)})


# --- joint distribution ---------------------------------------------------------------


def test_repeated_z_is_diagonal():
    Zapp = projection_postulate_apparatus(pauli_z())
    j = joint_distribution(Zapp, Zapp, proj(PLUS))
    assert j.get(1, 1) == pytest.approx(0.5)
    assert j.get(-1, -1) == pytest.approx(0.5)
    assert j.get(1, -1) == pytest.approx(0.0, abs=1e-15)
    assert j.get(-1, 1) == pytest.approx(0.0, abs=1e-15)


def test_z_then_x_from_zero():
    Z, X = pauli_z(), pauli_x()
    rho = proj(KET0)
    j = joint_distribution(projection_postulate_apparatus(Z), projection_postulate_apparatus(X), rho)
    for z, Ez in Z.outcomes:
        for x, Ex in X.outcomes:
            oracle = np.trace(Ex @ Ez @ rho @ Ez).real
            assert j.get(z, x) == pytest.approx(oracle, abs=1e-15)
    assert j.get(1, 1) == pytest.approx(0.5) and j.get(1, -1) == pytest.approx(0.5)
    assert j.get(-1, 1) == 0 and j.get(-1, -1) == 0


def test_trivial_second_apparatus_gives_first_distribution(rng):
    app = random_apparatus(3, rng)
    rho = random_density(3, rng)
    j = joint_distribution(app, identity_apparatus(3), rho)
    probs = measure(app, rho).probabilities()
    for x, p in probs.items():
        assert j.get(x, 0.0) == pytest.approx(p, abs=1e-14)


def test_conditional_joint_zero_branch_row():
    Zapp = projection_postulate_apparatus(pauli_z())
    j = joint_via_conditional(Zapp, projection_postulate_apparatus(pauli_x()), proj(KET0))
    assert j.entries[(-1.0, 1.0)] == 0.0 and j.entries[(-1.0, -1.0)] == 0.0
    assert j.total() == pytest.approx(1.0)


def test_projective_pair_joint_formula(rng):
    A, B = random_observable(3, rng), random_observable(3, rng)
    rho = random_density(3, rng)
    j = joint_via_conditional(projection_postulate_apparatus(A), projection_postulate_apparatus(B), rho)
    for a, Ea in A.outcomes:
        for b, Eb in B.outcomes:
            assert j.get(a, b) == pytest.approx(np.trace(Eb @ Ea @ rho @ Ea).real, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, d=st.integers(2, 3))
def test_conditional_and_composed_joint_agree(seed, d):
    rng = np.random.default_rng(seed)
    a1, a2 = random_apparatus(d, rng), random_apparatus(d, rng)
    rho = random_density(d, rng)
    j = joint_distribution(a1, a2, rho)
    assert joint_via_conditional(a1, a2, rho).max_deviation(j) <= 1e-12
    # marginals
    assert j.total() == pytest.approx(1.0, abs=1e-9)
    probs = measure(a1, rho).probabilities()
    for x, p in j.marginal_x().items():
        assert p == pytest.approx(probs[x], abs=1e-9)


def test_joint_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        joint_distribution(random_apparatus(2, rng), random_apparatus(3, rng), random_density(2, rng))


# --- mixing law ---------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(seed=seeds, d=st.integers(2, 3))
def test_mixing_law_for_library_apparatuses(seed, d):
    rng = np.random.default_rng(seed)
    a1, a2 = random_apparatus(d, rng), random_apparatus(d, rng)
    dev = check_mixing_law(a1, a2, random_density(d, rng), random_density(d, rng), rng.uniform(0.05, 0.95))
    assert dev <= 1e-12


def test_mixing_law_equal_states_is_exact(rng):
    a = random_apparatus(2, rng)
    rho = random_density(2, rng)
    assert check_mixing_law(a, a, rho, rho, 0.5) == 0.0


def test_nonlinear_update_violates_mixing_law():
    double = SquaringZMeasurement()
    Xapp = projection_postulate_apparatus(pauli_x())
    dev = check_mixing_law(double, Xapp, proj(KET0), proj(PLUS), 0.5)
    # hand evaluation: the (+1,+1) entry is 5/8 for the mixture but 1/2 for the average
    assert dev == pytest.approx(0.125, abs=1e-12)
    assert dev > 0.01


def test_nonlinear_update_has_no_linear_extension():
    double = SquaringZMeasurement()
    with pytest.raises(InconsistentAction):
        linear_extension(double.action(1.0), 2)


def test_mixing_weight_must_be_interior(rng):
    a = random_apparatus(2, rng)
    with pytest.raises(ValueError):
        check_mixing_law(a, a, np.eye(2) / 2, np.eye(2) / 2, 1.0)


# --- set-indexed view ------------------------------------------------------------------------


def test_psv_probability_examples(rng):
    view = PsvMeasureView.of(projection_postulate_apparatus(pauli_z()))
    rho = random_density(2, rng)
    assert psv_probability(view, [1.0, -1.0], rho) == pytest.approx(1.0)
    assert psv_probability(view, [], rho) == 0.0
    assert psv_probability(view, [1.0], proj(PLUS)) == pytest.approx(0.5)


def test_psv_output_state_examples(rng):
    app = projection_postulate_apparatus(pauli_z())
    view = PsvMeasureView.of(app)
    rho = random_density(2, rng)
    np.testing.assert_allclose(psv_output_state(view, [1.0], rho), measure(app, rho).state(1.0), atol=1e-14)
    np.testing.assert_allclose(psv_output_state(view, [1.0, -1.0], rho), apply(app.opdist.total(), rho), atol=1e-14)
    np.testing.assert_allclose(psv_output_state(view, [1.0, -1.0], proj(PLUS)), np.eye(2) / 2, atol=1e-15)
    with pytest.raises(ZeroProbability):
        psv_output_state(view, [-1.0], proj(KET0))


@settings(max_examples=30, deadline=None)
@given(seed=seeds, split=st.integers(0, 2**10))
def test_psv_additivity(seed, split):
    rng = np.random.default_rng(seed)
    app = random_apparatus(3, rng)
    view = PsvMeasureView.of(app)
    rho = random_density(3, rng)
    outs = app.outcomes
    d1 = [x for i, x in enumerate(outs) if split >> i & 1]
    d2 = [x for x in outs if x not in d1]
    whole = psv_probability(view, outs, rho)
    assert whole == pytest.approx(psv_probability(view, d1, rho) + psv_probability(view, d2, rho), abs=1e-15)


# --- nonselective marginal -------------------------------------------------------------------


def test_nonselective_marginal_examples(rng):
    X = pauli_x()
    rho = random_density(2, rng)
    born = nonselective_marginal(identity_apparatus(2), X, rho)
    for x, E in X.outcomes:
        assert born[x] == pytest.approx(np.trace(E @ rho).real)
    after_z = nonselective_marginal(projection_postulate_apparatus(pauli_z()), X, proj(PLUS))
    assert after_z[1.0] == pytest.approx(0.5) and after_z[-1.0] == pytest.approx(0.5)


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_nonselective_marginal_matches_joint(seed):
    rng = np.random.default_rng(seed)
    app = random_apparatus(3, rng)
    B = random_observable(3, rng)
    rho = random_density(3, rng)
    marg = joint_distribution(app, projection_postulate_apparatus(B), rho).marginal_y()
    for b, p in nonselective_marginal(app, B, rho).items():
        assert p == pytest.approx(marg[b], abs=1e-12)


# --- sampling ---------------------------------------------------------------------------------


def test_eigenstate_trajectory_is_constant():
    Zapp = projection_postulate_apparatus(pauli_z())
    for seed in range(20):
        (step,) = sample_trajectory([Zapp], proj(KET0), seed)
        assert step.outcome == 1.0
        np.testing.assert_allclose(step.state, proj(KET0))


def test_sampling_is_deterministic_per_seed(rng):
    apps = [random_apparatus(2, rng) for _ in range(3)]
    rho = random_density(2, rng)
    a = [s.outcome for s in sample_trajectory(apps, rho, 7)]
    b = [s.outcome for s in sample_trajectory(apps, rho, 7)]
    assert a == b


def test_repeated_z_always_agrees():
    Zapp = projection_postulate_apparatus(pauli_z())
    gen = np.random.default_rng(0)
    runs = [sample_trajectory([Zapp, Zapp], proj(PLUS), gen) for _ in range(10_000)]
    counts, n = empirical_frequencies(runs)
    same = sum(c for k, c in counts.items() if k[0] == k[1]) / n
    assert same == 1.0
    first_plus = sum(c for k, c in counts.items() if k[0] == 1.0) / n
    assert abs(first_plus - 0.5) <= 3 * np.sqrt(0.25 / n)


def test_chain_probabilities_match_joint(rng):
    a1, a2 = random_apparatus(2, rng), random_apparatus(2, rng)
    rho = random_density(2, rng)
    chain = chain_probabilities([a1, a2], rho)
    j = joint_distribution(a1, a2, rho)
    for (x, y), p in j.entries.items():
        assert chain[(x, y)] == pytest.approx(p, abs=1e-14)


def test_trajectory_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        sample_trajectory([random_apparatus(3, rng)], random_density(2, rng), 0)

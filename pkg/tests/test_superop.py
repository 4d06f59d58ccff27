import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import KET0, KET1, PAULI_Z, PLUS, proj
from qreduce.errors import DimensionError, InconsistentAction, NotCP
from qreduce.operators import ket, ketbra
from qreduce.randomness import (
    random_density,
    random_kraus_channel,
    random_trace_class,
    random_unitary,
)
from qreduce.superop import (
    SuperOperator,
    apply,
    check_positivity,
    choi,
    completely_depolarizing,
    compose,
    contractivity_report,
    dual,
    estimate_trace_norm,
    extend_by_decomposition,
    from_choi,
    from_kraus,
    from_linear_function,
    identity_map,
    is_completely_positive,
    kraus_decompose,
    linear_extension,
    predual,
    prepare_map,
    sandwich,
    spanning_densities,
    transpose_map,
    unvec,
    vec,
    zero_map,
)

seeds = st.integers(0, 2**32 - 1)


def choi_oracle(fn, d):
    """Definition sum over matrix units."""
    units = [[np.outer(np.eye(d)[i], np.eye(d)[j]) for j in range(d)] for i in range(d)]
    return sum(np.kron(units[i][j], fn(units[i][j])) for i in range(d) for j in range(d))


def random_cp(d, rng, n_kraus=2, scale=1.0):
    return from_kraus([np.sqrt(scale) * k for k in random_kraus_channel(d, n_kraus, rng)], d)


# --- vectorization and application -----------------------------------------------


def test_vec_is_column_stacking(rng):
    x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    v = vec(x)
    for a in range(3):
        for b in range(3):
            assert v[a + 3 * b] == x[a, b]
    np.testing.assert_array_equal(unvec(v, 3), x)


def test_apply_identity_and_zero(rng):
    s = random_trace_class(3, rng)
    np.testing.assert_allclose(apply(identity_map(3), s), s)
    np.testing.assert_array_equal(apply(zero_map(3), s), np.zeros((3, 3)))


def test_apply_projector_sandwich_on_plus():
    out = apply(sandwich(proj(KET0)), proj(PLUS))
    np.testing.assert_allclose(out, proj(KET0) / 2, atol=1e-15)


def test_apply_batched_matches_loop(rng):
    L = random_cp(3, rng)
    batch = np.stack([random_trace_class(3, rng) for _ in range(5)])
    out = apply(L, batch)
    for s, o in zip(batch, out):
        np.testing.assert_allclose(o, apply(L, s))


@settings(max_examples=30, deadline=None)
@given(seed=seeds, dim=st.integers(1, 4))
def test_sandwich_matches_direct_product(seed, dim):
    rng = np.random.default_rng(seed)
    a, b, x = (random_trace_class(dim, rng) for _ in range(3))
    np.testing.assert_allclose(apply(sandwich(a, b), x), a @ x @ b, atol=1e-12)


def test_apply_dimension_mismatch():
    with pytest.raises(DimensionError):
        apply(identity_map(2), np.eye(3))


# --- duality -------------------------------------------------------------------


def test_dual_of_identity(rng):
    a = random_trace_class(2, rng)
    np.testing.assert_allclose(dual(identity_map(2))(a), a)


def test_dual_of_kraus_sandwich(rng):
    k = random_trace_class(3, rng)
    a = random_trace_class(3, rng)
    np.testing.assert_allclose(dual(sandwich(k))(a), k.conj().T @ a @ k, atol=1e-12)


def test_dual_of_trace_preserving_map_is_unital(rng):
    L = random_cp(3, rng)
    np.testing.assert_allclose(dual(L)(np.eye(3)), np.eye(3), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(seed=seeds, dim=st.integers(1, 5))
def test_duality_pairing(seed, dim):
    rng = np.random.default_rng(seed)
    L = SuperOperator(dim, rng.normal(size=(dim**2, dim**2)) + 1j * rng.normal(size=(dim**2, dim**2)))
    a, rho = random_trace_class(dim, rng), random_density(dim, rng)
    lhs = np.trace(a @ apply(L, rho))
    rhs = np.trace(dual(L)(a) @ rho)
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, abs(lhs))


def test_predual_inverts_dual(rng):
    L = random_cp(2, rng)
    assert predual(dual(L)).close_to(L, 1e-14)


# --- composition ---------------------------------------------------------------


def test_compose_with_identity(rng):
    L = random_cp(3, rng)
    assert compose(identity_map(3), L).close_to(L, 1e-14)
    assert compose(L, identity_map(3)).close_to(L, 1e-14)


def test_compose_orthogonal_projector_sandwiches_is_zero():
    assert compose(sandwich(proj(KET1)), sandwich(proj(KET0))).is_zero()


def test_compose_z_sandwich_twice_is_identity():
    LZ = sandwich(PAULI_Z)
    assert compose(LZ, LZ).close_to(identity_map(2), 1e-15)


def test_compose_order(rng):
    L1, L2 = random_cp(2, rng), random_cp(2, rng)
    rho = random_density(2, rng)
    np.testing.assert_allclose(apply(compose(L2, L1), rho), apply(L2, apply(L1, rho)), atol=1e-12)


# --- Choi ----------------------------------------------------------------------


def test_choi_of_identity():
    phi = (np.kron(KET0, KET0) + np.kron(KET1, KET1)) / np.sqrt(2)
    np.testing.assert_allclose(choi(identity_map(2)), 2 * proj(phi))
    np.testing.assert_allclose(choi(identity_map(2)), choi_oracle(lambda x: x, 2))


@pytest.mark.parametrize("d", [2, 3])
def test_choi_of_completely_depolarizing(d):
    oracle = choi_oracle(lambda x: np.trace(x) * np.eye(d) / d, d)
    np.testing.assert_allclose(choi(completely_depolarizing(d)), oracle, atol=1e-15)
    np.testing.assert_allclose(choi(completely_depolarizing(d)), np.eye(d * d) / d, atol=1e-15)


def test_choi_of_transpose_is_swap():
    swap = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            swap[2 * i + j, 2 * j + i] = 1
    np.testing.assert_array_equal(choi(transpose_map(2)), swap)
    np.testing.assert_allclose(choi(transpose_map(2)), choi_oracle(lambda x: x.T, 2))


@settings(max_examples=30, deadline=None)
@given(seed=seeds, dim=st.integers(1, 4))
def test_choi_matches_definition_and_inverts(seed, dim):
    rng = np.random.default_rng(seed)
    L = SuperOperator(dim, rng.normal(size=(dim**2, dim**2)) + 1j * rng.normal(size=(dim**2, dim**2)))
    np.testing.assert_allclose(choi(L), choi_oracle(lambda x: apply(L, x), dim), atol=1e-12)
    assert from_choi(choi(L)).close_to(L, 1e-14)


# --- complete positivity and positivity ------------------------------------------


def test_single_kraus_map_is_cp(rng):
    assert is_completely_positive(sandwich(random_trace_class(3, rng)))


def test_transpose_map_is_positive_not_cp():
    verdict = is_completely_positive(transpose_map(2))
    assert not verdict
    # SWAP has eigenvalues +1 (x3) and -1
    assert verdict.min_eigenvalue == pytest.approx(-1.0, abs=1e-12)
    pos = check_positivity(transpose_map(2), samples=1000, seed=0)
    assert not pos.found_counterexample
    # spectrum preservation, checked directly on the sampled states' images
    assert pos.min_eigenvalue >= -1e-12


def test_convex_mix_of_cp_maps_is_cp(rng):
    a, b = random_cp(3, rng), random_cp(3, rng)
    assert is_completely_positive(a * 0.3 + b * 0.7)


def test_check_positivity_finds_explicit_counterexample():
    def fn(rho):
        return rho[1, 1] * proj(KET0) - 0.1 * rho[0, 0] * proj(KET1)

    L = from_linear_function(fn, 2)
    np.testing.assert_allclose(np.linalg.eigvalsh(fn(proj(KET0))), [-0.1, 0.0])
    verdict = check_positivity(L, samples=200, seed=1)
    assert verdict.found_counterexample
    assert verdict.min_eigenvalue < -1e-3
    witness_out = apply(L, verdict.counterexample)
    assert np.linalg.eigvalsh(witness_out)[0] < 0


@settings(max_examples=25, deadline=None)
@given(seed=seeds, dim=st.integers(2, 4))
def test_cp_implies_no_positivity_counterexample(seed, dim):
    rng = np.random.default_rng(seed)
    L = random_cp(dim, rng, n_kraus=int(rng.integers(1, 4)))
    assert is_completely_positive(L)
    assert not check_positivity(L, samples=1000, seed=seed).found_counterexample


def test_check_positivity_deterministic_per_seed(rng):
    L = random_cp(2, rng)
    assert check_positivity(L, 50, seed=4).min_eigenvalue == check_positivity(L, 50, seed=4).min_eigenvalue


# --- contractivity flags ---------------------------------------------------------


def test_contractivity_identity_all_true():
    assert all(contractivity_report(identity_map(3)).as_dict().values())


def test_contractivity_half_map():
    r = contractivity_report(identity_map(2) * 0.5)
    assert r.contractive_tr_norm and r.dual_contractive
    assert not r.trace_preserving and not r.dual_unital


def test_contractivity_scaled_up_map_fails_both_routes(rng):
    r = contractivity_report(random_cp(2, rng) * 2.0)
    assert not r.contractive_tr_norm and not r.dual_contractive
    assert not r.trace_bound and not r.dual_I_bound


@pytest.mark.parametrize("seed", range(10))
def test_contractivity_flag_agrees_with_sampled_trace_norm(seed):
    rng = np.random.default_rng(seed)
    scale = rng.uniform(0.2, 1.8)
    L = random_cp(2, rng) * scale
    est = estimate_trace_norm(L, samples=400, seed=seed)
    flags = contractivity_report(L)
    if est > 1 + 1e-6:
        assert not flags.contractive_tr_norm
    # for a positive map the norm is attained on a density: the largest eigenvalue of L*(I)
    lmax = np.linalg.eigvalsh(dual(L)(np.eye(2)))[-1]
    assert est <= lmax + 1e-9
    assert flags.contractive_tr_norm == (lmax <= 1 + 1e-9)


@settings(max_examples=100, deadline=None)
@given(seed=seeds, dim=st.integers(2, 4))
def test_contractivity_flags_agree_for_positive_maps(seed, dim):
    rng = np.random.default_rng(seed)
    L = random_cp(dim, rng, scale=rng.uniform(0.0, 1.0))
    f = contractivity_report(L)
    assert f.trace_bound == f.dual_I_bound
    assert f.contractive_tr_norm == f.dual_contractive
    assert f.trace_preserving == f.dual_unital


# --- linear extension ------------------------------------------------------------


def test_linear_extension_of_sandwich():
    E = proj(KET0)
    L = linear_extension(lambda r: E @ r @ E, 2)
    assert L.close_to(sandwich(E), 1e-12)


def test_linear_extension_of_preparation(rng):
    E, target = proj(KET1), random_density(2, rng)
    L = linear_extension(lambda r: np.trace(E @ r) * target, 2)
    assert np.linalg.matrix_rank(L.transfer, tol=1e-10) == 1
    for r in spanning_densities(2):
        np.testing.assert_allclose(apply(L, r), np.trace(E @ r) * target, atol=1e-12)
    assert L.close_to(prepare_map(E, target), 1e-12)


def test_linear_extension_rejects_nonlinear_rule(rng):
    r1, r2 = random_density(2, rng), random_density(2, rng)
    mid = 0.5 * r1 + 0.5 * r2
    # direct evaluation shows the rule is not affine on mixtures
    assert np.max(np.abs(mid @ mid - 0.5 * (r1 @ r1 + r2 @ r2))) > 1e-3
    with pytest.raises(InconsistentAction):
        linear_extension(lambda r: r @ r, 2)


def test_linear_extension_from_disjoint_families_agree(rng):
    L0 = random_cp(3, rng)
    fam_b = np.stack([random_density(3, rng, rank=1) for _ in range(9)])
    a = linear_extension(lambda r: apply(L0, r), 3)
    b = linear_extension(lambda r: apply(L0, r), 3, family=fam_b)
    for _ in range(50):
        s = random_trace_class(3, rng)
        assert np.max(np.abs(apply(a, s) - apply(b, s))) <= 1e-9


def test_extend_by_decomposition_matches_transfer(rng):
    L0 = random_cp(3, rng)
    s = random_trace_class(3, rng)
    np.testing.assert_allclose(extend_by_decomposition(lambda r: apply(L0, r), s), apply(L0, s), atol=1e-12)


# --- Kraus -----------------------------------------------------------------------


def test_kraus_of_unitary_conjugation(rng):
    u = random_unitary(3, rng)
    ks = kraus_decompose(sandwich(u))
    assert len(ks) == 1
    k = ks.operators[0]
    phase = np.vdot(u.ravel(), k.ravel()) / 3
    assert abs(abs(phase) - 1) < 1e-10
    np.testing.assert_allclose(k, phase * u, atol=1e-10)


def test_kraus_of_completely_depolarizing_qubit():
    ks = kraus_decompose(completely_depolarizing(2))
    assert len(ks) == 4
    np.testing.assert_allclose(ks.completeness(), np.eye(2), atol=1e-12)
    assert ks.is_trace_preserving()


def test_kraus_of_zero_map_is_empty():
    ks = kraus_decompose(zero_map(3))
    assert len(ks) == 0
    assert ks.to_superoperator().is_zero()


def test_kraus_of_non_cp_map_raises():
    with pytest.raises(NotCP) as info:
        kraus_decompose(transpose_map(2))
    assert info.value.min_eigenvalue == pytest.approx(-1.0)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, dim=st.integers(2, 5), n=st.integers(1, 4))
def test_kraus_round_trip(seed, dim, n):
    rng = np.random.default_rng(seed)
    L = random_cp(dim, rng, n_kraus=n, scale=rng.uniform(0.1, 1.0))
    ks = kraus_decompose(L)
    assert ks.to_superoperator().close_to(L, 1e-9)
    rho = random_density(dim, rng)
    np.testing.assert_allclose(ks.apply(rho), apply(L, rho), atol=1e-9)


# --- SuperOperator value semantics ---------------------------------------------------


def test_transfer_is_read_only(rng):
    L = random_cp(2, rng)
    with pytest.raises(ValueError):
        L.transfer[0, 0] = 1


def test_superoperator_shape_check():
    with pytest.raises(DimensionError):
        SuperOperator(2, np.eye(3))


def test_from_linear_function_tabulates_matrix_units():
    L = from_linear_function(lambda x: x.T, 2)
    assert L.close_to(transpose_map(2), 0)
    np.testing.assert_array_equal(apply(L, ketbra(ket(0, 2), ket(1, 2))), ketbra(ket(1, 2), ket(0, 2)))

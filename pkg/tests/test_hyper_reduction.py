import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stlspg.hyper_reduction import (
    DenseBasis,
    ResidualTensor,
    collect_residual_snapshots,
    gappy_reconstruct,
    greedy_spacetime_samples,
    greedy_spatial_samples,
    greedy_temporal_samples,
    residual_basis,
    sample_quotas,
    spatial_then_temporal_samples,
    temporal_then_spatial_samples,
)
from stlspg.models import burgers_model
from stlspg.samples import SampleSet
from stlspg.st_rom import SpaceTimeProblem
from stlspg.tensor_decomp import SpaceTimeBasis, build_state_tensor, spatial_pod, temporal_basis_tailored
from stlspg.time_integration import TimeGrid, backward_euler_scheme, solve_fom


# brute-force oracles written directly from the greedy listings ------------------------
def _oracle_error(M, Ns, i, idx):
    """Gappy error of column i from columns < i using rows idx (dense pinv)."""
    e = M[:, i].copy()
    if i > 0 and len(idx):
        c = np.linalg.pinv(M[np.asarray(idx)][:, :i]) @ M[np.asarray(idx), i]
        e -= M[:, :i] @ c
    return e


def _oracle_pairs(M, Ns, Nt, n):
    quotas = sample_quotas(n, M.shape[1])
    chosen = []
    for i, q in enumerate(quotas):
        if q == 0:
            break
        e = np.abs(_oracle_error(M, Ns, i, chosen))  # once per greedy iteration
        for _ in range(q):
            best = max((v, -k) for k, v in enumerate(e) if k not in chosen)
            chosen.append(-best[1])
    return chosen


def _oracle_temporal(M, Ns, Nt, n, spatial):
    quotas = sample_quotas(n, M.shape[1])
    chosen = []
    for i, q in enumerate(quotas):
        if q == 0:
            break
        idx = [s + Ns * t for t in chosen for s in spatial]
        E = _oracle_error(M, Ns, i, idx).reshape(Ns, Nt, order="F")
        score = (E ** 2).sum(axis=0)
        for _ in range(q):
            best = max((score[t], -t) for t in range(Nt) if t not in chosen)
            chosen.append(-best[1])
    return chosen


def _oracle_spatial(M, Ns, Nt, n, temporal):
    quotas = sample_quotas(n, M.shape[1])
    chosen = []
    for i, q in enumerate(quotas):
        if q == 0:
            break
        idx = [s + Ns * t for s in chosen for t in temporal]
        E = _oracle_error(M, Ns, i, idx).reshape(Ns, Nt, order="F")
        score = (E ** 2).sum(axis=1)
        for _ in range(q):
            best = max((score[s], -s) for s in range(Ns) if s not in chosen)
            chosen.append(-best[1])
    return chosen


def _random_basis(seed, Ns, Nt, nr):
    M = np.linalg.qr(np.random.default_rng(seed).standard_normal((Ns * Nt, nr)))[0]
    return DenseBasis(M, Ns, Nt)


@given(seed=st.integers(0, 10_000), Ns=st.integers(3, 12), Nt=st.integers(2, 10),
       nr=st.integers(1, 5), extra=st.integers(0, 7))
def test_algorithm1_matches_exhaustive_oracle(seed, Ns, Nt, nr, extra):
    B = _random_basis(seed, Ns, Nt, nr)
    n = min(nr + extra, Ns * Nt)
    S = greedy_spacetime_samples(B, n)
    got = list(S.space + Ns * S.time)
    assert got == _oracle_pairs(B.M, Ns, Nt, n)
    assert S.size == n


@given(seed=st.integers(0, 10_000), Ns=st.integers(3, 12), Nt=st.integers(3, 12),
       nr=st.integers(1, 4), extra=st.integers(0, 5), ns=st.integers(1, 3))
def test_algorithm2_matches_exhaustive_oracle(seed, Ns, Nt, nr, extra, ns):
    B = _random_basis(seed, Ns, Nt, nr)
    n = min(nr + extra, Nt)
    spatial = list(np.random.default_rng(seed).permutation(Ns)[:ns])
    got = list(greedy_temporal_samples(B, n, np.array(spatial)))
    assert got == _oracle_temporal(B.M, Ns, Nt, n, spatial)


@given(seed=st.integers(0, 10_000), Ns=st.integers(3, 12), Nt=st.integers(3, 12),
       nr=st.integers(1, 4), extra=st.integers(0, 5), nt=st.integers(1, 3))
def test_algorithm3_matches_exhaustive_oracle(seed, Ns, Nt, nr, extra, nt):
    B = _random_basis(seed, Ns, Nt, nr)
    n = min(nr + extra, Ns)
    temporal = list(np.random.default_rng(seed + 1).permutation(Nt)[:nt])
    got = list(greedy_spatial_samples(B, n, np.array(temporal)))
    assert got == _oracle_spatial(B.M, Ns, Nt, n, temporal)


def test_greedy_on_factored_residual_basis_matches_dense():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((15, 12, 4))
    RB = residual_basis(X, "tailored", 4, 2)
    D = DenseBasis(RB.matrix(), 15, 12)
    assert list(greedy_temporal_samples(RB, 6, np.arange(15))) == _oracle_temporal(D.M, 15, 12, 6, list(range(15)))
    t = greedy_temporal_samples(RB, 6, np.arange(15))
    assert list(greedy_spatial_samples(RB, 9, t)) == _oracle_spatial(D.M, 15, 12, 9, list(t))
    S = greedy_spacetime_samples(RB, 10)
    assert list(S.space + 15 * S.time) == _oracle_pairs(D.M, 15, 12, 10)


def test_canonical_basis_picks_positions():
    Ns, Nt = 5, 4
    pos = [7, 2, 13]
    M = np.zeros((Ns * Nt, 3))
    M[pos, range(3)] = 1.0
    S = greedy_spacetime_samples(DenseBasis(M, Ns, Nt), 3)
    assert list(S.space + Ns * S.time) == pos


def test_temporal_concentrated_column():
    Ns, Nt = 4, 10
    M = np.zeros((Ns * Nt, 1))
    M[Ns * 7: Ns * 8, 0] = 0.5
    assert greedy_temporal_samples(DenseBasis(M, Ns, Nt), 1, np.arange(Ns))[0] == 7


def test_spatial_first_pick_largest_time_sum():
    Ns, Nt = 5, 3
    rng = np.random.default_rng(0)
    M = rng.standard_normal((Ns * Nt, 2))
    score = (M[:, 0].reshape(Ns, Nt, order="F") ** 2).sum(axis=1)
    got = greedy_spatial_samples(DenseBasis(M, Ns, Nt), 2, np.arange(Nt))
    assert got[0] == int(np.argmax(score))


def test_separable_spatial_greedy_reduces_to_spatial_factor():
    rng = np.random.default_rng(2)
    Ns, Nt = 9, 6
    Phi = np.linalg.qr(rng.standard_normal((Ns, 3)))[0]
    psi = np.linalg.qr(rng.standard_normal((Nt, 1)))[0]
    M = np.kron(psi, Phi)  # column-major vec of phi_i psi^T
    got = greedy_spatial_samples(DenseBasis(M, Ns, Nt), 3, np.arange(Nt))
    # spatial-only oracle on Phi: |psi|=1 so time-summed squares equal squared spatial errors
    ref = _oracle_spatial(Phi, Ns, 1, 3, [0])
    assert list(got) == ref


@given(n=st.integers(1, 300), nb=st.integers(1, 60))
def test_quotas(n, nb):
    q = sample_quotas(n, nb)
    assert q.sum() == n
    assert q.max() - q.min() <= 1
    if n >= nb:
        assert q.min() >= 1
    if n == nb:
        assert np.all(q == 1)


def test_too_many_samples():
    B = _random_basis(0, 3, 2, 2)
    with pytest.raises(ValueError):
        greedy_spacetime_samples(B, 7)
    with pytest.raises(ValueError):
        greedy_temporal_samples(B, 3, np.arange(3))
    with pytest.raises(ValueError):
        greedy_spatial_samples(B, 2, np.array([], dtype=int))


def test_sequenced_samplers_are_products():
    B = _random_basis(1, 8, 6, 3)
    S = temporal_then_spatial_samples(B, 4, 3)
    assert S.is_product and S.size == 12
    S2 = spatial_then_temporal_samples(B, 4, 3)
    assert S2.is_product and S2.size == 12


# gappy reconstruction -----------------------------------------------------------------------
@given(seed=st.integers(0, 10_000), extra=st.integers(0, 10))
def test_gappy_exact_in_span(seed, extra):
    rng = np.random.default_rng(seed)
    Ns, Nt, nr = 7, 6, 4
    B = _random_basis(seed, Ns, Nt, nr)
    c = rng.standard_normal(nr)
    v = B.M @ c
    idx = rng.permutation(Ns * Nt)[: nr + extra]
    S = SampleSet.pairs(idx % Ns, idx // Ns)
    if np.linalg.matrix_rank(B.M[idx]) < nr:
        return
    coef, field = gappy_reconstruct(B, S, v[idx])
    np.testing.assert_allclose(coef, c, atol=1e-10)
    np.testing.assert_allclose(field.ravel(order="F"), v, atol=1e-10)


def test_gappy_full_sampling_is_projection_and_error_order():
    rng = np.random.default_rng(3)
    Ns, Nt, nr = 6, 5, 3
    B = _random_basis(3, Ns, Nt, nr)
    v = rng.standard_normal(Ns * Nt)
    proj = B.M @ (B.M.T @ v)
    _, field = gappy_reconstruct(B, SampleSet.full(Ns, Nt), v[np.arange(Ns * Nt)])
    np.testing.assert_allclose(field.ravel(order="F"), proj, atol=1e-12)
    idx = rng.permutation(Ns * Nt)[:8]
    _, f2 = gappy_reconstruct(B, SampleSet.pairs(idx % Ns, idx // Ns), v[idx])
    assert np.linalg.norm(f2.ravel(order="F") - v) >= np.linalg.norm(proj - v) - 1e-12


def test_gappy_rank_deficient():
    M = np.zeros((12, 2))
    M[0, 0] = M[1, 1] = 1
    with pytest.raises(np.linalg.LinAlgError):
        gappy_reconstruct(DenseBasis(M, 4, 3), SampleSet.pairs([2, 3], [0, 0]), np.zeros(2))


# residual bases ------------------------------------------------------------------------------
@pytest.mark.parametrize("variant", ["thosvd", "sthosvd", "tailored"])
def test_residual_basis_orthonormal(variant):
    X = np.random.default_rng(0).standard_normal((10, 8, 3))
    RB = residual_basis(ResidualTensor(X, []), variant, 4, 2)
    M = RB.matrix()
    np.testing.assert_allclose(M.T @ M, np.eye(RB.n_r), atol=1e-12)
    sp, tm = np.array([1, 9, 4]), np.array([0, 7, 3])
    np.testing.assert_allclose(RB.rows(sp, tm), M[sp + 10 * tm], atol=1e-13)
    d = np.random.default_rng(1).standard_normal(RB.n_r)
    np.testing.assert_allclose(RB.field(d).ravel(order="F"), M @ d, atol=1e-12)


def test_residual_basis_rank_one():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(6), rng.standard_normal(5)
    R = np.outer(a, b)[:, :, None]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        RB = residual_basis(R, "tailored", 1, 1)
    assert RB.n_r == 1
    v = R[:, :, 0].ravel(order="F")
    m = RB.matrix()[:, 0]
    assert abs(m @ v) / np.linalg.norm(v) == pytest.approx(1.0)


@pytest.mark.parametrize("variant", ["thosvd", "sthosvd", "tailored"])
def test_residual_basis_rank_deficient_temporal_data(variant):
    rng = np.random.default_rng(5)
    Phi = np.linalg.qr(rng.standard_normal((6, 2)))[0]
    psi = np.linalg.qr(rng.standard_normal((5, 1)))[0][:, 0]
    # temporal data of rank 1 while two temporal vectors are requested
    X = np.stack([np.outer(Phi[:, 0] + Phi[:, 1], psi), np.outer(Phi[:, 0] - Phi[:, 1], psi)], axis=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        RB = residual_basis(X, variant, 2, 2)
    M = RB.matrix()
    np.testing.assert_allclose(M.T @ M, np.eye(RB.n_r), atol=1e-12)
    for k in range(2):
        v = X[:, :, k].ravel(order="F")
        np.testing.assert_allclose(M @ (M.T @ v), v, atol=1e-12)


def test_residual_basis_unknown_variant():
    with pytest.raises(ValueError):
        residual_basis(np.ones((3, 3, 1)), "cp", 1, 1)


# snapshot protocols -----------------------------------------------------------------------
@pytest.fixture(scope="module")
def small_setup():
    m = burgers_model(20)
    sch = backward_euler_scheme()
    g = TimeGrid.uniform(1e-2, 15)
    params = [(1.2, 0.02), (1.5, 0.025), (1.3, 0.022)]
    trs = [solve_fom(m, sch, g, mu) for mu in params]
    X = build_state_tensor(trs)
    Phi = spatial_pod(X, 3)
    B = SpaceTimeBasis(Phi, temporal_basis_tailored(X, Phi, 2))
    return m, sch, g, params, trs, B


def test_method1_counts_iterates(small_setup):
    m, sch, g, params, trs, B = small_setup
    R = collect_residual_snapshots("rom_training", model=m, scheme=sch, grid=g, basis=B, params=params)
    assert R.shape[:2] == (20, 15)
    assert R.n_res >= 2 * len(params)
    assert R.n_res == len(R.provenance)


def test_method2_full_rank_zero(small_setup):
    m, sch, g, params, trs, B = small_setup
    X = build_state_tensor(trs)
    Phi = spatial_pod(X, 20, check_rank=False)
    from stlspg.tensor_decomp import temporal_basis_sthosvd
    Bf = SpaceTimeBasis(Phi, np.eye(15))
    R = collect_residual_snapshots("fom_projection", model=m, scheme=sch, grid=g, basis=Bf, trajectories=trs)
    assert R.n_res == 3
    assert np.abs(R.data).max() <= 1e-8


def test_method3_degenerate_box(small_setup):
    m, sch, g, params, trs, B = small_setup
    y = np.full(B.n_st, 0.1)
    R = collect_residual_snapshots("random", model=m, scheme=sch, grid=g, basis=B,
                                   coord_bounds=np.column_stack([y, y]),
                                   param_bounds=[[1.3, 1.3], [0.02, 0.02]], n_samples=4, seed=3)
    assert R.n_res == 4
    for k in range(1, 4):
        np.testing.assert_array_equal(R.data[:, :, k], R.data[:, :, 0])
    assert R.provenance[0]["seed"] == 3


def test_unknown_snapshot_method():
    with pytest.raises(KeyError):
        collect_residual_snapshots("magic")


def test_product_samples_visit_only_sampled_times(small_setup):
    m, sch, g, params, trs, B = small_setup
    prob = SpaceTimeProblem(m, sch, g, B, params[0])
    S = SampleSet.product([2, 7, 11], [0, 4, 9, 14])
    m.counter.reset()
    prob.residual(np.zeros(B.n_st), S)
    assert m.counter.velocity_calls == 4

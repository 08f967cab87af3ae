import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stlspg.tensor_decomp import (
    RankDeficiencyError,
    SpaceTimeBasis,
    StateTensor,
    assemble_st_basis,
    build_state_tensor,
    contract_space,
    fold,
    rank_for_energy,
    spatial_pod,
    temporal_basis_sthosvd,
    temporal_basis_tailored,
    temporal_basis_thosvd,
    truncated_svd,
    unfold,
)
from stlspg.st_rom import project_fom_solution
from stlspg.time_integration import Trajectory


def _traj(states, mu=(0.0,)):
    return Trajectory(np.asarray(states, dtype=float), mu)


def _principal_cos_min(A, B):
    return np.linalg.svd(np.linalg.qr(A)[0].T @ np.linalg.qr(B)[0], compute_uv=False).min()


def test_state_tensor_centering():
    w0 = np.array([1.0, 2.0])
    tr = _traj(np.column_stack([w0, w0, w0]))
    X = build_state_tensor([tr])
    assert X.shape == (2, 2, 1)
    np.testing.assert_array_equal(X.data, 0.0)
    tr = _traj(np.column_stack([w0, [3.0, 5.0]]))
    np.testing.assert_array_equal(build_state_tensor([tr]).data[:, 0, 0], [2.0, 3.0])


def test_state_tensor_mismatch():
    with pytest.raises(ValueError):
        build_state_tensor([_traj(np.zeros((2, 3))), _traj(np.zeros((2, 4)))])


def test_burgers_tensor_shape(burgers_data):
    assert burgers_data.tensor.shape == (100, 2000, 8)


def test_unfold_index_bookkeeping():
    X = np.zeros((4, 5, 2))
    X[1, 2, 0] = 5.0  # one-based (2, 3, 1)
    M1 = unfold(X, 1)
    M2 = unfold(X, 2)
    assert M1.shape == (4, 10) and M2.shape == (5, 8)
    assert M1[1, 2] == 5.0 and M2[2, 1] == 5.0
    X[3, 4, 1] = 7.0
    assert unfold(X, 1)[3, 5 + 4] == 7.0
    assert unfold(X, 2)[4, 4 + 3] == 7.0
    with pytest.raises(ValueError):
        unfold(X, 3)


@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 4), st.integers(0, 100))
def test_fold_roundtrip(a, b, c, seed):
    X = np.random.default_rng(seed).standard_normal((a, b, c))
    for mode in (1, 2):
        np.testing.assert_array_equal(fold(unfold(X, mode), mode, X.shape), X)


def test_truncated_svd_examples():
    _, s, _ = truncated_svd(np.eye(3), 3)
    np.testing.assert_allclose(s, 1.0)
    a, b = np.array([1.0, 2.0, 2.0]), np.array([3.0, 4.0])
    _, s, _ = truncated_svd(np.outer(a, b), 2)
    assert s[0] == pytest.approx(15.0) and s[1] == pytest.approx(0.0, abs=1e-12)
    M = np.random.default_rng(0).standard_normal((20, 12))
    U, s, V = truncated_svd(M, 12)
    np.testing.assert_allclose(U.T @ U, np.eye(12), atol=1e-12)
    assert np.linalg.norm(M - U @ np.diag(s) @ V.T) <= 1e-10
    assert np.all(np.diff(s) <= 0)
    with pytest.raises(ValueError):
        truncated_svd(M, 13)


def test_sign_convention_deterministic():
    M = np.random.default_rng(1).standard_normal((8, 6))
    U, _, _ = truncated_svd(M, 4)
    U2, _, _ = truncated_svd(-M, 4)
    for k in range(4):
        assert U[np.argmax(np.abs(U[:, k])), k] > 0
    np.testing.assert_allclose(U, U2, atol=1e-12)


def test_rank_for_energy():
    s = np.array([3.0, 2.0, 1.0, 0.0])
    assert rank_for_energy(s, 9 / 14) == 1
    assert rank_for_energy(s, 0.99) == 3
    assert rank_for_energy(s, 1.0) == 3


def _separable(seed=0, shape=(6, 7, 3)):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.standard_normal(n) for n in shape)
    return np.einsum("i,j,k->ijk", a, b, c), a, b, c


def test_rank_one_bases():
    X, a, b, c = _separable()
    phi = spatial_pod(X, 1)[:, 0]
    assert abs(phi @ a) / np.linalg.norm(a) == pytest.approx(1.0)
    psi = temporal_basis_thosvd(X, 1)[:, 0]
    assert abs(psi @ b) / np.linalg.norm(b) == pytest.approx(1.0)
    psi2 = temporal_basis_sthosvd(X, (a / np.linalg.norm(a))[:, None], 1)[:, 0]
    assert abs(psi2 @ b) / np.linalg.norm(b) == pytest.approx(1.0)
    fams = temporal_basis_tailored(X, (a / np.linalg.norm(a))[:, None], 1)
    assert len(fams) == 1 and fams[0].shape == (7, 1)
    assert abs(fams[0][:, 0] @ b) / np.linalg.norm(b) == pytest.approx(1.0)


def test_rank_deficiency_reports_attainable():
    X, *_ = _separable()
    with pytest.raises(RankDeficiencyError) as exc:
        spatial_pod(X, 2)
    assert exc.value.attainable == 1
    with pytest.raises(ValueError):
        temporal_basis_tailored(X, spatial_pod(X, 1), 4)


@given(seed=st.integers(0, 1000), r=st.integers(1, 5))
def test_eckart_young_all_bases(seed, r):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((9, 8, 3))
    for mode, U in ((1, spatial_pod(X, r)), (2, temporal_basis_thosvd(X, r))):
        M = unfold(X, mode)
        s = np.linalg.svd(M, compute_uv=False)
        err = np.linalg.norm(M - U @ (U.T @ M)) ** 2
        assert err == pytest.approx(np.sum(s[r:] ** 2), rel=1e-8, abs=1e-12)
    Phi = spatial_pod(X, 4)
    Y = contract_space(X, Phi)
    Psi = temporal_basis_sthosvd(X, Phi, r)
    M = unfold(Y, 2)
    s = np.linalg.svd(M, compute_uv=False)
    assert np.linalg.norm(M - Psi @ (Psi.T @ M)) ** 2 == pytest.approx(np.sum(s[r:] ** 2), rel=1e-8, abs=1e-12)
    k = min(r, 3)
    fams = temporal_basis_tailored(X, Phi, k)
    for i, T in enumerate(fams):
        s = np.linalg.svd(Y[i], compute_uv=False)
        assert np.linalg.norm(Y[i] - T @ (T.T @ Y[i])) ** 2 == pytest.approx(np.sum(s[k:] ** 2), rel=1e-8, abs=1e-12)


def test_sthosvd_equals_thosvd_with_full_spatial_basis():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((5, 12, 3))
    Phi = spatial_pod(X, 5)
    A = temporal_basis_thosvd(X, 4)
    B = temporal_basis_sthosvd(X, Phi, 4)
    assert _principal_cos_min(A, B) >= np.cos(1e-8)


def test_burgers_bases(burgers_data):
    X = burgers_data.tensor
    Phi, s = spatial_pod(X, 15, return_spectrum=True)
    assert Phi.shape == (100, 15)
    np.testing.assert_allclose(Phi.T @ Phi, np.eye(15), atol=1e-12)
    M = unfold(X, 1)
    assert np.linalg.norm(M - Phi @ (Phi.T @ M)) ** 2 == pytest.approx(np.sum(s[15:] ** 2), rel=1e-8)
    Psi = temporal_basis_sthosvd(X, Phi, 20)
    assert Psi.shape == (2000, 20)
    np.testing.assert_allclose(Psi.T @ Psi, np.eye(20), atol=1e-12)
    assert unfold(contract_space(X, Phi), 2).shape == (2000, 120)
    assert unfold(X, 2).shape == (2000, 800)
    fams = temporal_basis_tailored(X, Phi, 2)
    B = SpaceTimeBasis(Phi, fams)
    assert B.n_st == 30
    for T in fams:
        np.testing.assert_allclose(T.T @ T, np.eye(2), atol=1e-12)
    assert SpaceTimeBasis(Phi, Psi).n_st == 300


def test_thosvd_vs_sthosvd_high_energy(burgers_data):
    X = burgers_data.tensor
    Phi, s = spatial_pod(X, 60, return_spectrum=True)
    assert np.sum(s[:60] ** 2) / np.sum(s ** 2) >= 1 - 1e-10
    A = temporal_basis_thosvd(X, 10)
    B = temporal_basis_sthosvd(X, Phi, 10)
    assert np.arccos(min(1.0, _principal_cos_min(A, B))) <= 1e-4


def test_index_map_and_storage():
    rng = np.random.default_rng(0)
    Phi = np.linalg.qr(rng.standard_normal((6, 3)))[0]
    fams = [np.linalg.qr(rng.standard_normal((5, 2)))[0] for _ in range(3)]
    B = assemble_st_basis(Phi, fams)
    assert B.index(1, 1) == 1 and B.index(2, 1) == 3 and B.index(3, 2) == 6
    with pytest.raises(IndexError):
        B.index(1, 3)
    assert B.storage_bound == 3 * 6 + 6 * 5
    np.testing.assert_array_equal(B.evaluate(0), 0.0)
    M = B.matrix()
    np.testing.assert_allclose(M.T @ M, B.gram(), atol=1e-12)
    np.testing.assert_allclose(M.T @ M, np.eye(6), atol=1e-12)
    y = rng.standard_normal(6)
    np.testing.assert_allclose(B.field(y).ravel(order="F"), M @ y, atol=1e-12)
    np.testing.assert_allclose(B.evaluate(3) @ y, B.field(y)[:, 2], atol=1e-12)
    X = rng.standard_normal((6, 5))
    np.testing.assert_allclose(B.project(X), M.T @ X.ravel(order="F"), atol=1e-12)
    sp, tm = np.array([0, 5, 2]), np.array([4, 0, 2])
    np.testing.assert_allclose(B.rows(sp, tm), M[sp + 6 * tm], atol=1e-14)


def test_full_rank_limit_reproduces_training():
    rng = np.random.default_rng(7)
    N_s, N_t = 4, 6
    trs = [Trajectory(np.column_stack([np.ones(N_s), rng.standard_normal((N_s, N_t))]), (float(k),))
           for k in range(2)]
    X = build_state_tensor(trs)
    Phi = spatial_pod(X, N_s)
    rank = np.linalg.matrix_rank(unfold(contract_space(X, Phi), 2))
    B = SpaceTimeBasis(Phi, temporal_basis_sthosvd(X, Phi, rank))
    for tr in trs:
        y = project_fom_solution(B, tr)
        np.testing.assert_allclose(B.field(y), tr.states[:, 1:] - tr.states[:, :1], atol=1e-10)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmwave_dl.measurement import (
    MeasurementDataset,
    TrainingConfig,
    make_frames,
    measurement_tensor,
    random_hybrid_matrix,
    sensing_row_block,
    simulate_training,
    stack_locations,
    whitening_operator,
)
from mmwave_dl.tensor import unfold

from conftest import crandn, rel_err, small_channel


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_row_block_maps_vec_h(n_t, n_r, L_t, L_r, seed):
    rng = np.random.default_rng(seed)
    F, W, q, H = crandn(rng, n_t, L_t), crandn(rng, n_r, L_r), crandn(rng, L_t), crandn(rng, n_r, n_t)
    lhs = sensing_row_block(F, q, W) @ H.reshape(-1, order="F")
    assert rel_err(lhs, W.conj().T @ H @ F @ q) < 1e-11


def test_row_block_shape_check():
    with pytest.raises(ValueError):
        sensing_row_block(np.ones((3, 2)), np.ones(3), np.ones((2, 2)))


def test_hybrid_matrix_constant_modulus():
    W = random_hybrid_matrix(6, 3, N_Q=3, seed=0)
    assert np.allclose(np.abs(W), 1 / np.sqrt(6))
    phases = np.angle(W * np.sqrt(6)) / (2 * np.pi / 8)
    assert np.allclose(phases, np.round(phases))
    with pytest.raises(ValueError):
        random_hybrid_matrix(0, 2)


def test_frames_power_and_pilots():
    cfg = TrainingConfig(M=5, L_t=3, P_tr=2.0)
    fr = make_frames(4, 3, 6, cfg, seed=1)
    assert fr.F.shape == (5, 4, 3) and fr.W.shape == (5, 3, 2) and fr.q.shape == (5, 3)
    assert np.allclose(np.sum(np.abs(fr.q) ** 2, axis=1), 2.0)
    assert np.allclose(np.abs(fr.pilots), 1)
    assert fr.Phi.shape == (10, 12)


def test_noise_levels():
    cfg = TrainingConfig(snr_db=10, N_rep=4, P_tr=2.0)
    assert cfg.sigma2 == pytest.approx(0.2)
    assert cfg.sigma2_eff == pytest.approx(0.05)
    with pytest.raises(ValueError):
        TrainingConfig(M=0)
    with pytest.raises(ValueError):
        TrainingConfig(P_tr=0)


def test_noiseless_measurements_follow_sensing_matrix():
    ch = small_channel(seed=1)
    cfg = TrainingConfig(M=6)
    ds = simulate_training(ch, cfg, make_frames(4, 3, 4, cfg, seed=0), noiseless=True)
    assert rel_err(ds.Y[0], ds.Phi @ ch.vec_freq()) < 1e-12


def test_whitening_makes_noise_white():
    ch = small_channel(seed=1)
    cfg = TrainingConfig(M=3, snr_db=0, N_rep=2)
    fr = make_frames(4, 3, 4, cfg, seed=0)
    ds = simulate_training(ch, cfg, fr, noiseless=True)
    op = whitening_operator(ds)
    # the whitened noise covariance is sigma2_eff * I: each block B (W^* W) B^* = I
    for B, W in zip(op.blocks, fr.W):
        assert rel_err(B @ (W.conj().T @ W) @ B.conj().T, np.eye(2)) < 1e-12
    Phi_w, Yw = ds.whitened()
    assert rel_err(Yw[0], Phi_w @ ch.vec_freq()) < 1e-12
    assert rel_err(op.matrix @ ds.Phi, Phi_w) < 1e-12
    # empirical check
    noise = []
    for s in range(400):
        d = simulate_training(ch, cfg, fr, seed=s)
        noise.append(op.apply(d.Y[0] - ds.Y[0]))
    Z = np.concatenate([n.T for n in noise])  # rows are noise vectors
    C = Z.conj().T @ Z / Z.shape[0]
    assert rel_err(C, cfg.sigma2_eff * np.eye(C.shape[0])) < 0.1


def test_singular_combiner_warns():
    ch = small_channel(seed=1)
    cfg = TrainingConfig(M=2, L_r=2)
    fr = make_frames(4, 3, 4, cfg, seed=0)
    fr.W[0][:, 1] = fr.W[0][:, 0]
    ds = simulate_training(ch, cfg, fr, noiseless=True)
    with pytest.warns(RuntimeWarning):
        op = whitening_operator(ds)
    assert op.singular


def test_repetition_reduces_noise_variance():
    ch = small_channel(seed=0)
    base = TrainingConfig(M=4, snr_db=0)
    fr = make_frames(4, 3, 4, base, seed=0)
    clean = simulate_training(ch, base, fr, noiseless=True).Y[0]
    var = {}
    for n_rep in (1, 4):
        cfg = TrainingConfig(M=4, snr_db=0, N_rep=n_rep)
        e = np.concatenate([(simulate_training(ch, cfg, fr, seed=s).Y[0] - clean).ravel() for s in range(300)])
        var[n_rep] = np.mean(np.abs(e) ** 2)
    assert var[1] / var[4] == pytest.approx(4, rel=0.1)


def test_stack_locations():
    cfg = TrainingConfig(M=3)
    fr = make_frames(4, 3, 4, cfg, seed=0)
    a = simulate_training(small_channel(seed=1), cfg, fr, seed=0)
    b = simulate_training(small_channel(seed=2), cfg, fr, seed=1)
    ab = stack_locations([a, b])
    assert ab.n_locations == 2 and len(ab.channels) == 2
    assert ab.stacked().shape == (6, 8)
    other = simulate_training(small_channel(seed=2), cfg, make_frames(4, 3, 4, cfg, seed=5), seed=1)
    with pytest.raises(ValueError):
        stack_locations([a, other])
    with pytest.raises(ValueError):
        stack_locations([])


def test_measurement_tensor_slices():
    ch = small_channel(seed=4)
    cfg = TrainingConfig(M=12)  # M L_r >= N_r N_t so Phi has full column rank
    ds = simulate_training(ch, cfg, make_frames(4, 3, 4, cfg, seed=0), noiseless=True)
    T = measurement_tensor(ds.stacked(), ds.Phi, 3, 4)
    assert T.shape == (3, 4, 4)
    for c in range(4):
        assert rel_err(T[:, :, c], ch.freq[c]) < 1e-10
    assert rel_err(unfold(T, 3).T, ch.vec_freq()) < 1e-10


def test_pilot_mismatch_rejected():
    cfg = TrainingConfig(M=2)
    with pytest.raises(ValueError):
        simulate_training(small_channel(seed=0), cfg, make_frames(4, 3, 5, cfg, seed=0))

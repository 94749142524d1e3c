import dataclasses
import warnings

import numpy as np
import pytest

from mmwave_dl.arrays import coupling_derivative, ideal_impairments, steering_vector
from mmwave_dl.crlb import (
    BLOCKS,
    CRLBModel,
    ParamVector,
    channel_jacobian,
    closed_form_block,
    fim,
    fim_unwhitened,
    mean_derivative,
    total_crlb,
    whitened_mean,
)
from mmwave_dl.measurement import TrainingConfig, make_frames, simulate_training

from conftest import rel_err, small_channel

PATH_FAMILIES = ("theta", "phi")
IMPAIRMENT_FAMILIES = BLOCKS[3:]


def make_model(seed=0, M=8, geometry="ULA", include=BLOCKS, structure="symmetric", channel=None, snr_db=0.0):
    ch = channel if channel is not None else small_channel(seed=seed, geometry=geometry)
    cfg = TrainingConfig(M=M, N_Q=6, snr_db=snr_db)
    n_c, n_r, n_t = ch.freq.shape
    ds = simulate_training(ch, cfg, make_frames(n_t, n_r, n_c, cfg, seed=seed), noiseless=True)
    return CRLBModel.from_dataset(ds, include=include, coupling_structure=structure), ds


def _copy_imp(imp):
    return dataclasses.replace(
        imp,
        spacing_errors=imp.spacing_errors.copy(),
        gains=imp.gains.copy(),
        phases=imp.phases.copy(),
        coupling=imp.coupling.copy(),
    )


def rebuild_freq(model, label=None, h=0.0):
    """Channel matrices from the factored model with one real parameter moved by ``h``."""
    ch = model.channel
    aod, aoa = ch.paths.aod.copy(), ch.paths.aoa.copy()
    imp_t, imp_r = _copy_imp(ch.imp_t), _copy_imp(ch.imp_r)
    g = model.g.copy()
    if label is not None:
        kind = label[0]
        if kind == "theta":
            aod[label[1]] += h
        elif kind == "phi":
            aoa[label[1]] += h
        elif kind in ("gR", "gI"):
            _, c, i = label
            g[c, i] += h if kind == "gR" else 1j * h
        elif kind in ("g_t", "g_r", "nu_t", "nu_r"):
            imp = imp_t if kind.endswith("_t") else imp_r
            (imp.gains if kind.startswith("g") else imp.phases)[label[1]] += h
        elif kind in ("eps_t", "eps_r"):
            imp = imp_t if kind == "eps_t" else imp_r
            imp.spacing_errors[label[1] - 1] += h
        else:
            _, part, (i, j) = label
            imp = imp_t if kind == "c_t" else imp_r
            step = h if part == "re" else 1j * h
            imp.coupling = imp.coupling + step * coupling_derivative(imp.n, i, j, model.params.coupling_structure)
    cfg = ch.cfg
    R = imp_r.coupling @ np.diag(imp_r.gains * np.exp(1j * imp_r.phases)) @ steering_vector(cfg.rx, imp_r, aoa)
    T = imp_t.coupling @ np.diag(imp_t.gains * np.exp(1j * imp_t.phases)) @ steering_vector(cfg.tx, imp_t, aod)
    return np.stack([(R * g[c]) @ T.conj().T for c in range(g.shape[0])])


def whitened_mean_of(model, freq):
    vec = lambda M: M.reshape(-1, order="F")  # noqa: E731
    return np.concatenate([model.Phi_w @ vec(H) for H in freq])


def test_factored_model_reproduces_channel():
    model, _ = make_model(seed=3)
    assert rel_err(rebuild_freq(model), model.channel.freq) < 1e-12
    assert rel_err(whitened_mean_of(model, model.channel.freq), whitened_mean(model)) < 1e-12


@pytest.mark.parametrize("structure", ["symmetric", "toeplitz"])
@pytest.mark.parametrize("geometry", ["ULA", "UCA"])
def test_mean_derivative_matches_finite_difference(geometry, structure):
    if geometry == "UCA" and structure == "toeplitz":
        structure = "circulant"
    model, _ = make_model(seed=5, geometry=geometry, structure=structure)
    h = 1e-6
    for lab in model.params.labels:
        fd = (whitened_mean_of(model, rebuild_freq(model, lab, h)) - whitened_mean_of(model, rebuild_freq(model, lab, -h))) / (2 * h)
        an = mean_derivative(model, lab)
        scale = max(np.linalg.norm(fd), 1e-3 * np.linalg.norm(whitened_mean(model)))
        assert np.linalg.norm(an - fd) / scale < 1e-5, lab


def test_channel_jacobian_matches_finite_difference():
    model, _ = make_model(seed=2)
    h = 1e-6
    for c in range(model.n_c):
        J = channel_jacobian(model, c)
        for k, lab in enumerate(model.params.labels):
            d = (rebuild_freq(model, lab, h)[c] - rebuild_freq(model, lab, -h)[c]) / (2 * h)
            fd = d.reshape(-1, order="F")
            assert np.linalg.norm(J[:, k] - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-3), (c, lab)


def test_gain_derivative_is_local_to_its_subcarrier():
    model, _ = make_model(seed=1)
    n_seg = model.Phi_w.shape[0]
    for lab in model.params.labels[model.params.block("g")]:
        d = mean_derivative(model, lab)
        c = lab[1]
        for cc in range(model.n_c):
            seg = d[cc * n_seg:(cc + 1) * n_seg]
            assert (np.linalg.norm(seg) > 0) == (cc == c)
        for cc in range(model.n_c):
            if cc != c:
                assert np.all(channel_jacobian(model, cc)[:, model.params.labels.index(lab)] == 0)


def test_ideal_gain_jacobian_is_kronecker_of_steering_vectors():
    ch = small_channel(seed=4, impaired=False)
    model, _ = make_model(channel=ch)
    aT = steering_vector(ch.cfg.tx, None, ch.paths.aod)
    aR = steering_vector(ch.cfg.rx, None, ch.paths.aoa)
    J = channel_jacobian(model, 2)
    for i in range(ch.paths.n_paths):
        k = model.params.labels.index(("gR", 2, i))
        assert rel_err(J[:, k], np.kron(aT[:, i].conj(), aR[:, i])) < 1e-12
        kI = model.params.labels.index(("gI", 2, i))
        assert rel_err(J[:, kI], 1j * np.kron(aT[:, i].conj(), aR[:, i])) < 1e-12


def test_broadside_angle_derivative_vanishes_for_ideal_ula():
    ch = small_channel(seed=4, impaired=False)
    aoa = ch.paths.aoa.copy()
    aoa[0] = np.pi / 2
    ch = dataclasses.replace(ch, paths=dataclasses.replace(ch.paths, aoa=aoa),
                             imp_r=ideal_impairments(ch.imp_r.n), imp_t=ideal_impairments(ch.imp_t.n))
    model, _ = make_model(channel=ch)
    assert np.linalg.norm(mean_derivative(model, ("phi", 0))) < 1e-12
    assert np.linalg.norm(mean_derivative(model, ("phi", 1))) > 1e-6


def test_unknown_label_rejected():
    model, _ = make_model(seed=0, include=("theta", "phi", "g"))
    with pytest.raises(ValueError):
        mean_derivative(model, ("g_t", 0))
    with pytest.raises(ValueError):
        ParamVector(2, 3, 4, 4, include=("theta", "bogus"))


def _families_with_closed_form():
    pairs = [(a, b) for a in PATH_FAMILIES for b in PATH_FAMILIES]
    pairs.append(("g", "g"))
    pairs += [(a, b) for a in IMPAIRMENT_FAMILIES for b in IMPAIRMENT_FAMILIES]
    return pairs


@pytest.mark.parametrize("geometry", ["ULA", "UCA"])
def test_closed_form_blocks_match_generic_fim(geometry):
    model, _ = make_model(seed=7, geometry=geometry)
    info = fim(model)
    pv = model.params
    for bi, bj in _families_with_closed_form():
        generic = info.matrix[pv.block(bi), pv.block(bj)]
        cf = closed_form_block(model, bi, bj)
        assert rel_err(cf, generic) < 1e-9, (bi, bj)
    with pytest.raises(ValueError):
        closed_form_block(model, "theta", "g_t")


def test_gain_real_imaginary_blocks_are_antisymmetric():
    model, _ = make_model(seed=8)
    info = fim(model)
    pv = model.params
    labels = pv.labels[pv.block("g")]
    I = info.matrix[pv.block("g"), pv.block("g")]
    P = model.R.shape[1]
    for c in range(model.n_c):
        r = [labels.index(("gR", c, i)) for i in range(P)]
        m = [labels.index(("gI", c, i)) for i in range(P)]
        RR, II = I[np.ix_(r, r)], I[np.ix_(m, m)]
        RI = I[np.ix_(r, m)]
        assert rel_err(RR, II) < 1e-10
        # Re{j x} pattern: the R/I cross block is antisymmetric
        assert np.allclose(RI, -RI.T, atol=1e-10 * np.abs(I).max())


def test_fim_symmetric_psd_and_whitening_consistent():
    model, _ = make_model(seed=9)
    info = fim(model)
    I = info.matrix
    assert np.allclose(I, I.T)
    assert info.eigenvalues[0] > -1e-9 * info.eigenvalues[-1]
    assert rel_err(fim_unwhitened(model), I) < 1e-8


def test_doubling_noise_halves_fim_and_doubles_crlb():
    model, _ = make_model(seed=10)
    twice = dataclasses.replace(model, sigma2=2 * model.sigma2)
    assert rel_err(fim(twice).matrix, fim(model).matrix / 2) < 1e-12
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a, b = total_crlb(model).value, total_crlb(twice).value
    assert abs(b / a - 2) < 1e-9


def test_fim_rejects_nonpositive_noise():
    model, _ = make_model(seed=0)
    with pytest.raises(ValueError):
        fim(dataclasses.replace(model, sigma2=0.0))


def test_known_impairments_do_not_raise_the_bound():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for seed in range(3):
            full, _ = make_model(seed=seed)
            values = [total_crlb(full).value]
            for drop in (("c_t", "c_r"), ("c_t", "c_r", "eps_t", "eps_r"), IMPAIRMENT_FAMILIES):
                inc = tuple(b for b in BLOCKS if b not in drop)
                m, _ = make_model(seed=seed, include=inc)
                values.append(total_crlb(m).value)
            assert all(b <= a * (1 + 1e-7) for a, b in zip(values, values[1:])), values


def test_crlb_below_unstructured_least_squares():
    # the unbiased whitened LS estimate of vec(H[c]) is efficient for the unstructured
    # model, so the structured bound can only be lower
    model, ds = make_model(seed=11, M=8, snr_db=10.0)
    Pw = model.Phi_w
    assert np.linalg.matrix_rank(Pw) == Pw.shape[1]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        bound = total_crlb(model).value
    exact = model.n_c * model.sigma2 * np.real(np.trace(np.linalg.inv(Pw.conj().T @ Pw)))
    assert bound <= exact

    rng = np.random.default_rng(0)
    mu = whitened_mean(model).reshape(model.n_c, -1)
    H = np.stack([model.channel.freq[c].reshape(-1, order="F") for c in range(model.n_c)])
    Pp = np.linalg.pinv(Pw)
    errs = []
    for _ in range(2000):
        n = np.sqrt(model.sigma2 / 2) * (rng.standard_normal(mu.shape) + 1j * rng.standard_normal(mu.shape))
        est = (mu + n) @ Pp.T
        errs.append(np.sum(np.abs(est - H) ** 2))
    mse = np.mean(errs)
    assert abs(mse / exact - 1) < 0.05
    assert bound <= mse


def test_crlb_result_summary():
    model, _ = make_model(seed=12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = total_crlb(model)
    d = res.to_dict()
    assert d["crlb"] >= 0 and d["n_params"] == model.params.size
    assert set(d["blocks"]) == set(model.params.include)
    assert res.per_subcarrier.shape == (model.n_c,)

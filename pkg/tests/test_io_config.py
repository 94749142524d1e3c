import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmwave_dl.config import ConfigError, ExperimentConfig, apply_overrides, from_dict, load_experiment_config, to_dict
from mmwave_dl.dictionary import Dictionary
from mmwave_dl.io import (
    DataError,
    channel_from_dict,
    channel_to_dict,
    load_dataset,
    load_dictionary,
    read_complex_csv,
    save_dataset,
    save_dictionary,
    write_complex_csv,
)
from mmwave_dl.measurement import TrainingConfig, make_frames, simulate_training

from conftest import crandn, small_channel


@settings(max_examples=25, deadline=None)
@given(rows=st.integers(1, 6), cols=st.integers(1, 6), seed=st.integers(0, 2**31 - 1))
def test_complex_csv_roundtrip_is_exact(rows, cols, seed, tmp_path_factory):
    M = crandn(np.random.default_rng(seed), rows, cols)
    p = tmp_path_factory.mktemp("csv") / "m.csv"
    write_complex_csv(p, M)
    assert np.array_equal(read_complex_csv(p), M)
    assert p.read_text().splitlines()[0].startswith("re_0,im_0")


def test_malformed_csv(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DataError):
        read_complex_csv(p)
    p.write_text("re_0,im_0\n1,2,3\n")
    with pytest.raises(DataError):
        read_complex_csv(p)
    with pytest.raises(DataError):
        read_complex_csv(tmp_path / "missing.csv")


def test_channel_json_roundtrip():
    ch = small_channel(seed=6)
    back = channel_from_dict(channel_to_dict(ch))
    assert np.allclose(back.freq, ch.freq, rtol=0, atol=1e-14)


def test_dataset_roundtrip(tmp_path):
    ch = small_channel(seed=2)
    tc = TrainingConfig(M=5, N_Q=6, N_rep=3, snr_db=5)
    ds = simulate_training(ch, tc, make_frames(4, 3, 4, tc, seed=1), seed=9)
    save_dataset(tmp_path / "d", ds, {"note": "x"})
    back, man = load_dataset(tmp_path / "d")
    assert man["note"] == "x"
    assert np.array_equal(back.Phi, ds.Phi) and np.array_equal(back.Y[0], ds.Y[0])
    assert back.cfg == ds.cfg
    (tmp_path / "d" / "manifest.json").write_text('{"kind": "dictionary"}')
    with pytest.raises(DataError):
        load_dataset(tmp_path / "d")


@pytest.mark.parametrize("kind", ["combined", "separable"])
def test_dictionary_roundtrip(tmp_path, kind, rng):
    if kind == "combined":
        D = Dictionary.combined(crandn(rng, 6, 9), method="codl")
    else:
        D = Dictionary.separable(crandn(rng, 3, 4), crandn(rng, 2, 5), method="sedl")
    save_dictionary(tmp_path, D, objective=[3.0, 2.0])
    back = load_dictionary(tmp_path)
    assert back.kind == D.kind and np.array_equal(back.matrix, D.matrix)
    assert back.provenance["method"] == D.provenance["method"]


def test_config_defaults_roundtrip():
    cfg = ExperimentConfig()
    assert from_dict(ExperimentConfig, to_dict(cfg)) == cfg


def test_config_type_errors_name_the_field():
    with pytest.raises(ConfigError, match="system.N_t"):
        load_experiment_config(None, ["system.N_t=2.5"])
    with pytest.raises(ConfigError, match="impairments.enabled"):
        load_experiment_config(None, ["impairments.enabled=1"])
    with pytest.raises(ConfigError, match="not a section"):
        apply_overrides({"a": 1}, ["a.b=2"])
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])


def test_override_parsing():
    cfg = load_experiment_config(None, ["grid.M=[5,7]", "learning.coder=admm", "training.snr_db=-5"])
    assert cfg.grid.M == [5, 7] and cfg.learning.coder == "admm" and cfg.training.snr_db == -5.0


def test_learn_section_maps_updater_per_method():
    from mmwave_dl.config import LearnSection

    s = LearnSection(updater="ksvd")
    assert s.learn_config(sedl=True).updater == "khosvd"
    assert s.learn_config(sedl=False).updater == "ksvd"

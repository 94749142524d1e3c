import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from mmwave_dl.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from mmwave_dl.io import load_dataset, load_dictionary

SMALL = {
    "system": {"N_t": 4, "N_r": 2, "N_c": 4, "N_tap": 4, "N_p": 2, "K_t": 8, "K_r": 4, "N_s": 1},
    "training": {"M": 10, "N_Q": 6},
    "learn_data": {"N_sa": 4},
    "learning": {"max_iter": 3, "sparsity": 2, "rel_tol": 0.0},
    "grid": {"M": [6], "trials": 2, "cases": ["swomp+iarm", "swomp+sedl"]},
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "cfg.json").write_text(json.dumps(SMALL))
    rc = main(["generate", "--config", str(d / "cfg.json"), "--out", str(d / "data"), "--seed", "3",
               "--override", "training.N_rep=10"])
    assert rc == EXIT_OK
    return d


def run(workdir, *argv):
    return main([argv[0], "--config", str(workdir / "cfg.json"), *argv[1:]])


def test_generate_writes_locations_and_overrides(workdir, capsys):
    ds, man = load_dataset(workdir / "data")
    assert ds.n_locations == 4 and len(ds.channels) == 4
    assert man["training"]["N_rep"] == 10
    assert man["config"]["training"]["N_rep"] == 10
    assert man["effective_snr_db"] == pytest.approx(10.0)


def test_generate_is_deterministic(workdir, tmp_path):
    assert run(workdir, "generate", "--out", str(tmp_path / "again"), "--seed", "3",
               "--override", "training.N_rep=10") == EXIT_OK
    a, _ = load_dataset(workdir / "data")
    b, _ = load_dataset(tmp_path / "again")
    assert all(np.array_equal(x, y) for x, y in zip(a.Y, b.Y))


@pytest.mark.parametrize("method", ["codl", "sedl"])
def test_learn_and_resume(workdir, method):
    out = workdir / f"dict_{method}"
    assert run(workdir, "learn", "--dataset", str(workdir / "data"), "--method", method, "--out", str(out)) == EXIT_OK
    files = sorted(p.name for p in out.glob("*.csv"))
    assert files == (["D_R.csv", "D_T.csv", "objective.csv"] if method == "sedl" else ["Psi.csv", "objective.csv"])
    with open(out / "objective.csv") as fh:
        obj = [float(r["objective"]) for r in csv.DictReader(fh)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(obj, obj[1:]))
    assert len(obj) == 4
    assert run(workdir, "learn", "--dataset", str(workdir / "data"), "--method", method, "--out", str(out),
               "--resume", "--override", "learning.max_iter=5") == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    assert man["iterations"] == 5
    D = load_dictionary(out)
    assert D.max_norm_error() < 1e-10


@pytest.mark.parametrize("solver", ["swomp", "admm"])
def test_estimate_with_iarm(workdir, solver, capsys):
    out = workdir / f"est_{solver}"
    assert run(workdir, "estimate", "--dataset", str(workdir / "data"), "--dict", "iarm", "--solver", solver,
               "--out", str(out)) == EXIT_OK
    summary = json.loads((out / "estimates.json").read_text())
    assert len(summary["locations"]) == 4 and np.isfinite(summary["mean_nmse_db"])
    assert len(list(out.glob("Hhat_*.csv"))) == 4


def test_estimate_with_learned_dictionary(workdir):
    learned = workdir / "dict_for_estimate"
    assert run(workdir, "learn", "--dataset", str(workdir / "data"), "--method", "sedl", "--out", str(learned)) == 0
    assert run(workdir, "estimate", "--dataset", str(workdir / "data"), "--dict", str(learned),
               "--out", str(workdir / "est_learned")) == EXIT_OK


def test_crlb_prints_bound_and_condition(workdir, capsys):
    capsys.readouterr()
    assert run(workdir, "crlb", "--dataset", str(workdir / "data"), "--out", str(workdir / "crlb")) == EXIT_OK
    printed = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert printed["crlb"] > 0 and "fim_condition_number" in printed
    assert run(workdir, "crlb", "--dataset", str(workdir / "data"), "--out", str(workdir / "crlb2"),
               "--exclude", "c_t", "--exclude", "c_r") == EXIT_OK
    reduced = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert reduced["crlb"] <= printed["crlb"] * (1 + 1e-7)
    assert run(workdir, "crlb", "--dataset", str(workdir / "data"), "--out", str(workdir / "crlb3"),
               "--exclude", "bogus") == EXIT_USAGE


def test_experiment_writes_table(workdir):
    out = workdir / "exp"
    assert run(workdir, "experiment", "--out", str(out), "--threads", "1") == EXIT_OK
    with open(out / "results.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 1 * 1 * 2
    assert "summary" in json.loads((out / "summary.json").read_text())


def test_complexity(workdir, capsys):
    assert run(workdir, "complexity", "--out", str(workdir / "cx")) == EXIT_OK
    rep = json.loads((workdir / "cx" / "complexity.json").read_text())
    assert rep["entries"]


def test_exit_codes(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"system": {"N_t": 4,}}')
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_DATA
    assert "line 1" in capsys.readouterr().err
    typo = tmp_path / "typo.json"
    typo.write_text('{"system": {"N_tt": 4}}')
    assert main(["generate", "--config", str(typo), "--out", str(tmp_path / "x")]) == EXIT_DATA
    assert "system.N_tt" in capsys.readouterr().err
    assert main(["estimate", "--dataset", str(tmp_path / "missing"), "--out", str(tmp_path / "y")]) == EXIT_DATA
    with pytest.raises(SystemExit) as e:
        main(["generate"])
    assert e.value.code == EXIT_USAGE


def test_help_lists_common_flags():
    out = subprocess.run([sys.executable, "-m", "mmwave_dl.cli", "learn", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for flag in ("--config", "--seed", "--threads", "--override", "--out", "--resume", "--method"):
        assert flag in out

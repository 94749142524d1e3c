"""Metrics and experiment orchestration for learned vs ideal dictionaries."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .arrays import sample_impairments, ideal_impairments
from .channel import generate_channel, iarm_dictionaries
from .config import ExperimentConfig, to_dict
from .crlb import CRLBModel, total_crlb
from .dictionary import Dictionary
from .learning import codl, sedl
from .measurement import TrainingConfig, make_frames, simulate_training, stack_locations
from .sparse import estimate_channel, l21_norm

log = logging.getLogger(__name__)

__all__ = [
    "nmse",
    "spectral_efficiency",
    "l21_cdf",
    "mean_ci",
    "ResultTable",
    "learn_dictionaries",
    "run_experiment",
]


def nmse(H_true, H_est) -> float:
    """``(1/N_c) sum_c ||H_est[c] - H[c]||_F^2 / ||H[c]||_F^2``."""
    H_true, H_est = np.asarray(H_true), np.asarray(H_est)
    if H_true.shape != H_est.shape:
        raise ValueError(f"shape mismatch {H_true.shape} vs {H_est.shape}")
    if H_true.ndim == 2:
        H_true, H_est = H_true[None], H_est[None]
    den = np.sum(np.abs(H_true) ** 2, axis=(1, 2))
    if np.any(den == 0):
        raise ValueError("true channel has a zero-norm subcarrier")
    return float(np.mean(np.sum(np.abs(H_est - H_true) ** 2, axis=(1, 2)) / den))


def spectral_efficiency(H_true, H_est, N_s: int, snr: float) -> float:
    """Rate with ``N_s`` streams steered along the estimate's dominant singular vectors.

    ``(1/N_c) sum_c sum_n log2(1 + snr / N_s * lambda_n^2)`` where ``lambda_n``
    are the singular values of ``U_1^* H[c] V_1``.
    """
    H_true, H_est = np.asarray(H_true), np.asarray(H_est)
    if H_true.ndim == 2:
        H_true, H_est = H_true[None], H_est[None]
    if N_s > min(H_true.shape[1:]):
        raise ValueError("N_s exceeds the channel rank dimension")
    total = 0.0
    for H, Hh in zip(H_true, H_est):
        U, _, Vh = np.linalg.svd(Hh)
        eff = U[:, :N_s].conj().T @ H @ Vh[:N_s].conj().T
        lam = np.linalg.svd(eff, compute_uv=False)
        total += float(np.sum(np.log2(1 + snr / N_s * lam**2)))
    return total / H_true.shape[0]


def l21_cdf(values):
    """Empirical CDF ``(sorted values, F)`` with ``F_i = (i + 1) / n``."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size < 2:
        raise ValueError("need at least two samples for an empirical CDF")
    return v, np.arange(1, v.size + 1) / v.size


def mean_ci(values, z: float = 1.96):
    v = np.asarray(values, dtype=float)
    half = z * v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else float("nan")
    return float(v.mean()), float(half)


COLUMNS = ["case", "solver", "dictionary", "realization", "M", "snr_db", "trial",
           "nmse", "nmse_db", "se", "se_perfect", "l21", "l21_normalized", "support", "crlb", "wall_time"]


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, **row):
        self.rows.append({k: row.get(k) for k in COLUMNS})

    def __len__(self):
        return len(self.rows)

    def select(self, **where):
        return [r for r in self.rows if all(r[k] == v for k, v in where.items())]

    def values(self, column: str, **where) -> np.ndarray:
        return np.array([r[column] for r in self.select(**where)], dtype=float)

    def summary(self) -> list:
        keys = sorted({(r["case"], r["M"], r["snr_db"]) for r in self.rows}, key=str)
        out = []
        for case, M, snr in keys:
            sel = dict(case=case, M=M, snr_db=snr)
            nm, nm_ci = mean_ci(self.values("nmse", **sel))
            se, se_ci = mean_ci(self.values("se", **sel))
            l21, l21_ci = mean_ci(self.values("l21_normalized", **sel))
            out.append({
                "case": case, "M": M, "snr_db": snr, "n": len(self.select(**sel)),
                "nmse_mean": nm, "nmse_ci95": nm_ci, "nmse_db": float(10 * np.log10(nm)),
                "se_mean": se, "se_ci95": se_ci,
                "se_perfect_mean": float(self.values("se_perfect", **sel).mean()),
                "l21_normalized_mean": l21, "l21_normalized_ci95": l21_ci,
            })
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=COLUMNS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: ("" if r[k] is None else r[k]) for k in COLUMNS})

    @classmethod
    def from_csv(cls, path) -> "ResultTable":
        t = cls()
        with open(path) as fh:
            for r in csv.DictReader(fh):
                row = {}
                for k in COLUMNS:
                    v = r.get(k, "")
                    if k in ("case", "solver", "dictionary"):
                        row[k] = v
                    elif k in ("realization", "M", "trial", "support"):
                        row[k] = int(v) if v != "" else None
                    else:
                        row[k] = float(v) if v != "" else None
                t.rows.append(row)
        return t

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"meta": self.meta, "summary": self.summary()}, fh, indent=2)


def _impairments(cfg: ExperimentConfig, ccfg, seq):
    s_r, s_t = seq.spawn(2)
    if not cfg.impairments.enabled:
        return ideal_impairments(ccfg.rx.n_antennas, _structure(ccfg.rx)), ideal_impairments(ccfg.tx.n_antennas, _structure(ccfg.tx))
    prof = cfg.impairments.profile()
    return (
        sample_impairments(ccfg.rx, int(s_r.generate_state(1)[0]), prof),
        sample_impairments(ccfg.tx, int(s_t.generate_state(1)[0]), prof),
    )


def _structure(spec):
    return "circulant" if spec.geometry == "UCA" else "toeplitz"


def _seed(seq) -> int:
    return int(seq.generate_state(1)[0])


def learn_dictionaries(cfg: ExperimentConfig, imp_r, imp_t, seq, which=("codl", "sedl")) -> dict:
    """Collect the setup-time training set and learn the requested dictionaries."""
    sysc = cfg.system
    ccfg = sysc.channel_config()
    D_R, D_T, Psi = iarm_dictionaries(ccfg, sysc.K_r, sysc.K_t)
    out = {"iarm": Dictionary.separable(D_R, D_T, method="iarm")}
    which = [w for w in which if w in ("codl", "sedl")]
    if not which:
        return out
    ld = cfg.learn_data
    tl = TrainingConfig(M=ld.M, N_rep=ld.N_rep, L_t=cfg.training.L_t, L_r=cfg.training.L_r,
                        N_Q=cfg.training.N_Q, snr_db=ld.snr_db, P_tr=cfg.training.P_tr)
    s_frames, s_chan, s_noise = seq.spawn(3)
    frames = make_frames(sysc.N_t, sysc.N_r, sysc.N_c, tl, seed=_seed(s_frames))
    chan_seeds = s_chan.spawn(ld.N_sa)
    noise_seeds = s_noise.spawn(ld.N_sa)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        data = stack_locations(
            simulate_training(generate_channel(ccfg, imp_r, imp_t, seed=_seed(cs)), tl, frames, seed=_seed(ns))
            for cs, ns in zip(chan_seeds, noise_seeds)
        )
        if "codl" in which:
            lc = cfg.learning.learn_config(cfg.seed)
            D, st = codl(data, lc, sysc.K_r * sysc.K_t, iarm=Psi)
            D.provenance["objective"] = st.objective
            out["codl"] = D
        if "sedl" in which:
            lc = cfg.learning.learn_config(cfg.seed, sedl=True)
            D, st = sedl(data, lc, sysc.K_r, sysc.K_t, init=(D_R, D_T) if lc.init == "iarm" else None)
            D.provenance["objective"] = st.objective
            out["sedl"] = D
    return out


def _trial(args):
    cfg, dicts, imp_r, imp_t, r, M, snr, t, seed = args
    sysc = cfg.system
    ccfg = sysc.channel_config()
    s_ch, s_fr, s_no = seed.spawn(3)
    ch = generate_channel(ccfg, imp_r, imp_t, seed=_seed(s_ch))
    tc = dataclasses.replace(cfg.training, M=M, snr_db=snr)
    frames = make_frames(sysc.N_t, sysc.N_r, sysc.N_c, tc, seed=_seed(s_fr))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ds = simulate_training(ch, tc, frames, seed=_seed(s_no))
    snr_lin = 10 ** (snr / 10)
    se_perf = spectral_efficiency(ch.freq, ch.freq, sysc.N_s, snr_lin)
    h_norm = float(np.linalg.norm(ch.freq))
    crlb = None
    if cfg.compute_crlb:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            crlb = total_crlb(CRLBModel.from_dataset(ds, ch)).value / float(np.sum(np.abs(ch.freq) ** 2))
    rows = []
    for case in cfg.grid.cases:
        solver, _, dname = case.partition("+")
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                kw = {}
                if solver == "admm":
                    m = ds.Phi.shape[0]
                    kw["w1"] = cfg.admm_w1_scale * ds.sigma2_eff * np.sqrt(m)
                est = estimate_channel(ds, dicts[dname], solver, **kw)
            err = nmse(ch.freq, est.H)
            codes = est.codes.coefficients
            l21 = l21_norm(codes)
            rows.append(dict(case=case, solver=solver, dictionary=dname, realization=r, M=M, snr_db=snr, trial=t,
                             nmse=err, nmse_db=float(10 * np.log10(err)),
                             se=spectral_efficiency(ch.freq, est.H, sysc.N_s, snr_lin), se_perfect=se_perf,
                             l21=l21, l21_normalized=l21 / h_norm, support=int(est.codes.support.size),
                             crlb=crlb, wall_time=time.perf_counter() - t0))
        except Exception as exc:  # recorded, the run continues
            log.warning("case %s failed at M=%s snr=%s trial=%s: %s", case, M, snr, t, exc)
            rows.append(dict(case=case, solver=solver, dictionary=dname, realization=r, M=M, snr_db=snr, trial=t,
                             nmse=float("nan"), nmse_db=float("nan"), se=float("nan"), se_perfect=se_perf,
                             l21=float("nan"), l21_normalized=float("nan"), support=0, crlb=crlb,
                             wall_time=time.perf_counter() - t0))
    return rows


def run_experiment(cfg: ExperimentConfig, progress=None) -> ResultTable:
    """Learn dictionaries per impairment realization and sweep the (M, SNR, trial) grid.

    Per-trial random streams are spawned from ``cfg.seed`` so results do not
    depend on ``cfg.workers``.
    """
    cfg.validate()
    ccfg = cfg.system.channel_config()
    table = ResultTable(meta={"config": to_dict(cfg)})
    root = np.random.SeedSequence(cfg.seed)
    needed = {c.partition("+")[2] for c in cfg.grid.cases}
    t_start = time.perf_counter()
    real_seqs = root.spawn(cfg.grid.realizations)
    for r, rseq in enumerate(real_seqs):
        s_imp, s_learn, s_trials = rseq.spawn(3)
        imp_r, imp_t = _impairments(cfg, ccfg, s_imp)
        dicts = learn_dictionaries(cfg, imp_r, imp_t, s_learn, tuple(sorted(needed)))
        table.meta.setdefault("objective_traces", []).append(
            {k: d.provenance.get("objective") for k, d in dicts.items() if k != "iarm"}
        )
        grid = [(M, snr, t) for M in cfg.grid.M for snr in cfg.grid.snr_db for t in range(cfg.grid.trials)]
        seeds = s_trials.spawn(len(grid))
        tasks = [(cfg, dicts, imp_r, imp_t, r, M, snr, t, sq) for (M, snr, t), sq in zip(grid, seeds)]
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(_trial, tasks))
        else:
            results = [_trial(task) for task in tasks]
        for rows in results:
            for row in rows:
                table.add(**row)
        if progress is not None:
            progress(r + 1, cfg.grid.realizations)
    table.meta["wall_time"] = time.perf_counter() - t_start
    return table

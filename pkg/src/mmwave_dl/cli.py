"""Command-line front end: ``mmwave-dl {generate,learn,estimate,crlb,experiment,complexity}``.

Exit codes: 0 success (possibly with warnings), 1 usage error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("mmwave_dl")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(p):
    p.add_argument("--config", type=Path, help="JSON experiment config (defaults are used for missing fields)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="dot-path override, e.g. training.N_rep=10 (repeatable)")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--threads", type=int, default=None, help="cap on worker processes / BLAS threads")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mmwave-dl", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="simulate channels and training measurements for N_sa locations")
    _common(p)
    p.add_argument("--locations", type=int, help="number of locations (default learn_data.N_sa)")

    p = sub.add_parser("learn", help="learn a dictionary from a generated dataset")
    _common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--method", choices=["codl", "sedl"], default="codl")
    p.add_argument("--resume", action="store_true", help="continue from the state saved in --out")

    p = sub.add_parser("estimate", help="estimate channels of every location in a dataset")
    _common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--dict", dest="dictionary", default="iarm",
                   help="'iarm' or a directory written by 'learn'")
    p.add_argument("--solver", choices=["omp", "swomp", "admm"], default="swomp")

    p = sub.add_parser("crlb", help="total CRLB and FIM diagnostics for the first location of a dataset")
    _common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--location", type=int, default=0)
    p.add_argument("--exclude", action="append", default=[],
                   help="parameter block to drop from the parameter vector (repeatable)")

    p = sub.add_parser("experiment", help="run the learned-vs-ideal dictionary sweep")
    _common(p)

    p = sub.add_parser("complexity", help="operation-count estimates per learning stage")
    _common(p)
    p.add_argument("--sparsity", type=int, default=6)
    return ap


def _load_cfg(args):
    from .config import load_experiment_config

    over = list(args.override)
    if args.seed is not None:
        over.append(f"seed={args.seed}")
    if args.threads is not None:
        over.append(f"workers={args.threads}")
    return load_experiment_config(args.config, over)


def cmd_generate(args) -> int:
    from .experiment import _impairments, _seed
    from .channel import generate_channel
    from .config import to_dict
    from .io import save_dataset, save_json
    from .measurement import make_frames, simulate_training, stack_locations

    cfg = _load_cfg(args)
    sysc = cfg.system
    ccfg = sysc.channel_config()
    n = args.locations or cfg.learn_data.N_sa
    root = np.random.SeedSequence(cfg.seed)
    s_imp, s_fr, s_ch, s_no = root.spawn(4)
    imp_r, imp_t = _impairments(cfg, ccfg, s_imp)
    tc = cfg.training
    frames = make_frames(sysc.N_t, sysc.N_r, sysc.N_c, tc, seed=_seed(s_fr))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        ds = stack_locations(
            simulate_training(generate_channel(ccfg, imp_r, imp_t, seed=_seed(a)), tc, frames, seed=_seed(b))
            for a, b in zip(s_ch.spawn(n), s_no.spawn(n))
        )
    save_dataset(args.out, ds, {"config": to_dict(cfg), "warnings": sorted({str(w.message) for w in caught})})
    save_json(Path(args.out) / "impairments.json", {"rx": imp_r.to_dict(), "tx": imp_t.to_dict()})
    print(json.dumps({"locations": n, "Phi_shape": list(ds.Phi.shape), "N_c": sysc.N_c,
                      "snr_db": tc.snr_db, "N_rep": tc.N_rep,
                      "effective_snr_db": round(float(10 * np.log10(tc.P_tr / tc.sigma2_eff)), 3),
                      "out": str(args.out)}))
    return EXIT_OK


def cmd_learn(args) -> int:
    from .channel import iarm_dictionaries
    from .io import load_dataset, load_dictionary, load_learn_state, save_dictionary, save_learn_state
    from .learning import codl, sedl

    cfg = _load_cfg(args)
    ds, _ = load_dataset(args.dataset)
    sysc = cfg.system
    ccfg = sysc.channel_config()
    D_R, D_T, Psi = iarm_dictionaries(ccfg, sysc.K_r, sysc.K_t)
    lc = cfg.learning.learn_config(cfg.seed, sedl=args.method == "sedl")
    state = None
    if args.resume:
        state = load_learn_state(args.out, load_dictionary(args.out))
        log.info("resuming at iteration %d", state.iteration)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if args.method == "codl":
            D, st = codl(ds, lc, sysc.K_r * sysc.K_t, iarm=Psi, state=state)
        else:
            init = (D_R, D_T) if lc.init == "iarm" else None
            D, st = sedl(ds, lc, sysc.K_r, sysc.K_t, init=init, state=state)
    if not np.all(np.isfinite(st.objective)):
        print("non-finite objective", file=sys.stderr)
        return EXIT_NUMERIC
    save_dictionary(args.out, D, st.objective, {"converged": st.converged, "iterations": st.iteration,
                                                "warning": None if st.converged else "not converged",
                                                "flags": st.flags})
    save_learn_state(args.out, st)
    print(json.dumps({"method": args.method, "iterations": st.iteration, "converged": st.converged,
                      "objective_first": st.objective[0], "objective_last": st.objective[-1],
                      "out": str(args.out)}))
    return EXIT_OK


def cmd_estimate(args) -> int:
    from .channel import iarm_dictionaries
    from .dictionary import Dictionary
    from .experiment import nmse
    from .io import load_dataset, load_dictionary, save_json, write_complex_csv
    from .measurement import MeasurementDataset
    from .sparse import estimate_channel

    cfg = _load_cfg(args)
    ds, man = load_dataset(args.dataset)
    if args.dictionary == "iarm":
        D_R, D_T, _ = iarm_dictionaries(cfg.system.channel_config(), cfg.system.K_r, cfg.system.K_t)
        D = Dictionary.separable(D_R, D_T, method="iarm")
    else:
        D = load_dictionary(args.dictionary)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for u in range(ds.n_locations):
            one = MeasurementDataset(ds.frames, [ds.Y[u]], ds.cfg, ds.channels[u:u + 1])
            est = estimate_channel(one, D, args.solver)
            n_c, n_r, n_t = est.H.shape
            write_complex_csv(out / f"Hhat_{u:04d}.csv", est.H.transpose(2, 1, 0).reshape(n_r * n_t, n_c))
            row = {"location": u, "support": int(est.codes.support.size)}
            if ds.channels:
                row["nmse"] = nmse(ds.channels[u].freq, est.H)
            rows.append(row)
    summary = {"solver": args.solver, "dictionary": args.dictionary, "locations": rows}
    if rows and "nmse" in rows[0]:
        summary["mean_nmse_db"] = float(10 * np.log10(np.mean([r["nmse"] for r in rows])))
    save_json(out / "estimates.json", summary)
    print(json.dumps({k: v for k, v in summary.items() if k != "locations"}))
    return EXIT_OK


def cmd_crlb(args) -> int:
    from .crlb import BLOCKS, CRLBModel, total_crlb
    from .io import DataError, load_dataset, save_json
    from .measurement import MeasurementDataset

    ds, _ = load_dataset(args.dataset)
    if not ds.channels:
        raise DataError("dataset has no ground-truth channels")
    bad = set(args.exclude) - set(BLOCKS)
    if bad:
        print(f"unknown parameter blocks: {sorted(bad)}", file=sys.stderr)
        return EXIT_USAGE
    u = args.location
    one = MeasurementDataset(ds.frames, [ds.Y[u]], ds.cfg, ds.channels[u:u + 1])
    include = tuple(b for b in BLOCKS if b not in args.exclude)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = total_crlb(CRLBModel.from_dataset(one, include=include))
    if not np.isfinite(res.value):
        return EXIT_NUMERIC
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = res.to_dict()
    payload["channel_energy"] = float(np.sum(np.abs(ds.channels[u].freq) ** 2))
    payload["normalized_crlb"] = res.value / payload["channel_energy"]
    save_json(out / "crlb.json", payload)
    print(json.dumps({"crlb": res.value, "fim_condition_number": res.condition_number, "fim_rank": res.rank}))
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .experiment import run_experiment

    cfg = _load_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = run_experiment(cfg, progress=lambda i, n: log.info("realization %d/%d done", i, n))
    table.to_csv(out / "results.csv")
    table.to_json(out / "summary.json")
    print(json.dumps({"rows": len(table), "results": str(out / "results.csv"),
                      "summary": str(out / "summary.json")}))
    return EXIT_OK


def cmd_complexity(args) -> int:
    from .io import save_json
    from .learning import complexity_report

    cfg = _load_cfg(args)
    s = cfg.system
    rep = complexity_report(s.N_r * s.N_t, s.K_r * s.K_t, args.sparsity, cfg.learn_data.N_sa, s.N_c)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_json(out / "complexity.json", rep)
    for e in rep["entries"]:
        print(f"{e['stage']:<18} {e['method']:<22} {e['expression']:<70} {e['count']:.3e}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "learn": cmd_learn, "estimate": cmd_estimate, "crlb": cmd_crlb,
            "experiment": cmd_experiment, "complexity": cmd_complexity}


def main(argv=None) -> int:
    from .config import ConfigError
    from .io import DataError

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if args.threads:
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

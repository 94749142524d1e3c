"""JSON manifests and CSV complex matrices (header ``re_0,im_0,...``)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .arrays import ArraySpec, ImpairmentRealization
from .channel import ChannelConfig, ChannelRealization, PathSet, generate_channel
from .dictionary import Dictionary
from .learning import LearnState
from .measurement import MeasurementDataset, TrainingConfig, TrainingFrames


class DataError(ValueError):
    """Malformed or inconsistent files on disk."""


def write_complex_csv(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    out = np.empty((M.shape[0], 2 * M.shape[1]))
    out[:, 0::2], out[:, 1::2] = M.real, M.imag
    header = ",".join(f"re_{j},im_{j}" for j in range(M.shape[1]))
    np.savetxt(path, out, delimiter=",", header=header, comments="", fmt="%.17g")


def read_complex_csv(path) -> np.ndarray:
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        if len(header) % 2 or not all(h.startswith(("re_", "im_")) for h in header):
            raise DataError(f"{path}: header must be re_0,im_0,...")
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if raw.shape[1] != len(header):
        raise DataError(f"{path}: {raw.shape[1]} values per row but {len(header)} header columns")
    return raw[:, 0::2] + 1j * raw[:, 1::2]


def save_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


# ---------------------------------------------------------------- channels


def _spec_dict(s: ArraySpec) -> dict:
    return {"geometry": s.geometry, "n_antennas": s.n_antennas, "nominal_spacing": s.nominal_spacing,
            "sector": list(s.sector)}


def channel_config_to_dict(cfg: ChannelConfig) -> dict:
    return {"tx": _spec_dict(cfg.tx), "rx": _spec_dict(cfg.rx), "n_clusters": cfg.n_clusters,
            "rays_per_cluster": cfg.rays_per_cluster, "ray_spread": cfg.ray_spread, "n_taps": cfg.n_taps,
            "n_subcarriers": cfg.n_subcarriers, "Ts": cfg.Ts, "rolloff": cfg.rolloff}


def channel_config_from_dict(d: dict) -> ChannelConfig:
    d = dict(d)
    tx = _spec_from(d.pop("tx"))
    rx = _spec_from(d.pop("rx"))
    return ChannelConfig(tx=tx, rx=rx, **d)


def _spec_from(d: dict) -> ArraySpec:
    d = dict(d)
    d["sector"] = tuple(d["sector"])
    return ArraySpec(**d)


def channel_to_dict(ch: ChannelRealization) -> dict:
    p = ch.paths
    return {
        "config": channel_config_to_dict(ch.cfg),
        "paths": {"aoa": p.aoa.tolist(), "aod": p.aod.tolist(),
                  "gains": [[z.real, z.imag] for z in p.gains], "delays": p.delays.tolist(),
                  "n_clusters": p.n_clusters, "rays_per_cluster": p.rays_per_cluster},
        "imp_r": ch.imp_r.to_dict(),
        "imp_t": ch.imp_t.to_dict(),
    }


def channel_from_dict(d: dict) -> ChannelRealization:
    """Rebuild a channel (taps and subcarrier matrices recomputed from the stored parameters)."""
    cfg = channel_config_from_dict(d["config"])
    p = d["paths"]
    g = np.array(p["gains"], dtype=float)
    paths = PathSet(np.array(p["aoa"]), np.array(p["aod"]), g[:, 0] + 1j * g[:, 1], np.array(p["delays"]),
                    p["n_clusters"], p["rays_per_cluster"])
    return generate_channel(cfg, ImpairmentRealization.from_dict(d["imp_r"]),
                            ImpairmentRealization.from_dict(d["imp_t"]), paths=paths)


# ---------------------------------------------------------------- datasets


def save_dataset(directory, ds: MeasurementDataset, extra: dict | None = None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    fr = ds.frames
    M, N_t, L_t = fr.F.shape
    N_r, L_r = fr.W.shape[1:]
    write_complex_csv(d / "F.csv", fr.F.reshape(M * N_t, L_t))
    write_complex_csv(d / "W.csv", fr.W.reshape(M * N_r, L_r))
    write_complex_csv(d / "q.csv", fr.q)
    write_complex_csv(d / "pilots.csv", fr.pilots)
    write_complex_csv(d / "Phi.csv", ds.Phi)
    files = []
    for u, Y in enumerate(ds.Y):
        name = f"Y_{u:04d}.csv"
        write_complex_csv(d / name, Y)
        files.append(name)
    for u, ch in enumerate(ds.channels):
        save_json(d / f"channel_{u:04d}.json", channel_to_dict(ch))
        write_complex_csv(d / f"H_{u:04d}.csv", ch.vec_freq())
    cfg = ds.cfg
    manifest = {
        "kind": "measurement_dataset",
        "training": {k: getattr(cfg, k) for k in ("M", "N_rep", "L_t", "L_r", "N_Q", "snr_db", "P_tr", "seed")},
        "dims": {"M": M, "N_t": N_t, "N_r": N_r, "L_t": L_t, "L_r": L_r, "N_c": ds.n_subcarriers},
        "n_locations": ds.n_locations,
        "sigma2": cfg.sigma2,
        "sigma2_eff": cfg.sigma2_eff,
        "effective_snr_db": float(10 * np.log10(cfg.P_tr / cfg.sigma2_eff)),
        "measurements": files,
        "has_channels": bool(ds.channels),
    }
    if extra:
        manifest.update(extra)
    save_json(d / "manifest.json", manifest)
    return d


def load_dataset(directory) -> tuple[MeasurementDataset, dict]:
    d = Path(directory)
    man = load_json(d / "manifest.json")
    if man.get("kind") != "measurement_dataset":
        raise DataError(f"{d}: manifest is not a measurement dataset")
    dims = man["dims"]
    M, N_t, N_r, L_t, L_r = (dims[k] for k in ("M", "N_t", "N_r", "L_t", "L_r"))
    F = read_complex_csv(d / "F.csv").reshape(M, N_t, L_t)
    W = read_complex_csv(d / "W.csv").reshape(M, N_r, L_r)
    frames = TrainingFrames(F, W, read_complex_csv(d / "q.csv"), read_complex_csv(d / "pilots.csv"))
    Y = [read_complex_csv(d / f) for f in man["measurements"]]
    chans = []
    if man.get("has_channels"):
        chans = [channel_from_dict(load_json(d / f"channel_{u:04d}.json")) for u in range(len(Y))]
    return MeasurementDataset(frames, Y, TrainingConfig(**man["training"]), chans), man


# ---------------------------------------------------------------- dictionaries


def save_dictionary(directory, D: Dictionary, objective=None, extra: dict | None = None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    prov = {k: v for k, v in D.provenance.items() if k != "objective"}
    man = {"kind": "dictionary", "variant": D.kind, "provenance": prov}
    if D.kind == "combined":
        write_complex_csv(d / "Psi.csv", D.Psi)
        man["files"] = ["Psi.csv"]
    else:
        write_complex_csv(d / "D_R.csv", D.D_R)
        write_complex_csv(d / "D_T.csv", D.D_T)
        man["files"] = ["D_R.csv", "D_T.csv"]
    if objective is not None:
        with open(d / "objective.csv", "w") as fh:
            fh.write("iteration,objective\n")
            for i, v in enumerate(objective):
                fh.write(f"{i},{v:.17g}\n")
    if extra:
        man.update(extra)
    save_json(d / "manifest.json", man)
    return d


def load_dictionary(directory) -> Dictionary:
    d = Path(directory)
    man = load_json(d / "manifest.json")
    if man.get("kind") != "dictionary":
        raise DataError(f"{d}: manifest is not a dictionary")
    if man["variant"] == "combined":
        return Dictionary.combined(read_complex_csv(d / "Psi.csv"), **man.get("provenance", {}))
    return Dictionary.separable(read_complex_csv(d / "D_R.csv"), read_complex_csv(d / "D_T.csv"),
                                **man.get("provenance", {}))


def save_learn_state(directory, state: LearnState) -> None:
    d = Path(directory) / "state"
    d.mkdir(parents=True, exist_ok=True)
    H, X = state.H, state.X
    save_json(d / "state.json", {"iteration": state.iteration, "objective": state.objective,
                                 "converged": state.converged, "flags": state.flags,
                                 "H_shape": list(H.shape), "X_shape": list(X.shape)})
    write_complex_csv(d / "H.csv", H.reshape(H.shape[0], -1))
    write_complex_csv(d / "X.csv", X.reshape(X.shape[0], -1))


def load_learn_state(directory, dictionary: Dictionary) -> LearnState:
    d = Path(directory) / "state"
    meta = load_json(d / "state.json")
    H = read_complex_csv(d / "H.csv").reshape(meta["H_shape"])
    X = read_complex_csv(d / "X.csv").reshape(meta["X_shape"])
    st = LearnState(dictionary, H, X, list(meta["objective"]), int(meta["iteration"]), bool(meta["converged"]),
                    list(meta["flags"]))
    return st

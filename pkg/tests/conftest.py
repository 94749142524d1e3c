import numpy as np
import pytest

from mmwave_dl.arrays import ArraySpec, ImpairmentProfile, sample_impairments
from mmwave_dl.channel import ChannelConfig, generate_channel


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def small_channel(seed=0, n_t=4, n_r=3, n_paths=2, n_c=4, n_taps=4, geometry="ULA", impaired=True):
    tx, rx = ArraySpec(geometry, n_t), ArraySpec(geometry, n_r)
    cfg = ChannelConfig(tx=tx, rx=rx, n_clusters=n_paths, n_taps=n_taps, n_subcarriers=n_c)
    structure = "circulant" if geometry == "UCA" else "toeplitz"
    prof = ImpairmentProfile() if impaired else ImpairmentProfile(0.0, 0.0, 0.0, (0.0, 0.0))
    imp_r = sample_impairments(rx, seed + 1, prof)
    imp_t = sample_impairments(tx, seed + 2, prof)
    assert imp_r.structure == structure
    return generate_channel(cfg, imp_r, imp_t, seed=seed + 3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "xfailed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", []))
            if "criterion" in props and getattr(rep, "when", "call") == "call":
                verdict = "PASS" if outcome == "passed" else "FAIL"
                lines.append((props["criterion"], verdict))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    key = lambda t: (int(t[0].split()[0]), t[0])  # noqa: E731
    for name, verdict in sorted(lines, key=key):
        terminalreporter.write_line(f"criterion {name}: {verdict}")

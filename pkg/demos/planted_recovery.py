"""Learn dictionaries from noiseless synthetic data and report how many planted atoms come back.

    python3 demos/planted_recovery.py [n_seeds]
"""
import sys

import numpy as np

from mmwave_dl.learning import LearnConfig, codl, sedl


def unit_columns(rng, n, k):
    D = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return D / np.linalg.norm(D, axis=0)


def matched(D_est, D_true):
    # greedy one-to-one pairing, best |<d, d'>| first
    G = np.abs(D_true.conj().T @ D_est)
    best = np.zeros(G.shape[0])
    for _ in range(min(G.shape)):
        i, j = np.unravel_index(np.argmax(G), G.shape)
        best[i], G[i, :], G[:, j] = G[i, j], -1, -1
    return best


def combined_case(seed, n=16, K=20, S0=3, n_c=8, n_sa=50):
    rng = np.random.default_rng(seed)
    Psi = unit_columns(rng, n, K)
    H = np.zeros((K, n_c * n_sa), dtype=complex)
    for u in range(n_sa):
        H[rng.choice(K, S0, replace=False), u * n_c:(u + 1) * n_c] = (
            rng.standard_normal((S0, n_c)) + 1j * rng.standard_normal((S0, n_c)))
    cfg = LearnConfig(w1=1e-3, w2=1e6, max_iter=100, rel_tol=1e-10, coder="swomp", sparsity=S0,
                      updater="ksvd", seed=seed)
    D, st = codl(None, cfg, K, Y=Psi @ H, Phi=np.eye(n), group=n_c)
    return np.mean(matched(D.Psi, Psi) > 0.95), len(st.objective) - 1


def separable_case(seed, n=8, K=8, S0=3, n_c=8, n_sa=50):
    rng = np.random.default_rng(seed)
    D_R, D_T = unit_columns(rng, n, K), unit_columns(rng, n, K)
    H = np.zeros((K, K, n_c * n_sa), dtype=complex)
    for u in range(n_sa):
        for i in rng.choice(K * K, S0, replace=False):
            H[i % K, i // K, u * n_c:(u + 1) * n_c] = rng.standard_normal(n_c) + 1j * rng.standard_normal(n_c)
    X = np.einsum("rk,klj,tl->rtj", D_R, H, D_T.conj())
    cfg = LearnConfig(w1=1e-3, w2=1e6, max_iter=60, rel_tol=1e-10, coder="swomp", sparsity=S0,
                      atom_swaps=4, restarts=3, seed=seed)
    D, st = sedl(None, cfg, K, K, Yten=X, group=n_c)
    return min(np.mean(matched(D.D_R, D_R) > 0.95), np.mean(matched(D.D_T, D_T) > 0.95)), len(st.objective) - 1


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 3
    for seed in range(n):
        frac, it = combined_case(seed)
        print(f"combined  seed {seed}: {frac:5.0%} recovered after {it} iterations")
    for seed in range(n):
        frac, it = separable_case(seed)
        print(f"separable seed {seed}: {frac:5.0%} recovered (worse factor) after {it} iterations")

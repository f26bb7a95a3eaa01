"""Sampling fractional Brownian motion and checking it is what it claims.

Draws a batch of fBm paths by circulant embedding and compares the empirical
covariance at a few (t, s) pairs with the closed form
0.5 (t^{2H} + s^{2H} - |t - s|^{2H}). Also shows the dyadic coarsening used
by the convergence studies: coarsened paths hit the same node values
bitwise, so refinement comparisons never mix two realizations.
"""

import numpy as np

from roughmor import coarsen_path, sample_fbm_path

H = 0.35
T = 1.0
M = 512
N_PATHS = 4000


def fbm_covariance(t, s, H):
    return 0.5 * (t ** (2 * H) + s ** (2 * H) - abs(t - s) ** (2 * H))


def main():
    print(f"H = {H}, T = {T}, {M} steps, {N_PATHS} sample paths")
    samples = np.empty((N_PATHS, M + 1))
    for k in range(N_PATHS):
        samples[k] = sample_fbm_path(H, 1, T, M, seed=9000 + k).values[:, 0]

    grid = np.arange(M + 1) * (T / M)
    print(f"{'t':>6} {'s':>6} {'empirical':>12} {'closed form':>12}")
    for it, is_ in ((M, M), (M, M // 2), (M // 2, M // 4), (M // 4, M // 8)):
        emp = float(np.mean(samples[:, it] * samples[:, is_]))
        exact = fbm_covariance(grid[it], grid[is_], H)
        print(f"{grid[it]:>6.3f} {grid[is_]:>6.3f} {emp:>12.5f} "
              f"{exact:>12.5f}")

    fine = sample_fbm_path(H, 2, T, 1024, seed=1)
    coarse = coarsen_path(fine, 8)
    same = np.array_equal(coarse.values, fine.values[::8])
    print(f"coarsening by 8 keeps node values bitwise: {same}")


if __name__ == "__main__":
    main()

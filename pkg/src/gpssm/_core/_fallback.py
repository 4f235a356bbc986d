"""Pure numpy rollout kernel, vectorized across rollouts."""
import numpy as np
from scipy import linalg


def se_rollouts(x0, noise, X, L, h, sf2, ell):
    x0 = np.asarray(x0, dtype=float)
    noise = np.asarray(noise, dtype=float)
    R, S, n = noise.shape
    states = np.empty((R, S + 1, n))
    states[:, 0] = x0
    cur = x0.copy()
    inv2l2 = -0.5 / np.asarray(ell) ** 2
    for k in range(S):
        diff = cur[:, None, :] - X[None, :, :]
        sq = np.einsum("rjd,rjd->rj", diff, diff)
        nxt = np.empty_like(cur)
        for i in range(n):
            kq = sf2[i] * np.exp(sq * inv2l2[i])
            mean = kq @ h[i]
            v = linalg.solve_triangular(L[i], kq.T, lower=True, check_finite=False)
            var = np.maximum(sf2[i] - np.einsum("jr,jr->r", v, v), 0.0)
            nxt[:, i] = mean + np.sqrt(var) * noise[:, k, i]
        cur = nxt
        states[:, k + 1] = cur
    return states

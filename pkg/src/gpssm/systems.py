"""Benchmark systems and the training sets generated from them.

``cubic``
    x[k+1] = 0.01 x^3 - 0.2 x^2 + 0.2 x + eta,  eta ~ N(0, 1)
``vanderpol``
    one RK4 step of length T of  x' = y,  y' = eps (1 - x^2) y - x.
    With eps = -0.8 the origin is stable and is surrounded by an unstable
    limit cycle, so starts outside the cycle (e.g. (2.2, 0)) blow up.
"""
from __future__ import annotations

import numpy as np

from .gp import TrainingSet

CUBIC_M = 20
CUBIC_INTERVAL = (-5.0, 5.0)
CUBIC_NOISE = 1.0

VDP_T = 0.1
VDP_EPS = -0.8
VDP_SQUARE = (-3.0, 3.0)
VDP_PER_SIDE = 21
VDP_NOISE = 0.01


def cubic_map(x):
    x = np.asarray(x, dtype=float)
    return 0.01 * x ** 3 - 0.2 * x ** 2 + 0.2 * x


def cubic_step(x, rng: np.random.Generator | None = None):
    """One step of the cubic system; noise-free when ``rng`` is None."""
    fx = cubic_map(x)
    if rng is None:
        return fx
    return fx + rng.standard_normal(np.shape(fx))


def _inputs_1d(m, interval, random_inputs, rng):
    a, b = interval
    if random_inputs:
        return np.sort(rng.uniform(a, b, size=m))
    return np.linspace(a, b, m)


def generate_cubic_dataset(
    m: int = CUBIC_M,
    interval=CUBIC_INTERVAL,
    sigma_n: float = CUBIC_NOISE,
    seed: int = 0,
    random_inputs: bool = False,
) -> TrainingSet:
    """Evenly spaced (or uniform-random) inputs, outputs with N(0, sigma_n^2) noise."""
    rng = np.random.default_rng(seed)
    x = _inputs_1d(m, interval, random_inputs, rng)
    y = cubic_map(x) + sigma_n * rng.standard_normal(m)
    return TrainingSet(x[:, None], y[:, None], [sigma_n])


def vdp_rhs(state, eps: float = VDP_EPS):
    state = np.asarray(state, dtype=float)
    x, y = state[..., 0], state[..., 1]
    return np.stack([y, eps * (1.0 - x * x) * y - x], axis=-1)


def van_der_pol_step(state, T: float = VDP_T, eps: float = VDP_EPS, rng=None, noise: float = VDP_NOISE):
    """Classical RK4 step; adds N(0, noise^2) per coordinate when ``rng`` is given.

    Works on a single state ``(2,)`` or a batch ``(B, 2)``.
    """
    s = np.asarray(state, dtype=float)
    k1 = vdp_rhs(s, eps)
    k2 = vdp_rhs(s + 0.5 * T * k1, eps)
    k3 = vdp_rhs(s + 0.5 * T * k2, eps)
    k4 = vdp_rhs(s + T * k3, eps)
    out = s + (T / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if rng is not None and noise > 0:
        out = out + noise * rng.standard_normal(out.shape)
    return out


def van_der_pol_trajectory(x0, steps: int, T: float = VDP_T, eps: float = VDP_EPS, stop_norm: float = 1e6):
    """Noise-free trajectory ``(steps + 1, 2)``; stops early (truncated) once the norm passes ``stop_norm``."""
    states = [np.asarray(x0, dtype=float)]
    for _ in range(steps):
        nxt = van_der_pol_step(states[-1], T, eps)
        states.append(nxt)
        if not np.all(np.isfinite(nxt)) or np.linalg.norm(nxt) > stop_norm:
            break
    return np.array(states)


def generate_vdp_dataset(
    square=VDP_SQUARE,
    per_side: int = VDP_PER_SIDE,
    T: float = VDP_T,
    eps: float = VDP_EPS,
    sigma_noise: float = VDP_NOISE,
    seed: int = 0,
    random_inputs: bool = False,
) -> TrainingSet:
    """``per_side**2`` inputs on the square and their noisy RK4 successors."""
    rng = np.random.default_rng(seed)
    a, b = square
    count = per_side * per_side
    if random_inputs:
        X = rng.uniform(a, b, size=(count, 2))
    else:
        g = np.linspace(a, b, per_side)
        xx, yy = np.meshgrid(g, g, indexing="ij")
        X = np.column_stack([xx.ravel(), yy.ravel()])
    Y = van_der_pol_step(X, T, eps, rng=rng, noise=sigma_noise)
    return TrainingSet(X, Y, [sigma_noise, sigma_noise])

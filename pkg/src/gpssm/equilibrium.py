"""Stationary densities of a GP-SSM.

A density ``u`` is stationary when ``u(x') = int p(x' | x) u(x) dx``.  On a
tensor grid with trapezoid weights ``w`` this becomes ``(I - H W) u = 0``
with ``H[i, j] = p(node_i | node_j)`` and ``W = diag(w)``.  The null vector
is picked out by appending the normalization row ``w^T u = 1`` and solving
the stacked system by non-negative least squares.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
from scipy import linalg

from .errors import DegenerateVariance, DimensionMismatch, IntervalInvalid, NoSolution
from .nnls import nnls

log = logging.getLogger(__name__)

SINGULAR_TOL = 1e-6
MIN_VARIANCE = 1e-12
COVERAGE_WARN = 0.99


class TransitionModel(Protocol):
    """Anything with Gaussian one-step moments, e.g. :class:`~gpssm.gp.GpSsmModel`."""

    n: int

    def moments(self, points) -> tuple[np.ndarray, np.ndarray]: ...


@dataclass(frozen=True)
class Grid:
    """Tensor-product trapezoid grid.

    Nodes are ordered lexicographically over the per-dimension indices, with
    the first dimension varying slowest.
    """

    intervals: tuple[tuple[float, float], ...]
    q: tuple[int, ...]
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / q for (a, b), q in zip(self.intervals, self.q))

    def axis(self, d: int) -> np.ndarray:
        a, b = self.intervals[d]
        return a + np.arange(self.q[d] + 1) * ((b - a) / self.q[d])

    def to_dict(self) -> dict:
        return {"intervals": [list(iv) for iv in self.intervals], "q": list(self.q)}


def trapezoid_weights(a: float, b: float, q: int) -> np.ndarray:
    dx = (b - a) / q
    w = np.full(q + 1, dx)
    w[0] = w[-1] = dx / 2
    return w


def build_grid(intervals, subdivisions) -> Grid:
    """Trapezoid grid over the box ``prod [a_d, b_d]`` with ``q_d`` cells per dimension.

    ``intervals`` may be a single ``(a, b)`` pair for a 1-D grid and
    ``subdivisions`` a single int applied to every dimension.
    """
    intervals = np.asarray(intervals, dtype=float)
    if intervals.ndim == 1:
        intervals = intervals[None, :]
    if intervals.ndim != 2 or intervals.shape[1] != 2:
        raise IntervalInvalid("intervals must be (a, b) pairs")
    n = intervals.shape[0]
    q = np.broadcast_to(np.asarray(subdivisions, dtype=int), (n,))
    for (a, b), qd in zip(intervals, q):
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise IntervalInvalid(f"interval [{a}, {b}] is empty or invalid")
        if qd < 2:
            raise IntervalInvalid(f"need at least 2 subdivisions, got {qd}")
    axes, ws = [], []
    for (a, b), qd in zip(intervals, q):
        dx = (b - a) / qd
        axes.append(a + np.arange(qd + 1) * dx)
        ws.append(trapezoid_weights(a, b, qd))
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.column_stack([g.ravel() for g in mesh])
    weights = ws[0]
    for w in ws[1:]:
        weights = np.outer(weights, w).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Grid(
        tuple((float(a), float(b)) for a, b in intervals),
        tuple(int(v) for v in q),
        nodes,
        weights,
    )


def transition_density(model: TransitionModel, x_next, x) -> float:
    """``p(x_next | x)`` for the Gaussian one-step model."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_next = np.atleast_1d(np.asarray(x_next, dtype=float))
    if x.shape != (model.n,) or x_next.shape != (model.n,):
        raise DimensionMismatch(f"expected {model.n}-vectors")
    mean, var = model.moments(x[None, :])
    mean, var = mean[0], var[0]
    if np.any(var <= MIN_VARIANCE):
        raise DegenerateVariance(f"predictive variance {var.min():.3g} at {x} is too small for a density")
    z = (x_next - mean) ** 2 / var
    return float(np.exp(-0.5 * z.sum()) / np.sqrt(np.prod(2 * math.pi * var)))


def transition_matrix(model: TransitionModel, grid: Grid) -> np.ndarray:
    """``H[i, j] = p(node_i | node_j)`` over every pair of grid nodes."""
    if grid.n != model.n:
        raise DimensionMismatch(f"grid is {grid.n}-D but the model is {model.n}-D")
    mean, var = model.moments(grid.nodes)
    if np.any(var <= MIN_VARIANCE):
        j = int(np.argmin(var.min(axis=1)))
        raise DegenerateVariance(
            f"predictive variance {var[j].min():.3g} at node {grid.nodes[j]} is too small "
            "for a density (noise-free training input?)"
        )
    logH = np.zeros((grid.size, grid.size))
    for d in range(grid.n):
        diff = grid.nodes[:, d][:, None] - mean[:, d][None, :]
        logH -= 0.5 * diff ** 2 / var[:, d][None, :] + 0.5 * np.log(2 * math.pi * var[:, d])[None, :]
    return np.exp(logH)


def assemble_M(H: np.ndarray, grid: Grid, lam: float = 1.0) -> np.ndarray:
    """``M = I / lam - H diag(w)``."""
    if lam == 0:
        raise ValueError("lam must be nonzero")
    H = np.asarray(H, dtype=float)
    if H.shape != (grid.size, grid.size):
        raise DimensionMismatch(f"H is {H.shape} but the grid has {grid.size} nodes")
    M = -H * grid.weights[None, :]
    M[np.diag_indices_from(M)] += 1.0 / lam
    return M


def singularity_check(M: np.ndarray, tol: float = SINGULAR_TOL) -> tuple[float, bool]:
    """Smallest singular value of ``M`` and whether it is below ``tol * sigma_max``."""
    s = linalg.svdvals(np.asarray(M, dtype=float), check_finite=False)
    return float(s[-1]), bool(s[-1] <= tol * s[0])


@dataclass
class EquilibriumSolution:
    """Grid density values of a stationary distribution.

    ``residual`` is ``||M_p u - b_p||`` for the returned ``u``.
    """

    grid: Grid
    u: np.ndarray
    residual: float
    singular_value_min: float
    singular_value_max: float = math.nan
    column_mass_min: float = math.nan
    nnls_iterations: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def mass(self) -> float:
        return float(self.grid.weights @ self.u)

    def summary(self) -> dict:
        return {
            "residual": self.residual,
            "singular_value_min": self.singular_value_min,
            "singular_value_max": self.singular_value_max,
            "singular": self.singular_value_min <= SINGULAR_TOL * self.singular_value_max,
            "mass": self.mass,
            "column_mass_min": self.column_mass_min,
            "nnls_iterations": self.nnls_iterations,
            "grid": self.grid.to_dict(),
            "nodes": self.grid.size,
            "warnings": list(self.warnings),
        }


def stacked_system(M: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """``M_p = [M; w^T]`` and ``b_p = [0, ..., 0, 1]``."""
    Mp = np.vstack([M, grid.weights[None, :]])
    bp = np.zeros(Mp.shape[0])
    bp[-1] = 1.0
    return Mp, bp


def solve_equilibrium(model: TransitionModel, grid: Grid, tol: float = SINGULAR_TOL) -> EquilibriumSolution:
    """Stationary density of ``model`` on ``grid``.

    Raises
    ------
    NoSolution
        If ``I - H W`` is not numerically singular, i.e. the discretized
        transition operator has no eigenvalue at 1.
    SolverStall
        If the NNLS iteration cap is exceeded.
    """
    H = transition_matrix(model, grid)
    notes = []
    col_mass = grid.weights @ H
    if col_mass.min() < COVERAGE_WARN:
        j = int(np.argmin(col_mass))
        msg = (
            f"grid truncates the transition density: column mass {col_mass[j]:.4f} "
            f"from node {grid.nodes[j].tolist()} (< {COVERAGE_WARN})"
        )
        log.warning(msg)
        notes.append(msg)
    M = assemble_M(H, grid, 1.0)
    s = linalg.svdvals(M, check_finite=False)
    smin, smax = float(s[-1]), float(s[0])
    if smin > tol * smax:
        raise NoSolution(f"No solution: smallest singular value {smin:.3g} exceeds {tol:g} * {smax:.3g}")
    if s.size > 1 and s[-2] <= tol * smax:
        msg = "singular value at zero has multiplicity > 1; the stationary density may not be unique"
        log.warning(msg)
        notes.append(msg)
    Mp, bp = stacked_system(M, grid)
    res = nnls(Mp, bp, max_iter=10 * grid.size)
    u = res.x
    mass = grid.weights @ u
    if mass > 0:
        u = u / mass
    u.setflags(write=False)
    residual = float(np.linalg.norm(Mp @ u - bp))
    return EquilibriumSolution(grid, u, residual, smin, smax, float(col_mass.min()), res.iterations, notes)


def convergence_study(model: TransitionModel, intervals, q_sequence: Sequence[int]) -> list[tuple[int, float]]:
    """L-infinity distance of each solution to the finest one, at shared nodes.

    Every ``q`` in the sequence must divide the last (finest) one so that the
    coarse nodes are a subset of the fine nodes.
    """
    qs = [int(q) for q in q_sequence]
    if sorted(qs) != qs:
        raise ValueError("q_sequence must be nondecreasing")
    q_ref = qs[-1]
    if any(q_ref % q for q in qs):
        raise ValueError("every q must divide the finest q so the grids nest")
    cache: dict[int, EquilibriumSolution] = {}

    def solve(q):
        if q not in cache:
            cache[q] = solve_equilibrium(model, build_grid(intervals, q))
        return cache[q]

    ref = solve(q_ref)
    n = ref.grid.n
    ref_u = ref.u.reshape([q_ref + 1] * n)
    out = []
    for q in qs:
        sol = solve(q)
        stride = q_ref // q
        shared = ref_u[tuple([slice(None, None, stride)] * n)].ravel()
        out.append((q, float(np.max(np.abs(sol.u - shared)))))
    return out


def factorizes(u2: np.ndarray, u_a: np.ndarray, u_b: np.ndarray) -> float:
    """L-infinity gap between a 2-D grid density and the outer product of two 1-D ones."""
    return float(np.max(np.abs(u2.reshape(u_a.size, u_b.size) - np.outer(u_a, u_b))))


__all__ = [
    "Grid",
    "EquilibriumSolution",
    "build_grid",
    "trapezoid_weights",
    "transition_density",
    "transition_matrix",
    "assemble_M",
    "singularity_check",
    "stacked_system",
    "solve_equilibrium",
    "convergence_study",
    "factorizes",
]

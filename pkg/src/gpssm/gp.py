"""GP state space models: training, likelihood and one-step prediction.

A GP-SSM with state dimension ``n`` is ``n`` independent zero-mean GPs, one
per output coordinate, all conditioned on the same training inputs.  Output
``i`` has its own kernel, noise level and weight vector
``h_i = (K_i + sigma_{n,i}^2 I)^{-1} Y[:, i]``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, optimize

from .errors import (
    ConfigError,
    DimensionMismatch,
    FactorizationFailure,
    NumericalFailure,
    OptimizationFailure,
)
from .kernels import POLYNOMIAL, TUNABLE, Kernel, covariance_matrix, normalize_kind

log = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_MAX = 1e-4
VARIANCE_CLAMP = 1e-12
_CHUNK = 4096


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TrainingSet:
    """Input/output pairs ``(X[j], Y[j])`` with ``Y[j]`` the observed successor of ``X[j]``.

    ``X`` and ``Y`` are ``(m, n)``; ``sigma_n`` holds one noise standard
    deviation per output dimension.
    """

    X: np.ndarray
    Y: np.ndarray
    sigma_n: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim != 2 or Y.ndim != 2:
            raise DimensionMismatch("X and Y must be 2-D arrays of shape (m, n)")
        if X.shape[0] < 1:
            raise ConfigError("training set needs at least one pair")
        if X.shape != Y.shape:
            raise DimensionMismatch(f"X has shape {X.shape} but Y has shape {Y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ConfigError("training data contains non-finite values")
        sn = np.broadcast_to(np.asarray(self.sigma_n, dtype=float), (X.shape[1],))
        if np.any(sn < 0) or not np.all(np.isfinite(sn)):
            raise ConfigError("noise deviations must be finite and >= 0")
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "Y", _readonly(Y))
        object.__setattr__(self, "sigma_n", _readonly(sn))

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class GaussianPrediction:
    """Distribution of the next state: per-dimension mean and variance."""

    mean: np.ndarray
    variance: np.ndarray

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


def factorize(K: np.ndarray, noise_var: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K + noise_var I``, adding jitter if needed.

    Returns the factor and the jitter that was added (0.0 if none).
    """
    m = K.shape[0]
    A = K + noise_var * np.eye(m)
    try:
        return linalg.cholesky(A, lower=True, check_finite=False), 0.0
    except linalg.LinAlgError:
        pass
    scale = float(np.max(np.diag(A)))
    if not scale > 0:
        raise FactorizationFailure("covariance matrix is zero; cannot factorize")
    rel = JITTER_START
    while rel <= JITTER_MAX * (1 + 1e-9):
        jitter = rel * scale
        try:
            L = linalg.cholesky(A + jitter * np.eye(m), lower=True, check_finite=False)
            log.debug("factorization needed jitter %.3g", jitter)
            return L, jitter
        except linalg.LinAlgError:
            rel *= 10
    raise FactorizationFailure(
        "K + sigma_n^2 I is not positive definite even with jitter "
        f"{JITTER_MAX:g} * max(diag); look for duplicated inputs with zero noise"
    )


@dataclass(frozen=True)
class OutputGp:
    """The trained GP for one output coordinate."""

    kernel: Kernel
    sigma_n: float
    L: np.ndarray
    h: np.ndarray
    jitter: float = 0.0

    @property
    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))


def _fit_output(kernel: Kernel, X: np.ndarray, y: np.ndarray, sigma_n: float) -> OutputGp:
    K = covariance_matrix(kernel, X)
    L, jitter = factorize(K, sigma_n ** 2)
    h = linalg.cho_solve((L, True), y, check_finite=False)
    return OutputGp(kernel, float(sigma_n), _readonly(L), _readonly(h), jitter)


@dataclass(frozen=True)
class GpSsmModel:
    """A trained GP-SSM.  Immutable; safe to share between threads."""

    data: TrainingSet
    outputs: tuple[OutputGp, ...]
    log_likelihoods: tuple[float, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def m(self) -> int:
        return self.data.m

    @property
    def X(self) -> np.ndarray:
        return self.data.X

    @property
    def kernels(self) -> tuple[Kernel, ...]:
        return tuple(o.kernel for o in self.outputs)

    @property
    def all_se(self) -> bool:
        return all(o.kernel.is_se for o in self.outputs)

    def moments(self, points, clamp: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Predictive mean and variance at each row of ``points``.

        Returns two ``(B, n)`` arrays.  With ``clamp=False`` the variances
        are returned as computed, before round-off negatives are zeroed.
        """
        P = np.asarray(points, dtype=float)
        if P.ndim == 1:
            P = P.reshape(-1, self.n) if self.n > 1 else P[:, None]
        if P.ndim != 2 or P.shape[1] != self.n:
            raise DimensionMismatch(f"expected points with {self.n} coordinates, got shape {P.shape}")
        mean = np.empty((P.shape[0], self.n))
        var = np.empty((P.shape[0], self.n))
        for start in range(0, P.shape[0], _CHUNK):
            block = P[start:start + _CHUNK]
            for i, out in enumerate(self.outputs):
                Kq = out.kernel.cross(block, self.X)
                mean[start:start + _CHUNK, i] = Kq @ out.h
                V = linalg.solve_triangular(out.L, Kq.T, lower=True, check_finite=False)
                var[start:start + _CHUNK, i] = out.kernel.diag(block) - np.einsum("ij,ij->j", V, V)
        return mean, (clamp_variance(var) if clamp else var)

    def predict(self, x) -> GaussianPrediction:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 and not (x.ndim == 0 and self.n == 1):
            raise DimensionMismatch(f"expected a {self.n}-vector")
        x = np.atleast_1d(x)
        if x.shape != (self.n,):
            raise DimensionMismatch(f"expected a {self.n}-vector, got shape {x.shape}")
        mean, var = self.moments(x[None, :])
        return GaussianPrediction(mean[0], var[0])

    def se_arrays(self):
        """Stacked arrays used by the compiled rollout kernel (SE models only)."""
        if not self.all_se:
            raise ConfigError("model has non squared-exponential outputs")
        L = np.ascontiguousarray(np.stack([o.L for o in self.outputs]))
        h = np.ascontiguousarray(np.stack([o.h for o in self.outputs]))
        sf2 = np.array([o.kernel.sigma_f ** 2 for o in self.outputs])
        ell = np.array([o.kernel.lengthscale for o in self.outputs])
        return np.ascontiguousarray(self.X), L, h, sf2, ell


def clamp_variance(var: np.ndarray) -> np.ndarray:
    low = var.min() if var.size else 0.0
    if low < -VARIANCE_CLAMP:
        raise NumericalFailure(f"predictive variance {low:.3g} is negative beyond round-off")
    return np.maximum(var, 0.0)


def fit(kernels: Sequence[Kernel] | Kernel, data: TrainingSet, log_likelihoods=None) -> GpSsmModel:
    """Factorize and solve for the weight vectors of every output GP."""
    if isinstance(kernels, Kernel):
        kernels = [kernels] * data.n
    kernels = list(kernels)
    if len(kernels) != data.n:
        raise DimensionMismatch(f"need {data.n} kernels, got {len(kernels)}")
    outputs = tuple(
        _fit_output(k, data.X, data.Y[:, i], float(data.sigma_n[i])) for i, k in enumerate(kernels)
    )
    if log_likelihoods is None:
        log_likelihoods = tuple(_lml_from_output(o, data.Y[:, i]) for i, o in enumerate(outputs))
    return GpSsmModel(data, outputs, tuple(float(v) for v in log_likelihoods))


def _lml_from_output(out: OutputGp, y: np.ndarray) -> float:
    m = y.shape[0]
    return float(-0.5 * y @ out.h - 0.5 * out.log_det - 0.5 * m * math.log(2 * math.pi))


def log_marginal_likelihood(kernel: Kernel, data: TrainingSet, i: int, sigma_n: float | None = None) -> float:
    """``log p(Y[:, i] | X, kernel)`` under the zero-mean GP prior.

    Returns ``-inf`` when the covariance cannot be factorized.
    """
    if sigma_n is None:
        sigma_n = float(data.sigma_n[i])
    try:
        out = _fit_output(kernel, data.X, data.Y[:, i], sigma_n)
    except FactorizationFailure:
        return -math.inf
    return _lml_from_output(out, data.Y[:, i])


@dataclass
class OptimizerConfig:
    """Settings for the multi-start likelihood search.

    Starts are drawn log-uniformly from ``start_bounds``; the first start is
    always every hyperparameter equal to 1.  The search itself is confined to
    ``search_bounds``.
    """

    n_starts: int = 8
    start_bounds: tuple[float, float] = (1e-2, 1e2)
    search_bounds: tuple[float, float] = (1e-3, 1e3)
    rel_tol: float = 1e-8
    max_iter: int = 2000
    optimize_noise: bool = False
    degree: int = 2
    seed: int = 0


def _kernel_from_logs(kind: str, names, logs, degree: int) -> Kernel:
    params = {name: float(np.exp(v)) for name, v in zip(names, logs)}
    if kind == POLYNOMIAL:
        params["degree"] = degree
    return Kernel(kind, params)


def start_points(config: OptimizerConfig, kind: str, base_noise: float = 0.0) -> list[np.ndarray]:
    """Log-parameter start vectors of the multi-start search, in order.

    The first sets every kernel hyperparameter to 1 (and the noise to
    ``base_noise`` when it is optimized and positive); the rest are drawn
    log-uniformly from ``config.start_bounds`` with ``config.seed``.
    """
    n_k = len(TUNABLE[normalize_kind(kind)])
    n_p = n_k + (1 if config.optimize_noise else 0)
    rng = np.random.default_rng(config.seed)
    starts = [np.zeros(n_p)]
    if config.optimize_noise and base_noise > 0:
        starts[0][n_k] = math.log(base_noise)
    s_lo, s_hi = np.log(config.start_bounds)
    for _ in range(max(config.n_starts, 1) - 1):
        starts.append(rng.uniform(s_lo, s_hi, size=n_p))
    return starts


def optimize_hyperparameters(
    data: TrainingSet, kind: str, i: int, config: OptimizerConfig | None = None
) -> tuple[Kernel, float, float]:
    """Maximize the log marginal likelihood of output ``i`` over the kernel hyperparameters.

    Multi-start Nelder-Mead in log-parameter space.  Returns
    ``(kernel, sigma_n, log_likelihood)``; ``sigma_n`` is the data's value
    unless ``config.optimize_noise`` is set.
    """
    config = config or OptimizerConfig()
    kind = normalize_kind(kind)
    names = TUNABLE[kind]
    n_k = len(names)
    n_p = n_k + (1 if config.optimize_noise else 0)
    base_noise = float(data.sigma_n[i])
    lo, hi = np.log(config.search_bounds)

    def objective(logs):
        if np.any(~np.isfinite(logs)):
            return math.inf
        kern = _kernel_from_logs(kind, names, logs[:n_k], config.degree)
        sn = float(np.exp(logs[n_k])) if config.optimize_noise else base_noise
        val = log_marginal_likelihood(kern, data, i, sn)
        return -val if np.isfinite(val) else math.inf

    starts = start_points(config, kind, base_noise)

    best_x, best_f = None, math.inf
    for idx, x0 in enumerate(starts):
        f0 = objective(x0)
        fatol = config.rel_tol * max(1.0, abs(f0)) if np.isfinite(f0) else config.rel_tol
        res = optimize.minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=[(lo, hi)] * n_p,
            options={"xatol": 1e-6, "fatol": fatol, "maxiter": config.max_iter * n_p},
        )
        x, f = res.x, res.fun
        if f0 < f:
            x, f = x0, f0
        log.debug("start %d: -lml %.6g -> %.6g", idx, f0, f)
        # strict comparison keeps the lowest start index on ties
        if f < best_f:
            best_x, best_f = np.array(x), f
    if best_x is None or not np.isfinite(best_f):
        raise OptimizationFailure(f"every start failed to factorize for output {i}")
    kern = _kernel_from_logs(kind, names, best_x[:n_k], config.degree)
    sn = float(np.exp(best_x[n_k])) if config.optimize_noise else base_noise
    return kern, sn, -float(best_f)


def train(data: TrainingSet, kind: str = "squared-exponential", config: OptimizerConfig | None = None) -> GpSsmModel:
    """Optimize hyperparameters per output dimension, then fit."""
    kernels, noise = [], []
    for i in range(data.n):
        k, sn, _ = optimize_hyperparameters(data, kind, i, config)
        kernels.append(k)
        noise.append(sn)
    if not np.array_equal(noise, data.sigma_n):
        data = TrainingSet(data.X, data.Y, np.array(noise))
    return fit(kernels, data)

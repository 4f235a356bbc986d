"""Covariance functions.

Three kinds are supported::

    linear                 k(x, x') = x.x' + sigma0**2
    polynomial             k(x, x') = (x.x' + sigma0**2) ** degree
    squared-exponential    k(x, x') = sigma_f**2 * exp(-|x - x'|**2 / (2 l**2))

Points are stored as rows: a set of ``m`` states in ``n`` dimensions is an
``(m, n)`` array.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import ConfigError

LINEAR = "linear"
POLYNOMIAL = "polynomial"
SQUARED_EXPONENTIAL = "squared-exponential"
KINDS = (LINEAR, POLYNOMIAL, SQUARED_EXPONENTIAL)

_ALIASES = {"se": SQUARED_EXPONENTIAL, "rbf": SQUARED_EXPONENTIAL, "poly": POLYNOMIAL}

# names of the continuous hyperparameters that are optimized, per kind
TUNABLE = {
    LINEAR: ("sigma0",),
    POLYNOMIAL: ("sigma0",),
    SQUARED_EXPONENTIAL: ("lengthscale", "sigma_f"),
}


def normalize_kind(kind: str) -> str:
    kind = kind.strip().lower().replace("_", "-")
    kind = _ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ConfigError(f"unknown kernel kind {kind!r}; expected one of {KINDS}")
    return kind


@dataclass(frozen=True)
class Kernel:
    """A covariance function with fixed hyperparameters.

    Use the :meth:`squared_exponential`, :meth:`linear` and
    :meth:`polynomial` constructors; they validate the hyperparameter
    domains.
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        kind = normalize_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        params = {k: float(v) for k, v in dict(self.params).items()}
        if kind == SQUARED_EXPONENTIAL:
            missing = {"sigma_f", "lengthscale"} - params.keys()
            if missing:
                raise ConfigError(f"squared-exponential kernel needs {sorted(missing)}")
            if not np.isfinite(params["lengthscale"]) or params["lengthscale"] <= 0:
                raise ConfigError("lengthscale must be > 0")
            if not np.isfinite(params["sigma_f"]) or params["sigma_f"] < 0:
                raise ConfigError("sigma_f must be >= 0")
        else:
            params.setdefault("sigma0", 0.0)
            if not np.isfinite(params["sigma0"]) or params["sigma0"] < 0:
                raise ConfigError("sigma0 must be >= 0")
            if kind == POLYNOMIAL:
                degree = params.setdefault("degree", 2.0)
                if degree < 1 or degree != int(degree):
                    raise ConfigError("polynomial degree must be a positive integer")
        object.__setattr__(self, "params", MappingProxyType(params))

    @classmethod
    def squared_exponential(cls, sigma_f: float = 1.0, lengthscale: float = 1.0) -> "Kernel":
        return cls(SQUARED_EXPONENTIAL, {"sigma_f": sigma_f, "lengthscale": lengthscale})

    @classmethod
    def linear(cls, sigma0: float = 0.0) -> "Kernel":
        return cls(LINEAR, {"sigma0": sigma0})

    @classmethod
    def polynomial(cls, sigma0: float = 0.0, degree: int = 2) -> "Kernel":
        return cls(POLYNOMIAL, {"sigma0": sigma0, "degree": degree})

    @property
    def is_se(self) -> bool:
        return self.kind == SQUARED_EXPONENTIAL

    @property
    def sigma_f(self) -> float:
        return self.params["sigma_f"]

    @property
    def lengthscale(self) -> float:
        return self.params["lengthscale"]

    def with_params(self, **updates: float) -> "Kernel":
        params = dict(self.params)
        params.update(updates)
        return Kernel(self.kind, params)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Kernel":
        return cls(d["kind"], d["params"])

    def __call__(self, x, x2) -> float:
        return kernel_eval(self, x, x2)

    def cross(self, A, B) -> np.ndarray:
        """Matrix of covariances ``K[i, j] = k(A[i], B[j])``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[1] != B.shape[1]:
            raise ConfigError(f"input dimensions differ: {A.shape[1]} vs {B.shape[1]}")
        if self.kind == SQUARED_EXPONENTIAL:
            sq = sq_distances(A, B)
            return self.sigma_f ** 2 * np.exp(-0.5 * sq / self.lengthscale ** 2)
        base = A @ B.T + self.params["sigma0"] ** 2
        if self.kind == POLYNOMIAL:
            return base ** int(self.params["degree"])
        return base

    def diag(self, A) -> np.ndarray:
        """``k(a, a)`` for every row of ``A``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if self.kind == SQUARED_EXPONENTIAL:
            return np.full(A.shape[0], self.sigma_f ** 2)
        base = np.einsum("ij,ij->i", A, A) + self.params["sigma0"] ** 2
        if self.kind == POLYNOMIAL:
            return base ** int(self.params["degree"])
        return base


def sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # direct differences rather than the |a|^2 + |b|^2 - 2ab expansion, which
    # loses the exact zero on the diagonal and breaks symmetry
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kernel_eval(k: Kernel, x, x2) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise ConfigError(f"input dimensions differ: {x.shape} vs {x2.shape}")
    if k.kind == SQUARED_EXPONENTIAL:
        d = x - x2
        return float(k.sigma_f ** 2 * np.exp(-0.5 * float(d @ d) / k.lengthscale ** 2))
    base = float(x @ x2) + k.params["sigma0"] ** 2
    if k.kind == POLYNOMIAL:
        return base ** int(k.params["degree"])
    return base


def covariance_matrix(k: Kernel, X) -> np.ndarray:
    """Gram matrix of ``k`` over the rows of ``X``, exactly symmetric."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 1:
        raise ConfigError("covariance matrix needs at least one point")
    K = k.cross(X, X)
    # A @ A.T is not guaranteed bitwise symmetric
    return np.triu(K) + np.triu(K, 1).T

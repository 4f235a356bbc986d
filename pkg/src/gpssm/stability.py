"""Mean-square bound and positive-recurrent set for squared-exponential GP-SSMs.

For SE kernels every output satisfies ``|mean_i(x)| <= sigma_f,i^2 sqrt(m) ||h_i||``
and ``0 <= var_i(x) <= sigma_f,i^2``, hence

    E ||x[k]||^2 <= sum_i sigma_f,i^4 m ||h_i||^2 + sigma_f,i^2      (k >= 1)

and the ball ``||x||^2 <= bound`` is positive recurrent under the drift of
``V(x) = x.x``.  Both statements are about the fitted model, not about the
system the training data came from.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UnsupportedKernel
from .simulate import rollout_generators, simulate_many, simulate_with_noise

SCOPE_NOTE = "certificate of the fitted GP-SSM, not of the data-generating system"
DEFAULT_RETURN_CAP = 100_000


@dataclass
class StabilityReport:
    bound: float
    recurrent_radius_sq: float
    mean_terms: list[float]
    variance_terms: list[float]
    m: int
    empirical: dict | None = None
    scope: str = SCOPE_NOTE

    @property
    def recurrent_radius(self) -> float:
        return float(np.sqrt(self.recurrent_radius_sq))

    def contains(self, x) -> bool:
        """Membership of ``x`` in the recurrent set ``{x : ||x||^2 <= bound}``."""
        x = np.asarray(x, dtype=float)
        return bool(x @ x <= self.recurrent_radius_sq)

    def to_dict(self) -> dict:
        d = {
            "bound": self.bound,
            "recurrent_radius_sq": self.recurrent_radius_sq,
            "recurrent_radius": self.recurrent_radius,
            "per_dimension": [
                {"mean_term": a, "variance_term": b} for a, b in zip(self.mean_terms, self.variance_terms)
            ],
            "m": self.m,
            "scope": self.scope,
        }
        if self.empirical is not None:
            d["empirical"] = self.empirical
        return d


def _require_se(model):
    bad = [o.kernel.kind for o in model.outputs if not o.kernel.is_se]
    if bad:
        raise UnsupportedKernel(f"the certificate needs squared-exponential kernels, got {bad}")


def mean_square_bound(model) -> StabilityReport:
    _require_se(model)
    mean_terms, var_terms = [], []
    for out in model.outputs:
        sf2 = out.kernel.sigma_f ** 2
        mean_terms.append(float(sf2 * sf2 * model.m * (out.h @ out.h)))
        var_terms.append(float(sf2))
    bound = float(sum(mean_terms) + sum(var_terms))
    return StabilityReport(bound, bound, mean_terms, var_terms, model.m)


recurrent_set = mean_square_bound


def second_moment(model, points) -> np.ndarray:
    """``E ||x[k+1]||^2`` given ``x[k]`` for each row of ``points``."""
    mean, var = model.moments(points)
    return np.sum(mean ** 2 + var, axis=1)


def drift(model, points) -> np.ndarray:
    """Expected change of ``V(x) = ||x||^2`` over one step."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    return second_moment(model, P) - np.sum(P ** 2, axis=1)


def empirical_mean_square(model, x0s, steps: int, rollouts: int, seed: int = 0) -> dict:
    """Monte Carlo estimate of ``E ||x[k]||^2`` per step, maximized over the start states.

    Start state ``s`` uses the seed ``seed + s``.  Returns ``per_step`` (length
    ``steps + 1``) and ``sup``, the maximum over ``k >= 1``.
    """
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    per_step = np.full(steps + 1, -np.inf)
    for s, x0 in enumerate(x0s):
        states = simulate_many(model, x0, steps, rollouts, seed + s)
        sq = np.sum(states ** 2, axis=2)
        per_step = np.maximum(per_step, sq.mean(axis=0))
    return {
        "per_step": per_step,
        "sup": float(per_step[1:].max()) if steps >= 1 else float("nan"),
        "seed": seed,
        "rollouts": rollouts,
        "steps": steps,
        "starts": x0s.tolist(),
    }


@dataclass
class ReturnTimes:
    times: np.ndarray
    cap: int
    seed: int
    hits: np.ndarray = field(repr=False, default=None)

    @property
    def cap_fraction(self) -> float:
        return float(np.mean(~self.hits))

    @property
    def mean(self) -> float:
        return float(self.times[self.hits].mean()) if self.hits.any() else float("inf")

    @property
    def max(self) -> int:
        return int(self.times.max())

    def to_dict(self) -> dict:
        return {
            "rollouts": int(self.times.size),
            "mean": self.mean,
            "max": self.max,
            "cap": self.cap,
            "cap_fraction": self.cap_fraction,
            "seed": self.seed,
        }


def return_time_estimate(model, x0, rollouts: int, cap: int = DEFAULT_RETURN_CAP, seed: int = 0, radius_sq=None) -> ReturnTimes:
    """First ``k >= 1`` with ``||x[k]||^2 <= radius_sq`` for each rollout from ``x0``.

    ``radius_sq`` defaults to the recurrent-set radius.  Rollouts still
    outside the set after ``cap`` steps are reported with time ``cap`` and
    ``hits`` False.  Rollouts are advanced in chunks of growing length, each
    drawing its normals from its own generator, so results do not depend
    on how many rollouts run together.
    """
    if radius_sq is None:
        radius_sq = recurrent_set(model).recurrent_radius_sq
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (model.n,):
        raise ConfigError(f"x0 must be a {model.n}-vector")
    gens = rollout_generators(seed, rollouts)
    times = np.full(rollouts, cap, dtype=np.int64)
    hits = np.zeros(rollouts, dtype=bool)
    cur = np.tile(x0, (rollouts, 1))
    done = 0
    chunk = 8
    active = np.arange(rollouts)
    while active.size and done < cap:
        length = min(chunk, cap - done)
        noise = np.stack([gens[r].standard_normal((length, model.n)) for r in active])
        states = simulate_with_noise(model, cur[active], noise)[:, 1:]
        inside = np.sum(states ** 2, axis=2) <= radius_sq
        first = np.where(inside.any(axis=1), inside.argmax(axis=1), -1)
        hit = first >= 0
        times[active[hit]] = done + first[hit] + 1
        hits[active[hit]] = True
        cur[active] = states[:, -1]
        active = active[~hit]
        done += length
        chunk = min(chunk * 2, 4096)
    return ReturnTimes(times, cap, seed, hits)

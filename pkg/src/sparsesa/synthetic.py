"""Planted sparse regression model y = A x0 + noise, and ground-truth metrics.

Design entries are iid N(0, 1/N); each entry of x0 is zero with probability
1 - rho0 and N(0, sigma_x2) otherwise; noise entries are iid N(0, sigma_xi2).
Draw order from the ``(seed,)`` stream: A (row-major), the x0 mask, the x0
values, then the noise.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionMismatch
from .linalg import Instance, Support
from .rng import as_rng, make_rng


@dataclass(frozen=True)
class SynthParams:
    n: int
    alpha: float = 0.5
    rho0: float = 0.1
    sigma_x2: float = 10.0
    sigma_xi2: float = 0.1
    seed: int = 0
    # Exact number of nonzeros in x0; when None it is Binomial(n, rho0).
    n_nonzero: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 < self.rho0 <= 1:
            raise ValueError(f"rho0 must lie in (0, 1], got {self.rho0}")
        if not self.sigma_x2 > 0:
            raise ValueError(f"sigma_x2 must be positive, got {self.sigma_x2}")
        if not self.sigma_xi2 >= 0:
            raise ValueError(f"sigma_xi2 must be nonnegative, got {self.sigma_xi2}")
        if self.m < 1:
            raise ValueError(f"round(alpha * n) = {self.m} leaves no rows")
        if self.n_nonzero is not None and not 0 < self.n_nonzero <= self.n:
            raise ValueError(f"n_nonzero must lie in 1..n, got {self.n_nonzero}")

    @property
    def m(self) -> int:
        return int(round(self.alpha * self.n))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class PlantedInstance:
    instance: Instance
    x0: np.ndarray
    noise: np.ndarray
    true_support: Support
    params: SynthParams


def generate(params: SynthParams, rng=None) -> PlantedInstance:
    """Draw a planted instance; ``rng`` defaults to the stream keyed by ``params.seed``."""
    rng = make_rng(params.seed) if rng is None else as_rng(rng)
    n, m = params.n, params.m
    a = rng.normal(0.0, np.sqrt(1.0 / n), size=(m, n))
    if params.n_nonzero is None:
        mask = rng.random(n) < params.rho0
    else:
        mask = np.zeros(n, dtype=bool)
        mask[rng.choice(n, size=params.n_nonzero, replace=False)] = True
    values = rng.normal(0.0, np.sqrt(params.sigma_x2), size=n)
    x0 = np.where(mask, values, 0.0)
    noise = rng.normal(0.0, np.sqrt(params.sigma_xi2), size=m) if params.sigma_xi2 > 0 else np.zeros(m)
    y = a @ x0 + noise
    return PlantedInstance(Instance(a, y), x0, noise, Support.of(np.flatnonzero(x0)), params)


def _check_len(xhat, n):
    xhat = np.asarray(xhat, dtype=np.float64)
    if xhat.shape != (n,):
        raise DimensionMismatch(f"estimate has shape {xhat.shape}, expected ({n},)")
    return xhat


def generalization_error_exact(xhat, planted: PlantedInstance) -> float:
    """Expected half squared error on a fresh row: 0.5 * (||xhat - x0||^2 / N + sigma_xi2).

    A fresh row a ~ N(0, I/N) makes ``a.(x0 - xhat)`` Gaussian with variance
    ``||x0 - xhat||^2 / N``, independent of the noise.
    """
    p = planted.params
    d = _check_len(xhat, p.n) - planted.x0
    return 0.5 * (float(d @ d) / p.n + p.sigma_xi2)


def generalization_error_empirical(xhat, planted: PlantedInstance, n_fresh: int, rng,
                                   chunk: int = 10_000) -> tuple[float, float]:
    """Monte Carlo estimate over ``n_fresh`` fresh (row, response) pairs: (mean, standard error)."""
    if n_fresh < 2:
        raise ValueError("n_fresh must be at least 2")
    p = planted.params
    xhat = _check_len(xhat, p.n)
    rng = as_rng(rng)
    losses = np.empty(n_fresh)
    sd_a = np.sqrt(1.0 / p.n)
    sd_xi = np.sqrt(p.sigma_xi2)
    for start in range(0, n_fresh, chunk):
        stop = min(start + chunk, n_fresh)
        rows = rng.normal(0.0, sd_a, size=(stop - start, p.n))
        y = rows @ planted.x0 + rng.normal(0.0, sd_xi, size=stop - start)
        losses[start:stop] = 0.5 * (y - rows @ xhat) ** 2
    return float(losses.mean()), float(losses.std(ddof=1) / np.sqrt(n_fresh))


def support_overlap(found, truth) -> tuple[int, float, float]:
    """(|found & truth|, precision, recall); empty denominators give 0."""
    f, t = set(found), set(truth)
    inter = len(f & t)
    precision = inter / len(f) if f else 0.0
    recall = inter / len(t) if t else 0.0
    return inter, precision, recall

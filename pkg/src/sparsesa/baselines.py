"""Reference solvers: greedy OMP, exhaustive search and exact Boltzmann tables.

Exhaustive routines are only practical at desk scale and refuse to run past
``ENUM_CAP`` supports.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import RankDeficient, TooLarge
from .linalg import Instance, LsState, Support, solve_restricted

logger = logging.getLogger(__name__)

ENUM_CAP = 2_000_000


def _check_cap(n, k, cap):
    count = math.comb(n, k)
    if count > cap:
        raise TooLarge(
            f"C({n},{k}) = {count} supports exceeds the enumeration cap of {cap}; "
            "use a smaller instance or raise the cap"
        )
    return count


def energies(instance: Instance, k: int, cap: int = ENUM_CAP, reverse: bool = False):
    """Yield ``(support, rss)`` for every size-k support in lexicographic order.

    Rank-deficient supports get ``rss = inf``.
    """
    _check_cap(instance.n, k, cap)
    combos = itertools.combinations(range(instance.n), k)
    if reverse:
        combos = reversed(list(combos))
    for cols in combos:
        try:
            rss = solve_restricted(instance, Support(cols)).rss
        except RankDeficient:
            rss = math.inf
        yield Support(cols), rss


def exhaustive(instance: Instance, k: int, cap: int = ENUM_CAP) -> tuple[Support, float]:
    """Global minimiser over all size-k supports; ties go to the lexicographically first."""
    best, best_rss = None, math.inf
    for support, rss in energies(instance, k, cap):
        if rss < best_rss:
            best, best_rss = support, rss
    if best is None:
        raise RankDeficient(f"every support of size {k} is rank deficient")
    return best, best_rss


def omp(instance: Instance, k: int) -> tuple[Support, LsState]:
    """Orthogonal matching pursuit.

    Each iteration adds the unused column with the largest absolute correlation
    with the current residual and refits.  A candidate that makes the support
    rank deficient is skipped in favour of the next-best column.
    """
    if k > min(instance.m, instance.n):
        raise ValueError(f"K={k} exceeds min(M, N) = {min(instance.m, instance.n)}")
    state = solve_restricted(instance, Support(()))
    chosen: list[int] = []
    resid = instance.y.copy()
    for _ in range(k):
        score = np.abs(instance.a.T @ resid)
        score[chosen] = -np.inf
        for j in np.argsort(-score, kind="stable"):
            if not np.isfinite(score[j]):
                raise RankDeficient(f"no independent column left after {len(chosen)} picks")
            try:
                state = solve_restricted(instance, Support(tuple(chosen) + (int(j),)))
            except RankDeficient:
                logger.warning("omp: column %d is dependent on the support, skipping", j)
                continue
            chosen.append(int(j))
            break
        resid = instance.y - instance.a[:, list(state.support.ones)] @ state.coeffs
    return state.support, state


@dataclass
class BoltzmannTable:
    beta: float
    supports: list[Support]
    energies: np.ndarray
    probabilities: np.ndarray
    log_g: float

    @property
    def entries(self):
        return list(zip(self.supports, self.energies, self.probabilities))

    @property
    def rank_deficient(self) -> list[Support]:
        return [s for s, e in zip(self.supports, self.energies) if not np.isfinite(e)]

    def mean_energy(self) -> float:
        ok = self.probabilities > 0
        return float(self.probabilities[ok] @ self.energies[ok])

    def as_dict(self) -> dict[Support, float]:
        return dict(zip(self.supports, self.probabilities))


def enumerate_boltzmann(instance: Instance, k: int, beta: float,
                        cap: int = ENUM_CAP) -> BoltzmannTable:
    """Exact distribution P(c) proportional to exp(-beta * E(c)) over size-k supports.

    Normalised in the log domain.  Rank-deficient supports carry zero
    probability, the same state space the sampler walks on.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    supports, es = zip(*energies(instance, k, cap))
    es = np.asarray(es, dtype=np.float64)
    logw = np.where(np.isfinite(es), -beta * np.where(np.isfinite(es), es, 0.0), -np.inf)
    log_g = float(logsumexp(logw))
    return BoltzmannTable(float(beta), list(supports), es, np.exp(logw - log_g), log_g)


def total_variation(p: dict, q: dict) -> float:
    """0.5 * sum |p - q| over the union of keys."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)

"""Pair-flip Metropolis sampling over K-column supports, and simulated annealing.

A move removes one column from the support and adds one from outside it, so
the support size never changes.  A proposal is accepted with probability
``min(1, exp(-beta * dE))``; proposals whose incoming column is linearly
dependent on the rest are rejected outright (their energy is taken as +inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateSupport, DriftExceeded, InitializationFailed, RankDeficient
from .linalg import (
    DRIFT_FLOOR,
    DRIFT_TOL,
    REFRESH_EVERY,
    Instance,
    LsState,
    Support,
    solve_restricted,
    swap_update,
)
from .rng import as_rng

INIT_ATTEMPTS = 100


@dataclass(frozen=True)
class Schedule:
    """Geometric annealing plan: ``beta_a = beta0 + ratio**(a-1) - 1``, a = 1..stages.

    ``sweeps_per_stage`` is the average number of proposals per column spent
    at each temperature, i.e. ``round(sweeps_per_stage * N)`` steps per stage.
    """

    beta0: float = 1e-8
    ratio: float = 1.1
    stages: int = 100
    sweeps_per_stage: float = 5.0

    def __post_init__(self):
        if not self.beta0 >= 0:
            raise ValueError(f"beta0 must be nonnegative, got {self.beta0}")
        if not self.ratio > 1:
            raise ValueError(f"ratio must exceed 1, got {self.ratio}")
        if int(self.stages) != self.stages or self.stages < 1:
            raise ValueError(f"stages must be a positive integer, got {self.stages}")
        if not self.sweeps_per_stage > 0:
            raise ValueError(f"sweeps_per_stage must be positive, got {self.sweeps_per_stage}")

    def betas(self) -> np.ndarray:
        a = np.arange(self.stages, dtype=np.float64)
        return self.beta0 + (np.power(self.ratio, a) - 1.0)

    @property
    def beta_max(self) -> float:
        return self.beta0 + (self.ratio ** (self.stages - 1) - 1.0)

    def steps_per_stage(self, n: int) -> int:
        return int(round(self.sweeps_per_stage * n))


@dataclass
class StageStats:
    beta: float
    steps: int
    accepted: int
    mean_eps: float
    min_eps: float
    visits: np.ndarray | None = field(default=None, repr=False)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.steps if self.steps else 0.0


@dataclass
class SaResult:
    best_support: Support
    best_rss: float
    final_support: Support
    trace: list[tuple[float, float]]
    accepted: int
    proposed: int
    best_state: LsState = field(repr=False)
    stage_min_eps: list[float] = field(default_factory=list, repr=False)
    stage_acceptance: list[float] = field(default_factory=list, repr=False)
    best_so_far: list[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "best_support": list(self.best_support.ones),
            "best_rss": self.best_rss,
            "best_eps": self.best_rss / self.best_state.m,
            "coefficients": self.best_state.coeffs.tolist(),
            "final_support": list(self.final_support.ones),
            "accepted": self.accepted,
            "proposed": self.proposed,
            "trace": [{"beta": b, "eps": e} for b, e in self.trace],
        }


def decode_mask(mask: int) -> Support:
    """Support encoded as a bitmask by the recording chain."""
    mask = int(mask)
    return Support(tuple(i for i in range(mask.bit_length()) if mask >> i & 1))


def visit_frequencies(visits: np.ndarray) -> dict[Support, float]:
    """Empirical distribution of recorded supports."""
    masks, counts = np.unique(visits, return_counts=True)
    total = counts.sum()
    return {decode_mask(mk): c / total for mk, c in zip(masks, counts)}


def _check_flippable(k: int, n: int) -> None:
    if k == 0 or k >= n:
        raise DegenerateSupport(f"no pair flip exists for K={k}, N={n}")


def propose_pair_flip(support: Support, n: int, rng) -> tuple[int, int]:
    """Uniform column to drop and, independently, uniform column to add."""
    _check_flippable(support.k, n)
    zeros = support.zeros(n)
    i = support.ones[rng.integers(support.k)]
    j = zeros[rng.integers(len(zeros))]
    return int(i), int(j)


def metropolis_step(state: LsState, beta: float, instance: Instance, rng) -> tuple[LsState, bool]:
    out_idx, in_idx = propose_pair_flip(state.support, instance.n, rng)
    u = rng.random()
    try:
        new = swap_update(state, out_idx, in_idx, instance)
    except RankDeficient:
        return state, False
    de = new.rss - state.rss
    if de <= 0 or u < math.exp(-beta * de):
        return new, True
    return state, False


class _Chain:
    """Mutable chain state handed to the compiled kernel."""

    def __init__(self, state: LsState, instance: Instance, refresh_every: int):
        k = state.k
        _check_flippable(k, instance.n)
        self.instance = instance
        self.k = k
        self.R = np.array(state.factor, dtype=np.float64, order="C")
        self.z = np.array(state.qty, dtype=np.float64)
        self.cols = np.array(state.columns, dtype=np.int64)
        self.zeros = state.support.zeros(instance.n).astype(np.int64)
        self.best_cols = self.cols.copy()
        self.refresh_every = int(refresh_every)
        self.since = 0
        self.accepted = 0
        self.proposed = 0
        self.best_rss = math.inf
        self.best_support = state.support

    def run(self, betas: np.ndarray, steps: int, rng, record: bool = False):
        inst = self.instance
        total = steps * len(betas)
        outs = rng.integers(0, self.k, size=total)
        ins = rng.integers(0, inst.n - self.k, size=total)
        us = rng.random(total)
        mean = np.zeros(len(betas))
        mn = np.zeros(len(betas))
        acc = np.zeros(len(betas), dtype=np.int64)
        visits = np.zeros(total if record else 0, dtype=np.int64)
        rss, best, accepted, self.since, status = _kernels.run_chain(
            inst.a, inst.aty, inst.colsq, inst.yy, self.R, self.z, self.cols, self.zeros,
            self.k, betas, steps, outs, ins, us, self.refresh_every, self.since,
            DRIFT_TOL, DRIFT_FLOOR * 0.5 * inst.yy, mean, mn, acc, self.best_cols, visits,
        )
        if status:
            raise DriftExceeded(f"maintained RSS drifted beyond {DRIFT_TOL:g} relative")
        self.accepted += int(accepted)
        self.proposed += total
        if best < self.best_rss:
            self.best_rss = best
            self.best_support = Support(tuple(self.best_cols))
        return mean, mn, acc, visits

    def state(self) -> LsState:
        return LsState(self.cols.copy(), self.R.copy(), self.z.copy(),
                       _kernels.energy(self.instance.yy, self.z, self.k), self.instance.m)


def run_fixed_beta(state: LsState, beta: float, sweeps: float, instance: Instance, rng,
                   record: bool = False, refresh_every: int = REFRESH_EVERY
                   ) -> tuple[LsState, StageStats]:
    """Run ``round(sweeps * N)`` Metropolis steps at inverse temperature ``beta``.

    With ``record=True`` the support after every step is kept in
    ``StageStats.visits`` as a bitmask (see :func:`decode_mask`; needs N <= 62).
    """
    rng = as_rng(rng)
    steps = int(round(sweeps * instance.n))
    if steps == 0:
        return state, StageStats(beta, 0, 0, state.rss_per_component, state.rss_per_component,
                                 np.zeros(0, dtype=np.int64) if record else None)
    if record and instance.n > 62:
        raise ValueError("recording visits needs N <= 62")
    chain = _Chain(state, instance, refresh_every)
    mean, mn, acc, visits = chain.run(np.array([float(beta)]), steps, rng, record)
    m = instance.m
    stats = StageStats(float(beta), steps, int(acc[0]), mean[0] / m, mn[0] / m,
                       visits if record else None)
    return chain.state(), stats


def random_support(instance: Instance, k: int, rng) -> LsState:
    """Uniform random K-subset, redrawn until its columns are independent."""
    for _ in range(INIT_ATTEMPTS):
        cols = rng.choice(instance.n, size=k, replace=False)
        try:
            return solve_restricted(instance, Support.of(cols))
        except RankDeficient:
            continue
    raise InitializationFailed(
        f"no full-rank support of size {k} found in {INIT_ATTEMPTS} random draws"
    )


def anneal(instance: Instance, k: int, schedule: Schedule | None = None,
           init: Support | None = None, rng=None,
           refresh_every: int = REFRESH_EVERY) -> SaResult:
    """Simulated annealing for the best K-column least-squares fit.

    Runs the pair-flip chain at each inverse temperature of ``schedule`` in
    turn and keeps the lowest-energy support ever visited.  The trace holds
    one ``(beta, mean RSS per component)`` pair per stage.
    """
    schedule = schedule or Schedule()
    rng = as_rng(rng)
    if k > instance.m:
        raise ValueError(f"K={k} exceeds M={instance.m}; K <= M is required")
    _check_flippable(k, instance.n)
    state = solve_restricted(instance, init) if init is not None else random_support(instance, k, rng)
    if state.k != k:
        raise ValueError(f"initial support has {state.k} columns, expected {k}")

    chain = _Chain(state, instance, refresh_every)
    chain.best_rss = state.rss
    steps = schedule.steps_per_stage(instance.n)
    trace, stage_min, stage_acc, best_so_far = [], [], [], []
    for beta in schedule.betas():
        mean, mn, acc, _ = chain.run(np.array([beta]), steps, rng)
        trace.append((float(beta), float(mean[0]) / instance.m))
        stage_min.append(float(mn[0]) / instance.m)
        stage_acc.append(int(acc[0]) / steps if steps else 0.0)
        best_so_far.append(chain.best_rss)

    best_state = solve_restricted(instance, chain.best_support)
    return SaResult(
        best_support=chain.best_support,
        best_rss=best_state.rss,
        final_support=Support(tuple(chain.cols)),
        trace=trace,
        accepted=chain.accepted,
        proposed=chain.proposed,
        best_state=best_state,
        stage_min_eps=stage_min,
        stage_acceptance=stage_acc,
        best_so_far=best_so_far,
    )


def anneal_restarts(instance: Instance, k: int, schedule: Schedule | None, rngs) -> SaResult:
    """Independent annealing runs, one per generator; lowest best_rss wins (first on ties)."""
    best = None
    for rng in rngs:
        res = anneal(instance, k, schedule, rng=rng)
        if best is None or res.best_rss < best.best_rss:
            best = res
    if best is None:
        raise ValueError("need at least one restart")
    return best

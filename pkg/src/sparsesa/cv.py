"""Cross-validated choice of the number of columns K.

For each K and each fold, simulated annealing picks a support on the training
rows, the coefficients are refit on those rows, and the held-out rows are
predicted.  The CV error is ``sum of squared held-out errors / (2 * rows)``,
which for leave-one-out is the usual LOO error.  K is chosen as the argmin
over the tested values.

``common_support_looe`` is a diagnostic only: it scores one fixed support with
closed-form leave-one-out residuals.  Because the support is shared by every
held-out row, it tends to keep falling as K grows and cannot be used to pick
K or to recover the true support.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import LeverageSingular, RankDeficient, SparseSAError
from .linalg import Instance, Support, solve_restricted
from .rng import make_rng
from .sampler import Schedule, anneal_restarts

logger = logging.getLogger(__name__)

LEVERAGE_LIMIT = 1.0 - 1e-12


@dataclass
class FoldPlan:
    folds: list[tuple[np.ndarray, np.ndarray]]
    kind: str

    def __len__(self):
        return len(self.folds)

    @property
    def min_train(self) -> int:
        return min(len(tr) for tr, _ in self.folds)


def parse_fold_kind(kind) -> int | None:
    """``"loo"`` -> None, ``"k:5"``/``5`` -> 5."""
    if isinstance(kind, int):
        return kind
    text = str(kind).strip().lower()
    if text == "loo":
        return None
    if text.startswith("k:"):
        text = text[2:]
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"fold kind must be 'loo' or 'k:<n>', got {kind!r}") from None


def make_folds(m: int, kind="loo", seed: int = 0) -> FoldPlan:
    """Partition rows 0..m-1 into validation folds.

    k-fold plans shuffle the rows with the ``(seed,)`` stream and cut them into
    contiguous blocks whose sizes differ by at most one.
    """
    if m < 2:
        raise ValueError("cross validation needs at least two rows")
    nfold = parse_fold_kind(kind)
    rows = np.arange(m)
    if nfold is None:
        blocks = [np.array([i]) for i in rows]
        name = "loo"
    else:
        if not 2 <= nfold <= m:
            raise ValueError(f"k-fold needs 2 <= k <= m, got k={nfold}, m={m}")
        perm = make_rng(seed).permutation(m)
        blocks = [np.sort(b) for b in np.array_split(perm, nfold)]
        name = f"k:{nfold}"
    folds = [(np.setdiff1d(rows, b), b) for b in blocks]
    return FoldPlan(folds, name)


@dataclass
class CellResult:
    k: int
    fold: int
    support: Support | None
    sq_error: float
    n_val: int
    error: str | None = None


def _run_cell(instance, k, schedule, plan, fold, base_seed, restarts) -> CellResult:
    train, val = plan.folds[fold]
    try:
        sub = instance.rows(train)
        rngs = [make_rng(base_seed, k, fold, r) for r in range(restarts)]
        res = anneal_restarts(sub, k, schedule, rngs)
        fit = solve_restricted(sub, res.best_support)
        cols = list(res.best_support.ones)
        err = instance.y[val] - instance.a[np.ix_(val, cols)] @ fit.coeffs
        return CellResult(k, fold, res.best_support, float(err @ err), len(val))
    except SparseSAError as exc:
        logger.warning("K=%d fold %d failed: %s", k, fold, exc)
        return CellResult(k, fold, None, float("nan"), len(val), f"fold {fold}: {exc}")


def _check_k(instance, k, plan):
    if not 1 <= k <= min(plan.min_train, instance.n - 1):
        raise ValueError(
            f"K={k} must satisfy 1 <= K <= min(smallest training fold = {plan.min_train}, N-1 = {instance.n - 1})"
        )


def _run_cells(instance, cells, schedule, plan, base_seed, restarts, threads):
    def work(cell):
        return _run_cell(instance, cell[0], schedule, plan, cell[1], base_seed, restarts)

    threads = threads or os.cpu_count() or 1
    if threads == 1:
        return [work(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, cells))


def _looe(results: list[CellResult]) -> float:
    ok = [r for r in results if r.error is None]
    if not ok:
        return float("nan")
    return sum(r.sq_error for r in ok) / (2.0 * sum(r.n_val for r in ok))


def cv_error(instance: Instance, k: int, schedule: Schedule | None, plan: FoldPlan,
             base_seed: int = 0, restarts: int = 1, threads: int | None = 1
             ) -> tuple[float, list[Support | None]]:
    """CV error at a single K, and the support chosen in each fold (None if it failed)."""
    _check_k(instance, k, plan)
    cells = [(k, f) for f in range(len(plan))]
    results = _run_cells(instance, cells, schedule, plan, base_seed, restarts, threads)
    return _looe(results), [r.support for r in results]


def selection_frequency(per_fold_supports) -> dict[int, int]:
    """How many folds selected each column, most frequent first (ties by index)."""
    counts: dict[int, int] = {}
    for s in per_fold_supports:
        if s is None:
            continue
        for i in s:
            counts[i] = counts.get(i, 0) + 1
    return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))


def top_selected(freqs: dict[int, int], t: int = 5) -> list[tuple[int | None, int]]:
    """First ``t`` entries of a frequency table, padded with ``(None, 0)``."""
    items = list(freqs.items())[:t]
    return items + [(None, 0)] * (t - len(items))


@dataclass
class CvReport:
    k_values: list[int]
    looe: dict[int, float]
    per_fold_supports: dict[int, list[Support | None]]
    frequencies: dict[int, dict[int, int]]
    best_k: int
    fold_kind: str
    base_seed: int
    restarts: int
    rng_seeds: dict[int, list[list[int]]] = field(default_factory=dict)
    failures: dict[int, list[str]] = field(default_factory=dict)

    @property
    def n_folds(self) -> int:
        return len(next(iter(self.per_fold_supports.values())))

    def to_dict(self) -> dict:
        return {
            "k_values": list(self.k_values),
            "best_k": self.best_k,
            "fold_kind": self.fold_kind,
            "base_seed": self.base_seed,
            "restarts": self.restarts,
            "looe": {str(k): v for k, v in self.looe.items()},
            "per_fold_supports": {
                str(k): [None if s is None else list(s.ones) for s in v]
                for k, v in self.per_fold_supports.items()
            },
            "frequencies": {
                str(k): [[i, c] for i, c in v.items()] for k, v in self.frequencies.items()
            },
            "rng_seeds": {str(k): v for k, v in self.rng_seeds.items()},
            "failures": {str(k): v for k, v in self.failures.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CvReport":
        return cls(
            k_values=[int(k) for k in d["k_values"]],
            looe={int(k): float("nan") if v is None else float(v) for k, v in d["looe"].items()},
            per_fold_supports={
                int(k): [None if s is None else Support(tuple(s)) for s in v]
                for k, v in d["per_fold_supports"].items()
            },
            frequencies={int(k): {int(i): int(c) for i, c in v} for k, v in d["frequencies"].items()},
            best_k=int(d["best_k"]),
            fold_kind=d["fold_kind"],
            base_seed=int(d["base_seed"]),
            restarts=int(d["restarts"]),
            rng_seeds={int(k): [list(x) for x in v] for k, v in d.get("rng_seeds", {}).items()},
            failures={int(k): list(v) for k, v in d.get("failures", {}).items()},
        )


def sweep_k(instance: Instance, s_k, schedule: Schedule | None, plan: FoldPlan,
            base_seed: int = 0, restarts: int = 1, threads: int | None = None) -> CvReport:
    """CV error for every K in ``s_k``; best_k is the argmin (smallest K on ties).

    The (K, fold) cells are independent and run on a thread pool; each draws
    from its own ``(base_seed, K, fold, restart)`` stream, so the report does
    not depend on the thread count.
    """
    k_values = sorted({int(k) for k in s_k})
    if not k_values:
        raise ValueError("empty set of K values")
    for k in k_values:
        _check_k(instance, k, plan)
    cells = [(k, f) for k in k_values for f in range(len(plan))]
    results = _run_cells(instance, cells, schedule, plan, base_seed, restarts, threads)

    looe, supports, freqs, seeds, failures = {}, {}, {}, {}, {}
    for k in k_values:
        rs = [r for r in results if r.k == k]
        looe[k] = _looe(rs)
        supports[k] = [r.support for r in rs]
        freqs[k] = selection_frequency(supports[k])
        seeds[k] = [[base_seed, k, r.fold] for r in rs]
        bad = [r.error for r in rs if r.error is not None]
        if bad:
            failures[k] = bad
    finite = [k for k in k_values if np.isfinite(looe[k])]
    if not finite:
        raise SparseSAError("every (K, fold) cell failed")
    best_k = min(finite, key=lambda k: (looe[k], k))
    return CvReport(k_values, looe, supports, freqs, best_k, plan.kind, base_seed,
                    restarts, seeds, failures)


def common_support_looe(instance: Instance, support: Support) -> float:
    """Leave-one-out error with one support shared by all held-out rows.

    Uses the fixed-design identity: the LOO residual of row mu is
    ``e_mu / (1 - h_mu)``, with ``h`` the diagonal of the hat matrix.
    """
    if not isinstance(support, Support):
        support = Support.of(support)
    if support.k > instance.m - 1:
        raise RankDeficient(f"K={support.k} leaves no held-out degree of freedom with M={instance.m}")
    state = solve_restricted(instance, support)
    cols = state.columns
    resid = instance.y - instance.a[:, list(support.ones)] @ state.coeffs
    if len(cols):
        u = solve_triangular(state.factor, instance.a[:, cols].T, trans="T")
        lev = np.einsum("ij,ij->j", u, u)
    else:
        lev = np.zeros(instance.m)
    if np.any(lev >= LEVERAGE_LIMIT):
        raise LeverageSingular(f"row {int(np.argmax(lev))} has leverage {lev.max():.15g}")
    loo = resid / (1.0 - lev)
    return float(loo @ loo) / (2.0 * instance.m)

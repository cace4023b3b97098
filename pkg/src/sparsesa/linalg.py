"""Restricted least squares on a column support.

A support is scored by the energy ``E = 0.5 * ||y - A_S x_S||^2`` of its best
fit.  States keep an upper-triangular factor ``R`` of the support's Gram matrix
(``R.T @ R = A_S.T @ A_S``) together with ``z = R^{-T} A_S.T y``, so that
exchanging one column for another costs O(MK + K^2): a Givens column deletion
followed by a triangular column append.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .errors import DimensionMismatch, DriftExceeded, RankDeficient

DRIFT_TOL = 1e-6
# Absolute slack on drift checks, as a fraction of 0.5*||y||^2.  Near-interpolating
# supports have RSS close to the rounding level of y.y - z.z.
DRIFT_FLOOR = 1e-12
REFRESH_EVERY = 256


@dataclass(frozen=True, eq=False)
class Instance:
    """Dense design matrix ``a`` (M x N) and response ``y`` (length M)."""

    a: np.ndarray
    y: np.ndarray
    aty: np.ndarray = field(init=False, repr=False)
    colsq: np.ndarray = field(init=False, repr=False)
    yy: float = field(init=False, repr=False)

    def __post_init__(self):
        a = np.asfortranarray(np.asarray(self.a, dtype=np.float64))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.float64))
        if a.ndim != 2 or y.ndim != 1:
            raise DimensionMismatch("a must be 2-D and y 1-D")
        if a.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"a has {a.shape[0]} rows but y has {y.shape[0]} entries")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise DimensionMismatch("need at least one row and one column")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(y))):
            raise ValueError("instance contains non-finite entries")
        a.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "aty", a.T @ y)
        object.__setattr__(self, "colsq", np.einsum("ij,ij->j", a, a))
        object.__setattr__(self, "yy", float(y @ y))

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    def rows(self, index) -> "Instance":
        """Sub-instance made of the given rows."""
        index = np.asarray(index)
        return Instance(self.a[index], self.y[index])


@dataclass(frozen=True)
class Support:
    """Sorted tuple of distinct column indices (the columns in use)."""

    ones: tuple[int, ...]

    def __post_init__(self):
        ones = tuple(sorted(int(i) for i in self.ones))
        if len(set(ones)) != len(ones):
            raise ValueError(f"duplicate indices in support {ones}")
        object.__setattr__(self, "ones", ones)

    @classmethod
    def of(cls, indices: Iterable[int]) -> "Support":
        return cls(tuple(indices))

    def __len__(self):
        return len(self.ones)

    def __iter__(self):
        return iter(self.ones)

    def __contains__(self, i):
        return i in self.ones

    @property
    def k(self) -> int:
        return len(self.ones)

    def zeros(self, n: int) -> np.ndarray:
        return np.setdiff1d(np.arange(n), np.asarray(self.ones, dtype=np.int64))

    def mask(self, n: int) -> np.ndarray:
        c = np.zeros(n, dtype=bool)
        c[list(self.ones)] = True
        return c

    def check(self, n: int) -> None:
        if self.ones and (self.ones[0] < 0 or self.ones[-1] >= n):
            raise DimensionMismatch(f"support {self.ones} out of range for N={n}")


@dataclass(frozen=True, eq=False)
class LsState:
    """Least-squares fit restricted to a support.

    ``columns`` is the factor order of the support; ``coeffs`` is aligned with
    the sorted ``support``.
    """

    columns: np.ndarray
    factor: np.ndarray
    qty: np.ndarray
    rss: float
    m: int

    @cached_property
    def coeffs(self) -> np.ndarray:
        return _back_solve(self.factor, self.qty)[np.argsort(self.columns)]

    @property
    def support(self) -> Support:
        return Support(tuple(self.columns))

    @property
    def k(self) -> int:
        return len(self.columns)

    @property
    def rss_per_component(self) -> float:
        return self.rss / self.m

    def full_coeffs(self, n: int) -> np.ndarray:
        """Length-n coefficient vector, exactly zero off the support."""
        x = np.zeros(n)
        x[list(self.support.ones)] = self.coeffs
        return x


def _back_solve(R, z):
    if len(z) == 0:
        return np.zeros(0)
    return solve_triangular(R, z, lower=False)


def _factor(instance: Instance, order: np.ndarray):
    k = len(order)
    R = np.zeros((k, k))
    z = np.zeros(k)
    cols = np.zeros(k, dtype=np.int64)
    w = np.zeros(max(k, 1))
    ok = _kernels.build(instance.a, instance.aty, instance.colsq, order, k, R, z, cols, w)
    return ok, R, z, cols


def solve_restricted(instance: Instance, support: Support | Iterable[int]) -> LsState:
    """Exact least-squares fit on ``support`` from scratch.

    The RSS is taken from the explicit residual rather than from the factor,
    so it stays accurate when the fit is nearly exact.
    """
    if not isinstance(support, Support):
        support = Support.of(support)
    support.check(instance.n)
    if support.k > instance.m:
        raise RankDeficient(f"K={support.k} columns cannot be independent with M={instance.m} rows")
    order = np.asarray(support.ones, dtype=np.int64)
    ok, R, z, cols = _factor(instance, order)
    if not ok:
        raise RankDeficient(f"Gram matrix of support {support.ones} is singular")
    resid = instance.y - instance.a[:, cols] @ _back_solve(R, z)
    return LsState(cols, R, z, 0.5 * float(resid @ resid), instance.m)


def swap_update(state: LsState, out_idx: int, in_idx: int, instance: Instance) -> LsState:
    """State for the support with ``out_idx`` exchanged for ``in_idx``."""
    cols = state.columns
    hits = np.flatnonzero(cols == out_idx)
    if hits.size != 1:
        raise IndexError(f"column {out_idx} is not in the support")
    if np.any(cols == in_idx):
        raise IndexError(f"column {in_idx} is already in the support")
    if not 0 <= in_idx < instance.n:
        raise IndexError(f"column {in_idx} out of range for N={instance.n}")
    k = len(cols)
    Rn = np.zeros((k, k))
    zn = np.zeros(k)
    colsn = np.zeros(k, dtype=np.int64)
    w = np.zeros(k)
    ok = _kernels.swap(instance.a, instance.aty, instance.colsq, state.factor, state.qty,
                       cols, k, int(hits[0]), int(in_idx), Rn, zn, colsn, w)
    if not ok:
        raise RankDeficient(f"column {in_idx} is dependent on the remaining support")
    return LsState(colsn, Rn, zn, _kernels.energy(instance.yy, zn, k), state.m)


def drifted(rss: float, fresh: float, yy: float, tol: float = DRIFT_TOL) -> bool:
    return abs(rss - fresh) > tol * fresh + DRIFT_FLOOR * 0.5 * yy


def refresh(state: LsState, instance: Instance, tol: float = DRIFT_TOL) -> LsState:
    """Re-solve on the same support; raise DriftExceeded if the RSS moved."""
    fresh = solve_restricted(instance, state.support)
    if drifted(state.rss, fresh.rss, instance.yy, tol):
        raise DriftExceeded(
            f"maintained RSS {state.rss!r} vs from-scratch {fresh.rss!r} "
            f"(relative tolerance {tol:g})"
        )
    return fresh

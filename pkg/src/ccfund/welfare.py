"""Welfare-optimal project subsets under the pooled budget.

Two exact solvers over the same objective: exhaustive subset enumeration and
a 0/1-knapsack dynamic program over quantized costs. They share one
deterministic tie-break so answers can be compared verbatim: highest value,
then fewest projects, then lexicographically smallest index list.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import SolverError
from .model import TOL, Instance

#: Exhaustive enumeration refuses more projects than this.
ENUM_GUARD_P = 25
#: Subset masks are enumerated in chunks of 2**_CHUNK_BITS.
_CHUNK_BITS = 18
#: Two subsets whose values differ by at most this are tied (enumeration).
TIE_TOL = 1e-9
#: Tie window inside the DP recursion; only float noise should land here.
_DP_TIE = 1e-12
#: The DP refuses tables larger than this many cells.
_DP_CELL_GUARD = 150_000_000


@dataclass(frozen=True)
class WelfareSolution:
    """A budget-feasible subset with its value, cost and a uniqueness flag."""

    subset: tuple[int, ...]
    welfare: float
    cost: float
    unique: bool


def _subset_stats(values: np.ndarray, costs: np.ndarray, subset: tuple[int, ...]):
    idx = list(subset)
    return float(values[idx].sum()), float(costs[idx].sum())


def solve_subset_bruteforce(values, costs, capacity: float) -> WelfareSolution:
    """Exhaustive argmax of subset value subject to subset cost <= capacity."""
    values = np.asarray(values, dtype=float)
    costs = np.asarray(costs, dtype=float)
    p = len(values)
    if p > ENUM_GUARD_P:
        raise SolverError(f"{p} projects exceed the enumeration guard of {ENUM_GUARD_P}")
    if p == 0:
        return WelfareSolution((), 0.0, 0.0, True)
    total = 1 << p
    chunk = 1 << _CHUNK_BITS
    js = np.arange(p)

    best = -np.inf
    for start in range(0, total, chunk):
        masks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = ((masks[:, None] >> js) & 1).astype(float)
        feas = bits @ costs <= capacity + TOL
        if feas.any():
            top = float((bits @ values)[feas].max())
            if top > best:
                best = top

    tie_count = 0
    min_pop = p + 1
    cand_masks: list[int] = []
    for start in range(0, total, chunk):
        masks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = ((masks[:, None] >> js) & 1).astype(float)
        sel = (bits @ costs <= capacity + TOL) & (bits @ values >= best - TIE_TOL)
        if not sel.any():
            continue
        tie_count += int(sel.sum())
        pops = bits[sel].sum(axis=1).astype(int)
        local_min = int(pops.min())
        if local_min < min_pop:
            min_pop = local_min
            cand_masks = []
        if local_min == min_pop:
            cand_masks.extend(int(m) for m in masks[sel][pops == min_pop])

    subsets = [tuple(int(j) for j in js[(m >> js) & 1 == 1]) for m in cand_masks]
    subset = min(subsets)
    welfare, cost = _subset_stats(values, costs, subset)
    return WelfareSolution(subset, welfare, cost, tie_count == 1)


def solve_subset_dp(values, costs, capacity: float, resolution: float) -> WelfareSolution:
    """Exact knapsack DP over quantized costs.

    Costs round up and the capacity rounds down, so the DP never admits a
    subset the continuous budget constraint would reject. Matches the
    enumeration on any instance whose costs sit clear of quantization
    boundaries.
    """
    if resolution <= 0:
        raise ValueError(f"resolution must be positive, got {resolution!r}")
    values = np.asarray(values, dtype=float)
    costs = np.asarray(costs, dtype=float)
    p = len(values)
    cap_q = max(int(np.floor(capacity / resolution + 1e-9)), 0)
    costs_q = np.ceil(costs / resolution - 1e-9).astype(np.int64)
    costs_q = np.maximum(costs_q, 1)
    cells = (p + 1) * (cap_q + 1)
    if cells > _DP_CELL_GUARD:
        raise SolverError(
            f"DP table needs {cells} cells for {p} projects at resolution {resolution}; "
            f"guard is {_DP_CELL_GUARD}"
        )
    width = cap_q + 1
    dps: list[np.ndarray] = [np.zeros(width)] * (p + 1)
    cnts: list[np.ndarray] = [np.zeros(width, dtype=np.int64)] * (p + 1)
    ways = np.ones(width, dtype=np.int64)
    for j in reversed(range(p)):
        dp_next, cnt_next = dps[j + 1], cnts[j + 1]
        dp_cur = dp_next.copy()
        cnt_cur = cnt_next.copy()
        ways_cur = ways.copy()
        c = int(costs_q[j])
        if c <= cap_q:
            seg = slice(c, None)
            incl = values[j] + dp_next[: width - c]
            excl = dp_next[seg]
            diff = incl - excl
            take = diff > _DP_TIE
            tie = np.abs(diff) <= _DP_TIE
            dp_cur[seg] = np.where(take, incl, excl)
            inc_cnt = cnt_next[: width - c] + 1
            exc_cnt = cnt_next[seg]
            cnt_cur[seg] = np.where(
                take, inc_cnt, np.where(tie, np.minimum(inc_cnt, exc_cnt), exc_cnt)
            )
            inc_ways = ways[: width - c]
            exc_ways = ways[seg]
            ways_cur[seg] = np.where(take, inc_ways, np.where(tie, inc_ways + exc_ways, exc_ways))
        dps[j], cnts[j], ways = dp_cur, cnt_cur, ways_cur

    subset: list[int] = []
    k = cap_q
    for j in range(p):
        c = int(costs_q[j])
        if c > k:
            continue
        incl = values[j] + dps[j + 1][k - c]
        excl = dps[j + 1][k]
        diff = incl - excl
        if diff > _DP_TIE:
            include = True
        elif abs(diff) <= _DP_TIE:
            include = cnts[j + 1][k - c] + 1 <= cnts[j + 1][k]
        else:
            include = False
        if include:
            subset.append(j)
            k -= c
    chosen = tuple(subset)
    welfare, cost = _subset_stats(values, costs, chosen)
    return WelfareSolution(chosen, welfare, cost, int(ways[cap_q]) == 1)


def _objective_values(instance: Instance, objective: str) -> np.ndarray:
    if objective == "welfare":
        return instance.vartheta - instance.targets
    if objective == "valuation":
        return instance.vartheta.copy()
    raise ValueError(f"unknown objective {objective!r}; expected 'welfare' or 'valuation'")


def solve_pstar_bruteforce(instance: Instance, objective: str = "welfare") -> WelfareSolution:
    """Optimal subset by exhaustive enumeration (up to 25 projects)."""
    values = _objective_values(instance, objective)
    return solve_subset_bruteforce(values, instance.targets, float(instance.budgets.sum()))


def solve_pstar_dp(
    instance: Instance, resolution: float = 0.01, objective: str = "welfare"
) -> WelfareSolution:
    """Optimal subset by exact knapsack DP at the given cost resolution."""
    values = _objective_values(instance, objective)
    return solve_subset_dp(values, instance.targets, float(instance.budgets.sum()), resolution)


def welfare_of(instance: Instance, subset: Sequence[int], objective: str = "welfare") -> float:
    """Objective value of a subset (welfare headroom by default)."""
    subset = tuple(subset)
    for j in subset:
        if not 0 <= j < instance.n_projects:
            raise ValueError(f"subset index {j} out of range for {instance.n_projects} projects")
    values = _objective_values(instance, objective)
    return float(values[list(subset)].sum())

"""Exact single-agent best responses on a discrete contribution grid.

Given what everyone else has already contributed, one agent chooses grid
multiples of a smallest unit ``delta`` to maximize funded utility plus refunds.
The exact solver is a grouped-choice knapsack over budget units; a full
enumeration serves as its oracle, and for sum-additive refund schemes a binary
knapsack over residual costs recovers the same optimum. A separate
demonstrator shows why the continuous problem can fail to have an optimum at
all: shaving an arbitrarily small amount off a pivotal contribution grabs
whole bonus pools, so the supremum is approached but never attained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .model import TOL, ContributionProfile, Instance, evaluate
from .refunds import RefundScheme, threshold_general
from .welfare import solve_subset_bruteforce

#: A project counts as funded once the shortfall is within this.
FUND_TOL = 1e-9
#: Utility gaps at most this wide count as ties for tie-breaking.
TIE_TOL = 1e-12
#: Guard on the number of budget grid units.
UNIT_GUARD = 1_000_000
#: Guard on the number of enumerated grid profiles.
ENUM_GUARD = 10_000_000


@dataclass(frozen=True, eq=False)
class ResidualView:
    """One agent's view of the game after everyone else has moved.

    ``remaining`` holds per-project shortfalls (target minus others' total,
    clamped at zero); a zero shortfall means the project is funded no matter
    what this agent does.
    """

    agent: int
    others_totals: np.ndarray  # (p,)
    remaining: np.ndarray  # (p,)
    budget: float
    valuations: np.ndarray  # (p,) this agent's row
    bonuses: np.ndarray  # (p,)
    scheme: RefundScheme

    def __post_init__(self):
        others = np.array(self.others_totals, dtype=float)
        remaining = np.array(self.remaining, dtype=float)
        valuations = np.array(self.valuations, dtype=float)
        bonuses = np.array(self.bonuses, dtype=float)
        if not (others.shape == remaining.shape == valuations.shape == bonuses.shape):
            raise ValueError("view vectors must share one length")
        if np.any(others < 0) or np.any(remaining < 0) or np.any(valuations < 0):
            raise ValueError("view vectors must be non-negative")
        if self.budget < 0:
            raise ValueError(f"budget must be non-negative, got {self.budget!r}")
        for arr in (others, remaining, valuations, bonuses):
            arr.setflags(write=False)
        object.__setattr__(self, "others_totals", others)
        object.__setattr__(self, "remaining", remaining)
        object.__setattr__(self, "valuations", valuations)
        object.__setattr__(self, "bonuses", bonuses)
        object.__setattr__(self, "budget", float(self.budget))

    @property
    def n_projects(self) -> int:
        return len(self.remaining)


@dataclass(frozen=True, eq=False)
class BestResponse:
    """A grid contribution vector with funding flags and its utility."""

    contributions: np.ndarray  # (p,), grid multiples
    funded: np.ndarray  # (p,) bool
    utility: float
    optimal: bool


def make_view(instance: Instance, profile, agent: int) -> ResidualView:
    """Build an agent's residual view from a full contribution matrix.

    The agent's own row in ``profile`` is ignored; only the other rows count
    toward the per-project totals.
    """
    if not 0 <= agent < instance.n_agents:
        raise ValueError(f"agent index {agent} out of range for {instance.n_agents} agents")
    if isinstance(profile, ContributionProfile):
        x = profile.contributions
    else:
        x = np.asarray(profile, dtype=float)
    if x.shape != instance.valuations.shape:
        raise ValueError(
            f"profile shape {x.shape} does not match instance shape {instance.valuations.shape}"
        )
    others = x.sum(axis=0) - x[agent]
    remaining = np.clip(instance.targets - others, 0.0, None)
    return ResidualView(
        agent=agent,
        others_totals=others,
        remaining=remaining,
        budget=float(instance.budgets[agent]),
        valuations=instance.valuations[agent].copy(),
        bonuses=instance.bonuses.copy(),
        scheme=instance.refund,
    )


def _grid_layout(view: ResidualView, delta: float) -> tuple[int, list[int]]:
    """Budget units and, per project, the units needed to fund it.

    Shortfalls round up to the grid, so a funding spend never leaves the
    project short; contributions below that stay strictly under the shortfall.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    budget_units = int(np.floor(view.budget / delta + 1e-9))
    if budget_units > UNIT_GUARD:
        raise SolverError(
            f"budget spans {budget_units} grid units, exceeding the guard of {UNIT_GUARD}"
        )
    fund_units = [
        0 if r <= FUND_TOL else int(np.ceil(r / delta - 1e-9)) for r in view.remaining
    ]
    return budget_units, fund_units


def _value_tables(
    view: ResidualView, delta: float, budget_units: int, fund_units: list[int]
) -> list[np.ndarray]:
    """Per-project value of spending b grid units, for b = 0..cap.

    Spending exactly the funding amount yields valuation minus spend; anything
    below yields the refund share with the agent's own money counted in the
    project total. Spending beyond the funding amount is dominated and is not
    tabulated.
    """
    tables = []
    for j, units in enumerate(fund_units):
        cap = min(units, budget_units)
        x = np.arange(cap + 1, dtype=float) * delta
        vals = np.asarray(
            view.scheme.share(x, view.bonuses[j], view.others_totals[j] + x), dtype=float
        )
        if units <= budget_units:
            vals[units] = view.valuations[j] - units * delta
        tables.append(vals)
    return tables


def _assemble(view, delta, chosen_units, fund_units, utility, optimal) -> BestResponse:
    chosen = np.asarray(chosen_units, dtype=np.int64)
    contributions = chosen * delta
    funded = np.array(
        [chosen[j] == fund_units[j] for j in range(len(fund_units))], dtype=bool
    )
    contributions.setflags(write=False)
    funded.setflags(write=False)
    return BestResponse(contributions, funded, float(utility), optimal)


def best_response_exact(view: ResidualView, delta: float) -> BestResponse:
    """Optimal grid response via a budget-indexed dynamic program.

    Ties resolve to the smallest total spend, then to money placed on the
    earliest project indices (matching the subset solver's preference for
    lower-indexed projects).
    """
    budget_units, fund_units = _grid_layout(view, delta)
    tables = _value_tables(view, delta, budget_units, fund_units)
    p = view.n_projects
    width = budget_units + 1

    util: list[np.ndarray] = [np.zeros(width)] * (p + 1)
    spend: list[np.ndarray] = [np.zeros(width, dtype=np.int64)] * (p + 1)
    for j in reversed(range(p)):
        t = tables[j]
        u_cur = t[0] + util[j + 1]
        s_cur = spend[j + 1].copy()
        for b in range(1, len(t)):
            cand_u = t[b] + util[j + 1][: width - b]
            cand_s = spend[j + 1][: width - b] + b
            seg_u = u_cur[b:]
            seg_s = s_cur[b:]
            better = cand_u > seg_u + TIE_TOL
            tie = np.abs(cand_u - seg_u) <= TIE_TOL
            u_cur[b:] = np.where(better, cand_u, seg_u)
            s_cur[b:] = np.where(
                better, cand_s, np.where(tie, np.minimum(cand_s, seg_s), seg_s)
            )
        util[j], spend[j] = u_cur, s_cur

    chosen = []
    k = budget_units
    for j in range(p):
        t = tables[j]
        target_u = util[j][k]
        target_s = spend[j][k]
        pick = -1
        for b in range(min(len(t) - 1, k), -1, -1):
            if (
                t[b] + util[j + 1][k - b] >= target_u - TIE_TOL
                and b + spend[j + 1][k - b] == target_s
            ):
                pick = b
                break
        if pick < 0:
            raise SolverError("internal error: best-response reconstruction failed")
        chosen.append(pick)
        k -= pick
    return _assemble(view, delta, chosen, fund_units, util[0][budget_units], True)


def best_response_bruteforce(view: ResidualView, delta: float) -> BestResponse:
    """Oracle: enumerate every feasible grid profile and take the argmax.

    Tie-break matches the exact solver: smallest spend, then money on the
    earliest projects (the last survivor in lexicographic enumeration order).
    """
    budget_units, fund_units = _grid_layout(view, delta)
    caps = [min(u, budget_units) for u in fund_units]
    sizes = [c + 1 for c in caps]
    total = int(np.prod([float(s) for s in sizes]))
    if total > ENUM_GUARD:
        raise SolverError(f"{total} grid profiles exceed the enumeration guard of {ENUM_GUARD}")
    tables = _value_tables(view, delta, budget_units, fund_units)

    util = tables[0].copy()
    spent = np.arange(sizes[0], dtype=np.int64)
    for j in range(1, view.n_projects):
        util = np.add.outer(util, tables[j]).ravel()
        spent = np.add.outer(spent, np.arange(sizes[j], dtype=np.int64)).ravel()
    feasible = spent <= budget_units
    best = util[feasible].max()
    cand = feasible & (util >= best - TIE_TOL)
    min_spent = spent[cand].min()
    cand &= spent == min_spent
    idx = int(np.flatnonzero(cand)[-1])
    chosen = np.unravel_index(idx, sizes)
    return _assemble(view, delta, list(chosen), fund_units, util[idx], True)


def response_utility(view: ResidualView, contributions) -> float:
    """Re-derive a response's utility straight from the utility definition.

    Independent of the solvers' value tables; used to cross-check them.
    """
    x = np.asarray(contributions, dtype=float)
    if x.shape != view.remaining.shape:
        raise ValueError("contribution vector length does not match the view")
    if np.any(x < 0):
        raise ValueError("contributions must be non-negative")
    if x.sum() > view.budget + TOL:
        raise ValueError(f"contributions {x.sum():.12g} exceed budget {view.budget:.12g}")
    total = 0.0
    for j in range(view.n_projects):
        if x[j] >= view.remaining[j] - FUND_TOL:
            total += view.valuations[j] - x[j]
        else:
            pool_total = view.others_totals[j] + x[j]
            if pool_total > 0.0:
                total += view.scheme.share(x[j], view.bonuses[j], pool_total)
    return total


def knapsack_form_oracle(view: ResidualView, delta: float = 0.01) -> BestResponse:
    """Best response for sum-additive schemes via a binary knapsack.

    Items are projects with cost equal to the shortfall and value equal to
    valuation minus shortfall minus the refund forgone by locking that money
    in; leftover budget earns its refund wherever it sits, so the objective
    needs no placement detail. The returned contributions fund the chosen
    projects exactly and spread what is left across the others on the grid,
    keeping each strictly under its shortfall.
    """
    if not view.scheme.sum_additive:
        raise ValueError(f"scheme {view.scheme.tag!r} is not sum-additive")
    r = view.remaining
    values = view.valuations - r - np.asarray(
        view.scheme.share(r, view.bonuses, np.maximum(r, 1.0)), dtype=float
    )
    solution = solve_subset_bruteforce(values, r, view.budget)
    chosen = set(solution.subset)

    budget_units, fund_units = _grid_layout(view, delta)
    chosen_units = [0] * view.n_projects
    spent_units = 0
    for j in solution.subset:
        chosen_units[j] = fund_units[j]
        spent_units += fund_units[j]
    if spent_units > budget_units:
        raise SolverError(
            "funding spends overflow the budget grid; the oracle needs "
            "grid-aligned shortfalls"
        )
    left = budget_units - spent_units
    for j in range(view.n_projects):
        if j in chosen or left <= 0:
            continue
        room = max(fund_units[j] - 1, 0)
        put = min(room, left)
        chosen_units[j] = put
        left -= put

    # Item values already subtract the refund forgone by funding, so the
    # objective is the knapsack value plus the refund of the whole budget.
    utility = solution.welfare + view.scheme.share(
        view.budget, view.bonuses[0], view.budget
    )
    return _assemble(view, delta, chosen_units, fund_units, utility, True)


@dataclass(frozen=True)
class DiscontinuityReport:
    """Evidence that the continuous best response has no maximizer.

    Deviation utilities grow strictly as the shaved amount shrinks, yet at
    zero the pivotal project funds and utility drops; the supremum is real but
    unattained.
    """

    epsilons: tuple[float, ...]
    deviation_utilities: tuple[float, ...]
    funded_utility: float
    limit_utility: float
    gap: float
    strictly_increasing: bool
    all_exceed_funded: bool
    sup_attained: bool


def demonstrate_nonexistence(instance: Instance, epsilons) -> DiscontinuityReport:
    """Play out the pivotal-agent deviation family on a symmetric fixture.

    Requires two identical agents, three identical projects, full-headroom
    bonus pools and budgets equal to the single-project threshold. Agent one
    sinks its whole budget into the first project; agent two either completes
    the funding or shaves ``eps`` off, parks ``eps/2`` in each other project,
    and collects their entire bonus pools.
    """
    epsilons = tuple(float(e) for e in epsilons)
    _require_identical_fixture(instance)
    if not epsilons or any(e <= 0 for e in epsilons):
        raise ValueError("epsilons must be positive")
    if any(a <= b for a, b in zip(epsilons, epsilons[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    g1, g2 = float(instance.budgets[0]), float(instance.budgets[1])
    if epsilons[0] >= g2:
        raise ValueError("epsilons must stay below the deviating agent's budget")

    def agent2_utility(eps: float) -> float:
        rows = np.array(
            [[g1, 0.0, 0.0], [g2 - eps, eps / 2.0, eps / 2.0]]
        )
        outcome = evaluate(instance, ContributionProfile(rows))
        return float(outcome.agent_utilities[1])

    funded_utility = agent2_utility(0.0)
    utilities = tuple(agent2_utility(e) for e in epsilons)
    limit_utility = agent2_utility(1e-12)
    increasing = all(a < b for a, b in zip(utilities, utilities[1:]))
    exceed = all(u > funded_utility for u in utilities)
    gap = limit_utility - funded_utility
    return DiscontinuityReport(
        epsilons=epsilons,
        deviation_utilities=utilities,
        funded_utility=funded_utility,
        limit_utility=limit_utility,
        gap=gap,
        strictly_increasing=increasing,
        all_exceed_funded=exceed,
        sup_attained=False,
    )


def _require_identical_fixture(instance: Instance) -> None:
    if instance.n_agents != 2 or instance.n_projects != 3:
        raise ValueError("fixture requires exactly 2 agents and 3 projects")
    theta = instance.valuations
    if np.ptp(theta) > TOL:
        raise ValueError("fixture requires identical valuations everywhere")
    if np.ptp(instance.targets) > TOL or np.ptp(instance.bonuses) > TOL:
        raise ValueError("fixture requires identical projects")
    headroom = instance.vartheta - instance.targets
    if np.any(np.abs(instance.bonuses - headroom) > TOL):
        raise ValueError("fixture requires bonuses equal to the welfare headroom")
    bar = threshold_general(
        instance.refund,
        float(theta[0, 0]),
        float(instance.targets[0]),
        float(instance.bonuses[0]),
    )
    if np.any(np.abs(instance.budgets - bar) > 1e-8):
        raise ValueError("fixture requires budgets equal to the single-project threshold")

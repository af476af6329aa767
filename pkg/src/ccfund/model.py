"""Core game types and outcome evaluation.

An :class:`Instance` bundles the projects (target costs, refund bonus pools),
the agents (budgets, per-project valuations) and the refund scheme in force.
A :class:`ContributionProfile` is what solvers and heuristics produce, and
:func:`evaluate` turns the pair into an :class:`Outcome` with funding flags,
per-agent utilities and social welfare.

All types are immutable after construction; evaluation is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from .refunds import RefundScheme

#: Absolute tolerance for funding, budget and bonus comparisons.
TOL = 1e-9


class BudgetStatus(Enum):
    """Whether the pooled budget covers the total target cost."""

    SURPLUS = "surplus"
    DEFICIT = "deficit"


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    """One crowdfunding game.

    Agents hold non-negative budgets and valuations; every project must have
    a positive target below its total valuation, and a positive bonus pool no
    larger than the welfare headroom (total valuation minus target). A single
    refund scheme applies to every project unless per-project overrides are
    supplied.
    """

    valuations: np.ndarray  # (n_agents, n_projects)
    budgets: np.ndarray  # (n_agents,)
    targets: np.ndarray  # (n_projects,)
    bonuses: np.ndarray  # (n_projects,)
    refund: "RefundScheme"
    per_project_refunds: tuple["RefundScheme", ...] | None = None

    def __post_init__(self):
        valuations = _frozen_array(self.valuations)
        budgets = _frozen_array(self.budgets)
        targets = _frozen_array(self.targets)
        bonuses = _frozen_array(self.bonuses)
        if valuations.ndim != 2:
            raise ValueError(f"valuations must be a matrix, got shape {valuations.shape}")
        n, p = valuations.shape
        if n < 1 or p < 1:
            raise ValueError(f"need at least one agent and one project, got {n}x{p}")
        if budgets.shape != (n,):
            raise ValueError(f"budgets shape {budgets.shape} does not match {n} agents")
        if targets.shape != (p,) or bonuses.shape != (p,):
            raise ValueError(
                f"targets/bonuses shapes {targets.shape}/{bonuses.shape} do not match {p} projects"
            )
        if np.any(valuations < 0):
            raise ValueError("valuations must be non-negative")
        if np.any(budgets < 0):
            raise ValueError("budgets must be non-negative")
        if np.any(targets <= 0):
            raise ValueError("targets must be positive")
        if np.any(bonuses <= 0):
            raise ValueError("bonuses must be positive")
        vartheta = valuations.sum(axis=0)
        if np.any(vartheta <= targets):
            j = int(np.argmax(vartheta <= targets))
            raise ValueError(
                f"project {j} has total valuation {vartheta[j]:.12g} not above its "
                f"target {targets[j]:.12g}"
            )
        if np.any(bonuses > vartheta - targets + TOL):
            j = int(np.argmax(bonuses > vartheta - targets + TOL))
            raise ValueError(
                f"project {j} bonus {bonuses[j]:.12g} exceeds welfare headroom "
                f"{vartheta[j] - targets[j]:.12g}"
            )
        if self.per_project_refunds is not None and len(self.per_project_refunds) != p:
            raise ValueError("per-project refund overrides must cover every project")
        object.__setattr__(self, "valuations", valuations)
        object.__setattr__(self, "budgets", budgets)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "bonuses", bonuses)
        object.__setattr__(self, "_vartheta", _frozen_array(vartheta))

    @property
    def n_agents(self) -> int:
        return self.valuations.shape[0]

    @property
    def n_projects(self) -> int:
        return self.valuations.shape[1]

    @property
    def vartheta(self) -> np.ndarray:
        """Total valuation per project."""
        return self._vartheta  # type: ignore[attr-defined]

    def scheme_for(self, j: int) -> "RefundScheme":
        if self.per_project_refunds is not None:
            return self.per_project_refunds[j]
        return self.refund


@dataclass(frozen=True, eq=False)
class ContributionProfile:
    """Matrix of per-agent, per-project contributions."""

    contributions: np.ndarray  # (n_agents, n_projects)

    def __post_init__(self):
        contributions = _frozen_array(self.contributions)
        if contributions.ndim != 2:
            raise ValueError(f"contributions must be a matrix, got shape {contributions.shape}")
        if np.any(contributions < 0):
            i, j = np.unravel_index(int(np.argmin(contributions)), contributions.shape)
            raise ValueError(
                f"contribution by agent {i} to project {j} is negative "
                f"({contributions[i, j]:.12g})"
            )
        object.__setattr__(self, "contributions", contributions)

    def validate_against(self, instance: Instance) -> None:
        """Raise if dimensions or budget feasibility fail for this instance."""
        if self.contributions.shape != instance.valuations.shape:
            raise ValueError(
                f"profile shape {self.contributions.shape} does not match instance "
                f"shape {instance.valuations.shape}"
            )
        rows = self.contributions.sum(axis=1)
        over = rows > instance.budgets + TOL
        if np.any(over):
            i = int(np.argmax(over))
            raise ValueError(
                f"agent {i} spends {rows[i]:.12g}, exceeding its budget "
                f"{instance.budgets[i]:.12g}"
            )


@dataclass(frozen=True, eq=False)
class Outcome:
    """Funding flags, utilities and social welfare for one evaluated profile."""

    funded: np.ndarray  # (p,) bool
    totals: np.ndarray  # (p,)
    agent_utilities: np.ndarray  # (n,)
    per_pair_utilities: np.ndarray  # (n, p)
    social_welfare: float


def evaluate(instance: Instance, profile: ContributionProfile) -> Outcome:
    """Evaluate a contribution profile.

    A project is funded when its total reaches the target (within tolerance).
    A funded project pays each agent valuation minus contribution; an unfunded
    project with any money in it pays refund shares; an untouched project pays
    nothing.
    """
    profile.validate_against(instance)
    x = profile.contributions
    totals = x.sum(axis=0)
    funded = totals >= instance.targets - TOL
    per_pair = np.zeros_like(x)
    for j in range(instance.n_projects):
        if funded[j]:
            per_pair[:, j] = instance.valuations[:, j] - x[:, j]
        elif totals[j] > 0.0:
            per_pair[:, j] = instance.scheme_for(j).share(
                x[:, j], instance.bonuses[j], totals[j]
            )
    welfare = float(((instance.vartheta - instance.targets) * funded).sum())
    totals = totals.copy()
    totals.setflags(write=False)
    per_pair.setflags(write=False)
    funded.setflags(write=False)
    utilities = per_pair.sum(axis=1)
    utilities.setflags(write=False)
    return Outcome(funded, totals, utilities, per_pair, welfare)


def check_budget_surplus(instance: Instance) -> BudgetStatus:
    """Surplus when the pooled budget covers the summed targets, else deficit."""
    if instance.budgets.sum() >= instance.targets.sum() - TOL:
        return BudgetStatus.SURPLUS
    return BudgetStatus.DEFICIT


def check_subset_feasibility(
    instance: Instance, subset: Sequence[int], thresholds: np.ndarray
) -> bool:
    """True when every agent can afford its thresholds across the subset."""
    subset = tuple(subset)
    if len(set(subset)) != len(subset):
        raise ValueError(f"subset {subset} contains duplicate project indices")
    for j in subset:
        if not 0 <= j < instance.n_projects:
            raise ValueError(f"subset index {j} out of range for {instance.n_projects} projects")
    if not subset:
        return True
    need = thresholds[:, list(subset)].sum(axis=1)
    return bool(np.all(instance.budgets >= need - TOL))

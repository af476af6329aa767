"""Contribution heuristics and the clamped play-out engine.

Five rules turn an agent's budget into intended contributions; the play-out
engine then walks agents in order and lets each contribute the minimum of its
intent and whatever the project still needs, so no project is ever overfunded
and every realized row stays within budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .model import ContributionProfile, Instance


class Heuristic(str, Enum):
    """Contribution rules agents can play."""

    SYMMETRIC = "symmetric"
    WEIGHTED = "weighted"
    GREEDY_THETA = "greedy-theta"
    GREEDY_VARTHETA = "greedy-vartheta"
    OPT_WELFARE = "opt-welfare"


HEURISTIC_NAMES = tuple(h.value for h in Heuristic)

_NEEDS_THRESHOLDS = {Heuristic.GREEDY_THETA, Heuristic.GREEDY_VARTHETA, Heuristic.OPT_WELFARE}


@dataclass(frozen=True)
class Assignment:
    """One heuristic per agent; deviators are whoever is not on the baseline."""

    heuristics: tuple[Heuristic, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "heuristics", tuple(Heuristic(h) for h in self.heuristics)
        )

    @property
    def deviator_mask(self) -> np.ndarray:
        return np.array([h != Heuristic.OPT_WELFARE for h in self.heuristics], dtype=bool)

    @classmethod
    def uniform(cls, heuristic: Heuristic, n_agents: int) -> "Assignment":
        return cls((Heuristic(heuristic),) * n_agents)

    @classmethod
    def with_deviators(
        cls, n_agents: int, deviant: Heuristic, deviators: Sequence[int]
    ) -> "Assignment":
        rules = [Heuristic.OPT_WELFARE] * n_agents
        for i in deviators:
            rules[i] = Heuristic(deviant)
        return cls(tuple(rules))


@dataclass(frozen=True)
class PlayOrder:
    """Agent processing order for the clamped play-out."""

    mode: str = "ascending"  # or "random"
    seed: int = 0

    def permutation(self, n_agents: int) -> np.ndarray:
        if self.mode == "ascending":
            return np.arange(n_agents)
        if self.mode == "random":
            return np.random.default_rng(self.seed).permutation(n_agents)
        raise ValueError(f"unknown play order {self.mode!r}")


def _prefix_capped(caps: np.ndarray, budgets: np.ndarray) -> np.ndarray:
    """Allocate each row's budget left to right, capping entries at ``caps``."""
    cum_before = np.concatenate(
        [np.zeros((caps.shape[0], 1)), np.cumsum(caps, axis=1)[:, :-1]], axis=1
    )
    return np.clip(budgets[:, None] - cum_before, 0.0, caps)


def _intent_rows(
    heuristic: Heuristic,
    instance: Instance,
    agents: np.ndarray,
    pstar: tuple[int, ...] | None,
    thresholds: np.ndarray | None,
) -> np.ndarray:
    theta = instance.valuations[agents]
    budgets = instance.budgets[agents]
    p = instance.n_projects

    if heuristic in _NEEDS_THRESHOLDS and thresholds is None:
        raise ValueError(f"{heuristic.value} needs a threshold matrix")

    if heuristic == Heuristic.SYMMETRIC:
        return np.minimum(theta, budgets[:, None] / p)

    if heuristic == Heuristic.WEIGHTED:
        row_sums = theta.sum(axis=1)
        safe = np.where(row_sums > 0.0, row_sums, 1.0)
        rows = budgets[:, None] * theta / safe[:, None]
        rows[row_sums <= 0.0] = 0.0
        return rows

    caps_full = thresholds[agents]

    if heuristic == Heuristic.GREEDY_THETA:
        order = np.argsort(-theta, axis=1, kind="stable")
        sorted_caps = np.take_along_axis(caps_full, order, axis=1)
        alloc = _prefix_capped(sorted_caps, budgets)
        rows = np.empty_like(alloc)
        np.put_along_axis(rows, order, alloc, axis=1)
        return rows

    if heuristic == Heuristic.GREEDY_VARTHETA:
        ratio = instance.vartheta / instance.targets
        order = np.argsort(-ratio, kind="stable")
        sorted_caps = caps_full[:, order]
        alloc = _prefix_capped(sorted_caps, budgets)
        rows = np.empty_like(alloc)
        rows[:, order] = alloc
        return rows

    if heuristic == Heuristic.OPT_WELFARE:
        if pstar is None:
            raise ValueError("opt-welfare needs the welfare-optimal subset")
        rows = np.zeros((len(agents), p))
        chosen = list(pstar)
        if chosen:
            alloc = _prefix_capped(caps_full[:, chosen], budgets)
            rows[:, chosen] = alloc
        leftover = np.maximum(budgets - rows.sum(axis=1), 0.0)
        rest = [j for j in range(p) if j not in set(chosen)]
        if rest:
            rows[:, rest] = (leftover / len(rest))[:, None]
        return rows

    raise ValueError(f"unknown heuristic {heuristic!r}")


def intent(
    heuristic: Heuristic,
    instance: Instance,
    agent: int,
    pstar: tuple[int, ...] | None = None,
    thresholds: np.ndarray | None = None,
) -> np.ndarray:
    """One agent's intended contributions under a heuristic.

    Intent rows never exceed the agent's budget; the play-out engine applies
    the per-project clamping afterwards.
    """
    if not 0 <= agent < instance.n_agents:
        raise ValueError(f"agent index {agent} out of range for {instance.n_agents} agents")
    rows = _intent_rows(Heuristic(heuristic), instance, np.array([agent]), pstar, thresholds)
    return rows[0]


def intent_matrix(
    instance: Instance,
    assignment: Assignment,
    pstar: tuple[int, ...] | None = None,
    thresholds: np.ndarray | None = None,
) -> np.ndarray:
    """Stack every agent's intent row according to the assignment."""
    if len(assignment.heuristics) != instance.n_agents:
        raise ValueError(
            f"assignment covers {len(assignment.heuristics)} agents, instance has "
            f"{instance.n_agents}"
        )
    rules = np.array([h.value for h in assignment.heuristics])
    out = np.zeros_like(instance.valuations)
    for heuristic in Heuristic:
        agents = np.flatnonzero(rules == heuristic.value)
        if len(agents):
            out[agents] = _intent_rows(heuristic, instance, agents, pstar, thresholds)
    return out


def clamp_play(
    intents: np.ndarray, targets: np.ndarray, permutation: np.ndarray | None = None
) -> np.ndarray:
    """Realize intents in agent order, never contributing past a target.

    Each agent's realized amount on a project is the minimum of its intent and
    the amount still missing, so per-project totals stop exactly at the target.
    """
    ordered = intents if permutation is None else intents[permutation]
    cum_before = np.concatenate(
        [np.zeros((1, ordered.shape[1])), np.cumsum(ordered, axis=0)[:-1]], axis=0
    )
    realized = np.minimum(ordered, np.maximum(targets[None, :] - cum_before, 0.0))
    if permutation is None:
        return realized
    out = np.empty_like(realized)
    out[permutation] = realized
    return out


def play(
    instance: Instance,
    assignment: Assignment,
    pstar: tuple[int, ...] | None = None,
    thresholds: np.ndarray | None = None,
    order: PlayOrder | None = None,
) -> ContributionProfile:
    """Play intents out into a feasible, never-overfunding profile."""
    intents = intent_matrix(instance, assignment, pstar, thresholds)
    permutation = None if order is None else order.permutation(instance.n_agents)
    if permutation is not None and (permutation == np.arange(instance.n_agents)).all():
        permutation = None
    realized = clamp_play(intents, instance.targets, permutation)
    return ContributionProfile(realized)

"""Refund schemes, monotonicity certification and indifference thresholds.

A refund scheme R(x, B, C) pays a contributor of an unfunded project a share
of the project's bonus pool B as a function of its own contribution x and the
project total C. Schemes whose share strictly grows with x make contributing
attractive even when funding fails; the contribution at which funded utility
and refund meet (the indifference threshold) caps what a rational agent will
ever put into a project.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import SolverError

if TYPE_CHECKING:
    from .model import Instance

PPR_TAG = "ppr"
LINEAR_ADDITIVE_TAG = "linear-additive"

#: Bisection stops once the bracket is narrower than this (absolute).
BISECTION_TOL = 1e-10
BISECTION_MAX_ITER = 200


class RefundScheme(ABC):
    """A named refund rule, optionally with a closed-form threshold."""

    tag: str = ""
    #: True when summing shares over projects equals the share of the summed
    #: contribution; the single-agent knapsack reduction requires this.
    sum_additive: bool = False

    @abstractmethod
    def share(self, x, bonus, total):
        """Refund for contributing ``x`` out of ``total`` with pool ``bonus``.

        Polymorphic over floats and numpy arrays, and deliberately unchecked;
        :func:`refund_share` is the validated entry point.
        """

    def closed_form_threshold(self, theta, target, bonus):
        """Exact indifference threshold, or ``None`` to fall back to bisection."""
        return None


@dataclass(frozen=True)
class PprRefund(RefundScheme):
    """Proportional refunds: each contributor receives an x/C share of the pool.

    Shares over an unfunded project with any positive total sum to the whole
    pool; a project nobody contributed to pays nothing.
    """

    tag = PPR_TAG

    def share(self, x, bonus, total):
        if isinstance(x, np.ndarray) or isinstance(total, np.ndarray):
            x = np.asarray(x, dtype=float)
            total = np.asarray(total, dtype=float)
            safe = np.where(total > 0.0, total, 1.0)
            return np.where(total > 0.0, x / safe * bonus, 0.0)
        if total <= 0.0:
            return 0.0
        return x / total * bonus

    def closed_form_threshold(self, theta, target, bonus):
        # With the pool total pinned at the provision point (C = target),
        # theta - x = (x / target) * bonus has this root.
        return target * theta / (bonus + target)


@dataclass(frozen=True)
class LinearAdditiveRefund(RefundScheme):
    """Refund linear in own contribution, independent of the project total.

    Splitting a sum of money across projects refunds the same as contributing
    it in one place, which is what the single-agent knapsack reduction needs.
    With the slope from :func:`default_linear_slope` the payout on an unfunded
    project stays below its pool as long as the project is never overfunded.
    """

    slope: float

    tag = LINEAR_ADDITIVE_TAG
    sum_additive = True

    def __post_init__(self):
        if not self.slope > 0.0:
            raise ValueError(f"linear refund slope must be positive, got {self.slope!r}")

    def share(self, x, bonus, total):
        return self.slope * x

    def closed_form_threshold(self, theta, target, bonus):
        # theta - x = slope * x
        return theta / (1.0 + self.slope)


def default_linear_slope(vartheta, targets) -> float:
    """Smallest bonus pool over largest total valuation (bounded payouts)."""
    vartheta = np.asarray(vartheta, dtype=float)
    targets = np.asarray(targets, dtype=float)
    return float(np.min(vartheta - targets) / np.max(vartheta))


def scheme_from_tag(tag: str, linear_slope: float | None = None) -> RefundScheme:
    if tag == PPR_TAG:
        return PprRefund()
    if tag == LINEAR_ADDITIVE_TAG:
        if linear_slope is None:
            raise ValueError("linear-additive refund requires a slope")
        return LinearAdditiveRefund(float(linear_slope))
    raise ValueError(f"unknown refund scheme {tag!r}")


def refund_share(scheme: RefundScheme, x, bonus, total):
    """Validated refund share; rejects negative contributions, pools or totals."""
    for name, value in (("contribution", x), ("bonus", bonus), ("total", total)):
        if np.any(np.asarray(value) < 0):
            raise ValueError(f"{name} must be non-negative, got {value!r}")
    return scheme.share(x, bonus, total)


@dataclass(frozen=True)
class GridSpec:
    """Probe grid for numeric monotonicity certification.

    Co-contributions stay positive: a sole contributor already holds the whole
    proportional pool, so along that degenerate boundary no scheme of that
    family can grow.
    """

    x_max: float = 10.0
    points: int = 256
    pool_sizes: tuple[float, ...] = (0.5, 1.0, 2.0)
    others_totals: tuple[float, ...] = (0.5, 2.0, 5.0)


@dataclass(frozen=True)
class CmReport:
    """Outcome of a contribution-monotonicity probe."""

    scheme_tag: str
    passed: bool
    min_forward_difference: float
    step: float
    pairs_checked: int
    first_violation: tuple[float, float, float] | None = None  # (x, bonus, others)


def certify_cm(scheme: RefundScheme, grid: GridSpec = GridSpec()) -> CmReport:
    """Check strict refund growth on a dense contribution grid.

    The project total tracks the probe (others' fixed total plus own x),
    matching how an agent actually moves along the refund curve. The report
    carries the minimum forward difference observed and the first grid point,
    if any, where the refund failed to increase.
    """
    if grid.points < 2 or grid.x_max <= 0.0:
        raise ValueError(f"degenerate grid: x_max={grid.x_max}, points={grid.points}")
    xs = np.linspace(grid.x_max / grid.points, grid.x_max, grid.points)
    step = float(xs[1] - xs[0])
    min_diff = np.inf
    first = None
    pairs = 0
    for bonus in grid.pool_sizes:
        for others in grid.others_totals:
            pairs += 1
            shares = np.asarray(scheme.share(xs, bonus, others + xs), dtype=float)
            diffs = np.diff(shares)
            low = float(diffs.min())
            if low < min_diff:
                min_diff = low
            if first is None and np.any(diffs <= 0.0):
                k = int(np.argmax(diffs <= 0.0))
                first = (float(xs[k]), float(bonus), float(others))
    return CmReport(scheme.tag, first is None and min_diff > 0.0, min_diff, step, pairs, first)


def threshold_ppr(theta: float, target: float, bonus: float) -> float:
    """Closed-form indifference point for proportional refunds."""
    if theta < 0 or target <= 0 or bonus <= 0:
        raise ValueError(
            f"need theta >= 0, target > 0, bonus > 0; got {theta!r}, {target!r}, {bonus!r}"
        )
    return target * theta / (bonus + target)


def threshold_general(
    scheme: RefundScheme,
    theta: float,
    target: float,
    bonus: float,
    others_total: float | None = None,
    tol: float = BISECTION_TOL,
    max_iter: int = BISECTION_MAX_ITER,
) -> float:
    """Solve theta - x = R(x, B, C(x)) for x in [0, theta] by bisection.

    With ``others_total`` unset, the project total is pinned at the provision
    point (C = target), the convention under which the proportional scheme's
    closed form is exact. Otherwise C(x) = others_total + x.
    """
    if theta < 0:
        raise ValueError(f"valuation must be non-negative, got {theta!r}")
    theta = float(theta)
    if theta == 0.0:
        return 0.0

    share = scheme.share
    if others_total is None:

        def gap(x: float) -> float:
            return theta - x - share(x, bonus, target)

    else:

        def gap(x: float) -> float:
            return theta - x - share(x, bonus, others_total + x)

    hi_gap = gap(theta)
    if hi_gap > 0.0:
        raise SolverError(
            f"no sign change on [0, {theta:.12g}]: gap(0)={theta:.12g}, "
            f"gap({theta:.12g})={hi_gap:.12g}"
        )
    lo, hi = 0.0, theta
    for _ in range(max_iter):
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    raise SolverError(
        f"bisection did not converge after {max_iter} iterations (bracket [{lo}, {hi}])"
    )


def threshold_matrix(valuations, targets, bonuses, scheme: RefundScheme) -> np.ndarray:
    """Per-(agent, project) indifference thresholds for one scheme.

    Uses the scheme's closed form column-wise where available, bisection
    elsewhere; both follow the provision-point convention.
    """
    valuations = np.asarray(valuations, dtype=float)
    targets = np.asarray(targets, dtype=float)
    bonuses = np.asarray(bonuses, dtype=float)
    n, p = valuations.shape
    out = np.empty((n, p), dtype=float)
    for j in range(p):
        cf = scheme.closed_form_threshold(valuations[:, j], float(targets[j]), float(bonuses[j]))
        if cf is not None:
            out[:, j] = cf
        else:
            out[:, j] = [
                threshold_general(scheme, float(t), float(targets[j]), float(bonuses[j]))
                for t in valuations[:, j]
            ]
    return out


def thresholds(instance: "Instance", scheme: RefundScheme | None = None) -> np.ndarray:
    """Threshold matrix for an instance, optionally under an override scheme.

    The override is what normalized-utility baselines use when an experiment
    runs a different refund rule than the baseline convention.
    """
    n, p = instance.valuations.shape
    out = np.empty((n, p), dtype=float)
    for j in range(p):
        sch = scheme if scheme is not None else instance.scheme_for(j)
        col = threshold_matrix(
            instance.valuations[:, j : j + 1],
            instance.targets[j : j + 1],
            instance.bonuses[j : j + 1],
            sch,
        )
        out[:, j] = col[:, 0]
    return out

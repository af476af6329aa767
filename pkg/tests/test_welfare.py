import itertools

import numpy as np
import pytest
from conftest import random_instance

from ccfund import (
    Instance,
    PprRefund,
    SolverError,
    solve_pstar_bruteforce,
    solve_pstar_dp,
    solve_subset_bruteforce,
    solve_subset_dp,
    welfare_of,
)


def reference_enumeration(values, costs, capacity):
    """Independent oracle: plain itertools enumeration with the shared tie-break."""
    p = len(values)
    best = None
    for r in range(p + 1):
        for combo in itertools.combinations(range(p), r):
            cost = sum(costs[j] for j in combo)
            if cost > capacity + 1e-9:
                continue
            welfare = sum(values[j] for j in combo)
            key = (-welfare, len(combo), combo)
            if best is None or key < best[0]:
                best = (key, combo, welfare, cost)
    return best[1], best[2], best[3]


class TestBruteforce:
    def test_hand_traced_example(self):
        # totals (10, 8, 6), targets (5, 6, 2), pooled budget 8:
        # affordable subsets peak at {first, third} with welfare 5 + 4 = 9
        inst = Instance(
            [[10.0, 8.0, 6.0]], [8.0], [5.0, 6.0, 2.0], [5.0, 2.0, 4.0], PprRefund()
        )
        sol = solve_pstar_bruteforce(inst)
        assert sol.subset == (0, 2)
        assert sol.welfare == pytest.approx(9.0)
        assert sol.cost == pytest.approx(7.0)
        assert sol.unique

    def test_nothing_affordable(self):
        inst = Instance([[10.0, 8.0]], [0.5], [5.0, 6.0], [5.0, 2.0], PprRefund())
        sol = solve_pstar_bruteforce(inst)
        assert sol.subset == ()
        assert sol.welfare == 0.0

    def test_worked_example_numbers(self):
        inst = Instance(
            [[10.9, 0.0], [1.089, 1.9]],
            [9.91, 0.99],
            [10.0, 0.99],
            [1.0, 0.91],
            PprRefund(),
        )
        sol = solve_pstar_bruteforce(inst)
        assert sol.subset == (0,)
        assert sol.welfare == pytest.approx(1.989)

    def test_enumeration_guard(self):
        with pytest.raises(SolverError, match="enumeration guard"):
            solve_subset_bruteforce(np.ones(26), np.ones(26), 30.0)

    def test_matches_reference_enumeration(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            p = int(rng.integers(1, 9))
            values = rng.uniform(0.1, 10.0, size=p)
            costs = rng.uniform(0.1, 10.0, size=p)
            capacity = float(rng.uniform(0.0, costs.sum()))
            sol = solve_subset_bruteforce(values, costs, capacity)
            subset, welfare, cost = reference_enumeration(values, costs, capacity)
            assert sol.subset == subset
            assert sol.welfare == pytest.approx(welfare, abs=1e-9)
            assert sol.cost == pytest.approx(cost, abs=1e-9)


class TestDp:
    def test_matches_bruteforce_on_hand_example(self):
        inst = Instance(
            [[10.0, 8.0, 6.0]], [8.0], [5.0, 6.0, 2.0], [5.0, 2.0, 4.0], PprRefund()
        )
        assert solve_pstar_dp(inst, 0.01) == solve_pstar_bruteforce(inst)

    def test_single_affordable_project(self):
        inst = Instance([[10.0]], [6.0], [5.0], [5.0], PprRefund())
        sol = solve_pstar_dp(inst, 0.01)
        assert sol.subset == (0,)

    def test_tie_break_picks_lowest_index(self):
        # identical values and costs, capacity admits exactly one project
        sol = solve_subset_dp(np.array([2.0, 2.0, 2.0]), np.array([3.0, 3.0, 3.0]), 3.0, 0.01)
        assert sol.subset == (0,)
        assert not sol.unique
        bf = solve_subset_bruteforce(np.array([2.0, 2.0, 2.0]), np.array([3.0, 3.0, 3.0]), 3.0)
        assert bf.subset == (0,)
        assert not bf.unique

    def test_cardinality_precedes_lexicographic(self):
        values = np.array([1.0, 1.0, 2.0])
        costs = np.array([1.0, 1.0, 2.0])
        for solver in (
            lambda: solve_subset_bruteforce(values, costs, 2.0),
            lambda: solve_subset_dp(values, costs, 2.0, 0.01),
        ):
            sol = solver()
            assert sol.subset == (2,)  # same welfare as {0, 1} but fewer projects
            assert not sol.unique

    def test_quantization_is_conservative(self):
        # cost 1.001 rounds up to 1.01 at resolution 0.01, so capacity 1.005 rejects it
        sol = solve_subset_dp(np.array([5.0]), np.array([1.001]), 1.005, 0.01)
        assert sol.subset == ()

    def test_memory_guard_reports_size(self):
        with pytest.raises(SolverError, match="cells"):
            solve_subset_dp(np.ones(3), np.ones(3), 1e9, 0.001)

    def test_randomized_oracle_equivalence(self):
        # costs sit on the quantization grid so rounding never flips
        # feasibility; values stay continuous
        rng = np.random.default_rng(9)
        for _ in range(500):
            p = int(rng.integers(1, 13))
            values = rng.uniform(0.1, 10.0, size=p)
            costs = rng.integers(50, 800, size=p) * 0.01
            capacity = float(rng.uniform(0.0, costs.sum() * 0.9))
            bf = solve_subset_bruteforce(values, costs, capacity)
            dp = solve_subset_dp(values, costs, capacity, 0.01)
            assert dp.subset == bf.subset
            assert dp.welfare == pytest.approx(bf.welfare, abs=1e-9)

    def test_tie_heavy_integer_equivalence(self):
        # small integer values and costs tie constantly, hammering the
        # canonical reconstruction (welfare, then cardinality, then index order)
        rng = np.random.default_rng(77)
        for _ in range(800):
            p = int(rng.integers(1, 9))
            values = rng.integers(1, 5, size=p).astype(float)
            costs = rng.integers(1, 5, size=p).astype(float)
            capacity = float(rng.integers(0, int(costs.sum()) + 2))
            bf = solve_subset_bruteforce(values, costs, capacity)
            dp = solve_subset_dp(values, costs, capacity, 0.5)
            assert bf.subset == dp.subset
            assert bf.welfare == pytest.approx(dp.welfare, abs=1e-9)
            assert bf.unique == dp.unique

    def test_monotone_in_budget(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            p = int(rng.integers(1, 9))
            values = rng.uniform(0.1, 10.0, size=p)
            costs = rng.uniform(0.5, 8.0, size=p)
            low = float(rng.uniform(0.0, costs.sum()))
            high = low + float(rng.uniform(0.0, costs.sum()))
            assert (
                solve_subset_bruteforce(values, costs, high).welfare
                >= solve_subset_bruteforce(values, costs, low).welfare - 1e-12
            )

    def test_surplus_funds_everything(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            inst = random_instance(rng)
            rich = Instance(
                inst.valuations,
                np.full(inst.n_agents, inst.targets.sum()),
                inst.targets,
                inst.bonuses,
                inst.refund,
            )
            sol = solve_pstar_bruteforce(rich)
            assert sol.subset == tuple(range(rich.n_projects))


class TestWelfareOf:
    def test_empty(self):
        inst = random_instance(np.random.default_rng(21))
        assert welfare_of(inst, ()) == 0.0

    def test_worked_example_value(self):
        inst = Instance(
            [[10.9, 0.0], [1.089, 1.9]],
            [9.91, 0.99],
            [10.0, 0.99],
            [1.0, 0.91],
            PprRefund(),
        )
        assert welfare_of(inst, (0,)) == pytest.approx(1.989)
        assert welfare_of(inst, (1,)) == pytest.approx(0.91)

    def test_additive_over_full_set(self):
        inst = random_instance(np.random.default_rng(23))
        full = welfare_of(inst, range(inst.n_projects))
        assert full == pytest.approx(float((inst.vartheta - inst.targets).sum()))

    def test_valuation_objective(self):
        inst = random_instance(np.random.default_rng(29))
        assert welfare_of(inst, (0,), objective="valuation") == pytest.approx(
            float(inst.vartheta[0])
        )

    def test_bad_index(self):
        inst = random_instance(np.random.default_rng(31))
        with pytest.raises(ValueError, match="out of range"):
            welfare_of(inst, (inst.n_projects,))

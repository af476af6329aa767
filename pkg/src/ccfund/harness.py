"""Monte-Carlo experiment harness.

Runs cells of (deviant heuristic, deviator fraction): every instance gets a
fresh random set of deviators playing the deviant rule while the rest play the
welfare-optimal baseline. Reports normalized social welfare (relative to the
budget-optimal subset) and normalized agent utility (relative to the
unconstrained proportional-refund play), split by deviator status. Instances
are shared across cells of one run so curve comparisons are paired, and every
random draw derives from the experiment seed, so reports are byte-stable.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .generators import SamplerConfig, sample_instance
from .heuristics import Heuristic, clamp_play, intent_matrix, Assignment, PlayOrder
from .model import ContributionProfile, Instance, Outcome, evaluate
from .refunds import PprRefund, thresholds

logger = logging.getLogger(__name__)

#: Metric denominators at or below this are undefined and excluded from means.
METRIC_TOL = 1e-9

CSV_HEADER = (
    "heuristic,alpha,instances,sw_n_mean,sw_n_se,au_n_mean,au_n_se,"
    "au_n_dev_mean,au_n_nondev_mean,excluded_cells,seed"
)

_DEFAULT_ALPHAS = tuple(round(0.1 * k, 1) for k in range(1, 11))
_DEFAULT_DEVIANTS = (
    Heuristic.SYMMETRIC,
    Heuristic.WEIGHTED,
    Heuristic.GREEDY_THETA,
    Heuristic.GREEDY_VARTHETA,
)
#: Entropy salt separating deviator draws from instance draws.
_DEVIATOR_SALT = 0x5EED
#: Instance count under the full-scale flag.
FULL_SCALE_INSTANCES = 100_000


def _default_sampler() -> SamplerConfig:
    # Bonuses strictly inside the headroom leave thresholds over-provisioned,
    # which is what lets the welfare curves decline smoothly instead of
    # collapsing at the first deviator.
    return SamplerConfig(bonus_fraction=0.9)


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol parameters for one experiment run."""

    sampler: SamplerConfig = field(default_factory=_default_sampler)
    alphas: tuple[float, ...] = _DEFAULT_ALPHAS
    deviant_heuristics: tuple[Heuristic, ...] = _DEFAULT_DEVIANTS
    instances_per_cell: int = 1000
    seed: int = 0
    play_order: str = "ascending"
    delta: float = 0.01
    include_control: bool = True
    matched_baseline: bool = False

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas or any(not 0.0 < a <= 1.0 for a in alphas):
            raise ValueError(f"alphas must sit inside (0, 1], got {alphas}")
        if list(alphas) != sorted(alphas):
            raise ValueError(f"alphas must be sorted ascending, got {alphas}")
        deviants = tuple(Heuristic(h) for h in self.deviant_heuristics)
        if Heuristic.OPT_WELFARE in deviants:
            raise ValueError("the baseline heuristic cannot be listed as a deviant")
        if self.instances_per_cell < 1:
            raise ValueError("instances_per_cell must be at least 1")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "deviant_heuristics", deviants)

    @property
    def cell_keys(self) -> tuple[tuple[Heuristic, float], ...]:
        rules = list(self.deviant_heuristics)
        if self.include_control:
            rules.append(Heuristic.OPT_WELFARE)
        return tuple((h, a) for h in rules for a in self.alphas)


@dataclass(frozen=True)
class CellStats:
    """Aggregates for one (heuristic, alpha) cell."""

    heuristic: str
    alpha: float
    instances: int
    sw_mean: float | None
    sw_se: float | None
    au_mean: float | None
    au_se: float | None
    au_dev_mean: float | None
    au_nondev_mean: float | None
    excluded: int
    seed: int
    # split-class standard errors ride along for series emission only; the
    # CSV schema stays fixed
    au_dev_se: float | None = None
    au_nondev_se: float | None = None


@dataclass(frozen=True)
class ExperimentReport:
    """All cell aggregates plus reproducibility metadata."""

    cells: tuple[CellStats, ...]
    seed: int
    config_digest: str
    package_version: str

    def to_csv_text(self) -> str:
        from .io import format_float

        def fmt(value) -> str:
            return "" if value is None else format_float(value)

        lines = [CSV_HEADER]
        for c in self.cells:
            lines.append(
                ",".join(
                    [
                        c.heuristic,
                        format_float(c.alpha),
                        str(c.instances),
                        fmt(c.sw_mean),
                        fmt(c.sw_se),
                        fmt(c.au_mean),
                        fmt(c.au_se),
                        fmt(c.au_dev_mean),
                        fmt(c.au_nondev_mean),
                        str(c.excluded),
                        str(c.seed),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def curve(self, heuristic: str, metric: str) -> tuple[list[float], list]:
        """Alpha grid and per-alpha values for one heuristic and metric."""
        picks = [c for c in self.cells if c.heuristic == heuristic]
        picks.sort(key=lambda c: c.alpha)
        return [c.alpha for c in picks], [getattr(c, metric) for c in picks]

    def write_series(self, directory) -> list[str]:
        """Emit one plot-ready JSON file per (metric, heuristic) curve."""
        from .io import dumps_canonical

        os.makedirs(directory, exist_ok=True)
        metrics = {
            "sw_n": ("sw_mean", "sw_se"),
            "au_n": ("au_mean", "au_se"),
            "au_n_deviators": ("au_dev_mean", "au_dev_se"),
            "au_n_nondeviators": ("au_nondev_mean", "au_nondev_se"),
        }
        names = sorted({c.heuristic for c in self.cells})
        written = []
        for metric, (attr, se_attr) in metrics.items():
            for name in names:
                alphas, values = self.curve(name, attr)
                payload = {
                    "metric": metric,
                    "heuristic": name,
                    "alpha": alphas,
                    "mean": values,
                    "se": self.curve(name, se_attr)[1],
                }
                path = os.path.join(directory, f"{metric}__{name}.json")
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write(dumps_canonical(payload) + "\n")
                written.append(path)
        return written


def sw_n(instance: Instance, outcome: Outcome, pstar_welfare: float) -> float | None:
    """Welfare relative to the optimum; None when the optimum carries none."""
    if pstar_welfare <= METRIC_TOL:
        logger.info("undefined normalized welfare: optimal welfare %.3g", pstar_welfare)
        return None
    return float(outcome.social_welfare / pstar_welfare)


def au_n(instance: Instance, outcome: Outcome, threshold_matrix: np.ndarray) -> np.ndarray:
    """Per-agent utility over the unconstrained-play baseline; NaN when undefined.

    The baseline is what each agent would earn if it could contribute its
    threshold everywhere and everything funded: valuation minus threshold,
    summed over projects.
    """
    baseline = (instance.valuations - threshold_matrix).sum(axis=1)
    defined = baseline > METRIC_TOL
    if not defined.all():
        logger.info("excluding %d agents with zero utility baseline", int((~defined).sum()))
    safe = np.where(defined, baseline, 1.0)
    return np.where(defined, outcome.agent_utilities / safe, np.nan)


def deviation_split(values: np.ndarray, deviator_mask: np.ndarray):
    """Mean metric over deviators and non-deviators; None for an empty class."""

    def side(mask: np.ndarray) -> float | None:
        picked = values[mask]
        picked = picked[~np.isnan(picked)]
        return float(picked.mean()) if len(picked) else None

    return side(deviator_mask), side(~deviator_mask)


@dataclass
class _Moments:
    total: float = 0.0
    square: float = 0.0
    count: int = 0

    def add_values(self, values: np.ndarray) -> None:
        values = values[~np.isnan(values)]
        if len(values):
            self.total += float(values.sum())
            self.square += float((values * values).sum())
            self.count += len(values)

    def add_one(self, value: float) -> None:
        self.total += value
        self.square += value * value
        self.count += 1

    @property
    def mean(self) -> float | None:
        return self.total / self.count if self.count else None

    @property
    def se(self) -> float | None:
        if self.count < 2:
            return None
        var = max(self.square - self.total * self.total / self.count, 0.0) / (self.count - 1)
        return math.sqrt(var) / math.sqrt(self.count)


@dataclass
class _CellAccumulator:
    sw: _Moments = field(default_factory=_Moments)
    au: _Moments = field(default_factory=_Moments)
    dev: _Moments = field(default_factory=_Moments)
    nondev: _Moments = field(default_factory=_Moments)
    excluded: int = 0


def _prepare_instance(cfg: ExperimentConfig, k: int):
    instance, solution = sample_instance(cfg.sampler, seed=(cfg.seed, k))
    thr = thresholds(instance)
    if cfg.matched_baseline or isinstance(cfg.sampler.refund, PprRefund):
        thr_base = thr
    else:
        thr_base = thresholds(instance, scheme=PprRefund())
    intents = {}
    rules = set(cfg.deviant_heuristics) | {Heuristic.OPT_WELFARE}
    for rule in rules:
        intents[rule] = intent_matrix(
            instance, Assignment.uniform(rule, instance.n_agents), solution.subset, thr
        )
    return instance, solution, thr_base, intents


def _instance_partials(cfg: ExperimentConfig, k: int) -> list[tuple]:
    """Per-cell metric contributions of instance ``k``; one tuple per cell."""
    instance, solution, thr_base, intents = _prepare_instance(cfg, k)
    n = instance.n_agents
    order = PlayOrder(cfg.play_order, seed=cfg.seed + k)
    permutation = order.permutation(n)
    if (permutation == np.arange(n)).all():
        permutation = None
    rows = []
    for ci, (rule, alpha) in enumerate(cfg.cell_keys):
        if rule == Heuristic.OPT_WELFARE:
            mask = np.zeros(n, dtype=bool)
            intent_rows = intents[rule]
        else:
            rng = np.random.default_rng(
                np.random.SeedSequence((cfg.seed, _DEVIATOR_SALT, ci, k))
            )
            deviators = rng.choice(n, size=int(math.floor(alpha * n + 1e-9)), replace=False)
            mask = np.zeros(n, dtype=bool)
            mask[deviators] = True
            intent_rows = np.where(mask[:, None], intents[rule], intents[Heuristic.OPT_WELFARE])
        realized = clamp_play(intent_rows, instance.targets, permutation)
        outcome = evaluate(instance, ContributionProfile(realized))
        sw = sw_n(instance, outcome, solution.welfare)
        au = au_n(instance, outcome, thr_base)
        dev_mean, nondev_mean = deviation_split(au, mask)
        rows.append((ci, sw, au, mask, dev_mean, nondev_mean))
    return rows


def _worker(args) -> list[tuple]:
    cfg, k = args
    reduced = []
    for ci, sw, au, mask, _, _ in _instance_partials(cfg, k):
        au_clean = au[~np.isnan(au)]
        dev = au[mask]
        dev = dev[~np.isnan(dev)]
        nondev = au[~mask]
        nondev = nondev[~np.isnan(nondev)]
        reduced.append(
            (
                ci,
                sw,
                float(au_clean.sum()),
                float((au_clean * au_clean).sum()),
                len(au_clean),
                float(dev.sum()),
                float((dev * dev).sum()),
                len(dev),
                float(nondev.sum()),
                float((nondev * nondev).sum()),
                len(nondev),
            )
        )
    return reduced


def _merge(acc: list[_CellAccumulator], reduced: list[tuple]) -> None:
    for ci, sw, au_s, au_q, au_n_, d_s, d_q, d_n, nd_s, nd_q, nd_n in reduced:
        cell = acc[ci]
        if sw is None:
            cell.excluded += 1
        else:
            cell.sw.add_one(sw)
        cell.au.total += au_s
        cell.au.square += au_q
        cell.au.count += au_n_
        cell.dev.total += d_s
        cell.dev.square += d_q
        cell.dev.count += d_n
        cell.nondev.total += nd_s
        cell.nondev.square += nd_q
        cell.nondev.count += nd_n


def worker_count() -> int:
    """Worker cap from the environment; 1 means run in-process."""
    raw = os.environ.get("CCFUND_THREADS", "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        return 1


def run_experiment(cfg: ExperimentConfig, full_scale: bool = False) -> ExperimentReport:
    """Run every cell and aggregate; byte-stable for a fixed (config, seed).

    Partial results merge in instance order no matter how many workers run,
    so parallel and sequential runs emit identical reports.
    """
    from . import __version__
    from .io import dumps_canonical, experiment_config_to_jsonable

    count = FULL_SCALE_INSTANCES if full_scale else cfg.instances_per_cell
    keys = cfg.cell_keys
    acc = [_CellAccumulator() for _ in keys]

    workers = worker_count()
    if workers > 1 and count > 1:
        import multiprocessing

        with multiprocessing.Pool(workers) as pool:
            for reduced in pool.imap(
                _worker, ((cfg, k) for k in range(count)), chunksize=32
            ):
                _merge(acc, reduced)
    else:
        for k in range(count):
            _merge(acc, _worker((cfg, k)))

    cells = []
    for (rule, alpha), cell in zip(keys, acc):
        cells.append(
            CellStats(
                heuristic=rule.value,
                alpha=alpha,
                instances=count,
                sw_mean=cell.sw.mean,
                sw_se=cell.sw.se,
                au_mean=cell.au.mean,
                au_se=cell.au.se,
                au_dev_mean=cell.dev.mean,
                au_nondev_mean=cell.nondev.mean,
                excluded=cell.excluded,
                seed=cfg.seed,
                au_dev_se=cell.dev.se,
                au_nondev_se=cell.nondev.se,
            )
        )
    digest = hashlib.sha256(
        dumps_canonical(experiment_config_to_jsonable(cfg)).encode()
    ).hexdigest()
    return ExperimentReport(tuple(cells), cfg.seed, digest, __version__)

"""Daily hotspot rankings and their hit rate, PAI, surveillance curve and AUC."""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from scipy import integrate, stats

from hyperspot.dataset import SpatioTemporalFrame
from hyperspot.helpers import ConfigError, DataError, MissingCellsError
from hyperspot.strings import translation

i18n = translation()

# Returned for days without any event, which are left out of every average
SKIP = None

MEAN = "mean"
POOLED = "pooled"
POOLINGS = (MEAN, POOLED)

DEFAULT_LEVELS = (0.05, 0.10, 0.20)
DEFAULT_CURVE_GRID = tuple(round(step / 100, 2) for step in range(1, 101))


def budget(fraction: float, n_cells: int) -> int:
    """Get the number of cells a coverage fraction allows, rounded down."""
    return int(math.floor(fraction * n_cells + 1e-9))


@dataclass(frozen=True)
class CoverageSpec:
    """A patrol budget as a fraction of the area and the matching number of cells."""

    fraction: float
    k_cells: int

    def __post_init__(self) -> None:
        """Validate the budget."""
        if not 0 < self.fraction <= 1:
            raise ConfigError(f"coverage must lie in (0, 1], got {self.fraction}")
        if self.k_cells < 1:
            raise DataError(f"coverage {self.fraction} selects no cell")

    @classmethod
    def for_cells(cls, fraction: float, n_cells: int) -> "CoverageSpec":
        """Get the budget of a fraction on a grid with the given eligible cell count."""
        return cls(fraction=float(fraction), k_cells=budget(fraction, n_cells))


@dataclass(frozen=True, eq=False)
class DailyRanking:
    """The cells of one bucket, ordered by descending score."""

    day: int
    cells: np.ndarray
    scores: np.ndarray

    def top(self, k: int) -> np.ndarray:
        """Get the k highest ranked cells."""
        return self.cells[:k]


def rank_cells(
    cell_ids: Sequence[int],
    scores: Sequence[float],
    day: int,
    expected_cells: Optional[Sequence[int]] = None,
) -> DailyRanking:
    """Order cells by descending score; ties go to the lower cell id."""
    cell_ids = np.asarray(cell_ids, dtype=np.int64)
    scores = np.asarray(scores, dtype=float)
    if cell_ids.shape != scores.shape:
        raise DataError(f"got {cell_ids.size} cells but {scores.size} scores")
    if np.unique(cell_ids).size != cell_ids.size:
        raise DataError(f"duplicate cell scores on day {day}")
    if np.isnan(scores).any():
        raise DataError(f"missing scores on day {day}")
    if expected_cells is not None:
        missing = np.setdiff1d(np.asarray(expected_cells), cell_ids)
        if missing.size:
            raise MissingCellsError(f"the ranking of day {day}", missing.tolist())

    order = np.lexsort((cell_ids, -scores))
    return DailyRanking(day=int(day), cells=cell_ids[order], scores=scores[order])


def hit_counts(
    ranking: DailyRanking, actual: Sequence[int], k_cells: Sequence[int]
) -> Tuple[np.ndarray, int]:
    """Count the event cells inside the top k cells for every budget k.

    Returns the hit count per budget and the number of event cells.
    """
    actual = np.unique(np.asarray(actual, dtype=np.int64))
    positions = np.flatnonzero(np.isin(ranking.cells, actual))
    return np.searchsorted(positions, np.asarray(k_cells), side="left"), actual.size


def daily_hit_rate(
    ranking: DailyRanking, actual: Sequence[int], coverage: CoverageSpec
) -> Optional[float]:
    """Get the share of the day's event cells inside the hotspots.

    Returns SKIP on a day without events.
    """
    if coverage.k_cells > ranking.cells.size:
        raise DataError(
            f"coverage of {coverage.k_cells} cells exceeds the "
            f"{ranking.cells.size} ranked cells"
        )
    hits, total = hit_counts(ranking, actual, [coverage.k_cells])
    if total == 0:
        return SKIP
    return int(hits[0]) / total


def pai(mean_hit_rate: float, coverage: float) -> float:
    """Get the prediction accuracy index, the hit rate per unit of covered area."""
    if not 0 < coverage <= 1:
        raise ConfigError(f"coverage must lie in (0, 1], got {coverage}")
    return mean_hit_rate / coverage


@dataclass(frozen=True, eq=False)
class SurveillanceCurve:
    """The hit rate as a function of the coverage area."""

    coverage: np.ndarray
    hit_rate: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        """Get the curve as a table with the columns coverage and hit_rate."""
        return pd.DataFrame({"coverage": self.coverage, "hit_rate": self.hit_rate})


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    levels = np.asarray(grid, dtype=float)
    if levels.size == 0:
        raise ConfigError("the coverage grid is empty")
    if (levels <= 0).any() or (levels > 1).any():
        raise ConfigError("coverage levels must lie in (0, 1]")
    if (np.diff(levels) <= 0).any():
        raise ConfigError("coverage levels must be strictly increasing")
    return levels


def hit_rate_table(
    rankings: Sequence[DailyRanking],
    actuals: Sequence[Sequence[int]],
    grid: Sequence[float],
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Get the hits, the event cell counts and the hit rates of every day and level.

    A budget that rounds down to zero cells captures nothing. Days without events have
    a NaN hit rate.
    """
    if len(rankings) != len(actuals):
        raise DataError(f"got {len(rankings)} rankings but {len(actuals)} event sets")
    levels = _check_grid(grid)
    hits = np.zeros((len(rankings), levels.size), dtype=np.int64)
    totals = np.zeros(len(rankings), dtype=np.int64)
    for index, (ranking, actual) in enumerate(zip(rankings, actuals)):
        k_cells = [budget(level, ranking.cells.size) for level in levels]
        hits[index], totals[index] = hit_counts(ranking, actual, k_cells)
    with np.errstate(divide="ignore", invalid="ignore"):
        counts = totals[:, np.newaxis]
        rates = np.where(counts > 0, hits / counts, np.nan)
    return hits, totals, rates


def surveillance_curve(
    rankings: Sequence[DailyRanking],
    actuals: Sequence[Sequence[int]],
    grid: Sequence[float] = DEFAULT_CURVE_GRID,
    pooling: str = MEAN,
) -> SurveillanceCurve:
    """Get the hit rate at every coverage level of the grid.

    With "mean" pooling the daily hit rates are averaged over the days with events,
    with "pooled" pooling the hits and event cells of all days are summed first.
    """
    if pooling not in POOLINGS:
        raise ConfigError(f"unknown pooling '{pooling}'")
    hits, totals, rates = hit_rate_table(rankings, actuals, grid)
    counted = totals > 0
    if not counted.any():
        raise DataError("no day of the evaluation period has an event")
    if pooling == MEAN:
        curve = rates[counted].mean(axis=0)
    else:
        curve = hits[counted].sum(axis=0) / totals[counted].sum()
    return SurveillanceCurve(coverage=_check_grid(grid), hit_rate=curve)


def auc(curve: SurveillanceCurve) -> float:
    """Get the area under the surveillance curve anchored at (0, 0) and (1, 1)."""
    if curve.coverage.size == 0:
        raise DataError("the surveillance curve is empty")
    x = np.concatenate([[0.0], curve.coverage])
    y = np.concatenate([[0.0], curve.hit_rate])
    if x[-1] < 1:
        x = np.append(x, 1.0)
        y = np.append(y, 1.0)
    return float(integrate.trapezoid(y, x))


@dataclass(frozen=True)
class PairedTestResult:
    """A one-sided paired t-test of the hypothesis that the first series is larger."""

    t: float
    df: int
    p: float
    mean_difference: float


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> PairedTestResult:
    """Test whether a exceeds b on average, pairing the entries by position.

    Pairs where either value is missing (NaN) are dropped.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DataError(f"cannot pair series of length {a.size} and {b.size}")
    paired = ~(np.isnan(a) | np.isnan(b))
    differences = a[paired] - b[paired]
    if differences.size < 2:
        raise DataError("a paired t-test needs at least two pairs")

    mean = float(differences.mean())
    df = differences.size - 1
    if differences.std(ddof=1) == 0:
        if mean == 0:
            return PairedTestResult(t=0.0, df=df, p=0.5, mean_difference=0.0)
        t = math.copysign(math.inf, mean)
        p = 0.0 if mean > 0 else 1.0
        return PairedTestResult(t=t, df=df, p=p, mean_difference=mean)

    result = stats.ttest_rel(a[paired], b[paired], alternative="greater")
    return PairedTestResult(
        t=float(result.statistic), df=df, p=float(result.pvalue), mean_difference=mean
    )


@dataclass(frozen=True, eq=False)
class MetricReport:
    """The test set metrics of one experiment."""

    days: np.ndarray
    levels: Tuple[float, ...]
    day_hit_rates: np.ndarray
    hit_rates: Dict[float, float]
    pai: Dict[float, float]
    curve: SurveillanceCurve
    auc: float
    pooling: str = MEAN
    rankings: List[DailyRanking] = field(default_factory=list, repr=False)

    def metric_rows(
        self, strategy: str, base_learner: str, feature_set: str
    ) -> pd.DataFrame:
        """Get one metrics row per coverage level."""
        return pd.DataFrame(
            {
                "strategy": strategy,
                "base_learner": base_learner,
                "feature_set": feature_set,
                "coverage": list(self.levels),
                "hit_rate": [self.hit_rates[level] for level in self.levels],
                "pai": [self.pai[level] for level in self.levels],
                "auc": self.auc,
            }
        )

    def daily_rows(self, frame: SpatioTemporalFrame) -> pd.DataFrame:
        """Get the daily hit rates in long form; days without events are left empty."""
        n_levels = len(self.levels)
        return pd.DataFrame(
            {
                "day": np.repeat(self.days, n_levels),
                "date": np.repeat(
                    [frame.bucket_date(day).isoformat() for day in self.days], n_levels
                ),
                "coverage": np.tile(self.levels, self.days.size),
                "hit_rate": self.day_hit_rates.reshape(-1),
            }
        )


def daily_rankings(
    frame: SpatioTemporalFrame, scores: Sequence[float]
) -> Tuple[List[DailyRanking], List[np.ndarray]]:
    """Rank the cells of every bucket of the frame and collect the event cells."""
    scores = np.asarray(scores, dtype=float)
    if scores.size != len(frame):
        raise DataError(f"got {scores.size} scores for {len(frame)} rows")
    expected = frame.cells
    rankings = []
    actuals = []
    for day in frame.days:
        rows = frame.rows_for_day(day)
        positions = frame.table.index.get_indexer(rows.index)
        rankings.append(
            rank_cells(rows["cell_id"], scores[positions], day, expected_cells=expected)
        )
        actuals.append(rows.loc[rows["label"] == 1, "cell_id"].to_numpy())
    return rankings, actuals


def evaluate_scores(
    frame: SpatioTemporalFrame,
    scores: Sequence[float],
    levels: Sequence[float] = DEFAULT_LEVELS,
    curve_grid: Sequence[float] = DEFAULT_CURVE_GRID,
    pooling: str = MEAN,
) -> MetricReport:
    """Rank every bucket of a test frame and compute all metrics."""
    levels = tuple(float(level) for level in _check_grid(sorted(levels)))
    rankings, actuals = daily_rankings(frame, scores)
    n_cells = frame.cells.size
    for level in levels:
        CoverageSpec.for_cells(level, n_cells)

    hits, totals, rates = hit_rate_table(rankings, actuals, levels)
    curve = surveillance_curve(rankings, actuals, curve_grid, pooling)
    counted = totals > 0
    if pooling == MEAN:
        level_rates = rates[counted].mean(axis=0)
    else:
        level_rates = hits[counted].sum(axis=0) / totals[counted].sum()

    hit_rates = {level: float(rate) for level, rate in zip(levels, level_rates)}
    return MetricReport(
        days=frame.days,
        levels=levels,
        day_hit_rates=rates,
        hit_rates=hit_rates,
        pai={level: pai(rate, level) for level, rate in hit_rates.items()},
        curve=curve,
        auc=auc(curve),
        pooling=pooling,
        rankings=rankings,
    )


def ranking_auc(
    labels: Sequence[int],
    scores: Sequence[float],
    days: Sequence[int],
    cell_ids: Sequence[int],
    curve_grid: Sequence[float] = DEFAULT_CURVE_GRID,
) -> float:
    """Get the surveillance AUC of scored rows, ranking each day on its own."""
    table = pd.DataFrame(
        {
            "label": np.asarray(labels),
            "score": np.asarray(scores, dtype=float),
            "day": np.asarray(days),
            "cell_id": np.asarray(cell_ids),
        }
    )
    rankings = []
    actuals = []
    for day, rows in table.groupby("day", sort=True):
        rankings.append(rank_cells(rows["cell_id"], rows["score"], day))
        actuals.append(rows.loc[rows["label"] == 1, "cell_id"].to_numpy())
    return auc(surveillance_curve(rankings, actuals, curve_grid))


def plot_surveillance(
    curves: Mapping[str, SurveillanceCurve], path: str, title: Optional[str] = None
) -> None:
    """Render the surveillance curves with a diagonal reference as an SVG file."""
    fig: plt.Figure = plt.figure()
    ax: plt.Axes = fig.gca()
    ax.plot([0, 1], [0, 1], linestyle="--", color="gray", zorder=-1)
    for name, curve in curves.items():
        ax.plot(
            np.concatenate([[0.0], curve.coverage]),
            np.concatenate([[0.0], curve.hit_rate]),
            label=name,
        )
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel(i18n["surveillance"]["plot_xlabel"])
    ax.set_ylabel(i18n["surveillance"]["plot_ylabel"])
    ax.set_title(title or i18n["surveillance"]["plot_title"])
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)

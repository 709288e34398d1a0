import argparse
import os
from dataclasses import replace
from datetime import date
from typing import Tuple

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

from hyperspot import logger
from hyperspot.commands.config import add_experiment_arguments, load_experiment
from hyperspot.config import ExperimentConfig
from hyperspot.dataset import ReadAudit, SpatioTemporalFrame
from hyperspot.evaluation import CoverageSpec, DailyRanking, rank_cells
from hyperspot.helpers import ConfigError, DataError, try_parse_day
from hyperspot.pipeline import (
    hotspot_table,
    hotspots_geojson,
    load_predictor,
    prepare_frame,
    run_directory,
    write_csv,
)
from hyperspot.runner import HotspotRunner
from hyperspot.strings import translation

i18n = translation()


def rank_day(
    config: ExperimentConfig, day_str: str
) -> Tuple[SpatioTemporalFrame, DailyRanking, date]:
    """Score and rank the eligible cells for a single day with a trained predictor."""
    if config.strata is not None:
        raise ConfigError("rank works on the model of the whole area, drop --strata")
    ctx = logger.RunContext(experiment=config.name, stage="rank")
    frame, _ = prepare_frame(config, ctx)
    day = try_parse_day(day_str, reference=frame.period[1])
    bucket = frame.bucket_of(day)

    predictor = load_predictor(os.path.join(run_directory(config), "model.npz"))
    if tuple(frame.feature_names) != predictor.feature_names:
        raise ConfigError("the model was trained on other features than configured")
    audit = ReadAudit()
    audit.stage = "rank"
    frame = replace(frame, audit=audit)
    rows = frame.rows_for_day(bucket)
    if rows.empty:
        raise DataError(f"no rows for {day.isoformat()}")

    scores = predictor.predict(rows[list(frame.feature_names)].to_numpy(dtype=float))
    ranking = rank_cells(rows["cell_id"], scores, bucket, expected_cells=frame.cells)
    return frame, ranking, frame.bucket_date(bucket)


def plot_heatmap(
    frame: SpatioTemporalFrame, ranking: DailyRanking, day: date, path: str
) -> None:
    """Draw the scores of a day on the grid, with ineligible cells left blank."""
    grid = frame.grid
    scores = np.full((grid.height_cells, grid.width_cells), np.nan)
    rows, cols = grid.row_col(ranking.cells)
    scores[rows, cols] = ranking.scores

    fig, ax = plt.subplots()
    sns.heatmap(
        pd.DataFrame(scores[::-1]),
        ax=ax,
        cmap="rocket_r",
        square=True,
        xticklabels=False,
        yticklabels=False,
        cbar_kws={"label": i18n["heatmap"]["colorbar"]},
    )
    ax.set_title(i18n["heatmap"]["plot_title"].format(day=day.isoformat()))
    ax.set_xlabel(i18n["heatmap"]["plot_xlabel"])
    ax.set_ylabel(i18n["heatmap"]["plot_ylabel"])
    fig.tight_layout()
    fig.savefig(path, format="png")
    plt.close(fig)


def rank(args: argparse.Namespace) -> int:
    """Print and write the hotspots of a single day."""
    config = load_experiment(args)
    frame, ranking, day = rank_day(config, args.day)
    coverage = CoverageSpec.for_cells(max(config.levels), frame.cells.size)
    table = hotspot_table(frame, ranking, coverage.k_cells)

    directory = os.path.join(run_directory(config), "hotspots")
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"{day.isoformat()}.csv")
    write_csv(table, path)
    if config.geojson:
        geojson_path = os.path.join(directory, f"{day.isoformat()}.geojson")
        with open(geojson_path, "w", encoding="utf-8") as file:
            file.write(hotspots_geojson({day.isoformat(): table}))
    if args.heatmap:
        plot_heatmap(frame, ranking, day, args.heatmap)

    print(
        i18n["rank"]["title"].format(
            day=day.isoformat(), k=coverage.k_cells, coverage=coverage.fraction
        )
    )
    print(table.to_string(index=False))
    return 0


def setup(runner: HotspotRunner) -> None:
    """Set up the rank command."""
    parser = runner.add_command("rank", i18n["rank"]["help"], rank)
    add_experiment_arguments(parser)
    parser.add_argument("--day", required=True, help=i18n["rank"]["day"])
    parser.add_argument("--heatmap", help=i18n["rank"]["heatmap"])


def teardown(runner: HotspotRunner) -> None:
    """Unload the rank command."""
    runner.remove_command("rank")

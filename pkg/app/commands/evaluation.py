from typing import List, Optional, Tuple

import click

from app.constants import DATASET_DEFAULTS, DEFAULT_BENCHMARK_RUNS
from app.exceptions import ValidationException
from app.models.report import BenchmarkResult
from app.services.detection_service import SIMULATION_KINDS, DetectionService
from app.services.evaluation import render_table
from app.services.series_io import DELIMITERS, write_json


def _parse_grid(grid: Optional[str]) -> Optional[List[float]]:
    if grid is None:
        return None
    try:
        return [float(item) for item in grid.split(",") if item.strip()]
    except ValueError:
        raise ValidationException(f"--grid 必須是以逗號分隔的數值: {grid}")


def _report(results: List[BenchmarkResult], output: Optional[str]) -> None:
    if output:
        write_json([result.model_dump(mode="json") for result in results], output)
    click.echo(render_table(results))


@click.command("eval")
@click.option("--events", type=click.Path(exists=True, dir_okay=False), help="detect 產生的 NDJSON")
@click.option("--series", type=click.Path(exists=True, dir_okay=False), help="直接偵測的 CSV/TSV")
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), required=True, help="真實變化點 JSON")
@click.option("--dataset", help="資料集名稱（若為已知資料集則套用預設 W / L）")
@click.option("--window", type=int, help="視窗大小 W")
@click.option("--lag", type=int)
@click.option("--metric", type=click.Choice(["le", "lc"]))
@click.option("--threshold", type=float)
@click.option("--auto-threshold", "auto_k", type=float)
@click.option("--grid", help="Best 的門檻格點，以逗號分隔")
@click.option("--columns", help="以逗號分隔的欄名或欄位索引")
@click.option("--delimiter", type=click.Choice(sorted(DELIMITERS)), default="comma", show_default=True)
@click.option("--no-header", is_flag=True)
@click.option("--output", type=click.Path(dir_okay=False), help="JSON 報告輸出路徑")
def evaluate(
    events: Optional[str],
    series: Optional[str],
    labels: str,
    dataset: Optional[str],
    window: Optional[int],
    lag: Optional[int],
    metric: Optional[str],
    threshold: Optional[float],
    auto_k: Optional[float],
    grid: Optional[str],
    columns: Optional[str],
    delimiter: str,
    no_header: bool,
    output: Optional[str],
):
    """以視窗包含規則評估偵測結果（F1、平均延遲、執行時間）"""
    if (events is None) == (series is None):
        raise ValidationException("--events 與 --series 必須擇一")

    if events is not None:
        result = DetectionService.evaluate_events(events, labels, window=window, dataset=dataset or "events")
    else:
        preset = dataset if dataset in DATASET_DEFAULTS else None
        config = DetectionService.resolve_config(
            dataset=preset, window=window, lag=lag, metric=metric, threshold=threshold, auto_k=auto_k,
        )
        selected = tuple(name.strip() for name in columns.split(",")) if columns else None
        result = DetectionService.evaluate_series(
            series,
            labels,
            config,
            grid=_parse_grid(grid) or [],
            dataset=dataset or "series",
            delimiter=delimiter,
            header=not no_header,
            columns=selected,
        )
    _report([result], output)


@click.command("benchmark")
@click.option("--kind", "kinds", type=click.Choice(SIMULATION_KINDS), multiple=True, help="情境（可重複；預設全部）")
@click.option("--runs", type=int, default=DEFAULT_BENCHMARK_RUNS, show_default=True, help="每個情境的序列數")
@click.option("--seed", type=int, help="第一條序列的種子（其餘依序 +1）")
@click.option("--metric", type=click.Choice(["le", "lc"]))
@click.option("--auto-threshold", "auto_k", type=float, help="Default 設定的 k")
@click.option("--grid", help="Best 的門檻格點，以逗號分隔")
@click.option("--output", type=click.Path(dir_okay=False), help="JSON 報告輸出路徑")
def benchmark(
    kinds: Tuple[str, ...],
    runs: int,
    seed: Optional[int],
    metric: Optional[str],
    auto_k: Optional[float],
    grid: Optional[str],
    output: Optional[str],
):
    """合成情境的 Default / Best 基準測試"""
    results = DetectionService.benchmark(
        kinds=kinds or SIMULATION_KINDS,
        runs=runs,
        seed=seed,
        metric=metric,
        auto_k=auto_k,
        grid=_parse_grid(grid),
    )
    _report(results, output)

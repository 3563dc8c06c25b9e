from typing import Optional, Tuple

import click
from pydantic import BaseModel

from app.constants import DATASET_DEFAULTS
from app.exceptions import OutputPathException
from app.services.detection_service import DetectionService
from app.services.series_io import DELIMITERS, write_record


def _open_output(output: Optional[str]):
    try:
        return click.open_file(output or "-", mode="w", encoding="utf-8", lazy=False)
    except OSError as exc:
        raise OutputPathException(str(output)) from exc


@click.command("detect")
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", type=click.Choice(sorted(DATASET_DEFAULTS)), help="套用資料集預設的 W / L")
@click.option("--window", type=int, help="滑動視窗大小 W")
@click.option("--lag", type=int, help="每隔 L 個視窗取一個相關矩陣")
@click.option("--metric", type=click.Choice(["le", "lc"]), help="le = Log-Euclidean, lc = Log-Cholesky")
@click.option("--threshold", type=float, help="CUSUM 門檻 ρ")
@click.option("--auto-threshold", "auto_k", type=float, help="自動門檻 mean + k·std 的 k")
@click.option("--jitter", type=float, help="相關矩陣對角線 ridge")
@click.option("--min-history", type=int, help="開始計分前的最少歷史矩陣數")
@click.option("--max-history", type=int, help="保留歷史矩陣的上限")
@click.option("--columns", help="以逗號分隔的欄名或欄位索引")
@click.option("--delimiter", type=click.Choice(sorted(DELIMITERS)), default="comma", show_default=True)
@click.option("--no-header", is_flag=True, help="輸入檔沒有標題列")
@click.option("--trace", is_flag=True, help="在輸出中插入每個計分視窗的 trace 紀錄")
@click.option("--state-in", type=click.Path(exists=True, dir_okay=False), help="從狀態檔續跑")
@click.option("--state-out", type=click.Path(dir_okay=False), help="結束時寫出狀態檔")
@click.option("--output", type=click.Path(dir_okay=False), help="NDJSON 輸出路徑（預設 stdout）")
def detect(
    source: str,
    dataset: Optional[str],
    window: Optional[int],
    lag: Optional[int],
    metric: Optional[str],
    threshold: Optional[float],
    auto_k: Optional[float],
    jitter: Optional[float],
    min_history: Optional[int],
    max_history: Optional[int],
    columns: Optional[str],
    delimiter: str,
    no_header: bool,
    trace: bool,
    state_in: Optional[str],
    state_out: Optional[str],
    output: Optional[str],
):
    """
    在 SOURCE（CSV/TSV，列 = 時間、欄 = 序列）上做線上變化點偵測

    每個事件一產生就輸出一行 JSON，最後輸出摘要紀錄。
    """
    config = DetectionService.resolve_config(
        dataset=dataset,
        window=window,
        lag=lag,
        metric=metric,
        threshold=threshold,
        auto_k=auto_k,
        jitter=jitter,
        min_history=min_history,
        max_history=max_history,
    )
    selected: Optional[Tuple[str, ...]] = tuple(name.strip() for name in columns.split(",")) if columns else None

    with _open_output(output) as stream:
        def emit(record: BaseModel) -> None:
            write_record(stream, record)

        DetectionService.detect(
            source,
            config,
            emit,
            delimiter=delimiter,
            header=not no_header,
            columns=selected,
            trace=trace,
            state_in=state_in,
            state_out=state_out,
        )


@click.command("export-plot")
@click.argument("events", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", type=click.Path(dir_okay=False), required=True, help="trace CSV 輸出路徑")
def export_plot(events: str, output: str):
    """把 detect --trace 產生的 EVENTS 轉成欄位檔 (t, d_t, r_prev, D, y, rho, event)"""
    rows = DetectionService.export_plot(events, output)
    click.echo(f"{rows} rows -> {output}")

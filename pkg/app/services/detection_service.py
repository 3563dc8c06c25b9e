import logging
import time
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

from pydantic import BaseModel, ValidationError

from app.config import settings
from app.constants import (
    DATASET_DEFAULTS,
    DEFAULT_BENCHMARK_RUNS,
    DEFAULT_THRESHOLD_GRID,
    GAUSSIAN_CORRELATION,
    GAUSSIAN_DIMS,
    GAUSSIAN_SEGMENT_LENGTH,
    SYNTHETIC_LENGTH,
)
from app.exceptions import (
    LabelMismatchException,
    ParseException,
    TraceMissingException,
    ValidationException,
)
from app.models.config import (
    ChangeKind,
    ChangeSpec,
    DetectorConfig,
    EvalConfig,
    GaussianSegment,
    MetricKind,
    SpringConfig,
)
from app.models.report import (
    BenchmarkResult,
    ChangeEvent,
    EventRecord,
    PipelineSnapshot,
    SummaryRecord,
    TraceRecord,
)
from app.services.evaluation import BenchmarkDataset, evaluate, run_benchmark
from app.services.pipeline import DetectionPipeline
from app.services.series_io import (
    ColumnSelector,
    SeriesReader,
    read_frame,
    read_labels,
    read_records,
    write_frame,
    write_json,
    write_labels,
    write_trace,
)
from app.services.simulator import (
    LabeledStream,
    equicorrelation,
    flip_correlation,
    gaussian_regimes,
    simulate_springs,
)

logger = logging.getLogger(__name__)

GAUSSIAN_KIND = "gaussian"
SIMULATION_KINDS = tuple(kind.value for kind in ChangeKind) + (GAUSSIAN_KIND,)

PathLike = Union[str, Path]
Emit = Callable[[BaseModel], None]


class DetectionService:
    """偵測服務（orchestration 層）: 設定解析 → 串流偵測 / 模擬 / 評估 / 基準測試"""

    @staticmethod
    def resolve_config(
        dataset: Optional[str] = None,
        window: Optional[int] = None,
        lag: Optional[int] = None,
        metric: Optional[str] = None,
        threshold: Optional[float] = None,
        auto_k: Optional[float] = None,
        jitter: Optional[float] = None,
        min_history: Optional[int] = None,
        max_history: Optional[int] = None,
    ) -> DetectorConfig:
        """
        組合 DetectorConfig，優先順序: 參數 > 資料集預設 > settings

        Raises:
            ValidationException: 沒有視窗大小、未知資料集、threshold 與 auto_k 同時指定
        """
        preset = {}
        if dataset is not None:
            if dataset not in DATASET_DEFAULTS:
                raise ValidationException(
                    f"未知的資料集: {dataset}（可用: {', '.join(DATASET_DEFAULTS)}）"
                )
            preset = DATASET_DEFAULTS[dataset]

        window = window if window is not None else preset.get("window")
        if window is None:
            raise ValidationException("必須指定 --window 或 --dataset")
        if threshold is not None and auto_k is not None:
            raise ValidationException("--threshold 與 --auto-threshold 只能擇一")

        fields = {
            "window": window,
            "lag": lag if lag is not None else preset.get("lag", 1),
            "metric": MetricKind(metric or settings.default_metric),
            "threshold": threshold,
            "auto_k": None if threshold is not None else (auto_k if auto_k is not None else settings.default_auto_k),
            "jitter": jitter if jitter is not None else settings.default_jitter,
            "max_history": max_history,
        }
        if min_history is not None:
            fields["min_history"] = min_history
        return DetectorConfig(**fields)

    @staticmethod
    def _load_state(path: PathLike) -> PipelineSnapshot:
        try:
            return PipelineSnapshot.model_validate_json(Path(path).read_bytes())
        except OSError as exc:
            raise ParseException(f"無法讀取狀態檔 {path}: {exc}") from exc
        except ValidationError as exc:
            raise ParseException(f"狀態檔 {path} 格式錯誤") from exc

    @staticmethod
    def detect(
        source: PathLike,
        config: DetectorConfig,
        emit: Emit,
        delimiter: str = "comma",
        header: bool = True,
        columns: Optional[Sequence[ColumnSelector]] = None,
        trace: bool = False,
        state_in: Optional[PathLike] = None,
        state_out: Optional[PathLike] = None,
    ) -> SummaryRecord:
        """
        單次串流偵測: 分塊讀檔，事件（及 trace）一產生就交給 emit，最後輸出摘要

        Args:
            source: CSV/TSV 路徑
            config: detector 設定
            emit: 每筆 NDJSON 紀錄的輸出函式
            state_in: 續跑用的 PipelineSnapshot
            state_out: 結束時寫出 PipelineSnapshot

        Returns:
            SummaryRecord（也已交給 emit）
        """
        started = time.perf_counter()
        if state_in is not None:
            pipeline = DetectionPipeline.restore(config, DetectionService._load_state(state_in), trace=trace)
        else:
            pipeline = DetectionPipeline(config, trace=trace)
        logger.info(
            f"Detecting on {source}: metric={config.metric.value}, W={config.window}, L={config.lag}, "
            f"threshold={config.threshold if config.threshold is not None else f'auto(k={config.k})'}"
        )

        reader = SeriesReader(source, delimiter=delimiter, header=header, columns=columns)
        for chunk in reader:
            for item in pipeline.feed(chunk):
                if isinstance(item, ChangeEvent):
                    emit(item.to_record())
                else:
                    emit(TraceRecord(**item.model_dump()))
        # 寫出狀態代表序列還會續接，校正可以留到下一段
        if state_out is None:
            pipeline.finish()

        summary = SummaryRecord(
            metric=config.metric,
            window=config.window,
            lag=config.lag,
            threshold=pipeline.detector.threshold,
            auto_k=config.k if config.is_auto else None,
            rows=pipeline.rows_seen,
            windows_consumed=pipeline.windows_consumed,
            windows_scored=pipeline.windows_scored,
            events=pipeline.events,
            runtime_seconds=time.perf_counter() - started,
        )
        emit(summary)
        if state_out is not None:
            write_json(pipeline.snapshot(), state_out)
        logger.info(f"Detection finished: rows={summary.rows}, events={summary.events}")
        return summary

    @staticmethod
    def simulate(
        kind: str,
        length: int = SYNTHETIC_LENGTH,
        at: Sequence[int] = (),
        magnitude: float = 0.5,
        segments: int = 2,
        dims: int = GAUSSIAN_DIMS,
        correlation: float = GAUSSIAN_CORRELATION,
        spring: Optional[SpringConfig] = None,
        seed: Optional[int] = None,
    ) -> LabeledStream:
        """
        產生一條合成序列

        kind 為 connection / speed / location 時使用彈簧系統（未指定 at 時變化點在 T/2）；
        kind 為 gaussian 時把 length 平均切成 segments 段，相關矩陣在
        equicorrelation(c) 與其第 0 條序列反號的版本之間交替。
        """
        seed = settings.seed if seed is None else seed
        if kind == GAUSSIAN_KIND:
            if segments < 1 or length < segments:
                raise ValidationException(f"無法把長度 {length} 切成 {segments} 段")
            base = equicorrelation(dims, correlation)
            flipped = flip_correlation(base, [0])
            sizes = [length // segments] * segments
            sizes[-1] += length - sum(sizes)
            return gaussian_regimes(
                [
                    GaussianSegment(length=size, correlation=(base if idx % 2 == 0 else flipped).tolist())
                    for idx, size in enumerate(sizes)
                ],
                seed=seed,
                dims=dims,
            )

        try:
            change_kind = ChangeKind(kind)
        except ValueError:
            raise ValidationException(f"未知的模擬類型: {kind}（可用: {', '.join(SIMULATION_KINDS)}）")
        points = list(at) or [length // 2]
        changes = [ChangeSpec(kind=change_kind, at=point, magnitude=magnitude) for point in points]
        return simulate_springs(spring or SpringConfig(), length, changes, seed=seed)

    @staticmethod
    def save_stream(stream: LabeledStream, output: PathLike, labels: Optional[PathLike] = None) -> None:
        write_frame(stream.frame, output)
        if labels is not None:
            write_labels(stream.true_cps, labels)
        logger.info(f"Wrote {stream.frame.length} rows to {output}, change points={list(stream.true_cps)}")

    @staticmethod
    def _check_labels(truth: Sequence[int], rows: int) -> None:
        outside = [label for label in truth if label >= rows]
        if outside:
            raise LabelMismatchException(f"標籤 {outside} 超出序列長度 {rows}，請確認標籤檔與序列檔是否對應。")

    @staticmethod
    def evaluate_events(
        events_path: PathLike,
        labels_path: PathLike,
        window: Optional[int] = None,
        dataset: str = "events",
    ) -> BenchmarkResult:
        """評估 detect 產生的 NDJSON（只有一組設定，Default = Best）"""
        records = read_records(events_path)
        summaries = [record for record in records if isinstance(record, SummaryRecord)]
        summary = summaries[-1] if summaries else None
        if summary is not None and window is not None and window != summary.window:
            raise ValidationException(f"--window {window} 與事件檔的 W={summary.window} 不符")
        window = window if window is not None else (summary.window if summary else None)
        if window is None:
            raise ValidationException("事件檔沒有摘要紀錄，請以 --window 指定 W")

        truth = read_labels(labels_path)
        if summary is not None:
            DetectionService._check_labels(truth, summary.rows)
        events = [record.to_event() for record in records if isinstance(record, EventRecord)]
        report = evaluate(
            events,
            truth,
            EvalConfig(window=window),
            runtime_seconds=summary.runtime_seconds if summary else 0.0,
        )
        return BenchmarkResult(
            dataset=dataset,
            runs=1,
            metric=summary.metric if summary else MetricKind(settings.default_metric),
            window=window,
            lag=summary.lag if summary else 1,
            default=report,
            best=report,
            f1_mean=report.f1,
            f1_std=0.0,
        )

    @staticmethod
    def evaluate_series(
        series_path: PathLike,
        labels_path: PathLike,
        config: DetectorConfig,
        grid: Sequence[float] = (),
        dataset: str = "series",
        delimiter: str = "comma",
        header: bool = True,
        columns: Optional[Sequence[ColumnSelector]] = None,
    ) -> BenchmarkResult:
        """直接在序列上偵測並評估；給了 grid 時另外搜尋 Best 門檻"""
        frame = read_frame(series_path, delimiter=delimiter, header=header, columns=columns)
        truth = read_labels(labels_path)
        DetectionService._check_labels(truth, frame.length)
        dataset_ = BenchmarkDataset(name=dataset, frames=(frame,), truths=(tuple(truth),), config=config)
        return run_benchmark([dataset_], grid=grid)[0]

    @staticmethod
    def export_plot(events_path: PathLike, output: PathLike) -> int:
        """把 detect --trace 的 trace 紀錄寫成欄位檔，回傳列數"""
        rows = [record.to_row() for record in read_records(events_path) if isinstance(record, TraceRecord)]
        if not rows:
            raise TraceMissingException()
        write_trace(rows, output)
        logger.info(f"Exported {len(rows)} trace rows to {output}")
        return len(rows)

    @staticmethod
    def synthetic_suite(
        kind: str,
        runs: int = DEFAULT_BENCHMARK_RUNS,
        seed: Optional[int] = None,
        metric: Optional[str] = None,
        auto_k: Optional[float] = None,
    ) -> BenchmarkDataset:
        """
        種子化的合成資料集

        彈簧: SpringConfig.synthetic()、T=100、一個變化點在 50、W=5；高斯: m=3、200 + 200、W=20
        """
        seed = settings.seed if seed is None else seed
        if runs < 1:
            raise ValidationException(f"runs 至少為 1，實際為 {runs}")
        if kind == GAUSSIAN_KIND:
            streams = [
                DetectionService.simulate(GAUSSIAN_KIND, length=2 * GAUSSIAN_SEGMENT_LENGTH, seed=seed + idx)
                for idx in range(runs)
            ]
            window = 20
        else:
            streams = [
                DetectionService.simulate(kind, length=SYNTHETIC_LENGTH, spring=SpringConfig.synthetic(), seed=seed + idx)
                for idx in range(runs)
            ]
            window = DATASET_DEFAULTS["synthetic"]["window"]
        config = DetectionService.resolve_config(window=window, lag=1, metric=metric, auto_k=auto_k)
        return BenchmarkDataset.from_streams(kind, streams, config)

    @staticmethod
    def benchmark(
        kinds: Sequence[str] = SIMULATION_KINDS,
        runs: int = DEFAULT_BENCHMARK_RUNS,
        seed: Optional[int] = None,
        metric: Optional[str] = None,
        auto_k: Optional[float] = None,
        grid: Optional[Sequence[float]] = None,
    ) -> List[BenchmarkResult]:
        grid = list(DEFAULT_THRESHOLD_GRID if grid is None else grid)
        datasets = [DetectionService.synthetic_suite(kind, runs, seed, metric, auto_k) for kind in kinds]
        logger.info(f"Benchmark: {len(datasets)} suites x {runs} runs, grid of {len(grid)}")
        return run_benchmark(datasets, grid=grid)

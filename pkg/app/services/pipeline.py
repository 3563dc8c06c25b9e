import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from app.exceptions import DimensionMismatchException, InvalidSeriesException, ThresholdCalibrationException
from app.models.config import DetectorConfig
from app.models.report import ChangeEvent, PipelineSnapshot, TraceRow
from app.services.correlation import SeriesFrame, WindowedSeries, correlation_matrix
from app.services.detector import RioDetector

logger = logging.getLogger(__name__)

PipelineOutput = Union[ChangeEvent, TraceRow]


class DetectionPipeline:
    """
    串流偵測: 資料列 → 滑動視窗 → 相關矩陣 → RioDetector

    只保留最後 W−1 列，記憶體不隨檔案長度成長。
    視窗起點為全域索引 t = 0, L, 2L, …
    """

    def __init__(self, config: DetectorConfig, trace: bool = False):
        self.config = config
        self.trace = trace
        self.detector = RioDetector(config)
        self.rows_seen = 0
        self.next_start = 0
        self.tail: Optional[np.ndarray] = None
        self.windows_consumed = 0
        self.windows_scored = 0
        self.events = 0

    def feed(self, rows: np.ndarray) -> List[PipelineOutput]:
        """
        餵入一段資料列

        Returns:
            依時間順序的輸出（trace 開啟時含 TraceRow，偵測到時含 ChangeEvent）
        """
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2:
            raise InvalidSeriesException(f"資料列必須是二維陣列，實際形狀為 {rows.shape}")
        if self.tail is not None and rows.shape[1] != self.tail.shape[1]:
            raise DimensionMismatchException(self.tail.shape[1], rows.shape[1])
        if not np.all(np.isfinite(rows)):
            raise InvalidSeriesException("資料列含有非有限數值")

        buffer = rows if self.tail is None else np.vstack([self.tail, rows])
        base = self.rows_seen - (0 if self.tail is None else len(self.tail))
        self.rows_seen += len(rows)

        window, lag = self.config.window, self.config.lag
        outputs: List[PipelineOutput] = []
        t = self.next_start
        while t + window <= self.rows_seen:
            block = buffer[t - base:t - base + window].T
            b_t = correlation_matrix(WindowedSeries(start=t, block=block), self.config.jitter, index=t)
            self.windows_consumed += 1
            event = self.detector.step(b_t, t)
            if self.detector.last_trace is not None:
                self.windows_scored += 1
                if self.trace:
                    outputs.append(self.detector.last_trace)
            if event is not None:
                self.events += 1
                outputs.append(event)
            t += lag
        self.next_start = t

        tail_start = min(self.next_start, self.rows_seen)
        self.tail = buffer[max(tail_start - base, 0):].copy()
        return outputs

    def finish(self) -> None:
        """
        串流結束時呼叫

        自動門檻從未校正完成（且沒有任何事件）代表整條序列都沒有被檢定，視為設定錯誤。
        """
        detector = self.detector
        if self.config.is_auto and detector.threshold is None and self.events == 0:
            collected = len(detector.state.warmup_scores)
            logger.warning(f"Stream ended before auto threshold calibration: {collected}/{self.config.warmup_size} scores")
            raise ThresholdCalibrationException(collected, self.config.warmup_size)

    def snapshot(self) -> PipelineSnapshot:
        return PipelineSnapshot(
            detector=self.detector.snapshot(),
            rows_seen=self.rows_seen,
            next_start=self.next_start,
            tail=[] if self.tail is None else self.tail.tolist(),
            windows_consumed=self.windows_consumed,
            windows_scored=self.windows_scored,
            events=self.events,
        )

    @classmethod
    def restore(cls, config: DetectorConfig, snapshot: PipelineSnapshot, trace: bool = False) -> "DetectionPipeline":
        pipeline = cls(config, trace=trace)
        pipeline.detector = RioDetector.restore(config, snapshot.detector)
        pipeline.rows_seen = snapshot.rows_seen
        pipeline.next_start = snapshot.next_start
        if snapshot.tail:
            pipeline.tail = np.asarray(snapshot.tail, dtype=np.float64)
        elif snapshot.detector.dim is not None:
            pipeline.tail = np.empty((0, snapshot.detector.dim))
        pipeline.windows_consumed = snapshot.windows_consumed
        pipeline.windows_scored = snapshot.windows_scored
        pipeline.events = snapshot.events
        logger.info(f"Resumed pipeline at row {snapshot.rows_seen}")
        return pipeline


@dataclass
class DetectionRun:
    """整條序列的偵測結果"""
    events: List[ChangeEvent] = field(default_factory=list)
    trace: List[TraceRow] = field(default_factory=list)
    windows_consumed: int = 0
    windows_scored: int = 0
    runtime_seconds: float = 0.0


def detect_frame(frame: SeriesFrame, config: DetectorConfig, trace: bool = False) -> DetectionRun:
    """一次處理整個 SeriesFrame"""
    started = time.perf_counter()
    pipeline = DetectionPipeline(config, trace=trace)
    outputs = pipeline.feed(frame.values)
    pipeline.finish()
    return DetectionRun(
        events=[item for item in outputs if isinstance(item, ChangeEvent)],
        trace=[item for item in outputs if isinstance(item, TraceRow)],
        windows_consumed=pipeline.windows_consumed,
        windows_scored=pipeline.windows_scored,
        runtime_seconds=time.perf_counter() - started,
    )

from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from app.models.config import MetricKind


class ChangeEvent(BaseModel):
    """偵測到的變化點"""
    model_config = ConfigDict(frozen=True)

    tau_hat: int = Field(..., ge=0, description="偵測時間 τ̂（原始時間單位）")
    cusum_value: float = Field(..., description="偵測當下的 CUSUM 值 y")
    score: float = Field(..., description="偵測當下的分數 D")
    window_span: Tuple[int, int] = Field(..., description="[τ̂, τ̂ + W − 1]")

    @classmethod
    def at(cls, tau_hat: int, window: int, cusum_value: float, score: float) -> "ChangeEvent":
        return cls(
            tau_hat=tau_hat,
            cusum_value=cusum_value,
            score=score,
            window_span=(tau_hat, tau_hat + window - 1),
        )

    def contains(self, index: int) -> bool:
        lo, hi = self.window_span
        return lo <= index <= hi

    def to_record(self) -> "EventRecord":
        return EventRecord(
            index=self.tau_hat,
            cusum=self.cusum_value,
            score=self.score,
            window=self.window_span,
        )


class TraceRow(BaseModel):
    """單一計分視窗的內部量 (t, d_t, r_{t−1}, D, y, ρ)"""
    model_config = ConfigDict(frozen=True)

    t: int
    distance: float
    radius: float
    score: float
    cusum: float
    threshold: float = Field(..., description="此列檢定時生效的門檻 ρ")
    event: bool = False


class EventRecord(BaseModel):
    type: Literal["event"] = "event"
    index: int
    cusum: float
    score: float
    window: Tuple[int, int]

    def to_event(self) -> ChangeEvent:
        return ChangeEvent(
            tau_hat=self.index,
            cusum_value=self.cusum,
            score=self.score,
            window_span=self.window,
        )


class TraceRecord(TraceRow):
    type: Literal["trace"] = "trace"

    def to_row(self) -> TraceRow:
        return TraceRow(**self.model_dump(exclude={"type"}))


class SummaryRecord(BaseModel):
    """detect 結束時的摘要"""
    type: Literal["summary"] = "summary"
    metric: MetricKind
    window: int
    lag: int
    threshold: Optional[float] = Field(None, description="最後生效的門檻 ρ")
    auto_k: Optional[float] = None
    rows: int = Field(..., description="讀入的總列數")
    windows_consumed: int
    windows_scored: int
    events: int
    runtime_seconds: float


Record = Annotated[Union[EventRecord, TraceRecord, SummaryRecord], Field(discriminator="type")]


class DetectionReport(BaseModel):
    """偵測結果評估報告"""
    true_positives: int = Field(..., ge=0)
    false_positives: int = Field(..., ge=0)
    false_negatives: int = Field(..., ge=0)
    precision: float = Field(..., ge=0, le=1)
    recall: float = Field(..., ge=0, le=1)
    f1: float = Field(..., ge=0, le=1)
    average_delay: Optional[float] = Field(None, ge=0, description="無合格配對時為空（N.A.）")
    runtime_seconds: float = Field(0.0, ge=0)


class BenchmarkResult(BaseModel):
    """單一資料集的 Default / Best 結果"""
    dataset: str
    runs: int
    metric: MetricKind
    window: int
    lag: int
    default: DetectionReport
    best: DetectionReport
    best_threshold: Optional[float] = Field(None, description="Best 使用的 ρ；為空表示 Default 設定即為最佳")
    grid: List[float] = Field(default_factory=list)
    f1_mean: float
    f1_std: float


class DetectorSnapshot(BaseModel):
    """Detector 狀態（供續跑）"""
    metric: MetricKind
    dim: Optional[int] = None
    images: List[List[List[float]]] = Field(default_factory=list, description="歷史矩陣的對數座標")
    log_sum: Optional[List[List[float]]] = None
    cusum: float = Field(0.0, ge=0)
    threshold: Optional[float] = None
    warmup_scores: List[float] = Field(default_factory=list)
    steps_since_restart: int = 0
    last_event: Optional[ChangeEvent] = None


class PipelineSnapshot(BaseModel):
    """串流管線狀態: detector + 尾端資料列"""
    detector: DetectorSnapshot
    rows_seen: int = Field(0, ge=0)
    next_start: int = Field(0, ge=0, description="下一個取用視窗的起點")
    tail: List[List[float]] = Field(default_factory=list)
    windows_consumed: int = 0
    windows_scored: int = 0
    events: int = 0

from app.models.config import (
    MetricKind,
    DetectorConfig,
    EvalConfig,
    ChangeKind,
    ObservationLayout,
    Observable,
    ChangeSpec,
    SpringConfig,
    GaussianSegment,
)
from app.models.report import (
    ChangeEvent,
    TraceRow,
    EventRecord,
    TraceRecord,
    SummaryRecord,
    Record,
    DetectionReport,
    BenchmarkResult,
    DetectorSnapshot,
    PipelineSnapshot,
)
from app.models.error import (
    ErrorDetail,
    ErrorInfo,
    ErrorResponse,
    validation_details,
)

__all__ = [
    # Config
    "MetricKind",
    "DetectorConfig",
    "EvalConfig",
    "ChangeKind",
    "ObservationLayout",
    "Observable",
    "ChangeSpec",
    "SpringConfig",
    "GaussianSegment",
    # Report
    "ChangeEvent",
    "TraceRow",
    "EventRecord",
    "TraceRecord",
    "SummaryRecord",
    "Record",
    "DetectionReport",
    "BenchmarkResult",
    "DetectorSnapshot",
    "PipelineSnapshot",
    # Error
    "ErrorDetail",
    "ErrorInfo",
    "ErrorResponse",
    "validation_details",
]

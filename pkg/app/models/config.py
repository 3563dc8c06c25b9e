from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.constants import (
    DEFAULT_AUTO_K,
    DEFAULT_DELAY_CAP_MULTIPLIER,
    DEFAULT_JITTER,
    DEFAULT_MIN_HISTORY,
    MIN_WARMUP_WINDOWS,
    SPRING_DEFAULTS,
    SYNTHETIC_SPRING,
)


class MetricKind(str, Enum):
    """SPD 流形上的黎曼度量"""
    LOG_EUCLIDEAN = "le"
    LOG_CHOLESKY = "lc"


class DetectorConfig(BaseModel):
    """線上偵測器設定"""
    model_config = ConfigDict(frozen=True)

    window: int = Field(..., ge=2, description="滑動視窗大小 W")
    lag: int = Field(1, ge=1, description="每隔 L 個視窗取一個相關矩陣")
    metric: MetricKind = Field(MetricKind.LOG_CHOLESKY, description="le | lc")
    threshold: Optional[float] = Field(None, gt=0, description="CUSUM 門檻 ρ（未給時自動校正）")
    auto_k: Optional[float] = Field(None, gt=0, description="自動門檻 mean + k·std 的 k")
    jitter: float = Field(DEFAULT_JITTER, ge=0, description="對角線 ridge")
    min_history: int = Field(DEFAULT_MIN_HISTORY, ge=1, description="開始計分前的最少歷史矩陣數")
    max_history: Optional[int] = Field(None, ge=1, description="保留歷史矩陣的上限（ring buffer）")

    @model_validator(mode="after")
    def _check_combination(self) -> "DetectorConfig":
        if self.threshold is not None and self.auto_k is not None:
            raise ValueError("threshold 與 auto_k 只能擇一設定")
        if self.max_history is not None and self.max_history < self.min_history:
            raise ValueError("max_history 不可小於 min_history")
        return self

    @property
    def is_auto(self) -> bool:
        return self.threshold is None

    @property
    def k(self) -> float:
        return self.auto_k if self.auto_k is not None else DEFAULT_AUTO_K

    @property
    def warmup_size(self) -> int:
        """自動門檻的暖機分數筆數: max(10, 2W)"""
        return max(MIN_WARMUP_WINDOWS, 2 * self.window)


class EvalConfig(BaseModel):
    """評估設定"""
    model_config = ConfigDict(frozen=True)

    window: int = Field(..., ge=2, description="須與 detector 的 W 相同")
    delay_cap_multiplier: float = Field(DEFAULT_DELAY_CAP_MULTIPLIER, gt=0)

    @property
    def delay_cap(self) -> float:
        return self.delay_cap_multiplier * self.window


class ChangeKind(str, Enum):
    CONNECTION = "connection"
    SPEED = "speed"
    LOCATION = "location"


class ObservationLayout(str, Enum):
    """觀測欄位排列: coordinate = 依物理量分組，particle = 依粒子分組"""
    COORDINATE = "coordinate"
    PARTICLE = "particle"


class Observable(str, Enum):
    X = "x"
    Y = "y"
    VX = "vx"
    VY = "vy"


class ChangeSpec(BaseModel):
    """單一變化點設定"""
    model_config = ConfigDict(frozen=True)

    kind: ChangeKind
    at: int = Field(..., ge=1, description="變化發生的時間索引")
    magnitude: float = Field(0.5, ge=0, description="speed / location 擾動的標準差")


class SpringConfig(BaseModel):
    """粒子彈簧系統參數"""
    model_config = ConfigDict(frozen=True)

    n_particles: int = Field(SPRING_DEFAULTS["n_particles"], ge=2)
    spring_constant: float = Field(SPRING_DEFAULTS["spring_constant"], ge=0)
    dt: float = Field(SPRING_DEFAULTS["dt"], gt=0)
    box_half_width: float = Field(SPRING_DEFAULTS["box_half_width"], gt=0)
    noise_std: float = Field(SPRING_DEFAULTS["noise_std"], ge=0)
    init_velocity_std: float = Field(SPRING_DEFAULTS["init_velocity_std"], ge=0)
    init_position_std: float = Field(SPRING_DEFAULTS["init_position_std"], ge=0, description="start_at_rest 時各連通分量位置的標準差")
    start_at_rest: bool = Field(False, description="同一連通分量的粒子共用位置與速度（彈簧不受力）")
    edge_probability: float = Field(SPRING_DEFAULTS["edge_probability"], gt=0, lt=1)
    sample_every: int = Field(SPRING_DEFAULTS["sample_every"], ge=1, description="每筆觀測之間的積分步數")
    layout: ObservationLayout = ObservationLayout.COORDINATE
    observables: Tuple[Observable, ...] = (Observable.X,)

    @field_validator("observables")
    @classmethod
    def _unique_observables(cls, value: Tuple[Observable, ...]) -> Tuple[Observable, ...]:
        if not value:
            raise ValueError("至少需要一個觀測量")
        if len(set(value)) != len(value):
            raise ValueError("觀測量不可重複")
        return value

    @classmethod
    def synthetic(cls, **overrides) -> "SpringConfig":
        """合成情境（基準測試）使用的設定"""
        return cls(**{**SYNTHETIC_SPRING, **overrides})


class GaussianSegment(BaseModel):
    """高斯區段: 長度、相關矩陣、（可選）平均值"""
    model_config = ConfigDict(frozen=True)

    length: int = Field(..., ge=1)
    correlation: List[List[float]]
    mean: Optional[List[float]] = None

"""
RIO-CPD 線上偵測器

每個被取用的相關矩陣 B_t:
1. 與歷史的 Fréchet mean σ_{t−1} 算距離 d_t，歷史半徑 r_{t−1} = max_i dist(B_i, σ_{t−1})
2. 偵測分數 D(t) = d_t − r_{t−1}
3. CUSUM y(t) = max(y(t−1) + D(t), 0)，y(t) > ρ 即為變化點，之後整個狀態重新開始

歷史矩陣以對數座標保存（LE: 對稱矩陣；LC: ⌊L⌋ + diag(ln 𝔻(L))），
在該座標中 Fréchet mean 就是平均，距離就是 Frobenius 範數。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.constants import MIN_WARMUP_SCORES, THRESHOLD_FLOOR
from app.exceptions import (
    ContractException,
    DimensionMismatchException,
    NotReadyException,
    ThresholdCalibrationException,
    ValidationException,
)
from app.models.config import DetectorConfig, MetricKind
from app.models.report import ChangeEvent, DetectorSnapshot, TraceRow
from app.services.correlation import CorrelationMatrix
from app.services.manifold import (
    LogImage,
    SpdMatrix,
    image_from_coordinates,
    log_coordinates,
    mean_from_log_sum,
)

logger = logging.getLogger(__name__)


def cusum_update(y_prev: float, score: float) -> float:
    """y(t) = max(y(t−1) + D(t), 0)"""
    return max(y_prev + score, 0.0)


def brute_force_cusum(scores: Sequence[float]) -> List[float]:
    """CUSUM 定義式: y(t) = max_{i≤t} Σ_{j=i}^{t} D(j)，負值截為 0（O(T²) 雙迴圈）"""
    best = [-math.inf] * len(scores)
    for i in range(len(scores)):
        total = 0.0
        for t in range(i, len(scores)):
            total += scores[t]
            if total > best[t]:
                best[t] = total
    return [max(value, 0.0) for value in best]


def cusum_path(scores: Sequence[float]) -> List[float]:
    """從 y = 0 開始逐步套用 cusum_update 的整條路徑"""
    path, y = [], 0.0
    for score in scores:
        y = cusum_update(y, score)
        path.append(y)
    return path


def auto_threshold(
    warmup_scores: Sequence[float],
    k: float,
    min_scores: int = MIN_WARMUP_SCORES,
) -> float:
    """ρ = mean + k·std（樣本標準差），下限 1e-6"""
    if k < 0:
        raise ContractException(f"k 不可為負，實際為 {k}")
    if len(warmup_scores) < max(min_scores, 2):
        raise ThresholdCalibrationException(len(warmup_scores))
    scores = np.asarray(warmup_scores, dtype=np.float64)
    rho = float(scores.mean() + k * scores.std(ddof=1))
    return max(rho, THRESHOLD_FLOOR)


def calibrate_threshold(warmup_scores: Sequence[float], k: float) -> float:
    """
    以暖機期間的 CUSUM 路徑校正 ρ

    門檻比較的對象是 y 而不是 D，所以統計量取自 y 的路徑:
    ρ = mean(path) + k·std(path)，且不低於路徑最大值（暖機段本身不會觸發）。
    """
    path = cusum_path(warmup_scores)
    rho = auto_threshold(path, k)
    return max(rho, max(path))


class ImageHistory:
    """歷史對數座標；設定容量時為 ring buffer（覆寫最舊的一筆）"""

    def __init__(self, capacity: Optional[int] = None):
        self.capacity = capacity
        self._data: Optional[np.ndarray] = None
        self._size = 0
        self._head = 0

    def __len__(self) -> int:
        return self._size

    def __iter__(self) -> Iterator[np.ndarray]:
        """由舊到新"""
        if self._data is None:
            return iter(())
        if self.capacity is not None and self._size == self.capacity:
            order = list(range(self._head, self._size)) + list(range(self._head))
        else:
            order = list(range(self._size))
        return (self._data[idx] for idx in order)

    def append(self, coordinates: np.ndarray) -> Optional[np.ndarray]:
        """加入一筆，回傳被淘汰的那筆（若有）"""
        if self._data is None:
            initial = self.capacity if self.capacity is not None else 16
            self._data = np.empty((initial,) + coordinates.shape)
        if self.capacity is not None and self._size == self.capacity:
            evicted = self._data[self._head].copy()
            self._data[self._head] = coordinates
            self._head = (self._head + 1) % self.capacity
            return evicted
        if self._size == len(self._data):
            self._data = np.concatenate([self._data, np.empty_like(self._data)])
        self._data[self._size] = coordinates
        self._size += 1
        return None

    def stacked(self) -> np.ndarray:
        """所有保留的座標 (n, m, m)，順序不保證"""
        if self._data is None:
            return np.empty((0, 0, 0))
        return self._data[:self._size]


@dataclass
class DetectorState:
    """上次重新開始以來 detector 攜帶的全部狀態"""
    metric: MetricKind
    images: ImageHistory = field(default_factory=ImageHistory)
    log_sum: Optional[np.ndarray] = None
    y: float = 0.0
    steps_since_restart: int = 0
    last_event: Optional[ChangeEvent] = None
    threshold: Optional[float] = None
    warmup_scores: List[float] = field(default_factory=list)
    dim: Optional[int] = None

    @property
    def history_size(self) -> int:
        return len(self.images)

    def push(self, coordinates: np.ndarray) -> None:
        evicted = self.images.append(coordinates)
        if evicted is not None:
            self.log_sum = self.log_sum - evicted
        self.log_sum = coordinates.copy() if self.log_sum is None else self.log_sum + coordinates

    def log_sum_image(self) -> LogImage:
        if self.log_sum is None:
            raise ContractException("歷史為空，沒有 log_sum")
        return image_from_coordinates(self.metric, self.log_sum)

    def mean_coordinates(self) -> np.ndarray:
        return self.log_sum / len(self.images)


class RioDetector:
    """
    RIO-CPD 狀態機（單一擁有者；同一時間只能有一個呼叫端執行 step）

    threshold 未指定時，先收集 max(10, 2W) 個分數，以它們的 CUSUM 路徑校正 ρ；
    暖機視窗照常加入歷史，但沒有 trace 列，y 在校正完成時從 0 開始。
    偵測到變化點後整個狀態（含門檻校正）重新開始。
    """

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.state = self._fresh_state()
        self.last_trace: Optional[TraceRow] = None

    def _fresh_state(self, dim: Optional[int] = None, last_event: Optional[ChangeEvent] = None) -> DetectorState:
        return DetectorState(
            metric=self.config.metric,
            images=ImageHistory(self.config.max_history),
            threshold=self.config.threshold,
            dim=dim,
            last_event=last_event,
        )

    @property
    def threshold(self) -> Optional[float]:
        return self.state.threshold

    @property
    def ready(self) -> bool:
        return self.state.history_size >= self.config.min_history

    def _check_dim(self, dim: int) -> None:
        if self.state.dim is None:
            self.state.dim = dim
        elif self.state.dim != dim:
            raise DimensionMismatchException(self.state.dim, dim)

    def frechet_mean(self) -> SpdMatrix:
        """歷史矩陣的 Fréchet mean（由 log_sum 求得）"""
        if not self.state.history_size:
            raise ContractException("歷史為空，無法計算 Fréchet mean")
        return mean_from_log_sum(self.state.metric, self.state.log_sum_image(), self.state.history_size)

    def radius(self, mean: SpdMatrix) -> float:
        """歷史矩陣到 mean 的最大測地距離"""
        if not self.state.history_size:
            raise ContractException("歷史為空，無法計算半徑")
        center = log_coordinates(self.state.metric, mean)
        return float(np.max(np.linalg.norm(self.state.images.stacked() - center, axis=(1, 2))))

    def _distance_and_radius(self, coordinates: np.ndarray) -> Tuple[float, float]:
        if not self.ready:
            raise NotReadyException(self.state.history_size, self.config.min_history)
        center = self.state.mean_coordinates()
        radius = float(np.max(np.linalg.norm(self.state.images.stacked() - center, axis=(1, 2))))
        distance = float(np.linalg.norm(coordinates - center))
        return distance, radius

    def detection_score(self, b_t: CorrelationMatrix) -> float:
        """D(t) = dist(B_t, σ_{t−1}) − r_{t−1}，可以為負"""
        distance, radius = self._distance_and_radius(log_coordinates(self.state.metric, b_t.underlying))
        return distance - radius

    def step(self, b_t: CorrelationMatrix, index: int) -> Optional[ChangeEvent]:
        """
        取用一個相關矩陣

        Args:
            b_t: 視窗 t 的相關矩陣
            index: 視窗起點 t（原始時間單位）

        Returns:
            偵測到變化點時回傳 ChangeEvent，否則 None
        """
        self._check_dim(b_t.dim)
        self.last_trace = None
        state = self.state
        coordinates = log_coordinates(state.metric, b_t.underlying)

        if not self.ready:
            state.push(coordinates)
            state.steps_since_restart += 1
            return None

        # 先計分再加入歷史，B_t 不會放大自己的半徑
        distance, radius = self._distance_and_radius(coordinates)
        score = distance - radius
        state.push(coordinates)
        state.steps_since_restart += 1

        # 暖機視窗只用於校正，不進 trace，也不做門檻檢定
        if state.threshold is None:
            state.warmup_scores.append(score)
            if len(state.warmup_scores) >= self.config.warmup_size:
                state.threshold = calibrate_threshold(state.warmup_scores, self.config.k)
                state.y = 0.0
                logger.info(f"Auto threshold calibrated at t={index}: rho={state.threshold:.6g}")
            return None

        state.y = cusum_update(state.y, score)
        fired = state.y > state.threshold
        self.last_trace = TraceRow(
            t=index, distance=distance, radius=radius, score=score,
            cusum=state.y, threshold=state.threshold, event=fired,
        )
        if not fired:
            return None

        event = ChangeEvent.at(index, self.config.window, state.y, score)
        logger.info(f"Change point at t={index}: y={state.y:.6g} > rho={state.threshold:.6g}")
        self.state = self._fresh_state(dim=state.dim, last_event=event)
        return event

    def snapshot(self) -> DetectorSnapshot:
        state = self.state
        return DetectorSnapshot(
            metric=state.metric,
            dim=state.dim,
            images=[image.tolist() for image in state.images],
            log_sum=None if state.log_sum is None else state.log_sum.tolist(),
            cusum=state.y,
            threshold=state.threshold,
            warmup_scores=list(state.warmup_scores),
            steps_since_restart=state.steps_since_restart,
            last_event=state.last_event,
        )

    @classmethod
    def restore(cls, config: DetectorConfig, snapshot: DetectorSnapshot) -> "RioDetector":
        if snapshot.metric != config.metric:
            raise ValidationException(
                f"狀態檔的度量為 {snapshot.metric.value}，與設定的 {config.metric.value} 不符"
            )
        detector = cls(config)
        images = ImageHistory(config.max_history)
        for image in snapshot.images:
            images.append(np.asarray(image, dtype=np.float64))
        log_sum = None
        if snapshot.log_sum is not None:
            log_sum = np.asarray(snapshot.log_sum, dtype=np.float64)
        elif len(images):
            log_sum = images.stacked().sum(axis=0)
        detector.state = DetectorState(
            metric=snapshot.metric,
            images=images,
            log_sum=log_sum,
            y=snapshot.cusum,
            steps_since_restart=snapshot.steps_since_restart,
            last_event=snapshot.last_event,
            threshold=snapshot.threshold,
            warmup_scores=list(snapshot.warmup_scores),
            dim=snapshot.dim,
        )
        return detector

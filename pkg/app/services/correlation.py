import logging
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from app.constants import (
    DEFAULT_JITTER,
    EIGENVALUE_RELATIVE_FLOOR,
    JITTER_GROWTH,
    JITTER_RETRIES,
)
from app.exceptions import (
    ContractException,
    DegenerateWindowException,
    InvalidSeriesException,
    NotPositiveDefiniteException,
)
from app.services.manifold import SpdMatrix

logger = logging.getLogger(__name__)

# 標準差低於 max(1, |x|) 的這個倍數視為常數列
DEGENERATE_STD_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WindowedSeries:
    """從 start 開始、寬度 W 的 m×W 資料區塊"""
    start: int
    block: np.ndarray

    def __post_init__(self):
        block = np.asarray(self.block, dtype=np.float64)
        if block.ndim != 2:
            raise ContractException(f"視窗資料必須是 m×W 矩陣，實際形狀為 {block.shape}")
        if block.shape[1] < 2:
            raise ContractException(f"視窗寬度至少為 2，實際為 {block.shape[1]}")
        object.__setattr__(self, "block", block)

    @property
    def width(self) -> int:
        return self.block.shape[1]

    @property
    def dim(self) -> int:
        return self.block.shape[0]


@dataclass(frozen=True, eq=False)
class SeriesFrame:
    """m 維觀測序列（T 列 × m 欄）"""
    values: np.ndarray
    timestamps: Optional[np.ndarray] = None
    columns: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidSeriesException(f"序列必須是 T×m 矩陣，實際形狀為 {values.shape}")
        if values.shape[0] < 1:
            raise InvalidSeriesException("序列長度至少為 1")
        if values.shape[1] < 2:
            raise InvalidSeriesException(f"至少需要 2 條序列，實際為 {values.shape[1]}")
        if not np.all(np.isfinite(values)):
            row = int(np.argmax(~np.all(np.isfinite(values), axis=1)))
            raise InvalidSeriesException(f"第 {row} 筆觀測含有非有限數值")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

        if self.timestamps is not None:
            stamps = np.asarray(self.timestamps)
            if stamps.shape != (values.shape[0],):
                raise InvalidSeriesException("timestamps 長度必須等於序列長度")
            if stamps.size > 1 and np.any(np.diff(stamps) < 0):
                raise InvalidSeriesException("timestamps 必須單調遞增")
            object.__setattr__(self, "timestamps", stamps)
        if self.columns is not None:
            columns = tuple(str(name) for name in self.columns)
            if len(columns) != values.shape[1]:
                raise InvalidSeriesException("欄位名稱數量與序列數不符")
            object.__setattr__(self, "columns", columns)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def column_names(self) -> Tuple[str, ...]:
        return self.columns or tuple(f"x{i}" for i in range(self.dim))

    def window(self, t: int, width: int) -> WindowedSeries:
        if t < 0 or t + width > self.length:
            raise ContractException(f"視窗 [{t}, {t + width - 1}] 超出序列範圍 [0, {self.length - 1}]")
        return WindowedSeries(start=t, block=self.values[t:t + width].T)

    def iter_windows(self, width: int, lag: int = 1) -> Iterator[WindowedSeries]:
        """依序產生 t = 0, L, 2L, … 的視窗"""
        for t in range(0, self.length - width + 1, lag):
            yield self.window(t, width)


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """視窗的 Pearson 相關矩陣 𝐁_t（已加上 jitter）"""
    underlying: SpdMatrix
    jitter_applied: float = 0.0
    degenerate: Tuple[int, ...] = ()
    start: Optional[int] = None

    @property
    def entries(self) -> np.ndarray:
        return self.underlying.entries

    @property
    def dim(self) -> int:
        return self.underlying.dim


class NormalizedWindow(NamedTuple):
    values: np.ndarray
    degenerate: np.ndarray


def normalize_window(window: WindowedSeries) -> NormalizedWindow:
    """每列減去平均、除以樣本標準差（分母 W−1）；常數列回傳全 0 並標記"""
    block = window.block
    centered = block - block.mean(axis=1, keepdims=True)
    std = block.std(axis=1, ddof=1)
    scale = np.maximum(1.0, np.max(np.abs(block), axis=1))
    degenerate = std <= DEGENERATE_STD_TOL * scale

    normalized = np.zeros_like(centered)
    usable = ~degenerate
    normalized[usable] = centered[usable] / std[usable, None]
    return NormalizedWindow(values=normalized, degenerate=degenerate)


def raw_correlation(window: WindowedSeries) -> Tuple[np.ndarray, Sequence[int]]:
    """未加 jitter 的相關矩陣 (1/(W−1))·X̃·X̃ᵀ，對角線恰為 1"""
    normalized, degenerate = normalize_window(window)
    corr = normalized @ normalized.T / (window.width - 1)
    corr[degenerate, :] = 0.0
    corr[:, degenerate] = 0.0
    np.clip(corr, -1.0, 1.0, out=corr)
    corr = (corr + corr.T) / 2.0
    np.fill_diagonal(corr, 1.0)
    return corr, tuple(int(i) for i in np.flatnonzero(degenerate))


def _well_conditioned(matrix: SpdMatrix) -> bool:
    eigenvalues = linalg.eigvalsh(matrix.entries, check_finite=False)
    return eigenvalues[0] > EIGENVALUE_RELATIVE_FLOOR * eigenvalues[-1]


def correlation_matrix(
    window: WindowedSeries,
    jitter: float = DEFAULT_JITTER,
    index: Optional[int] = None,
) -> CorrelationMatrix:
    """
    視窗 → SPD 相關矩陣

    先加上 jitter·I；若仍不是（條件良好的）SPD，jitter 乘以 10 重試，最多 3 次。
    """
    if jitter < 0:
        raise ContractException(f"jitter 不可為負，實際為 {jitter}")
    corr, degenerate = raw_correlation(window)
    identity = np.eye(window.dim)

    attempt = jitter
    for retry in range(JITTER_RETRIES + 1):
        try:
            candidate = SpdMatrix(corr + attempt * identity)
            if _well_conditioned(candidate):
                if retry:
                    logger.warning(f"Window {window.start}: jitter escalated to {attempt:.1e}")
                return CorrelationMatrix(
                    underlying=candidate,
                    jitter_applied=attempt,
                    degenerate=degenerate,
                    start=window.start,
                )
        except NotPositiveDefiniteException:
            pass
        if retry < JITTER_RETRIES:
            attempt = attempt * JITTER_GROWTH if attempt > 0 else DEFAULT_JITTER

    raise DegenerateWindowException(index if index is not None else window.start, attempt)

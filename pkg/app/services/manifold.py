"""
SPD 流形的黎曼幾何: Log-Euclidean 與 Log-Cholesky 兩種度量

兩種度量都把 SPD 矩陣映射到一個向量空間（對稱矩陣 / 下三角矩陣），
測地距離就是該空間中的 Frobenius 距離，Fréchet mean 則是對數影像的算術平均
再映射回來，因此不需要任何迭代求解。
"""
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import linalg

from app.constants import EIGENVALUE_RELATIVE_FLOOR, SYMMETRY_TOL
from app.exceptions import (
    ContractException,
    DimensionMismatchException,
    IllConditionedMatrixException,
    NonFiniteInputException,
    NotPositiveDefiniteException,
)
from app.models.config import MetricKind


def _readonly(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


def _check_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteInputException()


def _symmetrized(values: np.ndarray) -> np.ndarray:
    """
    檢查方陣與對稱性後回傳 (A + Aᵀ)/2

    容許的不對稱量隨矩陣大小縮放: max|A − Aᵀ| ≤ 1e-12·max(1, max|A|)。
    條目在 1 以內時即為絕對容差 1e-12。
    """
    if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] == 0:
        raise ContractException(f"需要非空方陣，實際形狀為 {values.shape}")
    scale = max(1.0, float(np.max(np.abs(values))))
    if np.max(np.abs(values - values.T)) > SYMMETRY_TOL * scale:
        raise ContractException("矩陣不對稱")
    return (values + values.T) / 2.0


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    """對稱正定矩陣；建構時以 Cholesky 分解驗證正定性，分解結果保留給 Log-Cholesky 使用"""
    entries: np.ndarray
    _factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.entries, dtype=np.float64)
        _check_finite(values)
        values = _symmetrized(values)
        try:
            factor = linalg.cholesky(values, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NotPositiveDefiniteException() from exc
        object.__setattr__(self, "entries", _readonly(values))
        object.__setattr__(self, "_factor", _readonly(factor))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def factor(self) -> np.ndarray:
        return self._factor

    @classmethod
    def identity(cls, dim: int) -> "SpdMatrix":
        return cls(np.eye(dim))

    @classmethod
    def diag(cls, values: Sequence[float]) -> "SpdMatrix":
        return cls(np.diag(np.asarray(values, dtype=np.float64)))


@dataclass(frozen=True, eq=False)
class SymmetricTangent:
    """對稱矩陣（Log-Euclidean 的對數影像）"""
    entries: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.entries, dtype=np.float64)
        _check_finite(values)
        object.__setattr__(self, "entries", _readonly(_symmetrized(values)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class CholeskyImage:
    """Log-Cholesky 的對數影像: 嚴格下三角部分 ⌊L⌋ 與對角線的對數 ln 𝔻(L)"""
    strict_lower: np.ndarray
    log_diag: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.strict_lower, dtype=np.float64)
        log_diag = np.asarray(self.log_diag, dtype=np.float64)
        _check_finite(lower)
        _check_finite(log_diag)
        if lower.ndim != 2 or lower.shape != (log_diag.size, log_diag.size):
            raise ContractException(f"strict_lower 形狀 {lower.shape} 與 log_diag 長度 {log_diag.size} 不符")
        if np.any(np.triu(lower) != 0.0):
            raise ContractException("strict_lower 的對角線與上三角必須為 0")
        object.__setattr__(self, "strict_lower", _readonly(lower))
        object.__setattr__(self, "log_diag", _readonly(log_diag))

    @property
    def dim(self) -> int:
        return self.log_diag.size

    def as_coordinates(self) -> np.ndarray:
        """⌊L⌋ + diag(ln 𝔻(L))；兩部分支撐不重疊，Frobenius 範數即 Log-Cholesky 距離"""
        return self.strict_lower + np.diag(self.log_diag)

    @classmethod
    def from_coordinates(cls, coordinates: np.ndarray) -> "CholeskyImage":
        return cls(np.tril(coordinates, -1), np.diag(coordinates).copy())


LogImage = Union[SymmetricTangent, CholeskyImage]


def _check_same_dim(first: int, second: int) -> None:
    if first != second:
        raise DimensionMismatchException(first, second)


def matrix_log_le(p: SpdMatrix) -> SymmetricTangent:
    """Log-Euclidean 的矩陣對數 U·ln(Σ)·Uᵀ"""
    eigenvalues, vectors = linalg.eigh(p.entries, check_finite=False)
    if eigenvalues[0] <= EIGENVALUE_RELATIVE_FLOOR * eigenvalues[-1]:
        raise IllConditionedMatrixException(float(eigenvalues[0]), float(eigenvalues[-1]))
    return SymmetricTangent((vectors * np.log(eigenvalues)) @ vectors.T)


def matrix_exp(s: SymmetricTangent) -> SpdMatrix:
    """對稱矩陣的指數映射（特徵值取 exp）"""
    eigenvalues, vectors = linalg.eigh(s.entries, check_finite=False)
    return SpdMatrix((vectors * np.exp(eigenvalues)) @ vectors.T)


def cholesky_factor(p: SpdMatrix) -> np.ndarray:
    """下三角 L（對角線為正），L·Lᵀ = P"""
    return p.factor


def log_cholesky_map(p: SpdMatrix) -> CholeskyImage:
    factor = p.factor
    return CholeskyImage(np.tril(factor, -1), np.log(np.diag(factor)))


def log_image(metric: MetricKind, p: SpdMatrix) -> LogImage:
    if metric == MetricKind.LOG_EUCLIDEAN:
        return matrix_log_le(p)
    return log_cholesky_map(p)


def image_coordinates(image: LogImage) -> np.ndarray:
    """對數影像在向量空間中的座標（m×m 矩陣）"""
    if isinstance(image, CholeskyImage):
        return image.as_coordinates()
    return image.entries


def image_from_coordinates(metric: MetricKind, coordinates: np.ndarray) -> LogImage:
    if metric == MetricKind.LOG_EUCLIDEAN:
        return SymmetricTangent(coordinates)
    return CholeskyImage.from_coordinates(coordinates)


def log_coordinates(metric: MetricKind, p: SpdMatrix) -> np.ndarray:
    return image_coordinates(log_image(metric, p))


def spd_from_image(image: LogImage) -> SpdMatrix:
    """對數影像映射回 SPD 矩陣"""
    if isinstance(image, SymmetricTangent):
        return matrix_exp(image)
    factor = image.strict_lower + np.diag(np.exp(image.log_diag))
    return SpdMatrix(factor @ factor.T)


def dist(metric: MetricKind, p1: SpdMatrix, p2: SpdMatrix) -> float:
    """測地距離"""
    _check_same_dim(p1.dim, p2.dim)
    if metric == MetricKind.LOG_EUCLIDEAN:
        return float(np.linalg.norm(matrix_log_le(p1).entries - matrix_log_le(p2).entries))
    first, second = log_cholesky_map(p1), log_cholesky_map(p2)
    return float(np.hypot(
        np.linalg.norm(first.strict_lower - second.strict_lower),
        np.linalg.norm(first.log_diag - second.log_diag),
    ))


def frechet_mean(metric: MetricKind, matrices: Sequence[SpdMatrix]) -> SpdMatrix:
    """閉式 Fréchet mean: 對數影像的算術平均再映射回 SPD"""
    if not matrices:
        raise ContractException("frechet_mean 需要至少一個矩陣")
    for other in matrices[1:]:
        _check_same_dim(matrices[0].dim, other.dim)
    coordinates = np.stack([log_coordinates(metric, p) for p in matrices])
    return spd_from_image(image_from_coordinates(metric, coordinates.mean(axis=0)))


def mean_from_log_sum(metric: MetricKind, log_sum: LogImage, n: int) -> SpdMatrix:
    """由累加的對數影像求 Fréchet mean（與 frechet_mean 結果相同）"""
    if n < 1:
        raise ContractException(f"n 必須 ≥ 1，實際為 {n}")
    return spd_from_image(image_from_coordinates(metric, image_coordinates(log_sum) / n))


def geodesic(metric: MetricKind, p1: SpdMatrix, p2: SpdMatrix, alpha: float) -> SpdMatrix:
    """測地線上位置 alpha 的點；兩種度量在對數座標中都是直線"""
    _check_same_dim(p1.dim, p2.dim)
    start, end = log_coordinates(metric, p1), log_coordinates(metric, p2)
    return spd_from_image(image_from_coordinates(metric, (1.0 - alpha) * start + alpha * end))

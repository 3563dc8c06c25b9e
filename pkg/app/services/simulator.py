"""
合成資料產生器

- 粒子彈簧系統: 盒子內的粒子，部分粒子對之間有彈簧（Hooke 力），
  變化點類型為 connection（重抽連線）、speed（速度擾動）、location（位置擾動）
- 高斯區段: 每段各有指定相關矩陣的 i.i.d. 高斯向量，用於校正 detector
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from app.exceptions import ContractException, NonFiniteInputException, NotPositiveDefiniteException
from app.models.config import (
    ChangeKind,
    ChangeSpec,
    GaussianSegment,
    ObservationLayout,
    Observable,
    SpringConfig,
)
from app.services.correlation import SeriesFrame
from app.services.manifold import SpdMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LabeledStream:
    """帶有真實變化點的序列"""
    frame: SeriesFrame
    true_cps: Tuple[int, ...] = ()
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        cps = tuple(int(cp) for cp in self.true_cps)
        if any(later <= earlier for earlier, later in zip(cps, cps[1:])):
            raise ContractException(f"變化點必須嚴格遞增: {list(cps)}")
        if cps and (cps[0] <= 0 or cps[-1] >= self.frame.length):
            raise ContractException(f"變化點必須落在 (0, {self.frame.length}) 之內: {list(cps)}")
        object.__setattr__(self, "true_cps", cps)


class SpringSystem:
    """二維粒子彈簧系統（質量 1，半隱式 Euler 積分，牆面彈性反射）"""

    def __init__(self, config: SpringConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        if config.start_at_rest:
            self.adjacency = self._sample_adjacency()
            self.positions, self.velocities = self._rest_state()
            return
        n = config.n_particles
        half = config.box_half_width
        self.positions = rng.uniform(-half, half, size=(n, 2))
        self.velocities = rng.normal(0.0, config.init_velocity_std, size=(n, 2))
        self.adjacency = self._sample_adjacency()

    def _sample_adjacency(self) -> np.ndarray:
        n = self.config.n_particles
        upper = np.triu(self.rng.random((n, n)) < self.config.edge_probability, 1)
        return upper | upper.T

    def components(self) -> np.ndarray:
        """每個粒子所屬連通分量的標籤"""
        _, labels = connected_components(csr_matrix(self.adjacency), directed=False)
        return labels

    def _rest_state(self) -> Tuple[np.ndarray, np.ndarray]:
        """同一連通分量的粒子重合且同速，所有彈簧長度為 0"""
        labels = self.components()
        count = int(labels.max()) + 1
        half = self.config.box_half_width
        anchors = np.clip(self.rng.normal(0.0, self.config.init_position_std, size=(count, 2)), -half, half)
        drifts = self.rng.normal(0.0, self.config.init_velocity_std, size=(count, 2))
        return anchors[labels], drifts[labels]

    def resample_adjacency(self) -> None:
        """重抽連線，直到與原本不同"""
        previous = self.adjacency
        candidate = self._sample_adjacency()
        while np.array_equal(candidate, previous):
            candidate = self._sample_adjacency()
        self.adjacency = candidate

    def forces(self) -> np.ndarray:
        """F_i = k Σ_j A_ij (x_j − x_i)，重合的粒子之間恰為 0"""
        offsets = self.positions[np.newaxis, :, :] - self.positions[:, np.newaxis, :]
        return self.config.spring_constant * np.einsum("ij,ijk->ik", self.adjacency.astype(np.float64), offsets)

    def energy(self) -> float:
        """動能 + 彈簧位能 ½k‖x_i − x_j‖²（每對連線算一次）"""
        kinetic = 0.5 * float(np.sum(self.velocities ** 2))
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        stretch = self.positions[i] - self.positions[j]
        potential = 0.5 * self.config.spring_constant * float(np.sum(stretch ** 2))
        return kinetic + potential

    def _reflect(self) -> None:
        half = self.config.box_half_width
        over = self.positions > half
        self.positions[over] = 2 * half - self.positions[over]
        self.velocities[over] *= -1
        under = self.positions < -half
        self.positions[under] = -2 * half - self.positions[under]
        self.velocities[under] *= -1
        # 擾動過大時反射一次仍可能出界
        np.clip(self.positions, -half, half, out=self.positions)

    def step(self) -> None:
        """半隱式 Euler: 先更新速度，再用新速度更新位置"""
        self.velocities += self.config.dt * self.forces()
        self.positions += self.config.dt * self.velocities
        self._reflect()

    def apply_change(self, change: ChangeSpec) -> None:
        if change.kind == ChangeKind.CONNECTION:
            self.resample_adjacency()
        elif change.kind == ChangeKind.SPEED:
            self.velocities += self.rng.normal(0.0, change.magnitude, size=self.velocities.shape)
        elif change.kind == ChangeKind.LOCATION:
            self.positions += self.rng.normal(0.0, change.magnitude, size=self.positions.shape)
            self._reflect()

    def _quantities(self) -> Dict[Observable, np.ndarray]:
        return {
            Observable.X: self.positions[:, 0],
            Observable.Y: self.positions[:, 1],
            Observable.VX: self.velocities[:, 0],
            Observable.VY: self.velocities[:, 1],
        }

    def observe(self) -> np.ndarray:
        quantities = self._quantities()
        columns = [quantities[name] for name in self.config.observables]
        if self.config.layout == ObservationLayout.COORDINATE:
            return np.concatenate(columns)
        return np.stack(columns, axis=1).reshape(-1)


def spring_column_names(config: SpringConfig) -> Tuple[str, ...]:
    names = [name.value for name in config.observables]
    if config.layout == ObservationLayout.COORDINATE:
        return tuple(f"{name}{i}" for name in names for i in range(config.n_particles))
    return tuple(f"p{i}_{name}" for i in range(config.n_particles) for name in names)


def _validate_changes(changes: Sequence[ChangeSpec], length: int) -> List[ChangeSpec]:
    ordered = sorted(changes, key=lambda change: change.at)
    for change in ordered:
        if not 0 < change.at < length:
            raise ContractException(f"變化點 {change.at} 必須落在 (0, {length}) 之內")
    ats = [change.at for change in ordered]
    if len(set(ats)) != len(ats):
        raise ContractException(f"變化點時間重複: {ats}")
    return ordered


def simulate_springs(
    config: SpringConfig,
    length: int,
    changes: Sequence[ChangeSpec] = (),
    seed: Optional[int] = None,
) -> LabeledStream:
    """
    產生粒子彈簧系統的觀測序列

    Args:
        config: 系統參數
        length: 觀測筆數 T
        changes: 變化點（於時間 at 的觀測之前套用）
        seed: 亂數種子

    Returns:
        LabeledStream，true_cps 為各變化點的 at
    """
    if length < 2:
        raise ContractException(f"序列長度至少為 2，實際為 {length}")
    ordered = _validate_changes(changes, length)
    pending = {change.at: change for change in ordered}

    rng = np.random.default_rng(seed)
    system = SpringSystem(config, rng)
    observations = np.empty((length, len(spring_column_names(config))))
    for t in range(length):
        if t in pending:
            system.apply_change(pending[t])
        observations[t] = system.observe()
        for _ in range(config.sample_every):
            system.step()

    if config.noise_std > 0:
        observations += rng.normal(0.0, config.noise_std, size=observations.shape)

    logger.debug(f"Simulated springs: T={length}, changes={[c.kind.value for c in ordered]}, seed={seed}")
    return LabeledStream(
        frame=SeriesFrame(observations, columns=spring_column_names(config)),
        true_cps=tuple(change.at for change in ordered),
        meta={
            "generator": "springs",
            "length": length,
            "seed": seed,
            "config": config.model_dump(mode="json"),
            "changes": [change.model_dump(mode="json") for change in ordered],
        },
    )


def equicorrelation(dims: int, rho: float) -> np.ndarray:
    """對角線為 1、非對角線皆為 rho 的相關矩陣"""
    corr = np.full((dims, dims), rho, dtype=np.float64)
    np.fill_diagonal(corr, 1.0)
    return corr


def flip_correlation(corr: np.ndarray, series: Iterable[int]) -> np.ndarray:
    """把指定序列的相關係數反號（D·C·D，D 為 ±1 對角矩陣），正定性不變"""
    signs = np.ones(corr.shape[0])
    signs[list(series)] = -1.0
    return corr * np.outer(signs, signs)


def _segment_factor(segment: GaussianSegment, dims: int) -> np.ndarray:
    corr = np.asarray(segment.correlation, dtype=np.float64)
    if corr.shape != (dims, dims):
        raise ContractException(f"相關矩陣形狀 {corr.shape} 與維度 {dims} 不符")
    if not np.allclose(np.diag(corr), 1.0, rtol=0, atol=1e-12):
        raise ContractException("相關矩陣對角線必須為 1")
    try:
        return SpdMatrix(corr).factor
    except (NotPositiveDefiniteException, NonFiniteInputException) as exc:
        raise ContractException(f"區段相關矩陣不是正定矩陣: {exc.message}") from exc


def gaussian_regimes(
    segments: Sequence[GaussianSegment],
    seed: Optional[int] = None,
    dims: Optional[int] = None,
) -> LabeledStream:
    """串接多個 i.i.d. 高斯區段；變化點在區段交界"""
    if not segments:
        raise ContractException("至少需要一個區段")
    dims = dims if dims is not None else len(segments[0].correlation)
    factors = [_segment_factor(segment, dims) for segment in segments]

    rng = np.random.default_rng(seed)
    blocks = []
    for segment, factor in zip(segments, factors):
        mean = np.zeros(dims) if segment.mean is None else np.asarray(segment.mean, dtype=np.float64)
        if mean.shape != (dims,):
            raise ContractException(f"區段平均值長度必須為 {dims}")
        blocks.append(rng.standard_normal((segment.length, dims)) @ factor.T + mean)

    boundaries = np.cumsum([segment.length for segment in segments])[:-1]
    return LabeledStream(
        frame=SeriesFrame(np.vstack(blocks)),
        true_cps=tuple(int(b) for b in boundaries),
        meta={
            "generator": "gaussian",
            "seed": seed,
            "segments": [segment.model_dump(mode="json") for segment in segments],
        },
    )

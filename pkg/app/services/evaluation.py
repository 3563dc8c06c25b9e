"""
偵測結果評估: 視窗包含配對、F1、平均延遲、Default / Best 基準測試
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.config import settings
from app.constants import NOT_AVAILABLE
from app.exceptions import ContractException, ValidationException
from app.models.config import DetectorConfig, EvalConfig
from app.models.report import BenchmarkResult, ChangeEvent, DetectionReport
from app.services.correlation import SeriesFrame
from app.services.pipeline import detect_frame
from app.services.simulator import LabeledStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Matching:
    """真實變化點與偵測事件的一對一配對"""
    pairs: Tuple[Tuple[int, ChangeEvent], ...]
    unmatched_events: Tuple[ChangeEvent, ...]
    unmatched_truths: Tuple[int, ...]

    @property
    def true_positives(self) -> int:
        return len(self.pairs)

    @property
    def false_positives(self) -> int:
        return len(self.unmatched_events)

    @property
    def false_negatives(self) -> int:
        return len(self.unmatched_truths)


def match_detections(events: Sequence[ChangeEvent], truth: Sequence[int], cfg: EvalConfig) -> Matching:
    """依時間順序貪婪配對: 每個 τ 配給最早、尚未配對且視窗包含 τ 的事件"""
    used = [False] * len(events)
    pairs = []
    unmatched_truths = []
    for tau in sorted(truth):
        for idx, event in enumerate(events):
            if not used[idx] and event.contains(tau):
                used[idx] = True
                pairs.append((tau, event))
                break
        else:
            unmatched_truths.append(tau)
    return Matching(
        pairs=tuple(pairs),
        unmatched_events=tuple(event for idx, event in enumerate(events) if not used[idx]),
        unmatched_truths=tuple(unmatched_truths),
    )


def qualifying_delays(matching: Matching, cfg: EvalConfig) -> List[int]:
    """0 ≤ τ̂ − τ ≤ 2W 的延遲"""
    delays = (event.tau_hat - tau for tau, event in matching.pairs)
    return [delay for delay in delays if 0 <= delay <= cfg.delay_cap]


def average_delay(matching: Matching, cfg: EvalConfig) -> Optional[float]:
    delays = qualifying_delays(matching, cfg)
    if not delays:
        return None
    return float(np.mean(delays))


def f1(tp: int, fp: int, fn: int) -> Tuple[float, float, float]:
    """回傳 (precision, recall, f1)，分母為 0 時取 0"""
    if min(tp, fp, fn) < 0:
        raise ContractException(f"計數不可為負: tp={tp}, fp={fp}, fn={fn}")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    score = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, score


def _report(tp: int, fp: int, fn: int, delays: Sequence[int], runtime_seconds: float) -> DetectionReport:
    precision, recall, score = f1(tp, fp, fn)
    return DetectionReport(
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        precision=precision,
        recall=recall,
        f1=score,
        average_delay=float(np.mean(delays)) if delays else None,
        runtime_seconds=runtime_seconds,
    )


def evaluate(
    events: Sequence[ChangeEvent],
    truth: Sequence[int],
    cfg: EvalConfig,
    runtime_seconds: float = 0.0,
) -> DetectionReport:
    matching = match_detections(events, truth, cfg)
    return _report(
        matching.true_positives,
        matching.false_positives,
        matching.false_negatives,
        qualifying_delays(matching, cfg),
        runtime_seconds,
    )


def evaluate_runs(
    runs: Sequence[Tuple[Sequence[ChangeEvent], Sequence[int]]],
    cfg: EvalConfig,
    runtime_seconds: float = 0.0,
) -> Tuple[DetectionReport, List[float]]:
    """多條序列合併計數（pooled），另回傳每條序列各自的 F1"""
    tp = fp = fn = 0
    delays: List[int] = []
    per_run: List[float] = []
    for events, truth in runs:
        matching = match_detections(events, truth, cfg)
        tp += matching.true_positives
        fp += matching.false_positives
        fn += matching.false_negatives
        delays.extend(qualifying_delays(matching, cfg))
        per_run.append(f1(matching.true_positives, matching.false_positives, matching.false_negatives)[2])
    return _report(tp, fp, fn, delays, runtime_seconds), per_run


@dataclass(frozen=True)
class BenchmarkDataset:
    """基準測試資料集: 一或多條序列與其標籤"""
    name: str
    frames: Tuple[SeriesFrame, ...]
    truths: Optional[Tuple[Tuple[int, ...], ...]]
    config: DetectorConfig

    @classmethod
    def from_streams(cls, name: str, streams: Sequence[LabeledStream], config: DetectorConfig) -> "BenchmarkDataset":
        return cls(
            name=name,
            frames=tuple(stream.frame for stream in streams),
            truths=tuple(stream.true_cps for stream in streams),
            config=config,
        )


@dataclass(frozen=True)
class _CandidateOutcome:
    report: DetectionReport
    per_run_f1: List[float]


def _candidates(config: DetectorConfig, grid: Sequence[float]) -> List[DetectorConfig]:
    for rho in grid:
        if not rho > 0:
            raise ValidationException(f"門檻格點必須為正數，實際為 {rho}")
    # Default 一定在候選之中，Best ≥ Default
    return [config] + [config.model_copy(update={"threshold": float(rho), "auto_k": None}) for rho in grid]


def _run_candidate(
    dataset: BenchmarkDataset,
    candidate: DetectorConfig,
    executor: ThreadPoolExecutor,
) -> _CandidateOutcome:
    started = time.perf_counter()
    runs = list(executor.map(lambda frame: detect_frame(frame, candidate).events, dataset.frames))
    runtime = time.perf_counter() - started
    report, per_run = evaluate_runs(
        list(zip(runs, dataset.truths)),
        EvalConfig(window=candidate.window),
        runtime_seconds=runtime,
    )
    return _CandidateOutcome(report=report, per_run_f1=per_run)


def run_benchmark(
    datasets: Sequence[BenchmarkDataset],
    grid: Optional[Sequence[float]] = None,
    max_workers: Optional[int] = None,
) -> List[BenchmarkResult]:
    """
    每個資料集跑 Default 設定與門檻格點，回報 Default 與 F1 最高的 Best

    缺少標籤的資料集會略過並記錄 warning。
    """
    grid = list(grid or [])
    results: List[BenchmarkResult] = []
    with ThreadPoolExecutor(max_workers=max_workers or settings.max_workers) as executor:
        for dataset in datasets:
            if dataset.truths is None:
                logger.warning(f"Dataset {dataset.name} has no labels, skipped")
                continue
            if len(dataset.truths) != len(dataset.frames):
                raise ValidationException(f"資料集 {dataset.name} 的標籤數與序列數不符")

            candidates = _candidates(dataset.config, grid)
            outcomes = [_run_candidate(dataset, candidate, executor) for candidate in candidates]
            best_idx = max(range(len(outcomes)), key=lambda idx: (outcomes[idx].report.f1, -idx))
            best = outcomes[best_idx]
            logger.info(
                f"Benchmark {dataset.name}: default F1={outcomes[0].report.f1:.3f}, "
                f"best F1={best.report.f1:.3f}"
            )
            results.append(BenchmarkResult(
                dataset=dataset.name,
                runs=len(dataset.frames),
                metric=dataset.config.metric,
                window=dataset.config.window,
                lag=dataset.config.lag,
                default=outcomes[0].report,
                best=best.report,
                best_threshold=candidates[best_idx].threshold if best_idx else None,
                grid=[float(rho) for rho in grid],
                f1_mean=float(np.mean(best.per_run_f1)) if best.per_run_f1 else 0.0,
                f1_std=float(np.std(best.per_run_f1)) if best.per_run_f1 else 0.0,
            ))
    return results


def render_table(results: Sequence[BenchmarkResult]) -> str:
    """對齊的文字表格: dataset, F1(default), F1(best), avg delay, runtime"""
    frame = pd.DataFrame(
        [
            {
                "dataset": result.dataset,
                "F1(default)": f"{result.default.f1:.3f}",
                "F1(best)": f"{result.best.f1:.3f}",
                "avg delay": NOT_AVAILABLE if result.best.average_delay is None else f"{result.best.average_delay:.2f}",
                "runtime": f"{result.best.runtime_seconds:.2f}s",
            }
            for result in results
        ],
        columns=["dataset", "F1(default)", "F1(best)", "avg delay", "runtime"],
    )
    return frame.to_string(index=False)

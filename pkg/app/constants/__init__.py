from app.constants.defaults import (
    DATASET_DEFAULTS,
    DEFAULT_JITTER,
    JITTER_RETRIES,
    JITTER_GROWTH,
    SYMMETRY_TOL,
    EIGENVALUE_RELATIVE_FLOOR,
    DEFAULT_AUTO_K,
    THRESHOLD_FLOOR,
    MIN_WARMUP_SCORES,
    MIN_WARMUP_WINDOWS,
    DEFAULT_MIN_HISTORY,
    DEFAULT_DELAY_CAP_MULTIPLIER,
    NOT_AVAILABLE,
    SPRING_DEFAULTS,
    SYNTHETIC_SPRING,
    EXIT_CONFIG_ERROR,
    EXIT_PARSE_ERROR,
    EXIT_NUMERIC_ERROR,
    DEFAULT_THRESHOLD_GRID,
    DEFAULT_BENCHMARK_RUNS,
    SYNTHETIC_LENGTH,
    GAUSSIAN_DIMS,
    GAUSSIAN_SEGMENT_LENGTH,
    GAUSSIAN_CORRELATION,
)

__all__ = [
    "DATASET_DEFAULTS",
    "DEFAULT_JITTER",
    "JITTER_RETRIES",
    "JITTER_GROWTH",
    "SYMMETRY_TOL",
    "EIGENVALUE_RELATIVE_FLOOR",
    "DEFAULT_AUTO_K",
    "THRESHOLD_FLOOR",
    "MIN_WARMUP_SCORES",
    "MIN_WARMUP_WINDOWS",
    "DEFAULT_MIN_HISTORY",
    "DEFAULT_DELAY_CAP_MULTIPLIER",
    "NOT_AVAILABLE",
    "SPRING_DEFAULTS",
    "SYNTHETIC_SPRING",
    "EXIT_CONFIG_ERROR",
    "EXIT_PARSE_ERROR",
    "EXIT_NUMERIC_ERROR",
    "DEFAULT_THRESHOLD_GRID",
    "DEFAULT_BENCHMARK_RUNS",
    "SYNTHETIC_LENGTH",
    "GAUSSIAN_DIMS",
    "GAUSSIAN_SEGMENT_LENGTH",
    "GAUSSIAN_CORRELATION",
]

# 各資料集預設參數（W = 視窗大小，L = 取樣間隔）
DATASET_DEFAULTS = {
    "beedance": {"window": 10, "lag": 1},
    "hasc": {"window": 20, "lag": 5},
    "microservice": {"window": 20, "lag": 1},
    "synthetic": {"window": 5, "lag": 1},
}

# 相關矩陣對角線 ridge 與重試
DEFAULT_JITTER = 1e-6
JITTER_RETRIES = 3
JITTER_GROWTH = 10.0

# 對稱性與條件數容忍值
SYMMETRY_TOL = 1e-12
EIGENVALUE_RELATIVE_FLOOR = 1e-12

# 自動門檻
DEFAULT_AUTO_K = 3.0
THRESHOLD_FLOOR = 1e-6
MIN_WARMUP_SCORES = 5
MIN_WARMUP_WINDOWS = 10

# Detector
DEFAULT_MIN_HISTORY = 2

# 評估
DEFAULT_DELAY_CAP_MULTIPLIER = 2.0
NOT_AVAILABLE = "N.A."

# 彈簧系統預設（dt, k, 盒子半寬, 觀測雜訊）
SPRING_DEFAULTS = {
    "n_particles": 5,
    "spring_constant": 1.0,
    "dt": 0.01,
    "box_half_width": 1.0,
    "noise_std": 0.01,
    "init_velocity_std": 0.5,
    "init_position_std": 0.5,
    "edge_probability": 0.5,
    "sample_every": 10,
}

# 合成情境（基準測試）的彈簧設定: 各連通分量從平衡狀態出發，變化前為等速直線運動
SYNTHETIC_SPRING = {
    "dt": 0.001,
    "box_half_width": 5.0,
    "noise_std": 0.0,
    "edge_probability": 0.2,
    "start_at_rest": True,
}

# 程式結束代碼
EXIT_CONFIG_ERROR = 2
EXIT_PARSE_ERROR = 3
EXIT_NUMERIC_ERROR = 4

# 基準測試: Best 的門檻格點（0.01 ~ 100 等比 10 點）與每個情境的序列數
DEFAULT_THRESHOLD_GRID = tuple(round(10 ** (-2 + 4 * i / 9), 6) for i in range(10))
DEFAULT_BENCHMARK_RUNS = 20

# 合成情境（彈簧: T=100、變化點在中間；高斯: m=3、200 + 200）
SYNTHETIC_LENGTH = 100
GAUSSIAN_DIMS = 3
GAUSSIAN_SEGMENT_LENGTH = 200
GAUSSIAN_CORRELATION = 0.8

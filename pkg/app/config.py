from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """應用程式設定"""
    app_name: str = "RIO-CPD"
    debug: bool = False
    log_level: str = "INFO"

    # 亂數種子（RIO_CPD_SEED 可覆寫）
    seed: int = 0

    # Detector 預設值
    default_metric: str = "lc"
    default_jitter: float = 1e-6
    default_auto_k: float = 3.0

    # I/O 與平行化
    csv_chunk_rows: int = 10_000
    max_workers: int = 4

    model_config = SettingsConfigDict(env_prefix="RIO_CPD_", env_file=".env", extra="ignore")


settings = Settings()

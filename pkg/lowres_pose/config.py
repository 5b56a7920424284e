"""Configuration management for the pose toolkit."""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings loaded from environment variables."""

    # Outputs
    output_dir: str = "./runs"
    database_path: str = "./data/lowres_pose.db"

    # Logging
    log_level: str = "INFO"

    # Observability
    opentelemetry_enabled: bool = False

    # OpenTelemetry OTLP
    otlp_endpoint: str = ""  # e.g., "http://localhost:4317"
    otlp_headers: dict[str, str] = {}  # JSON string in env

    # Numerics
    default_seed: int = 0
    default_precision: int = 32  # training graphs; gradchecks always use 64

    # Convergence experiment
    convergence_workers: int = 1

    model_config = SettingsConfigDict(
        env_prefix="LOWRES_POSE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


settings = Settings()

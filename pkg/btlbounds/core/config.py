import os
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # --- Output ---
    OUTPUT_DIR: str = "results"
    WRITE_PLOT_SCRIPT: bool = True

    # --- Parallelism ---
    WORKERS: int = 1

    # --- Quadrature ---
    QUAD_ABS_TOL: float = 1e-10
    QUAD_REL_TOL: float = 1e-8
    QUAD_MAX_SUBDIVISIONS: int = 200

    # --- EM ---
    EM_MAX_ITERS: int = 10000
    EM_REL_CHANGE_TOL: float = 1e-9

    # --- Monte Carlo ---
    DEFAULT_TRIALS: int = 200
    DEFAULT_SEED: int = 0

    # --- Logging ---
    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="BTL_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    @property
    def quadrature_spec(self) -> "QuadratureSpec":
        from btlbounds.models.models import QuadratureSpec

        return QuadratureSpec(
            abs_tol=self.QUAD_ABS_TOL,
            rel_tol=self.QUAD_REL_TOL,
            max_subdivisions=self.QUAD_MAX_SUBDIVISIONS,
        )

    @property
    def em_config(self) -> "EmConfig":
        from btlbounds.models.models import EmConfig

        return EmConfig(
            max_iters=self.EM_MAX_ITERS,
            rel_change_tol=self.EM_REL_CHANGE_TOL,
        )

    def ensure_output_dir(self) -> str:
        os.makedirs(self.OUTPUT_DIR, exist_ok=True)
        return self.OUTPUT_DIR


settings = Settings()

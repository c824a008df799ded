from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

here = Path(__file__).parent.parent


class SemCommSettings(BaseSettings):
    """
    Process-level overrides read from the environment (prefix SEMCOMM_)
    or from a .env file next to the workspace root.
    """

    model_config = SettingsConfigDict(
        env_prefix="SEMCOMM_",
        env_file=here / ".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    seed: Optional[int] = None
    log_level: str = "INFO"
    output_dir: Optional[Path] = None
    run_slow: bool = False


@lru_cache(maxsize=1)
def get_settings() -> SemCommSettings:
    return SemCommSettings()

"""
アプリケーション設定
"""
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """アプリケーション設定（環境変数 STABRW_* と .env から読み込む）"""

    # 規則カタログ
    max_arity: int = Field(default=6, ge=1, le=12)
    ccirc_max: int = Field(default=5, ge=1)

    # オラクル
    oracle: str = Field(default="exact")
    exact_max_qubits: int = Field(default=12, ge=1, le=12)

    # 出力
    output_format: str = Field(default="text")
    seed: int = Field(default=0)

    # フィクスチャ（STABRW_FIXTURES で上書き）
    fixtures: str = Field(default="data/fixtures")

    # selftest の並列数とランダム検査の件数（乱数は seed から）
    selftest_workers: int = Field(default=4, ge=1)
    selftest_translation_samples: int = Field(default=500, ge=0)
    selftest_oracle_pairs: int = Field(default=200, ge=0)

    # Logging
    log_level: str = Field(default="INFO")

    model_config = SettingsConfigDict(
        env_prefix="STABRW_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


@lru_cache()
def get_settings() -> Settings:
    """設定のシングルトンインスタンスを取得"""
    return Settings()

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache
from pathlib import Path

# Répertoire des ressources embarquées (presets, corpus de test)
PACKAGE_DATA_DIR = Path(__file__).resolve().parent.parent / "data"
PRESETS_DIR = PACKAGE_DATA_DIR / "presets"
BUNDLED_PREFIX = "@bundled/"


class Settings(BaseSettings):
    """Configuration ambiante de l'outil NLSTM (indépendante d'un run)"""

    model_config = SettingsConfigDict(
        env_prefix="NLSTM_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        validate_default=True
    )

    # ============================================================================
    # APPLICATION
    # ============================================================================
    runs_dir: str = Field(
        default="runs",
        description="Répertoire de sortie par défaut quand --out est absent"
    )

    # ============================================================================
    # LOGGING CONFIGURATION
    # ============================================================================
    log_level: str = Field(
        default="INFO",
        description="Niveau de log",
        pattern=r"^(DEBUG|INFO|WARNING|ERROR|CRITICAL)$"
    )
    log_format: str = Field(
        default="text",
        description="Format des logs (json ou text)",
        pattern=r"^(json|text)$"
    )
    log_every_steps: int = Field(
        default=50,
        ge=1,
        description="Cadence des logs de progression pendant l'entraînement (en pas d'optimisation)"
    )

    # ============================================================================
    # TRACE CONFIGURATION
    # ============================================================================
    trace_length: int = Field(
        default=100,
        ge=1,
        description="Longueur par défaut de la séquence tracée"
    )
    default_units: str = Field(
        default="0..6",
        description="Plage d'unités tracées par défaut (bornes incluses)"
    )

    # ============================================================================
    # VALIDATORS
    # ============================================================================

    @field_validator("log_level", mode="before")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Valide le niveau de log"""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if str(v).upper() not in valid_levels:
            raise ValueError(f"log_level doit être l'un de: {', '.join(valid_levels)}")
        return str(v).upper()

    @field_validator("log_format", mode="before")
    @classmethod
    def validate_log_format(cls, v: str) -> str:
        return str(v).lower()


@lru_cache
def get_settings() -> Settings:
    """Retourne une instance singleton des paramètres"""
    return Settings()

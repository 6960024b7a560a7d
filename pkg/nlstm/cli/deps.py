from functools import lru_cache

from nlstm.core.config import Settings, get_settings
from nlstm.repositories.run_repository import RunRepository
from nlstm.services.pipeline_service import PipelineService


@lru_cache
def get_settings_dependency() -> Settings:
    """Paramètres ambiants partagés par les commandes"""
    return get_settings()


@lru_cache
def get_run_repository() -> RunRepository:
    """
    RunRepository avec cache LRU.
    Une seule instance par processus.
    """
    return RunRepository()


@lru_cache
def get_pipeline_service() -> PipelineService:
    """
    PipelineService avec cache LRU, construit sur le RunRepository partagé.
    """
    return PipelineService(run_repository=get_run_repository())

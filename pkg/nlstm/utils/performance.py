"""
Module utilitaire pour la mesure de performance

Décorateurs qui journalisent la durée des opérations longues (préparation des
données, entraînement, évaluation). Les durées vont dans les logs uniquement,
jamais dans les fichiers de résultats.
"""

from typing import Any, Callable
import time
from functools import wraps
import structlog

logger = structlog.get_logger()


def measure_execution_time(operation_name: str = "", **metadata):
    """
    Décorateur générique pour mesurer le temps d'exécution d'une fonction

    Args:
        operation_name: Nom de l'opération pour les logs.
                       Si vide, utilise le nom de la fonction.
        **metadata: Métadonnées ajoutées à chaque log

    Usage:
        @measure_execution_time("train", task="ptb_char")
        def run_training(...):
            pass
    """
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            op_name = operation_name or func.__name__
            start_time = time.perf_counter()
            logger.info(f"⏱️ Démarrage de '{op_name}'", operation=op_name, **metadata)

            try:
                result = func(*args, **kwargs)
            except Exception as e:
                execution_time = time.perf_counter() - start_time
                logger.error(
                    f"❌ '{op_name}' a échoué",
                    operation=op_name,
                    execution_time_seconds=round(execution_time, 3),
                    error=str(e),
                    error_type=type(e).__name__,
                    **metadata
                )
                raise

            execution_time = time.perf_counter() - start_time
            logger.info(
                f"✅ '{op_name}' terminé avec succès",
                operation=op_name,
                execution_time_seconds=round(execution_time, 3),
                execution_time_formatted=f"{execution_time:.3f}s",
                **metadata
            )
            return result

        return wrapper

    return decorator


class Stopwatch:
    """Chronomètre minimal pour les durées gardées en mémoire (historique d'entraînement)."""

    def __init__(self):
        self._start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self._start

from typing import Optional, Dict, Any

# Codes de sortie du CLI
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_DIVERGENCE = 3


class NLSTMError(Exception):
    """Base exception pour la librairie NLSTM, convertible en code de sortie CLI standardisé."""
    def __init__(
        self,
        message: str,
        exit_code: int = EXIT_CONFIG,
        code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        self.message = message
        self.exit_code = exit_code
        self.code = code or self.__class__.__name__.upper()
        self.details = details or {}
        super().__init__(self.message)


class ConfigError(NLSTMError):
    """Raised when a configuration value or combination is invalid"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_CONFIG, code="CONFIG_ERROR", details=details)


class ShapeError(NLSTMError, ValueError):
    """Raised when array shapes do not conform"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_CONFIG, code="SHAPE_ERROR", details=details)


class ConsistencyError(NLSTMError, ValueError):
    """Raised when a cache, a gradient or a tensor set does not match its parameters"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_CONFIG, code="CONSISTENCY_ERROR", details=details)


class TargetIndexError(NLSTMError, IndexError):
    """Raised when a class index falls outside the logits"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_CONFIG, code="TARGET_INDEX_ERROR", details=details)


class UnitRangeError(NLSTMError, IndexError):
    """Raised when a requested unit range exceeds the cell size"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_CONFIG, code="UNIT_RANGE_ERROR", details=details)


class CheckpointIncompatibleError(NLSTMError):
    """Raised when a checkpoint does not match the configured model"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_CONFIG, code="CHECKPOINT_INCOMPATIBLE", details=details)


class DataError(NLSTMError):
    """Raised when input data is missing or unusable"""
    def __init__(self, message: str, code: str = "DATA_ERROR", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_DATA, code=code, details=details)


class IngestionError(DataError):
    """Exception pour les caractères hors vocabulaire dans valid/test"""
    def __init__(self, message: str, offenders: Optional[list] = None):
        super().__init__(message, code="INGESTION_ERROR", details={"offenders": offenders or []})


class IdxFormatError(DataError):
    """Exception pour les fichiers IDX invalides ou tronqués"""
    def __init__(self, message: str, path: str, offset: int):
        self.offset = offset
        super().__init__(
            f"{path} @ octet {offset}: {message}",
            code="IDX_FORMAT_ERROR",
            details={"path": path, "offset": offset},
        )


class CheckpointFormatError(DataError):
    """Exception pour les checkpoints illisibles"""
    def __init__(self, message: str, path: str, offset: Optional[int] = None):
        super().__init__(
            f"{path}: {message}",
            code="CHECKPOINT_FORMAT_ERROR",
            details={"path": path, "offset": offset},
        )


class DivergenceError(NLSTMError):
    """Raised when training produces a non-finite loss"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=EXIT_DIVERGENCE, code="DIVERGENCE", details=details)


class NonFiniteError(DivergenceError):
    """Raised when a numeric primitive produces NaN or Inf"""
    def __init__(self, what: str):
        super().__init__(f"Valeurs non finies détectées dans {what}", details={"what": what})


def map_exception(exc: Exception, operation_context: str = "") -> NLSTMError:
    """
    Mappe une exception externe vers une exception de la librairie

    Args:
        exc: Exception levée par une dépendance (pydantic, système de fichiers...)
        operation_context: Contexte de l'opération pour des messages plus clairs

    Returns:
        NLSTMError: Exception appropriée
    """
    # Import local: pydantic n'est pas nécessaire pour les primitives numériques
    from pydantic import ValidationError

    if isinstance(exc, NLSTMError):
        return exc

    prefix = f"{operation_context}: " if operation_context else ""

    if isinstance(exc, ValidationError):
        problems = [
            f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}"
            for error in exc.errors()
        ]
        return ConfigError(prefix + "; ".join(problems), details={"errors": problems})
    if isinstance(exc, FileNotFoundError):
        return DataError(f"{prefix}fichier introuvable: {exc.filename}", code="FILE_NOT_FOUND")
    if isinstance(exc, UnicodeDecodeError):
        return DataError(f"{prefix}texte non UTF-8 ({exc.reason} @ octet {exc.start})", code="ENCODING_ERROR")
    if isinstance(exc, OSError):
        return DataError(f"{prefix}{exc}", code="IO_ERROR")
    if isinstance(exc, ValueError):
        return ConfigError(prefix + str(exc))

    return NLSTMError(prefix + str(exc), code="INTERNAL_ERROR")

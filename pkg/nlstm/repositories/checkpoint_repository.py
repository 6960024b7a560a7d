"""
Format binaire des checkpoints (entiers little-endian)

    8 octets  | magic b"NLSTMCKP"
    u32       | version (1)
    i32       | époque du modèle sauvegardé
    u32       | longueur L de l'en-tête
    L octets  | ModelConfig en JSON UTF-8 (clés triées)
    u32       | nombre de tenseurs
    puis, pour chaque tenseur dans l'ordre de ``Model.named_tensors()``:
    u32 longueur du nom, nom UTF-8, u32 lignes, u32 colonnes, valeurs '<f8'

Un vecteur (biais) est stocké avec lignes = 1.
"""

from dataclasses import replace
from pathlib import Path
from typing import Optional, Tuple, Union
import json
import struct

import numpy as np
import structlog
from pydantic import ValidationError

from nlstm.core.exceptions import CheckpointFormatError, CheckpointIncompatibleError, DataError
from nlstm.models.network import Model, build_model
from nlstm.schemas.run_config import ModelConfig

logger = structlog.get_logger()

MAGIC = b"NLSTMCKP"
VERSION = 1
SHAPE_FIELDS = ("architecture", "layers", "nesting_depth", "cell_size", "input_size", "output_size")


class _Reader:
    """Lecture séquentielle avec offset pour les messages d'erreur."""

    def __init__(self, raw: bytes, path: str):
        self.raw, self.path, self.offset = raw, path, 0

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.raw):
            raise CheckpointFormatError(f"fichier tronqué en lisant {what}", self.path, self.offset)
        chunk = self.raw[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str, what: str) -> int:
        value, = struct.unpack(fmt, self.take(struct.calcsize(fmt), what))
        return value


class CheckpointRepository:
    def save(self, path: Union[str, Path], model: Model, epoch: int = 0) -> Path:
        """Écrit le modèle; l'encodage est exact (float64 bit à bit)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = json.dumps(model.config.model_dump(mode="json"), sort_keys=True).encode("utf-8")
        tensors = list(model.named_tensors())

        parts = [MAGIC, struct.pack("<IiI", VERSION, epoch, len(header)), header, struct.pack("<I", len(tensors))]
        for name, tensor in tensors:
            matrix = tensor.reshape(1, -1) if tensor.ndim == 1 else tensor
            encoded = name.encode("utf-8")
            parts.append(struct.pack("<I", len(encoded)) + encoded)
            parts.append(struct.pack("<II", *matrix.shape))
            parts.append(np.ascontiguousarray(matrix, dtype="<f8").tobytes())
        path.write_bytes(b"".join(parts))
        logger.info("💾 Checkpoint écrit", path=str(path), epoch=epoch, tensors=len(tensors))
        return path

    def load(self, path: Union[str, Path], expected: Optional[ModelConfig] = None) -> Tuple[Model, int]:
        """
        Relit un checkpoint

        Args:
            path: fichier .ckpt
            expected: configuration attendue; sa forme doit correspondre à celle du checkpoint

        Returns:
            (modèle, époque)

        Raises:
            CheckpointFormatError: fichier illisible, tronqué ou tenseurs inattendus
            CheckpointIncompatibleError: forme différente de ``expected``
        """
        path = Path(path)
        if not path.is_file():
            raise DataError(f"Checkpoint introuvable: {path}", code="FILE_NOT_FOUND")
        reader = _Reader(path.read_bytes(), str(path))

        if reader.take(len(MAGIC), "le magic") != MAGIC:
            raise CheckpointFormatError("magic invalide", str(path), 0)
        version = reader.unpack("<I", "la version")
        if version != VERSION:
            raise CheckpointFormatError(f"version {version} non supportée", str(path), len(MAGIC))
        epoch = reader.unpack("<i", "l'époque")
        header_length = reader.unpack("<I", "la longueur d'en-tête")
        header_offset = reader.offset
        try:
            config = ModelConfig.model_validate_json(reader.take(header_length, "l'en-tête"))
        except ValidationError as e:
            raise CheckpointFormatError(f"en-tête invalide ({e.error_count()} erreurs)", str(path), header_offset) from e

        if expected is not None:
            self.check_compatible(config, expected)

        template = build_model(config.model_copy(update={"init": "zeros"}))
        expected_shapes = {name: tensor.shape for name, tensor in template.named_tensors()}
        count = reader.unpack("<I", "le nombre de tenseurs")
        if count != len(expected_shapes):
            raise CheckpointFormatError(
                f"{count} tenseurs, {len(expected_shapes)} attendus", str(path), reader.offset - 4
            )

        tensors = {}
        for _ in range(count):
            name_offset = reader.offset
            name = reader.take(reader.unpack("<I", "un nom"), "un nom").decode("utf-8", errors="replace")
            rows = reader.unpack("<I", f"les lignes de {name}")
            cols = reader.unpack("<I", f"les colonnes de {name}")
            if name not in expected_shapes:
                raise CheckpointFormatError(f"tenseur inattendu {name!r}", str(path), name_offset)
            values = np.frombuffer(reader.take(8 * rows * cols, name), dtype="<f8").astype(np.float64)
            shape = expected_shapes[name]
            if rows * cols != int(np.prod(shape)):
                raise CheckpointFormatError(f"{name}: {rows}x{cols}, forme attendue {shape}", str(path), name_offset)
            tensors[name] = values.reshape(shape)
        if reader.offset != len(reader.raw):
            raise CheckpointFormatError("octets en trop après le dernier tenseur", str(path), reader.offset)

        model = replace(template.with_tensors(tensors), config=config)
        logger.info("📂 Checkpoint chargé", path=str(path), epoch=epoch, architecture=config.architecture.value)
        return model, epoch

    @staticmethod
    def check_compatible(found: ModelConfig, expected: ModelConfig) -> None:
        mismatches = {
            key: (getattr(found, key), getattr(expected, key))
            for key in SHAPE_FIELDS
            if getattr(found, key) != getattr(expected, key)
        }
        if found.outer_candidate != expected.outer_candidate:
            mismatches["candidate_activation"] = (found.outer_candidate, expected.outer_candidate)
        if mismatches:
            described = ", ".join(f"{key}={a} (attendu {b})" for key, (a, b) in mismatches.items())
            raise CheckpointIncompatibleError(
                f"Checkpoint incompatible avec la configuration: {described}",
                details={key: [str(a), str(b)] for key, (a, b) in mismatches.items()},
            )

"""
Lecture des fichiers IDX (distribution standard de MNIST)

Format (big-endian):
    i32 | magic (0x00000803 images, 0x00000801 étiquettes)
    i32 | nombre d'éléments
    i32 | lignes, i32 | colonnes   (images seulement)
    u8[] | données
"""

from pathlib import Path
from typing import Tuple, Union
import struct

import numpy as np
import structlog

from nlstm.core.exceptions import DataError, IdxFormatError

logger = structlog.get_logger()

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
N_CLASSES = 10
IMAGE_SIDE = 28


def _read_be32(raw: bytes, offset: int, path: str) -> int:
    if offset + 4 > len(raw):
        raise IdxFormatError("en-tête tronqué", path, offset)
    value, = struct.unpack_from(">i", raw, offset)
    return value


def load_idx(path: Union[str, Path]) -> np.ndarray:
    """
    Charge un fichier IDX d'images ou d'étiquettes

    Args:
        path: chemin du fichier

    Returns:
        np.ndarray uint8: [N x lignes x colonnes] (images) ou [N] (étiquettes)

    Raises:
        DataError: si le fichier n'existe pas
        IdxFormatError: magic invalide ou fichier tronqué (avec l'offset fautif)
    """
    path = str(path)
    if not Path(path).is_file():
        raise DataError(f"Fichier IDX introuvable: {path}", code="FILE_NOT_FOUND")
    raw = Path(path).read_bytes()

    magic = _read_be32(raw, 0, path)
    if magic == IDX_IMAGE_MAGIC:
        count, rows, cols = (_read_be32(raw, offset, path) for offset in (4, 8, 12))
        shape, header = (count, rows, cols), 16
    elif magic == IDX_LABEL_MAGIC:
        count = _read_be32(raw, 4, path)
        shape, header = (count,), 8
    else:
        raise IdxFormatError(f"magic inconnu 0x{magic & 0xFFFFFFFF:08x}", path, 0)

    if any(dim < 0 for dim in shape):
        raise IdxFormatError(f"dimensions négatives {shape}", path, 4)
    expected = int(np.prod(shape))
    available = len(raw) - header
    if available < expected:
        raise IdxFormatError(
            f"données tronquées: {available} octets sur {expected}", path, header + available
        )

    data = np.frombuffer(raw, dtype=np.uint8, count=expected, offset=header).reshape(shape)
    logger.debug("📖 Fichier IDX chargé", path=path, shape=list(shape))
    return data


def load_mnist_pair(images_path: Union[str, Path], labels_path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Charge un couple images/étiquettes MNIST

    Returns:
        (images float64 dans [0, 1] [N x 28 x 28], étiquettes int64 [N])

    Raises:
        IdxFormatError: fichiers de mauvais type, images autres que 28x28,
            comptes incohérents ou étiquettes hors 0-9
    """
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if images.ndim != 3:
        raise IdxFormatError("fichier d'images attendu", str(images_path), 0)
    if images.shape[1:] != (IMAGE_SIDE, IMAGE_SIDE):
        raise IdxFormatError(f"images {images.shape[1]}x{images.shape[2]}, 28x28 attendu", str(images_path), 8)
    if labels.ndim != 1:
        raise IdxFormatError("fichier d'étiquettes attendu", str(labels_path), 0)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"{images.shape[0]} images pour {labels.shape[0]} étiquettes", str(labels_path), 4
        )
    if labels.size and labels.max() >= N_CLASSES:
        bad = int(np.argmax(labels >= N_CLASSES))
        raise IdxFormatError(f"étiquette {int(labels[bad])} hors de 0-9", str(labels_path), 8 + bad)
    return images.astype(np.float64) / 255.0, labels.astype(np.int64)

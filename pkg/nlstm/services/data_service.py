"""
Service de données: vocabulaires de caractères, découpage train/valid/test,
batching en séquences disjointes et construction des glimpses MNIST
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from nlstm.core.exceptions import ConfigError, DataError, IngestionError, ShapeError, map_exception
from nlstm.models.network import SequenceBatch
from nlstm.schemas.run_config import DataConfig, RunConfig, Task
from nlstm.utils.idx_loader import IMAGE_SIDE, N_CLASSES, load_mnist_pair
from nlstm.utils.performance import measure_execution_time

logger = structlog.get_logger()

SPLITS = ("train", "valid", "test")
GLIMPSE_STEPS = 20
GLIMPSE_SIZE = 49


# ============================================================================
# Types
# ============================================================================

@dataclass(frozen=True)
class CharVocab:
    """Vocabulaire bijectif caractère <-> identifiant dense."""
    chars: Tuple[str, ...]
    index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.chars)) != len(self.chars):
            raise DataError("Vocabulaire avec doublons", code="VOCAB_ERROR")
        object.__setattr__(self, "index", {char: i for i, char in enumerate(self.chars)})

    def __len__(self) -> int:
        return len(self.chars)

    def missing(self, text: str) -> List[str]:
        return sorted(set(text) - set(self.index))

    def encode(self, text: str, split: str = "train") -> np.ndarray:
        offenders = self.missing(text)
        if offenders:
            raise IngestionError(
                f"Caractères absents du vocabulaire d'entraînement dans '{split}': "
                + ", ".join(repr(c) for c in offenders),
                offenders=offenders,
            )
        return np.fromiter((self.index[c] for c in text), dtype=np.int64, count=len(text))

    def decode(self, ids: Sequence[int]) -> str:
        return "".join(self.chars[int(i)] for i in ids)


@dataclass(frozen=True)
class GlimpseSequence:
    steps: np.ndarray  # [20 x 49] dans [0, 1]
    label: int


@dataclass
class PreparedData:
    """
    Données prêtes pour l'entraînement

    Tâches texte: ``tokens[split]`` (identifiants) et ``vocab``.
    MNIST: ``glimpses[split]`` [N x 20 x 49] et ``labels[split]`` [N].
    """
    task: Task
    vocab: Optional[CharVocab] = None
    tokens: Dict[str, np.ndarray] = field(default_factory=dict)
    glimpses: Dict[str, np.ndarray] = field(default_factory=dict)
    labels: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def input_size(self) -> int:
        return GLIMPSE_SIZE if self.task.is_classification else len(self.vocab)

    @property
    def output_size(self) -> int:
        return N_CLASSES if self.task.is_classification else len(self.vocab)

    @property
    def splits(self) -> List[str]:
        source = self.glimpses if self.task.is_classification else self.tokens
        return [split for split in SPLITS if split in source]

    def split_size(self, split: str) -> int:
        source = self.glimpses if self.task.is_classification else self.tokens
        if split not in source:
            raise DataError(f"Split '{split}' absent des données préparées", code="SPLIT_NOT_FOUND")
        return int(source[split].shape[0])

    def batches(self, split: str, batch_size: int, seq_len: int, evaluation: bool = False) -> List[SequenceBatch]:
        """
        Batches d'un split

        En évaluation, les tâches texte utilisent min(batch_size, fenêtres) voies
        pour qu'un petit split produise au moins un batch.
        """
        self.split_size(split)
        if self.task.is_classification:
            return glimpse_batches(self.glimpses[split], self.labels[split], batch_size)
        tokens = self.tokens[split]
        if evaluation:
            windows = (len(tokens) - 1) // seq_len
            batch_size = max(1, min(batch_size, windows))
        return batch_nonoverlapping(tokens, batch_size, seq_len)


# ============================================================================
# Vocabulaire et batching
# ============================================================================

def build_vocab(train_text: str) -> CharVocab:
    """Vocabulaire = caractères distincts du split d'entraînement, triés par point de code."""
    if not train_text:
        raise DataError("Le corpus d'entraînement est vide", code="EMPTY_CORPUS")
    return CharVocab(tuple(sorted(set(train_text))))


def batch_nonoverlapping(tokens: np.ndarray, batch_size: int, seq_len: int) -> List[SequenceBatch]:
    """
    Découpe un flux en fenêtres disjointes groupées en batches

    La fenêtre w couvre tokens[w*L : w*L + L + 1]: les L premiers sont les
    entrées, les L derniers les cibles. Les fenêtres consécutives forment les
    voies d'un batch; un dernier batch incomplet est abandonné.

    Args:
        tokens: flux d'identifiants [N]
        batch_size: voies par batch
        seq_len: longueur L des séquences

    Returns:
        list[SequenceBatch]: inputs et targets [L x batch_size]
    """
    if batch_size < 1 or seq_len < 1:
        raise ConfigError(f"batch_size et seq_len doivent être >= 1 ({batch_size}, {seq_len})")
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 1 or len(tokens) <= seq_len:
        raise DataError(
            f"Flux de {len(tokens)} jetons trop court pour seq_len={seq_len}", code="CORPUS_TOO_SHORT"
        )
    n_windows = (len(tokens) - 1) // seq_len
    n_batches = n_windows // batch_size
    starts = np.arange(n_windows * seq_len, step=seq_len)
    offsets = np.arange(seq_len)

    batches = []
    for b in range(n_batches):
        lane_starts = starts[b * batch_size:(b + 1) * batch_size]
        index = offsets[:, None] + lane_starts[None, :]  # [L x B]
        batches.append(SequenceBatch(inputs=tokens[index], targets=tokens[index + 1]))
    return batches


# ============================================================================
# Glimpses MNIST
# ============================================================================

def make_glimpses(image: np.ndarray) -> np.ndarray:
    """
    Présente une image 28x28 comme 20 éléments de 49 pixels

    Quadrants parcourus haut-gauche, haut-droit, bas-gauche, bas-droit; pour
    chacun: le sous-échantillon 7x7 (lignes et colonnes paires) puis les quatre
    blocs 7x7 du quadrant dans le même ordre, chacun aplati ligne par ligne.

    Returns:
        np.ndarray [20 x 49]
    """
    if image.shape != (IMAGE_SIDE, IMAGE_SIDE):
        raise ShapeError(f"Image 28x28 attendue, reçu {image.shape}")
    if image.size and (image.min() < 0.0 or image.max() > 1.0):
        raise DataError("Pixels hors de [0, 1]: normaliser l'image avant make_glimpses", code="PIXEL_RANGE")

    half, block = IMAGE_SIDE // 2, IMAGE_SIDE // 4
    steps = []
    for top in (0, half):
        for left in (0, half):
            quadrant = image[top:top + half, left:left + half]
            steps.append(quadrant[0::2, 0::2].reshape(-1))
            for r in (0, block):
                for c in (0, block):
                    steps.append(quadrant[r:r + block, c:c + block].reshape(-1))
    return np.stack(steps)


def make_glimpse_sequence(image: np.ndarray, label: int) -> GlimpseSequence:
    if not 0 <= label < N_CLASSES:
        raise DataError(f"Étiquette {label} hors de 0-9", code="LABEL_RANGE")
    return GlimpseSequence(steps=make_glimpses(image), label=int(label))


def glimpse_batches(glimpses: np.ndarray, labels: np.ndarray, batch_size: int) -> List[SequenceBatch]:
    """Batches de classification [20 x B x 49]; le dernier batch partiel est conservé."""
    if glimpses.ndim != 3 or glimpses.shape[1:] != (GLIMPSE_STEPS, GLIMPSE_SIZE):
        raise ShapeError(f"Glimpses [N x 20 x 49] attendus, reçu {glimpses.shape}")
    if labels.shape != (glimpses.shape[0],):
        raise ShapeError(f"{labels.shape[0]} étiquettes pour {glimpses.shape[0]} séquences")
    batches = []
    for start in range(0, glimpses.shape[0], batch_size):
        chunk = glimpses[start:start + batch_size]
        batches.append(
            SequenceBatch(inputs=np.transpose(chunk, (1, 0, 2)), targets=labels[start:start + batch_size])
        )
    return batches


# ============================================================================
# Service
# ============================================================================

class DataService:
    """Charge les données brutes d'une tâche et les transforme en PreparedData."""

    @staticmethod
    def read_text(path: Optional[str], split: str) -> str:
        if not path:
            raise ConfigError(f"Chemin data.{split} requis pour cette tâche")
        try:
            return Path(path).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise map_exception(e, f"lecture du split '{split}' ({path})") from e

    def load_texts(self, task: Task, data: DataConfig) -> Dict[str, str]:
        """Textes bruts des trois splits selon la tâche."""
        if task == Task.CUSTOM_TEXT and bool(data.valid) != bool(data.test):
            raise ConfigError("custom_text: renseigner data.valid et data.test ensemble, ou aucun des deux")
        if task == Task.PTB_CHAR or (task == Task.CUSTOM_TEXT and data.valid and data.test):
            texts = {split: self.read_text(getattr(data, split), split) for split in SPLITS}
        elif task in (Task.TEXT8, Task.CUSTOM_TEXT):
            texts = self.split_fractions(self.read_text(data.train, "train"), data)
        else:
            raise ConfigError(f"La tâche {task.value} n'est pas une tâche texte")

        if data.max_train_chars is not None:
            texts["train"] = texts["train"][:data.max_train_chars]
        return texts

    @staticmethod
    def split_fractions(text: str, data: DataConfig) -> Dict[str, str]:
        """Découpe un fichier unique: début = train, puis valid, fin = test."""
        n_valid = int(len(text) * data.valid_fraction)
        n_test = int(len(text) * data.test_fraction)
        n_train = len(text) - n_valid - n_test
        return {
            "train": text[:n_train],
            "valid": text[n_train:n_train + n_valid],
            "test": text[n_train + n_valid:],
        }

    @measure_execution_time("prepare_text")
    def prepare_text(self, task: Task, data: DataConfig) -> PreparedData:
        texts = self.load_texts(task, data)
        vocab = build_vocab(texts["train"])
        tokens = {split: vocab.encode(texts[split], split) for split in SPLITS}
        logger.info(
            "🔤 Corpus encodé",
            task=task.value,
            vocab_size=len(vocab),
            **{f"{split}_chars": int(tokens[split].size) for split in SPLITS},
        )
        return PreparedData(task=task, vocab=vocab, tokens=tokens)

    @measure_execution_time("prepare_mnist")
    def prepare_mnist(self, data: DataConfig) -> PreparedData:
        if not (data.train and data.train_labels and data.test and data.test_labels):
            raise ConfigError("mnist_glimpses requiert data.train, data.train_labels, data.test, data.test_labels")
        train_images, train_labels = load_mnist_pair(data.train, data.train_labels)
        test_images, test_labels = load_mnist_pair(data.test, data.test_labels)
        if data.valid_size >= train_images.shape[0]:
            raise ConfigError(
                f"data.valid_size={data.valid_size} doit rester < {train_images.shape[0]} images"
            )

        def to_glimpses(images: np.ndarray, labels: np.ndarray) -> np.ndarray:
            sequences = [make_glimpse_sequence(image, label) for image, label in zip(images, labels)]
            if not sequences:
                return np.zeros((0, GLIMPSE_STEPS, GLIMPSE_SIZE))
            return np.stack([sequence.steps for sequence in sequences])

        cut = train_images.shape[0] - data.valid_size
        prepared = PreparedData(
            task=Task.MNIST_GLIMPSES,
            glimpses={
                "train": to_glimpses(train_images[:cut], train_labels[:cut]),
                "valid": to_glimpses(train_images[cut:], train_labels[cut:]),
                "test": to_glimpses(test_images, test_labels),
            },
            labels={"train": train_labels[:cut], "valid": train_labels[cut:], "test": test_labels},
        )
        logger.info("🖼️ Glimpses construits", **{split: prepared.split_size(split) for split in SPLITS})
        return prepared

    def prepare(self, config: RunConfig) -> PreparedData:
        if config.task.is_classification:
            return self.prepare_mnist(config.data)
        return self.prepare_text(config.task, config.data)

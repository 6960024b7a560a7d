"""
Fichiers d'un run: configurations ``.conf``, historique, trace CSV et données préparées

Fichier conf: lignes ``clé = valeur`` à clés pointées (``model.cell_size = 600``),
commentaires ``#``, valeur vide = non renseignée. Les chemins de données
relatifs sont résolus depuis le dossier du fichier; ``@bundled/`` désigne les
ressources du paquet.
"""

from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence
import csv
import json

import numpy as np
import structlog
from pydantic import ValidationError

from nlstm.core.config import BUNDLED_PREFIX, PACKAGE_DATA_DIR, PRESETS_DIR, get_settings
from nlstm.core.exceptions import ConfigError, DataError, map_exception
from nlstm.schemas.metrics import HistoryRecord, MetricRecord, TraceRow
from nlstm.schemas.run_config import RunConfig, Task
from nlstm.services.analysis_service import TRACE_HEADER
from nlstm.services.data_service import CharVocab, PreparedData, SPLITS
from nlstm.utils.validators import parse_assignment

logger = structlog.get_logger()

DATA_PATH_KEYS = ("data.train", "data.valid", "data.test", "data.train_labels", "data.test_labels")
HISTORY_FILE = "history.tsv"
CHECKPOINT_FILE = "best.ckpt"
RUN_CONF_FILE = "run.conf"
TRACE_FILE = "trace.csv"
MANIFEST_FILE = "manifest.json"
VOCAB_FILE = "vocab.json"


# ============================================================================
# Fichiers conf
# ============================================================================

def resolve_data_path(value: str, base_dir: Optional[Path]) -> str:
    if value.startswith(BUNDLED_PREFIX):
        return str(PACKAGE_DATA_DIR / value[len(BUNDLED_PREFIX):])
    path = Path(value)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return str(path)


def parse_conf_lines(lines: Iterable[str], source: str = "<conf>") -> Dict[str, str]:
    """Lignes conf -> dictionnaire plat {clé pointée: valeur brute}."""
    flat: Dict[str, str] = {}
    for number, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        try:
            key, value = parse_assignment(stripped)
        except ConfigError as e:
            raise ConfigError(f"{source}:{number}: {e.message}") from e
        flat[key] = value
    return flat


def unflatten(flat: Dict[str, str]) -> Dict[str, Any]:
    """{``model.cell_size``: ``600``} -> {``model``: {``cell_size``: ``600``}}; les valeurs vides sont omises."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        if value == "":
            continue
        node = nested
        *parents, leaf = key.split(".")
        for part in parents:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Clé {key!r} en conflit avec une valeur scalaire")
            node = child
        node[leaf] = value
    return nested


def flatten(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, dict):
            flat.update(flatten(value, f"{prefix}{key}."))
        else:
            flat[f"{prefix}{key}"] = value
    return flat


def build_run_config(flat: Dict[str, str]) -> RunConfig:
    try:
        return RunConfig.model_validate(unflatten(flat))
    except ValidationError as e:
        raise map_exception(e, "configuration invalide") from e


def parse_conf(text: str, base_dir: Optional[Path] = None) -> RunConfig:
    """Analyse un texte conf; ``base_dir`` sert à résoudre les chemins de données relatifs."""
    flat = parse_conf_lines(text.splitlines())
    for key in DATA_PATH_KEYS:
        if flat.get(key):
            flat[key] = resolve_data_path(flat[key], base_dir)
    return build_run_config(flat)


def serialize_conf(config: RunConfig) -> str:
    """Toutes les clés, triées; ``parse_conf(serialize_conf(c)) == c``."""
    lines = []
    for key, value in sorted(flatten(config.model_dump(mode="json")).items()):
        lines.append(f"{key} = {'' if value is None else value}")
    return "\n".join(lines) + "\n"


class RunRepository:
    """Lecture et écriture des fichiers d'un run."""

    # ------------------------------------------------------------------
    # Configuration
    # ------------------------------------------------------------------

    @staticmethod
    def locate_conf(reference: str) -> Path:
        """Chemin d'un fichier conf ou nom d'un preset embarqué (``ptb``, ``smoke``...)."""
        path = Path(reference)
        if path.is_file():
            return path
        preset = PRESETS_DIR / f"{reference}.conf"
        if "/" not in reference and preset.is_file():
            return preset
        available = ", ".join(sorted(p.stem for p in PRESETS_DIR.glob("*.conf")))
        raise ConfigError(f"Configuration introuvable: {reference!r} (presets: {available})")

    def load_run_config(
        self,
        reference: str,
        overrides: Sequence[str] = (),
        seed: Optional[int] = None,
        out_dir: Optional[str] = None,
    ) -> RunConfig:
        """
        Charge une configuration et applique les surcharges de la ligne de commande

        Args:
            reference: chemin ou nom de preset
            overrides: affectations ``--set clé=valeur``
            seed: ``--seed`` (fixe model.seed et train.seed)
            out_dir: ``--out``
        """
        path = self.locate_conf(reference)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise map_exception(e, f"lecture de {path}") from e

        flat = parse_conf_lines(text.splitlines(), str(path))
        base_dir = path.resolve().parent
        for key in DATA_PATH_KEYS:
            if flat.get(key):
                flat[key] = resolve_data_path(flat[key], base_dir)

        for assignment in overrides:
            key, value = parse_assignment(assignment)
            flat[key] = resolve_data_path(value, Path.cwd()) if key in DATA_PATH_KEYS and value else value
        if seed is not None:
            flat["model.seed"] = flat["train.seed"] = str(seed)
        if out_dir is not None:
            flat["out_dir"] = out_dir

        config = build_run_config(flat)
        logger.debug("⚙️ Configuration chargée", source=str(path), task=config.task.value)
        return config

    @staticmethod
    def out_dir(config: RunConfig) -> Path:
        return Path(config.out_dir or Path(get_settings().runs_dir) / config.task.value)

    def prepared_dir(self, config: RunConfig) -> Path:
        if config.data.prepared_dir:
            return Path(config.data.prepared_dir)
        return self.out_dir(config) / "data"

    @staticmethod
    def check_data_paths(config: RunConfig) -> None:
        """Vérifie que tous les fichiers de données référencés existent."""
        missing = [
            f"{key}={getattr(config.data, key.split('.', 1)[1])}"
            for key in DATA_PATH_KEYS
            if getattr(config.data, key.split(".", 1)[1])
            and not Path(getattr(config.data, key.split(".", 1)[1])).is_file()
        ]
        if missing:
            raise DataError(f"Fichiers de données introuvables: {', '.join(missing)}", code="FILE_NOT_FOUND")

    def save_run_config(self, directory: Path, config: RunConfig) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / RUN_CONF_FILE
        path.write_text(serialize_conf(config), encoding="utf-8")
        return path

    # ------------------------------------------------------------------
    # Historique et trace
    # ------------------------------------------------------------------

    @staticmethod
    def start_history(path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("", encoding="utf-8")
        return path

    @staticmethod
    def append_history(path: Path, record: HistoryRecord) -> None:
        with path.open("a", encoding="utf-8", newline="\n") as handle:
            for metric in record.records:
                handle.write(metric.to_line() + "\n")

    @staticmethod
    def read_history(path: Path) -> List[MetricRecord]:
        if not path.is_file():
            raise DataError(f"Historique introuvable: {path}", code="FILE_NOT_FOUND")
        records = []
        for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            fields = line.split("\t")
            if len(fields) != 4:
                raise DataError(f"{path}:{number}: ligne d'historique invalide", code="HISTORY_FORMAT")
            epoch, split, name, value = fields
            try:
                records.append(MetricRecord(epoch=int(epoch), split=split, name=name, value=float(value)))
            except (ValueError, ValidationError) as e:
                raise DataError(f"{path}:{number}: {e}", code="HISTORY_FORMAT") from e
        return records

    @staticmethod
    def write_trace(path: Path, rows: Iterable[TraceRow]) -> int:
        path.parent.mkdir(parents=True, exist_ok=True)
        count = 0
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for row in rows:
                writer.writerow([row.t, row.input, row.level, row.unit, repr(row.value)])
                count += 1
        return count

    # ------------------------------------------------------------------
    # Données préparées
    # ------------------------------------------------------------------

    def save_prepared(self, directory: Path, prepared: PreparedData) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        manifest: Dict[str, Any] = {
            "task": prepared.task.value,
            "input_size": prepared.input_size,
            "output_size": prepared.output_size,
            "splits": {split: prepared.split_size(split) for split in prepared.splits},
        }
        if prepared.task.is_classification:
            for split in prepared.splits:
                np.save(directory / f"{split}_glimpses.npy", prepared.glimpses[split])
                np.save(directory / f"{split}_labels.npy", prepared.labels[split])
        else:
            (directory / VOCAB_FILE).write_text(
                json.dumps({"chars": list(prepared.vocab.chars)}, ensure_ascii=False), encoding="utf-8"
            )
            for split in prepared.splits:
                np.save(directory / f"{split}.npy", prepared.tokens[split])
        (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
        logger.info("📦 Données préparées écrites", directory=str(directory), **manifest["splits"])
        return directory

    def load_prepared(self, directory: Path) -> PreparedData:
        manifest_path = directory / MANIFEST_FILE
        if not manifest_path.is_file():
            raise DataError(
                f"Données préparées absentes de {directory}: lancer d'abord la commande prep",
                code="PREPARED_DATA_MISSING",
            )
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            task = Task(manifest["task"])
            splits = [split for split in SPLITS if split in manifest["splits"]]
            if task.is_classification:
                return PreparedData(
                    task=task,
                    glimpses={s: np.load(directory / f"{s}_glimpses.npy") for s in splits},
                    labels={s: np.load(directory / f"{s}_labels.npy") for s in splits},
                )
            vocab_data = json.loads((directory / VOCAB_FILE).read_text(encoding="utf-8"))
            return PreparedData(
                task=task,
                vocab=CharVocab(tuple(vocab_data["chars"])),
                tokens={s: np.load(directory / f"{s}.npy") for s in splits},
            )
        except (KeyError, ValueError) as e:
            raise DataError(f"Données préparées illisibles dans {directory}: {e}", code="PREPARED_DATA_INVALID") from e
        except OSError as e:
            raise map_exception(e, f"lecture de {directory}") from e

"""
Orchestration des commandes: préparation, entraînement, évaluation, trace
et table des paramètres
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import structlog

from nlstm.core.exceptions import ConfigError, DataError
from nlstm.models.network import build_model, match_cell_size, parameter_count
from nlstm.repositories.checkpoint_repository import CheckpointRepository
from nlstm.repositories.run_repository import (
    CHECKPOINT_FILE,
    HISTORY_FILE,
    TRACE_FILE,
    RunRepository,
)
from nlstm.schemas.metrics import MetricRecord, ParamRow, TraceRow
from nlstm.schemas.run_config import Architecture, ModelConfig, RunConfig, Task
from nlstm.services.analysis_service import evaluate, flip_rates, trace_activations
from nlstm.services.data_service import GLIMPSE_SIZE, DataService, PreparedData
from nlstm.services.training_service import TrainingResult, TrainingService
from nlstm.utils.idx_loader import N_CLASSES
from nlstm.utils.performance import measure_execution_time

logger = structlog.get_logger()

# Tailles d'entrée/sortie des corpus de référence
TASK_SIZES: Dict[Task, Tuple[int, int]] = {
    Task.PTB_CHAR: (50, 50),
    Task.TEXT8: (27, 27),
    Task.MNIST_GLIMPSES: (GLIMPSE_SIZE, N_CLASSES),
}

# Formes publiées: (architecture, couches, profondeur, cellule)
BASELINES: Dict[Task, List[Tuple[Architecture, int, int, int]]] = {
    Task.PTB_CHAR: [
        (Architecture.LSTM, 1, 1, 1000),
        (Architecture.LSTM, 1, 1, 1050),
        (Architecture.STACKED, 2, 1, 600),
        (Architecture.STACKED, 3, 1, 450),
        (Architecture.NLSTM, 1, 2, 600),
    ],
    Task.MNIST_GLIMPSES: [
        (Architecture.LSTM, 1, 1, 100),
        (Architecture.LSTM, 1, 1, 130),
        (Architecture.STACKED, 2, 1, 75),
        (Architecture.STACKED, 3, 1, 60),
        (Architecture.NLSTM, 1, 2, 75),
    ],
    Task.TEXT8: [
        (Architecture.LSTM, 1, 1, 2000),
        (Architecture.LSTM, 1, 1, 2100),
        (Architecture.STACKED, 2, 1, 1200),
        (Architecture.STACKED, 3, 1, 950),
        (Architecture.NLSTM, 1, 2, 1200),
    ],
}


def round_count(count: int) -> str:
    """Arrondi des tables: ``4.47M``, ``61.0k``."""
    if count >= 1_000_000:
        return f"{count / 1_000_000:.2f}M"
    if count >= 1_000:
        return f"{count / 1_000:.1f}k"
    return str(count)


def param_row(label: str, config: ModelConfig) -> ParamRow:
    count = parameter_count(config)
    return ParamRow(
        label=label,
        architecture=config.architecture.value,
        n=config.nesting_depth if config.architecture == Architecture.NLSTM else config.layers,
        cell_size=config.cell_size,
        count=count,
        rounded=round_count(count),
    )


@dataclass
class TraceReport:
    rows: List[TraceRow]
    rates: Dict[str, float]
    path: Path


class PipelineService:
    def __init__(
        self,
        data_service: Optional[DataService] = None,
        training_service: Optional[TrainingService] = None,
        run_repository: Optional[RunRepository] = None,
        checkpoint_repository: Optional[CheckpointRepository] = None,
    ):
        self.data_service = data_service or DataService()
        self.training_service = training_service or TrainingService()
        self.run_repository = run_repository or RunRepository()
        self.checkpoint_repository = checkpoint_repository or CheckpointRepository()

    # ===========================================
    # Données
    # ===========================================

    @measure_execution_time("prep")
    def prepare(self, config: RunConfig) -> Tuple[PreparedData, Path]:
        self.run_repository.check_data_paths(config)
        prepared = self.data_service.prepare(config)
        directory = self.run_repository.save_prepared(self.run_repository.prepared_dir(config), prepared)
        return prepared, directory

    def load_prepared(self, config: RunConfig) -> PreparedData:
        prepared = self.run_repository.load_prepared(self.run_repository.prepared_dir(config))
        if prepared.task != config.task:
            raise ConfigError(
                f"Données préparées pour {prepared.task.value}, configuration pour {config.task.value}"
            )
        return prepared

    @staticmethod
    def resolve(config: RunConfig, input_size: int, output_size: int) -> RunConfig:
        """Renseigne input_size/output_size du modèle; une valeur explicite différente est une erreur."""
        model = config.model
        for name, value in (("input_size", input_size), ("output_size", output_size)):
            current = getattr(model, name)
            if current is not None and current != value:
                raise ConfigError(f"model.{name}={current} alors que les données imposent {value}")
        resolved = model.model_copy(update={"input_size": input_size, "output_size": output_size})
        return config.model_copy(update={"model": ModelConfig.model_validate(resolved.model_dump())})

    # ===========================================
    # Entraînement et évaluation
    # ===========================================

    def train(self, config: RunConfig) -> Tuple[TrainingResult, Path]:
        prepared = self.load_prepared(config)
        config = self.resolve(config, prepared.input_size, prepared.output_size)
        out_dir = self.run_repository.out_dir(config)
        self.run_repository.save_run_config(out_dir, config)
        history_path = self.run_repository.start_history(out_dir / HISTORY_FILE)

        model = build_model(config.model)
        logger.info(
            "🧠 Modèle construit",
            architecture=config.model.architecture.value,
            parameters=parameter_count(config.model),
        )
        result = self.training_service.run_training(
            model,
            prepared,
            config.train,
            on_epoch=lambda record: self.run_repository.append_history(history_path, record),
        )
        self.checkpoint_repository.save(out_dir / CHECKPOINT_FILE, result.best_model, result.best_epoch)
        return result, out_dir

    def _load_for_analysis(self, config: RunConfig, checkpoint: str):
        prepared = self.load_prepared(config)
        config = self.resolve(config, prepared.input_size, prepared.output_size)
        model, epoch = self.checkpoint_repository.load(checkpoint, expected=config.model)
        return prepared, config, model, epoch

    @measure_execution_time("eval")
    def evaluate(self, config: RunConfig, checkpoint: str, split: str = "valid") -> List[MetricRecord]:
        prepared, config, model, epoch = self._load_for_analysis(config, checkpoint)
        batches = prepared.batches(split, config.train.resolved_eval_batch_size, config.train.seq_len, evaluation=True)
        return evaluate(model, batches, split, epoch)

    def trace(self, config: RunConfig, checkpoint: str, split: str, units: range,
              length: int, offset: int = 0) -> TraceReport:
        if config.task.is_classification:
            raise ConfigError("La trace d'activations ne concerne que les tâches texte")
        prepared, config, model, _ = self._load_for_analysis(config, checkpoint)
        tokens = prepared.tokens.get(split)
        if tokens is None:
            raise DataError(f"Split '{split}' absent des données préparées", code="SPLIT_NOT_FOUND")
        if offset < 0 or length < 1 or offset + length > len(tokens):
            raise DataError(
                f"Séquence [{offset}, {offset + length}) hors du split '{split}' ({len(tokens)} caractères)",
                code="TRACE_RANGE",
            )
        ids = tokens[offset:offset + length]
        rows = trace_activations(model, ids, units, symbols=prepared.vocab.decode(ids))
        path = self.run_repository.out_dir(config) / TRACE_FILE
        self.run_repository.write_trace(path, rows)
        return TraceReport(rows=rows, rates=flip_rates(rows), path=path)

    # ===========================================
    # Paramètres
    # ===========================================

    def _io_sizes(self, config: RunConfig) -> Tuple[int, int]:
        model = config.model
        if model.is_resolved:
            return model.input_size, model.output_size
        if config.task in TASK_SIZES:
            return TASK_SIZES[config.task]
        try:
            prepared = self.load_prepared(config)
        except DataError as e:
            raise ConfigError(
                "custom_text: renseigner model.input_size/model.output_size ou lancer prep d'abord"
            ) from e
        return prepared.input_size, prepared.output_size

    def param_table(self, config: RunConfig) -> List[ParamRow]:
        """Modèle configuré puis formes de référence de la tâche (ou formes ajustées au même budget)."""
        input_size, output_size = self._io_sizes(config)
        configured = self.resolve(config, input_size, output_size).model
        rows = [param_row("configured", configured)]

        def shape(architecture: Architecture, layers: int, depth: int, cell: int) -> ModelConfig:
            return ModelConfig(
                architecture=architecture, layers=layers, nesting_depth=depth, cell_size=cell,
                input_size=input_size, output_size=output_size,
            )

        if config.task in BASELINES:
            shapes = [shape(*baseline) for baseline in BASELINES[config.task]]
        else:
            budget = parameter_count(configured)
            shapes = []
            for architecture, layers, depth in (
                (Architecture.LSTM, 1, 1),
                (Architecture.STACKED, 2, 1),
                (Architecture.STACKED, 3, 1),
                (Architecture.NLSTM, 1, 2),
            ):
                template = shape(architecture, layers, depth, 1)
                shapes.append(template.model_copy(update={"cell_size": match_cell_size(budget, template)}))
        rows.extend(param_row("baseline", model) for model in shapes)
        return rows

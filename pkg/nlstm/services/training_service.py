"""
Entraînement: optimiseurs Adam et RMSProp, écrêtage par norme globale,
boucle d'époques et sélection du meilleur modèle sur la validation
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple
import math

import numpy as np
import structlog

from nlstm.core.config import get_settings
from nlstm.core.exceptions import ConfigError, DataError, DivergenceError, NonFiniteError
from nlstm.models.network import Model, loss_and_gradients
from nlstm.schemas.metrics import HistoryRecord
from nlstm.schemas.run_config import TrainConfig
from nlstm.services.analysis_service import evaluate, metric_records
from nlstm.services.data_service import PreparedData
from nlstm.utils.performance import Stopwatch, measure_execution_time

logger = structlog.get_logger()

Tensors = Dict[str, np.ndarray]


# ============================================================================
# Écrêtage et pas d'optimisation (fonctions pures)
# ============================================================================

def global_norm(grads: Tensors) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_by_global_norm(grads: Tensors, threshold: float) -> Tensors:
    """Réduit tous les gradients d'un même facteur si leur norme L2 globale dépasse ``threshold``."""
    if threshold <= 0.0:
        raise ConfigError(f"Le seuil d'écrêtage doit être > 0 (reçu {threshold})")
    norm = global_norm(grads)
    if norm <= threshold:
        return grads
    scale = threshold / norm
    return {name: g * scale for name, g in grads.items()}


@dataclass(frozen=True)
class AdamState:
    m: Tensors
    v: Tensors
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Tensors, **hyper) -> "AdamState":
        return cls(
            m={name: np.zeros_like(p) for name, p in params.items()},
            v={name: np.zeros_like(p) for name, p in params.items()},
            **hyper,
        )


@dataclass(frozen=True)
class RmsPropState:
    mean_square: Tensors
    decay: float = 0.9
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Tensors, **hyper) -> "RmsPropState":
        return cls(mean_square={name: np.zeros_like(p) for name, p in params.items()}, **hyper)


def _check_shapes(params: Tensors, grads: Tensors) -> None:
    for name, p in params.items():
        if name not in grads or grads[name].shape != p.shape:
            raise ConfigError(f"Gradient manquant ou de mauvaise forme pour {name}")


def adam_step(params: Tensors, grads: Tensors, state: AdamState, lr: float) -> Tuple[Tensors, AdamState]:
    """Un pas d'Adam avec correction de biais des moments."""
    _check_shapes(params, grads)
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_params, m, v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = m[name] / (1.0 - b1 ** t)
        v_hat = v[name] / (1.0 - b2 ** t)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_params, replace(state, m=m, v=v, t=t)


def rmsprop_step(params: Tensors, grads: Tensors, state: RmsPropState, lr: float) -> Tuple[Tensors, RmsPropState]:
    _check_shapes(params, grads)
    decay = state.decay
    new_params, mean_square = {}, {}
    for name, p in params.items():
        g = grads[name]
        mean_square[name] = decay * state.mean_square[name] + (1.0 - decay) * g * g
        new_params[name] = p - lr * g / (np.sqrt(mean_square[name]) + state.epsilon)
    return new_params, replace(state, mean_square=mean_square)


# ============================================================================
# Optimiseurs (état porté par l'objet)
# ============================================================================

class AdamOptimizer:
    def __init__(self, config: TrainConfig):
        self.learning_rate = config.learning_rate
        self.hyper = {"beta1": config.beta1, "beta2": config.beta2, "epsilon": config.epsilon}
        self.state: Optional[AdamState] = None

    def step(self, model: Model, grads: Tensors) -> Model:
        params = model.tensor_dict()
        if self.state is None:
            self.state = AdamState.zeros_like(params, **self.hyper)
        params, self.state = adam_step(params, grads, self.state, self.learning_rate)
        return model.with_tensors(params)


class RmsPropOptimizer:
    def __init__(self, config: TrainConfig):
        self.learning_rate = config.learning_rate
        self.hyper = {"decay": config.decay, "epsilon": config.epsilon}
        self.state: Optional[RmsPropState] = None

    def step(self, model: Model, grads: Tensors) -> Model:
        params = model.tensor_dict()
        if self.state is None:
            self.state = RmsPropState.zeros_like(params, **self.hyper)
        params, self.state = rmsprop_step(params, grads, self.state, self.learning_rate)
        return model.with_tensors(params)


def make_optimizer(config: TrainConfig):
    if config.optimizer == "adam":
        return AdamOptimizer(config)
    if config.optimizer == "rmsprop":
        return RmsPropOptimizer(config)
    raise ConfigError(f"Optimiseur inconnu: {config.optimizer}")


# ============================================================================
# Boucle d'entraînement
# ============================================================================

@dataclass
class TrainingResult:
    history: List[HistoryRecord] = field(default_factory=list)
    best_model: Optional[Model] = None
    best_epoch: int = 0
    steps: int = 0


class TrainingService:
    def __init__(self, log_every_steps: Optional[int] = None):
        self.log_every_steps = log_every_steps or get_settings().log_every_steps

    @measure_execution_time("run_training")
    def run_training(
        self,
        model: Model,
        data: PreparedData,
        config: TrainConfig,
        on_epoch: Optional[Callable[[HistoryRecord], None]] = None,
    ) -> TrainingResult:
        """
        Entraîne ``model`` sur ``data``

        Chaque époque parcourt séquentiellement les batches d'entraînement
        (écrêtage puis pas d'optimisation par batch), puis évalue la
        validation. Le meilleur modèle est celui de plus faible métrique de
        validation; à égalité, la plus ancienne époque l'emporte.

        Args:
            model: modèle initial
            data: données préparées
            config: hyperparamètres d'entraînement
            on_epoch: appelé avec chaque HistoryRecord dès qu'il est complet

        Returns:
            TrainingResult: historique, meilleur modèle et son époque

        Raises:
            DivergenceError: perte non finie (époque et index du batch en détail)
        """
        result = TrainingResult(best_model=model)
        if config.epochs == 0:
            logger.info("⏭️ epochs=0: modèle initial conservé")
            return result

        classification = data.task.is_classification
        selection = "nll" if classification else config.selection_metric
        train_batches = data.batches("train", config.batch_size, config.seq_len)
        valid_batches = data.batches("valid", config.resolved_eval_batch_size, config.seq_len, evaluation=True)
        if not train_batches:
            raise DataError(
                f"Split train trop court pour un batch de {config.batch_size} x {config.seq_len}",
                code="CORPUS_TOO_SHORT",
            )

        optimizer = make_optimizer(config)
        best_value = math.inf
        for epoch in range(1, config.epochs + 1):
            watch = Stopwatch()
            losses, correct, seen = [], 0, 0
            for batch_index, batch in enumerate(train_batches):
                loss, grads, forward = self._loss_and_gradients(model, batch, epoch, batch_index)
                losses.append(loss)
                if classification:
                    correct += int(np.sum(np.argmax(forward.logits[-1], axis=1) == batch.targets))
                    seen += batch.lanes
                model = optimizer.step(model, clip_by_global_norm(grads, config.clip_threshold))
                result.steps += 1
                if result.steps % self.log_every_steps == 0:
                    logger.info("📉 Progression", epoch=epoch, step=result.steps, batch_index=batch_index, loss=loss)
                if config.max_steps and result.steps >= config.max_steps:
                    break

            budget_reached = bool(config.max_steps) and result.steps >= config.max_steps
            last_epoch = epoch == config.epochs or budget_reached
            record = HistoryRecord(
                epoch=epoch,
                steps=result.steps,
                records=metric_records(
                    float(np.mean(losses)), "train", epoch, correct / seen if classification else None
                ),
            )
            if epoch % config.eval_every == 0 or last_epoch:
                valid = evaluate(model, valid_batches, "valid", epoch)
                record.records.extend(valid)
                value = next(r.value for r in valid if r.name == selection)
                if value < best_value:
                    best_value, result.best_model, result.best_epoch = value, model, epoch
            record.wall_time = watch.elapsed()
            result.history.append(record)

            logger.info(
                "🧪 Époque terminée",
                epoch=epoch,
                steps=result.steps,
                wall_time=record.wall_time,
                **{f"{r.split}_{r.name}": r.value for r in record.records},
            )
            if on_epoch is not None:
                on_epoch(record)
            if last_epoch:
                break

        logger.info("🏁 Entraînement terminé", best_epoch=result.best_epoch, best_value=best_value, metric=selection)
        return result

    @staticmethod
    def _loss_and_gradients(model: Model, batch, epoch: int, batch_index: int):
        details = {"epoch": epoch, "batch_index": batch_index}
        try:
            loss, grads, forward = loss_and_gradients(model, batch)
        except NonFiniteError as e:
            raise DivergenceError(
                f"Divergence à l'époque {epoch}, batch {batch_index}: {e.message}", details=details
            ) from e
        if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise DivergenceError(
                f"Perte ou gradient non fini à l'époque {epoch}, batch {batch_index} (perte={loss})",
                details=details,
            )
        return loss, grads, forward

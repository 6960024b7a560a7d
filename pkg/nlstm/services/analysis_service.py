"""
Métriques (NLL, BPC, perplexité, précision) et export des traces d'activation

La trace enregistre, pas à pas, la mémoire de chaque niveau: c_t directement
pour le niveau externe d'une NLSTM (borné par construction), tanh de la
mémoire pour les niveaux internes et pour les couches d'un LSTM empilé.
"""

import math
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import structlog

from nlstm.core.exceptions import ShapeError, UnitRangeError
from nlstm.models.cells import StepCache
from nlstm.models.network import Model, SequenceBatch, classify_last_step, forward_sequence, sequence_loss
from nlstm.schemas.metrics import MetricRecord, TraceRow
from nlstm.schemas.run_config import Architecture
from nlstm.utils.validators import escape_symbol

logger = structlog.get_logger()

TRACE_HEADER = ("t", "input", "level", "unit", "value")


def bpc(mean_nll: float) -> float:
    """Bits par caractère: NLL (log naturel) divisée par ln 2."""
    return mean_nll / math.log(2.0)


def perplexity(mean_nll: float) -> float:
    try:
        return math.exp(mean_nll)
    except OverflowError:
        return math.inf


def metric_records(nll: float, split: str, epoch: int, accuracy: Optional[float] = None) -> List[MetricRecord]:
    """Enregistrements cohérents: bpc et perplexité dérivés de la même NLL."""
    if accuracy is not None:
        return [
            MetricRecord(epoch=epoch, split=split, name="nll", value=nll),
            MetricRecord(epoch=epoch, split=split, name="accuracy", value=accuracy),
        ]
    return [
        MetricRecord(epoch=epoch, split=split, name="nll", value=nll),
        MetricRecord(epoch=epoch, split=split, name="bpc", value=bpc(nll)),
        MetricRecord(epoch=epoch, split=split, name="perplexity", value=perplexity(nll)),
    ]


def evaluate(model: Model, batches: Sequence[SequenceBatch], split: str = "valid", epoch: int = 0) -> List[MetricRecord]:
    """
    Évalue un modèle sur un split, sans calcul de gradient

    La NLL est moyennée par prédiction (caractère, ou séquence en
    classification), les batches étant pondérés par leur nombre de prédictions.
    """
    if not batches:
        raise ShapeError(f"Aucun batch à évaluer pour le split '{split}'")

    total_loss, total_count, correct = 0.0, 0, 0
    classification = batches[0].is_classification
    for batch in batches:
        if classification:
            loss, predicted = classify_last_step(model, batch)
            count = batch.lanes
            correct += int(np.sum(predicted == batch.targets))
        else:
            loss, _ = sequence_loss(forward_sequence(model, batch).logits, batch.targets)
            count = batch.targets.size
        total_loss += loss * count
        total_count += count

    nll = total_loss / total_count
    accuracy = correct / total_count if classification else None
    return metric_records(nll, split, epoch, accuracy)


# ============================================================================
# Traces d'activation
# ============================================================================

def _level_values(cache: StepCache, outer_direct: bool) -> List[np.ndarray]:
    """Valeurs tracées de chaque niveau d'une cellule, de l'externe vers l'interne."""
    values = [cache.c if outer_direct else np.tanh(cache.c)]
    inner = cache.inner_cache
    while inner is not None:
        values.append(np.tanh(inner.c))
        inner = inner.inner_cache
    return values


def level_names(model: Model) -> List[str]:
    """Noms des niveaux tracés, dans l'ordre des valeurs de ``_level_values``."""
    config = model.config
    if config.architecture != Architecture.NLSTM:
        return [f"layer-{index + 1}" for index in range(config.layers)]
    nested = ["outer"] + [f"inner-{k}" for k in range(1, config.nesting_depth)]
    if config.layers == 1:
        return nested
    return [f"layer-{index + 1}.{name}" for index in range(config.layers) for name in nested]


def trace_activations(model: Model, token_ids: Sequence[int], units: range,
                      symbols: Optional[Sequence[str]] = None) -> List[TraceRow]:
    """
    Trace les mémoires d'un modèle sur une séquence de caractères

    Args:
        model: modèle entraîné ou non
        token_ids: séquence d'identifiants, déroulée depuis un état nul
        units: unités enregistrées (``range``, bornes de ``parse_units``)
        symbols: caractère affiché pour chaque pas (identifiant par défaut)

    Returns:
        list[TraceRow]: une ligne par (pas, niveau, unité)

    Raises:
        UnitRangeError: si la plage dépasse la taille des cellules
    """
    if len(units) == 0 or units.start < 0 or units.stop > model.cell_size:
        raise UnitRangeError(
            f"Unités {units.start}..{units.stop - 1} hors de [0, {model.cell_size - 1}]",
            details={"cell_size": model.cell_size},
        )
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise ShapeError("La séquence tracée doit être un vecteur non vide d'identifiants")
    if symbols is not None and len(symbols) != ids.size:
        raise ShapeError(f"{len(symbols)} symboles pour {ids.size} pas")

    inputs = ids[:, None]
    result = forward_sequence(model, SequenceBatch(inputs=inputs, targets=inputs))
    names = level_names(model)
    outer_direct = model.config.architecture == Architecture.NLSTM

    rows = []
    for t, caches in enumerate(result.step_caches):
        symbol = escape_symbol(symbols[t]) if symbols is not None else str(int(ids[t]))
        values = [v for cache in caches for v in _level_values(cache, outer_direct)]
        for level, value in zip(names, values):
            lane = value[0]
            rows.extend(
                TraceRow(t=t, input=symbol, level=level, unit=unit, value=float(lane[unit]))
                for unit in units
            )
    logger.info("🔬 Trace calculée", steps=int(ids.size), levels=len(names), units=len(units), rows=len(rows))
    return rows


def flip_rates(rows: Iterable[TraceRow]) -> Dict[str, float]:
    """
    Variation moyenne |v_t - v_{t-1}| de chaque niveau

    Ajoute ``inner/outer`` (rapport des moyennes) quand la trace contient des
    niveaux internes et externes. Statistique descriptive, sans seuil.
    """
    series: Dict[tuple, List[tuple]] = defaultdict(list)
    for row in rows:
        series[(row.level, row.unit)].append((row.t, row.value))

    changes: Dict[str, List[float]] = defaultdict(list)
    for (level, _), points in series.items():
        values = np.array([value for _, value in sorted(points)])
        changes[level].extend(np.abs(np.diff(values)).tolist())

    rates = {level: float(np.mean(deltas)) if deltas else 0.0 for level, deltas in changes.items()}
    inner = [rate for level, rate in rates.items() if "inner" in level]
    outer = [rate for level, rate in rates.items() if level.endswith("outer")]
    if inner and outer and np.mean(outer) > 0.0:
        rates["inner/outer"] = float(np.mean(inner) / np.mean(outer))
    return rates

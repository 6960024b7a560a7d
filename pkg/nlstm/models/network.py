"""
Réseau complet: encodage one-hot, pile de cellules, projection de sortie

Les séquences sont en ordre temps-majeur: ``inputs`` vaut [T x B] (indices
de caractères) ou [T x B x D] (vecteurs denses, glimpses MNIST). La
rétropropagation est tronquée à la frontière de la séquence: chaque batch
démarre d'un état nul.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple
import numpy as np

from nlstm.core.exceptions import ConfigError, ConsistencyError, ShapeError, TargetIndexError
from nlstm.core.numerics import (
    Activation,
    glorot_uniform,
    make_rng,
    matmul,
    orthogonal,
    softmax_xent_rows,
)
from nlstm.models.cells import (
    GATE_NAMES,
    Addition,
    CellActivations,
    CellParams,
    CellState,
    GateBlock,
    MemoryFunction,
    Nested,
    StepCache,
    cell_backward,
    cell_forward,
    cell_param_count,
    zero_state,
)
from nlstm.schemas.run_config import ModelConfig

PROJECTION_WEIGHTS = "projection.w"
PROJECTION_BIAS = "projection.b"


@dataclass(frozen=True)
class SequenceBatch:
    """
    Un batch de séquences

    Attributes:
        inputs: [T x B] entiers ou [T x B x D] réels
        targets: [T x B] (caractère suivant) ou [B] (une classe par voie)
    """
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim not in (2, 3):
            raise ShapeError(f"inputs doit être [T x B] ou [T x B x D], reçu {self.inputs.shape}")
        seq_len, lanes = self.inputs.shape[:2]
        if self.targets.shape not in ((seq_len, lanes), (lanes,)):
            raise ShapeError(f"targets {self.targets.shape} incompatible avec inputs {self.inputs.shape}")

    @property
    def seq_len(self) -> int:
        return self.inputs.shape[0]

    @property
    def lanes(self) -> int:
        return self.inputs.shape[1]

    @property
    def is_classification(self) -> bool:
        return self.targets.ndim == 1


@dataclass(frozen=True)
class Model:
    config: ModelConfig
    layers: Tuple[CellParams, ...]
    projection: np.ndarray
    projection_bias: np.ndarray

    @property
    def input_size(self) -> int:
        return self.layers[0].input_size

    @property
    def output_size(self) -> int:
        return self.projection.shape[1]

    @property
    def cell_size(self) -> int:
        return self.projection.shape[0]

    def named_tensors(self) -> Iterator[Tuple[str, np.ndarray]]:
        """Vue plate et ordonnée de tous les tenseurs (optimiseurs, checkpoints)."""
        for index, layer in enumerate(self.layers):
            yield from layer.named_tensors(f"layers.{index}.")
        yield PROJECTION_WEIGHTS, self.projection
        yield PROJECTION_BIAS, self.projection_bias

    def tensor_dict(self) -> Dict[str, np.ndarray]:
        return dict(self.named_tensors())

    def with_tensors(self, tensors: Dict[str, np.ndarray]) -> "Model":
        expected = [name for name, _ in self.named_tensors()]
        unknown = sorted(set(tensors) - set(expected))
        if unknown:
            raise ConsistencyError(f"Tenseurs inconnus: {', '.join(unknown)}")
        try:
            projection = tensors[PROJECTION_WEIGHTS]
            projection_bias = tensors[PROJECTION_BIAS]
        except KeyError as e:
            raise ConsistencyError(f"Tenseur manquant: {e.args[0]}") from e
        if projection.shape != self.projection.shape or projection_bias.shape != self.projection_bias.shape:
            raise ConsistencyError(
                f"Projection {projection.shape}/{projection_bias.shape}, "
                f"attendue {self.projection.shape}/{self.projection_bias.shape}"
            )
        layers = tuple(
            layer.with_tensors(tensors, f"layers.{index}.") for index, layer in enumerate(self.layers)
        )
        return Model(self.config, layers, projection, projection_bias)


@dataclass
class ForwardResult:
    """
    Résultat d'une passe avant

    Attributes:
        logits: [T x B x V]
        final_states: état final de chaque couche
        step_caches: step_caches[t][couche]
        h_top: sorties de la couche supérieure [T x B x k]
    """
    logits: np.ndarray
    final_states: List[CellState]
    step_caches: List[List[StepCache]] = field(default_factory=list)
    h_top: Optional[np.ndarray] = None


# ============================================================================
# Construction
# ============================================================================

def _gate(rng: Optional[np.random.Generator], input_size: int, cell_size: int,
          glorot: bool, bias: float) -> GateBlock:
    if rng is None:
        w_x = np.zeros((input_size, cell_size))
        w_h = np.zeros((cell_size, cell_size))
    else:
        w_x = glorot_uniform(rng, input_size, cell_size) if glorot else orthogonal(rng, input_size, cell_size)
        w_h = orthogonal(rng, cell_size, cell_size)
    return GateBlock(w_x=w_x, w_h=w_h, b=np.full(cell_size, bias))


def _build_cell(config: ModelConfig, rng: Optional[np.random.Generator], input_size: int,
                levels: int, glorot: bool, candidate: Activation) -> CellParams:
    gates = [
        _gate(rng, input_size, config.cell_size, glorot,
              config.forget_bias if name == "forget_gate" else 0.0)
        for name in GATE_NAMES
    ]
    memory: MemoryFunction = Addition()
    if levels > 1:
        # les niveaux internes utilisent toujours sigmoid/tanh/tanh
        inner = _build_cell(config, rng, config.cell_size, levels - 1, False, Activation.TANH)
        memory = Nested(inner)
    return CellParams(*gates, memory=memory, activations=CellActivations(candidate=candidate))


def build_model(config: ModelConfig, rng: Optional[np.random.Generator] = None) -> Model:
    """
    Construit un modèle initialisé

    Les quatre w_x de la première couche suivent Glorot; toutes les autres
    matrices (récurrentes, internes, couches profondes, projection) sont
    orthogonales. Les biais sont nuls, sauf ``forget_bias``.

    Args:
        config: configuration résolue (input_size et output_size renseignés)
        rng: générateur; par défaut ``make_rng(config.seed)``

    Raises:
        ConfigError: si la configuration n'est pas résolue
    """
    if not config.is_resolved:
        raise ConfigError("input_size et output_size doivent être résolus avant de construire le modèle")
    if config.init == "zeros":
        rng = None
    elif rng is None:
        rng = make_rng(config.seed)

    layers = []
    for index in range(config.layers):
        input_size = config.input_size if index == 0 else config.cell_size
        layers.append(
            _build_cell(config, rng, input_size, config.nesting_depth, index == 0, config.outer_candidate)
        )

    if rng is None:
        projection = np.zeros((config.cell_size, config.output_size))
    else:
        projection = orthogonal(rng, config.cell_size, config.output_size)
    return Model(config, tuple(layers), projection, np.zeros(config.output_size))


# ============================================================================
# Comptage des paramètres
# ============================================================================

def count_parameters(model: Model) -> int:
    return int(sum(tensor.size for _, tensor in model.named_tensors()))


def parameter_count(config: ModelConfig) -> int:
    """Forme close: somme des cellules + projection (poids et biais)."""
    if not config.is_resolved:
        raise ConfigError("input_size et output_size requis pour compter les paramètres")
    k = config.cell_size
    total = 0
    for index in range(config.layers):
        input_size = config.input_size if index == 0 else k
        total += cell_param_count(input_size, k, config.nesting_depth)
    return total + k * config.output_size + config.output_size


def match_cell_size(budget: int, config: ModelConfig, not_above: bool = True) -> int:
    """
    Taille de cellule dont le nombre de paramètres approche ``budget``

    Args:
        budget: nombre de paramètres visé
        config: forme (architecture, couches, profondeur, tailles) à ajuster
        not_above: plus grande taille sous le budget si True, plus petite au-dessus sinon

    Returns:
        int: taille de cellule (au moins 1)
    """
    def count(k: int) -> int:
        return parameter_count(config.model_copy(update={"cell_size": k}))

    low, high = 1, 1
    while count(high) <= budget:
        high *= 2
    # count(high) > budget; recherche du dernier k avec count(k) <= budget
    while low < high:
        middle = (low + high + 1) // 2
        if count(middle) <= budget:
            low = middle
        else:
            high = middle - 1
    if not_above or count(low) >= budget:
        return low
    return low + 1


# ============================================================================
# Passe avant / arrière
# ============================================================================

def encode_inputs(model: Model, inputs: np.ndarray) -> np.ndarray:
    """Indices -> one-hot [T x B x V]; vecteurs denses vérifiés tels quels."""
    if inputs.ndim == 2:
        if not np.issubdtype(inputs.dtype, np.integer):
            raise ShapeError(f"Entrées [T x B] attendues entières, reçu {inputs.dtype}")
        if inputs.size and (inputs.min() < 0 or inputs.max() >= model.input_size):
            raise TargetIndexError(f"Indice d'entrée hors de [0, {model.input_size})")
        return np.eye(model.input_size)[inputs]
    if inputs.shape[-1] != model.input_size:
        raise ShapeError(f"Entrées denses {inputs.shape} incompatibles avec input_size={model.input_size}")
    return inputs.astype(np.float64, copy=False)


def forward_sequence(model: Model, batch: SequenceBatch,
                     state0: Optional[List[CellState]] = None) -> ForwardResult:
    """
    Déroule le modèle sur une séquence

    Args:
        model: modèle
        batch: séquences (temps-majeur)
        state0: état initial de chaque couche (nul par défaut)

    Returns:
        ForwardResult: logits [T x B x V], états finaux et caches
    """
    encoded = encode_inputs(model, batch.inputs)
    lanes = batch.lanes
    states = list(state0) if state0 is not None else [zero_state(layer, lanes) for layer in model.layers]
    if len(states) != len(model.layers):
        raise ShapeError(f"{len(states)} états initiaux pour {len(model.layers)} couches")

    h_top = np.empty((batch.seq_len, lanes, model.cell_size))
    step_caches: List[List[StepCache]] = []
    for t in range(batch.seq_len):
        layer_input = encoded[t]
        caches_t = []
        for index, layer in enumerate(model.layers):
            layer_input, states[index], cache = cell_forward(layer, layer_input, states[index])
            caches_t.append(cache)
        step_caches.append(caches_t)
        h_top[t] = layer_input

    rows = h_top.reshape(-1, model.cell_size)
    logits = (matmul(rows, model.projection) + model.projection_bias).reshape(
        batch.seq_len, lanes, model.output_size
    )
    return ForwardResult(logits=logits, final_states=states, step_caches=step_caches, h_top=h_top)


def backward_sequence(model: Model, result: ForwardResult, dlogits: np.ndarray) -> Dict[str, np.ndarray]:
    """
    BPTT sur une séquence

    Args:
        model: modèle utilisé par ``forward_sequence``
        result: résultat de la passe avant
        dlogits: gradient de la perte par rapport aux logits [T x B x V]

    Returns:
        dict nom -> gradient, mêmes noms et formes que ``model.named_tensors()``
    """
    if dlogits.shape != result.logits.shape or result.h_top is None:
        raise ConsistencyError(f"dlogits {dlogits.shape} incompatible avec logits {result.logits.shape}")
    if result.step_caches and len(result.step_caches[0]) != len(model.layers):
        raise ConsistencyError("Les caches ne correspondent pas au nombre de couches du modèle")

    seq_len = dlogits.shape[0]
    dlogit_rows = dlogits.reshape(-1, model.output_size)
    grads = {name: np.zeros_like(tensor) for name, tensor in model.named_tensors()}
    grads[PROJECTION_WEIGHTS] = result.h_top.reshape(-1, model.cell_size).T @ dlogit_rows
    grads[PROJECTION_BIAS] = dlogit_rows.sum(axis=0)
    dh_top = dlogits @ model.projection.T

    dstates: List[Optional[CellState]] = [None] * len(model.layers)
    for t in reversed(range(seq_len)):
        dh = dh_top[t]
        for index in reversed(range(len(model.layers))):
            layer = model.layers[index]
            dh, dstates[index], dparams = cell_backward(layer, result.step_caches[t][index], dh, dstates[index])
            for name, grad in dparams.named_tensors(f"layers.{index}."):
                grads[name] += grad
    return grads


def sequence_loss(logits: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    NLL moyenne et son gradient

    Modèle de langue (targets [T x B]): moyenne sur T x B.
    Classification (targets [B]): dernier pas seulement, moyenne sur B.
    """
    seq_len, lanes, n_classes = logits.shape
    dlogits = np.zeros_like(logits)
    if targets.shape == (seq_len, lanes):
        losses, drows = softmax_xent_rows(logits.reshape(-1, n_classes), targets.reshape(-1))
        dlogits = (drows / losses.size).reshape(logits.shape)
        return float(losses.mean()), dlogits
    if targets.shape == (lanes,):
        losses, drows = softmax_xent_rows(logits[-1], targets)
        dlogits[-1] = drows / lanes
        return float(losses.mean()), dlogits
    raise ShapeError(f"Cibles {targets.shape} incompatibles avec logits {logits.shape}")


def loss_and_gradients(model: Model, batch: SequenceBatch) -> Tuple[float, Dict[str, np.ndarray], ForwardResult]:
    result = forward_sequence(model, batch)
    loss, dlogits = sequence_loss(result.logits, batch.targets)
    return loss, backward_sequence(model, result, dlogits), result


def classify_last_step(model: Model, batch: SequenceBatch) -> Tuple[float, np.ndarray]:
    """Perte au dernier pas et classes prédites (argmax) pour chaque voie."""
    if not batch.is_classification:
        raise ShapeError("classify_last_step attend une classe par voie")
    result = forward_sequence(model, batch)
    loss, _ = sequence_loss(result.logits, batch.targets)
    return loss, np.argmax(result.logits[-1], axis=1)

"""
Cellules récurrentes: un pas de temps, en avant et en arrière

Une cellule LSTM calcule ses portes i, f, o et son candidat g, puis confie
la mise à jour de sa mémoire à une fonction mémoire:

- ``Addition``: c_t = f ⊙ c_{t-1} + i ⊙ g (LSTM classique)
- ``Nested``: une cellule interne (elle-même LSTM ou LSTM imbriquée) reçoit
  x̃_t = i ⊙ g comme entrée et h̃_{t-1} = f ⊙ c_{t-1} comme état caché
  précédent; la mémoire externe devient sa sortie, c_t = h̃_t.

Seule la mémoire c̃ de chaque niveau interne persiste d'un pas à l'autre;
l'état caché interne est recalculé à chaque pas.

Les entrées sont soit un vecteur (une seule voie), soit une matrice
[voies x features].
"""

from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, Optional, Tuple, Union
import numpy as np

from nlstm.core.exceptions import ConsistencyError, ShapeError
from nlstm.core.numerics import Activation, activate, activate_grad, matmul

GATE_NAMES = ("input_gate", "forget_gate", "cell_gate", "output_gate")


@dataclass(frozen=True)
class GateBlock:
    """Triplet (W_x, W_h, b) d'une porte."""
    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        cell_size = self.w_h.shape[0] if self.w_h.ndim == 2 else -1
        if (
            self.w_x.ndim != 2
            or self.w_h.shape != (cell_size, cell_size)
            or self.w_x.shape[1] != cell_size
            or self.b.shape != (cell_size,)
        ):
            raise ShapeError(
                f"Porte incohérente: w_x {self.w_x.shape}, w_h {self.w_h.shape}, b {self.b.shape}"
            )

    @property
    def input_size(self) -> int:
        return self.w_x.shape[0]

    @property
    def cell_size(self) -> int:
        return self.w_h.shape[0]

    def preactivation(self, x: np.ndarray, h: np.ndarray) -> np.ndarray:
        return matmul(x, self.w_x) + matmul(h, self.w_h) + self.b

    def named_tensors(self, prefix: str) -> Iterator[Tuple[str, np.ndarray]]:
        yield f"{prefix}w_x", self.w_x
        yield f"{prefix}w_h", self.w_h
        yield f"{prefix}b", self.b


@dataclass(frozen=True)
class CellActivations:
    """σ_{i,f,o} (gate), σ_c (candidate) et σ_h (output) d'un niveau."""
    gate: Activation = Activation.SIGMOID
    candidate: Activation = Activation.TANH
    output: Activation = Activation.TANH


@dataclass(frozen=True)
class Addition:
    """Fonction mémoire additive: réduit la cellule à un LSTM classique."""


@dataclass(frozen=True)
class Nested:
    """Fonction mémoire portée par une cellule interne."""
    params: "CellParams"


MemoryFunction = Union[Addition, Nested]


@dataclass(frozen=True)
class CellParams:
    """
    Paramètres d'une cellule (et, via ``memory``, de ses cellules internes)

    Les gradients réutilisent la même structure.
    """
    input_gate: GateBlock
    forget_gate: GateBlock
    cell_gate: GateBlock
    output_gate: GateBlock
    memory: MemoryFunction = field(default_factory=Addition)
    activations: CellActivations = field(default_factory=CellActivations)

    def __post_init__(self):
        shapes = {(gate.input_size, gate.cell_size) for gate in self.gates()}
        if len(shapes) != 1:
            raise ShapeError(f"Les quatre portes doivent partager leurs tailles, reçu {sorted(shapes)}")
        if isinstance(self.memory, Nested):
            inner = self.memory.params
            if inner.input_size != self.cell_size or inner.cell_size != self.cell_size:
                raise ShapeError(
                    f"Cellule interne {inner.input_size}->{inner.cell_size} "
                    f"incompatible avec une cellule externe de taille {self.cell_size}"
                )

    @property
    def input_size(self) -> int:
        return self.input_gate.input_size

    @property
    def cell_size(self) -> int:
        return self.input_gate.cell_size

    @property
    def depth(self) -> int:
        """Nombre total de niveaux (1 pour un LSTM classique)."""
        if isinstance(self.memory, Nested):
            return 1 + self.memory.params.depth
        return 1

    @property
    def inner(self) -> Optional["CellParams"]:
        return self.memory.params if isinstance(self.memory, Nested) else None

    def gates(self) -> Tuple[GateBlock, GateBlock, GateBlock, GateBlock]:
        return (self.input_gate, self.forget_gate, self.cell_gate, self.output_gate)

    def named_tensors(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, gate in zip(GATE_NAMES, self.gates()):
            yield from gate.named_tensors(f"{prefix}{name}.")
        if self.inner is not None:
            yield from self.inner.named_tensors(f"{prefix}memory.")

    def with_tensors(self, tensors: Dict[str, np.ndarray], prefix: str = "") -> "CellParams":
        """Reconstruit la cellule avec les tenseurs nommés de ``tensors``."""
        try:
            gates = [
                GateBlock(
                    w_x=tensors[f"{prefix}{name}.w_x"],
                    w_h=tensors[f"{prefix}{name}.w_h"],
                    b=tensors[f"{prefix}{name}.b"],
                )
                for name in GATE_NAMES
            ]
        except KeyError as e:
            raise ConsistencyError(f"Tenseur manquant: {e.args[0]}") from e
        memory: MemoryFunction = Addition()
        if self.inner is not None:
            memory = Nested(self.inner.with_tensors(tensors, f"{prefix}memory."))
        result = CellParams(*gates, memory=memory, activations=self.activations)
        for (name, old), (_, new) in zip(self.named_tensors(prefix), result.named_tensors(prefix)):
            if old.shape != new.shape:
                raise ConsistencyError(f"{name}: forme {new.shape}, attendue {old.shape}")
        return result


@dataclass(frozen=True)
class CellState:
    """
    État d'une cellule: h, c et l'état de la cellule interne le cas échéant

    Sert aussi de gradient d'état (mêmes champs, même imbrication).
    """
    h: np.ndarray
    c: np.ndarray
    inner: Optional["CellState"] = None


@dataclass(frozen=True)
class StepCache:
    """Activations intermédiaires d'un pas, consommées par la passe arrière."""
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    s: np.ndarray  # σ_h(c_t)
    x_tilde: np.ndarray
    h_tilde_prev: np.ndarray
    inner_cache: Optional["StepCache"] = None


def zero_state(params: CellParams, batch_size: Optional[int] = None) -> CellState:
    """État nul reproduisant l'imbrication de ``params`` (voie unique si batch_size est None)."""
    shape = (params.cell_size,) if batch_size is None else (batch_size, params.cell_size)
    inner = zero_state(params.inner, batch_size) if params.inner is not None else None
    return CellState(h=np.zeros(shape), c=np.zeros(shape), inner=inner)


def _check_state(params: CellParams, state: CellState, lanes_shape: Tuple[int, ...]) -> None:
    expected = lanes_shape + (params.cell_size,)
    if state.h.shape != expected or state.c.shape != expected:
        raise ShapeError(f"État {state.h.shape}/{state.c.shape} incompatible, attendu {expected}")
    if (state.inner is None) != (params.inner is None):
        raise ShapeError("L'imbrication de l'état ne correspond pas à celle des paramètres")


def cell_forward(
    params: CellParams, x: np.ndarray, state: CellState
) -> Tuple[np.ndarray, CellState, StepCache]:
    """
    Avance la cellule d'un pas de temps

    Args:
        params: paramètres de la cellule
        x: entrée [input_size] ou [voies x input_size]
        state: état précédent

    Returns:
        (h_t, nouvel état, cache du pas)
    """
    if x.ndim not in (1, 2) or x.shape[-1] != params.input_size:
        raise ShapeError(f"Entrée {x.shape} incompatible avec input_size={params.input_size}")
    _check_state(params, state, x.shape[:-1])

    act = params.activations
    h_prev, c_prev = state.h, state.c

    i = activate(params.input_gate.preactivation(x, h_prev), act.gate)
    f = activate(params.forget_gate.preactivation(x, h_prev), act.gate)
    g = activate(params.cell_gate.preactivation(x, h_prev), act.candidate)
    o = activate(params.output_gate.preactivation(x, h_prev), act.gate)

    h_tilde_prev = f * c_prev
    x_tilde = i * g

    if params.inner is None:
        c = h_tilde_prev + x_tilde
        inner_state, inner_cache = None, None
    else:
        inner_prev = CellState(h=h_tilde_prev, c=state.inner.c, inner=state.inner.inner)
        c, inner_state, inner_cache = cell_forward(params.inner, x_tilde, inner_prev)

    s = activate(c, act.output)
    h = o * s

    cache = StepCache(
        x=x, h_prev=h_prev, c_prev=c_prev, i=i, f=f, o=o, g=g, c=c, s=s,
        x_tilde=x_tilde, h_tilde_prev=h_tilde_prev, inner_cache=inner_cache,
    )
    return h, CellState(h=h, c=c, inner=inner_state), cache


def _rows(a: np.ndarray) -> np.ndarray:
    return a.reshape(-1, a.shape[-1])


def _gate_grad(gate: GateBlock, cache: StepCache, da: np.ndarray) -> GateBlock:
    x_rows, h_rows, da_rows = _rows(cache.x), _rows(cache.h_prev), _rows(da)
    return GateBlock(w_x=x_rows.T @ da_rows, w_h=h_rows.T @ da_rows, b=da_rows.sum(axis=0))


def cell_backward(
    params: CellParams,
    cache: StepCache,
    dh: np.ndarray,
    dstate_next: Optional[CellState] = None,
) -> Tuple[np.ndarray, CellState, CellParams]:
    """
    Rétropropage un pas de temps

    Args:
        params: paramètres utilisés par ``cell_forward``
        cache: cache produit par ``cell_forward``
        dh: gradient de la perte par rapport à h_t (sortie et couche supérieure)
        dstate_next: gradient de l'état t venant du pas t+1 (None au dernier pas)

    Returns:
        (dx, gradient de l'état t-1, gradients des paramètres)
    """
    if (cache.inner_cache is None) != (params.inner is None):
        raise ConsistencyError("Le cache ne correspond pas à l'imbrication des paramètres")
    if dh.shape != cache.o.shape or cache.x.shape[-1] != params.input_size:
        raise ConsistencyError(
            f"Gradient {dh.shape} ou entrée {cache.x.shape} incompatible avec le cache"
        )
    if dstate_next is None:
        dstate_next = zero_state(params, None if dh.ndim == 1 else dh.shape[0])

    act = params.activations
    dh = dh + dstate_next.h

    do = dh * cache.s
    dc = dh * cache.o * activate_grad(cache.s, act.output) + dstate_next.c

    if params.inner is None:
        dx_tilde = dc
        dh_tilde_prev = dc
        inner_prev_grad = None
        memory_grad: MemoryFunction = Addition()
    else:
        dx_tilde, inner_prev_grad, inner_grads = cell_backward(
            params.inner, cache.inner_cache, dc, dstate_next.inner
        )
        dh_tilde_prev = inner_prev_grad.h
        # l'état caché interne est recalculé à chaque pas: seul c̃ transporte du gradient
        inner_prev_grad = replace(inner_prev_grad, h=np.zeros_like(inner_prev_grad.h))
        memory_grad = Nested(inner_grads)

    df = dh_tilde_prev * cache.c_prev
    dc_prev = dh_tilde_prev * cache.f
    di = dx_tilde * cache.g
    dg = dx_tilde * cache.i

    da_i = di * activate_grad(cache.i, act.gate)
    da_f = df * activate_grad(cache.f, act.gate)
    da_g = dg * activate_grad(cache.g, act.candidate)
    da_o = do * activate_grad(cache.o, act.gate)

    dx = np.zeros_like(cache.x)
    dh_prev = np.zeros_like(cache.h_prev)
    grads = []
    for gate, da in zip(params.gates(), (da_i, da_f, da_g, da_o)):
        grads.append(_gate_grad(gate, cache, da))
        dx = dx + da @ gate.w_x.T
        dh_prev = dh_prev + da @ gate.w_h.T

    dparams = CellParams(*grads, memory=memory_grad, activations=act)
    return dx, CellState(h=dh_prev, c=dc_prev, inner=inner_prev_grad), dparams


def cell_param_count(input_size: int, cell_size: int, depth: int = 1) -> int:
    """
    Nombre de paramètres d'une cellule

    Args:
        input_size: taille de l'entrée
        cell_size: taille de la cellule
        depth: nombre total de niveaux (1 = mémoire additive)
    """
    if input_size < 1 or cell_size < 1 or depth < 1:
        raise ShapeError(f"Tailles invalides: input={input_size}, cell={cell_size}, depth={depth}")
    outer = 4 * (input_size + cell_size + 1) * cell_size
    inner = (depth - 1) * 4 * (2 * cell_size + 1) * cell_size
    return outer + inner

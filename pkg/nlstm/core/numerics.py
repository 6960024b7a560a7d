"""
Primitives numériques de la librairie

Tout le reste (cellules, réseau, optimiseurs) s'exprime uniquement avec ces
primitives. Les matrices et vecteurs sont des ``numpy.ndarray`` float64
(row-major). Le générateur aléatoire est PCG64 de numpy: une graine donnée
produit le même flux sur toutes les plateformes.
"""

from enum import Enum
from typing import Tuple
import numpy as np

from nlstm.core.exceptions import ConfigError, NonFiniteError, ShapeError, TargetIndexError

DTYPE = np.float64

# Alias de lecture: une Matrix est 2-D, un Vector 1-D (ou un lot de vecteurs en lignes)
Matrix = np.ndarray
Vector = np.ndarray


class Activation(str, Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"
    IDENTITY = "identity"


def make_rng(seed: int) -> np.random.Generator:
    """Générateur déterministe PCG64 initialisé par ``seed`` (entier >= 0)."""
    if seed < 0:
        raise ConfigError(f"La graine doit être >= 0 (reçu {seed})")
    return np.random.Generator(np.random.PCG64(seed))


def ensure_finite(array: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NonFiniteError(what)
    return array


def matmul(a: np.ndarray, b: Matrix) -> np.ndarray:
    """
    Produit matriciel ``a @ b``

    ``a`` peut être une matrice ou un vecteur ligne; ``b`` est toujours une matrice.

    Raises:
        ShapeError: si les dimensions internes ne correspondent pas
    """
    if b.ndim != 2 or a.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError(
            f"Dimensions incompatibles pour matmul: {a.shape} x {b.shape}",
            details={"left": list(a.shape), "right": list(b.shape)},
        )
    return ensure_finite(a @ b, "matmul")


def activate(v: np.ndarray, kind: Activation) -> np.ndarray:
    """Applique l'activation élément par élément."""
    if kind == Activation.SIGMOID:
        # exp(-|v|) ne déborde jamais; sigmoid(0) == 0.5 exactement
        z = np.exp(-np.abs(v))
        return np.where(v >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    if kind == Activation.TANH:
        return np.tanh(v)
    if kind == Activation.IDENTITY:
        return v
    raise ConfigError(f"Activation inconnue: {kind}")


def activate_grad(y: np.ndarray, kind: Activation) -> np.ndarray:
    """Dérivée de l'activation exprimée à partir de sa sortie ``y``."""
    if kind == Activation.SIGMOID:
        return y * (1.0 - y)
    if kind == Activation.TANH:
        return 1.0 - y * y
    if kind == Activation.IDENTITY:
        return np.ones_like(y)
    raise ConfigError(f"Activation inconnue: {kind}")


def softmax_xent_rows(logits: Matrix, targets: np.ndarray) -> Tuple[np.ndarray, Matrix]:
    """
    Entropie croisée softmax ligne par ligne

    Args:
        logits: matrice [N x V]
        targets: indices de classe [N]

    Returns:
        (pertes [N], dlogits [N x V]) avec dlogits = softmax - onehot
    """
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError(f"Logits {logits.shape} et cibles {targets.shape} incompatibles")
    n_classes = logits.shape[1]
    if targets.size and (targets.min() < 0 or targets.max() >= n_classes):
        raise TargetIndexError(
            f"Cible hors de [0, {n_classes}): min={int(targets.min())}, max={int(targets.max())}"
        )
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(logits.shape[0])
    losses = log_norm - shifted[rows, targets]
    dlogits = np.exp(shifted - log_norm[:, None])
    dlogits[rows, targets] -= 1.0
    return losses, dlogits


def softmax_xent(logits: Vector, target: int) -> Tuple[float, Vector]:
    """Entropie croisée softmax d'un seul vecteur de logits."""
    if logits.ndim != 1:
        raise ShapeError(f"Vecteur de logits attendu, reçu {logits.shape}")
    if not 0 <= target < logits.shape[0]:
        raise TargetIndexError(f"Cible {target} hors de [0, {logits.shape[0]})")
    losses, dlogits = softmax_xent_rows(logits[None, :], np.array([target]))
    return float(losses[0]), dlogits[0]


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> Matrix:
    """Matrice [fan_in x fan_out] uniforme sur ±sqrt(6 / (fan_in + fan_out))."""
    if fan_in < 1 or fan_out < 1:
        raise ConfigError(f"Fan nul pour Glorot: fan_in={fan_in}, fan_out={fan_out}")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def orthogonal(rng: np.random.Generator, rows: int, cols: int) -> Matrix:
    """
    Matrice (semi-)orthogonale [rows x cols]

    QR d'une matrice gaussienne carrée de côté max(rows, cols), colonnes de Q
    multipliées par le signe de diag(R), puis troncature au coin supérieur gauche.
    """
    if rows < 1 or cols < 1:
        raise ConfigError(f"Dimensions invalides pour orthogonal: {rows} x {cols}")
    size = max(rows, cols)
    gaussian = rng.standard_normal((size, size))
    q, r = np.linalg.qr(gaussian)
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    q = q * signs
    return np.ascontiguousarray(q[:rows, :cols])

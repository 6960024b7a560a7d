from typing import Callable, Dict, Optional
import struct

import numpy as np
import pytest

from nlstm.core.config import get_settings
from nlstm.core.numerics import make_rng
from nlstm.models.network import SequenceBatch
from nlstm.schemas.run_config import Architecture, ModelConfig

FD_EPSILON = 1e-5
FD_ABS_TOL = 1e-8
FD_REL_TOL = 1e-5

# (architecture, couches, profondeur) couverts par les vérifications de gradient
ARCHITECTURES = [
    (Architecture.LSTM, 1, 1),
    (Architecture.STACKED, 2, 1),
    (Architecture.STACKED, 3, 1),
    (Architecture.NLSTM, 1, 2),
    (Architecture.NLSTM, 1, 3),
    (Architecture.NLSTM, 2, 2),
]


@pytest.fixture(autouse=True)
def clear_settings_cache():
    """Chaque test relit l'environnement"""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return make_rng(1234)


def tiny_config(architecture: Architecture, layers: int = 1, depth: int = 1, cell_size: int = 6,
                input_size: int = 5, output_size: int = 4, seed: int = 7, **extra) -> ModelConfig:
    return ModelConfig(
        architecture=architecture, layers=layers, nesting_depth=depth, cell_size=cell_size,
        input_size=input_size, output_size=output_size, seed=seed, **extra,
    )


def random_char_batch(rng: np.random.Generator, seq_len: int, lanes: int, vocab: int) -> SequenceBatch:
    return SequenceBatch(
        inputs=rng.integers(0, vocab, size=(seq_len, lanes)),
        targets=rng.integers(0, vocab, size=(seq_len, lanes)),
    )


def numerical_gradients(loss_fn: Callable[[Dict[str, np.ndarray]], float],
                        tensors: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """Différences finies centrées (ε = 1e-5) de ``loss_fn`` par rapport à chaque entrée de ``tensors``."""
    grads = {}
    for name, tensor in tensors.items():
        grad = np.zeros_like(tensor)
        for index in np.ndindex(tensor.shape):
            shifted = {key: value.copy() for key, value in tensors.items()}
            shifted[name][index] = tensor[index] + FD_EPSILON
            plus = loss_fn(shifted)
            shifted[name][index] = tensor[index] - FD_EPSILON
            minus = loss_fn(shifted)
            grad[index] = (plus - minus) / (2.0 * FD_EPSILON)
        grads[name] = grad
    return grads


def assert_gradients_close(analytic: Dict[str, np.ndarray], numeric: Dict[str, np.ndarray]) -> None:
    """Accepte |a - n| <= 1e-8 ou |a - n| / max(|a|, |n|) < 1e-5, élément par élément."""
    assert set(analytic) == set(numeric)
    for name in numeric:
        a, n = analytic[name], numeric[name]
        assert a.shape == n.shape, name
        diff = np.abs(a - n)
        scale = np.maximum(np.abs(a), np.abs(n))
        ok = (diff <= FD_ABS_TOL) | (diff < FD_REL_TOL * scale)
        assert ok.all(), f"{name}: écart max {diff.max():.3e} (analytique {a[~ok][:3]}, numérique {n[~ok][:3]})"


def write_idx(path, data: np.ndarray, magic: Optional[int] = None) -> str:
    """Écrit ``data`` (uint8) au format IDX; images si 3-D, étiquettes si 1-D."""
    data = np.asarray(data, dtype=np.uint8)
    if magic is None:
        magic = 0x803 if data.ndim == 3 else 0x801
    header = struct.pack(">i", magic) + b"".join(struct.pack(">i", dim) for dim in data.shape)
    path.write_bytes(header + data.tobytes())
    return str(path)


@pytest.fixture
def cli(capsys):
    """Lance ``nlstm.main.main`` et renvoie (code de sortie, stdout, stderr)."""
    from nlstm.cli import deps
    from nlstm.main import main

    def run(*argv: str):
        for cached in (deps.get_settings_dependency, deps.get_run_repository, deps.get_pipeline_service):
            cached.cache_clear()
        capsys.readouterr()
        code = main([str(arg) for arg in argv])
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return run

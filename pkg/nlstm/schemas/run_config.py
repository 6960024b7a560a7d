from enum import Enum
from typing import Literal, Optional

from pydantic import Field, model_validator

from nlstm.core.numerics import Activation
from nlstm.schemas.base import BaseSchema


class Task(str, Enum):
    PTB_CHAR = "ptb_char"
    TEXT8 = "text8"
    MNIST_GLIMPSES = "mnist_glimpses"
    CUSTOM_TEXT = "custom_text"

    @property
    def is_classification(self) -> bool:
        return self is Task.MNIST_GLIMPSES


class Architecture(str, Enum):
    LSTM = "lstm"
    STACKED = "stacked"
    NLSTM = "nlstm"


class ModelConfig(BaseSchema):
    """
    Forme d'un modèle: architecture, nombre de couches, profondeur d'imbrication

    input_size/output_size restent vides dans les presets de texte: ils sont
    résolus depuis le vocabulaire au moment de la préparation des données.
    """
    architecture: Architecture = Field(..., description="lstm, stacked ou nlstm")
    layers: int = Field(default=1, ge=1, description="Nombre de couches empilées")
    nesting_depth: int = Field(default=1, ge=1, description="Nombre total de niveaux d'une cellule")
    cell_size: int = Field(..., ge=1, description="Taille de chaque cellule")
    input_size: Optional[int] = Field(default=None, ge=1, description="Taille d'entrée (vocabulaire ou 49)")
    output_size: Optional[int] = Field(default=None, ge=1, description="Nombre de classes en sortie")
    seed: int = Field(default=0, ge=0, description="Graine de l'initialisation")
    candidate_activation: Optional[Activation] = Field(
        default=None, description="σ_c du niveau externe (défaut: identity pour nlstm, tanh sinon)"
    )
    forget_bias: float = Field(default=0.0, description="Biais initial des portes d'oubli")
    init: Literal["glorot", "zeros"] = Field(default="glorot", description="Glorot/orthogonal ou poids nuls")

    @model_validator(mode="after")
    def check_architecture(self) -> "ModelConfig":
        if self.architecture == Architecture.LSTM and (self.layers != 1 or self.nesting_depth != 1):
            raise ValueError("lstm impose layers = 1 et nesting_depth = 1 (utiliser stacked ou nlstm)")
        if self.architecture == Architecture.STACKED and (self.layers < 2 or self.nesting_depth != 1):
            raise ValueError("stacked impose layers >= 2 et nesting_depth = 1")
        if self.architecture == Architecture.NLSTM and self.nesting_depth < 2:
            raise ValueError("nlstm impose nesting_depth >= 2 niveaux au total")
        return self

    @property
    def outer_candidate(self) -> Activation:
        if self.candidate_activation is not None:
            return self.candidate_activation
        return Activation.IDENTITY if self.architecture == Architecture.NLSTM else Activation.TANH

    @property
    def is_resolved(self) -> bool:
        return self.input_size is not None and self.output_size is not None


class TrainConfig(BaseSchema):
    optimizer: Literal["adam", "rmsprop"] = "adam"
    learning_rate: float = Field(default=0.002, ge=0.0)
    batch_size: int = Field(default=32, ge=1)
    seq_len: int = Field(default=100, ge=1)
    clip_threshold: float = Field(default=1.0, gt=0.0)
    epochs: int = Field(default=1, ge=0)
    seed: int = Field(default=0, ge=0)
    eval_every: int = Field(default=1, ge=1, description="Cadence d'évaluation en époques")
    max_steps: int = Field(default=0, ge=0, description="Budget de pas d'optimisation (0 = illimité)")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)
    decay: float = Field(default=0.9, ge=0.0, lt=1.0, description="Décroissance RMSProp")
    selection_metric: Literal["nll", "bpc", "perplexity"] = "bpc"
    eval_batch_size: Optional[int] = Field(default=None, ge=1)

    @property
    def resolved_eval_batch_size(self) -> int:
        return self.eval_batch_size or self.batch_size


class DataConfig(BaseSchema):
    """Chemins des données brutes et paramètres de découpage."""
    train: Optional[str] = None
    valid: Optional[str] = None
    test: Optional[str] = None
    train_labels: Optional[str] = None
    test_labels: Optional[str] = None
    prepared_dir: Optional[str] = None
    max_train_chars: Optional[int] = Field(default=None, ge=2)
    valid_fraction: float = Field(default=0.05, gt=0.0, lt=1.0)
    test_fraction: float = Field(default=0.05, gt=0.0, lt=1.0)
    valid_size: int = Field(default=10000, ge=1, description="Images MNIST réservées à la validation")

    @model_validator(mode="after")
    def check_fractions(self) -> "DataConfig":
        if self.valid_fraction + self.test_fraction >= 1.0:
            raise ValueError("valid_fraction + test_fraction doit rester < 1")
        return self


class RunConfig(BaseSchema):
    task: Task
    model: ModelConfig
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    out_dir: Optional[str] = None

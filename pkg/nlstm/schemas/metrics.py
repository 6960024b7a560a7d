from typing import List, Literal

from pydantic import Field

from nlstm.schemas.base import BaseSchema

MetricName = Literal["nll", "bpc", "perplexity", "accuracy"]
Split = Literal["train", "valid", "test"]


class MetricRecord(BaseSchema):
    """
    Une mesure: une ligne du fichier d'historique

    Attributes:
        epoch: époque (0 = modèle initial)
        split: train, valid ou test
        name: nll, bpc, perplexity ou accuracy
        value: valeur (perplexity peut valoir +inf)
    """
    epoch: int = Field(..., ge=0)
    split: Split
    name: MetricName
    value: float

    def to_line(self) -> str:
        return f"{self.epoch}\t{self.split}\t{self.name}\t{self.value!r}"


class HistoryRecord(BaseSchema):
    """Bilan d'une époque; wall_time reste en mémoire et n'est jamais écrit."""
    epoch: int = Field(..., ge=0)
    steps: int = Field(default=0, ge=0, description="Pas d'optimisation cumulés")
    records: List[MetricRecord] = Field(default_factory=list)
    wall_time: float = Field(default=0.0, ge=0.0)

    def value(self, split: str, name: str) -> float:
        for record in self.records:
            if record.split == split and record.name == name:
                return record.value
        raise KeyError(f"{split}/{name}")


class TraceRow(BaseSchema):
    t: int = Field(..., ge=0)
    input: str
    level: str
    unit: int = Field(..., ge=0)
    value: float = Field(..., ge=-1.0, le=1.0)


class ParamRow(BaseSchema):
    """Une ligne de la table des paramètres."""
    label: str
    architecture: str
    n: int = Field(..., ge=1, description="Couches (lstm/stacked) ou profondeur (nlstm)")
    cell_size: int = Field(..., ge=1)
    count: int = Field(..., ge=0)
    rounded: str

    def to_line(self) -> str:
        return (
            f"{self.label}\t{self.architecture}\t{self.n}\t{self.cell_size}\t"
            f"{self.count:,} ({self.rounded})"
        )

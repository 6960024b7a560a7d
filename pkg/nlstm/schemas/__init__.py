from nlstm.schemas.metrics import HistoryRecord, MetricRecord, ParamRow, TraceRow
from nlstm.schemas.run_config import Architecture, DataConfig, ModelConfig, RunConfig, Task, TrainConfig

__all__ = [
    "Architecture",
    "DataConfig",
    "HistoryRecord",
    "MetricRecord",
    "ModelConfig",
    "ParamRow",
    "RunConfig",
    "Task",
    "TraceRow",
    "TrainConfig",
]

import pytest

from nlstm.core.exceptions import ConfigError
from nlstm.models.network import parameter_count
from nlstm.schemas.run_config import Architecture, DataConfig, ModelConfig, RunConfig, Task
from nlstm.services.pipeline_service import PipelineService, round_count


def run_config(task: Task, architecture="nlstm", layers=1, depth=2, cell_size=600, **model) -> RunConfig:
    return RunConfig(
        task=task,
        model=ModelConfig(architecture=architecture, layers=layers, nesting_depth=depth, cell_size=cell_size, **model),
    )


@pytest.fixture
def pipeline():
    return PipelineService()


class TestRounding:
    """Arrondi des comptes"""

    @pytest.mark.parametrize("count, expected", [
        (4_474_850, "4.47M"),
        (4_676_750, "4.68M"),
        (61_010, "61.0k"),
        (85_090, "85.1k"),
        (999, "999"),
    ])
    def test_round_count(self, count, expected):
        assert round_count(count) == expected


class TestParamTable:
    """Table des paramètres"""

    def test_ptb_table(self, pipeline):
        lines = [row.to_line() for row in pipeline.param_table(run_config(Task.PTB_CHAR))]
        assert lines == [
            "configured\tnlstm\t2\t600\t4,474,850 (4.47M)",
            "baseline\tlstm\t1\t1000\t4,254,050 (4.25M)",
            "baseline\tlstm\t1\t1050\t4,676,750 (4.68M)",
            "baseline\tstacked\t2\t600\t4,474,850 (4.47M)",
            "baseline\tstacked\t3\t450\t4,167,950 (4.17M)",
            "baseline\tnlstm\t2\t600\t4,474,850 (4.47M)",
        ]

    def test_mnist_counts(self, pipeline):
        rows = pipeline.param_table(run_config(Task.MNIST_GLIMPSES, cell_size=75))
        assert [row.count for row in rows] == [83_560, 61_010, 94_910, 83_560, 85_090, 83_560]
        assert rows[1].to_line().endswith("61,010 (61.0k)")

    def test_text8_counts(self, pipeline):
        rows = pipeline.param_table(run_config(Task.TEXT8, cell_size=1200))
        assert [row.count for row in rows[1:]] == [16_278_027, 17_931_927, 17_451_627, 18_189_677, 17_451_627]

    def test_custom_text_matches_budget(self, pipeline):
        config = run_config(Task.CUSTOM_TEXT, cell_size=40, input_size=30, output_size=30)
        rows = pipeline.param_table(config)
        budget = rows[0].count
        assert [row.architecture for row in rows[1:]] == ["lstm", "stacked", "stacked", "nlstm"]
        for row in rows[1:]:
            assert row.count <= budget
            shape = ModelConfig(
                architecture=row.architecture,
                layers=row.n if row.architecture == "stacked" else 1,
                nesting_depth=row.n if row.architecture == "nlstm" else 1,
                cell_size=row.cell_size + 1,
                input_size=30,
                output_size=30,
            )
            assert parameter_count(shape) > budget
        assert rows[-1].cell_size == 40

    def test_custom_text_without_sizes(self, pipeline, tmp_path):
        config = run_config(Task.CUSTOM_TEXT, cell_size=40).model_copy(
            update={"data": DataConfig(prepared_dir=str(tmp_path / "nothing"))}
        )
        with pytest.raises(ConfigError):
            pipeline.param_table(config)


class TestResolve:
    """Tailles d'entrée/sortie imposées par les données"""

    def test_fills_sizes(self):
        resolved = PipelineService.resolve(run_config(Task.PTB_CHAR), 50, 50)
        assert resolved.model.is_resolved
        assert (resolved.model.input_size, resolved.model.output_size) == (50, 50)

    def test_conflicting_size(self):
        with pytest.raises(ConfigError):
            PipelineService.resolve(run_config(Task.PTB_CHAR, input_size=40), 50, 50)

    def test_trace_rejects_classification(self, pipeline):
        config = run_config(Task.MNIST_GLIMPSES, architecture=Architecture.NLSTM, cell_size=75)
        with pytest.raises(ConfigError):
            pipeline.trace(config, "unused.ckpt", "test", range(0, 3), 10)

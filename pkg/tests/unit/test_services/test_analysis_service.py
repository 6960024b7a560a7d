import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_char_batch, tiny_config
from nlstm.core.exceptions import ShapeError, UnitRangeError
from nlstm.models.cells import cell_forward, zero_state
from nlstm.models.network import SequenceBatch, build_model
from nlstm.schemas.metrics import TraceRow
from nlstm.schemas.run_config import Architecture
from nlstm.services.analysis_service import (
    bpc,
    evaluate,
    flip_rates,
    level_names,
    metric_records,
    perplexity,
    trace_activations,
)


class TestMetrics:
    """Conversions NLL -> BPC / perplexité"""

    def test_identities(self):
        assert bpc(math.log(2)) == pytest.approx(1.0)
        assert perplexity(math.log(50)) == pytest.approx(50.0)
        assert perplexity(0.0) == 1.0

    def test_overflow_gives_inf(self):
        assert perplexity(1e6) == math.inf

    def test_text_records(self):
        records = metric_records(math.log(4), "valid", 3)
        assert [(r.name, r.epoch, r.split) for r in records] == [
            ("nll", 3, "valid"), ("bpc", 3, "valid"), ("perplexity", 3, "valid"),
        ]
        assert records[1].value == pytest.approx(2.0)
        assert records[2].value == pytest.approx(4.0)

    def test_classification_records(self):
        records = metric_records(0.5, "test", 1, accuracy=0.75)
        assert [r.name for r in records] == ["nll", "accuracy"]
        assert records[1].value == 0.75


class TestEvaluate:
    """Évaluation sans gradient"""

    def test_uniform_model_scores_log_vocab(self, rng):
        model = build_model(tiny_config(Architecture.NLSTM, 1, 2, input_size=8, output_size=8, init="zeros"))
        batches = [random_char_batch(rng, 5, 3, 8) for _ in range(3)]
        records = {r.name: r.value for r in evaluate(model, batches, "test", 0)}
        assert records["nll"] == pytest.approx(math.log(8), abs=1e-12)
        assert records["bpc"] == pytest.approx(3.0, abs=1e-12)
        assert records["perplexity"] == pytest.approx(8.0, abs=1e-9)

    def test_batches_weighted_by_predictions(self, rng):
        model = build_model(tiny_config(Architecture.LSTM, input_size=5, output_size=5))
        small, large = random_char_batch(rng, 2, 1, 5), random_char_batch(rng, 6, 4, 5)
        nll = {name: evaluate(model, batch)[0].value for name, batch in (("small", [small]), ("large", [large]))}
        combined = evaluate(model, [small, large])[0].value
        assert combined == pytest.approx((2 * nll["small"] + 24 * nll["large"]) / 26, rel=1e-12)

    def test_hard_wired_classifier(self):
        model = build_model(tiny_config(Architecture.NLSTM, 1, 2, input_size=49, output_size=10, init="zeros"))
        tensors = model.tensor_dict()
        tensors["projection.b"] = np.eye(10)[3] * 10.0
        model = model.with_tensors(tensors)
        batch = SequenceBatch(inputs=np.random.default_rng(0).uniform(0, 1, (20, 6, 49)), targets=np.full(6, 3))
        records = {r.name: r.value for r in evaluate(model, [batch])}
        assert records["accuracy"] == 1.0
        assert records["nll"] == pytest.approx(-math.log(math.exp(10) / (math.exp(10) + 9)))

    def test_no_batches(self):
        model = build_model(tiny_config(Architecture.LSTM))
        with pytest.raises(ShapeError):
            evaluate(model, [])


class TestTrace:
    """Traces d'activation"""

    def test_level_names(self):
        assert level_names(build_model(tiny_config(Architecture.NLSTM, 1, 3))) == ["outer", "inner-1", "inner-2"]
        assert level_names(build_model(tiny_config(Architecture.STACKED, 2))) == ["layer-1", "layer-2"]
        assert level_names(build_model(tiny_config(Architecture.NLSTM, 2, 2))) == [
            "layer-1.outer", "layer-1.inner-1", "layer-2.outer", "layer-2.inner-1",
        ]

    def test_row_count_and_order(self):
        model = build_model(tiny_config(Architecture.NLSTM, 1, 2))
        rows = trace_activations(model, [0, 1, 2, 3], range(1, 4), symbols="ab\nd")
        assert len(rows) == 4 * 3 * 2
        assert (rows[0].t, rows[0].level, rows[0].unit) == (0, "outer", 1)
        assert (rows[3].t, rows[3].level, rows[3].unit) == (0, "inner-1", 1)
        assert rows[2 * 6].input == "\\n"

    def test_values_are_cell_memories(self):
        model = build_model(tiny_config(Architecture.NLSTM, 1, 2))
        ids = [4, 0, 2, 2, 1]
        rows = trace_activations(model, ids, range(0, 6))
        params = model.layers[0]
        state = zero_state(params, 1)
        for t, token in enumerate(ids):
            _, state, _ = cell_forward(params, np.eye(5)[[token]], state)
            outer = [r.value for r in rows if r.t == t and r.level == "outer"]
            inner = [r.value for r in rows if r.t == t and r.level == "inner-1"]
            assert_allclose(outer, state.c[0], rtol=0, atol=1e-15)
            assert_allclose(inner, np.tanh(state.inner.c[0]), rtol=0, atol=1e-15)

    def test_stacked_levels_are_squashed(self):
        model = build_model(tiny_config(Architecture.STACKED, 2))
        rows = trace_activations(model, [1, 2, 3], range(0, 6))
        assert all(-1.0 < row.value < 1.0 for row in rows)

    @pytest.mark.parametrize("units", [range(0, 7), range(5, 5)])
    def test_unit_range(self, units):
        model = build_model(tiny_config(Architecture.NLSTM, 1, 2))
        with pytest.raises(UnitRangeError) as excinfo:
            trace_activations(model, [0, 1], units)
        assert isinstance(excinfo.value, IndexError)

    def test_symbol_count_mismatch(self):
        model = build_model(tiny_config(Architecture.LSTM))
        with pytest.raises(ShapeError):
            trace_activations(model, [0, 1, 2], range(0, 1), symbols="ab")


class TestFlipRates:
    """Variation moyenne par niveau"""

    def test_hand_computed(self):
        rows = [
            TraceRow(t=t, input="x", level=level, unit=0, value=value)
            for level, values in (("outer", [0.0, 0.5, 0.5]), ("inner-1", [0.0, 1.0, 0.0]))
            for t, value in enumerate(values)
        ]
        rates = flip_rates(rows)
        assert rates["outer"] == pytest.approx(0.25)
        assert rates["inner-1"] == pytest.approx(1.0)
        assert rates["inner/outer"] == pytest.approx(4.0)

    def test_no_ratio_without_nesting(self):
        rows = [TraceRow(t=t, input="x", level="layer-1", unit=0, value=0.1 * t) for t in range(3)]
        rates = flip_rates(rows)
        assert set(rates) == {"layer-1"}
        assert rates["layer-1"] == pytest.approx(0.1)

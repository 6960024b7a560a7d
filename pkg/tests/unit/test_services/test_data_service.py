import numpy as np
import pytest
from numpy.testing import assert_array_equal

from conftest import write_idx
from nlstm.core.exceptions import ConfigError, DataError, IngestionError, ShapeError
from nlstm.schemas.run_config import DataConfig, ModelConfig, RunConfig, Task
from nlstm.services.data_service import (
    CharVocab,
    DataService,
    PreparedData,
    batch_nonoverlapping,
    build_vocab,
    glimpse_batches,
    make_glimpse_sequence,
    make_glimpses,
)


@pytest.fixture
def service():
    return DataService()


class TestVocab:
    """Vocabulaire de caractères"""

    def test_sorted_distinct_characters(self):
        vocab = build_vocab("aba")
        assert vocab.chars == ("a", "b")
        assert_array_equal(vocab.encode("aba"), [0, 1, 0])

    def test_decode_inverts_encode(self):
        vocab = build_vocab("hello world\n")
        assert vocab.decode(vocab.encode("world hello")) == "world hello"

    def test_unknown_characters_are_listed(self):
        vocab = build_vocab("abc")
        with pytest.raises(IngestionError) as excinfo:
            vocab.encode("abzxa", split="valid")
        assert excinfo.value.details["offenders"] == ["x", "z"]
        assert excinfo.value.exit_code == 2
        assert "valid" in str(excinfo.value)

    def test_empty_corpus(self):
        with pytest.raises(DataError):
            build_vocab("")

    def test_duplicates_rejected(self):
        with pytest.raises(DataError):
            CharVocab(("a", "a"))


class TestBatching:
    """Fenêtres disjointes"""

    def test_window_count(self):
        batches = batch_nonoverlapping(np.arange(10), batch_size=1, seq_len=3)
        assert len(batches) == 3
        assert [b.inputs.shape for b in batches] == [(3, 1)] * 3

    def test_lanes_are_consecutive_windows(self):
        batch, = batch_nonoverlapping(np.arange(10), batch_size=3, seq_len=3)
        assert_array_equal(batch.inputs, [[0, 3, 6], [1, 4, 7], [2, 5, 8]])
        assert_array_equal(batch.targets, batch.inputs + 1)

    def test_windows_tile_the_stream(self):
        tokens = np.arange(101)
        batches = batch_nonoverlapping(tokens, batch_size=2, seq_len=5)
        seen = np.concatenate([b.inputs.T.reshape(-1) for b in batches])
        assert_array_equal(seen, np.arange(100))

    def test_incomplete_batch_dropped(self):
        # 7 fenêtres, batches de 3 -> 2 batches
        assert len(batch_nonoverlapping(np.arange(22), batch_size=3, seq_len=3)) == 2

    @pytest.mark.parametrize("length", [0, 1, 3])
    def test_stream_too_short(self, length):
        with pytest.raises(DataError):
            batch_nonoverlapping(np.arange(length), batch_size=1, seq_len=3)

    def test_evaluation_shrinks_batch(self):
        data = PreparedData(task=Task.CUSTOM_TEXT, vocab=build_vocab("ab"), tokens={"valid": np.arange(10) % 2})
        assert data.batches("valid", 8, 3) == []
        batch, = data.batches("valid", 8, 3, evaluation=True)
        assert batch.lanes == 3

    def test_missing_split(self):
        data = PreparedData(task=Task.CUSTOM_TEXT, vocab=build_vocab("ab"), tokens={"train": np.zeros(5, int)})
        with pytest.raises(DataError):
            data.batches("test", 1, 2)


def coordinate_image() -> np.ndarray:
    """Pixel (r, c) = (28 r + c) / 783: toutes les valeurs sont distinctes."""
    r, c = np.meshgrid(np.arange(28), np.arange(28), indexing="ij")
    return (28 * r + c) / 783.0


class TestGlimpses:
    """Présentation d'une image en 20 glimpses de 49 pixels"""

    def test_zero_image(self):
        glimpses = make_glimpses(np.zeros((28, 28)))
        assert glimpses.shape == (20, 49)
        assert not glimpses.any()

    def test_first_quadrant_layout(self):
        image = coordinate_image()
        glimpses = make_glimpses(image)
        assert_array_equal(glimpses[0], image[0:14:2, 0:14:2].reshape(-1))
        assert_array_equal(glimpses[1], image[0:7, 0:7].reshape(-1))
        assert_array_equal(glimpses[2], image[0:7, 7:14].reshape(-1))
        assert_array_equal(glimpses[3], image[7:14, 0:7].reshape(-1))
        assert_array_equal(glimpses[4], image[7:14, 7:14].reshape(-1))

    @pytest.mark.parametrize("step, top, left", [(5, 0, 14), (10, 14, 0), (15, 14, 14)])
    def test_quadrant_order(self, step, top, left):
        image = coordinate_image()
        glimpses = make_glimpses(image)
        assert_array_equal(glimpses[step], image[top:top + 14:2, left:left + 14:2].reshape(-1))
        assert_array_equal(glimpses[step + 1], image[top:top + 7, left:left + 7].reshape(-1))

    def test_blocks_cover_every_pixel_once(self):
        image = coordinate_image()
        glimpses = make_glimpses(image)
        blocks = np.concatenate([glimpses[s] for s in range(20) if s % 5 != 0])
        assert_array_equal(np.sort(blocks), np.sort(image.reshape(-1)))

    def test_bad_shape(self):
        with pytest.raises(ShapeError):
            make_glimpses(np.zeros((28, 27)))

    def test_unnormalised_pixels(self):
        with pytest.raises(DataError):
            make_glimpses(np.full((28, 28), 255.0))

    def test_label_range(self):
        assert make_glimpse_sequence(np.zeros((28, 28)), 9).label == 9
        with pytest.raises(DataError):
            make_glimpse_sequence(np.zeros((28, 28)), 10)

    def test_batches_keep_partial_tail(self):
        glimpses = np.zeros((7, 20, 49))
        labels = np.arange(7)
        batches = glimpse_batches(glimpses, labels, 3)
        assert [b.lanes for b in batches] == [3, 3, 1]
        assert batches[0].inputs.shape == (20, 3, 49)
        assert_array_equal(batches[2].targets, [6])

    def test_batches_label_mismatch(self):
        with pytest.raises(ShapeError):
            glimpse_batches(np.zeros((4, 20, 49)), np.arange(3), 2)


class TestDataService:
    """Chargement et découpage des corpus"""

    def test_explicit_splits(self, service, tmp_path):
        for split, text in (("train", "abcabc"), ("valid", "cab"), ("test", "bca")):
            (tmp_path / f"{split}.txt").write_text(text, encoding="utf-8")
        data = DataConfig(**{split: str(tmp_path / f"{split}.txt") for split in ("train", "valid", "test")})
        prepared = service.prepare_text(Task.PTB_CHAR, data)
        assert prepared.vocab.chars == ("a", "b", "c")
        assert prepared.input_size == prepared.output_size == 3
        assert [prepared.split_size(s) for s in ("train", "valid", "test")] == [6, 3, 3]

    def test_split_fractions(self, service):
        texts = service.split_fractions("x" * 100, DataConfig(valid_fraction=0.1, test_fraction=0.2))
        assert [len(texts[s]) for s in ("train", "valid", "test")] == [70, 10, 20]
        assert "".join(texts[s] for s in ("train", "valid", "test")) == "x" * 100

    def test_single_file_and_max_chars(self, service, tmp_path):
        corpus = tmp_path / "text8"
        corpus.write_text("abcd" * 250, encoding="utf-8")
        texts = service.load_texts(Task.TEXT8, DataConfig(train=str(corpus), max_train_chars=40))
        assert len(texts["train"]) == 40
        assert len(texts["valid"]) == len(texts["test"]) == 50

    def test_missing_path(self, service):
        with pytest.raises(ConfigError):
            service.load_texts(Task.PTB_CHAR, DataConfig())

    @pytest.mark.parametrize("given", ["valid", "test"])
    def test_custom_text_needs_both_held_out_files(self, service, tmp_path, given):
        for split in ("train", given):
            (tmp_path / split).write_text("abcabc", encoding="utf-8")
        data = DataConfig(**{split: str(tmp_path / split) for split in ("train", given)})
        with pytest.raises(ConfigError) as excinfo:
            service.load_texts(Task.CUSTOM_TEXT, data)
        assert excinfo.value.exit_code == 1

    def test_unreadable_file(self, service, tmp_path):
        with pytest.raises(DataError):
            service.load_texts(Task.TEXT8, DataConfig(train=str(tmp_path / "absent.txt")))

    def test_valid_character_outside_train(self, service, tmp_path):
        for split, text in (("train", "aaaa"), ("valid", "ab"), ("test", "a")):
            (tmp_path / split).write_text(text, encoding="utf-8")
        data = DataConfig(**{split: str(tmp_path / split) for split in ("train", "valid", "test")})
        with pytest.raises(IngestionError):
            service.prepare_text(Task.CUSTOM_TEXT, data)

    def test_prepare_mnist(self, service, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, size=(6, 28, 28))
        labels = np.array([3, 1, 4, 1, 5, 9])
        data = DataConfig(
            train=write_idx(tmp_path / "train-images", images),
            train_labels=write_idx(tmp_path / "train-labels", labels),
            test=write_idx(tmp_path / "test-images", images[:2]),
            test_labels=write_idx(tmp_path / "test-labels", labels[:2]),
            valid_size=2,
        )
        config = RunConfig(task=Task.MNIST_GLIMPSES, model=ModelConfig(architecture="nlstm", nesting_depth=2, cell_size=4), data=data)
        prepared = service.prepare(config)
        assert [prepared.split_size(s) for s in ("train", "valid", "test")] == [4, 2, 2]
        assert_array_equal(prepared.labels["valid"], [5, 9])
        assert_array_equal(prepared.glimpses["valid"][0], make_glimpse_sequence(images[4] / 255.0, 5).steps)
        assert_array_equal(prepared.glimpses["test"][1], make_glimpses(images[1] / 255.0))
        assert prepared.input_size == 49 and prepared.output_size == 10

    def test_mnist_valid_size_too_large(self, service, tmp_path):
        images = np.zeros((3, 28, 28))
        data = DataConfig(
            train=write_idx(tmp_path / "a", images), train_labels=write_idx(tmp_path / "b", np.zeros(3)),
            test=write_idx(tmp_path / "c", images), test_labels=write_idx(tmp_path / "d", np.zeros(3)),
            valid_size=3,
        )
        with pytest.raises(ConfigError):
            service.prepare_mnist(data)

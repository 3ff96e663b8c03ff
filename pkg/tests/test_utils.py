"""Tests for the hardformer.utils module."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from hardformer.clusters import analyze_trajectory
from hardformer.config import RunConfig
from hardformer.dynamics import run
from hardformer.dynamics import TrajectoryRecord
from hardformer.dynamics import unroll
from hardformer.errors import DatasetFormatError
from hardformer.errors import ModelFormatError
from hardformer.errors import TrajectoryFormatError
from hardformer.geometry import AttentionSpec
from hardformer.geometry import Softmax
from hardformer.geometry import SpdMatrix
from hardformer.geometry import TokenConfiguration
from hardformer.sentiment import EpochStats
from hardformer.sentiment import forward
from hardformer.sentiment import PAD_TOKEN
from hardformer.sentiment import Review
from hardformer.sentiment import SentimentModel
from hardformer.sentiment import Vocabulary
from hardformer import utils


@pytest.fixture
def line_run() -> TrajectoryRecord:
    """Converged run of five symmetric tokens on the line."""
    config = TokenConfiguration.from_points([[-1], [-0.5], [0], [0.5], [1]])
    return run(config, AttentionSpec(a=SpdMatrix.identity(1), alpha=0.5))


@pytest.fixture
def model() -> SentimentModel:
    """A small model with awkward floats."""
    rng = np.random.default_rng(6)
    return SentimentModel(
        encoder=rng.normal(size=(5, 2)), log_alpha=[np.log(0.3)],
        decoder=rng.normal(size=2), bias=[0.1], depth=2, tau=1e-3,
        seq_len=3,
    )


def _rows(path: Path) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.reader(f))


@pytest.mark.parametrize("value", [0.1, -2 / 3, 1e-300, 12.0, 0.0])
def test_format_float_round_trips(value: float):
    """Tests that written floats read back bitwise."""
    assert float(utils.format_float(value)) == value


def test_write_trajectory_files(tmp_path: Path, line_run):
    """Tests the exported files of a hardmax run."""
    paths = utils.write_trajectory(line_run, tmp_path, cluster_radius=1e-5)
    assert [p.name for p in paths] == [
        utils.TRAJECTORY_FILE, utils.ATTENTION_FILE, utils.RUN_FILE
    ]
    rows = _rows(tmp_path / utils.TRAJECTORY_FILE)
    assert rows[0] == ["step", "token", "coord0", "is_leader"]
    assert len(rows) == 1 + 5 * (line_run.steps_taken + 1)
    assert rows[1] == ["0", "0", "-1", "1"]
    assert rows[3] == ["0", "2", "0", "0"]

    attention = json.loads((tmp_path / utils.ATTENTION_FILE).read_text())
    assert attention[0] == {"step": 0,
                            "sets": [[0], [0], [0, 1, 2, 3, 4], [4], [4]]}
    metadata = json.loads((tmp_path / utils.RUN_FILE).read_text())
    assert metadata["mode"] == "hardmax"
    assert metadata["converged"] is True
    assert metadata["stepsTaken"] == line_run.steps_taken
    assert metadata["clusterRadius"] == 1e-5
    assert metadata["A"] == [[1.0]]


def test_read_trajectory_restores_run(tmp_path: Path, line_run):
    """Tests that an exported run reads back bitwise."""
    utils.write_trajectory(line_run, tmp_path)
    restored, metadata = utils.read_trajectory(tmp_path)
    assert metadata["alpha"] == 0.5
    assert restored.converged
    assert restored.steps_taken == line_run.steps_taken
    for (k, z), (j, y) in zip(restored.configurations(),
                              line_run.configurations()):
        assert k == j
        np.testing.assert_array_equal(z.tokens, y.tokens)
    assert restored.steps[0].attention_sets == line_run.steps[0].attention_sets


def test_thinned_export_keeps_final_step(tmp_path: Path, line_run):
    """Tests record_every and analysis of a thinned run."""
    utils.write_trajectory(line_run, tmp_path, RunConfig(record_every=4))
    restored, _ = utils.read_trajectory(tmp_path)
    labels = [k for k, _ in restored.configurations()]
    last = line_run.steps_taken
    assert labels == sorted({*range(0, last + 1, 4), last})
    expected = analyze_trajectory(line_run, 1e-4)
    report = analyze_trajectory(restored, 1e-4)
    assert [c.member_tokens for c in report.clusters] == \
        [c.member_tokens for c in expected.clusters]
    assert report.verdicts.all_true


def test_softmax_export_has_no_attention_file(tmp_path: Path):
    """Tests the files of a softmax run."""
    config = TokenConfiguration.from_points([(1, 0), (0, 1), (0.5, 0.5)])
    spec = AttentionSpec(a=SpdMatrix.identity(2), alpha=1.0,
                         mode=Softmax(tau=0.5))
    trajectory = run(config, spec, RunConfig(max_steps=4))
    utils.write_trajectory(trajectory, tmp_path)
    assert not (tmp_path / utils.ATTENTION_FILE).exists()
    restored, metadata = utils.read_trajectory(tmp_path)
    assert metadata["tau"] == 0.5 and metadata["tieTol"] is None
    assert restored.spec.mode == Softmax(tau=0.5)
    assert not restored.converged


def test_projections_for_higher_dimensions(tmp_path: Path):
    """Tests the coordinate-plane export of a run in R^3."""
    config = TokenConfiguration.from_points([(1, 0, 0), (0, 2, 0),
                                             (0, 0, 3), (0.2, 0.3, 0.1)])
    trajectory = run(config, AttentionSpec(a=SpdMatrix.identity(3),
                                           alpha=0.5))
    paths = utils.write_trajectory(trajectory, tmp_path)
    assert paths[-1].name == utils.PROJECTIONS_FILE
    rows = _rows(paths[-1])
    assert rows[0] == ["stage", "token", "dim_x", "dim_y", "x", "y"]
    assert len(rows) == 1 + 2 * 4 * 3
    assert rows[1] == ["initial", "0", "0", "1", "1", "0"]


def test_read_trajectory_missing_files(tmp_path: Path):
    """Tests that a directory without a run is rejected."""
    with pytest.raises(TrajectoryFormatError):
        utils.read_trajectory(tmp_path)


def test_read_trajectory_corrupt_csv(tmp_path: Path, line_run):
    """Tests truncated and inconsistent trajectory files."""
    utils.write_trajectory(line_run, tmp_path)
    path = tmp_path / utils.TRAJECTORY_FILE
    lines = path.read_text(encoding="utf-8").splitlines()

    path.write_text("\n".join(lines[:-5]) + "\n", encoding="utf-8")
    with pytest.raises(TrajectoryFormatError):
        utils.read_trajectory(tmp_path)

    path.write_text("\n".join(lines[:3] + lines[4:]) + "\n",
                    encoding="utf-8")
    with pytest.raises(TrajectoryFormatError):
        utils.read_trajectory(tmp_path)

    path.write_text("\n".join(lines[:1] + ["0,0,abc,1"]) + "\n",
                    encoding="utf-8")
    with pytest.raises(TrajectoryFormatError):
        utils.read_trajectory(tmp_path)


def test_read_trajectory_bad_metadata(tmp_path: Path, line_run):
    """Tests run metadata that cannot rebuild the spec."""
    utils.write_trajectory(line_run, tmp_path)
    path = tmp_path / utils.RUN_FILE
    metadata = json.loads(path.read_text())
    utils.write_json(path, {**metadata, "A": [[-1.0]]})
    with pytest.raises(TrajectoryFormatError):
        utils.read_trajectory(tmp_path)
    del metadata["alpha"]
    utils.write_json(path, metadata)
    with pytest.raises(TrajectoryFormatError):
        utils.read_trajectory(tmp_path)
    path.write_bytes(b"{\"mode\": \"hard\xffmax\"}")
    with pytest.raises(TrajectoryFormatError):
        utils.read_trajectory(tmp_path)


def test_dataset_round_trip(tmp_path: Path):
    """Tests writing and reading a TSV dataset."""
    corpus = [("a fine film", 1), ("dull, very dull", 0)]
    path = tmp_path / "data.tsv"
    utils.write_dataset(path, corpus)
    assert utils.load_dataset(path) == corpus


def test_load_dataset_skips_blank_lines(tmp_path: Path):
    """Tests that empty lines are ignored."""
    path = tmp_path / "data.tsv"
    path.write_text("1\tgood\n\n   \n0\tbad\n", encoding="utf-8")
    assert utils.load_dataset(path) == [("good", 1), ("bad", 0)]


@pytest.mark.parametrize("content", ["2\tgood\n", "good\n", "1 good\n"])
def test_load_dataset_rejects_bad_lines(tmp_path: Path, content: str):
    """Tests malformed dataset lines."""
    path = tmp_path / "data.tsv"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(DatasetFormatError):
        utils.load_dataset(path)


def test_load_dataset_missing_file(tmp_path: Path):
    """Tests that a missing dataset is reported."""
    with pytest.raises(DatasetFormatError):
        utils.load_dataset(tmp_path / "missing.tsv")


def test_load_dataset_rejects_invalid_utf8(tmp_path: Path):
    """Tests that undecodable bytes are a format error."""
    path = tmp_path / "data.tsv"
    path.write_bytes(b"1\tgreat film\n0\tdull \xff\n")
    with pytest.raises(DatasetFormatError):
        utils.load_dataset(path)


def test_vocabulary_file(tmp_path: Path):
    """Tests the one-word-per-line vocabulary file."""
    vocab = Vocabulary((PAD_TOKEN, "good", "bad"))
    path = tmp_path / "vocab.txt"
    utils.save_vocabulary(vocab, path)
    assert path.read_text(encoding="utf-8") == f"{PAD_TOKEN}\ngood\nbad\n"
    assert utils.load_vocabulary(path).words == vocab.words
    path.write_text("good\nbad\n", encoding="utf-8")
    with pytest.raises(ModelFormatError):
        utils.load_vocabulary(path)


def test_model_round_trip(tmp_path: Path, model):
    """Tests that a saved model reads back bitwise."""
    path = tmp_path / "model.bin"
    utils.save_model(model, path)
    assert path.read_bytes().startswith(utils.MODEL_MAGIC)
    loaded = utils.load_model(path)
    for name, value in model.parameters().items():
        np.testing.assert_array_equal(loaded.parameters()[name], value)
    assert (loaded.depth, loaded.tau, loaded.seq_len) == (2, 1e-3, 3)


def test_load_model_rejects_corrupt_files(tmp_path: Path, model):
    """Tests foreign, truncated and missing model files."""
    path = tmp_path / "model.bin"
    path.write_bytes(b"NOTAMODEL")
    with pytest.raises(ModelFormatError):
        utils.load_model(path)
    utils.save_model(model, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ModelFormatError):
        utils.load_model(path)
    with pytest.raises(ModelFormatError):
        utils.load_model(tmp_path / "missing.bin")


def test_write_history(tmp_path: Path):
    """Tests the history CSV with and without hardmax losses."""
    path = tmp_path / "history.csv"
    utils.write_history(path, [EpochStats(1, 0.5, 0.75),
                               EpochStats(2, 0.25, 1.0, 0.3)])
    assert _rows(path) == [
        ["epoch", "loss", "accuracy", "hardmax_loss"],
        ["1", "0.5", "0.75", ""],
        ["2", "0.25", "1", "0.29999999999999999"],
    ]


def test_write_review_trace(tmp_path: Path, model):
    """Tests one row per word and layer plus the mean rows."""
    review = Review((1, 4, 0))
    _, trajectory = forward(model, review, "hardmax")
    path = tmp_path / "trace.csv"
    utils.write_review_trace(path, trajectory, ["good", "bad", PAD_TOKEN],
                             model)
    rows = _rows(path)
    assert rows[0] == ["step", "token", "word", "coord0", "coord1",
                       "is_leader", "decision"]
    assert len(rows) == 1 + (model.depth + 1) * 4
    assert rows[1][:3] == ["0", "0", "good"]
    assert rows[4][:3] == ["0", "mean", ""]
    mean = trajectory.initial.tokens.mean(axis=0)
    assert float(rows[4][-1]) == model.decision_value(mean)


def test_unrolled_run_exports(tmp_path: Path, model):
    """Tests exporting a fixed-depth run that did not converge."""
    initial = TokenConfiguration(model.encoder[[1, 2, 3]])
    trajectory = unroll(initial, model.attention_spec("hardmax"), 3)
    utils.write_trajectory(trajectory, tmp_path)
    restored, metadata = utils.read_trajectory(tmp_path)
    assert metadata["stopReason"] == trajectory.stop_reason.value
    assert restored.steps_taken == 3


@pytest.mark.parametrize("size", ["x", float("nan"), float("inf")])
def test_load_model_rejects_bad_header_values(tmp_path: Path, size):
    """Tests header fields that are not integers."""
    header = json.dumps({
        "W": size, "d": 2, "n": 3, "K": 1, "tau": 0.1, "alpha": 1.0,
        "logAlpha": 0.0, "v": 0.0,
    }).encode("utf-8")
    path = tmp_path / "model.bin"
    path.write_bytes(utils.MODEL_MAGIC + len(header).to_bytes(8, "little")
                     + header + bytes(8 * 6))
    with pytest.raises(ModelFormatError):
        utils.load_model(path)

"""Utilities module for the hardformer project.

This module reads and writes every file the command-line interface deals
with: trajectory exports (CSV, attention JSON and run metadata), the
review dataset TSV, the vocabulary file, the binary model file and the
training history.

Floats are written so they read back bitwise: JSON uses the shortest
round-trip representation, CSV uses 17 significant digits.
"""

from collections.abc import Iterable
from collections.abc import Sequence
import csv
import json
import logging
from pathlib import Path
import struct
from typing import Any

import numpy as np

from .config import RunConfig
from .dynamics import StepOutcome
from .dynamics import StopReason
from .dynamics import TrajectoryRecord
from .errors import DatasetFormatError
from .errors import HardformerError
from .errors import ModelFormatError
from .errors import TrajectoryFormatError
from .geometry import attention_sets
from .geometry import AttentionSet
from .geometry import AttentionSpec
from .geometry import factorize_spd
from .geometry import Hardmax
from .geometry import Softmax
from .geometry import TokenConfiguration
from .sentiment import EpochStats
from .sentiment import PAD_TOKEN
from .sentiment import SentimentModel
from .sentiment import Vocabulary


logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
ATTENTION_FILE = "attention.json"
RUN_FILE = "run.json"
PROJECTIONS_FILE = "projections.csv"
MODEL_MAGIC = b"HMAXSENT"

_HEADER_LENGTH = struct.Struct("<Q")


def format_float(value: float) -> str:
    """Formats a float with 17 significant digits."""
    return f"{value:.17g}"


def write_json(path: Path, document: Any) -> None:
    """Writes a JSON document with round-trip floats."""
    path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise TrajectoryFormatError(f"Could not read {path}: {e}") from e


def recorded_configurations(
    trajectory: TrajectoryRecord, record_every: int = 1
) -> list[tuple[int, TokenConfiguration]]:
    """Selects the configurations that are exported.

    Args:
        trajectory: The trajectory to export.
        record_every: Keep every k-th layer; the final one is always kept.

    Returns:
        Pairs (k, Z^k) in increasing k.
    """
    pairs = trajectory.configurations()
    last = pairs[-1][0]
    return [(k, z) for k, z in pairs if k % record_every == 0 or k == last]


def _sets_of(
    trajectory: TrajectoryRecord, config: TokenConfiguration
) -> tuple[AttentionSet, ...] | None:
    if not trajectory.spec.is_hardmax:
        return None
    return attention_sets(config, trajectory.spec)


def write_trajectory(
    trajectory: TrajectoryRecord,
    out_dir: Path,
    run_config: RunConfig | None = None,
    cluster_radius: float | None = None,
) -> list[Path]:
    """Exports a trajectory as CSV, attention sets and run metadata.

    The CSV has the header ``step,token,coord0,...,is_leader``. In hardmax
    mode ``attention.json`` lists ``{"step": k, "sets": [...]}`` for every
    exported layer; ``run.json`` holds what is needed to rebuild the
    trajectory for analysis.

    Args:
        trajectory: The trajectory to export.
        out_dir: The output directory, created if missing.
        run_config: Stopping rule used, echoed in ``run.json``.
        cluster_radius: Analysis radius echoed in ``run.json``.

    Returns:
        The written file paths.
    """
    run_config = run_config or RunConfig()
    out_dir.mkdir(parents=True, exist_ok=True)
    d = trajectory.initial.dimension
    recorded = recorded_configurations(trajectory, run_config.record_every)

    csv_path = out_dir / TRAJECTORY_FILE
    attention = []
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["step", "token", *(f"coord{c}" for c in range(d)), "is_leader"]
        )
        for k, config in recorded:
            sets = _sets_of(trajectory, config)
            if sets is not None:
                attention.append(
                    {"step": k, "sets": [list(s.members) for s in sets]}
                )
            for i, token in enumerate(config.tokens):
                leader = int(sets[i].is_self) if sets is not None else 0
                writer.writerow(
                    [k, i, *(format_float(x) for x in token), leader]
                )
    paths = [csv_path]

    if trajectory.spec.is_hardmax:
        attention_path = out_dir / ATTENTION_FILE
        write_json(attention_path, attention)
        paths.append(attention_path)

    mode = trajectory.spec.mode
    run_path = out_dir / RUN_FILE
    write_json(run_path, {
        "alpha": trajectory.spec.alpha,
        "A": trajectory.spec.a.entries.tolist(),
        "mode": "hardmax" if trajectory.spec.is_hardmax else "softmax",
        "tieTol": getattr(mode, "tie_tol", None),
        "tau": getattr(mode, "tau", None),
        "converged": trajectory.converged,
        "stopReason": trajectory.stop_reason.value,
        "stepsTaken": trajectory.steps_taken,
        "recordEvery": run_config.record_every,
        "clusterRadius": cluster_radius,
    })
    paths.append(run_path)

    if d > 2:
        paths.append(write_projections(trajectory, out_dir))
    logger.info(f"Wrote {len(recorded)} configurations to {out_dir}")
    return paths


def write_projections(trajectory: TrajectoryRecord, out_dir: Path) -> Path:
    """Writes coordinate pairs of the initial and final tokens.

    Each row holds one token projected onto one coordinate plane, for
    plotting runs with d != 2 outside the package.

    Args:
        trajectory: The trajectory.
        out_dir: The output directory.

    Returns:
        The path of the CSV file.
    """
    path = out_dir / PROJECTIONS_FILE
    d = trajectory.initial.dimension
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["stage", "token", "dim_x", "dim_y", "x", "y"])
        for stage, config in (("initial", trajectory.initial),
                              ("final", trajectory.final)):
            for i, token in enumerate(config.tokens):
                for p in range(d):
                    for q in range(p + 1, d):
                        writer.writerow([
                            stage, i, p, q,
                            format_float(token[p]), format_float(token[q]),
                        ])
    return path


def _spec_from_run(run: dict[str, Any]) -> AttentionSpec:
    try:
        a = factorize_spd(run["A"])
        if run["mode"] == "hardmax":
            mode = Hardmax(tie_tol=run["tieTol"])
        else:
            mode = Softmax(tau=run["tau"])
        return AttentionSpec(a=a, alpha=run["alpha"], mode=mode)
    except (KeyError, TypeError) as e:
        raise TrajectoryFormatError(f"Incomplete run metadata: {e}") from e
    except HardformerError as e:
        raise TrajectoryFormatError(f"Invalid run metadata: {e}") from e


def _read_configurations(
    path: Path,
) -> list[tuple[int, TokenConfiguration]]:
    rows: dict[int, list[tuple[int, list[float]]]] = {}
    try:
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            d = len(header) - 3
            if d < 1 or header[:2] != ["step", "token"]:
                raise TrajectoryFormatError(f"Bad header in {path}.")
            for record in reader:
                if len(record) != d + 3:
                    raise TrajectoryFormatError(f"Bad row in {path}.")
                rows.setdefault(int(record[0]), []).append(
                    (int(record[1]), [float(x) for x in record[2:2 + d]])
                )
    except (OSError, StopIteration, ValueError) as e:
        if isinstance(e, TrajectoryFormatError):
            raise
        raise TrajectoryFormatError(f"Could not read {path}: {e}") from e

    configurations = []
    for k in sorted(rows):
        tokens = sorted(rows[k])
        if [i for i, _ in tokens] != list(range(len(tokens))):
            raise TrajectoryFormatError(f"Step {k} misses tokens in {path}.")
        configurations.append(
            (k, TokenConfiguration.from_points([p for _, p in tokens]))
        )
    if not configurations or configurations[0][0] != 0:
        raise TrajectoryFormatError(f"{path} does not start at step 0.")
    return configurations


def read_trajectory(
    directory: Path,
) -> tuple[TrajectoryRecord, dict[str, Any]]:
    """Rebuilds an exported trajectory for analysis.

    Only the exported layers are restored; each restored step carries the
    attention sets of its input configuration.

    Args:
        directory: A directory written by ``write_trajectory``.

    Returns:
        The trajectory and the decoded ``run.json``.

    Raises:
        TrajectoryFormatError: A file is missing, corrupt or inconsistent.
    """
    run = _read_json(directory / RUN_FILE)
    if not isinstance(run, dict):
        raise TrajectoryFormatError("run.json must hold a JSON object.")
    spec = _spec_from_run(run)
    configurations = _read_configurations(directory / TRAJECTORY_FILE)
    if configurations[-1][0] != run.get("stepsTaken"):
        raise TrajectoryFormatError(
            "The trajectory ends before the recorded final step."
        )

    recorded_sets: dict[int, tuple[AttentionSet, ...]] = {}
    if spec.is_hardmax:
        for entry in _read_json(directory / ATTENTION_FILE):
            try:
                recorded_sets[int(entry["step"])] = tuple(
                    AttentionSet(owner=i, members=tuple(members))
                    for i, members in enumerate(entry["sets"])
                )
            except (KeyError, TypeError, ValueError) as e:
                raise TrajectoryFormatError(
                    f"Bad attention entry: {e}"
                ) from e

    steps = []
    for (k, before), (_, after) in zip(configurations, configurations[1:]):
        if spec.is_hardmax and k not in recorded_sets:
            raise TrajectoryFormatError(f"No attention sets for step {k}.")
        steps.append(StepOutcome(
            step=k,
            next=after,
            max_displacement=float(np.max(np.linalg.norm(
                after.tokens - before.tokens, axis=1))),
            attention_sets=recorded_sets.get(k),
        ))
    try:
        reason = StopReason(run["stopReason"])
    except (KeyError, ValueError) as e:
        raise TrajectoryFormatError(f"Bad stop reason: {e}") from e
    trajectory = TrajectoryRecord(
        initial=configurations[0][1],
        spec=spec,
        steps=tuple(steps),
        converged=bool(run.get("converged")),
        stop_reason=reason,
        steps_taken=configurations[-1][0],
    )
    logger.info(f"Read {len(configurations)} configurations from "
                f"{directory}")
    return trajectory, run


def load_dataset(path: Path) -> list[tuple[str, int]]:
    """Reads a ``label<TAB>text`` dataset.

    Blank lines are skipped.

    Args:
        path: Path of the UTF-8 TSV file.

    Returns:
        Pairs (text, label).

    Raises:
        DatasetFormatError: The file is unreadable or a line is malformed.
    """
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, ValueError) as e:
        raise DatasetFormatError(f"Could not read {path}: {e}") from e
    corpus = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        label, sep, text = line.partition("\t")
        if not sep or label not in ("0", "1"):
            raise DatasetFormatError(
                f"{path}:{number}: expected 'label<TAB>text' with label 0/1."
            )
        corpus.append((text, int(label)))
    logger.info(f"Read {len(corpus)} reviews from {path}")
    return corpus


def write_dataset(path: Path, corpus: Iterable[tuple[str, int]]) -> None:
    """Writes reviews as ``label<TAB>text`` lines."""
    with open(path, "w", encoding="utf-8") as f:
        for text, label in corpus:
            f.write(f"{label}\t{text}\n")


def save_vocabulary(vocab: Vocabulary, path: Path) -> None:
    """Writes one word per line, the line number being its index."""
    path.write_text("\n".join(vocab.words) + "\n", encoding="utf-8")


def load_vocabulary(path: Path) -> Vocabulary:
    """Reads a vocabulary file whose first line is the padding word.

    Raises:
        ModelFormatError: The file is unreadable or malformed.
    """
    try:
        words = path.read_text(encoding="utf-8").splitlines()
        return Vocabulary(tuple(words))
    except (OSError, ValueError) as e:
        raise ModelFormatError(
            f"Could not read vocabulary {path}: {e}; line 0 must be "
            f"{PAD_TOKEN}."
        ) from e


def save_model(model: SentimentModel, path: Path) -> None:
    """Writes a model file.

    The layout is the magic ``HMAXSENT``, the header length as an 8-byte
    little-endian integer, a UTF-8 JSON header, then E (row-major) and w
    as little-endian float64 blocks.

    Args:
        model: The model to save.
        path: Destination path.
    """
    header = json.dumps({
        "W": model.vocab_size,
        "d": model.dim,
        "n": model.seq_len,
        "K": model.depth,
        "tau": model.tau,
        "alpha": model.alpha,
        "logAlpha": float(model.log_alpha[0]),
        "v": float(model.bias[0]),
    }).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(_HEADER_LENGTH.pack(len(header)))
        f.write(header)
        f.write(model.encoder.astype("<f8").tobytes())
        f.write(model.decoder.astype("<f8").tobytes())
    logger.info(f"Saved model to {path}")


def load_model(path: Path) -> SentimentModel:
    """Reads a model file written by ``save_model``.

    Raises:
        ModelFormatError: The file is unreadable or malformed.
    """
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ModelFormatError(f"Could not read model {path}: {e}") from e
    if not data.startswith(MODEL_MAGIC):
        raise ModelFormatError(f"{path} is not a model file.")
    start = len(MODEL_MAGIC)
    try:
        (length,) = _HEADER_LENGTH.unpack_from(data, start)
        start += _HEADER_LENGTH.size
        header = json.loads(data[start:start + length].decode("utf-8"))
        start += length
        w, d = int(header["W"]), int(header["d"])
        expected = start + 8 * (w * d + d)
        if len(data) != expected:
            raise ModelFormatError(
                f"{path} holds {len(data)} bytes, expected {expected}."
            )
        blocks = np.frombuffer(data, dtype="<f8", offset=start)
        return SentimentModel(
            encoder=blocks[:w * d].reshape(w, d),
            log_alpha=np.array([header["logAlpha"]]),
            decoder=blocks[w * d:],
            bias=np.array([header["v"]]),
            depth=int(header["K"]),
            tau=float(header["tau"]),
            seq_len=int(header["n"]),
        )
    except ModelFormatError:
        raise
    except (struct.error, KeyError, TypeError, ValueError,
            OverflowError) as e:
        raise ModelFormatError(f"Corrupt model header in {path}: {e}") from e


def write_history(path: Path, history: Sequence[EpochStats]) -> None:
    """Writes the training history as CSV.

    Epochs without a recorded hardmax loss leave that column empty.
    """
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "loss", "accuracy", "hardmax_loss"])
        for stats in history:
            writer.writerow([
                stats.epoch,
                format_float(stats.loss),
                format_float(stats.accuracy),
                "" if stats.hardmax_loss is None
                else format_float(stats.hardmax_loss),
            ])


def write_review_trace(
    path: Path,
    trajectory: TrajectoryRecord,
    words: Sequence[str],
    model: SentimentModel,
) -> None:
    """Writes the token trajectory of one classified review.

    Every layer contributes one row per word and one ``mean`` row for the
    average token; ``decision`` is z . w + v of the row's point.

    Args:
        path: Destination CSV path.
        trajectory: The review's trajectory from ``forward``.
        words: The word of each token, pads included.
        model: The classifier, for the decision values.
    """
    d = trajectory.initial.dimension
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "token", "word",
                         *(f"coord{c}" for c in range(d)),
                         "is_leader", "decision"])
        for k, config in trajectory.configurations():
            sets = _sets_of(trajectory, config)
            for i, token in enumerate(config.tokens):
                leader = int(sets[i].is_self) if sets is not None else 0
                writer.writerow([
                    k, i, words[i], *(format_float(x) for x in token),
                    leader, format_float(model.decision_value(token)),
                ])
            mean = config.tokens.mean(axis=0)
            writer.writerow([
                k, "mean", "", *(format_float(x) for x in mean), "",
                format_float(model.decision_value(mean)),
            ])
    logger.info(f"Wrote review trace to {path}")

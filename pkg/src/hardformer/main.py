"""Main module for the hardformer command-line interface.

This module parses command-line arguments and runs one of the commands:
``simulate`` and ``analyze`` for token dynamics and cluster verification,
``corpus``, ``train``, ``predict`` and ``evaluate`` for the sentiment
classifier. Library errors are logged and mapped onto exit codes:

    0  success
    1  malformed input, missing files or bad flags
    2  a matrix or linear system violates a mathematical precondition
    3  a clustering verdict is false
    4  training produced a non-finite loss
"""

import argparse
import json
import logging
from pathlib import Path
import sys

from .clusters import analyze_trajectory
from .clusters import detect_leaders
from .config import DEFAULT_CLUSTER_RADIUS
from .config import load_simulation_config
from .config import TrainConfig
from .errors import DatasetFormatError
from .dynamics import run
from .errors import HardformerError
from .errors import NonFiniteLossError
from .errors import NotPositiveDefiniteError
from .errors import NotSymmetricError
from .errors import PersistenceViolationError
from .errors import SingularMatrixError
from .errors import SingularSystemError
from .plotting import write_trajectory_svg
from .sentiment import build_vocabulary
from .sentiment import decode_review
from .sentiment import encode_review
from .sentiment import evaluate
from .sentiment import forward
from .sentiment import frequent_leaders
from .sentiment import HARDMAX
from .sentiment import loss
from .sentiment import planted_corpus
from .sentiment import SentimentModel
from .sentiment import SOFTMAX
from .sentiment import split_dataset
from .sentiment import train
from .utils import load_dataset
from .utils import load_model
from .utils import load_vocabulary
from .utils import read_trajectory
from .utils import save_model
from .utils import save_vocabulary
from .utils import write_dataset
from .utils import write_history
from .utils import write_json
from .utils import write_review_trace
from .utils import write_trajectory


# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s",
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MATH = 2
EXIT_VERDICT = 3
EXIT_NUMERIC = 4

MODEL_FILE = "model.bin"
VOCAB_FILE = "vocab.txt"
HISTORY_FILE = "history.csv"
METRICS_FILE = "metrics.json"
REPORT_FILE = "report.json"

_MATH_ERRORS = (
    NotSymmetricError,
    NotPositiveDefiniteError,
    SingularMatrixError,
    SingularSystemError,
)


def cmd_simulate(args: argparse.Namespace) -> int:
    """Runs the dynamics of a simulation file and exports the run."""
    config = load_simulation_config(args.config)
    spec = config.attention_spec()
    initial = config.initial_configuration()
    trajectory = run(initial, spec, config.run)
    write_trajectory(trajectory, args.out_dir, config.run,
                     config.cluster_radius)
    if initial.dimension == 2:
        leaders = []
        if spec.is_hardmax:
            try:
                leaders = detect_leaders(trajectory)
            except PersistenceViolationError as e:
                logger.warning(f"Figure drawn without leaders: {e}")
        write_trajectory_svg(trajectory, args.out_dir / "trajectory.svg",
                             leaders)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    """Verifies the clustering claims on an exported run."""
    trajectory, metadata = read_trajectory(args.trajectory_dir)
    radius = (args.radius or metadata.get("clusterRadius")
              or DEFAULT_CLUSTER_RADIUS)
    report = analyze_trajectory(trajectory, radius)
    path = args.trajectory_dir / REPORT_FILE
    write_json(path, report.to_dict())
    logger.info(f"Report written to {path}")
    if not report.verdicts.all_true:
        logger.error(f"Clustering verdicts not all true: {report.verdicts}")
        return EXIT_VERDICT
    return EXIT_OK


def cmd_corpus(args: argparse.Namespace) -> int:
    """Writes a planted corpus as a dataset file."""
    corpus = planted_corpus(
        n_reviews=args.reviews,
        seq_len=args.length,
        markers_per_review=args.markers,
        seed=args.seed,
    )
    write_dataset(args.out, corpus)
    logger.info(f"Wrote {len(corpus)} reviews to {args.out}")
    return EXIT_OK


def _load_corpus(path: Path, max_reviews: int | None):
    corpus = load_dataset(path)
    if max_reviews is not None:
        corpus = corpus[:max_reviews]
    return corpus


def cmd_train(args: argparse.Namespace) -> int:
    """Trains a classifier and writes model, vocabulary and history."""
    corpus = _load_corpus(args.data, args.max_reviews)
    vocab = build_vocabulary(corpus)
    dataset = [encode_review(text, vocab, args.seq_len, label)
               for text, label in corpus]
    train_set, held_out = split_dataset(dataset, args.holdout, args.seed)
    config = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
        hardmax_every=args.hardmax_every,
    )
    model = SentimentModel.initialize(
        vocab_size=len(vocab),
        dim=args.dim,
        depth=args.depth,
        tau=args.tau,
        seq_len=args.seq_len,
        seed=args.seed,
    )
    model, history = train(model, train_set, config)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    save_model(model, args.out_dir / MODEL_FILE)
    save_vocabulary(vocab, args.out_dir / VOCAB_FILE)
    write_history(args.out_dir / HISTORY_FILE, history)
    if held_out:
        result = evaluate(model, held_out, SOFTMAX)
        metrics = {
            "reviews": len(held_out),
            "loss": result.loss,
            "accuracy": result.accuracy,
            "hardmaxLoss": loss(model, held_out, HARDMAX),
        }
        write_json(args.out_dir / METRICS_FILE, metrics)
        logger.info(f"Held-out loss {result.loss:.6f}, accuracy "
                    f"{result.accuracy:.4f}")
    return EXIT_OK


def _vocab_path(args: argparse.Namespace) -> Path:
    return args.vocab or args.model.parent / VOCAB_FILE


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, ValueError) as e:
        raise DatasetFormatError(f"Could not read review {path}: {e}") from e


def cmd_predict(args: argparse.Namespace) -> int:
    """Classifies one review and prints the prediction and label."""
    model = load_model(args.model)
    vocab = load_vocabulary(_vocab_path(args))
    text = args.text if args.text is not None else _read_text(args.text_file)
    review = encode_review(text, vocab, model.seq_len)
    prediction, trajectory = forward(model, review, args.mode)
    print(f"{prediction:.17g}\t{int(prediction >= 0.5)}")
    if args.trace:
        words = [vocab.words[i] for i in review.word_indices]
        write_review_trace(args.trace, trajectory, words, model)
    logger.debug(f"Review words: {decode_review(review, vocab)}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Prints loss, accuracy and leader statistics as JSON."""
    model = load_model(args.model)
    vocab = load_vocabulary(_vocab_path(args))
    corpus = _load_corpus(args.data, args.max_reviews)
    dataset = [encode_review(text, vocab, model.seq_len, label)
               for text, label in corpus]
    result = evaluate(model, dataset, args.mode)
    stats = result.leader_stats
    document = {
        "mode": args.mode,
        "reviews": len(dataset),
        "loss": result.loss,
        "accuracy": result.accuracy,
        "softmaxLoss": loss(model, dataset, SOFTMAX),
        "hardmaxLoss": loss(model, dataset, HARDMAX),
        "leaderStats": {
            "mean": stats.mean,
            "std": stats.std,
            "min": stats.min,
            "max": stats.max,
            "fractionInitial": stats.initial_fraction,
        },
        "frequentLeaders": [
            [word, count] for word, count in frequent_leaders(
                model, dataset, vocab, args.margin, args.top)
        ],
    }
    print(json.dumps(document, indent=2))
    return EXIT_OK


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message: str):
        """Prints the usage and exits with the input-error code."""
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    """Builds the argument parser of every command."""
    parser = ArgumentParser(
        prog="hardformer",
        description="""
Simulate hardmax transformer token dynamics, verify their clustering,
and train an interpretable sentiment classifier built on them.
""",
    )
    parser.add_argument("--verbose", action="store_true",
                        help="Log debug messages.")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Run the dynamics.")
    simulate.add_argument("config", type=Path,
                          help="JSON simulation file.")
    simulate.add_argument("out_dir", type=Path, help="Output directory.")
    simulate.set_defaults(handler=cmd_simulate)

    analyze = commands.add_parser("analyze",
                                  help="Verify clustering of a run.")
    analyze.add_argument("trajectory_dir", type=Path,
                         help="Directory written by simulate.")
    analyze.add_argument("--radius", type=float,
                         help="Cluster radius; the run's value by default.")
    analyze.set_defaults(handler=cmd_analyze)

    corpus = commands.add_parser("corpus", help="Write a planted corpus.")
    corpus.add_argument("out", type=Path, help="Output TSV file.")
    corpus.add_argument("--reviews", type=int, default=200)
    corpus.add_argument("--length", type=int, default=16)
    corpus.add_argument("--markers", type=int, default=4)
    corpus.add_argument("--seed", type=int, default=0)
    corpus.set_defaults(handler=cmd_corpus)

    fit = commands.add_parser("train", help="Train a classifier.")
    fit.add_argument("--data", type=Path, required=True,
                     help="Dataset TSV (label<TAB>text).")
    fit.add_argument("--out-dir", type=Path, required=True,
                     help="Directory for model, vocabulary and history.")
    fit.add_argument("--dim", type=int, default=2)
    fit.add_argument("--depth", type=int, default=8)
    fit.add_argument("--tau", type=float, default=1e-3)
    fit.add_argument("--seq-len", type=int, default=128)
    fit.add_argument("--lr", type=float, default=1e-3)
    fit.add_argument("--batch", type=int, default=64)
    fit.add_argument("--epochs", type=int, default=100)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--hardmax-every", type=int, default=10)
    fit.add_argument("--holdout", type=float, default=0.0,
                     help="Fraction of reviews held out for metrics.json.")
    fit.add_argument("--max-reviews", type=int,
                     help="Use only the first reviews of the dataset.")
    fit.set_defaults(handler=cmd_train)

    for name, handler in (("predict", cmd_predict),
                          ("evaluate", cmd_evaluate)):
        sub = commands.add_parser(name, help=f"{name.capitalize()} reviews.")
        sub.add_argument("--model", type=Path, required=True)
        sub.add_argument("--vocab", type=Path,
                         help="Vocabulary file; next to the model by "
                              "default.")
        sub.add_argument("--mode", choices=(SOFTMAX, HARDMAX),
                         default=HARDMAX)
        sub.set_defaults(handler=handler)
        if name == "predict":
            text = sub.add_mutually_exclusive_group(required=True)
            text.add_argument("--text")
            text.add_argument("--text-file", type=Path)
            sub.add_argument("--trace", type=Path,
                             help="Write the token trajectory CSV here.")
        else:
            sub.add_argument("--data", type=Path, required=True)
            sub.add_argument("--max-reviews", type=int)
            sub.add_argument("--margin", type=float, default=2.0)
            sub.add_argument("--top", type=int, default=15)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Parses CLI arguments and runs the selected command.

    Args:
        argv: Arguments without the program name; ``sys.argv`` by default.

    Returns:
        The exit code.
    """
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        return args.handler(args)
    except NonFiniteLossError as e:
        logger.error(f"Training aborted: {e}")
        return EXIT_NUMERIC
    except _MATH_ERRORS as e:
        logger.error(f"Mathematical precondition violated: {e}")
        return EXIT_MATH
    except (HardformerError, OSError) as e:
        logger.error(f"Error: {e}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

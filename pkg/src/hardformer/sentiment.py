"""Interpretable sentiment classifier built on the token dynamics.

A review of n words is encoded as the configuration Z^0 whose rows are
the encoder rows of its words, moved through K transformer layers with
A = I and a trainable step size, and decoded from the average final
token by y = sigmoid(z_mean . w + v). Training differentiates the
softmax relaxation exactly (the similarity matrix included); evaluation
can use the hardmax model, whose trajectories expose the leaders.

Raises:
    EmptyCorpusError: A corpus or dataset holds no review.
    NonFiniteLossError: Training produced a NaN or infinite loss.
    DimensionMismatchError: A review does not have the model length.
"""

import collections
from collections.abc import Iterable
from collections.abc import Sequence
import dataclasses
import logging
import math
import re

import numpy as np

from .clusters import detect_leaders
from .config import TrainConfig
from .dynamics import TrajectoryRecord
from .dynamics import unroll
from .errors import DimensionMismatchError
from .errors import EmptyCorpusError
from .errors import InvalidParameterError
from .errors import NonFiniteLossError
from .errors import PersistenceViolationError
from .geometry import AttentionSpec
from .geometry import Hardmax
from .geometry import Softmax
from .geometry import SpdMatrix
from .geometry import TokenConfiguration
from .optim import Adam


logger = logging.getLogger(__name__)

PAD_TOKEN = "<PAD>"
SOFTMAX = "softmax"
HARDMAX = "hardmax"
CLAMP = 1e-12

_WORD_PATTERN = re.compile(r"\w+(?:'\w+)*")

POSITIVE_MARKERS = ("amazing", "perfect", "wonderful", "brilliant",
                    "excellent")
NEGATIVE_MARKERS = ("torture", "avoid", "awful", "boring", "terrible")
FILLER_WORDS = (
    "the", "a", "an", "movie", "film", "plot", "actor", "actress", "scene",
    "story", "director", "camera", "script", "music", "ending", "cast",
    "character", "dialogue", "time", "minutes", "watch", "saw", "was",
    "is", "and", "or", "but", "with", "of", "in", "on", "this", "that",
    "it", "they", "we", "about", "after", "before", "again",
)


def tokenize(text: str) -> list[str]:
    """Splits text into lowercase words at whitespace and punctuation.

    Apostrophes inside a word are kept, so "don't" stays one word.
    """
    return _WORD_PATTERN.findall(text.lower())


@dataclasses.dataclass(frozen=True, eq=False)
class Vocabulary:
    """An indexed word list whose entry 0 is the padding word.

    Attributes:
        words: The distinct words; ``words[0]`` is ``PAD_TOKEN``.
    """

    words: tuple[str, ...]

    def __post_init__(self):
        """Validates the word list and builds the index."""
        words = tuple(self.words)
        if not words or words[0] != PAD_TOKEN:
            raise InvalidParameterError(f"Word 0 must be {PAD_TOKEN}.")
        index = {word: i for i, word in enumerate(words)}
        if len(index) != len(words):
            raise InvalidParameterError("Vocabulary words must be distinct.")
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "_index", index)

    pad_index = 0

    def __len__(self) -> int:
        return len(self.words)

    def index(self, word: str) -> int:
        """Returns the index of ``word``; unknown words map to the pad."""
        return self._index.get(word, self.pad_index)


@dataclasses.dataclass(frozen=True)
class Review:
    """A labeled review of exactly n vocabulary indices.

    Attributes:
        word_indices: The word indices, padded or truncated to n.
        label: 1 for positive, 0 for negative.
    """

    word_indices: tuple[int, ...]
    label: int = 0

    def __post_init__(self):
        """Validates the label and length."""
        if self.label not in (0, 1):
            raise InvalidParameterError(f"Label must be 0 or 1, got "
                                        f"{self.label!r}.")
        if not self.word_indices:
            raise InvalidParameterError("A review holds at least one word.")


def build_vocabulary(corpus: Iterable[tuple[str, int]]) -> Vocabulary:
    """Collects the distinct words of a corpus in first-seen order.

    Args:
        corpus: Pairs (text, label).

    Returns:
        The vocabulary, ``PAD_TOKEN`` first.

    Raises:
        EmptyCorpusError: The corpus holds no review.
    """
    seen = {PAD_TOKEN: None}
    reviews = 0
    for text, _ in corpus:
        reviews += 1
        for word in tokenize(text):
            seen.setdefault(word, None)
    if not reviews:
        raise EmptyCorpusError("Cannot build a vocabulary without reviews.")
    logger.info(f"Vocabulary of {len(seen)} words from {reviews} reviews")
    return Vocabulary(tuple(seen))


def encode_review(
    text: str, vocab: Vocabulary, n: int, label: int = 0
) -> Review:
    """Encodes text as exactly ``n`` word indices.

    Longer texts are truncated, shorter ones padded on the right; words
    outside the vocabulary map to the pad.

    Args:
        text: The review text.
        vocab: The vocabulary.
        n: The review length.
        label: The sentiment label.

    Returns:
        The encoded review.
    """
    indices = [vocab.index(word) for word in tokenize(text)[:n]]
    indices.extend([vocab.pad_index] * (n - len(indices)))
    return Review(word_indices=tuple(indices), label=label)


def decode_review(review: Review, vocab: Vocabulary) -> list[str]:
    """Returns the words of a review without padding."""
    return [vocab.words[i] for i in review.word_indices
            if i != vocab.pad_index]


@dataclasses.dataclass(eq=False)
class SentimentModel:
    """Encoder, transformer step size and decoder of the classifier.

    The parameter arrays are mutable and updated in place by ``train``;
    use ``copy`` to keep a snapshot.

    Attributes:
        encoder: The (W, d) encoder matrix E.
        log_alpha: Shape (1,) array holding log(alpha).
        decoder: The decoder vector w.
        bias: Shape (1,) array holding the bias v.
        depth: The number of layers K.
        tau: The softmax temperature used for training.
        seq_len: The review length n.
    """

    encoder: np.ndarray
    log_alpha: np.ndarray
    decoder: np.ndarray
    bias: np.ndarray
    depth: int
    tau: float
    seq_len: int

    def __post_init__(self):
        """Copies the parameters into float64 arrays and validates them."""
        self.encoder = np.array(self.encoder, dtype=np.float64)
        self.log_alpha = np.array(self.log_alpha, dtype=np.float64).ravel()
        self.decoder = np.array(self.decoder, dtype=np.float64).ravel()
        self.bias = np.array(self.bias, dtype=np.float64).ravel()
        if self.encoder.ndim != 2:
            raise DimensionMismatchError("The encoder must be a matrix.")
        if self.decoder.shape != (self.encoder.shape[1],):
            raise DimensionMismatchError("w must have the encoder width.")
        if self.log_alpha.shape != (1,) or self.bias.shape != (1,):
            raise DimensionMismatchError("log_alpha and bias are scalars.")
        if self.depth < 0 or self.seq_len < 1:
            raise InvalidParameterError("depth >= 0 and seq_len >= 1.")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise InvalidParameterError("tau must be positive.")

    @classmethod
    def initialize(
        cls,
        vocab_size: int,
        dim: int,
        depth: int,
        tau: float,
        seq_len: int,
        seed: int = 0,
        alpha: float = 0.5,
    ) -> "SentimentModel":
        """Creates a fresh model.

        E is drawn uniformly from [-0.5, 0.5] / sqrt(d), w and v start at
        zero so the initial loss is exactly ln 2.

        Args:
            vocab_size: Number of words W.
            dim: Encoder dimension d.
            depth: Number of layers K.
            tau: Training temperature.
            seq_len: Review length n.
            seed: Seed of the encoder draw.
            alpha: Initial step size.

        Returns:
            The initialized model.
        """
        rng = np.random.default_rng(seed)
        encoder = rng.uniform(-0.5, 0.5, size=(vocab_size, dim))
        return cls(
            encoder=encoder / math.sqrt(dim),
            log_alpha=np.array([math.log(alpha)]),
            decoder=np.zeros(dim),
            bias=np.zeros(1),
            depth=depth,
            tau=tau,
            seq_len=seq_len,
        )

    @property
    def alpha(self) -> float:
        """float: The step size, always positive."""
        return math.exp(float(self.log_alpha[0]))

    @property
    def vocab_size(self) -> int:
        """int: Number of encoder rows W."""
        return self.encoder.shape[0]

    @property
    def dim(self) -> int:
        """int: Encoder dimension d."""
        return self.encoder.shape[1]

    def parameters(self) -> dict[str, np.ndarray]:
        """Returns the trainable arrays keyed by name (not copies)."""
        return {
            "encoder": self.encoder,
            "log_alpha": self.log_alpha,
            "decoder": self.decoder,
            "bias": self.bias,
        }

    def copy(self) -> "SentimentModel":
        """Returns a deep copy of the model."""
        return dataclasses.replace(self)

    def attention_spec(self, mode: str = SOFTMAX) -> AttentionSpec:
        """Returns the layer spec with A = I in the given mode."""
        if mode == SOFTMAX:
            similarity = Softmax(tau=self.tau)
        elif mode == HARDMAX:
            similarity = Hardmax()
        else:
            raise InvalidParameterError(f"Unknown mode {mode!r}.")
        return AttentionSpec(
            a=SpdMatrix.identity(self.dim), alpha=self.alpha, mode=similarity
        )

    def decision_value(self, point: np.ndarray) -> float:
        """Evaluates the separating function z . w + v."""
        return float(point @ self.decoder + self.bias[0])


def _sigmoid(u: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(u))
    return np.where(u >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _check_length(model: SentimentModel, review: Review) -> None:
    if len(review.word_indices) != model.seq_len:
        raise DimensionMismatchError(
            f"Review has {len(review.word_indices)} words, the model "
            f"expects {model.seq_len}."
        )


def forward(
    model: SentimentModel, review: Review, mode: str = SOFTMAX
) -> tuple[float, TrajectoryRecord]:
    """Classifies one review.

    Args:
        model: The classifier.
        review: A review of the model length.
        mode: ``"softmax"`` or ``"hardmax"`` attention.

    Returns:
        The prediction in (0, 1) and the token trajectory of the review.

    Raises:
        DimensionMismatchError: The review length differs from n.
    """
    _check_length(model, review)
    initial = TokenConfiguration(model.encoder[list(review.word_indices)])
    trajectory = unroll(initial, model.attention_spec(mode), model.depth)
    mean = trajectory.final.tokens.mean(axis=0)
    return float(_sigmoid(mean @ model.decoder + model.bias[0])), trajectory


def _bce(predictions: np.ndarray, labels: np.ndarray) -> float:
    clipped = np.clip(predictions, CLAMP, 1.0 - CLAMP)
    losses = -(labels * np.log(clipped)
               + (1.0 - labels) * np.log(1.0 - clipped))
    return float(losses.mean())


def _batch_arrays(
    model: SentimentModel, batch: Sequence[Review]
) -> tuple[np.ndarray, np.ndarray]:
    if not batch:
        raise EmptyCorpusError("A batch holds at least one review.")
    for review in batch:
        _check_length(model, review)
    indices = np.array([r.word_indices for r in batch], dtype=np.intp)
    labels = np.array([r.label for r in batch], dtype=np.float64)
    return indices, labels


def _softmax_layers(
    model: SentimentModel, tokens: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Runs K softmax layers on a (B, n, d) batch, keeping every layer."""
    alpha = model.alpha
    layers, similarities = [tokens], []
    for _ in range(model.depth):
        scores = np.matmul(tokens, tokens.transpose(0, 2, 1)) / model.tau
        scores -= scores.max(axis=2, keepdims=True)
        similarity = np.exp(scores)
        similarity /= similarity.sum(axis=2, keepdims=True)
        tokens = tokens + alpha * np.matmul(similarity, tokens)
        tokens /= 1.0 + alpha
        layers.append(tokens)
        similarities.append(similarity)
    return layers, similarities


def predict_batch(
    model: SentimentModel, batch: Sequence[Review], mode: str = SOFTMAX
) -> np.ndarray:
    """Predicts every review of a batch.

    Args:
        model: The classifier.
        batch: Reviews of the model length.
        mode: ``"softmax"`` or ``"hardmax"`` attention.

    Returns:
        The predictions in (0, 1).
    """
    indices, _ = _batch_arrays(model, batch)
    if mode == HARDMAX:
        return np.array([forward(model, r, HARDMAX)[0] for r in batch])
    if mode != SOFTMAX:
        raise InvalidParameterError(f"Unknown mode {mode!r}.")
    layers, _ = _softmax_layers(model, model.encoder[indices])
    mean = layers[-1].mean(axis=1)
    return _sigmoid(mean @ model.decoder + model.bias[0])


def loss(
    model: SentimentModel, batch: Sequence[Review], mode: str = SOFTMAX
) -> float:
    """Computes the mean binary cross-entropy of a batch.

    Predictions are clamped to [1e-12, 1 - 1e-12].

    Args:
        model: The classifier.
        batch: A nonempty list of reviews.
        mode: ``"softmax"`` or ``"hardmax"`` attention.

    Returns:
        The mean loss.
    """
    _, labels = _batch_arrays(model, batch)
    return _bce(predict_batch(model, batch, mode), labels)


@dataclasses.dataclass(frozen=True, eq=False)
class Gradients:
    """Loss gradients of one batch.

    Attributes:
        loss: The batch loss.
        predictions: The softmax predictions of the batch.
        encoder_rows: Sorted encoder rows touched by the batch.
        encoder: Gradient of each touched row.
        log_alpha: Gradient with respect to log(alpha).
        decoder: Gradient with respect to w.
        bias: Gradient with respect to v.
    """

    loss: float
    predictions: np.ndarray
    encoder_rows: np.ndarray
    encoder: np.ndarray
    log_alpha: float
    decoder: np.ndarray
    bias: float

    def dense(self, vocab_size: int) -> dict[str, np.ndarray]:
        """Expands the gradients to the shapes of the model parameters."""
        encoder = np.zeros((vocab_size, self.decoder.size))
        encoder[self.encoder_rows] = self.encoder
        return {
            "encoder": encoder,
            "log_alpha": np.array([self.log_alpha]),
            "decoder": self.decoder,
            "bias": np.array([self.bias]),
        }


def gradient(model: SentimentModel, batch: Sequence[Review]) -> Gradients:
    """Differentiates the softmax-model loss by reverse accumulation.

    The backward sweep runs through the decoder, every softmax layer
    (including the dependence of the similarity matrix on the tokens)
    and the encoder lookup. Clamped predictions contribute no gradient.

    Args:
        model: The classifier.
        batch: A nonempty list of reviews.

    Returns:
        The loss and its gradients.
    """
    indices, labels = _batch_arrays(model, batch)
    size, n = indices.shape
    alpha = model.alpha
    layers, similarities = _softmax_layers(model, model.encoder[indices])

    mean = layers[-1].mean(axis=1)
    predictions = _sigmoid(mean @ model.decoder + model.bias[0])
    free = (predictions >= CLAMP) & (predictions <= 1.0 - CLAMP)
    d_logit = np.where(free, predictions - labels, 0.0) / size

    d_decoder = mean.T @ d_logit
    d_bias = float(d_logit.sum())
    d_mean = d_logit[:, None] * model.decoder[None, :]
    grad = np.repeat(d_mean[:, None, :] / n, n, axis=1)

    d_alpha = 0.0
    for tokens, similarity in zip(reversed(layers[:-1]),
                                  reversed(similarities)):
        attended = np.matmul(similarity, tokens)
        d_alpha += float(np.sum(grad * (attended - tokens))) / (1 + alpha) ** 2
        d_attended = grad * (alpha / (1.0 + alpha))
        d_tokens = grad / (1.0 + alpha)
        d_tokens += np.matmul(similarity.transpose(0, 2, 1), d_attended)
        d_similarity = np.matmul(d_attended, tokens.transpose(0, 2, 1))
        d_scores = similarity * (
            d_similarity
            - np.sum(d_similarity * similarity, axis=2, keepdims=True)
        )
        d_tokens += np.matmul(d_scores + d_scores.transpose(0, 2, 1),
                              tokens) / model.tau
        grad = d_tokens

    rows, inverse = np.unique(indices.ravel(), return_inverse=True)
    d_encoder = np.zeros((rows.size, model.dim))
    np.add.at(d_encoder, inverse, grad.reshape(-1, model.dim))
    return Gradients(
        loss=_bce(predictions, labels),
        predictions=predictions,
        encoder_rows=rows,
        encoder=d_encoder,
        log_alpha=d_alpha * alpha,
        decoder=d_decoder,
        bias=d_bias,
    )


@dataclasses.dataclass(frozen=True)
class EpochStats:
    """Training statistics of one epoch.

    Attributes:
        epoch: The epoch number, starting at 1.
        loss: Mean softmax loss over the epoch's batches.
        accuracy: Training accuracy of the epoch's predictions.
        hardmax_loss: Hardmax-model loss on the training set after the
            epoch, when it was recorded.
    """

    epoch: int
    loss: float
    accuracy: float
    hardmax_loss: float | None = None


def _labels_of(predictions: np.ndarray) -> np.ndarray:
    return (predictions >= 0.5).astype(int)


def train(
    model: SentimentModel,
    dataset: Sequence[Review],
    config: TrainConfig | None = None,
) -> tuple[SentimentModel, list[EpochStats]]:
    """Trains a copy of the model with Adam on shuffled mini-batches.

    Args:
        model: The initial model; left untouched.
        dataset: The training reviews.
        config: Optimizer and schedule.

    Returns:
        The trained model and the per-epoch history.

    Raises:
        EmptyCorpusError: The dataset is empty.
        NonFiniteLossError: A batch loss is NaN or infinite.
    """
    config = config or TrainConfig()
    if not dataset:
        raise EmptyCorpusError("Cannot train on an empty dataset.")
    model = model.copy()
    params = model.parameters()
    optimizer = Adam(config.learning_rate, config.adam_beta1,
                     config.adam_beta2, config.adam_eps)
    rng = np.random.default_rng(config.seed)
    history = []
    batch_index = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(dataset))
        total_loss = 0.0
        correct = 0
        for start in range(0, len(dataset), config.batch_size):
            batch = [dataset[i] for i in order[start:start
                                                + config.batch_size]]
            grads = gradient(model, batch)
            if not math.isfinite(grads.loss):
                raise NonFiniteLossError(batch_index, grads.loss)
            total_loss += grads.loss * len(batch)
            labels = np.array([r.label for r in batch])
            correct += int(np.sum(_labels_of(grads.predictions) == labels))
            optimizer.step(params, grads.dense(model.vocab_size))
            batch_index += 1

        hardmax_loss = None
        if config.hardmax_every and epoch % config.hardmax_every == 0:
            hardmax_loss = loss(model, dataset, HARDMAX)
        stats = EpochStats(
            epoch=epoch,
            loss=total_loss / len(dataset),
            accuracy=correct / len(dataset),
            hardmax_loss=hardmax_loss,
        )
        history.append(stats)
        logger.info(
            f"Epoch {epoch}: loss={stats.loss:.6f} "
            f"accuracy={stats.accuracy:.4f} alpha={model.alpha:.4f}"
        )
    return model, history


@dataclasses.dataclass(frozen=True)
class LeaderStats:
    """Leader counts over the hardmax trajectories of a dataset.

    Attributes:
        mean: Mean number of leaders per review.
        std: Standard deviation of the count.
        min: Smallest count.
        max: Largest count.
        initial_fraction: Share of leaders detected at layer 0.
    """

    mean: float
    std: float
    min: int
    max: int
    initial_fraction: float


@dataclasses.dataclass(frozen=True)
class EvaluationResult:
    """Loss, accuracy and leader statistics of a dataset.

    Attributes:
        loss: Mean binary cross-entropy.
        accuracy: Share of reviews whose rounded prediction is correct.
        leader_stats: Leader statistics of the hardmax model.
    """

    loss: float
    accuracy: float
    leader_stats: LeaderStats


def _hardmax_runs(
    model: SentimentModel, dataset: Sequence[Review]
) -> list[tuple[float, TrajectoryRecord]]:
    return [forward(model, review, HARDMAX) for review in dataset]


def _leader_stats(
    trajectories: Iterable[TrajectoryRecord],
) -> LeaderStats:
    counts, initial = [], 0
    for trajectory in trajectories:
        try:
            leaders = detect_leaders(trajectory)
        except PersistenceViolationError as e:
            logger.warning(f"Skipping review in leader statistics: {e}")
            continue
        counts.append(len(leaders))
        initial += sum(lead.detected_at_step == 0 for lead in leaders)
    if not counts:
        return LeaderStats(0.0, 0.0, 0, 0, 0.0)
    counts = np.array(counts)
    total = int(counts.sum())
    return LeaderStats(
        mean=float(counts.mean()),
        std=float(counts.std()),
        min=int(counts.min()),
        max=int(counts.max()),
        initial_fraction=initial / total if total else 0.0,
    )


def evaluate(
    model: SentimentModel, dataset: Sequence[Review], mode: str = HARDMAX
) -> EvaluationResult:
    """Evaluates loss, accuracy and leader statistics.

    Predictions are rounded half up. Leader statistics always come from
    the hardmax trajectories.

    Args:
        model: The classifier.
        dataset: A nonempty list of reviews.
        mode: Attention used for loss and accuracy.

    Returns:
        The evaluation result.
    """
    _, labels = _batch_arrays(model, dataset)
    runs = _hardmax_runs(model, dataset)
    if mode == HARDMAX:
        predictions = np.array([prediction for prediction, _ in runs])
    else:
        predictions = predict_batch(model, dataset, mode)
    accuracy = float(np.mean(_labels_of(predictions) == labels))
    return EvaluationResult(
        loss=_bce(predictions, labels),
        accuracy=accuracy,
        leader_stats=_leader_stats(trajectory for _, trajectory in runs),
    )


def frequent_leaders(
    model: SentimentModel,
    dataset: Sequence[Review],
    vocab: Vocabulary,
    margin: float = 2.0,
    top: int = 15,
) -> list[tuple[str, int]]:
    """Counts the leader words that drive correct predictions.

    Only correctly classified reviews are scanned, and only leaders whose
    limit lies at least ``margin`` away from the decision boundary, i.e.
    with |z . w + v| >= margin, are counted.

    Args:
        model: The classifier.
        dataset: The reviews to scan.
        vocab: The vocabulary of the model.
        margin: Minimal absolute decision value of a counted leader.
        top: Number of words returned.

    Returns:
        Pairs (word, count) in decreasing count order.
    """
    counter: collections.Counter[str] = collections.Counter()
    for review, (prediction, trajectory) in zip(
        dataset, _hardmax_runs(model, dataset)
    ):
        if int(prediction >= 0.5) != review.label:
            continue
        try:
            leaders = detect_leaders(trajectory)
        except PersistenceViolationError:
            continue
        for leader in leaders:
            if abs(model.decision_value(leader.limit_point)) >= margin:
                counter[vocab.words[review.word_indices[
                    leader.token_index]]] += 1
    return counter.most_common(top)


def split_dataset(
    dataset: Sequence[Review], test_fraction: float, seed: int = 0
) -> tuple[list[Review], list[Review]]:
    """Splits a dataset into shuffled training and test parts.

    Args:
        dataset: The reviews.
        test_fraction: Share of reviews held out, in [0, 1).
        seed: Seed of the shuffle.

    Returns:
        The training and test reviews.
    """
    if not 0 <= test_fraction < 1:
        raise InvalidParameterError("test_fraction must be in [0, 1).")
    order = np.random.default_rng(seed).permutation(len(dataset))
    held = int(round(test_fraction * len(dataset)))
    return ([dataset[i] for i in order[held:]],
            [dataset[i] for i in order[:held]])


def planted_corpus(
    n_reviews: int = 200,
    seq_len: int = 16,
    markers_per_review: int = 4,
    seed: int = 0,
) -> list[tuple[str, int]]:
    """Generates a balanced corpus whose labels follow marker words.

    Each review holds ``markers_per_review`` distinct markers of its
    class and distinct filler words, in random order.

    Args:
        n_reviews: Number of reviews; labels alternate 1, 0, 1, ...
        seq_len: Words per review.
        markers_per_review: Class markers per review.
        seed: Seed of the generator.

    Returns:
        Pairs (text, label).
    """
    if not 1 <= markers_per_review <= len(POSITIVE_MARKERS):
        raise InvalidParameterError("Too many markers per review.")
    fillers = seq_len - markers_per_review
    if not 0 <= fillers <= len(FILLER_WORDS):
        raise InvalidParameterError("seq_len does not fit the word lists.")
    rng = np.random.default_rng(seed)
    corpus = []
    for i in range(n_reviews):
        label = 1 - i % 2
        markers = POSITIVE_MARKERS if label else NEGATIVE_MARKERS
        words = list(rng.choice(markers, markers_per_review, replace=False))
        words += list(rng.choice(FILLER_WORDS, fillers, replace=False))
        rng.shuffle(words)
        corpus.append((" ".join(str(w) for w in words), label))
    return corpus

"""Token dynamics of the pure-attention transformer.

One layer maps Z^k to Z^{k+1} through self-attention with value matrix
alpha I followed by the normalization that rescales every token by
1 / (1 + alpha). In hardmax mode this reads

    z_i^{k+1} = z_i^k + alpha / (1 + alpha) * (mean_{C_i} z_j^k - z_i^k),

and in softmax mode the mean over C_i is replaced by the Lambda-weighted
mean of all tokens. Every token is updated from Z^k (never from partially
updated values). ``run`` iterates layers until the configuration is
still, ``unroll`` applies a fixed number of layers.
"""

import dataclasses
import enum
import logging
import math

import numpy as np

from .config import RunConfig
from .geometry import attention_sets
from .geometry import AttentionSet
from .geometry import AttentionSpec
from .geometry import similarity_matrix
from .geometry import TokenConfiguration


logger = logging.getLogger(__name__)


class StopReason(enum.Enum):
    """Why a run stopped."""

    CONVERGED = "converged"
    MAX_STEPS_REACHED = "max_steps_reached"


@dataclasses.dataclass(frozen=True, eq=False)
class StepOutcome:
    """The result of applying one layer to Z^k.

    Attributes:
        step: The layer index k of the input configuration.
        next: The configuration Z^{k+1}.
        max_displacement: max_i ||z_i^{k+1} - z_i^k||.
        attention_sets: The sets C_i(Z^k) (hardmax mode only).
        similarity: The matrix Lambda(Z^k) (softmax mode only).
    """

    step: int
    next: TokenConfiguration
    max_displacement: float
    attention_sets: tuple[AttentionSet, ...] | None = None
    similarity: np.ndarray | None = None

    @property
    def leader_flags(self) -> tuple[bool, ...] | None:
        """tuple[bool, ...] | None: Tokens attending only to themselves."""
        if self.attention_sets is None:
            return None
        return tuple(s.is_self for s in self.attention_sets)


@dataclasses.dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """The sequence of layers applied to an initial configuration.

    Attributes:
        initial: The configuration Z^0.
        spec: The attention spec shared by every layer.
        steps: The recorded step outcomes in increasing step order.
        converged: Whether the stopping rule declared convergence.
        stop_reason: Why the iteration ended.
        steps_taken: Number of layers applied in total.
    """

    initial: TokenConfiguration
    spec: AttentionSpec
    steps: tuple[StepOutcome, ...]
    converged: bool
    stop_reason: StopReason
    steps_taken: int

    @property
    def final(self) -> TokenConfiguration:
        """TokenConfiguration: The last configuration reached."""
        return self.steps[-1].next if self.steps else self.initial

    def configurations(self) -> list[tuple[int, TokenConfiguration]]:
        """Lists every recorded configuration with its layer index.

        Returns:
            Pairs (k, Z^k), starting with (0, Z^0) and ending with the
            final configuration.
        """
        labels = [s.step for s in self.steps[1:]] + [self.steps_taken]
        pairs = [(0, self.initial)]
        pairs.extend(zip(labels, (s.next for s in self.steps)))
        return pairs

    def final_attention_sets(self) -> tuple[AttentionSet, ...] | None:
        """Computes the attention sets of the final configuration."""
        if not self.spec.is_hardmax:
            return None
        return attention_sets(self.final, self.spec)


def _displacement(before: np.ndarray, after: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(after - before, axis=1)))


def _set_average(
    tokens: np.ndarray, members: tuple[int, ...]
) -> np.ndarray:
    if len(members) == 1:
        return tokens[members[0]]
    # Correctly rounded sums keep symmetric sets exactly symmetric.
    rows = tokens[list(members)]
    return np.array([math.fsum(col) for col in rows.T]) / len(members)


def step_hardmax(
    config: TokenConfiguration, spec: AttentionSpec, index: int = 0
) -> StepOutcome:
    """Applies one hardmax layer.

    A token whose attention set is itself is left bitwise unchanged.

    Args:
        config: The configuration Z^k.
        spec: A hardmax attention spec.
        index: The layer index k, stored in the outcome.

    Returns:
        The outcome holding Z^{k+1} and the sets C_i(Z^k).

    Raises:
        InvalidParameterError: The spec is not in hardmax mode.
    """
    sets = attention_sets(config, spec)
    tokens = config.tokens
    fraction = spec.step_fraction
    moved = tokens.copy()
    for attention in sets:
        if attention.is_self:
            continue
        i = attention.owner
        target = _set_average(tokens, attention.members)
        moved[i] = tokens[i] + fraction * (target - tokens[i])
    return StepOutcome(
        step=index,
        next=TokenConfiguration(moved),
        max_displacement=_displacement(tokens, moved),
        attention_sets=sets,
    )


def step_softmax(
    config: TokenConfiguration, spec: AttentionSpec, index: int = 0
) -> StepOutcome:
    """Applies one softmax layer.

    Args:
        config: The configuration Z^k.
        spec: A softmax attention spec.
        index: The layer index k, stored in the outcome.

    Returns:
        The outcome holding Z^{k+1} = (Z + alpha Lambda Z) / (1 + alpha)
        and the similarity matrix Lambda(Z^k).
    """
    similarity = similarity_matrix(config, spec)
    similarity.flags.writeable = False
    tokens = config.tokens
    moved = tokens + spec.alpha * (similarity @ tokens)
    moved /= 1.0 + spec.alpha
    return StepOutcome(
        step=index,
        next=TokenConfiguration(moved),
        max_displacement=_displacement(tokens, moved),
        similarity=similarity,
    )


def step(
    config: TokenConfiguration, spec: AttentionSpec, index: int = 0
) -> StepOutcome:
    """Applies one layer in the mode of ``spec``."""
    if spec.is_hardmax:
        return step_hardmax(config, spec, index)
    return step_softmax(config, spec, index)


def _same_sets(before: StepOutcome, after: StepOutcome) -> bool:
    return all(
        a.members == b.members
        for a, b in zip(before.attention_sets, after.attention_sets)
    )


def run(
    initial: TokenConfiguration,
    spec: AttentionSpec,
    config: RunConfig | None = None,
) -> TrajectoryRecord:
    """Iterates layers until the configuration is still.

    The run converges when ``stability_window`` consecutive steps move
    no token by more than ``convergence_tol`` and, in hardmax mode, keep
    identical attention sets. A step that moves nothing is an exact
    fixed point and converges at once.

    Args:
        initial: The configuration Z^0.
        spec: The attention spec.
        config: The stopping rule; defaults to ``RunConfig()``.

    Returns:
        The trajectory of every step taken.
    """
    config = config or RunConfig()
    logger.info(
        f"Running {initial.n} tokens in R^{initial.dimension} "
        f"(alpha={spec.alpha}, mode={type(spec.mode).__name__})"
    )
    steps: list[StepOutcome] = []
    current = initial
    still = 0
    reason = StopReason.MAX_STEPS_REACHED
    for k in range(config.max_steps):
        outcome = step(current, spec, k)
        if outcome.max_displacement == 0.0:
            steps.append(outcome)
            reason = StopReason.CONVERGED
            break
        if outcome.max_displacement <= config.convergence_tol:
            same = not spec.is_hardmax or (
                still > 0 and _same_sets(steps[-1], outcome)
            )
            still = still + 1 if same else 1
        else:
            still = 0
        steps.append(outcome)
        current = outcome.next
        if still >= config.stability_window:
            reason = StopReason.CONVERGED
            break

    converged = reason is StopReason.CONVERGED
    if converged:
        logger.info(f"Run converged after {len(steps)} steps")
    else:
        logger.warning(
            f"Run stopped after {len(steps)} steps without converging"
        )
    return TrajectoryRecord(
        initial=initial,
        spec=spec,
        steps=tuple(steps),
        converged=converged,
        stop_reason=reason,
        steps_taken=len(steps),
    )


def unroll(
    initial: TokenConfiguration, spec: AttentionSpec, depth: int
) -> TrajectoryRecord:
    """Applies exactly ``depth`` layers, as a depth-K transformer does.

    Args:
        initial: The configuration Z^0.
        spec: The attention spec.
        depth: The number of layers K; zero returns Z^0 unchanged.

    Returns:
        The trajectory, never marked as converged.
    """
    steps = []
    current = initial
    for k in range(depth):
        outcome = step(current, spec, k)
        steps.append(outcome)
        current = outcome.next
    return TrajectoryRecord(
        initial=initial,
        spec=spec,
        steps=tuple(steps),
        converged=False,
        stop_reason=StopReason.MAX_STEPS_REACHED,
        steps_taken=depth,
    )

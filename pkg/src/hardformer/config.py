"""Configuration module for the hardformer project.

This module defines the configuration settings of the package as frozen
dataclasses: the stopping rule of a simulation run, the optimizer and
schedule of sentiment training, and the JSON simulation file read by the
command-line interface.

Raises:
    InvalidParameterError: A run or training setting is out of range.
    ConfigError: A simulation file is unreadable or malformed.
"""

import dataclasses
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .errors import InvalidParameterError
from .geometry import AttentionSpec
from .geometry import DEFAULT_TIE_TOL
from .geometry import factorize_spd
from .geometry import Hardmax
from .geometry import Softmax
from .geometry import SpdMatrix
from .geometry import TokenConfiguration


logger = logging.getLogger(__name__)

DEFAULT_CLUSTER_RADIUS = 1e-6


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidParameterError(message)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Stopping rule and export thinning of a simulation run.

    Attributes:
        max_steps: Maximum number of layers applied.
        convergence_tol: Displacement below which a step counts as still.
        stability_window: Consecutive still steps needed to converge.
        record_every: Export every k-th step (the final step always).
    """

    max_steps: int = 10_000
    convergence_tol: float = 1e-10
    stability_window: int = 10
    record_every: int = 1

    def __post_init__(self):
        """Validates that every field is positive."""
        _require(self.max_steps >= 1, "max_steps must be positive.")
        _require(
            math.isfinite(self.convergence_tol) and self.convergence_tol > 0,
            "convergence_tol must be positive.",
        )
        _require(self.stability_window >= 1,
                 "stability_window must be positive.")
        _require(self.record_every >= 1, "record_every must be positive.")


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule of sentiment training.

    Attributes:
        learning_rate: Adam step size; zero leaves the model unchanged.
        batch_size: Reviews per mini-batch.
        epochs: Passes over the training set.
        seed: Seed of the shuffling generator.
        adam_beta1: Decay of the first moment estimate.
        adam_beta2: Decay of the second moment estimate.
        adam_eps: Denominator offset of the Adam update.
        hardmax_every: Record the hardmax training loss every k epochs;
            0 disables it.
    """

    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 100
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hardmax_every: int = 10

    def __post_init__(self):
        """Validates the training settings."""
        _require(
            math.isfinite(self.learning_rate) and self.learning_rate >= 0,
            "learning_rate must be nonnegative.",
        )
        _require(self.batch_size >= 1, "batch_size must be positive.")
        _require(self.epochs >= 1, "epochs must be positive.")
        _require(0 <= self.adam_beta1 < 1, "adam_beta1 must be in [0, 1).")
        _require(0 <= self.adam_beta2 < 1, "adam_beta2 must be in [0, 1).")
        _require(self.adam_eps > 0, "adam_eps must be positive.")
        _require(self.hardmax_every >= 0, "hardmax_every must be >= 0.")


@dataclasses.dataclass(frozen=True)
class RandomGen:
    """Uniform random initial tokens in [low, high]^d.

    Attributes:
        n: Number of tokens.
        d: Dimension of the tokens.
        low: Lower bound of every coordinate.
        high: Upper bound of every coordinate.
    """

    n: int
    d: int
    low: float = -1.0
    high: float = 1.0


@dataclasses.dataclass(frozen=True)
class SimulationConfig:
    """A simulation as described by the JSON file of ``simulate``.

    Attributes:
        alpha: Step size of every layer.
        mode: Either ``"hardmax"`` or ``"softmax"``.
        tokens: Explicit initial tokens; exclusive with ``random_gen``.
        random_gen: Random initial tokens; exclusive with ``tokens``.
        a: The attention matrix; identity when omitted.
        tau: Softmax temperature, required in softmax mode.
        tie_tol: Hardmax tie tolerance.
        seed: Seed of the random generator.
        run: Stopping rule of the run.
        cluster_radius: Radius used when the run is analyzed.
    """

    alpha: float
    mode: str = "hardmax"
    tokens: tuple[tuple[float, ...], ...] | None = None
    random_gen: RandomGen | None = None
    a: tuple[tuple[float, ...], ...] | None = None
    tau: float | None = None
    tie_tol: float = DEFAULT_TIE_TOL
    seed: int = 0
    run: RunConfig = dataclasses.field(default_factory=RunConfig)
    cluster_radius: float = DEFAULT_CLUSTER_RADIUS

    def __post_init__(self):
        """Checks the cross-field rules of the file format."""
        if (self.tokens is None) == (self.random_gen is None):
            raise ConfigError(
                "Exactly one of 'tokens' and 'randomGen' must be given."
            )
        if self.mode not in ("hardmax", "softmax"):
            raise ConfigError(f"Unknown mode {self.mode!r}.")
        if self.mode == "softmax" and self.tau is None:
            raise ConfigError("Softmax mode requires 'tau'.")
        if self.random_gen is not None:
            gen = self.random_gen
            if gen.n < 1 or gen.d < 1 or not gen.low < gen.high:
                raise ConfigError(f"Invalid randomGen {gen}.")

    def attention_spec(self) -> AttentionSpec:
        """Builds the attention spec, factorizing A.

        Returns:
            The attention spec of the simulation.

        Raises:
            ConfigError: A does not match the token dimension.
            NotSymmetricError: A is not symmetric.
            NotPositiveDefiniteError: A is not positive definite.
            InvalidParameterError: alpha, tau or tie_tol is invalid.
        """
        d = self.initial_configuration().dimension
        if self.a is not None and len(self.a) != d:
            raise ConfigError(f"'A' must be {d}x{d} to match the tokens.")
        a = SpdMatrix.identity(d) if self.a is None else factorize_spd(self.a)
        if self.mode == "softmax":
            mode = Softmax(tau=self.tau)
        else:
            mode = Hardmax(tie_tol=self.tie_tol)
        return AttentionSpec(a=a, alpha=self.alpha, mode=mode)

    def initial_configuration(self) -> TokenConfiguration:
        """Returns the initial tokens, drawing them if requested."""
        if self.tokens is not None:
            return TokenConfiguration.from_points(self.tokens)
        gen = self.random_gen
        rng = np.random.default_rng(self.seed)
        return TokenConfiguration(
            rng.uniform(gen.low, gen.high, size=(gen.n, gen.d))
        )


_RUN_KEYS = {
    "maxSteps": "max_steps",
    "convergenceTol": "convergence_tol",
    "stabilityWindow": "stability_window",
    "recordEvery": "record_every",
}
_KNOWN_KEYS = {
    "tokens", "A", "alpha", "mode", "tau", "tieTol", "seed", "randomGen",
    "clusterRadius", *_RUN_KEYS,
}


def _number(document: dict[str, Any], key: str, kind: type) -> Any:
    value = document[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}.")
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"'{key}' must be finite, got {value!r}.")
    if kind is int and value != int(value):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}.")
    return kind(value)


def _matrix(value: Any, key: str) -> tuple[tuple[float, ...], ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"'{key}' must be a nonempty list of rows.")
    rows = []
    for row in value:
        if not isinstance(row, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool)
            for x in row
        ):
            raise ConfigError(f"'{key}' rows must be lists of numbers.")
        rows.append(tuple(float(x) for x in row))
    if len({len(r) for r in rows}) != 1 or not rows[0]:
        raise ConfigError(f"'{key}' rows must share a nonzero length.")
    return tuple(rows)


def parse_simulation_config(document: Any) -> SimulationConfig:
    """Validates a decoded simulation document.

    Args:
        document: The JSON object of a simulation file.

    Returns:
        The validated configuration.

    Raises:
        ConfigError: A key is unknown, missing, or has a bad value.
    """
    if not isinstance(document, dict):
        raise ConfigError("The simulation file must hold a JSON object.")
    unknown = set(document) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"Unknown keys: {', '.join(sorted(unknown))}.")
    if "alpha" not in document:
        raise ConfigError("'alpha' is required.")

    try:
        run = RunConfig(**{
            field: _number(document, key, float if "Tol" in key else int)
            for key, field in _RUN_KEYS.items()
            if key in document
        })
    except InvalidParameterError as e:
        raise ConfigError(str(e)) from e

    random_gen = None
    if "randomGen" in document:
        gen = document["randomGen"]
        if not isinstance(gen, dict) or not {"n", "d"} <= set(gen):
            raise ConfigError("'randomGen' needs at least 'n' and 'd'.")
        random_gen = RandomGen(
            n=_number(gen, "n", int),
            d=_number(gen, "d", int),
            low=_number(gen, "low", float) if "low" in gen else -1.0,
            high=_number(gen, "high", float) if "high" in gen else 1.0,
        )

    tokens = None
    if "tokens" in document:
        tokens = _matrix(document["tokens"], "tokens")
    a = _matrix(document["A"], "A") if "A" in document else None
    mode = document.get("mode", "hardmax")
    if not isinstance(mode, str):
        raise ConfigError("'mode' must be a string.")
    return SimulationConfig(
        alpha=_number(document, "alpha", float),
        mode=mode,
        tokens=tokens,
        random_gen=random_gen,
        a=a,
        tau=_number(document, "tau", float) if "tau" in document else None,
        tie_tol=(_number(document, "tieTol", float)
                 if "tieTol" in document else DEFAULT_TIE_TOL),
        seed=_number(document, "seed", int) if "seed" in document else 0,
        run=run,
        cluster_radius=(_number(document, "clusterRadius", float)
                        if "clusterRadius" in document
                        else DEFAULT_CLUSTER_RADIUS),
    )


def load_simulation_config(path: Path) -> SimulationConfig:
    """Reads and validates a simulation file.

    Args:
        path: Path of the UTF-8 JSON file.

    Returns:
        The validated configuration.

    Raises:
        ConfigError: The file is unreadable, not JSON, or malformed.
    """
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise ConfigError(f"Could not read config {path}: {e}") from e
    config = parse_simulation_config(document)
    logger.info(f"Loaded simulation config from {path}")
    return config

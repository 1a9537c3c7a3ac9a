"""Shared domain types: losses, weighted samples, and the mixed-ERM oracle contract.

A feature is a scalar in [0,1] or a 1-d numpy vector with entries in [0,1].
Hypothesis classes map features to [0,1] and expose a single `solve` entry
point that minimizes a weighted empirical loss plus signed linear terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

Feature = Union[float, np.ndarray]


class InputDomainError(ValueError):
    """An argument fell outside its declared domain (e.g. a label outside [0,1])."""


class ConfigError(ValueError):
    """A configuration value is inconsistent or out of range."""


class UnsupportedClassError(TypeError):
    """A solver was invoked on a query shape it does not handle."""


class PoolExhaustedError(RuntimeError):
    """More hallucinated samples were requested than the side pool holds."""


class AdversaryFault(RuntimeError):
    """An adversary emitted a label outside [0,1]."""


def check_unit(value: float, name: str) -> float:
    v = float(value)
    if not (0.0 <= v <= 1.0):
        raise InputDomainError(f"{name} must lie in [0,1], got {value!r}")
    return v


def feature_as_array(x: Feature) -> np.ndarray:
    """View a feature as a 1-d array (scalars become length-1 arrays)."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    return arr


@dataclass(frozen=True)
class LossFn:
    """A loss on [0,1]^2, convex in the prediction and Lipschitz in both arguments.

    `kind` is "absolute" for |prediction - label| (lipschitz 1) or "custom",
    in which case `evaluator` and `lipschitz` must be supplied by the caller;
    the engine never estimates the Lipschitz constant.
    """

    kind: str = "absolute"
    lipschitz: float = 1.0
    evaluator: Optional[Callable[[float, float], float]] = None

    def __post_init__(self):
        if self.kind not in ("absolute", "custom"):
            raise ConfigError(f"unknown loss kind {self.kind!r}")
        if self.lipschitz <= 0:
            raise ConfigError("lipschitz constant must be positive")
        if self.kind == "custom" and self.evaluator is None:
            raise ConfigError("custom loss requires an evaluator")
        if self.kind == "absolute" and self.lipschitz != 1.0:
            raise ConfigError("absolute loss has lipschitz constant 1")


ABSOLUTE_LOSS = LossFn()


def loss_eval(loss: LossFn, prediction: float, label: float) -> float:
    """Evaluate the loss; both arguments must lie in [0,1]."""
    p = check_unit(prediction, "prediction")
    y = check_unit(label, "label")
    if loss.kind == "absolute":
        return abs(p - y)
    return float(loss.evaluator(p, y))


def signed_to_absolute(sign: int) -> tuple[float, float]:
    """Rewrite a signed term eps*h(x) as |h(x) - pseudo_label| + offset.

    Returns (pseudo_label, offset) with pseudo_label = (1-eps)/2 and
    offset = -(1-eps)/2, so eps*v == |v - pseudo_label| + offset for v in [0,1].
    """
    if sign not in (-1, 1):
        raise InputDomainError(f"sign must be -1 or +1, got {sign!r}")
    pseudo = (1 - sign) / 2.0
    return pseudo, -pseudo


@dataclass(frozen=True)
class LabeledPair:
    x: Feature
    y: float
    weight: float = 1.0

    def __post_init__(self):
        check_unit(self.y, "label")
        if self.weight < 0:
            raise InputDomainError("weight must be nonnegative")


@dataclass(frozen=True)
class SignedTerm:
    sign: int
    x: Feature

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise InputDomainError(f"sign must be -1 or +1, got {self.sign!r}")


@dataclass(frozen=True)
class MixedErmQuery:
    """The oracle task: minimize sum_i w_i*loss(h(x_i), y_i) + C*sum_j eps_j*h(x~_j)."""

    pairs: tuple[LabeledPair, ...] = ()
    signed: tuple[SignedTerm, ...] = ()
    coefficient: float = 0.0
    loss: LossFn = ABSOLUTE_LOSS

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "signed", tuple(self.signed))
        if self.coefficient < 0:
            raise InputDomainError("coefficient C must be nonnegative")


@dataclass(frozen=True)
class ErmResult:
    hypothesis: object
    objective: float


class HypothesisClass:
    """Base contract for hypothesis classes served by a mixed-ERM oracle.

    Subclasses implement `evaluate` (handle, feature) -> [0,1] and `solve`.
    Solvers are deterministic given identical queries; each instance keeps a
    solve-call counter (per worker; use `clone()` for an independent counter).
    """

    solve_tolerance: float = 0.0
    is_binary: bool = False

    def __init__(self):
        self.solve_calls = 0

    def evaluate(self, handle, x: Feature) -> float:
        raise NotImplementedError

    def solve(self, query: MixedErmQuery) -> ErmResult:
        raise NotImplementedError

    def grid_handles(self, step: float) -> Sequence:
        """Candidate handles for brute-force probing; used by the reference oracle."""
        raise NotImplementedError

    def clone(self) -> "HypothesisClass":
        """A fresh instance with its own call counter (classes are stateless otherwise)."""
        import copy

        other = copy.copy(self)
        other.solve_calls = 0
        return other


def query_objective(cls: HypothesisClass, handle, query: MixedErmQuery) -> float:
    """The mixed objective of `query` evaluated at a fixed hypothesis."""
    total = 0.0
    for p in query.pairs:
        total += p.weight * loss_eval(query.loss, cls.evaluate(handle, p.x), p.y)
    for s in query.signed:
        total += query.coefficient * s.sign * cls.evaluate(handle, s.x)
    return total


def best_in_hindsight(
    cls: HypothesisClass, pairs: Sequence[LabeledPair], loss: LossFn = ABSOLUTE_LOSS
) -> tuple[object, float]:
    """Class minimizer of the cumulative loss on `pairs` (the regret comparator)."""
    pairs = tuple(pairs)
    if not pairs:
        raise InputDomainError("best_in_hindsight requires a nonempty sample")
    res = cls.solve(MixedErmQuery(pairs=pairs, signed=(), coefficient=0.0, loss=loss))
    return res.hypothesis, res.objective

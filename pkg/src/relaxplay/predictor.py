"""The relaxation / random-playout predictor and its surrogate relaxations.

Each round the predictor hallucinates the rest of the horizon from the side
pool (uniform ordered draws without replacement), attaches uniform random
signs, and plays the minimax prediction of the resulting surrogate game.
The oracle minimizes, so sup-shaped quantities are computed by negating the
signs and the loss terms (sup_h A = -inf_h -A).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    ABSOLUTE_LOSS,
    ConfigError,
    Feature,
    HypothesisClass,
    LabeledPair,
    LossFn,
    MixedErmQuery,
    PoolExhaustedError,
    SignedTerm,
    loss_eval,
)


class SidePool:
    """Observed features standing in for the unknown distribution (append-only)."""

    def __init__(self, features: Sequence[Feature] = ()):
        self._features = list(features)

    def append(self, x: Feature) -> None:
        self._features.append(x)

    @property
    def features(self) -> list:
        return self._features

    @property
    def size(self) -> int:
        return len(self._features)


@dataclass(frozen=True)
class RelaxationDraw:
    """One playout sample: hallucinated features (distinct pool slots) + signs."""

    halluc: tuple
    signs: tuple
    indices: tuple = ()

    def __post_init__(self):
        if len(self.halluc) != len(self.signs):
            raise ConfigError("hallucinated features and signs must have equal length")


@dataclass
class PredictorConfig:
    """Knobs of the per-round minimax computation for a game of horizon M."""

    horizon: int
    loss: LossFn = ABSOLUTE_LOSS
    y_grid_step: Optional[float] = None
    yhat_tolerance: Optional[float] = None
    fast_binary_path: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon M must be >= 1")
        default = 1.0 / (self.loss.lipschitz * math.sqrt(self.horizon))
        if self.y_grid_step is None:
            self.y_grid_step = default
        if self.yhat_tolerance is None:
            self.yhat_tolerance = default
        if self.y_grid_step <= 0 or self.yhat_tolerance <= 0:
            raise ConfigError("grid step and tolerance must be positive")


@dataclass
class GameHistory:
    """Rounds played so far ((x_i, y_i) for i < j) plus the current feature x_j."""

    rounds: list
    x_cur: Feature

    def pairs(self) -> tuple[LabeledPair, ...]:
        return tuple(LabeledPair(x, y) for x, y in self.rounds)


def draw_halluc(
    pool: SidePool, count: int, rng: np.random.Generator, with_replacement: bool = False
) -> RelaxationDraw:
    """Uniform ordered draw of `count` pool entries plus i.i.d. uniform signs."""
    if count > pool.size and not with_replacement:
        raise PoolExhaustedError(f"requested {count} hallucinations from a pool of {pool.size}")
    if count == 0:
        return RelaxationDraw((), (), ())
    if with_replacement:
        idx = rng.integers(0, pool.size, size=count)
    else:
        idx = rng.permutation(pool.size)[:count]
    signs = rng.integers(0, 2, size=count) * 2 - 1
    feats = tuple(pool.features[i] for i in idx)
    return RelaxationDraw(feats, tuple(int(s) for s in signs), tuple(int(i) for i in idx))


def _negated_signed(signs: Sequence[int], feats: Sequence[Feature]) -> tuple[SignedTerm, ...]:
    return tuple(SignedTerm(-s, x) for s, x in zip(signs, feats))


def inner_sup(
    history: GameHistory,
    draw: RelaxationDraw,
    probe_y: float,
    cls: HypothesisClass,
    config: PredictorConfig,
) -> float:
    """sup_h [2L sum eps_i h(x~_i) - loss(h(x_j), probe_y) - sum_i loss(h(x_i), y_i)].

    One mixed-ERM solve on the negated query.
    """
    pairs = history.pairs() + (LabeledPair(history.x_cur, probe_y),)
    query = MixedErmQuery(
        pairs=pairs,
        signed=_negated_signed(draw.signs, draw.halluc),
        coefficient=2.0 * config.loss.lipschitz,
        loss=config.loss,
    )
    return -cls.solve(query).objective


def _y_grid(config: PredictorConfig) -> np.ndarray:
    grid = np.arange(0.0, 1.0, config.y_grid_step)
    return np.append(grid, 1.0)


def predict_general(
    history: GameHistory,
    draw: RelaxationDraw,
    cls: HypothesisClass,
    config: PredictorConfig,
) -> float:
    """Minimax prediction: argmin_yhat max_y [loss(yhat,y) + inner_sup(y)].

    The adversary's sup runs on a grid of step 1/(L*sqrt(M)); inner-sup values
    are cached per grid point, so the oracle-call count equals the grid size.
    The outer objective is convex in yhat and is minimized by ternary search.
    """
    grid = _y_grid(config)
    sups = np.array([inner_sup(history, draw, float(y), cls, config) for y in grid])

    loss = config.loss
    if loss.kind == "absolute":

        def phi(yhat: float) -> float:
            return float(np.max(np.abs(yhat - grid) + sups))

    else:

        def phi(yhat: float) -> float:
            return max(loss_eval(loss, yhat, float(y)) + s for y, s in zip(grid, sups))

    lo, hi = 0.0, 1.0
    iters = max(1, math.ceil(math.log(1.0 / config.yhat_tolerance) / math.log(1.5)))
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if phi(m1) <= phi(m2):
            hi = m2
        else:
            lo = m1
    return (lo + hi) / 2.0


def predict_binary_fast(
    history: GameHistory,
    draw: RelaxationDraw,
    cls: HypothesisClass,
    config: PredictorConfig,
) -> float:
    """Exact prediction with 2 oracle calls (binary class, {0,1} labels, absolute loss).

    phi(yhat) = max(yhat + G(0), 1 - yhat + G(1)) is minimized where the two
    branches meet, clamped to [0,1].
    """
    if not cls.is_binary or config.loss.kind != "absolute":
        raise ConfigError("fast path needs a binary-valued class and absolute loss")
    g0 = inner_sup(history, draw, 0.0, cls, config)
    g1 = inner_sup(history, draw, 1.0, cls, config)
    return float(np.clip((1.0 + g1 - g0) / 2.0, 0.0, 1.0))


def _sup_value(
    pairs: tuple,
    signs: Sequence[int],
    feats: Sequence[Feature],
    cls: HypothesisClass,
    loss: LossFn,
) -> float:
    query = MixedErmQuery(
        pairs=pairs,
        signed=_negated_signed(signs, feats),
        coefficient=2.0 * loss.lipschitz,
        loss=loss,
    )
    return -cls.solve(query).objective


def relaxation_R(
    j: int,
    history_pairs: Sequence[LabeledPair],
    pool: SidePool,
    cls: HypothesisClass,
    config: PredictorConfig,
    mc_samples: int,
    rng: np.random.Generator,
    with_replacement: bool = False,
) -> tuple[float, float]:
    """Monte-Carlo estimate (mean, stderr) of the surrogate relaxation R_j.

    R_j = E[sup_h 2L sum_{i>j} eps_i h(x~_i) - L_j^h], hallucinations drawn
    from the pool. `history_pairs` are the j realized rounds (labels included).
    """
    pairs = tuple(history_pairs)
    count = config.horizon - j
    if count < 0:
        raise ConfigError("j exceeds the horizon")
    if count == 0:
        val = _sup_value(pairs, (), (), cls, config.loss)
        return val, 0.0
    vals = np.empty(mc_samples)
    for k in range(mc_samples):
        d = draw_halluc(pool, count, rng, with_replacement)
        vals[k] = _sup_value(pairs, d.signs, d.halluc, cls, config.loss)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(mc_samples)) if mc_samples > 1 else 0.0


def relaxation_Rtilde(
    j: int,
    history_pairs: Sequence[LabeledPair],
    pool: SidePool,
    true_env,
    cls: HypothesisClass,
    config: PredictorConfig,
    mc_samples: int,
    rng: np.random.Generator,
    with_replacement: bool = False,
) -> tuple[float, float]:
    """As relaxation_R, but slot j+1 is drawn from the true feature source.

    `true_env` is anything with a .sample(rng) method; diagnostic use only.
    """
    pairs = tuple(history_pairs)
    count = config.horizon - j
    if count < 0:
        raise ConfigError("j exceeds the horizon")
    if count == 0:
        val = _sup_value(pairs, (), (), cls, config.loss)
        return val, 0.0
    vals = np.empty(mc_samples)
    for k in range(mc_samples):
        fresh = true_env.sample(rng)
        d = draw_halluc(pool, count - 1, rng, with_replacement)
        vals[k] = _sup_value(pairs, (int(rng.integers(0, 2)) * 2 - 1,) + d.signs, (fresh,) + d.halluc, cls, config.loss)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(mc_samples)) if mc_samples > 1 else 0.0


def f_eval(
    history_pairs: Sequence[LabeledPair],
    tail_halluc: Sequence[Feature],
    signs: Sequence[int],
    probe_x: Feature,
    cls: HypothesisClass,
    loss: LossFn = ABSOLUTE_LOSS,
) -> float:
    """The per-slot playout value as a function of the j+1st hallucination.

    f(x) = sup_h [2L*eps_{j+1} h(x) + 2L sum_{i>=j+2} eps_i h(x~_i) - L_j^h];
    `signs` covers slots j+1..M, so len(signs) == len(tail_halluc) + 1.
    """
    if len(signs) != len(tail_halluc) + 1:
        raise ConfigError("need one sign for the probe slot plus one per tail feature")
    feats = (probe_x,) + tuple(tail_halluc)
    return _sup_value(tuple(history_pairs), tuple(signs), feats, cls, loss)

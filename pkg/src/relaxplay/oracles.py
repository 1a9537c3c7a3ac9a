"""Concrete mixed-ERM oracles: thresholds, bounded-length intervals, finite
tables, 1-Lipschitz functions, plus a brute-force reference oracle for tests.

All solvers are exact except the Lipschitz one, which declares a 1e-3
objective tolerance. Ties are broken toward the smallest parameter / lowest
index so solves are deterministic.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    ConfigError,
    ErmResult,
    Feature,
    HypothesisClass,
    MixedErmQuery,
    UnsupportedClassError,
    feature_as_array,
    loss_eval,
    query_objective,
)


def _scalar_features(query: MixedErmQuery) -> tuple[np.ndarray, np.ndarray]:
    """Pair/signed feature values as flat arrays; rejects vector features."""
    for p in query.pairs:
        if feature_as_array(p.x).size != 1:
            raise UnsupportedClassError("this oracle handles scalar features only")
    for s in query.signed:
        if feature_as_array(s.x).size != 1:
            raise UnsupportedClassError("this oracle handles scalar features only")
    xs = np.array([float(np.asarray(p.x).reshape(())) for p in query.pairs])
    xt = np.array([float(np.asarray(s.x).reshape(())) for s in query.signed])
    return xs, xt


class ThresholdClass(HypothesisClass):
    """Indicators 1{x >= a} over scalar features, parameter a in [0,1]."""

    is_binary = True

    def evaluate(self, handle, x: Feature) -> float:
        return 1.0 if float(x) >= handle else 0.0

    def solve(self, query: MixedErmQuery) -> ErmResult:
        self.solve_calls += 1
        xs, xt = _scalar_features(query)
        if xs.size == 0 and xt.size == 0:
            return ErmResult(0.0, 0.0)

        # Objective is constant on threshold cells between sorted distinct
        # positions; evaluate obj(a) = base + sum_{pos >= a} delta(pos) by
        # suffix sums over all positions.
        base = 0.0
        deltas = []
        positions = []
        for p, x in zip(query.pairs, xs):
            l0 = p.weight * loss_eval(query.loss, 0.0, p.y)
            l1 = p.weight * loss_eval(query.loss, 1.0, p.y)
            base += l0
            positions.append(x)
            deltas.append(l1 - l0)
        for s, x in zip(query.signed, xt):
            positions.append(x)
            deltas.append(query.coefficient * s.sign)
        pos = np.asarray(positions)
        dlt = np.asarray(deltas)
        order = np.argsort(pos, kind="stable")
        pos = pos[order]
        dlt = dlt[order]
        # suffix[i] = sum of deltas at positions >= pos[i]
        suffix = np.cumsum(dlt[::-1])[::-1]

        uniq, first_idx = np.unique(pos, return_index=True)
        candidates = [0.0]
        objectives = [base + suffix[0]]  # a=0 fires at every position
        for v, i in zip(uniq, first_idx):
            candidates.append(float(v))
            objectives.append(base + suffix[i])
        if uniq[-1] < 1.0:
            candidates.append(float((uniq[-1] + 1.0) / 2.0))
            objectives.append(base)  # fires nowhere
        objectives = np.asarray(objectives)
        best = int(np.argmin(objectives))  # leftmost minimizer: smallest a
        return ErmResult(candidates[best], float(objectives[best]))

    def grid_handles(self, step: float) -> Sequence[float]:
        return [float(a) for a in np.arange(0.0, 1.0 + step / 2, step)]


class IntervalClass(HypothesisClass):
    """Indicators 1{x in [a,b]} with length floor b - a >= gamma_len."""

    is_binary = True

    def __init__(self, gamma_len: float):
        super().__init__()
        if not (0.0 < gamma_len <= 1.0):
            raise ConfigError("gamma_len must lie in (0,1]")
        self.gamma_len = float(gamma_len)

    def evaluate(self, handle, x: Feature) -> float:
        a, b = handle
        return 1.0 if a <= float(x) <= b else 0.0

    def _candidates(self, values: np.ndarray) -> np.ndarray:
        # The objective is constant on cells whose boundaries are: an endpoint
        # crossing a queried feature, or the binding length constraint b = a+g
        # crossing one (i.e. a at value - g). Critical coordinates plus the
        # midpoints of every adjacent critical pair give one representative
        # per cell.
        g = self.gamma_len
        cand = {0.0, 1.0, g, 1.0 - g}
        for v in values:
            cand.update((v, v - g, v + g))
        crit = np.array(sorted(c for c in cand if -g <= c <= 1.0 + g))
        cand.update((crit[:-1] + crit[1:]) / 2.0)
        return np.array(sorted(c for c in cand if 0.0 <= c <= 1.0))

    def solve(self, query: MixedErmQuery) -> ErmResult:
        self.solve_calls += 1
        xs, xt = _scalar_features(query)
        allx = np.concatenate([xs, xt])
        g = self.gamma_len
        if allx.size == 0:
            return ErmResult((0.0, g), 0.0)

        base = 0.0
        deltas = []
        for p, x in zip(query.pairs, xs):
            base += p.weight * loss_eval(query.loss, 0.0, p.y)
            deltas.append(p.weight * (loss_eval(query.loss, 1.0, p.y) - loss_eval(query.loss, 0.0, p.y)))
        for s in query.signed:
            deltas.append(query.coefficient * s.sign)
        dlt = np.asarray(deltas)

        cand = self._candidates(np.unique(allx))
        best_obj = np.inf
        best_handle = None
        tol = 1e-12
        for a in cand:
            if a > 1.0 - g + tol:
                continue
            bs = cand[cand >= a + g - tol]
            bs = np.union1d(bs, [min(1.0, a + g)])
            covered = (allx[None, :] >= a) & (allx[None, :] <= bs[:, None])
            objs = base + covered @ dlt
            i = int(np.argmin(objs))
            if objs[i] < best_obj - tol:
                best_obj = float(objs[i])
                best_handle = (float(a), float(bs[i]))
        return ErmResult(best_handle, best_obj)

    def grid_handles(self, step: float) -> Sequence[tuple[float, float]]:
        pts = np.arange(0.0, 1.0 + step / 2, step)
        out = []
        for a in pts:
            for b in pts:
                if b - a >= self.gamma_len - 1e-12:
                    out.append((float(a), float(b)))
        return out


class FiniteClass(HypothesisClass):
    """An explicit finite table of hypotheses; handles are table indices."""

    def __init__(self, hypotheses: Sequence[Callable[[Feature], float]], binary: bool = False):
        super().__init__()
        if not hypotheses:
            raise ConfigError("FiniteClass needs at least one hypothesis")
        self.table = list(hypotheses)
        self.is_binary = binary

    @classmethod
    def from_constants(cls, constants: Sequence[float]) -> "FiniteClass":
        binary = all(c in (0.0, 1.0) for c in constants)
        return cls([(lambda x, c=float(c): c) for c in constants], binary=binary)

    def __len__(self) -> int:
        return len(self.table)

    def evaluate(self, handle, x: Feature) -> float:
        return float(self.table[handle](x))

    def solve(self, query: MixedErmQuery) -> ErmResult:
        self.solve_calls += 1
        best_idx, best_obj = 0, np.inf
        for i in range(len(self.table)):
            obj = query_objective(self, i, query)
            if obj < best_obj - 1e-15:
                best_idx, best_obj = i, obj
        if not np.isfinite(best_obj):
            best_obj = query_objective(self, 0, query)
        return ErmResult(best_idx, float(best_obj))

    def grid_handles(self, step: float) -> Sequence[int]:
        return list(range(len(self.table)))


class LipschitzClass(HypothesisClass):
    """All 1-Lipschitz functions [0,1]^d -> [0,1] under the sup norm.

    Solves the mixed objective over the hypothesis values at the queried
    points (projected subgradient with McShane-extension feasibility repair,
    then exact coordinate sweeps); the handle stores (points, values) and
    evaluates elsewhere by McShane extension. Absolute loss only.
    """

    solve_tolerance = 1e-3
    max_iters = 5000

    def __init__(self, dimension: int = 1):
        super().__init__()
        if dimension < 1:
            raise ConfigError("dimension must be >= 1")
        self.dimension = int(dimension)

    def evaluate(self, handle, x: Feature) -> float:
        points, values = handle
        d = np.max(np.abs(points - feature_as_array(x)[None, :]), axis=1)
        return float(np.clip(np.max(values - d), 0.0, 1.0))

    def _repair(self, v: np.ndarray, dist: np.ndarray) -> np.ndarray:
        v = np.max(v[None, :] - dist, axis=1)
        return np.clip(v, 0.0, 1.0)

    def solve(self, query: MixedErmQuery) -> ErmResult:
        self.solve_calls += 1
        if query.loss.kind != "absolute":
            raise UnsupportedClassError("LipschitzClass supports the absolute loss only")
        pts = [feature_as_array(p.x) for p in query.pairs]
        pts += [feature_as_array(s.x) for s in query.signed]
        if not pts:
            return ErmResult((np.zeros((1, self.dimension)), np.zeros(1)), 0.0)
        points = np.stack(pts)
        m = len(query.pairs)
        w = np.array([p.weight for p in query.pairs])
        ys = np.array([p.y for p in query.pairs])
        cs = query.coefficient * np.array([s.sign for s in query.signed])
        dist = np.max(np.abs(points[:, None, :] - points[None, :, :]), axis=2)

        def objective(v):
            obj = float(np.sum(w * np.abs(v[:m] - ys))) if m else 0.0
            if cs.size:
                obj += float(cs @ v[m:])
            return obj

        v = np.full(len(points), 0.5)
        if m:
            v[:m] = ys
        v = self._repair(v, dist)
        best_v, best_obj = v.copy(), objective(v)
        gscale = max(1.0, float(np.sum(w) + np.sum(np.abs(cs))))
        for it in range(1, self.max_iters + 1):
            g = np.zeros_like(v)
            if m:
                g[:m] = w * np.sign(v[:m] - ys)
            if cs.size:
                g[m:] += cs
            v = self._repair(v - g / (gscale * np.sqrt(it)), dist)
            obj = objective(v)
            if obj < best_obj:
                best_v, best_obj = v.copy(), obj
        # Exact coordinate sweeps: each coordinate's optimum sits at its target
        # label or a constraint boundary.
        v = best_v
        for _ in range(3):
            for i in range(len(v)):
                lo = max(0.0, float(np.max(v - dist[i])))
                hi = min(1.0, float(np.min(v + dist[i])))
                cand = [lo, hi]
                if i < m and lo <= ys[i] <= hi:
                    cand.append(float(ys[i]))
                for c in cand:
                    old = v[i]
                    v[i] = c
                    obj = objective(v)
                    if obj < best_obj - 1e-12:
                        best_obj = obj
                        best_v = v.copy()
                    else:
                        v[i] = old
            v = best_v.copy()
        return ErmResult((points, best_v), float(best_obj))


def reference_solve(cls: HypothesisClass, query: MixedErmQuery, grid_step: float) -> ErmResult:
    """Brute force over `cls.grid_handles(grid_step)`; the test-side oracle."""
    best_handle, best_obj = None, np.inf
    for handle in cls.grid_handles(grid_step):
        obj = query_objective(cls, handle, query)
        if obj < best_obj - 1e-15:
            best_handle, best_obj = handle, obj
    return ErmResult(best_handle, float(best_obj))

"""Experiment configuration, seed sweeps, trace serialization, exponent fits.

Configs are plain JSON dicts resolved against small catalogs of classes,
environments, adversaries, and schedules. Every run writes one CSV per
(horizon, seed) plus a JSON summary; reruns of the same config are
byte-identical. Config errors carry the offending field path.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import environment as envmod
from .bandit import BanditConfig, PolicyClass, run_bandit
from .core import ABSOLUTE_LOSS, ConfigError, LossFn
from .environment import FeatureDistribution, ShiftingProcess
from .epochs import EpochSchedule, RunConfig, alpha_from_q, run_epoch_predictor
from .oracles import FiniteClass, IntervalClass, LipschitzClass, ThresholdClass
from .shifting import run_shifting
from .traces import RegretTrace
from .verify import estimate_rademacher, standard_checks

MODES = ("online", "shifting", "bandit", "verify", "rademacher")


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def _get(d: dict, key: str, path: str, default=_fail):
    if key not in d:
        if default is _fail:
            _fail(f"{path}.{key}", "missing required field")
        return default
    return d[key]


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Catalog resolution
# ---------------------------------------------------------------------------


def build_class(spec: dict, path: str = "class"):
    kind = _get(spec, "kind", path)
    if kind == "threshold":
        return ThresholdClass()
    if kind == "interval":
        return IntervalClass(gamma_len=float(_get(spec, "gamma_len", path, 0.1)))
    if kind == "finite_constants":
        return FiniteClass.from_constants([float(v) for v in _get(spec, "values", path)])
    if kind == "finite_thresholds":
        ths = [float(a) for a in _get(spec, "thresholds", path)]
        return FiniteClass(
            [(lambda a: (lambda x: 1.0 if x >= a else 0.0))(a) for a in ths], binary=True
        )
    if kind == "lipschitz":
        return LipschitzClass(dimension=int(_get(spec, "dimension", path, 1)))
    _fail(f"{path}.kind", f"unknown class kind {kind!r}")


def build_distribution(spec: dict, path: str) -> FeatureDistribution:
    kind = _get(spec, "kind", path)
    if kind == "uniform":
        return FeatureDistribution.uniform(
            float(_get(spec, "low", path, 0.0)), float(_get(spec, "high", path, 1.0))
        )
    if kind == "discrete":
        return FeatureDistribution.discrete(
            [float(p) for p in _get(spec, "points", path)],
            [float(p) for p in _get(spec, "probs", path)],
        )
    if kind == "point_mass":
        return FeatureDistribution.point_mass(float(_get(spec, "x", path)))
    _fail(f"{path}.kind", f"unknown distribution kind {kind!r}")


def build_env(spec: dict, path: str = "env"):
    if _get(spec, "kind", path) == "shifting":
        segments = []
        for i, seg in enumerate(_get(spec, "segments", path)):
            segments.append(
                (
                    build_distribution(_get(seg, "dist", f"{path}.segments[{i}]"), f"{path}.segments[{i}].dist"),
                    int(_get(seg, "start", f"{path}.segments[{i}]")),
                )
            )
        return ShiftingProcess(segments)
    return build_distribution(spec, path)


def build_adversary(spec: dict, path: str = "adversary"):
    name = _get(spec, "name", path)
    catalog = envmod.builtin_adversaries()
    if name not in catalog:
        _fail(f"{path}.name", f"unknown adversary {name!r} (have {sorted(catalog)})")
    if name == "noisy_target":
        a = float(_get(spec, "target_threshold", path, 0.5))
        return envmod.noisy_target(lambda x: 1.0 if x >= a else 0.0, float(_get(spec, "p", path, 0.1)))
    if name == "flip_to_far":
        return envmod.flip_to_far()
    if name == "comparator_squeeze":
        cls_spec = _get(spec, "class", path)
        return envmod.comparator_squeeze(lambda: build_class(cls_spec, f"{path}.class"))
    if name == "constant":
        return envmod.constant(float(_get(spec, "value", path)))
    return envmod.periodic([float(v) for v in _get(spec, "values", path)])


def build_schedule(spec: dict, path: str = "schedule") -> EpochSchedule:
    kind = _get(spec, "kind", path, "polynomial")
    if kind == "polynomial":
        if "q" in spec:
            alpha = alpha_from_q(float(spec["q"]))
        else:
            alpha = float(_get(spec, "alpha", path, 1.0))
        return EpochSchedule(kind="polynomial", alpha=alpha)
    if kind == "geometric":
        return EpochSchedule(kind="geometric", ratio=float(_get(spec, "ratio", path, 1.5)))
    if kind == "fixed":
        return EpochSchedule(kind="fixed", block=int(_get(spec, "block", path)))
    _fail(f"{path}.kind", f"unknown schedule kind {kind!r}")


def build_loss(spec: Optional[dict], path: str = "loss") -> LossFn:
    if spec is None or _get(spec, "kind", path, "absolute") == "absolute":
        return ABSOLUTE_LOSS
    _fail(f"{path}.kind", "only the absolute loss is available from config files")


def build_policies(spec: dict, path: str = "policies") -> PolicyClass:
    kind = _get(spec, "kind", path)
    K = int(_get(spec, "K", path, 2))
    if kind == "constant":
        arms = [int(a) for a in _get(spec, "arms", path)]
        return PolicyClass([(lambda a: (lambda x: a))(a) for a in arms], K)
    if kind == "threshold_arm":
        ths = [float(a) for a in _get(spec, "thresholds", path)]
        return PolicyClass(
            [(lambda a: (lambda x: 1 if x >= a else 0))(a) for a in ths], K
        )
    if kind == "mixed":
        policies = []
        for a in _get(spec, "arms", path, []):
            policies.append((lambda c: (lambda x: c))(int(a)))
        for a in _get(spec, "thresholds", path, []):
            policies.append((lambda c: (lambda x: 1 if x >= c else 0))(float(a)))
        return PolicyClass(policies, K)
    _fail(f"{path}.kind", f"unknown policy kind {kind!r}")


def build_costs(spec: dict, path: str = "costs") -> Callable:
    name = _get(spec, "name", path)
    if name == "constant":
        values = np.asarray([float(v) for v in _get(spec, "values", path)])
        return lambda t, x, history: values
    if name == "feature_gap":
        # cheaper arm depends on the feature side; keeps a constant gap
        gap = float(_get(spec, "gap", path, 0.5))
        lo, hi = 0.5 - gap / 2.0, 0.5 + gap / 2.0

        def costs(t, x, history):
            if float(np.atleast_1d(x)[0]) >= 0.5:
                return np.array([hi, lo])
            return np.array([lo, hi])

        return costs
    _fail(f"{path}.name", f"unknown cost adversary {name!r}")


# ---------------------------------------------------------------------------
# Exponent fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentFit:
    horizons: tuple
    regrets: tuple
    slope: float
    intercept: float
    residual: float


def fit_exponent(horizons: Sequence[int], regrets: Sequence[float]) -> Optional[ExponentFit]:
    """OLS slope of log(regret) against log(T); None (with the reason left to
    the caller's notice) when any regret is nonpositive."""
    horizons = tuple(int(h) for h in horizons)
    if len(horizons) < 3:
        raise ConfigError("exponent fit needs at least 3 horizons")
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ConfigError("horizons must be strictly increasing")
    if any(r <= 0 for r in regrets):
        return None
    lx = np.log(np.asarray(horizons, dtype=float))
    ly = np.log(np.asarray(regrets, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return ExponentFit(horizons, tuple(float(r) for r in regrets), float(slope), float(intercept), residual)


# ---------------------------------------------------------------------------
# Experiment runner
# ---------------------------------------------------------------------------


def _resolve_common(config: dict):
    mode = _get(config, "mode", "config")
    if mode not in MODES:
        _fail("config.mode", f"unknown mode {mode!r} (have {MODES})")
    seeds = [int(s) for s in _get(config, "seeds", "config", [0])]
    if not seeds:
        _fail("config.seeds", "need at least one seed")
    return mode, seeds


def run_one_trace(config: dict, T: int, seed: int) -> RegretTrace:
    """One fresh trace for (config, horizon, seed); fresh oracle instances."""
    mode = config["mode"]
    if mode == "bandit":
        policies = build_policies(_get(config, "policies", "config"))
        env = build_env(_get(config, "env", "config"))
        costs = build_costs(_get(config, "costs", "config"))
        bconf = BanditConfig(gamma=config.get("gamma"), seed=seed)
        return run_bandit(policies, env, costs, T, bconf)

    cls = build_class(_get(config, "class", "config"))
    loss = build_loss(config.get("loss"))
    env = build_env(_get(config, "env", "config"))
    adversary = build_adversary(_get(config, "adversary", "config"))
    schedule = build_schedule(config.get("schedule", {}))
    rconf = RunConfig(
        seed=seed,
        probe_mc=int(config.get("probe_mc", 64)),
        fast_binary_path=config.get("fast_binary_path"),
    )
    if mode == "shifting":
        K = int(_get(config, "K", "config"))
        return run_shifting(cls, loss, env, adversary, T, K, schedule, rconf)
    return run_epoch_predictor(schedule, cls, loss, env, adversary, T, rconf)


def _erm_calls_of(trace: RegretTrace) -> int:
    return int(sum(trace.column("erm_calls"))) if "erm_calls" in trace.columns else 0


def run_experiment(config: dict, out_dir: Optional[str] = None) -> dict:
    """Execute the configured mode for every (horizon, seed) pair.

    Returns the summary dict; when `out_dir` (or config["out"]) is set, also
    writes one CSV per trace plus summary.json. Partial outputs are removed
    if any trace fails.
    """
    mode, seeds = _resolve_common(config)
    out = out_dir or config.get("out")
    chash = config_hash(config)
    written: list = []

    try:
        if mode == "verify":
            reports = standard_checks(seed=seeds[0], mc_samples=int(config.get("mc_samples", 64)))
            failed = [r.name for r in reports if r.passed is False]
            summary = {
                "config_hash": chash,
                "mode": mode,
                "seeds": seeds,
                "mean_regret": None,
                "std_regret": None,
                "erm_calls_total": None,
                "checks": [
                    {
                        "name": r.name,
                        "passed": r.passed,
                        "instances": r.instances,
                        "worst_margin": r.worst_margin,
                        "stderr": r.stderr,
                    }
                    for r in reports
                ],
                "failed": failed,
            }
            summary["_reports"] = reports
        elif mode == "rademacher":
            T = int(_get(config, "T", "config"))
            cls_spec = _get(config, "class", "config")
            env = build_env(_get(config, "env", "config"))
            mc = int(config.get("mc_samples", 256))
            means = []
            for seed in seeds:
                rng = np.random.default_rng([seed, 21])
                feats = [env.sample(rng) for _ in range(T)]
                mean, _ = estimate_rademacher(build_class(cls_spec), feats, mc, rng)
                means.append(mean)
            summary = {
                "config_hash": chash,
                "mode": mode,
                "seeds": seeds,
                "mean_regret": None,
                "std_regret": None,
                "erm_calls_total": None,
                "rademacher_mean": float(np.mean(means)),
                "rademacher_std": float(np.std(means)),
                "T": T,
            }
        else:
            horizons = [int(h) for h in config.get("horizons") or [int(_get(config, "T", "config"))]]
            if any(b <= a for a, b in zip(horizons, horizons[1:])):
                _fail("config.horizons", "must be strictly increasing")
            per_horizon = []
            erm_total = 0
            for T in horizons:
                finals = []
                for seed in seeds:
                    trace = run_one_trace(config, T, seed)
                    trace.metadata["config_hash"] = chash
                    finals.append(trace.final_regret)
                    erm_total += _erm_calls_of(trace)
                    if out:
                        os.makedirs(out, exist_ok=True)
                        path = os.path.join(out, f"{mode}_T{T}_seed{seed}_{chash}.csv")
                        trace.to_csv(path)
                        written.append(path)
                per_horizon.append(
                    {
                        "T": T,
                        "mean_regret": float(np.mean(finals)),
                        "std_regret": float(np.std(finals)),
                    }
                )
            summary = {
                "config_hash": chash,
                "mode": mode,
                "seeds": seeds,
                "mean_regret": per_horizon[-1]["mean_regret"],
                "std_regret": per_horizon[-1]["std_regret"],
                "erm_calls_total": erm_total,
                "per_horizon": per_horizon,
            }
            if len(horizons) >= 3:
                fit = fit_exponent(horizons, [p["mean_regret"] for p in per_horizon])
                if fit is None:
                    summary["exponent_fit"] = {"skipped": "nonpositive mean regret"}
                else:
                    summary["exponent_fit"] = {
                        "horizons": list(fit.horizons),
                        "regrets": list(fit.regrets),
                        "slope": fit.slope,
                        "intercept": fit.intercept,
                        "residual": fit.residual,
                    }
    except Exception:
        for path in written:
            if os.path.exists(path):
                os.remove(path)
        raise

    if out:
        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, f"summary_{mode}_{chash}.json")
        with open(path, "w") as fh:
            json.dump({k: v for k, v in summary.items() if not k.startswith("_")}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return summary

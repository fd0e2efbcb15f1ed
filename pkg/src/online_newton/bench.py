"""Moving-target localization benchmark.

A target moves in the plane; three (or more) sensors report noisy ranges
each round. Each algorithm commits its decision for round ``t`` before the
round's loss is built from the new ranges (play-then-observe). Every
replication owns two Philox streams derived from ``(master_seed, index)``:
one for the motion signs and one for the measurement noise, so results do
not depend on how many replications run or in which process.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .algorithms import OgdConfig, newton_step
from .analysis import RegretLedger, RoundRecord, corollary1_bound, theorem1_bound
from .errors import ConditionFailed, ConfigError, OnlineNewtonError
from .linalg import as_vector
from .oracles import LocalizationOracle, SensorArray, brute_force_optimum, estimate_constants

__all__ = [
    "MotionModel",
    "BoundsSettings",
    "ExperimentConfig",
    "ReplicationResult",
    "ExperimentReport",
    "replication_streams",
    "generate_target_path",
    "generate_measurements",
    "play_rounds",
    "run_replication",
    "run_experiment",
    "ALGORITHMS",
]

ALGORITHMS = ("ONM", "OGD")
MOTION_KINDS = ("general_variation", "limited_variation", "custom")
GAMMA_POLICIES = ("h_over_3L", "basin")


@dataclass(frozen=True)
class MotionModel:
    """Target displacement model.

    ``general_variation``: ``v_t = (-1)^{b_t} amplitude / sqrt(2t) * 1``.
    ``limited_variation``: ``v_t = 6 (-1)^{b_t} amplitude / (sqrt(2) t^2 pi^2) * 1``,
    whose norms sum to ``amplitude`` (= V_bar) over an infinite horizon in 2-D.
    ``custom``: explicit displacements, one row per round.
    """

    kind: str = "general_variation"
    amplitude: float = 0.0025
    frozen_sign: bool = False
    displacements: tuple = None

    def __post_init__(self):
        if self.kind not in MOTION_KINDS:
            raise ConfigError(f"unknown motion kind {self.kind!r}")
        if not (self.amplitude >= 0 and math.isfinite(self.amplitude)):
            raise ConfigError("motion amplitude must be finite and non-negative")
        if self.kind == "custom" and self.displacements is None:
            raise ConfigError("custom motion needs displacements")

    def displacement(self, t, b, n):
        """Displacement applied between rounds ``t-1`` and ``t`` (``t >= 1``)."""
        sign = -1.0 if b else 1.0
        if self.kind == "general_variation":
            scale = self.amplitude / math.sqrt(2.0 * t)
        elif self.kind == "limited_variation":
            scale = 6.0 * self.amplitude / (math.sqrt(2.0) * t * t * math.pi**2)
        else:
            return np.asarray(self.displacements[t - 1], dtype=float)
        return np.full(n, sign * scale)


@dataclass(frozen=True)
class BoundsSettings:
    evaluate: bool = True
    radius: float = 0.025
    samples: int = 100


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one benchmark run."""

    sensors: SensorArray
    x0_star: np.ndarray
    T: int
    sigma_w: float
    motion: MotionModel
    replications: int = 1
    master_seed: int = 0
    algorithms: tuple = ALGORITHMS
    x0: np.ndarray = None
    ogd_eta: float = None
    gamma_policy: str = "h_over_3L"
    box_half_width: float = 1.0
    grid: int = 50
    bounds: BoundsSettings = field(default_factory=BoundsSettings)
    trajectory_replications: int = 1
    name: str = "experiment"

    def __post_init__(self):
        if not isinstance(self.sensors, SensorArray):
            object.__setattr__(self, "sensors", SensorArray(self.sensors))
        x0s = as_vector(self.x0_star)
        object.__setattr__(self, "x0_star", x0s)
        object.__setattr__(self, "x0", x0s.copy() if self.x0 is None else as_vector(self.x0))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.sensors.n != x0s.shape[0] or self.x0.shape != x0s.shape:
            raise ConfigError("sensor, target and start dimensions disagree")
        if not (isinstance(self.T, int) and self.T >= 1):
            raise ConfigError("T must be an integer >= 1")
        if not (isinstance(self.replications, int) and self.replications >= 1):
            raise ConfigError("replications must be an integer >= 1")
        if not (self.sigma_w >= 0 and math.isfinite(self.sigma_w)):
            raise ConfigError("sigma_w must be finite and non-negative")
        if not self.algorithms or any(a not in ALGORITHMS for a in self.algorithms):
            raise ConfigError(f"algorithms must be drawn from {ALGORITHMS}")
        if self.gamma_policy not in GAMMA_POLICIES:
            raise ConfigError(f"gamma_policy must be one of {GAMMA_POLICIES}")
        if self.ogd_eta is not None and not self.ogd_eta > 0:
            raise ConfigError("ogd_eta must be positive")
        if not self.box_half_width > 0 or self.grid < 50:
            raise ConfigError("need box_half_width > 0 and grid >= 50")
        if self.bounds.radius <= 0 or self.bounds.samples < 100:
            raise ConfigError("bounds need radius > 0 and samples >= 100")
        if self.motion.kind == "custom" and len(self.motion.displacements) < self.T:
            raise ConfigError("custom motion needs one displacement per round")
        if not 0 <= self.trajectory_replications:
            raise ConfigError("trajectory_replications must be >= 0")

    @property
    def eta(self):
        return OgdConfig.for_horizon(self.T).eta if self.ogd_eta is None else self.ogd_eta

    def with_overrides(self, **changes):
        data = self.to_dict()
        data.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig.from_dict(data)

    def to_dict(self):
        motion = {"kind": self.motion.kind, "amplitude": self.motion.amplitude,
                  "frozen_sign": self.motion.frozen_sign}
        if self.motion.displacements is not None:
            motion["displacements"] = [list(map(float, d)) for d in self.motion.displacements]
        return {
            "name": self.name,
            "sensors": self.sensors.positions.tolist(),
            "x0_star": self.x0_star.tolist(),
            "x0": self.x0.tolist(),
            "T": self.T,
            "sigma_w": self.sigma_w,
            "motion": motion,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "algorithms": list(self.algorithms),
            "ogd_eta": self.ogd_eta,
            "gamma_policy": self.gamma_policy,
            "box_half_width": self.box_half_width,
            "grid": self.grid,
            "bounds": asdict(self.bounds),
            "trajectory_replications": self.trajectory_replications,
        }

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {"name", "sensors", "x0_star", "x0", "T", "sigma_w", "motion", "replications",
                 "master_seed", "algorithms", "ogd_eta", "gamma_policy", "box_half_width",
                 "grid", "bounds", "trajectory_replications"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        missing = {"x0_star", "T", "sigma_w", "motion"} - set(data)
        if missing:
            raise ConfigError(f"missing configuration keys: {sorted(missing)}")
        try:
            motion = data["motion"]
            if not isinstance(motion, dict):
                raise ConfigError("motion must be an object")
            disp = motion.get("displacements")
            motion_model = MotionModel(
                kind=motion.get("kind", "general_variation"),
                amplitude=float(motion.get("amplitude", 0.0)),
                frozen_sign=bool(motion.get("frozen_sign", False)),
                displacements=None if disp is None else tuple(tuple(map(float, d)) for d in disp),
            )
            bounds = BoundsSettings(**data.get("bounds", {}))
            seed = data.get("master_seed", 0)
            if not (isinstance(seed, int) and 0 <= seed < 2**64):
                raise ConfigError("master_seed must be an unsigned 64-bit integer")
            kwargs = dict(
                sensors=SensorArray(np.array(data.get("sensors", SensorArray.benchmark_default().positions),
                                             dtype=float)),
                x0_star=data["x0_star"],
                T=data["T"],
                sigma_w=float(data["sigma_w"]),
                motion=motion_model,
                replications=data.get("replications", 1),
                master_seed=seed,
                algorithms=tuple(data.get("algorithms", ALGORITHMS)),
                x0=data.get("x0"),
                ogd_eta=data.get("ogd_eta"),
                gamma_policy=data.get("gamma_policy", "h_over_3L"),
                box_half_width=float(data.get("box_half_width", 1.0)),
                grid=int(data.get("grid", 50)),
                bounds=bounds,
                trajectory_replications=int(data.get("trajectory_replications", 1)),
                name=str(data.get("name", "experiment")),
            )
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc


# -- randomness ------------------------------------------------------------------

def replication_streams(master_seed, index):
    """Independent ``(motion_rng, noise_rng)`` for one replication."""
    root = np.random.SeedSequence(master_seed, spawn_key=(index,))
    motion_ss, noise_ss = root.spawn(2)
    return np.random.Generator(np.random.Philox(motion_ss)), np.random.Generator(np.random.Philox(noise_ss))


def generate_target_path(motion, x0_star, T, rng):
    """Target positions for rounds ``0..T`` (``T + 1`` rows).

    ``path[t] = path[t-1] + v_t`` for ``t >= 1``, with a fresh Bernoulli(1/2)
    sign per round unless ``motion.frozen_sign`` is set.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    x0_star = as_vector(x0_star)
    n = x0_star.shape[0]
    if motion.frozen_sign:
        bits = np.full(T, rng.integers(0, 2))
    else:
        bits = rng.integers(0, 2, size=T)
    path = np.empty((T + 1, n))
    path[0] = x0_star
    for t in range(1, T + 1):
        path[t] = path[t - 1] + motion.displacement(t, bits[t - 1], n)
    return path


def generate_measurements(x_star, sensors, sigma_w, rng):
    """Ranges ``||x* - a_i|| + w_i`` with ``w_i ~ N(0, sigma_w^2)``.

    ``x_star`` may hold one position or one per row; the result then has one
    row of ``m`` ranges per position.
    """
    if sigma_w < 0:
        raise ValueError("sigma_w must be non-negative")
    x_star = np.asarray(x_star, dtype=float)
    if x_star.ndim == 1:
        clean = sensors.ranges(x_star)
    else:
        clean = np.sqrt(np.sum((x_star[:, None, :] - sensors.positions[None]) ** 2, axis=2))
    return clean + sigma_w * rng.standard_normal(clean.shape)


# -- single replication ------------------------------------------------------------

def play_rounds(oracle, x0, optima, algorithms=ALGORITHMS, eta=None, true_targets=None):
    """Run each algorithm over all rounds of ``oracle`` and record regret.

    Returns ``(ledgers, decisions, failure)`` where ``decisions[name]`` holds
    the played points and ``failure`` is ``(name, round, message)`` for the
    first error raised while playing, typically a singular Newton system
    (``None`` otherwise). An algorithm stops at its first error.
    """
    T = oracle.T
    x0 = as_vector(x0)
    f_star = [oracle.value(t, optima[t]) for t in range(T)]
    ledgers, decisions, failure = {}, {}, None
    for name in algorithms:
        x = x0
        records, played = [], []
        for t in range(T):
            try:
                value, g, H = oracle.evaluate(t, x)
                target = None if true_targets is None else true_targets[t]
                records.append(RoundRecord(t, x, optima[t], value, f_star[t], true_target=target))
                played.append(x)
                x = newton_step(x, g, H, t) if name == "ONM" else x - eta * g
            except OnlineNewtonError as exc:
                failure = failure or (name, t, f"{type(exc).__name__}: {exc}")
                break
        if records:
            ledgers[name] = RegretLedger.from_records(records)
            decisions[name] = np.array(played)
    return ledgers, decisions, failure


@dataclass
class ReplicationResult:
    index: int
    seed: tuple
    ledgers: dict
    target_path: np.ndarray
    optima: np.ndarray
    decisions: dict
    partial: bool = False
    error: str = None
    error_round: int = None
    constants: object = None
    theorem1: object = None
    corollary1: object = None
    corollary1_error: str = None
    bounds_error: str = None

    def final_distance(self, name):
        """Distance from the last played decision to the true target."""
        return float(np.linalg.norm(self.decisions[name][-1] - self.target_path[len(self.decisions[name]) - 1]))


def _optimum_box(center, half_width):
    return np.stack([center - half_width, center + half_width], axis=1)


def run_replication(config, index, oracle_factory=None):
    """One Monte Carlo replication; all algorithms share path and noise.

    ``oracle_factory(path, measurements)`` may replace the localization
    loss (test hook); round optima are still found by brute force inside a
    box of half-width ``config.box_half_width`` around the true target.
    """
    motion_rng, noise_rng = replication_streams(config.master_seed, index)
    path = generate_target_path(config.motion, config.x0_star, config.T, motion_rng)
    meas = generate_measurements(path, config.sensors, config.sigma_w, noise_rng)
    if oracle_factory is None:
        oracle = LocalizationOracle(config.sensors, meas)
    else:
        oracle = oracle_factory(path, meas)
    result = ReplicationResult(index, (config.master_seed, index), {}, path, None, {})
    try:
        optima = []
        prev = None
        for t in range(oracle.T):
            prev = brute_force_optimum(oracle, t, _optimum_box(path[t], config.box_half_width),
                                       config.grid, start=prev)
            optima.append(prev)
        optima = np.array(optima)
    except OnlineNewtonError as exc:
        result.partial, result.error = True, f"round optimum: {exc}"
        return result
    result.optima = optima
    ledgers, decisions, failure = play_rounds(
        oracle, config.x0, optima, config.algorithms, config.eta, true_targets=path)
    result.ledgers, result.decisions = ledgers, decisions
    if failure is not None:
        result.partial = True
        result.error = f"{failure[0]}: {failure[2]}"
        result.error_round = failure[1]
        return result
    if config.bounds.evaluate and "ONM" in ledgers:
        _attach_bounds(result, oracle, config)
    return result


def _attach_bounds(result, oracle, config):
    ledger = result.ledgers["ONM"]
    try:
        k = estimate_constants(oracle, result.optima, config.bounds.radius,
                               config.bounds.samples, seed=(config.master_seed, result.index))
        if config.gamma_policy == "h_over_3L" and k.L > 0:
            k = k.with_gamma(min(k.h / (3.0 * k.L), k.basin_radius))
        result.constants = k
        result.theorem1 = theorem1_bound(k, ledger.V_T, ledger.e0, ledger.eT)
        ledger.delta = result.theorem1.delta
        ledger.theorem1_bound = result.theorem1.bound
    except OnlineNewtonError as exc:
        result.bounds_error = str(exc)
        return
    try:
        result.corollary1 = corollary1_bound(k, ledger.e0)
        ledger.corollary1_bound = result.corollary1.bound
    except ConditionFailed as exc:
        result.corollary1_error = str(exc)


# -- experiment ----------------------------------------------------------------------

@dataclass
class ExperimentReport:
    config: ExperimentConfig
    replications: list
    complete: list
    partial: list

    def regret_curves(self, name):
        """Matrix of cumulative regret, one row per complete replication."""
        return np.array([r.ledgers[name].regret_curve() for r in self.complete])

    def mean_curve(self, name):
        curves = self.regret_curves(name)
        if len(curves) == 0:
            return np.full(self.config.T + 1, np.nan), np.full(self.config.T + 1, np.nan)
        mean = curves.mean(axis=0)
        if len(curves) > 1:
            stderr = curves.std(axis=0, ddof=1) / math.sqrt(len(curves))
        else:
            stderr = np.zeros_like(mean)
        return mean, stderr

    def final_regrets(self, name):
        return np.array([r.ledgers[name].regret for r in self.complete])

    def final_distances(self, name):
        return np.array([r.final_distance(name) for r in self.complete])

    def summary(self):
        """JSON-ready summary (no timestamps, so reruns are byte-identical)."""
        algos = {}
        for name in self.config.algorithms:
            finals = self.final_regrets(name)
            dists = self.final_distances(name)
            algos[name] = {
                "final_regret_mean": _mean(finals),
                "final_regret_stderr": _stderr(finals),
                "final_distance_mean": _mean(dists),
                "final_distance_max": float(dists.max()) if dists.size else None,
            }
        reps = [_replication_summary(r, self.config.algorithms) for r in self.replications]
        V = np.array([r.ledgers["ONM"].V_T for r in self.complete if "ONM" in r.ledgers])
        checklist_pass = [r.theorem1.assumptions_hold for r in self.complete if r.theorem1 is not None]
        return {
            "name": self.config.name,
            "replications": len(self.replications),
            "complete_replications": len(self.complete),
            "partial_replications": len(self.partial),
            "algorithms": algos,
            "V_T_mean": _mean(V),
            "bounds": {
                "evaluated": sum(r.theorem1 is not None for r in self.complete),
                "assumption_checklist_passed": int(sum(checklist_pass)),
                "theorem1_dominates": int(sum(
                    r.ledgers["ONM"].regret <= r.theorem1.bound + 1e-6
                    for r in self.complete if r.theorem1 is not None)),
                "corollary1_evaluable": sum(r.corollary1 is not None for r in self.complete),
            },
            "per_replication": reps,
        }


def _mean(a):
    return float(np.mean(a)) if len(a) else None


def _stderr(a):
    return float(np.std(a, ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0 if len(a) else None


def _replication_summary(r, algorithms):
    out = {"index": r.index, "seed": list(r.seed), "partial": r.partial, "error": r.error,
           "error_round": r.error_round}
    for name in algorithms:
        if name in r.ledgers:
            out[f"{name.lower()}_regret"] = r.ledgers[name].regret
            out[f"{name.lower()}_final_distance"] = r.final_distance(name)
    if "ONM" in r.ledgers:
        led = r.ledgers["ONM"]
        out.update({"V_T": led.V_T, "E_T": led.E_T, "e0": led.e0, "eT": led.eT})
    if r.constants is not None:
        k = r.constants
        out["constants"] = {"h": k.h, "L": k.L, "beta": k.beta, "ell": k.ell, "gamma": k.gamma,
                            "v_bar": k.v_bar, "V_bar": k.V_bar, "estimation": k.meta}
    if r.theorem1 is not None:
        out["theorem1"] = {"bound": r.theorem1.bound, "delta": r.theorem1.delta,
                           "factor": r.theorem1.factor,
                           "checklist": r.theorem1.checklist,
                           "assumptions_hold": r.theorem1.assumptions_hold}
    if r.corollary1 is not None:
        out["corollary1"] = {"bound": r.corollary1.bound, "E_lower": r.corollary1.E_lower,
                             "E_upper": r.corollary1.E_upper, "checklist": r.corollary1.checklist}
    elif r.corollary1_error is not None:
        out["corollary1"] = {"error": r.corollary1_error}
    if r.bounds_error is not None:
        out["bounds_error"] = r.bounds_error
    return out


def _run_one(args):
    config, index = args
    return run_replication(config, index)


def run_experiment(config, threads=1):
    """Run every replication and collect them in index order.

    ``threads`` is the number of worker processes (0 = one per CPU).
    Results are identical for any worker count.
    """
    workers = (os.cpu_count() or 1) if threads == 0 else max(1, int(threads))
    jobs = [(config, i) for i in range(config.replications)]
    if workers == 1 or config.replications == 1:
        results = [_run_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    complete = [r for r in results if not r.partial]
    partial = [r for r in results if r.partial]
    return ExperimentReport(config, results, complete, partial)

"""Randomized property suites behind ``online-newton verify``.

Each suite draws its instances from a fixed seed and returns a list of
:class:`PropertyResult`. A margin is positive when the property holds, so
the worst margin of a suite says how close it came to failing. Instances
whose preconditions do not hold (for example a start outside the Newton
basin) are counted as skipped rather than failed.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .algorithms import (
    OnmState,
    QuadraticMapParams,
    onm_step,
    quadratic_map_converge,
)
from .errors import DerivativeMismatch, OnlineNewtonError, SingularHessian
from .linalg import min_singular_value, operator_norm, solve_symmetric, sym_matrix
from .oracles import (
    CallableOracle,
    LocalizationOracle,
    QuadraticOracle,
    SensorArray,
    SmoothNonconvexOracle,
    brute_force_optimum,
    check_derivatives,
    estimate_constants,
)

__all__ = ["PropertyResult", "SUITES", "run_suites", "suite_lemma1", "suite_lemma2",
           "suite_lemma3", "suite_lemma4", "suite_derivatives", "suite_newton"]

# margin kept between the start and the edge of the basin
BASIN_MARGIN = 1e-6


@dataclass
class PropertyResult:
    suite: str
    name: str
    passed: bool
    worst_margin: float
    checked: int
    skipped: int = 0
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.suite}/{self.name}: checked={self.checked} "
                f"skipped={self.skipped} worst_margin={self.worst_margin:.3e} "
                f"time={self.seconds:.2f}s")

    def as_dict(self):
        return {
            "suite": self.suite,
            "name": self.name,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "checked": self.checked,
            "skipped": self.skipped,
            "seconds": self.seconds,
            "details": self.details,
        }


class _Tally:
    """Running worst margin for one property."""

    def __init__(self, suite, name):
        self.suite, self.name = suite, name
        self.worst = math.inf
        self.checked = 0
        self.failures = 0
        self.details = {}

    def add(self, margin, ok=None):
        self.checked += 1
        self.worst = min(self.worst, margin)
        if not (margin >= 0 if ok is None else ok):
            self.failures += 1

    def fail(self):
        self.checked += 1
        self.failures += 1
        self.worst = -math.inf

    def result(self, skipped, seconds, minimum=1):
        passed = self.failures == 0 and self.checked >= minimum
        worst = self.worst if self.checked else math.nan
        details = dict(self.details, failures=self.failures, required=minimum)
        return PropertyResult(self.suite, self.name, passed, worst, self.checked, skipped,
                              seconds, details)


def _rng(seed, suite):
    return np.random.default_rng(np.random.SeedSequence([seed, sum(map(ord, suite))]))


def _random_symmetric(rng, n, min_abs=0.1, max_abs=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = rng.uniform(min_abs, max_abs, n) * rng.choice([-1.0, 1.0], n)
    return sym_matrix((q * eig) @ q.T)


def _unit(rng, n, count=None):
    z = rng.standard_normal((n,) if count is None else (count, n))
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


# -- Lemma 1 ---------------------------------------------------------------------

def suite_lemma1(seed=0, matrices=20, vectors=1000):
    """``||M v|| >= h`` on unit vectors and ``||M^{-1}|| h = 1`` with ``h = min |eig|``."""
    rng = _rng(seed, "lemma1")
    start = time.perf_counter()
    lower = _Tally("lemma1", "min_norm_image_at_least_h")
    inverse = _Tally("lemma1", "inverse_norm_times_h_is_one")
    for _ in range(matrices):
        n = int(rng.integers(2, 9))
        M = _random_symmetric(rng, n)
        h = min_singular_value(M)
        V = _unit(rng, n, vectors)
        images = np.linalg.norm(V @ M, axis=1)
        lower.add(float(images.min()) - h + 1e-9)
        inv = np.column_stack([solve_symmetric(M, e) for e in np.eye(n)])
        prod = operator_norm(sym_matrix(0.5 * (inv + inv.T))) * h
        inverse.add(1e-8 - abs(prod - 1.0))
    secs = time.perf_counter() - start
    return [lower.result(0, secs), inverse.result(0, secs)]


# -- instance families for Lemmas 2 and 3 ----------------------------------------

def _random_sensors(rng, m=3):
    while True:
        pos = rng.uniform(-1.0, 1.0, (m, 2))
        # keep the sensors well spread so the range geometry is informative
        if min(np.linalg.norm(pos[i] - pos[j]) for i in range(m) for j in range(i)) > 0.3:
            return SensorArray(pos)


def _localization_instance(rng, sigma):
    """One-round localization loss with its polished minimizer, or ``None``."""
    sensors = _random_sensors(rng, int(rng.integers(3, 5)))
    target = rng.uniform(-2.0, 2.0, 2)
    if np.min(sensors.ranges(target)) < 0.5:
        return None
    d = sensors.ranges(target) + sigma * rng.standard_normal(sensors.m)
    oracle = LocalizationOracle(sensors, d[None, :])
    box = np.stack([target - 0.5, target + 0.5], axis=1)
    try:
        x_star = brute_force_optimum(oracle, 0, box, 50)
    except OnlineNewtonError:
        return None
    beta = min(0.25, 0.5 * float(np.min(sensors.ranges(x_star))))
    return oracle, x_star, beta


def _smooth_instance(rng, T=1, step=0.0):
    n = int(rng.integers(2, 5))
    centers = np.empty((T, n))
    centers[0] = rng.uniform(-1.0, 1.0, n)
    for t in range(1, T):
        centers[t] = centers[t - 1] + step * _unit(rng, n)
    oracle = SmoothNonconvexOracle.random(rng, n, centers, indefinite=bool(rng.integers(0, 2)))
    return oracle, centers


# -- Lemma 2 ---------------------------------------------------------------------

def suite_lemma2(seed=0, instances=500, samples=200, max_draws=None):
    """Strict contraction and the quadratic error bound for one Newton step.

    Constants are estimated around each instance's stationary point and the
    start is drawn at a distance up to ``1.1 gamma``; draws not inside
    ``gamma - 1e-6`` are skipped.
    """
    rng = _rng(seed, "lemma2")
    start = time.perf_counter()
    contraction = _Tally("lemma2", "strict_contraction")
    quadratic = _Tally("lemma2", "quadratic_error_bound")
    skipped = 0
    draws = 0
    max_draws = max_draws or 4 * instances
    while contraction.checked < instances and draws < max_draws:
        draws += 1
        if draws % 2:
            inst = _localization_instance(rng, sigma=rng.uniform(0.0, 0.02))
            if inst is None:
                skipped += 1
                continue
            oracle, x_star, beta = inst
        else:
            oracle, centers = _smooth_instance(rng)
            x_star, beta = centers[0], 0.5
        try:
            k = estimate_constants(oracle, x_star[None, :], beta, samples, seed=[seed, draws])
        except (OnlineNewtonError, ValueError):
            skipped += 1
            continue
        gamma = k.gamma
        e0 = rng.uniform(0.0, 1.1) * gamma
        if e0 > gamma - BASIN_MARGIN or e0 == 0.0:
            skipped += 1
            continue
        x0 = x_star + e0 * _unit(rng, x_star.shape[0])
        e0 = float(np.linalg.norm(x0 - x_star))
        try:
            x1 = onm_step(oracle, OnmState(x0, 0)).x
        except (SingularHessian, OnlineNewtonError):
            contraction.fail()
            quadratic.fail()
            continue
        e1 = float(np.linalg.norm(x1 - x_star))
        contraction.add(e0 - e1, ok=e1 < e0)
        quadratic.add(k.contraction * e0 * e0 - e1 + 1e-9)
    secs = time.perf_counter() - start
    return [contraction.result(skipped, secs, instances), quadratic.result(skipped, secs, instances)]


# -- Lemma 3 ---------------------------------------------------------------------

def suite_lemma3(seed=0, instances=200, T=100, samples=100, max_draws=None):
    """Basin retention: with per-round motion within ``gamma - c gamma^2``
    the post-update error stays below ``gamma`` for ``T`` rounds."""
    rng = _rng(seed, "lemma3")
    start = time.perf_counter()
    tally = _Tally("lemma3", "basin_retention")
    skipped = 0
    draws = 0
    max_draws = max_draws or 4 * instances
    worst_ratio = 0.0
    while tally.checked < instances and draws < max_draws:
        draws += 1
        try:
            built = _lemma3_instance(rng, draws % 2 == 1, T, samples, [seed, draws])
        except OnlineNewtonError:
            built = None
        if built is None:
            skipped += 1
            continue
        oracle, optima, k = built
        gamma = k.gamma
        x = optima[0] + rng.uniform(0.0, 1.0) * (gamma - BASIN_MARGIN) * _unit(rng, optima.shape[1])
        worst = -math.inf
        ok = True
        for t in range(T):
            try:
                x = onm_step(oracle, OnmState(x, t)).x
            except OnlineNewtonError:
                ok = False
                break
            e = float(np.linalg.norm(x - optima[t + 1]))
            worst = max(worst, e / gamma)
            if not e < gamma:
                ok = False
        worst_ratio = max(worst_ratio, worst)
        if ok:
            tally.add(gamma * (1.0 - worst))
        else:
            tally.fail()
    tally.details["worst_error_over_gamma"] = worst_ratio
    return [tally.result(skipped, time.perf_counter() - start, instances)]


def _lemma3_instance(rng, localization, T, samples, seed):
    """Moving-optimum instance with ``T + 1`` rounds and motion inside the
    budget of the constants estimated on the whole path, or ``None``."""
    frac = rng.uniform(0.2, 0.9)
    speed = rng.uniform(0.3, 1.0)
    if localization:
        sensors = _random_sensors(rng)
        target = rng.uniform(-2.0, 2.0, 2)
        if np.min(sensors.ranges(target)) < 0.5:
            return None
        beta = 0.25
        k0 = estimate_constants(LocalizationOracle(sensors, sensors.ranges(target)[None, :]),
                                target[None, :], beta, samples, seed=seed)
        gamma = frac * k0.basin_radius
        step = speed * k0.with_gamma(gamma).motion_budget
        path = np.empty((T + 1, 2))
        path[0] = target
        for t in range(1, T + 1):
            path[t] = path[t - 1] + step * _unit(rng, 2)
        ranges = np.sqrt(((path[:, None, :] - sensors.positions[None]) ** 2).sum(axis=2))
        if ranges.min() < 0.3:
            return None
        oracle = LocalizationOracle(sensors, ranges)
    else:
        oracle, path = _smooth_instance(rng, T + 1, 0.0)
        beta = 0.5
        k0 = estimate_constants(SmoothNonconvexOracle(oracle.A, path[:1], oracle.alpha, oracle.omega,
                                                      oracle.kappa, oracle.w),
                                path[:1], beta, samples, seed=seed)
        gamma = frac * k0.basin_radius
        step = speed * k0.with_gamma(gamma).motion_budget
        for t in range(1, T + 1):
            path[t] = path[t - 1] + step * _unit(rng, path.shape[1])
        oracle = SmoothNonconvexOracle(oracle.A, path, oracle.alpha, oracle.omega, oracle.kappa, oracle.w)
    k = estimate_constants(oracle, path, beta, samples, seed=seed)
    if gamma > k.basin_radius:
        return None
    k = k.with_gamma(gamma)
    if k.v_bar > k.motion_budget:
        return None
    return oracle, path, k


# -- Lemma 4 ---------------------------------------------------------------------

LEMMA4_PRODUCTS = (0.1, 0.5, 0.9, 0.99)
LEMMA4_SCALES = (0.5, 1.0, 4.0)


def suite_lemma4(seed=0, starts=8, tol=1e-8):
    """Both monotone cases of the quadratic map ``x -> c x^2 + v``.

    From ``x0`` in ``[x_lower, x_upper)`` the iterates decrease strictly
    until within ``1e-12`` of ``x_lower``; from ``x0`` in ``[0, x_lower]``
    they never decrease (up to a few ulp at the fixed point). Either way the
    final iterate is within ``tol`` of ``x_lower``.
    """
    rng = _rng(seed, "lemma4")
    start = time.perf_counter()
    conv = _Tally("lemma4", "converges_to_lower_fixed_point")
    dec = _Tally("lemma4", "case_i_strictly_decreasing")
    inc = _Tally("lemma4", "case_ii_non_decreasing")
    grid = []
    for prod in LEMMA4_PRODUCTS:
        for c in LEMMA4_SCALES:
            params = QuadraticMapParams(c, prod / (4.0 * c))
            lo, hi = params.x_lower, params.x_upper
            upper_starts = lo + (1.0 - rng.uniform(0.001, 1.0, starts)) * (hi - lo)
            lower_starts = np.concatenate([[0.0, lo], rng.uniform(0.0, lo, starts - 2)])
            max_iters = 0
            for case, x0s in (("i", upper_starts), ("ii", lower_starts)):
                for x0 in x0s:
                    xs = quadratic_map_converge(params, x0)
                    max_iters = max(max_iters, len(xs) - 1)
                    conv.add(tol - abs(xs[-1] - lo))
                    steps = np.diff(xs)
                    slack = 4.0 * np.finfo(float).eps * lo
                    if case == "i":
                        far = np.abs(xs[:-1] - lo) > 1e-12
                        margin = float(np.min(-steps[far])) if np.any(far) else math.inf
                        dec.add(margin if np.any(far) else 0.0, ok=not np.any(far) or margin > 0)
                    else:
                        inc.add(float(np.min(steps)) + slack if steps.size else slack)
            grid.append({"four_cv": prod, "c": c, "v": params.v, "x_lower": lo, "x_upper": hi,
                         "max_iterations": max_iters})
    conv.details["grid"] = grid
    secs = time.perf_counter() - start
    return [conv.result(0, secs), dec.result(0, secs), inc.result(0, secs)]


# -- derivatives -------------------------------------------------------------------

def suite_derivatives(seed=0, points=100):
    """Finite-difference validation of every shipped oracle family."""
    rng = _rng(seed, "derivatives")
    out = []
    for name, draw in (("QuadraticOracle", _deriv_quadratic),
                       ("LocalizationOracle", _deriv_localization),
                       ("SmoothNonconvexOracle", _deriv_smooth)):
        start = time.perf_counter()
        tally = _Tally("derivatives", name)
        for _ in range(points):
            oracle, x = draw(rng)
            try:
                rep = check_derivatives(oracle, 0, x)
            except DerivativeMismatch:
                tally.fail()
                continue
            tally.add(min(1.0 - rep.grad_deviation / rep.grad_tol, 1.0 - rep.hess_deviation / rep.hess_tol))
        out.append(tally.result(0, time.perf_counter() - start, points))
    return out


def _deriv_quadratic(rng):
    n = int(rng.integers(1, 7))
    return QuadraticOracle(_random_symmetric(rng, n), rng.standard_normal(n)), rng.uniform(-3, 3, n)


def _deriv_localization(rng):
    sensors = SensorArray(rng.uniform(-1.0, 1.0, (int(rng.integers(1, 6)), 2)))
    while True:
        x = rng.uniform(-3.0, 3.0, 2)
        if np.min(sensors.ranges(x)) > 0.1:
            break
    d = sensors.ranges(rng.uniform(-3.0, 3.0, 2)) + 0.01 * rng.standard_normal(sensors.m)
    return LocalizationOracle(sensors, d[None, :]), x


def _deriv_smooth(rng):
    n = int(rng.integers(1, 7))
    oracle = SmoothNonconvexOracle.random(rng, n, rng.uniform(-1, 1, (1, n)),
                                          indefinite=bool(rng.integers(0, 2)))
    return oracle, oracle.centers[0] + rng.uniform(-1.5, 1.5, n)


# -- Newton step invariants ------------------------------------------------------

def suite_newton(seed=0, instances=100, tol=1e-9, affine_tol=1e-8):
    """One-step exactness on quadratics and affine covariance of the update."""
    rng = _rng(seed, "newton")
    start = time.perf_counter()
    exact = _Tally("newton", "one_step_quadratic_exactness")
    for _ in range(instances):
        n = int(rng.integers(1, 9))
        A = _random_symmetric(rng, n, 0.5, 5.0)
        b = rng.standard_normal(n)
        x_star = np.linalg.solve(A, b)
        x0 = x_star + rng.uniform(-10.0, 10.0, n)
        x1 = onm_step(QuadraticOracle(A, b), OnmState(x0, 0)).x
        exact.add(tol * max(1.0, float(np.linalg.norm(x_star))) - float(np.linalg.norm(x1 - x_star)))
    affine = _Tally("newton", "affine_covariance")
    for _ in range(instances):
        n = int(rng.integers(1, 6))
        f = SmoothNonconvexOracle.random(rng, n, rng.uniform(-1, 1, (1, n)))
        S = np.linalg.qr(rng.standard_normal((n, n)))[0] * rng.uniform(0.5, 2.0, n)
        shift = rng.standard_normal(n)
        g = _affine_pullback(f, S, shift)
        x0 = f.centers[0] + rng.uniform(-0.3, 0.3, n)
        y0 = np.linalg.solve(S, x0 - shift)
        try:
            x1 = onm_step(f, OnmState(x0, 0)).x
            y1 = onm_step(g, OnmState(y0, 0)).x
        except SingularHessian:
            affine.fail()
            continue
        mapped = np.linalg.solve(S, x1 - shift)
        affine.add(affine_tol * max(1.0, float(np.linalg.norm(mapped))) - float(np.linalg.norm(y1 - mapped)))
    secs = time.perf_counter() - start
    return [exact.result(0, secs, instances), affine.result(0, secs, instances)]


def _affine_pullback(f, S, shift):
    """Oracle for ``g(y) = f(S y + shift)``."""

    def value(t, y):
        return f.value(t, S @ y + shift)

    def gradient(t, y):
        return S.T @ f.gradient(t, S @ y + shift)

    def hessian(t, y):
        return S.T @ f.hessian(t, S @ y + shift) @ S

    return CallableOracle(value, gradient, hessian, f.n, f.T)


SUITES = {
    "lemma1": suite_lemma1,
    "lemma2": suite_lemma2,
    "lemma3": suite_lemma3,
    "lemma4": suite_lemma4,
    "derivatives": suite_derivatives,
    "newton": suite_newton,
}


def run_suites(names=("all",), seed=0, options=None):
    """Run the named suites (``"all"`` expands to every suite) in order.

    ``options`` maps a suite name to keyword overrides for that suite.
    """
    options = options or {}
    if "all" in names:
        names = tuple(SUITES)
    results = []
    for name in names:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
        results.extend(SUITES[name](seed=seed, **options.get(name, {})))
    return results

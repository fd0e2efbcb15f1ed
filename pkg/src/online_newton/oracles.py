"""Per-round loss oracles and the numerical tools built on top of them.

An oracle exposes, for every round ``t`` in ``range(oracle.T)``, the value,
gradient and Hessian of ``f_t`` at a point. Shipped families:

* :class:`QuadraticOracle` -- ``1/2 x^T A x - b^T x`` (exact constants, saddles)
* :class:`LocalizationOracle` -- range-measurement least squares
* :class:`SmoothNonconvexOracle` -- quadratic + cosine ripple + cubic term,
  with a known stationary point per round

:class:`CallableOracle` wraps user functions.
"""

import abc
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DegenerateOptimum,
    DerivativeMismatch,
    NoInteriorMinimum,
    PolishFailed,
    SensorCoincidence,
    SingularMatrix,
)
from .linalg import as_vector, min_singular_value, operator_norm, solve_symmetric, sym_matrix

__all__ = [
    "LossOracle",
    "QuadraticOracle",
    "LocalizationOracle",
    "SmoothNonconvexOracle",
    "CallableOracle",
    "SensorArray",
    "RegularityConstants",
    "DerivativeReport",
    "localization_loss",
    "quadratic_loss",
    "check_derivatives",
    "estimate_constants",
    "brute_force_optimum",
    "newton_polish",
    "BENCHMARK_SENSORS",
    "SENSOR_EPS",
]

SENSOR_EPS = 1e-9

BENCHMARK_SENSORS = ((0.5, 0.5), (0.0, 0.5), (0.5, 0.0))


class LossOracle(abc.ABC):
    """Round-indexed loss ``f_t`` with first and second derivatives.

    Subclasses set ``n`` (dimension) and ``T`` (number of rounds; valid
    round indices are ``0 .. T-1``) and implement :meth:`evaluate`.
    """

    n: int
    T: int

    @abc.abstractmethod
    def evaluate(self, t, x):
        """Return ``(value, gradient, hessian)`` of ``f_t`` at ``x``."""

    def value(self, t, x):
        return self.evaluate(t, x)[0]

    def gradient(self, t, x):
        return self.evaluate(t, x)[1]

    def hessian(self, t, x):
        return self.evaluate(t, x)[2]

    def values(self, t, X):
        """Values at each row of ``X`` (shape ``(k, n)``)."""
        return np.array([self.value(t, x) for x in np.asarray(X, dtype=float)])

    def hessians(self, t, X):
        """Hessians at each row of ``X``; shape ``(k, n, n)``."""
        X = np.asarray(X, dtype=float)
        out = np.empty((len(X), self.n, self.n))
        for i, x in enumerate(X):
            out[i] = self.hessian(t, x)
        return out

    def batch_values(self, X):
        """Values for ``X`` of shape ``(T, k, n)``: slab ``t`` is evaluated on ``f_t``."""
        return np.array([self.values(t, Xt) for t, Xt in enumerate(X)])

    def batch_hessians(self, X):
        """Hessians for ``X`` of shape ``(T, k, n)``; returns ``(T, k, n, n)``."""
        return np.array([self.hessians(t, Xt) for t, Xt in enumerate(X)])

    def _check_round(self, t):
        if not 0 <= t < self.T:
            raise IndexError(f"round {t} outside 0..{self.T - 1}")


# -- quadratic -----------------------------------------------------------------

def quadratic_loss(x, A, b):
    """``(1/2 x^T A x - b^T x, A x - b, A)``."""
    x = np.asarray(x, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    Ax = A @ x
    return 0.5 * float(x @ Ax) - float(b @ x), Ax - b, A.copy()


class QuadraticOracle(LossOracle):
    """Quadratic losses; ``A``/``b`` may be fixed or given per round.

    Parameters
    ----------
    A : array_like, shape (n, n) or (T, n, n)
    b : array_like, shape (n,) or (T, n)
    T : int, optional
        Number of rounds when both ``A`` and ``b`` are fixed.
    """

    def __init__(self, A, b, T=1):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        rounds = {arr.shape[0] for arr, base in ((A, 2), (b, 1)) if arr.ndim == base + 1}
        if len(rounds) > 1:
            raise ValueError("per-round A and b disagree on the number of rounds")
        self.T = rounds.pop() if rounds else int(T)
        A_rounds = A if A.ndim == 3 else np.broadcast_to(A, (self.T,) + A.shape)
        self.A = np.array([sym_matrix(a) for a in A_rounds])
        self.b = np.array(b if b.ndim == 2 else np.broadcast_to(b, (self.T,) + b.shape), dtype=float)
        self.n = self.A.shape[-1]
        if self.b.shape != (self.T, self.n):
            raise ValueError(f"b has shape {b.shape}, expected ({self.n},) or ({self.T}, {self.n})")

    def evaluate(self, t, x):
        self._check_round(t)
        return quadratic_loss(as_vector(x), self.A[t], self.b[t])

    def values(self, t, X):
        X = np.asarray(X, dtype=float)
        return 0.5 * np.einsum("ki,ij,kj->k", X, self.A[t], X) - X @ self.b[t]

    def hessians(self, t, X):
        return np.broadcast_to(self.A[t], (len(X), self.n, self.n)).copy()

    def stationary_point(self, t):
        return solve_symmetric(self.A[t], self.b[t])


# -- localization --------------------------------------------------------------

@dataclass(frozen=True)
class SensorArray:
    """Fixed sensor positions, one per row."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[0] < 1:
            raise ValueError("need at least one sensor given as rows of coordinates")
        if not np.all(np.isfinite(pos)):
            raise ValueError("sensor positions must be finite")
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)

    @property
    def m(self):
        return self.positions.shape[0]

    @property
    def n(self):
        return self.positions.shape[1]

    @classmethod
    def benchmark_default(cls):
        return cls(np.array(BENCHMARK_SENSORS))

    def ranges(self, x):
        return np.sqrt(np.sum((np.asarray(x, dtype=float) - self.positions) ** 2, axis=-1))


# below this many sensor coordinates plain float arithmetic beats numpy
_SCALAR_PATH_SIZE = 16


def _localization_loss_scalar(x, pos, d):
    xs = x.tolist()
    n = len(xs)
    val = 0.0
    g = [0.0] * n
    H = [[0.0] * n for _ in range(n)]
    iso = 0.0
    for i, (a, di) in enumerate(zip(pos.tolist(), d.tolist())):
        diff = [xj - aj for xj, aj in zip(xs, a)]
        r = math.hypot(*diff)
        if r <= SENSOR_EPS:
            raise SensorCoincidence(f"x={xs} coincides with sensor {i}")
        res = r - di
        val += res * res
        ratio = di / r
        iso += 1.0 - ratio
        cg = 2.0 * res / r
        w = 2.0 * ratio / (r * r)
        for j in range(n):
            g[j] += cg * diff[j]
            wj = w * diff[j]
            Hj = H[j]
            for k in range(n):
                Hj[k] += wj * diff[k]
    for j in range(n):
        H[j][j] += 2.0 * iso
    return val, np.array(g), np.array(H)


def localization_loss(x, sensors, d):
    """Range least-squares loss ``sum_i (||x - a_i|| - d_i)^2`` and derivatives.

    Returns ``(value, gradient, hessian)``. The Hessian is
    ``sum_i 2[(1 - d_i/r_i) I + (d_i/r_i) u_i u_i^T]`` with ``u_i`` the unit
    vector from sensor ``i`` to ``x``.

    Raises
    ------
    SensorCoincidence
        If ``x`` is within ``1e-9`` of a sensor, where the loss is not smooth.
    """
    pos = sensors.positions if isinstance(sensors, SensorArray) else SensorArray(sensors).positions
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    if pos.size <= _SCALAR_PATH_SIZE:
        return _localization_loss_scalar(x, pos, d)
    diff = x - pos
    r = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if r.min() <= SENSOR_EPS:
        i = int(np.argmin(r))
        raise SensorCoincidence(f"x={x.tolist()} coincides with sensor {i}")
    res = r - d
    u = diff / r[:, None]
    ratio = d / r
    hess = (u.T * (2.0 * ratio)) @ u
    iso = 2.0 * (len(r) - ratio.sum())
    hess.flat[:: x.shape[0] + 1] += iso
    return float(res @ res), 2.0 * (res @ u), hess


class LocalizationOracle(LossOracle):
    """Round ``t`` uses the range measurements ``measurements[t]``."""

    def __init__(self, sensors, measurements):
        self.sensors = sensors if isinstance(sensors, SensorArray) else SensorArray(sensors)
        meas = np.array(measurements, dtype=float)
        if meas.ndim == 1:
            meas = meas[None, :]
        if meas.ndim != 2 or meas.shape[1] != self.sensors.m:
            raise ValueError(f"measurements shape {meas.shape} does not match {self.sensors.m} sensors")
        self.measurements = meas
        self.T = meas.shape[0]
        self.n = self.sensors.n

    def evaluate(self, t, x):
        self._check_round(t)
        return localization_loss(x, self.sensors, self.measurements[t])

    def values(self, t, X):
        XT = np.asarray(X, dtype=float).T
        out = np.zeros(XT.shape[1])
        for a, d in zip(self.sensors.positions, self.measurements[t]):
            diff = XT - a[:, None]
            res = np.sqrt(np.einsum("ij,ij->j", diff, diff)) - d
            out += res * res
        return out

    def hessians(self, t, X):
        return self._hessians(np.asarray(X, dtype=float), self.measurements[t])

    def batch_values(self, X):
        X = np.asarray(X, dtype=float)
        diff = X[:, :, None, :] - self.sensors.positions
        res = np.sqrt(np.sum(diff * diff, axis=-1)) - self.measurements[:, None, :]
        return np.sum(res * res, axis=-1)

    def batch_hessians(self, X):
        return self._hessians(np.asarray(X, dtype=float), self.measurements[:, None, :])

    def _hessians(self, X, d):
        # X: (..., n); d broadcasts against (..., m)
        diff = X[..., None, :] - self.sensors.positions
        r = np.sqrt(np.sum(diff * diff, axis=-1))
        if np.any(r <= SENSOR_EPS):
            raise SensorCoincidence("a sample point coincides with a sensor")
        u = diff / r[..., None]
        ratio = d / r
        iso = np.sum(1.0 - ratio, axis=-1)[..., None, None] * np.eye(self.n)
        return 2.0 * (iso + np.einsum("...m,...mi,...mj->...ij", ratio, u, u))


# -- synthetic smooth nonconvex ------------------------------------------------

class SmoothNonconvexOracle(LossOracle):
    """``f_t(x) = 1/2 y^T A y + alpha sum(1 - cos(omega y)) + kappa/6 (w^T y)^3``.

    Here ``y = x - c_t``. Every round has a stationary point at ``c_t`` with
    Hessian ``A + alpha omega^2 I``; the cosine ripple and the cubic term make
    the Hessian vary (and the function nonconvex) away from it.
    """

    def __init__(self, A, centers, alpha=0.5, omega=1.0, kappa=0.0, w=None):
        self.A = sym_matrix(A)
        self.centers = np.array(centers, dtype=float)
        if self.centers.ndim == 1:
            self.centers = self.centers[None, :]
        self.T, self.n = self.centers.shape
        if self.A.shape != (self.n, self.n):
            raise ValueError("A and centers disagree on the dimension")
        self.alpha = float(alpha)
        self.omega = float(omega)
        self.kappa = float(kappa)
        self.w = np.zeros(self.n) if w is None else as_vector(w)

    @classmethod
    def random(cls, rng, n, centers, min_eig=0.5, max_eig=3.0, indefinite=False):
        """Random instance whose stationary Hessian has ``|eig|`` in ``[min_eig, max_eig]``."""
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        eig = rng.uniform(min_eig, max_eig, n)
        if indefinite:
            eig *= rng.choice([-1.0, 1.0], n)
        alpha = rng.uniform(0.1, 1.0)
        omega = rng.uniform(0.5, 2.0)
        A = (q * eig) @ q.T - alpha * omega**2 * np.eye(n)
        w = rng.standard_normal(n)
        w /= np.linalg.norm(w)
        kappa = rng.uniform(0.0, 2.0)
        return cls(A, centers, alpha=alpha, omega=omega, kappa=kappa, w=w)

    def stationary_point(self, t):
        return self.centers[t].copy()

    def evaluate(self, t, x):
        self._check_round(t)
        y = np.asarray(x, dtype=float) - self.centers[t]
        a, om, k, w = self.alpha, self.omega, self.kappa, self.w
        Ay = self.A @ y
        s = float(w @ y)
        value = 0.5 * float(y @ Ay) + a * float(np.sum(1.0 - np.cos(om * y))) + k / 6.0 * s**3
        grad = Ay + a * om * np.sin(om * y) + 0.5 * k * s * s * w
        hess = self.A + np.diag(a * om * om * np.cos(om * y)) + k * s * np.outer(w, w)
        return value, grad, hess

    def values(self, t, X):
        Y = np.asarray(X, dtype=float) - self.centers[t]
        s = Y @ self.w
        return (0.5 * np.einsum("ki,ij,kj->k", Y, self.A, Y)
                + self.alpha * np.sum(1.0 - np.cos(self.omega * Y), axis=1)
                + self.kappa / 6.0 * s**3)

    def hessians(self, t, X):
        Y = np.asarray(X, dtype=float) - self.centers[t]
        s = Y @ self.w
        diag = self.alpha * self.omega**2 * np.cos(self.omega * Y)
        H = np.broadcast_to(self.A, (len(Y), self.n, self.n)).copy()
        idx = np.arange(self.n)
        H[:, idx, idx] += diag
        H += self.kappa * s[:, None, None] * np.outer(self.w, self.w)
        return H


class CallableOracle(LossOracle):
    """Adapter around user functions ``value(t, x)``, ``gradient(t, x)``, ``hessian(t, x)``."""

    def __init__(self, value, gradient, hessian, n, T=1):
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self.n = int(n)
        self.T = int(T)

    def evaluate(self, t, x):
        self._check_round(t)
        x = np.asarray(x, dtype=float)
        return (float(self._value(t, x)),
                np.atleast_1d(np.asarray(self._gradient(t, x), dtype=float)),
                np.atleast_2d(np.asarray(self._hessian(t, x), dtype=float)))


# -- derivative checks ---------------------------------------------------------

@dataclass(frozen=True)
class DerivativeReport:
    grad_deviation: float
    hess_deviation: float
    grad_tol: float
    hess_tol: float
    value_step: float
    grad_step: float

    @property
    def passed(self):
        return self.grad_deviation <= self.grad_tol and self.hess_deviation <= self.hess_tol


def check_derivatives(oracle, t, x, value_step=1e-6, grad_step=1e-5, grad_rtol=1e-6, hess_rtol=1e-4):
    """Compare analytic derivatives with central finite differences.

    Gradient components come from differences of values (step
    ``value_step``), Hessian columns from differences of gradients (step
    ``grad_step``). Deviations are max-abs over components; tolerances are
    ``max(rtol, rtol * ||.||)``.

    Raises
    ------
    DerivativeMismatch
        Carrying the first offending component.
    """
    x = as_vector(x)
    n = x.shape[0]
    _, g, H = oracle.evaluate(t, x)
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    fd_g = np.empty(n)
    fd_H = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = value_step
        fd_g[j] = (oracle.value(t, x + e) - oracle.value(t, x - e)) / (2.0 * value_step)
        e[j] = grad_step
        fd_H[:, j] = (oracle.gradient(t, x + e) - oracle.gradient(t, x - e)) / (2.0 * grad_step)
    g_dev = np.abs(fd_g - g)
    H_dev = np.abs(fd_H - H)
    g_tol = max(grad_rtol, grad_rtol * float(np.linalg.norm(g)))
    H_tol = max(hess_rtol, hess_rtol * operator_norm(sym_matrix(H)))
    if np.max(g_dev) > g_tol:
        j = int(np.argmax(g_dev))
        raise DerivativeMismatch("gradient", j, float(g[j]), float(fd_g[j]), g_tol)
    if np.max(H_dev) > H_tol:
        i, j = np.unravel_index(int(np.argmax(H_dev)), H_dev.shape)
        raise DerivativeMismatch("hessian", (int(i), int(j)), float(H[i, j]), float(fd_H[i, j]), H_tol)
    return DerivativeReport(float(np.max(g_dev)), float(np.max(H_dev)), g_tol, H_tol, value_step, grad_step)


# -- regularity constants ------------------------------------------------------

@dataclass(frozen=True)
class RegularityConstants:
    """Constants governing the Newton basin and the regret bounds.

    ``gamma`` defaults to ``min(beta, 2h/(3L))`` and may be set to any value
    in ``(0, min(beta, 2h/(3L))]``. With ``L == 0`` the basin is capped by
    ``beta``.
    """

    h: float
    L: float
    beta: float
    ell: float
    v_bar: float = 0.0
    V_bar: float = 0.0
    gamma: float = None
    meta: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in ("h", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("L", "ell", "v_bar", "V_bar"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        cap = self.basin_radius
        if self.gamma is None:
            object.__setattr__(self, "gamma", cap)
        elif not 0 < self.gamma <= cap * (1 + 1e-15):
            raise ValueError(f"gamma={self.gamma} outside (0, {cap}]")

    @property
    def contraction(self):
        """``3L / (2h)``, the quadratic-convergence factor."""
        return 1.5 * self.L / self.h

    @property
    def newton_radius(self):
        """``2h / (3L)`` (infinite when ``L == 0``)."""
        return math.inf if self.L == 0 else 2.0 * self.h / (3.0 * self.L)

    @property
    def basin_radius(self):
        return min(self.beta, self.newton_radius)

    @property
    def motion_budget(self):
        """Largest per-round motion keeping the iterate in the basin: ``gamma - c gamma^2``."""
        return self.gamma - self.contraction * self.gamma**2

    def with_gamma(self, gamma):
        return replace(self, gamma=gamma)


def _ball_offsets(seed, T, samples, n, radius):
    # sample-major layout with separate direction and radius streams: the
    # first k samples do not depend on the total sample count
    dir_ss, rad_ss = np.random.SeedSequence(seed).spawn(2)
    z = np.random.default_rng(dir_ss).standard_normal((samples, T, n))
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    norms[norms == 0.0] = 1.0
    s = np.maximum(np.random.default_rng(rad_ss).random((samples, T)) ** (1.0 / n), 1e-6)
    Z = z / norms * (radius * s)[..., None]
    return np.ascontiguousarray(Z.transpose(1, 0, 2))


def estimate_constants(oracle, optima, radius, samples=100, seed=0, gtol=1e-8):
    """Estimate ``h, L, ell`` around the round optima by sampling.

    For each round ``t`` (``optima[t]`` is a stationary point of ``f_t``)
    ``samples`` points are drawn uniformly from the ball of the given
    ``radius``; ``L`` is the largest ``||H_t(x) - H_t(x*)|| / ||x - x*||``
    and ``ell`` the largest ``|f_t(x) - f_t(x*)| / ||x - x*||`` over those
    points. ``h`` is the smallest ``|eigenvalue|`` of the Hessians at the
    optima, ``beta = radius``, and ``v_bar`` / ``V_bar`` are the maximum and
    total motion of the optima sequence. These are sampled estimates, not
    certified bounds.

    Raises
    ------
    DegenerateOptimum
        If some optimum has ``min |eig| <= 1e-10``.
    """
    optima = np.atleast_2d(np.asarray(optima, dtype=float))
    if radius <= 0:
        raise ValueError("radius must be positive")
    if samples < 1:
        raise ValueError("samples must be positive")
    T, n = optima.shape
    H_star = np.empty((T, n, n))
    f_star = np.empty(T)
    for t in range(T):
        f, g, H = oracle.evaluate(t, optima[t])
        if np.linalg.norm(g) > gtol:
            raise ValueError(f"optima[{t}] is not stationary: ||grad|| = {np.linalg.norm(g):.3e}")
        H_star[t] = H
        f_star[t] = f
    hs = np.atleast_1d(min_singular_value(H_star))
    t_h = int(np.argmin(hs))
    h = float(hs[t_h])
    if h <= 1e-10:
        raise DegenerateOptimum(f"Hessian at optima[{t_h}] has min |eig| = {h:.3e}")

    Z = _ball_offsets(seed, T, samples, n, radius)
    X = optima[:, None, :] + Z
    dist = np.linalg.norm(Z, axis=-1)
    diffs = oracle.batch_hessians(X) - H_star[:, None]
    ell_ratios = np.abs(oracle.batch_values(X) - f_star[:, None]) / dist
    L_ratios = np.asarray(operator_norm(diffs.reshape(-1, n, n))).reshape(T, samples) / dist
    L = float(np.max(L_ratios))
    ell = float(np.max(ell_ratios))
    steps = np.linalg.norm(np.diff(optima, axis=0), axis=1) if T > 1 else np.zeros(0)
    meta = {
        "radius": float(radius),
        "samples": int(samples),
        "seed": seed if isinstance(seed, int) else list(seed),
        "rounds": int(T),
        "h_round": t_h,
        "L_round": int(np.unravel_index(np.argmax(L_ratios), L_ratios.shape)[0]),
        "ell_ball": "beta",
        "estimated": True,
    }
    return RegularityConstants(
        h=h, L=L, beta=float(radius), ell=ell,
        v_bar=float(steps.max()) if steps.size else 0.0,
        V_bar=float(steps.sum()),
        meta=meta,
    )


# -- round optimum ---------------------------------------------------------------

def newton_polish(oracle, t, x, gtol=1e-12, max_steps=50):
    """Iterate full Newton steps on ``f_t`` until ``||grad|| <= gtol``.

    Returns the final point with its value and gradient norm.
    """
    x = as_vector(x)
    for step in range(max_steps + 1):
        f, g, H = oracle.evaluate(t, x)
        gnorm = math.sqrt(float(g @ g))
        if gnorm <= gtol or step == max_steps:
            break
        try:
            x = x - solve_symmetric(H, g)
        except SingularMatrix as exc:
            raise PolishFailed(f"singular Hessian while polishing round {t}") from exc
    return x, f, gnorm


def brute_force_optimum(oracle, t, box, grid=50, stationary=False, start=None,
                        gtol=1e-12, max_steps=50, accept_gtol=1e-10):
    """Round optimum by grid scan plus Newton polish.

    Parameters
    ----------
    box : array_like, shape (n, 2)
        Per-axis ``(low, high)`` bounds that must contain the optimum.
    grid : int
        Grid points per axis (at least 50).
    stationary : bool
        Skip the value scan and polish from ``start`` (or the box centre);
        used to track saddles and other non-minimal stationary points.
    start : array_like, optional
        When minimizing, a warm start (e.g. the previous round's optimum).
        Its polished point is kept only if it stays inside the box and its
        value does not exceed the best grid value; otherwise polishing
        restarts from the best grid point.

    Raises
    ------
    NoInteriorMinimum
        If the best grid value sits on the boundary of the box.
    PolishFailed
        If polishing ends with ``||grad|| > accept_gtol`` or, when minimizing,
        climbs above the best grid value.
    """
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2:
        raise ValueError("box must have shape (n, 2)")
    n = box.shape[0]
    if stationary:
        x0 = box.mean(axis=1) if start is None else as_vector(start)
        x, f, gnorm = newton_polish(oracle, t, x0, gtol=gtol, max_steps=max_steps)
        if gnorm > accept_gtol:
            raise PolishFailed(f"round {t}: polish stalled at ||grad|| = {gnorm:.3e}")
        return x
    if grid < 50:
        raise ValueError("grid must have at least 50 points per axis")
    axes = [np.linspace(lo, hi, grid) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = oracle.values(t, pts)
    k = int(np.argmin(vals))
    idx = np.unravel_index(k, (grid,) * n)
    if any(i == 0 or i == grid - 1 for i in idx):
        raise NoInteriorMinimum(f"round {t}: best grid point {pts[k].tolist()} on box boundary")
    best = float(vals[k])
    limit = best + 1e-12 * max(1.0, abs(best))
    if start is not None:
        # a stationary point no higher than every grid value is as good as
        # the one reached from the best grid point
        try:
            x, f, gnorm = newton_polish(oracle, t, start, gtol=gtol, max_steps=max_steps)
        except (PolishFailed, SensorCoincidence):
            gnorm = math.inf
        if gnorm <= accept_gtol and f <= limit and np.all((x >= box[:, 0]) & (x <= box[:, 1])):
            return x
    x, f, gnorm = newton_polish(oracle, t, pts[k], gtol=gtol, max_steps=max_steps)
    if gnorm > accept_gtol:
        raise PolishFailed(f"round {t}: polish stalled at ||grad|| = {gnorm:.3e}")
    if f > limit:
        raise PolishFailed(f"round {t}: polish left the grid minimum's basin")
    return x


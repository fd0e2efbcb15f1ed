"""Online update rules: the online Newton step, online gradient descent, and
the scalar quadratic map that governs the accumulated tracking error."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoRealFixedPoint, SingularHessian, SingularMatrix
from .linalg import as_vector, solve_symmetric

__all__ = [
    "OnmState",
    "OgdConfig",
    "onm_step",
    "newton_step",
    "ogd_step",
    "OnlineNewton",
    "OnlineGradientDescent",
    "QuadraticMapParams",
    "quadratic_map_fixed_points",
    "quadratic_map_iterate",
    "quadratic_map_converge",
]


@dataclass(frozen=True)
class OnmState:
    """Decision ``x`` to be played at round ``t``."""

    x: np.ndarray
    t: int = 0

    def __post_init__(self):
        x = as_vector(self.x)
        x.flags.writeable = False
        object.__setattr__(self, "x", x)


def onm_step(oracle, state):
    """One online Newton update ``x - H_t(x)^{-1} grad f_t(x)`` with unit step.

    Raises
    ------
    SingularHessian
        When ``H_t(x)`` is numerically singular; carries the round index.
    """
    _, g, H = oracle.evaluate(state.t, state.x)
    return OnmState(newton_step(state.x, g, H, state.t), state.t + 1)


def newton_step(x, g, H, t=None):
    """``x - H^{-1} g`` via a pivoted symmetric solve."""
    try:
        return x - solve_symmetric(H, g)
    except SingularMatrix as exc:
        raise SingularHessian(f"singular Hessian at round {t}: {exc}", t=t) from exc


@dataclass(frozen=True)
class OgdConfig:
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"step size must be positive, got {self.eta}")

    @classmethod
    def for_horizon(cls, T):
        """Step size ``1/sqrt(T)``."""
        return cls(1.0 / math.sqrt(T))


def ogd_step(oracle, x, t, config):
    """Unprojected gradient step ``x - eta grad f_t(x)``."""
    x = np.asarray(x, dtype=float)
    return x - config.eta * oracle.gradient(t, x)


class OnlineNewton:
    """Play-then-observe wrapper around :func:`onm_step`."""

    name = "ONM"

    def __init__(self, x0):
        self.state = OnmState(x0, 0)

    def play(self):
        return self.state.x

    def update(self, oracle, t):
        self.state = onm_step(oracle, OnmState(self.state.x, t))


class OnlineGradientDescent:
    name = "OGD"

    def __init__(self, x0, config):
        self.x = as_vector(x0)
        self.config = config

    def play(self):
        return self.x

    def update(self, oracle, t):
        self.x = ogd_step(oracle, self.x, t, self.config)


# -- scalar quadratic map x -> c x^2 + v ----------------------------------------

def quadratic_map_fixed_points(c, v):
    """Return ``(x_lower, x_upper)``, the roots of ``c x^2 - x + v = 0``.

    Raises
    ------
    NoRealFixedPoint
        When ``4cv > 1``.
    """
    if not (c > 0 and v > 0):
        raise ValueError("c and v must be positive")
    disc = 1.0 - 4.0 * c * v
    if disc < 0:
        raise NoRealFixedPoint(f"4cv = {4 * c * v:.6g} > 1")
    root = math.sqrt(disc)
    # lower root in the cancellation-free form 2v / (1 + sqrt(1 - 4cv))
    return 2.0 * v / (1.0 + root), (1.0 + root) / (2.0 * c)


@dataclass(frozen=True)
class QuadraticMapParams:
    c: float
    v: float
    x_upper: float = None
    x_lower: float = None

    def __post_init__(self):
        lo, hi = quadratic_map_fixed_points(self.c, self.v)
        if self.x_lower is None:
            object.__setattr__(self, "x_lower", lo)
        if self.x_upper is None:
            object.__setattr__(self, "x_upper", hi)

    def __call__(self, x):
        return self.c * x * x + self.v


def quadratic_map_iterate(params, x0, n):
    """``(x_1, ..., x_n)`` under ``x_{k+1} = c x_k^2 + v``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if x0 < 0:
        raise ValueError("x0 must be non-negative")
    c, v = params.c, params.v
    out = np.empty(n)
    x = float(x0)
    for k in range(n):
        x = c * x * x + v
        out[k] = x
    return out


def quadratic_map_converge(params, x0, step_tol=1e-14, max_steps=100_000):
    """Iterate until ``|x_{k+1} - x_k| <= step_tol``; returns the trajectory
    including ``x0``."""
    c, v = params.c, params.v
    xs = [float(x0)]
    x = xs[0]
    for _ in range(max_steps):
        nxt = c * x * x + v
        xs.append(nxt)
        if abs(nxt - x) <= step_tol or not math.isfinite(nxt):
            break
        x = nxt
    return np.array(xs)

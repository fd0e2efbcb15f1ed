"""Dynamic-regret bookkeeping and evaluation of the ONM regret bounds."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolated, ConditionFailed

__all__ = [
    "RoundRecord",
    "RegretLedger",
    "Theorem1Bound",
    "Corollary1Bound",
    "BoundComparison",
    "compute_regret",
    "total_variation",
    "theorem1_bound",
    "corollary1_bound",
    "bound_comparison",
]


@dataclass(frozen=True)
class RoundRecord:
    """What happened in one round: decision, reference optimum, both losses."""

    t: int
    x: np.ndarray
    x_star: np.ndarray
    loss_at_x: float
    loss_at_star: float
    error: float = None
    true_target: np.ndarray = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        xs = np.asarray(self.x_star, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_star", xs)
        if self.error is None:
            object.__setattr__(self, "error", float(np.linalg.norm(x - xs)))
        elif self.error < 0:
            raise ValueError("error must be non-negative")

    @property
    def gap(self):
        return self.loss_at_x - self.loss_at_star


def compute_regret(records):
    """Dynamic regret ``sum_t f_t(x_t) - f_t(x_t*)`` (summed with ``math.fsum``)."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    return math.fsum(r.gap for r in records)


def total_variation(optima):
    """``sum_t ||x*_{t-1} - x*_t||`` over consecutive optima."""
    optima = np.atleast_2d(np.asarray(optima, dtype=float))
    if len(optima) < 2:
        raise ValueError("need at least two optima")
    return math.fsum(np.linalg.norm(np.diff(optima, axis=0), axis=1))


@dataclass(frozen=True)
class Theorem1Bound:
    bound: float
    delta: float
    factor: float
    checklist: dict

    @property
    def assumptions_hold(self):
        return all(self.checklist.values())


def theorem1_bound(k, V_T, e0, eT):
    """Evaluate ``ell / (1 - c gamma) * (V_T + delta)`` with ``c = 3L/(2h)``.

    ``delta = c (e0^2 - eT^2)``. The returned checklist records the
    run-dependent assumptions (start inside the basin, per-round motion
    within budget) so that a vacuous evaluation can be flagged. ``eT`` is
    only known after the run; passing ``eT=0`` gives a bound that is valid
    while the run is still going, since ``delta`` decreases in ``eT``.

    Raises
    ------
    AssumptionViolated
        If ``gamma`` is not strictly inside ``(0, 2h/(3L))`` (the factor's
        denominator would not be positive) or a constant is out of range.
    """
    c = k.contraction
    failures = []
    if not k.h > 0:
        failures.append(f"assumption 1: h={k.h} must be positive")
    if not (k.L >= 0 and k.beta > 0):
        failures.append(f"assumption 2: need L >= 0 and beta > 0 (L={k.L}, beta={k.beta})")
    if not (0 < k.gamma and c * k.gamma < 1.0):
        failures.append(f"assumption 3: gamma={k.gamma} must lie strictly inside (0, 2h/3L={k.newton_radius})")
    if not k.ell >= 0:
        failures.append(f"assumption 5: ell={k.ell} must be non-negative")
    if failures:
        raise AssumptionViolated(failures)
    delta = c * (e0 * e0 - eT * eT)
    factor = 1.0 / (1.0 - c * k.gamma)
    checklist = {
        "A1_h_positive": k.h > 0,
        "A2_hessian_lipschitz": k.L >= 0 and k.beta > 0,
        "A3_start_in_basin": e0 <= k.gamma,
        "A4_motion_budget": k.v_bar <= k.motion_budget,
        "A5_value_lipschitz": k.ell >= 0,
        "gamma_inside_newton_radius": c * k.gamma < 1.0,
    }
    return Theorem1Bound(k.ell * factor * (V_T + delta), delta, factor, checklist)


@dataclass(frozen=True)
class Corollary1Bound:
    bound: float
    E_upper: float
    E_lower: float
    checklist: dict = field(default_factory=dict)


def corollary1_bound(k, e0):
    """Constant regret bound ``ell * E_lower``.

    ``E_upper``/``E_lower`` are the fixed points of ``E -> c E^2 + (V_bar + e0)``
    with ``c = 3L/(2h)``.

    Raises
    ------
    ConditionFailed
        When ``V_bar + e0 > h/(6L)`` or ``gamma > E_upper``.
    """
    s = k.V_bar + e0
    z = 6.0 * k.L * s / k.h
    if z > 1.0:
        raise ConditionFailed(f"V_bar + e0 = {s:.6g} exceeds h/(6L) = {k.h / (6 * k.L):.6g}")
    root = math.sqrt(1.0 - z)
    E_lower = 2.0 * s / (1.0 + root)
    E_upper = math.inf if k.L == 0 else k.h / (3.0 * k.L) * (1.0 + root)
    if k.gamma > E_upper:
        raise ConditionFailed(f"gamma = {k.gamma:.6g} exceeds E_upper = {E_upper:.6g}")
    checklist = {
        "variation_within_h_over_6L": True,
        "gamma_below_E_upper": k.gamma < E_upper,
        "start_below_E_upper": e0 < E_upper,
    }
    return Corollary1Bound(k.ell * E_lower, E_upper, E_lower, checklist)


@dataclass(frozen=True)
class BoundComparison:
    theorem1: Theorem1Bound
    corollary1: Corollary1Bound
    smaller: str
    y: np.ndarray
    tighter_at_y: np.ndarray
    ybar: float

    @property
    def ybar_exists(self):
        return self.ybar is not None

    def as_dict(self):
        return {
            "theorem1_bound": self.theorem1.bound,
            "corollary1_bound": self.corollary1.bound,
            "smaller": self.smaller,
            "tightness_fraction": float(np.mean(self.tighter_at_y)),
            "ybar": self.ybar,
        }


def bound_comparison(k, V_T, e0, eT, n_y=100):
    """Compare both bounds and scan the tightness condition over ``y``.

    ``y`` runs over ``n_y`` interior points of ``(0, c E_upper)``; at each
    one the test ``E_lower (1 - y) < V_T + delta`` is recorded. ``ybar`` is
    the first scanned ``y`` with ``E_lower (1 - y) < h/(6L)``, if any.
    """
    th = theorem1_bound(k, V_T, e0, eT)
    co = corollary1_bound(k, e0)
    if math.isclose(th.bound, co.bound, rel_tol=1e-12, abs_tol=1e-300):
        smaller = "equal"
    else:
        smaller = "theorem1" if th.bound < co.bound else "corollary1"
    y_hi = k.contraction * co.E_upper
    if not math.isfinite(y_hi):
        y_hi = 1.0
    y = y_hi * np.arange(1, n_y + 1) / (n_y + 1)
    lhs = co.E_lower * (1.0 - y)
    tighter = lhs < V_T + th.delta
    limit = math.inf if k.L == 0 else k.h / (6.0 * k.L)
    hits = np.nonzero(lhs < limit)[0]
    ybar = float(y[hits[0]]) if hits.size else None
    return BoundComparison(th, co, smaller, y, tighter, ybar)


@dataclass
class RegretLedger:
    """Records of one run plus the derived regret quantities."""

    records: list
    regret: float
    V_T: float
    E_T: float
    delta: float = None
    theorem1_bound: float = None
    corollary1_bound: float = None

    @classmethod
    def from_records(cls, records, constants=None):
        records = list(records)
        optima = np.array([r.x_star for r in records])
        V_T = total_variation(optima) if len(records) > 1 else 0.0
        E_T = math.fsum(r.error for r in records)
        ledger = cls(records, compute_regret(records), V_T, E_T)
        if constants is not None:
            ledger.attach_bounds(constants)
        return ledger

    @property
    def e0(self):
        return self.records[0].error

    @property
    def eT(self):
        return self.records[-1].error

    def attach_bounds(self, k):
        """Fill ``delta`` and whichever bounds are evaluable for ``k``."""
        th = theorem1_bound(k, self.V_T, self.e0, self.eT)
        self.delta = th.delta
        self.theorem1_bound = th.bound
        try:
            self.corollary1_bound = corollary1_bound(k, self.e0).bound
        except ConditionFailed:
            self.corollary1_bound = None
        return th

    def regret_curve(self):
        """Cumulative regret after each round."""
        return np.cumsum([r.gap for r in self.records])

    def error_curve(self):
        """Prefix sums ``E_t = sum_{s<=t} e_s``."""
        return np.cumsum([r.error for r in self.records])

    def optimum_motion(self):
        optima = np.array([r.x_star for r in self.records])
        return np.linalg.norm(np.diff(optima, axis=0), axis=1)

"""
Best responses of the building manager and owner on a static model.

The manager trades satisfaction against work, ``S - lam * W``; the owner
trades satisfaction against energy, ``S - mu * E``.  Two incentive schemes
are offered to the manager over two periods:

* baselining pays ``gamma * (E_1 - E_2)``, so period 1 maximizes
  ``S + gamma*E - lam*W`` and period 2 maximizes ``S - gamma*E - lam*W``;
* the performance bonus pays ``gamma * (S_2 - kappa*E_2)``, leaving period 1
  untouched and making period 2 maximize ``(1+gamma)*S - gamma*kappa*E - lam*W``.

Every maximization runs over the feasible grid cells through ``param_opt``
with the parameter in the role the ordering results need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

import numpy as np

from .errors import CalibrationError, DomainError, ModelShapeError
from .param_opt import Family, ObjectiveSpec, solve
from .static_model import KeyPoints, OperatingPoint, StaticModel


# --- parameter types ------------------------------------------------------

@dataclass(frozen=True)
class ManagerParams:
    lam: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")


@dataclass(frozen=True)
class OwnerParams:
    mu: float

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError("mu must be nonnegative")


@dataclass(frozen=True)
class Baselining:
    gamma: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError("gamma must be nonnegative")


@dataclass(frozen=True)
class PerformanceBonus:
    gamma: float
    kappa: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError("gamma must be nonnegative")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")


IncentiveScheme = Baselining | PerformanceBonus


@dataclass(frozen=True)
class CalibrationParams:
    P: float
    R_1: float
    energy_price: float
    mu_elast: float | None = None

    def __post_init__(self):
        if not self.P >= 0:
            raise ValueError("P must be nonnegative")
        if not self.R_1 > 0:
            raise ValueError("R_1 must be positive")
        if not self.energy_price >= 0:
            raise ValueError("energy_price must be nonnegative")


# --- feasible cells and response sets ---------------------------------------

@dataclass(frozen=True)
class Cells:
    """Feasible cells of a static model in row-major order."""

    i: np.ndarray
    j: np.ndarray
    S: np.ndarray
    E: np.ndarray
    W: np.ndarray

    @classmethod
    def of(cls, static: StaticModel) -> "Cells":
        i, j = static.cells()
        return cls(i=i, j=j, S=static.grid.S[i], E=static.grid.E[j], W=static.work[i, j])


@dataclass(frozen=True)
class OperatingSet:
    """A maximizer set expressed as operating points."""

    index: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    E: np.ndarray = field(repr=False)
    value: float

    @classmethod
    def from_cells(cls, cells: Cells, index: np.ndarray, value: float) -> "OperatingSet":
        return cls(index=index, S=cells.S[index], E=cells.E[index], value=value)

    def __len__(self) -> int:
        return self.index.size

    @property
    def S_lo(self) -> float:
        return float(self.S.min())

    @property
    def S_hi(self) -> float:
        return float(self.S.max())

    @property
    def E_lo(self) -> float:
        return float(self.E.min())

    @property
    def E_hi(self) -> float:
        return float(self.E.max())

    @property
    def representative(self) -> OperatingPoint:
        """Largest-S point of the set; lowest E among those."""
        k = np.lexsort((self.E, -self.S))[0]
        return OperatingPoint(float(self.S[k]), float(self.E[k]))

    def points(self) -> list[OperatingPoint]:
        return [OperatingPoint(float(s), float(e)) for s, e in zip(self.S, self.E)]


def _respond(cells: Cells, spec: ObjectiveSpec, lam: float, tie_tol) -> OperatingSet:
    m = solve(spec, lam, tie_tol)
    return OperatingSet.from_cells(cells, m.index, m.value)


def _net_comfort(cells: Cells, lam: float) -> np.ndarray:
    return cells.S - lam * cells.W


# --- manager ----------------------------------------------------------------

def manager_objective(cells: Cells) -> ObjectiveSpec:
    """``S + lam * (-W)`` with ``x = S``: the ordering in ``lam`` is the decreasing-S case."""
    return ObjectiveSpec(x=cells.S, y=cells.E, f=cells.S, g=-cells.W, family=Family.TYPE1)


def manager_best_response(static: StaticModel, lam: float, tie_tol: float | None = None,
                          cells: Cells | None = None) -> OperatingSet:
    cells = cells or Cells.of(static)
    return _respond(cells, manager_objective(cells), lam, tie_tol)


# --- owner ------------------------------------------------------------------

@dataclass(frozen=True)
class OwnerOptimum:
    """Closed-form owner optimum: a point or a segment of the (S, E) plane.

    ``case`` is one of ``"satisfaction_only"`` (mu = 0, vertical segment at
    S_max), ``"ideal"`` (the point (S_max, E_opt)), ``"lower_boundary"``
    (mu = 1/m, the segment E = m S + k) or ``"energy_only"`` (the point
    (S_min, E_min)).
    """

    case: str
    S_lo: float
    S_hi: float
    E_lo: float
    E_hi: float


def owner_optimum_closed_form(kp: KeyPoints, mu: float, rel_tol: float = 1e-12) -> OwnerOptimum:
    """Maximizer of ``S - mu * E`` predicted from the key points alone.

    ``mu`` counts as equal to ``1/m`` when ``mu * m`` is within ``rel_tol``
    of one.
    """
    if not mu >= 0:
        raise ValueError("mu must be nonnegative")
    if kp.S_max == kp.S_min:
        raise ModelShapeError("S_max equals S_min; the owner problem is degenerate")
    m = kp.slope
    if mu == 0:
        return OwnerOptimum("satisfaction_only", kp.S_max, kp.S_max, kp.E_opt, kp.E_3)
    if math.isclose(mu * m, 1.0, rel_tol=rel_tol, abs_tol=0.0):
        return OwnerOptimum("lower_boundary", kp.S_min, kp.S_max, kp.E_min, kp.E_opt)
    if mu * m < 1.0:
        return OwnerOptimum("ideal", kp.S_max, kp.S_max, kp.E_opt, kp.E_opt)
    return OwnerOptimum("energy_only", kp.S_min, kp.S_min, kp.E_min, kp.E_min)


def owner_objective(cells: Cells) -> ObjectiveSpec:
    return ObjectiveSpec(x=cells.S, y=cells.E, f=cells.S, g=-cells.E, family=Family.TYPE1)


def owner_optimum_bruteforce(static: StaticModel, mu: float, tie_tol: float | None = None,
                             cells: Cells | None = None) -> OperatingSet:
    """Enumerate ``S - mu * E`` over every feasible cell."""
    cells = cells or Cells.of(static)
    return _respond(cells, owner_objective(cells), mu, tie_tol)


def lower_boundary_cells(static: StaticModel) -> tuple[np.ndarray, np.ndarray]:
    """Lowest feasible cell ``(i, j)`` of every feasible column."""
    cols = np.flatnonzero(static.feasible.any(axis=1))
    rows = np.array([np.flatnonzero(static.feasible[i])[0] for i in cols])
    return cols, rows


# --- two-period outcomes ----------------------------------------------------

@dataclass(frozen=True)
class TwoPeriodOutcome:
    period1: OperatingSet
    period2: OperatingSet
    # Incentive in the manager's utility units, evaluated at the representative points.
    incentive: float

    @property
    def point1(self) -> OperatingPoint:
        return self.period1.representative

    @property
    def point2(self) -> OperatingPoint:
        return self.period2.representative

    @property
    def energy_delta(self) -> float:
        return self.point2.E - self.point1.E

    @property
    def satisfaction_delta(self) -> float:
        return self.point2.S - self.point1.S


def baselining_period1_objective(cells: Cells, lam: float) -> ObjectiveSpec:
    """``gamma * E + (S - lam W)`` with ``x = E``, E increasing."""
    return ObjectiveSpec(x=cells.E, y=cells.S, f=cells.E, g=_net_comfort(cells, lam), family=Family.TYPE2)


def baselining_period2_objective(cells: Cells, lam: float) -> ObjectiveSpec:
    """``gamma * (-E) + (S - lam W)`` with ``x = E``, E decreasing."""
    return ObjectiveSpec(x=cells.E, y=cells.S, f=-cells.E, g=_net_comfort(cells, lam), family=Family.TYPE2)


def baselining_best_response(static: StaticModel, lam: float, gamma: float, tie_tol: float | None = None,
                             cells: Cells | None = None) -> TwoPeriodOutcome:
    Baselining(gamma)
    cells = cells or Cells.of(static)
    p1 = _respond(cells, baselining_period1_objective(cells, lam), gamma, tie_tol)
    p2 = _respond(cells, baselining_period2_objective(cells, lam), gamma, tie_tol)
    return TwoPeriodOutcome(p1, p2, incentive=gamma * (p1.representative.E - p2.representative.E))


def kappa(kp: KeyPoints) -> float:
    """Bonus energy weight ``min(S_min/E_max, (S_max - S_min)/E_max)``.

    The floating-point result is nudged towards zero until
    ``kappa * E_max <= S_min`` holds in exact arithmetic, so the bonus
    stays nonnegative on the whole feasible region.
    """
    if not kp.E_max > 0:
        raise CalibrationError(f"E_max must be positive, got {kp.E_max}")
    if not kp.S_min > 0:
        raise CalibrationError(f"S_min must be positive for a nonnegative bonus, got {kp.S_min}")
    k = min(kp.S_min / kp.E_max, (kp.S_max - kp.S_min) / kp.E_max)
    while Fraction(k) * Fraction(kp.E_max) > Fraction(kp.S_min):
        k = math.nextafter(k, 0.0)
    if not k > 0:
        raise CalibrationError("kappa is not positive")
    if kp.E_opt > kp.E_min and not k < 1.0 / kp.slope:
        raise CalibrationError(f"kappa={k} is not below 1/m={1.0 / kp.slope}")
    return k


def bonus_floor(static: StaticModel, kappa_value: float) -> Fraction:
    """Exact minimum of ``S - kappa * E`` over the feasible cells."""
    cells = Cells.of(static)
    kf = Fraction(kappa_value)
    # The minimum sits at the smallest S for each E; checking those suffices but all cells are cheap.
    return min(Fraction(float(s)) - kf * Fraction(float(e)) for s, e in zip(cells.S, cells.E))


def bonus_period2_objective(cells: Cells, lam: float, kappa_value: float) -> ObjectiveSpec:
    """``gamma * (S - kappa E) + (S - lam W)`` with ``x = S - kappa E``."""
    x = cells.S - kappa_value * cells.E
    return ObjectiveSpec(x=x, y=cells.E, f=x, g=_net_comfort(cells, lam), family=Family.TYPE2)


def bonus_best_response(static: StaticModel, lam: float, gamma: float, kappa_value: float,
                        tie_tol: float | None = None, cells: Cells | None = None) -> TwoPeriodOutcome:
    PerformanceBonus(gamma, kappa_value)
    cells = cells or Cells.of(static)
    p1 = manager_best_response(static, lam, tie_tol, cells)
    p2 = _respond(cells, bonus_period2_objective(cells, lam, kappa_value), gamma, tie_tol)
    rep = p2.representative
    return TwoPeriodOutcome(p1, p2, incentive=gamma * (rep.S - kappa_value * rep.E))


# --- convergence thresholds -------------------------------------------------

def within_cells(static: StaticModel, S, E, target: OperatingPoint, cells: int = 1) -> bool:
    """Every point of ``(S, E)`` lies within ``cells`` grid steps of ``target`` on both axes."""
    g = static.grid
    ds = np.abs(np.asarray(S) - target.S) / g.dS
    de = np.abs(np.asarray(E) - target.E) / g.dE
    # Half-ulp slack: grid coordinates are recomputed from floats.
    return bool(np.all(ds <= cells + 1e-9) and np.all(de <= cells + 1e-9))


def detect_threshold(respond, target: OperatingPoint, static: StaticModel, ladder) -> float | None:
    """Smallest ladder value from which every response stays within one cell of ``target``.

    ``respond(value)`` returns an ``OperatingSet``.  Returns ``None`` when
    even the last ladder value misses the target.
    """
    ladder = np.asarray(ladder, dtype=float)
    hits = [within_cells(static, r.S, r.E, target) for r in map(respond, ladder)]
    if not hits[-1]:
        return None
    k = len(hits) - 1
    while k > 0 and hits[k - 1]:
        k -= 1
    return float(ladder[k])


def default_ladder(lo: float = 1e-4, hi: float = 1e4, count: int = 161) -> np.ndarray:
    return np.geomspace(lo, hi, count)


def manager_threshold(static: StaticModel, ladder=None, tie_tol: float | None = None) -> float | None:
    kp = static.key_points
    cells = Cells.of(static)
    spec = manager_objective(cells)
    return detect_threshold(lambda lam: _respond(cells, spec, lam, tie_tol), kp.omega, static,
                            default_ladder() if ladder is None else ladder)


def bonus_threshold(static: StaticModel, lam: float, kappa_value: float, ladder=None,
                    tie_tol: float | None = None) -> float | None:
    kp = static.key_points
    cells = Cells.of(static)
    spec = bonus_period2_objective(cells, lam, kappa_value)
    return detect_threshold(lambda g: _respond(cells, spec, g, tie_tol), OperatingPoint(kp.S_max, kp.E_opt),
                            static, default_ladder() if ladder is None else ladder)


# --- calibration ------------------------------------------------------------

def calibration_lambda_grid(lam_converged: float, count: int = 100, lo_ratio: float = 1e-4) -> np.ndarray:
    """Zero followed by ``count - 1`` log-spaced values up to ``lam_converged``."""
    if not lam_converged > 0:
        raise CalibrationError("the convergence threshold must be positive")
    return np.concatenate(([0.0], np.geomspace(lam_converged * lo_ratio, lam_converged, count - 1)))


def estimate_lambda(static: StaticModel, actual: OperatingPoint, lam_grid, tie_tol: float | None = None) -> float:
    """Grid value of lambda whose best response comes closest to ``actual``.

    Distances are Euclidean in grid-cell units; ties go to the smallest lambda.
    """
    if not static.membership(actual):
        raise DomainError(f"actual point ({actual.S}, {actual.E}) is not feasible")
    g = static.grid
    cells = Cells.of(static)
    spec = manager_objective(cells)
    best_lam, best_d = None, math.inf
    for lam in np.asarray(lam_grid, dtype=float):
        r = _respond(cells, spec, lam, tie_tol)
        d = float(np.min(np.hypot((r.S - actual.S) / g.dS, (r.E - actual.E) / g.dE)))
        if d < best_d:
            best_lam, best_d = float(lam), d
    return best_lam


def estimate_elasticity(S1: float, E1: float, lam: float, R_1: float, use_work: bool = False,
                        W1: float | None = None) -> float:
    """Money-to-utility conversion ``(S1 - lam * E1) / R_1``.

    With ``use_work=True`` the work at the period-1 point replaces the
    energy: ``(S1 - lam * W1) / R_1``.
    """
    if not R_1 > 0:
        raise CalibrationError("R_1 must be positive")
    if use_work:
        if W1 is None:
            raise ValueError("use_work needs W1")
        return (S1 - lam * W1) / R_1
    return (S1 - lam * E1) / R_1


def bonus_scale(kp: KeyPoints, kappa_value: float) -> float:
    denom = kp.S_max - kappa_value * kp.E_opt
    if not denom > 0:
        raise CalibrationError(f"S_max - kappa*E_opt must be positive, got {denom}")
    return denom


def gamma_for_payout(P: float, mu_elast: float, kp: KeyPoints, kappa_value: float) -> float:
    """Bonus weight that pays ``P`` at the ideal point: ``mu_elast * P / (S_max - kappa E_opt)``."""
    if not P >= 0:
        raise CalibrationError("P must be nonnegative")
    gamma = mu_elast * P / bonus_scale(kp, kappa_value)
    if gamma < 0:
        raise CalibrationError(f"payout elasticity {mu_elast} gives a negative gamma")
    return gamma


def realized_payout(P: float, S2: float, E2: float, kp: KeyPoints, kappa_value: float) -> float:
    """Money paid for period-2 point ``(S2, E2)`` when the maximum payout is ``P``."""
    return P * (S2 - kappa_value * E2) / bonus_scale(kp, kappa_value)


@dataclass(frozen=True)
class Calibration:
    lam: float
    mu_elast: float
    point1: OperatingPoint
    lam_converged: float


def calibrate(static: StaticModel, actual: OperatingPoint, R_1: float, use_work: bool = False,
              lam_grid=None, tie_tol: float | None = None) -> Calibration:
    """Fit lambda to an observed operating point, then the payment elasticity."""
    lam_conv = manager_threshold(static, tie_tol=tie_tol)
    if lam_conv is None:
        raise CalibrationError("manager response never converges to omega on the default ladder")
    grid = calibration_lambda_grid(lam_conv) if lam_grid is None else lam_grid
    lam = estimate_lambda(static, actual, grid, tie_tol)
    p1 = manager_best_response(static, lam, tie_tol).representative
    W1 = static.work_at(p1) if use_work else None
    mu = estimate_elasticity(p1.S, p1.E, lam, R_1, use_work=use_work, W1=W1)
    return Calibration(lam=lam, mu_elast=float(mu), point1=p1, lam_converged=lam_conv)


@dataclass(frozen=True)
class SavingsRow:
    P: float
    delta_E: float
    delta_S: float
    payout: float
    savings: tuple[float, ...]


def savings_table(static: StaticModel, lam: float, payouts, prices, mu_elast: float,
                  tie_tol: float | None = None) -> list[SavingsRow]:
    """Energy, comfort and money outcomes of the bonus for each maximum payout.

    Savings at price ``c`` are ``c * (E_1 - E_2)`` minus the money paid.
    """
    kp = static.key_points
    k = kappa(kp)
    cells = Cells.of(static)
    rows = []
    for P in payouts:
        gamma = gamma_for_payout(float(P), mu_elast, kp, k)
        out = bonus_best_response(static, lam, gamma, k, tie_tol, cells)
        p1, p2 = out.point1, out.point2
        dE, dS = p2.E - p1.E, p2.S - p1.S
        paid = realized_payout(float(P), p2.S, p2.E, kp, k)
        # "+ 0.0" turns a negative zero into 0.0 so unchanged rows print as plain zeros.
        saved = tuple(float(c) * (p1.E - p2.E) - paid + 0.0 for c in prices)
        rows.append(SavingsRow(float(P), dE + 0.0, dS + 0.0, paid, saved))
    return rows


def savings_csv(rows: list[SavingsRow], prices):
    header = ["P", "delta_E", "delta_S"] + [f"savings_{_fmt_price(c)}" for c in prices]
    body = [[r.P, r.delta_E, r.delta_S, *r.savings] for r in rows]
    return header, body


def _fmt_price(c) -> str:
    c = float(c)
    return str(int(c)) if c.is_integer() else repr(c)


def trace(static: StaticModel, scheme: str, params, lam: float = 0.0, kappa_value: float | None = None,
          tie_tol: float | None = None):
    """Per-period projections of the best response over a parameter sweep.

    ``scheme="none"`` sweeps lambda; the incentive schemes sweep gamma at
    fixed ``lam``.  Returns rows ``(period, param, S_lo, S_hi, E_lo, E_hi)``.
    """
    params = np.asarray(params, dtype=float)
    if np.any(params < 0) or np.any(np.diff(params) <= 0):
        raise ValueError("sweep values must be nonnegative and strictly increasing")
    cells = Cells.of(static)
    rows = []

    def add(period, value, r: OperatingSet):
        rows.append((period, float(value), r.S_lo, r.S_hi, r.E_lo, r.E_hi))

    if scheme == "none":
        spec = manager_objective(cells)
        for v in params:
            add(1, v, _respond(cells, spec, v, tie_tol))
        return rows
    if scheme == "baselining":
        specs = (baselining_period1_objective(cells, lam), baselining_period2_objective(cells, lam))
    elif scheme == "bonus":
        k = kappa(static.key_points) if kappa_value is None else kappa_value
        specs = (None, bonus_period2_objective(cells, lam, k))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    base = manager_best_response(static, lam, tie_tol, cells) if specs[0] is None else None
    for period, spec in enumerate(specs, start=1):
        for v in params:
            add(period, v, base if spec is None else _respond(cells, spec, v, tie_tol))
    return rows


ANNUAL_DAYS = 365


def annualize(per_day) -> Decimal:
    """Per-day quantity over a year, in exact decimal arithmetic."""
    return Decimal(str(per_day)) * ANNUAL_DAYS

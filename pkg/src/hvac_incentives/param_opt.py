"""
Set-valued maximization of parametric objectives over a finite feasible set.

Two objective families are supported for a parameter ``lam >= 0``:

    TYPE1:  f(x) + lam * g(x, y)
    TYPE2:  lam * f(x) + g(x, y)

``solve`` enumerates every feasible point and returns the full tie set of
the maximum together with its smallest and largest ``x``.  When ``f`` is
strictly monotone the tie sets move monotonically with ``lam``; the four
resulting orderings are

    TYPE1, f increasing:  x_lo(lam1) >= x_hi(lam2)
    TYPE1, f decreasing:  x_hi(lam1) <= x_lo(lam2)
    TYPE2, f increasing:  x_hi(lam1) <= x_lo(lam2)
    TYPE2, f decreasing:  x_lo(lam1) >= x_hi(lam2)

for every ``lam1 < lam2``.  Only order and maximization enter the argument,
so these hold exactly on finite sets; ``check_theorem`` tests them.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError

DEFAULT_REL_TIE = 1e-9


class Family(str, enum.Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"


class Direction(str, enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"


@dataclass(frozen=True)
class ObjectiveSpec:
    """A finite feasible set with ``f`` and ``g`` evaluated at every point.

    ``f`` must be a function of ``x`` alone: points that share an ``x``
    must share an ``f`` value.  ``from_functions`` evaluates callables.
    """

    x: np.ndarray
    y: np.ndarray
    f: np.ndarray
    g: np.ndarray
    family: Family

    def __post_init__(self):
        arrays = {}
        for key in ("x", "y", "f", "g"):
            arr = np.asarray(getattr(self, key), dtype=float).ravel()
            arrays[key] = arr
            object.__setattr__(self, key, arr)
        n = arrays["x"].size
        if n == 0:
            raise ValueError("feasible set is empty")
        if any(a.size != n for a in arrays.values()):
            raise ValueError("x, y, f and g must have one entry per feasible point")
        if not all(np.all(np.isfinite(a)) for a in arrays.values()):
            raise ValueError("x, y, f and g must be finite on every feasible point")
        object.__setattr__(self, "family", Family(self.family))

    @classmethod
    def from_functions(cls, points, f, g, family) -> "ObjectiveSpec":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(x=pts[:, 0], y=pts[:, 1],
                   f=[f(x) for x in pts[:, 0]], g=[g(x, y) for x, y in pts],
                   family=family)

    def __len__(self) -> int:
        return self.x.size

    def objective(self, lam: float) -> np.ndarray:
        if self.family is Family.TYPE1:
            return self.f + lam * self.g
        return lam * self.f + self.g

    def reflected(self) -> "ObjectiveSpec":
        """The same problem in the coordinate ``-x`` (f and g follow the points)."""
        return ObjectiveSpec(x=-self.x, y=self.y, f=self.f, g=self.g, family=self.family)

    def with_family(self, family) -> "ObjectiveSpec":
        return ObjectiveSpec(x=self.x, y=self.y, f=self.f, g=self.g, family=family)

    def as_dict(self) -> dict:
        return {"family": self.family.value, "x": self.x.tolist(), "y": self.y.tolist(),
                "f": self.f.tolist(), "g": self.g.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectiveSpec":
        return cls(x=d["x"], y=d["y"], f=d["f"], g=d["g"], family=d["family"])


@dataclass(frozen=True)
class MaximizerSet:
    """Tie set of a maximization: feasible indices, their coordinates and projections."""

    index: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    value: float
    x_lo: float
    x_hi: float

    def __len__(self) -> int:
        return self.index.size


@dataclass(frozen=True)
class SweepRow:
    lam: float
    x_lo: float
    x_hi: float


def default_tie_tol(values: np.ndarray) -> float:
    span = float(np.max(values) - np.min(values))
    return DEFAULT_REL_TIE * span


def _from_values(spec: ObjectiveSpec, values: np.ndarray, tie_tol: float | None) -> MaximizerSet:
    if tie_tol is None:
        tie_tol = default_tie_tol(values)
    best = float(np.max(values))
    idx = np.flatnonzero(values >= best - tie_tol)
    xs = spec.x[idx]
    return MaximizerSet(index=idx, x=xs, y=spec.y[idx], value=best,
                        x_lo=float(xs.min()), x_hi=float(xs.max()))


def solve(spec: ObjectiveSpec, lam: float, tie_tol: float | None = None) -> MaximizerSet:
    """All feasible points within ``tie_tol`` of the maximum objective at ``lam``.

    ``tie_tol=None`` uses ``1e-9`` times the range of objective values.
    """
    if not lam >= 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if tie_tol is not None and not tie_tol >= 0:
        raise ValueError("tie_tol must be nonnegative")
    return _from_values(spec, spec.objective(float(lam)), tie_tol)


def _check_lambdas(lams) -> np.ndarray:
    lams = np.asarray(lams, dtype=float).ravel()
    if lams.size == 0:
        raise ValueError("lambda list is empty")
    if np.any(lams < 0) or not np.all(np.isfinite(lams)):
        raise ValueError("lambda values must be finite and nonnegative")
    if np.any(np.diff(lams) <= 0):
        raise ValueError("lambda values must be strictly increasing")
    return lams


def solve_many(spec: ObjectiveSpec, lams, tie_tol: float | None = None) -> list[MaximizerSet]:
    lams = _check_lambdas(lams)
    return [solve(spec, lam, tie_tol) for lam in lams]


def sweep(spec: ObjectiveSpec, lams, tie_tol: float | None = None) -> list[SweepRow]:
    lams = _check_lambdas(lams)
    return [SweepRow(float(lam), m.x_lo, m.x_hi) for lam, m in zip(lams, solve_many(spec, lams, tie_tol))]


def _projections(spec: ObjectiveSpec, lams: np.ndarray, tie_tol: float | None):
    """x_lo and x_hi for every lambda at once (vectorised ``sweep``)."""
    if spec.family is Family.TYPE1:
        vals = spec.f[None, :] + lams[:, None] * spec.g[None, :]
    else:
        vals = lams[:, None] * spec.f[None, :] + spec.g[None, :]
    best = vals.max(axis=1, keepdims=True)
    if tie_tol is None:
        tol = DEFAULT_REL_TIE * (best - vals.min(axis=1, keepdims=True))
    else:
        tol = tie_tol
    hit = vals >= best - tol
    x = np.broadcast_to(spec.x, vals.shape)
    return np.where(hit, x, np.inf).min(axis=1), np.where(hit, x, -np.inf).max(axis=1)


def sweep_csv_rows(rows: list[SweepRow]):
    return [(r.lam, r.x_lo, r.x_hi) for r in rows]


# --- monotonicity ---------------------------------------------------------

def certify_monotone(spec: ObjectiveSpec) -> Direction:
    """Direction in which ``f`` is strictly monotone in ``x``.

    Every pair of distinct ``x`` values is compared; equal ``x`` must carry
    equal ``f``.  Raises ``PreconditionError`` when ``f`` is not a strictly
    monotone function of ``x``.
    """
    order = np.lexsort((spec.f, spec.x))
    x, f = spec.x[order], spec.f[order]
    same = np.diff(x) == 0
    if np.any(same & (np.diff(f) != 0)):
        raise PreconditionError("f takes two values at the same x")
    ux, first = np.unique(x, return_index=True)
    fu = f[first]
    if ux.size == 1:
        raise PreconditionError("f is defined at a single x; strict monotonicity is vacuous")
    # Pairwise over distinct x: strictly monotone iff consecutive differences share one strict sign.
    d = np.diff(fu)
    if np.all(d > 0):
        return Direction.INCREASING
    if np.all(d < 0):
        return Direction.DECREASING
    raise PreconditionError("f is not strictly monotone in x; the ordering results do not apply")


def expected_ordering(family: Family, direction: Direction) -> str:
    """``"down"`` when x_lo(lam_i) >= x_hi(lam_{i+1}) must hold, ``"up"`` for x_hi(lam_i) <= x_lo(lam_{i+1})."""
    down = (family is Family.TYPE1) == (direction is Direction.INCREASING)
    return "down" if down else "up"


@dataclass(frozen=True)
class Verdict:
    ok: bool
    family: Family
    direction: Direction
    ordering: str
    # First violating consecutive pair, as (lam1, lam2, projections at lam1, projections at lam2).
    counterexample: tuple | None = None

    def describe(self) -> str:
        if self.ok:
            return f"pass ({self.family.value}, f {self.direction.value}, x moves {self.ordering})"
        l1, l2, p1, p2 = self.counterexample
        return (f"counterexample ({self.family.value}, f {self.direction.value}): "
                f"lambda {l1!r} -> {l2!r}, (x_lo, x_hi) {p1} -> {p2}")


def check_theorem(spec: ObjectiveSpec, lams, direction: Direction | str | None = None,
                  tie_tol: float | None = 0.0, solver_family: Family | None = None) -> Verdict:
    """Test the monotone ordering of tie sets over consecutive ``lams``.

    ``f`` is certified strictly monotone first; a declared ``direction``
    that disagrees with the certificate is a precondition error.  The
    comparison is exact (no tolerance on x).  ``solver_family`` overrides
    the family used to compute the maximizers while keeping the expected
    ordering of ``spec.family``; it exists only to confirm that a corrupted
    objective is caught.
    """
    lams = _check_lambdas(lams)
    found = certify_monotone(spec)
    if direction is not None and Direction(direction) is not found:
        raise PreconditionError(f"f is {found.value}, not {Direction(direction).value}")
    ordering = expected_ordering(spec.family, found)
    solver_spec = spec if solver_family is None else spec.with_family(solver_family)
    x_lo, x_hi = _projections(solver_spec, lams, tie_tol)
    for i in range(lams.size - 1):
        if ordering == "down":
            bad = not x_lo[i] >= x_hi[i + 1]
        else:
            bad = not x_hi[i] <= x_lo[i + 1]
        if bad:
            return Verdict(False, spec.family, found, ordering,
                           (float(lams[i]), float(lams[i + 1]),
                            (float(x_lo[i]), float(x_hi[i])), (float(x_lo[i + 1]), float(x_hi[i + 1]))))
    return Verdict(True, spec.family, found, ordering)


# --- randomised instances ----------------------------------------------------

CASES = (
    ("type1_increasing", Family.TYPE1, Direction.INCREASING),
    ("type1_decreasing", Family.TYPE1, Direction.DECREASING),
    ("type2_increasing", Family.TYPE2, Direction.INCREASING),
    ("type2_decreasing", Family.TYPE2, Direction.DECREASING),
)


def random_instance(rng: np.random.Generator, family, direction, max_points: int = 100,
                    n_lambdas: int = 10):
    """A random exact instance: integer points, integer f and g, dyadic lambdas.

    Small integer ranges make ties frequent, and every objective value is
    an exact binary fraction, so floating-point evaluation is exact.
    """
    family, direction = Family(family), Direction(direction)
    n_points = int(rng.integers(2, max_points, endpoint=True))
    x_range = int(rng.integers(2, 16, endpoint=True))
    y_range = int(rng.integers(1, 12, endpoint=True))
    xs = rng.integers(0, x_range, n_points, endpoint=True)
    ys = rng.integers(0, y_range, n_points, endpoint=True)
    pts = np.unique(np.stack([xs, ys], axis=1), axis=0)
    if np.unique(pts[:, 0]).size < 2:
        pts = np.vstack([pts, [pts[0, 0] + 1, pts[0, 1]]])
    ux = np.unique(pts[:, 0])
    steps = rng.integers(1, 6, ux.size)
    fu = np.cumsum(steps) * (1 if direction is Direction.INCREASING else -1)
    f = fu[np.searchsorted(ux, pts[:, 0])]
    g = rng.integers(-20, 20, pts.shape[0], endpoint=True)
    lam_units = np.sort(rng.choice(np.arange(0, 129), size=n_lambdas, replace=False))
    lams = lam_units / 16.0
    spec = ObjectiveSpec(x=pts[:, 0], y=pts[:, 1], f=f, g=g, family=family)
    return spec, lams


def instance_to_json(spec: ObjectiveSpec, lams, direction) -> str:
    return json.dumps({"spec": spec.as_dict(), "lambdas": np.asarray(lams, dtype=float).tolist(),
                       "direction": Direction(direction).value}, sort_keys=True)


def instance_from_json(text: str):
    d = json.loads(text)
    return ObjectiveSpec.from_dict(d["spec"]), np.asarray(d["lambdas"], dtype=float), Direction(d["direction"])


@dataclass
class VerifyReport:
    instances_per_case: int
    seed: int
    passed: dict = field(default_factory=dict)
    counterexamples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.counterexamples


def verify_theorems(instances: int, seed: int, corrupt: bool = False, max_points: int = 100,
                    n_lambdas: int = 10) -> VerifyReport:
    """Check every ordering case on ``instances`` random instances each.

    With ``corrupt=True`` the solver evaluates the other family's objective,
    which a correct harness must flag.
    """
    report = VerifyReport(instances, seed)
    for case_no, (name, family, direction) in enumerate(CASES):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(case_no,)))
        swapped = (Family.TYPE2 if family is Family.TYPE1 else Family.TYPE1) if corrupt else None
        passed = 0
        for k in range(instances):
            spec, lams = random_instance(rng, family, direction, max_points, n_lambdas)
            verdict = check_theorem(spec, lams, direction, tie_tol=0.0, solver_family=swapped)
            if verdict.ok:
                passed += 1
            else:
                report.counterexamples.append((name, k, verdict, instance_to_json(spec, lams, direction)))
        report.passed[name] = passed
    return report

"""
Static operating model in the (satisfaction S, energy E) plane.

A Monte Carlo cloud of simulated periods is binned onto a rectangular
lattice of cell centres.  The smoothed point density gives the work
surface W = 1 / (density + floor), rescaled to [0, 1] over the feasible
mask, and the mask itself is the dilated set of occupied cells reduced to
its largest 4-connected component.  Arrays are indexed ``[i_S, j_E]``.

``canonical_model`` builds an analytic stand-in with exactly the structure
the incentive analysis assumes, used for exact ordering tests.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .dynamics import BuildingModel, simulate_batch
from .errors import (
    DegenerateSurface,
    DomainError,
    EmptyDensity,
    ModelShapeError,
    SamplingFailed,
)

DEFAULT_RESOLUTION = (200, 200)
DEFAULT_BANDWIDTH = 2.0
DEFAULT_DILATION = 2
DEFAULT_PAD_CELLS = 4
# W(alpha) and W(omega) must agree to this many units of the [0, 1] work scale.
DEPTH_TOL = 0.02
# Cells within this Chebyshev radius of a minimum belong to its basin and are
# exempt from the isolation check.
ISOLATION_RADIUS = 8

_FOUR = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class OperatingPoint:
    S: float
    E: float

    def __post_init__(self):
        if not (math.isfinite(self.S) and math.isfinite(self.E)):
            raise ValueError(f"operating point must be finite, got ({self.S}, {self.E})")


@dataclass(frozen=True)
class Grid:
    """Lattice of cell centres ``S[i] = s_lo + i*dS``, ``E[j] = e_lo + j*dE``."""

    s_lo: float
    s_hi: float
    n_s: int
    e_lo: float
    e_hi: float
    n_e: int

    def __post_init__(self):
        if self.n_s < 2 or self.n_e < 2:
            raise ValueError("grid needs at least 2 cells per axis")
        if not (self.s_hi > self.s_lo and self.e_hi > self.e_lo):
            raise ValueError("grid extents must be increasing")

    @property
    def dS(self) -> float:
        return (self.s_hi - self.s_lo) / (self.n_s - 1)

    @property
    def dE(self) -> float:
        return (self.e_hi - self.e_lo) / (self.n_e - 1)

    @property
    def S(self) -> np.ndarray:
        return self.s_lo + np.arange(self.n_s) * self.dS

    @property
    def E(self) -> np.ndarray:
        return self.e_lo + np.arange(self.n_e) * self.dE

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_s, self.n_e)

    @property
    def cell_area(self) -> float:
        return self.dS * self.dE

    def s_at(self, i: int) -> float:
        return float(self.S[i])

    def e_at(self, j: int) -> float:
        return float(self.E[j])

    def cell_of(self, S, E):
        """Indices of the containing cell and a mask of points inside the grid."""
        fi = (np.asarray(S, dtype=float) - self.s_lo) / self.dS
        fj = (np.asarray(E, dtype=float) - self.e_lo) / self.dE
        i = np.floor(fi + 0.5).astype(int)
        j = np.floor(fj + 0.5).astype(int)
        inside = (i >= 0) & (i < self.n_s) & (j >= 0) & (j < self.n_e)
        return i, j, inside

    @classmethod
    def around(cls, S, E, resolution=DEFAULT_RESOLUTION, pad_cells: int = DEFAULT_PAD_CELLS) -> "Grid":
        """Grid whose interior spans the bounding box of the points."""
        S = np.asarray(S, dtype=float)
        E = np.asarray(E, dtype=float)
        n_s, n_e = resolution
        extents = []
        for values, n in ((S, n_s), (E, n_e)):
            lo, hi = float(values.min()), float(values.max())
            if hi <= lo:
                half = max(abs(lo), 1.0) * 1e-3
                lo, hi = lo - half, hi + half
            step = (hi - lo) / (n - 1 - 2 * pad_cells)
            extents.append((lo - pad_cells * step, hi + pad_cells * step))
        return cls(extents[0][0], extents[0][1], n_s, extents[1][0], extents[1][1], n_e)


@dataclass(frozen=True)
class SampleSpec:
    """Uniform ranges for the Monte Carlo configurations and disturbances.

    Per sample and per zone ``F_min`` and ``F_max`` are drawn from their
    ranges and ``F_max`` is lifted to ``F_min`` where it falls below.  The
    mode is uniform on the integers of ``mode_range``.  Outdoor temperature
    and zone loads are drawn independently at every step and shifted by the
    fixed profiles: ``o[k] = U(o_range) + o_profile[k]`` and
    ``Q[k, i] = U(Q_range) + q_profile[k]``.  Everything else in the
    configuration (setpoint, gains, reheat caps, initial state) is fixed.
    """

    F_min_range: tuple[float, float]
    F_max_range: tuple[float, float]
    mode_range: tuple[int, int]
    o_range: tuple[float, float]
    Q_range: tuple[float, float]
    T_d: tuple[float, ...]
    K_F: float
    K_R: float
    R_max: tuple[float, ...]
    o_profile: tuple[float, ...]
    q_profile: tuple[float, ...]
    N: int = 10_000
    seed: int = 20130611

    def __post_init__(self):
        for name in ("F_min_range", "F_max_range", "mode_range", "o_range", "Q_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
        if self.F_min_range[0] < 0:
            raise ValueError("F_min_range must be nonnegative")
        if self.mode_range[0] < 1 or self.mode_range[1] > 3:
            raise ValueError("mode_range must lie within 1..3")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if len(self.o_profile) != len(self.q_profile) or len(self.o_profile) < 1:
            raise ValueError("o_profile and q_profile must share a positive length K")
        if len(self.T_d) != len(self.R_max):
            raise ValueError("T_d and R_max must have one entry per zone")

    @property
    def n(self) -> int:
        return len(self.T_d)

    @property
    def K(self) -> int:
        return len(self.o_profile)


@dataclass(frozen=True)
class Cloud:
    """Operating points of the non-diverged samples, in sample order."""

    S: np.ndarray
    E: np.ndarray
    sample_index: np.ndarray
    n_diverged: int = 0

    def __len__(self) -> int:
        return len(self.S)

    def __iter__(self):
        for s, e in zip(self.S, self.E):
            yield OperatingPoint(float(s), float(e))

    def bounding_box(self) -> tuple[float, float, float, float]:
        return (float(self.S.min()), float(self.S.max()), float(self.E.min()), float(self.E.max()))


def _draw_sample(spec: SampleSpec, index: int):
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(index,)))
    n = spec.n
    F_min = rng.uniform(spec.F_min_range[0], spec.F_min_range[1], n)
    F_max = np.maximum(rng.uniform(spec.F_max_range[0], spec.F_max_range[1], n), F_min)
    mode = int(rng.integers(spec.mode_range[0], spec.mode_range[1], endpoint=True))
    o = rng.uniform(spec.o_range[0], spec.o_range[1], spec.K) + np.asarray(spec.o_profile)
    Q = rng.uniform(spec.Q_range[0], spec.Q_range[1], (spec.K, n)) + np.asarray(spec.q_profile)[:, None]
    return F_min, F_max, mode, o, Q


def draw_configurations(spec: SampleSpec, start: int, stop: int):
    """Batch arrays for samples ``start..stop-1``; each sample has its own RNG stream."""
    draws = [_draw_sample(spec, i) for i in range(start, stop)]
    F_min = np.array([d[0] for d in draws]).reshape(-1, spec.n)
    F_max = np.array([d[1] for d in draws]).reshape(-1, spec.n)
    mode = np.array([d[2] for d in draws], dtype=int)
    o = np.array([d[3] for d in draws]).reshape(-1, spec.K)
    Q = np.array([d[4] for d in draws]).reshape(-1, spec.K, spec.n)
    return F_min, F_max, mode, o, Q


def _simulate_chunk(model: BuildingModel, spec: SampleSpec, start: int, stop: int):
    F_min, F_max, mode, o, Q = draw_configurations(spec, start, stop)
    m = stop - start
    T_d = np.broadcast_to(np.asarray(spec.T_d, dtype=float), (m, spec.n))
    R_max = np.broadcast_to(np.asarray(spec.R_max, dtype=float), (m, spec.n))
    S, E, diverged_at, _ = simulate_batch(model, F_min, F_max, T_d, mode, spec.K_F, spec.K_R,
                                          R_max, o, Q, T_d)
    return S, E, diverged_at


def monte_carlo_cloud(model: BuildingModel, spec: SampleSpec, workers: int = 1,
                      chunk_size: int = 2048) -> Cloud:
    """Simulate ``spec.N`` random configurations and collect their operating points.

    Diverged runs are dropped and counted.  Samples own independent RNG
    streams keyed by ``(seed, index)``, so the cloud does not depend on
    ``workers`` or ``chunk_size``.
    """
    if spec.n != model.n or spec.K != model.dt_steps:
        raise ValueError(f"sample spec is for n={spec.n}, K={spec.K}; model has n={model.n}, K={model.dt_steps}")
    bounds = [(s, min(s + chunk_size, spec.N)) for s in range(0, spec.N, chunk_size)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _simulate_chunk(model, spec, *b), bounds))
    else:
        parts = [_simulate_chunk(model, spec, *b) for b in bounds]
    S = np.concatenate([p[0] for p in parts])
    E = np.concatenate([p[1] for p in parts])
    ok = np.concatenate([p[2] for p in parts]) < 0
    n_bad = int(spec.N - ok.sum())
    if n_bad * 2 > spec.N:
        raise SamplingFailed(f"{n_bad} of {spec.N} simulations diverged")
    return Cloud(S=S[ok], E=E[ok], sample_index=np.flatnonzero(ok), n_diverged=n_bad)


def bin_counts(S, E, grid: Grid) -> np.ndarray:
    i, j, inside = grid.cell_of(S, E)
    counts = np.zeros(grid.shape)
    np.add.at(counts, (i[inside], j[inside]), 1.0)
    return counts


def estimate_density(S, E, grid: Grid, bandwidth: float = DEFAULT_BANDWIDTH) -> np.ndarray:
    """Histogram smoothed by a Gaussian of ``bandwidth`` cells truncated at 3 sigma.

    The result is a density: its sum times the cell area is 1.
    """
    if np.size(S) < 1:
        raise ValueError("need at least one point")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    counts = bin_counts(S, E, grid)
    if counts.sum() == 0:
        raise EmptyDensity("no point falls inside the grid")
    smooth = ndimage.gaussian_filter(counts, sigma=bandwidth, mode="constant", truncate=3.0)
    return smooth / (smooth.sum() * grid.cell_area)


def extract_feasible(S, E, grid: Grid, dilation: int = DEFAULT_DILATION) -> np.ndarray:
    """Occupied cells, dilated ``dilation`` times, reduced to the largest 4-connected component."""
    if np.size(S) < 1:
        raise ValueError("need at least one point")
    mask = bin_counts(S, E, grid) > 0
    if dilation > 0:
        mask = ndimage.binary_dilation(mask, structure=_FOUR, iterations=int(dilation))
    return largest_component(mask)


def largest_component(mask: np.ndarray) -> np.ndarray:
    labels, count = ndimage.label(mask, structure=_FOUR)
    if count <= 1:
        return labels > 0
    sizes = np.bincount(labels.ravel())[1:]
    # argmax returns the first label on ties, i.e. the component met first in scan order
    return labels == (int(np.argmax(sizes)) + 1)


def work_surface(density: np.ndarray, feasible: np.ndarray, floor: float | None = None) -> np.ndarray:
    """Inverse density rescaled to [0, 1] on feasible cells; NaN elsewhere."""
    density = np.asarray(density, dtype=float)
    if np.any(density < 0):
        raise ValueError("density must be nonnegative")
    if not feasible.any():
        raise ValueError("feasible mask is empty")
    if floor is None:
        floor = 1e-3 * float(density[feasible].max())
    if not floor > 0:
        raise ValueError("floor must be positive")
    raw = 1.0 / (density + floor)
    lo, hi = raw[feasible].min(), raw[feasible].max()
    if hi == lo:
        raise DegenerateSurface("density is constant on the feasible region")
    W = np.full(density.shape, np.nan)
    W[feasible] = (raw[feasible] - lo) / (hi - lo)
    return W


@dataclass(frozen=True)
class KeyPoints:
    alpha: OperatingPoint
    omega: OperatingPoint
    S_min: float
    S_max: float
    S_4: float
    E_min: float
    E_max: float
    E_opt: float
    E_3: float

    @property
    def slope(self) -> float:
        """Slope of the lower boundary from (S_min, E_min) to (S_max, E_opt)."""
        if self.S_max == self.S_min:
            raise ModelShapeError("S_max equals S_min; the lower boundary has no slope")
        return (self.E_opt - self.E_min) / (self.S_max - self.S_min)

    @property
    def intercept(self) -> float:
        return self.E_min - self.slope * self.S_min

    def as_dict(self) -> dict:
        return {
            "alpha": [self.alpha.S, self.alpha.E],
            "omega": [self.omega.S, self.omega.E],
            "S_min": self.S_min, "S_max": self.S_max, "S_4": self.S_4,
            "E_min": self.E_min, "E_max": self.E_max, "E_opt": self.E_opt, "E_3": self.E_3,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KeyPoints":
        return cls(
            alpha=OperatingPoint(*map(float, d["alpha"])),
            omega=OperatingPoint(*map(float, d["omega"])),
            **{k: float(d[k]) for k in ("S_min", "S_max", "S_4", "E_min", "E_max", "E_opt", "E_3")},
        )


@dataclass(frozen=True)
class StaticModel:
    grid: Grid
    feasible: np.ndarray = field(repr=False)
    work: np.ndarray = field(repr=False)
    key_points: KeyPoints | None = None
    # L1 distance (cells) within which a landmark counts as lying on the boundary;
    # a mask dilated d times moves its boundary out by d cells.
    boundary_tol: int = 0

    def __post_init__(self):
        if self.feasible.shape != self.grid.shape or self.work.shape != self.grid.shape:
            raise ValueError("mask and work arrays must match the grid shape")
        w = self.work[self.feasible]
        if np.any(~np.isfinite(w)) or np.any(w < 0) or np.any(w > 1):
            raise ValueError("work must lie in [0, 1] on every feasible cell")

    def cells(self):
        """Indices ``(i, j)`` of the feasible cells in row-major order."""
        return np.nonzero(self.feasible)

    def cell_index(self, p: OperatingPoint) -> tuple[int, int] | None:
        i, j, inside = self.grid.cell_of(p.S, p.E)
        if not bool(inside):
            return None
        return int(i), int(j)

    def membership(self, p: OperatingPoint) -> bool:
        idx = self.cell_index(p)
        return idx is not None and bool(self.feasible[idx])

    def work_at(self, p: OperatingPoint) -> float:
        """Bilinear interpolation of W between cell centres.

        Corners of the interpolation stencil that are not feasible are left
        out and the remaining weights renormalised.
        """
        if not self.membership(p):
            raise DomainError(f"({p.S}, {p.E}) is outside the feasible region")
        g = self.grid
        fi = min(max((p.S - g.s_lo) / g.dS, 0.0), g.n_s - 1.0)
        fj = min(max((p.E - g.e_lo) / g.dE, 0.0), g.n_e - 1.0)
        i0, j0 = min(int(math.floor(fi)), g.n_s - 2), min(int(math.floor(fj)), g.n_e - 2)
        ti, tj = fi - i0, fj - j0
        # cell centres reproduce the stored value exactly despite rounding in fi, fj
        ti = 0.0 if ti < 1e-9 else (1.0 if ti > 1 - 1e-9 else ti)
        tj = 0.0 if tj < 1e-9 else (1.0 if tj > 1 - 1e-9 else tj)
        total, weight = 0.0, 0.0
        for di, wi in ((0, 1.0 - ti), (1, ti)):
            for dj, wj in ((0, 1.0 - tj), (1, tj)):
                w = wi * wj
                if w > 0 and self.feasible[i0 + di, j0 + dj]:
                    total += w * self.work[i0 + di, j0 + dj]
                    weight += w
        return total / weight

    def with_key_points(self, kp: KeyPoints) -> "StaticModel":
        return replace(self, key_points=kp)


def _neighbour_views(arr: np.ndarray, fill):
    padded = np.pad(arr, 1, constant_values=fill)
    n_s, n_e = arr.shape
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                yield padded[1 + di:1 + di + n_s, 1 + dj:1 + dj + n_e]


def strict_local_minima(work: np.ndarray, feasible: np.ndarray) -> np.ndarray:
    """Feasible cells strictly below every feasible 8-neighbour."""
    W = np.where(feasible, work, np.inf)
    out = feasible.copy()
    for nb_W, nb_f in zip(_neighbour_views(W, np.inf), _neighbour_views(feasible, False)):
        out &= ~nb_f | (W < nb_W)
    return out


def boundary_mask(feasible: np.ndarray) -> np.ndarray:
    """Feasible cells with at least one 4-neighbour outside the mask (or the grid)."""
    interior = ndimage.binary_erosion(feasible, structure=_FOUR, border_value=0)
    return feasible & ~interior


def extract_key_points(static: StaticModel, depth_tol: float = DEPTH_TOL,
                       isolation_radius: int = ISOLATION_RADIUS) -> KeyPoints:
    """Read the structural landmarks off a gridded model and validate them."""
    feasible, W, g = static.feasible, static.work, static.grid
    if not feasible.any():
        raise ModelShapeError("feasible mask is empty")
    mins = np.argwhere(strict_local_minima(W, feasible))
    if len(mins) < 2:
        raise ModelShapeError(f"need two strict local minima of W, found {len(mins)}")
    order = sorted(((W[i, j], i, j) for i, j in mins))[:2]
    (_, ia, ja), (_, ib, jb) = sorted(order, key=lambda t: (t[1], t[2]))
    cols = np.flatnonzero(feasible.any(axis=1))
    rows = np.flatnonzero(feasible.any(axis=0))
    i_min, i_max = int(cols[0]), int(cols[-1])
    j_min, j_max = int(rows[0]), int(rows[-1])
    col_max = np.flatnonzero(feasible[i_max])
    i_4 = int(np.flatnonzero(feasible[:, j_max])[-1])
    kp = KeyPoints(
        alpha=OperatingPoint(g.s_at(ia), g.e_at(ja)),
        omega=OperatingPoint(g.s_at(ib), g.e_at(jb)),
        S_min=g.s_at(i_min), S_max=g.s_at(i_max), S_4=g.s_at(i_4),
        E_min=g.e_at(j_min), E_max=g.e_at(j_max),
        E_opt=g.e_at(int(col_max[0])), E_3=g.e_at(int(col_max[-1])),
    )
    problems = key_point_violations(static, kp, depth_tol, isolation_radius)
    if problems:
        raise ModelShapeError("; ".join(problems))
    return kp


def key_point_violations(static: StaticModel, kp: KeyPoints, depth_tol: float = DEPTH_TOL,
                         isolation_radius: int = ISOLATION_RADIUS) -> list[str]:
    """Every structural clause ``kp`` breaks on ``static`` (empty list when valid)."""
    problems = []
    feasible, W, g = static.feasible, static.work, static.grid
    if not (kp.alpha.S < kp.omega.S and kp.alpha.E < kp.omega.E):
        problems.append("minima ordering: need S_alpha < S_omega and E_alpha < E_omega")

    minima = {}
    for name, p in (("alpha", kp.alpha), ("omega", kp.omega)):
        cell = static.cell_index(p)
        if cell is None or not feasible[cell]:
            problems.append(f"two isolated minima: {name} is not a feasible cell")
        else:
            minima[name] = cell
    if len(minima) == 2:
        wa, wo = W[minima["alpha"]], W[minima["omega"]]
        if abs(wa - wo) > depth_tol:
            problems.append(f"two isolated minima: W(alpha)={wa:.4g} and W(omega)={wo:.4g} "
                            f"differ by more than {depth_tol}")
        ii, jj = np.indices(g.shape)
        far = feasible.copy()
        for ci, cj in minima.values():
            far &= np.maximum(abs(ii - ci), abs(jj - cj)) > isolation_radius
        if np.any(W[far] <= max(wa, wo)):
            problems.append("two isolated minima: a feasible cell outside the isolation radius "
                            "is as low as a minimum")

    edge_i, edge_j = np.nonzero(boundary_mask(feasible))
    for name, s, e in (("(S_min, E_min)", kp.S_min, kp.E_min), ("(S_max, E_opt)", kp.S_max, kp.E_opt),
                       ("(S_max, E_3)", kp.S_max, kp.E_3), ("(S_4, E_max)", kp.S_4, kp.E_max)):
        i, j, inside = g.cell_of(s, e)
        if not (bool(inside) and len(edge_i)
                and np.min(abs(edge_i - i) + abs(edge_j - j)) <= static.boundary_tol):
            problems.append(f"linear bounds: {name} is not on the boundary of the feasible region")
    if kp.E_opt > kp.E_3:
        problems.append("linear bounds: E_opt exceeds E_3")
    return problems


def build_static_model(S, E, resolution=DEFAULT_RESOLUTION, bandwidth: float = DEFAULT_BANDWIDTH,
                       dilation: int = DEFAULT_DILATION, floor: float | None = None,
                       pad_cells: int = DEFAULT_PAD_CELLS) -> StaticModel:
    """Cloud -> density -> mask -> work -> key points."""
    S = np.asarray(S, dtype=float)
    E = np.asarray(E, dtype=float)
    grid = Grid.around(S, E, resolution, pad_cells=max(pad_cells, dilation + 1))
    density = estimate_density(S, E, grid, bandwidth)
    feasible = extract_feasible(S, E, grid, dilation)
    work = work_surface(density, feasible, floor)
    static = StaticModel(grid=grid, feasible=feasible, work=work, boundary_tol=int(dilation))
    return static.with_key_points(extract_key_points(static))


# --- analytic stand-in ----------------------------------------------------

def _inside_polygon(ii, jj, verts, strict: bool = False) -> np.ndarray:
    """Exact point-in-convex-polygon test in integer index space (counter-clockwise vertices)."""
    ok = np.ones(np.shape(ii), dtype=bool)
    for (x0, y0), (x1, y1) in zip(verts, verts[1:] + verts[:1]):
        cross = (x1 - x0) * (jj - y0) - (y1 - y0) * (ii - x0)
        ok &= (cross > 0) if strict else (cross >= 0)
    return ok


def canonical_model(kp: KeyPoints, resolution=DEFAULT_RESOLUTION, pad_cells: int = DEFAULT_PAD_CELLS,
                    left_corner: float = 0.75) -> StaticModel:
    """Analytic static model with exactly the prescribed key points.

    The feasible region is the convex pentagon

        (S_min, E_min) -> (S_max, E_opt) -> (S_max, E_3) -> (S_4, E_max)
        -> (S_min, E_left) -> back,

    with ``E_left = E_min + left_corner * (E_max - E_min)``, rasterised on a
    grid whose nodes include every key point (key points are snapped to the
    nearest node).  W is the rescaled minimum of two cones of equal depth
    centred on alpha and omega, with distances measured in units of the
    S and E extents.
    """
    n_s, n_e = resolution
    if not (kp.S_min < kp.S_4 < kp.S_max and kp.E_min < kp.E_opt <= kp.E_3 < kp.E_max):
        raise ValueError("key points need S_min < S_4 < S_max and E_min < E_opt <= E_3 < E_max")
    if not (kp.alpha.S < kp.omega.S and kp.alpha.E < kp.omega.E):
        raise ValueError("key points need S_alpha < S_omega and E_alpha < E_omega")
    if not 0 < left_corner < 1:
        raise ValueError("left_corner must lie in (0, 1)")
    span_s, span_e = n_s - 1 - 2 * pad_cells, n_e - 1 - 2 * pad_cells
    if span_s < 4 or span_e < 4:
        raise ValueError("resolution too small for the padding")
    dS = (kp.S_max - kp.S_min) / span_s
    dE = (kp.E_max - kp.E_min) / span_e
    grid = Grid(kp.S_min - pad_cells * dS, kp.S_max + pad_cells * dS, n_s,
                kp.E_min - pad_cells * dE, kp.E_max + pad_cells * dE, n_e)

    def si(s):
        return int(round((s - grid.s_lo) / grid.dS))

    def ej(e):
        return int(round((e - grid.e_lo) / grid.dE))

    i_min, i_max, i_4 = pad_cells, pad_cells + span_s, si(kp.S_4)
    j_min, j_max = pad_cells, pad_cells + span_e
    j_opt, j_3 = ej(kp.E_opt), ej(kp.E_3)
    j_left = ej(kp.E_min + left_corner * (kp.E_max - kp.E_min))
    if not (i_min < i_4 < i_max and j_min < j_opt <= j_3 < j_max and j_min < j_left < j_max):
        raise ValueError("key points collapse onto each other at this resolution")
    verts = [(i_min, j_min), (i_max, j_opt), (i_max, j_3), (i_4, j_max), (i_min, j_left)]
    ii, jj = np.indices(grid.shape)
    feasible = _inside_polygon(ii, jj, verts)

    (ia, ja), (ib, jb) = (si(kp.alpha.S), ej(kp.alpha.E)), (si(kp.omega.S), ej(kp.omega.E))
    for name, (ci, cj) in (("alpha", (ia, ja)), ("omega", (ib, jb))):
        if not _inside_polygon(np.array(ci), np.array(cj), verts, strict=True):
            raise ValueError(f"{name} must lie strictly inside the feasible polygon")
    if not (ia < ib and ja < jb):
        raise ValueError("alpha and omega collapse at this resolution")

    S, E = grid.S[:, None], grid.E[None, :]
    rs, re = kp.S_max - kp.S_min, kp.E_max - kp.E_min
    bowl_a = np.hypot((S - grid.s_at(ia)) / rs, (E - grid.e_at(ja)) / re)
    bowl_b = np.hypot((S - grid.s_at(ib)) / rs, (E - grid.e_at(jb)) / re)
    raw = np.minimum(bowl_a, bowl_b)
    work = np.full(grid.shape, np.nan)
    work[feasible] = raw[feasible] / raw[feasible].max()
    work[ia, ja] = work[ib, jb] = 0.0

    snapped = KeyPoints(
        alpha=OperatingPoint(grid.s_at(ia), grid.e_at(ja)),
        omega=OperatingPoint(grid.s_at(ib), grid.e_at(jb)),
        S_min=grid.s_at(i_min), S_max=grid.s_at(i_max), S_4=grid.s_at(i_4),
        E_min=grid.e_at(j_min), E_max=grid.e_at(j_max),
        E_opt=grid.e_at(j_opt), E_3=grid.e_at(j_3),
    )
    return StaticModel(grid=grid, feasible=feasible, work=work, key_points=snapped)

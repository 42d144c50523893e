"""
Hybrid thermal / energy / satisfaction model of a multi-zone building.

Zone temperatures follow a switched affine recursion

    T[k+1] = A<m> T[k] + B<m> F[k] + C<m> R[k] + Q[k]

with airflow F and reheat R given by a saturated proportional law on
T - T_d.  Per-step energy is

    E[k] = a (sum F)^3 + b (t_s<m> - o[k]) (sum F) + c (sum R)

and occupant satisfaction over the period is

    S = 1 - 1/(n K) * sum_k sum_i max(|T[k,i] - T_d[i]| - band[i], 0).

The chiller term keeps the sign exactly as in the formula above: it is
nonnegative only while the supply temperature is at or above the outdoor
temperature.

The mode m is fixed for a whole period.  All kernels accept an optional
leading batch axis so the Monte Carlo sampler can push many
configurations through the same arithmetic as a single run; reductions
over zones are written as explicit left-to-right sums so that a sample
gives bit-identical results whether it is simulated alone or in a batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, SimulationDiverged

MODES = (1, 2, 3)


def _as_vector(name: str, value, n: int | None = None) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 1:
        raise ModelError(f"{name} must be a vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ModelError(f"{name} must have {n} entries, got {arr.shape[0]}")
    return arr


def _lsum(x: np.ndarray) -> np.ndarray:
    """Sum over the last axis, strictly left to right."""
    s = x[..., 0]
    for j in range(1, x.shape[-1]):
        s = s + x[..., j]
    return s


def _matvec(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    """M @ v over trailing axes with a fixed accumulation order."""
    out = M[..., :, 0] * v[..., None, 0]
    for j in range(1, v.shape[-1]):
        out = out + M[..., :, j] * v[..., None, j]
    return out


@dataclass(frozen=True)
class BuildingModel:
    """Matrices and constants of the hybrid model.

    ``A``, ``B``, ``C`` have shape ``(3, n, n)``; index ``m - 1`` holds the
    matrices of mode ``m``.  ``B`` is the flow-influence matrix; the comfort
    deadband lives in ``comfort_band``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    t_s: np.ndarray
    a: float
    b: float
    c: float
    comfort_band: np.ndarray
    dt_steps: int
    name: str = "unnamed"

    def __post_init__(self):
        mats = {}
        for key in ("A", "B", "C"):
            arr = np.asarray(getattr(self, key), dtype=float)
            if arr.ndim != 3 or arr.shape[0] != len(MODES) or arr.shape[1] != arr.shape[2]:
                raise ModelError(f"{key} must have shape (3, n, n), got {arr.shape}")
            mats[key] = arr
        n = mats["A"].shape[1]
        for key, arr in mats.items():
            if arr.shape != (len(MODES), n, n):
                raise ModelError(f"{key} must have shape (3, {n}, {n}), got {arr.shape}")
            object.__setattr__(self, key, arr)
        object.__setattr__(self, "t_s", _as_vector("t_s", self.t_s, len(MODES)))
        object.__setattr__(self, "comfort_band", _as_vector("comfort_band", self.comfort_band, n))
        for key in ("a", "b", "c"):
            val = float(getattr(self, key))
            if not val > 0:
                raise ModelError(f"energy coefficient {key} must be positive, got {val}")
            object.__setattr__(self, key, val)
        if np.any(self.comfort_band < 0):
            raise ModelError("comfort_band must be nonnegative")
        if int(self.dt_steps) < 1:
            raise ModelError("dt_steps must be at least 1")
        object.__setattr__(self, "dt_steps", int(self.dt_steps))

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def spectral_radius(self, mode: int) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A[mode - 1]))))


@dataclass(frozen=True)
class HvacConfiguration:
    F_min: np.ndarray
    F_max: np.ndarray
    T_d: np.ndarray
    mode: int
    K_F: float
    K_R: float
    R_max: np.ndarray

    def __post_init__(self):
        F_min = _as_vector("F_min", self.F_min)
        n = F_min.shape[0]
        F_max = _as_vector("F_max", self.F_max, n)
        object.__setattr__(self, "F_min", F_min)
        object.__setattr__(self, "F_max", F_max)
        object.__setattr__(self, "T_d", _as_vector("T_d", self.T_d, n))
        object.__setattr__(self, "R_max", _as_vector("R_max", self.R_max, n))
        if int(self.mode) not in MODES:
            raise ModelError(f"mode must be one of {MODES}, got {self.mode}")
        object.__setattr__(self, "mode", int(self.mode))
        if np.any(F_min < 0) or np.any(F_min > F_max):
            raise ModelError("airflow bounds must satisfy 0 <= F_min <= F_max")
        if np.any(self.R_max < 0):
            raise ModelError("R_max must be nonnegative")
        for key in ("K_F", "K_R"):
            val = float(getattr(self, key))
            if val < 0:
                raise ModelError(f"{key} must be nonnegative")
            object.__setattr__(self, key, val)

    @property
    def n(self) -> int:
        return self.F_min.shape[0]


@dataclass(frozen=True)
class DisturbanceTrace:
    """Outdoor temperature ``o`` (length K) and zone loads ``Q`` (K x n)."""

    o: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        o = _as_vector("o", self.o)
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != o.shape[0]:
            raise ModelError(f"Q must have shape (K={o.shape[0]}, n), got {Q.shape}")
        object.__setattr__(self, "o", o)
        object.__setattr__(self, "Q", Q)

    @property
    def K(self) -> int:
        return self.o.shape[0]


@dataclass(frozen=True)
class SimulationOutput:
    S: float
    E: float
    trace: np.ndarray = field(repr=False)


def control_law(T, cfg: HvacConfiguration):
    """Saturated proportional airflow and reheat for zone temperatures ``T``."""
    T = np.asarray(T, dtype=float)
    if T.shape[-1] != cfg.n:
        raise ModelError(f"temperature vector has {T.shape[-1]} zones, configuration has {cfg.n}")
    return _control(T, cfg.F_min, cfg.F_max, cfg.T_d, cfg.K_F, cfg.K_R, cfg.R_max)


def _control(T, F_min, F_max, T_d, K_F, K_R, R_max):
    F = np.minimum(np.maximum(F_min + K_F * (T - T_d), F_min), F_max)
    R = np.minimum(np.maximum(K_R * (T_d - T), 0.0), R_max)
    return F, R


def _check_model_cfg(model: BuildingModel, cfg: HvacConfiguration):
    if cfg.n != model.n:
        raise ModelError(f"configuration has {cfg.n} zones, model has {model.n}")


def step(T_k, cfg: HvacConfiguration, model: BuildingModel, Q_k) -> np.ndarray:
    """One application of the mode-``cfg.mode`` affine update."""
    _check_model_cfg(model, cfg)
    T_k = _as_vector("T_k", T_k, model.n)
    Q_k = _as_vector("Q_k", Q_k, model.n)
    F, R = control_law(T_k, cfg)
    m = cfg.mode - 1
    return _affine(model.A[m], model.B[m], model.C[m], T_k, F, R, Q_k)


def _affine(A, B, C, T, F, R, Q):
    return _matvec(A, T) + _matvec(B, F) + _matvec(C, R) + Q


def energy_step(F_k, R_k, mode: int, o_k, model: BuildingModel):
    F_k = np.asarray(F_k, dtype=float)
    R_k = np.asarray(R_k, dtype=float)
    if int(mode) not in MODES:
        raise ModelError(f"mode must be one of {MODES}, got {mode}")
    return _energy(_lsum(F_k), _lsum(R_k), model.t_s[int(mode) - 1], o_k, model.a, model.b, model.c)


def _energy(sum_F, sum_R, t_s, o, a, b, c):
    return a * sum_F**3 + b * (t_s - o) * sum_F + c * sum_R


def satisfaction(trace, T_d, comfort_band) -> float:
    """Satisfaction of a ``(K, n)`` temperature trace."""
    trace = np.asarray(trace, dtype=float)
    if trace.ndim != 2 or trace.shape[0] == 0 or trace.shape[1] == 0:
        raise ValueError(f"trace must be a nonempty (K, n) array, got shape {trace.shape}")
    K, n = trace.shape
    T_d = _as_vector("T_d", T_d, n)
    band = _as_vector("comfort_band", comfort_band, n)
    total = 0.0
    for k in range(K):
        total = total + _lsum(np.maximum(np.abs(trace[k] - T_d) - band, 0.0))
    return float(1.0 - total / (n * K))


def simulate_batch(model: BuildingModel, F_min, F_max, T_d, mode, K_F, K_R, R_max, o, Q, T0,
                   keep_trace: bool = False):
    """Simulate ``N`` periods at once.

    Array arguments carry a leading sample axis: ``F_min``/``F_max``/``T_d``/
    ``R_max``/``T0`` are ``(N, n)``, ``mode`` is ``(N,)``, ``o`` is ``(N, K)``
    and ``Q`` is ``(N, K, n)``.  ``K_F`` and ``K_R`` may be scalars or ``(N,)``.

    Returns ``(S, E, diverged_at, trace)`` where ``diverged_at`` is -1 for
    samples that stayed finite and otherwise the first step index whose
    state was non-finite.  Diverged samples have NaN ``S``/``E``.
    """
    mode = np.asarray(mode, dtype=int)
    idx = mode - 1
    A, B, C = model.A[idx], model.B[idx], model.C[idx]
    t_s = model.t_s[idx]
    K_F = np.asarray(K_F, dtype=float)[..., None] if np.ndim(K_F) else float(K_F)
    K_R = np.asarray(K_R, dtype=float)[..., None] if np.ndim(K_R) else float(K_R)
    N, K = o.shape
    n = model.n
    T = np.array(T0, dtype=float)
    energy = np.zeros(N)
    excess = np.zeros(N)
    diverged_at = np.full(N, -1, dtype=int)
    trace = np.empty((N, K, n)) if keep_trace else None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            F, R = _control(T, F_min, F_max, T_d, K_F, K_R, R_max)
            energy = energy + _energy(_lsum(F), _lsum(R), t_s, o[:, k], model.a, model.b, model.c)
            T = _affine(A, B, C, T, F, R, Q[:, k])
            bad = ~np.all(np.isfinite(T), axis=-1) & (diverged_at < 0)
            diverged_at[bad] = k
            excess = excess + _lsum(np.maximum(np.abs(T - T_d) - model.comfort_band, 0.0))
            if keep_trace:
                trace[:, k] = T
    S = 1.0 - excess / (n * K)
    failed = diverged_at >= 0
    S[failed] = np.nan
    energy[failed] = np.nan
    return S, energy, diverged_at, trace


def simulate_period(model: BuildingModel, cfg: HvacConfiguration, disturbance: DisturbanceTrace,
                    T_0=None) -> SimulationOutput:
    """Run one evaluation period and return its (S, E) operating point.

    The trace holds the states T[1..K] produced during the period; those are
    the temperatures scored by the satisfaction index.  ``T_0`` defaults to
    the setpoint ``cfg.T_d``.
    """
    _check_model_cfg(model, cfg)
    if disturbance.Q.shape[1] != model.n:
        raise ModelError(f"disturbance has {disturbance.Q.shape[1]} zones, model has {model.n}")
    if disturbance.K < 1:
        raise ModelError("disturbance must have at least one step")
    T0 = cfg.T_d if T_0 is None else _as_vector("T_0", T_0, model.n)
    S, E, diverged_at, trace = simulate_batch(
        model, cfg.F_min[None], cfg.F_max[None], cfg.T_d[None], np.array([cfg.mode]),
        cfg.K_F, cfg.K_R, cfg.R_max[None], disturbance.o[None], disturbance.Q[None], T0[None],
        keep_trace=True,
    )
    if diverged_at[0] >= 0:
        raise SimulationDiverged(int(diverged_at[0]))
    return SimulationOutput(S=float(S[0]), E=float(E[0]), trace=trace[0])

import dataclasses
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hvac_incentives.dynamics import DisturbanceTrace, HvacConfiguration, simulate_period
from hvac_incentives.errors import DegenerateSurface, DomainError, EmptyDensity, ModelShapeError, SamplingFailed
from hvac_incentives.serialization import (
    decode_mask_rle,
    dumps,
    encode_mask_rle,
    static_model_from_dict,
    static_model_to_dict,
)
from hvac_incentives.static_model import (
    Grid,
    KeyPoints,
    OperatingPoint,
    StaticModel,
    bin_counts,
    build_static_model,
    canonical_model,
    estimate_density,
    extract_feasible,
    extract_key_points,
    key_point_violations,
    monte_carlo_cloud,
    strict_local_minima,
    work_surface,
)

GOLDEN_BBOX = (0.1152683577187591, 0.9965624916682074, 10.954782552710498, 124.72181534446125)


def components(mask):
    """Sizes of 4-connected components by breadth-first search."""
    seen = np.zeros_like(mask, dtype=bool)
    sizes = []
    for start in zip(*np.nonzero(mask)):
        if seen[start]:
            continue
        seen[start] = True
        queue, size = deque([start]), 0
        while queue:
            i, j = queue.popleft()
            size += 1
            for ni, nj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                if 0 <= ni < mask.shape[0] and 0 <= nj < mask.shape[1] and mask[ni, nj] and not seen[ni, nj]:
                    seen[ni, nj] = True
                    queue.append((ni, nj))
        sizes.append(size)
    return sizes


def unit_grid(n=50):
    return Grid(0.0, 1.0, n, 0.0, 1.0, n)


# --- Monte Carlo ----------------------------------------------------------

def test_point_mass_spec_equals_single_simulation(building, sample_spec):
    K, n = sample_spec.K, sample_spec.n
    spec = dataclasses.replace(sample_spec, F_min_range=(0.7, 0.7), F_max_range=(1.6, 1.6), mode_range=(2, 2),
                               o_range=(6.0, 6.0), Q_range=(8.5, 8.5), N=1)
    cloud = monte_carlo_cloud(building, spec)
    cfg = HvacConfiguration(F_min=[0.7] * n, F_max=[1.6] * n, T_d=spec.T_d, mode=2, K_F=spec.K_F,
                            K_R=spec.K_R, R_max=spec.R_max)
    out = simulate_period(building, cfg, DisturbanceTrace(o=np.full(K, 6.0), Q=np.full((K, n), 8.5)))
    assert (cloud.S[0], cloud.E[0]) == (out.S, out.E)


def test_same_seed_same_cloud(building, sample_spec, mc_cloud):
    spec = dataclasses.replace(sample_spec, N=700)
    a, b = monte_carlo_cloud(building, spec), monte_carlo_cloud(building, spec, workers=3, chunk_size=97)
    assert np.array_equal(a.S, b.S) and np.array_equal(a.E, b.E)
    # a prefix of the full run, since every sample owns its own stream
    assert np.array_equal(a.S, mc_cloud.S[:700])


def test_different_seed_changes_cloud(building, sample_spec):
    a = monte_carlo_cloud(building, dataclasses.replace(sample_spec, N=50))
    b = monte_carlo_cloud(building, dataclasses.replace(sample_spec, N=50, seed=7))
    assert not np.array_equal(a.E, b.E)


def test_golden_bounding_box(mc_cloud):
    assert len(mc_cloud) == 10_000 and mc_cloud.n_diverged == 0
    assert mc_cloud.bounding_box() == GOLDEN_BBOX


def test_mostly_diverging_model_fails_sampling(building, sample_spec):
    wild = dataclasses.replace(building, A=building.A * 1e10)
    with pytest.raises(SamplingFailed):
        monte_carlo_cloud(wild, dataclasses.replace(sample_spec, N=20))


def test_mean_energy_nonincreasing_in_outdoor_temperature(building, sample_spec):
    # the chiller term is b*(t_s - o)*sum(F), so warmer outdoor air lowers E
    cool = monte_carlo_cloud(building, dataclasses.replace(sample_spec, N=5000, o_range=(0.0, 5.0)))
    warm = monte_carlo_cloud(building, dataclasses.replace(sample_spec, N=5000, o_range=(5.0, 10.0)))
    se = np.sqrt(cool.E.var() / len(cool) + warm.E.var() / len(warm))
    assert warm.E.mean() <= cool.E.mean() + 3 * se


# --- density --------------------------------------------------------------

def test_single_point_density_peaks_at_its_cell():
    g = unit_grid()
    d = estimate_density([0.31], [0.62], g)
    i, j, _ = g.cell_of(0.31, 0.62)
    assert np.unravel_index(np.argmax(d), d.shape) == (i, j)


def test_density_integrates_to_one():
    rng = np.random.default_rng(0)
    g = unit_grid()
    d = estimate_density(rng.uniform(0.2, 0.8, 300), rng.uniform(0.2, 0.8, 300), g)
    assert abs(d.sum() * g.cell_area - 1.0) < 1e-6 and np.all(d >= 0)


def test_two_equal_clouds_have_equal_mass():
    rng = np.random.default_rng(1)
    g = unit_grid(80)
    S = np.concatenate([rng.normal(0.25, 0.03, 400), rng.normal(0.75, 0.03, 400)])
    E = np.concatenate([rng.normal(0.3, 0.03, 400), rng.normal(0.7, 0.03, 400)])
    counts = bin_counts(S, E, g)
    half = g.S < 0.5
    assert counts[half].sum() == counts[~half].sum() == 400
    d = estimate_density(S, E, g)
    left, right = d[half].sum() * g.cell_area, d[~half].sum() * g.cell_area
    assert abs(left - right) <= 0.02 * max(left, right)


def test_duplicated_points_give_identical_density():
    rng = np.random.default_rng(2)
    g = unit_grid()
    S, E = rng.uniform(0, 1, 100), rng.uniform(0, 1, 100)
    a = estimate_density(S, E, g)
    b = estimate_density(np.tile(S, 2), np.tile(E, 2), g)
    assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_points_outside_grid_give_empty_density():
    with pytest.raises(EmptyDensity):
        estimate_density([5.0], [5.0], unit_grid())


def test_density_rejects_bad_bandwidth():
    with pytest.raises(ValueError):
        estimate_density([0.5], [0.5], unit_grid(), bandwidth=0)


# --- work surface ---------------------------------------------------------

def _bumpy(n=20, seed=3):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.1, 1.0, (n, n)), np.ones((n, n), dtype=bool)


def test_work_zero_at_density_peak_and_one_at_trough():
    d, f = _bumpy()
    d[4, 5], d[13, 2] = 5.0, 0.01
    W = work_surface(d, f)
    assert W[4, 5] == 0.0 and W[13, 2] == 1.0
    assert np.all((W >= 0) & (W <= 1))


def test_work_is_undefined_off_region():
    d, f = _bumpy()
    f[:3] = False
    assert np.all(np.isnan(work_surface(d, f)[:3]))


def test_constant_density_is_degenerate():
    with pytest.raises(DegenerateSurface):
        work_surface(np.full((6, 6), 2.0), np.ones((6, 6), dtype=bool))
    assert issubclass(DegenerateSurface, ModelShapeError)


# --- feasible mask --------------------------------------------------------

def test_single_point_no_dilation_is_one_cell():
    m = extract_feasible([0.5], [0.5], unit_grid(), dilation=0)
    assert m.sum() == 1


def test_single_point_dilation_one_is_plus_shape():
    g = unit_grid()
    m = extract_feasible([0.5], [0.5], g, dilation=1)
    i, j, _ = g.cell_of(0.5, 0.5)
    expected = {(i, j), (i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)}
    assert set(zip(*np.nonzero(m))) == expected


def test_two_clusters_keep_only_the_larger():
    rng = np.random.default_rng(4)
    g = unit_grid(60)
    S = np.concatenate([rng.uniform(0.1, 0.3, 200), rng.uniform(0.7, 0.8, 40)])
    E = np.concatenate([rng.uniform(0.1, 0.3, 200), rng.uniform(0.7, 0.8, 40)])
    raw = extract_feasible(S, E, g, dilation=2)
    assert len(components(raw)) == 1
    from scipy import ndimage
    dilated = ndimage.binary_dilation(bin_counts(S, E, g) > 0, ndimage.generate_binary_structure(2, 1), 2)
    sizes = components(dilated)
    assert len(sizes) >= 2 and raw.sum() == max(sizes)
    assert raw[g.cell_of(0.2, 0.2)[:2]] and not raw[g.cell_of(0.75, 0.75)[:2]]


# --- key points -----------------------------------------------------------

def test_hand_built_pits():
    work = np.array([
        [0.9, 0.8, 0.9, 0.9, 0.9],
        [0.8, 0.1, 0.8, 0.9, 0.9],
        [0.9, 0.8, 0.7, 0.8, 0.9],
        [0.9, 0.9, 0.8, 0.1, 0.8],
        [0.9, 0.9, 0.9, 0.8, 0.9],
    ])
    feasible = np.ones((5, 5), dtype=bool)
    brute = set()
    for i in range(5):
        for j in range(5):
            nbrs = [work[a, b] for a in range(i - 1, i + 2) for b in range(j - 1, j + 2)
                    if (a, b) != (i, j) and 0 <= a < 5 and 0 <= b < 5]
            if all(work[i, j] < v for v in nbrs):
                brute.add((i, j))
    assert brute == {(1, 1), (3, 3)}
    assert set(zip(*np.nonzero(strict_local_minima(work, feasible)))) == brute


def test_fewer_than_two_minima_is_a_shape_error():
    g = unit_grid(20)
    ii, jj = np.indices(g.shape)
    work = np.hypot(ii - 10, jj - 10) / 15
    static = StaticModel(grid=g, feasible=np.ones(g.shape, dtype=bool), work=work / work.max())
    with pytest.raises(ModelShapeError, match="two strict local minima"):
        extract_key_points(static)


def test_monte_carlo_model_satisfies_invariants(mc_static):
    kp = mc_static.key_points
    assert key_point_violations(mc_static, kp) == []
    assert kp.alpha.S < kp.omega.S and kp.alpha.E < kp.omega.E and kp.E_opt <= kp.E_3
    assert mc_static.work_at(kp.alpha) == pytest.approx(0.0, abs=0.02)
    assert components(mc_static.feasible) == [int(mc_static.feasible.sum())]


def test_violations_name_the_clause(mc_static):
    kp = mc_static.key_points
    swapped = dataclasses.replace(kp, alpha=kp.omega, omega=kp.alpha)
    assert any("minima ordering" in p for p in key_point_violations(mc_static, swapped))
    inner = dataclasses.replace(kp, S_max=kp.alpha.S, E_opt=kp.alpha.E)
    assert any("(S_max, E_opt)" in p for p in key_point_violations(mc_static, inner))


def test_too_few_samples_is_a_shape_error(building, sample_spec):
    cloud = monte_carlo_cloud(building, dataclasses.replace(sample_spec, N=1))
    with pytest.raises(ModelShapeError):
        build_static_model(cloud.S, cloud.E)


# --- canonical model ------------------------------------------------------

def test_canonical_minima_have_zero_work(canonical):
    kp = canonical.key_points
    assert canonical.work_at(kp.alpha) == 0.0 and canonical.work_at(kp.omega) == 0.0
    assert canonical.membership(kp.alpha) and canonical.membership(kp.omega)


def test_canonical_right_edge(canonical):
    kp, g = canonical.key_points, canonical.grid
    assert canonical.membership(OperatingPoint(kp.S_max, kp.E_opt))
    assert not canonical.membership(OperatingPoint(kp.S_max + g.dS, kp.E_opt))
    assert not canonical.membership(OperatingPoint(kp.S_max + 1e-9 + g.dS / 2, (kp.E_opt + kp.E_3) / 2))


def test_canonical_round_trip(canonical, data_dir):
    from hvac_incentives.serialization import load_key_points
    requested = load_key_points(data_dir / "canonical_key_points.json")
    got, g = extract_key_points(canonical), canonical.grid
    assert got == canonical.key_points
    for name in ("S_min", "S_max", "S_4"):
        assert abs(getattr(got, name) - getattr(requested, name)) <= g.dS
    for name in ("E_min", "E_max", "E_opt", "E_3"):
        assert abs(getattr(got, name) - getattr(requested, name)) <= g.dE
    for name in ("alpha", "omega"):
        assert abs(getattr(got, name).S - getattr(requested, name).S) <= g.dS
        assert abs(getattr(got, name).E - getattr(requested, name).E) <= g.dE


@st.composite
def key_points(draw):
    S_min = draw(st.floats(0.0, 0.5))
    S_max = S_min + draw(st.floats(0.3, 1.0))
    E_min = draw(st.floats(0.0, 50.0))
    E_max = E_min + draw(st.floats(20.0, 100.0))
    u = sorted(draw(st.lists(st.floats(0.15, 0.85), min_size=2, max_size=2)))
    E_opt, E_3 = E_min + u[0] * (E_max - E_min), E_min + (u[1] + 0.1) * (E_max - E_min)
    E_3 = min(E_3, E_min + 0.9 * (E_max - E_min))
    S_4 = S_min + draw(st.floats(0.5, 0.9)) * (S_max - S_min)
    a_s, a_e = draw(st.floats(0.30, 0.45)), draw(st.floats(0.30, 0.40))
    alpha = OperatingPoint(S_min + a_s * (S_max - S_min), E_min + a_e * (E_max - E_min))
    omega = OperatingPoint(alpha.S + 0.12 * (S_max - S_min), alpha.E + 0.12 * (E_max - E_min))
    return KeyPoints(alpha, omega, S_min, S_max, S_4, E_min, E_max, E_opt, E_3)


@settings(max_examples=25, deadline=None)
@given(key_points())
def test_canonical_round_trip_random(kp):
    static = canonical_model(kp, resolution=(120, 120))
    assert extract_key_points(static) == static.key_points
    g = static.grid
    assert abs(static.key_points.alpha.S - kp.alpha.S) <= g.dS
    assert abs(static.key_points.E_3 - kp.E_3) <= g.dE


def test_canonical_rejects_inconsistent_points(canonical):
    kp = canonical.key_points
    with pytest.raises(ValueError):
        canonical_model(dataclasses.replace(kp, alpha=kp.omega, omega=kp.alpha))
    with pytest.raises(ValueError):
        canonical_model(dataclasses.replace(kp, E_opt=kp.E_max + 1))


# --- membership and interpolation ----------------------------------------

def test_outside_grid_is_not_a_member(canonical):
    g = canonical.grid
    assert not canonical.membership(OperatingPoint(g.s_hi + 10 * g.dS, g.e_lo))
    with pytest.raises(DomainError):
        canonical.work_at(OperatingPoint(g.s_hi + 10 * g.dS, g.e_lo))


def test_work_at_cell_centres(mc_static):
    rng = np.random.default_rng(6)
    ii, jj = mc_static.cells()
    for k in rng.integers(0, len(ii), 200):
        p = OperatingPoint(mc_static.grid.s_at(ii[k]), mc_static.grid.e_at(jj[k]))
        assert mc_static.work_at(p) == pytest.approx(mc_static.work[ii[k], jj[k]], abs=1e-12)


def test_work_at_lipschitz(canonical):
    g, W, f = canonical.grid, canonical.work, canonical.feasible
    with np.errstate(invalid="ignore"):
        Ls = np.nanmax(np.abs(np.diff(W, axis=0))) / g.dS
        Le = np.nanmax(np.abs(np.diff(W, axis=1))) / g.dE
    interior = f.copy()
    for di in (-2, -1, 0, 1, 2):
        for dj in (-2, -1, 0, 1, 2):
            interior &= np.roll(np.roll(f, di, 0), dj, 1)
    ii, jj = np.nonzero(interior)
    rng = np.random.default_rng(7)
    for k in rng.integers(0, len(ii), 300):
        p = OperatingPoint(g.s_at(ii[k]) + rng.uniform(-0.5, 0.5) * g.dS, g.e_at(jj[k]) + rng.uniform(-0.5, 0.5) * g.dE)
        dS, dE = rng.uniform(-0.5, 0.5) * g.dS, rng.uniform(-0.5, 0.5) * g.dE
        q = OperatingPoint(p.S + dS, p.E + dE)
        assert abs(canonical.work_at(p) - canonical.work_at(q)) <= Ls * abs(dS) + Le * abs(dE) + 1e-12


# --- serialization --------------------------------------------------------

def test_static_model_json_round_trip_is_byte_identical(mc_static, canonical):
    for static in (mc_static, canonical):
        text = dumps(static_model_to_dict(static))
        back = static_model_from_dict(__import__("json").loads(text))
        assert dumps(static_model_to_dict(back)) == text
        assert np.array_equal(back.feasible, static.feasible)
        assert back.key_points == static.key_points


@given(st.lists(st.lists(st.booleans(), min_size=7, max_size=7), min_size=1, max_size=6))
def test_mask_rle_round_trip(rows):
    mask = np.array(rows, dtype=bool)
    assert np.array_equal(decode_mask_rle(encode_mask_rle(mask), mask.shape), mask)

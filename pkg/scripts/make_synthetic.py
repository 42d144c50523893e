"""Regenerate the synthetic instance files shipped in ``src/hvac_incentives/data``.

The building constants are not taken from any real building.  They were
picked by a random search over stable 4-zone models (see
``scripts/search_synthetic.py``) for a Monte Carlo cloud whose static model
shows two isolated work minima and a clean right boundary.  The canonical
key points and calibration were picked so that the bonus savings table shows
the zero-change / negative-savings columns at small payouts and positive
savings at large payouts.

Usage:  python3 scripts/make_synthetic.py [--out DIR]
"""

from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np

from hvac_incentives.dynamics import BuildingModel, DisturbanceTrace, HvacConfiguration
from hvac_incentives.serialization import (
    SCHEMA_VERSION,
    building_model_to_dict,
    configuration_to_dict,
    disturbance_to_dict,
    sample_spec_to_dict,
    write_json,
)
from hvac_incentives.static_model import SampleSpec

N_ZONES = 4
STEPS = 48  # half-hour steps over one day
COUPLING = 0.02
SETPOINT = 22.0

# Result of the structure search (entry 26 of its passing set).
PARAMS = {
    "r": 0.5721804350360915,
    "beta": [0.07435385437298161, 0.36037594886264845, 0.5863134625918333],
    "gam": [0.0, 0.4105462386020648, 1.4020056095625755],
    "ts": [12.33192430324291, 15.986827827791844, 20.263198448060646],
    "a": 0.000766066327143674,
    "b": 0.020153227847164567,
    "c": 0.1912274259276449,
    "band": 0.3,
    "xoff": 0.9484589813650371,
    "wq": 0.3370640367003055,
    "fmin": 1.954666394171686,
    "fmax": 2.1609199673638235,
    "KF": 1.123086458593662,
    "KR": 0.7474758252853191,
    "Rmax": 2.335354512245889,
}

CANONICAL_KEY_POINTS = {
    "alpha": [0.45, 37.0], "omega": [0.59, 47.0],
    "S_min": 0.4, "S_max": 1.0, "S_4": 0.52,
    "E_min": 10.0, "E_max": 77.0, "E_opt": 32.0, "E_3": 69.0,
}

CALIBRATION = {
    "actual": [0.59, 47.0],
    "salary": 800.0,
    "elasticity": "work",
    "payouts": [0.0, 50.0, 100.0, 150.0, 200.0],
    "prices": [20.0, 60.0, 100.0],
}


def building(p=PARAMS) -> BuildingModel:
    n = N_ZONES
    eye, off = np.eye(n), np.ones((n, n)) - np.eye(n)
    leak = 1.0 - p["r"] - (n - 1) * COUPLING
    A = np.stack([p["r"] * eye + COUPLING * off] * 3)
    B = np.stack([-p["beta"][m] * leak * eye for m in range(3)])
    C = np.stack([p["gam"][m] * leak * eye for m in range(3)])
    return BuildingModel(A=A, B=B, C=C, t_s=p["ts"], a=p["a"], b=p["b"], c=p["c"],
                         comfort_band=np.full(n, p["band"]), dt_steps=STEPS,
                         name="synthetic-4zone (not a real building)")


def load_centre(p=PARAMS) -> tuple[float, float]:
    leak = 1.0 - p["r"] - (N_ZONES - 1) * COUPLING
    centre = leak * (SETPOINT + p["band"] + p["xoff"])
    return centre, p["wq"] * leak


def sample_spec(p=PARAMS) -> SampleSpec:
    centre, half = load_centre(p)
    return SampleSpec(
        F_min_range=(0.0, p["fmin"]), F_max_range=(0.0, p["fmax"]), mode_range=(1, 3),
        o_range=(0.0, 10.0), Q_range=(centre - half, centre + half),
        T_d=(SETPOINT,) * N_ZONES, K_F=p["KF"], K_R=p["KR"], R_max=(p["Rmax"],) * N_ZONES,
        o_profile=(0.0,) * STEPS, q_profile=(0.0,) * STEPS,
    )


def example_configuration(p=PARAMS) -> HvacConfiguration:
    return HvacConfiguration(F_min=[0.5] * N_ZONES, F_max=[1.5] * N_ZONES, T_d=[SETPOINT] * N_ZONES,
                             mode=2, K_F=p["KF"], K_R=p["KR"], R_max=[p["Rmax"]] * N_ZONES)


def example_disturbance(p=PARAMS) -> DisturbanceTrace:
    centre, _ = load_centre(p)
    k = np.arange(STEPS)
    o = 5.0 + 4.0 * np.sin(2.0 * math.pi * (k - 12) / STEPS)
    Q = np.full((STEPS, N_ZONES), centre)
    return DisturbanceTrace(o=np.round(o, 6), Q=Q)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "src" / "hvac_incentives" / "data")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    write_json(args.out / "building_model.json", building_model_to_dict(building()))
    write_json(args.out / "sample_spec.json", sample_spec_to_dict(sample_spec()))
    write_json(args.out / "configuration.json", configuration_to_dict(example_configuration()))
    write_json(args.out / "disturbance.json", disturbance_to_dict(example_disturbance()))
    write_json(args.out / "canonical_key_points.json",
               {"schema_version": SCHEMA_VERSION, "kind": "key_points", **CANONICAL_KEY_POINTS})
    write_json(args.out / "calibration.json",
               {"schema_version": SCHEMA_VERSION, "kind": "calibration", **CALIBRATION})
    print(f"wrote synthetic instance files to {args.out}")


if __name__ == "__main__":
    main()

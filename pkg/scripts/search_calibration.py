"""Random search for canonical key points whose bonus savings table has the target sign pattern.

The pattern: the zero-payout row is all zeros; some small payout leaves the
operating point unchanged while still paying out (negative savings at every
price); the largest payout lowers energy, does not lower satisfaction and
saves money at the highest price.  Calibration uses the work-based
elasticity variant with the manager observed at omega.

Usage:  python3 scripts/search_calibration.py --rng 1 --seconds 240
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from hvac_incentives.agents import calibrate, savings_table
from hvac_incentives.errors import HvacIncentiveError
from hvac_incentives.static_model import KeyPoints, canonical_model

PAYOUTS = (0.0, 50.0, 100.0, 150.0, 200.0)
PRICES = (20.0, 60.0, 100.0)


def has_pattern(rows) -> bool:
    first, last = rows[0], rows[-1]
    zero = first.delta_E == 0 and first.delta_S == 0 and all(s == 0 for s in first.savings)
    idle = any(r.delta_E == 0 and r.delta_S == 0 and all(s < 0 for s in r.savings) for r in rows[1:-1])
    works = last.delta_E < 0 and last.delta_S >= 0 and last.savings[-1] > 0
    return zero and idle and works


def random_key_points(rng: np.random.Generator) -> dict:
    S_min = rng.uniform(0.3, 0.6)
    S_4 = rng.uniform(S_min + 0.1, 0.9)
    E_min = rng.uniform(10, 30)
    E_opt = E_min + rng.uniform(5, 30)
    E_3 = E_opt + rng.uniform(5, 40)
    E_max = E_3 + rng.uniform(5, 30)
    so, eo = rng.uniform(S_4, 0.95), rng.uniform(E_opt + 3, E_3 + 5)
    sa, ea = rng.uniform(S_min + 0.02, so - 0.05), rng.uniform(E_min + 1, eo - 2)
    return dict(alpha=[sa, ea], omega=[so, eo], S_min=S_min, S_max=1.0, S_4=S_4,
                E_min=E_min, E_max=E_max, E_opt=E_opt, E_3=E_3)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rng", type=int, default=1)
    ap.add_argument("--seconds", type=float, default=240.0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.rng)
    t0 = time.time()
    while time.time() - t0 < args.seconds:
        kpd = random_key_points(rng)
        try:
            static = canonical_model(KeyPoints.from_dict(kpd))
            cal = calibrate(static, static.key_points.omega, 1.0, use_work=True)
        except (HvacIncentiveError, ValueError):
            continue
        for salary in (25, 50, 100, 200, 400, 800):
            try:
                rows = savings_table(static, cal.lam, PAYOUTS, PRICES, cal.mu_elast / salary)
            except HvacIncentiveError:
                break
            if has_pattern(rows):
                print(json.dumps({"key_points": kpd, "salary": salary}), flush=True)


if __name__ == "__main__":
    main()

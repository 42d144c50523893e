"""Random search for synthetic building constants with a well-formed static model.

Each candidate is sampled, simulated at N=10,000 and turned into a static
model; candidates whose key points pass every structural check are printed
as JSON lines.  ``--seeds`` re-runs passing candidates under other Monte
Carlo seeds to rank them by robustness.

Usage:  python3 scripts/search_synthetic.py --rng 1 --seconds 600 > passing.jsonl
        python3 scripts/search_synthetic.py --robustness passing.jsonl --seeds 1 2 3 4 5
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

import numpy as np

sys.path.insert(0, __import__("os").path.dirname(__file__))
from make_synthetic import building, sample_spec  # noqa: E402

from hvac_incentives.errors import HvacIncentiveError  # noqa: E402
from hvac_incentives.static_model import build_static_model, monte_carlo_cloud  # noqa: E402


def random_params(rng: np.random.Generator) -> dict:
    ts1 = rng.uniform(10, 14)
    ts2 = ts1 + rng.uniform(1, 4)
    ts3 = ts2 + rng.uniform(1, 6)
    return dict(
        r=rng.uniform(0.4, 0.8),
        beta=[rng.choice([0.0, rng.uniform(0, 0.2)]), rng.uniform(0.2, 1.0), rng.uniform(0.5, 3.0)],
        gam=[0.0, rng.uniform(0.2, 1.0), rng.uniform(0.5, 2.0)], ts=[ts1, ts2, ts3],
        a=rng.uniform(1e-4, 1e-3), b=rng.uniform(0.02, 0.1), c=rng.uniform(0.02, 0.2), band=0.3,
        xoff=rng.uniform(0.4, 1.0), wq=rng.uniform(0.05, 0.5), fmin=rng.uniform(0.5, 2.0),
        fmax=rng.uniform(2.0, 5.0), KF=rng.uniform(0.5, 3), KR=rng.uniform(0.5, 3), Rmax=rng.uniform(0.5, 3),
    )


def passes(params: dict, seed: int | None = None) -> bool:
    spec = sample_spec(params)
    if seed is not None:
        spec = dataclasses.replace(spec, seed=seed)
    try:
        cloud = monte_carlo_cloud(building(params), spec)
        build_static_model(cloud.S, cloud.E)
    except HvacIncentiveError:
        return False
    return True


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rng", type=int, default=1)
    ap.add_argument("--seconds", type=float, default=600.0)
    ap.add_argument("--robustness", type=str, default=None)
    ap.add_argument("--seeds", type=int, nargs="*", default=[1, 2, 3, 4, 5])
    args = ap.parse_args(argv)
    if args.robustness:
        with open(args.robustness) as fh:
            cands = [json.loads(line) for line in fh if line.strip()]
        scores = sorted(((sum(passes(q, s) for s in args.seeds), k) for k, q in enumerate(cands)), reverse=True)
        for score, k in scores:
            print(f"{k}\t{score}/{len(args.seeds)}")
        return
    rng = np.random.default_rng(args.rng)
    t0 = time.time()
    while time.time() - t0 < args.seconds:
        q = random_params(rng)
        if passes(q):
            print(json.dumps(q), flush=True)


if __name__ == "__main__":
    main()

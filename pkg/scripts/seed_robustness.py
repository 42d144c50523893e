"""Extract the static model of the shipped building for many seeds and tally invariant failures.

Usage:  python3 scripts/seed_robustness.py [--seeds 20] [--n 10000]
"""

from __future__ import annotations

import argparse
import collections
import dataclasses

from hvac_incentives import data_path
from hvac_incentives.errors import ModelShapeError
from hvac_incentives.serialization import load_building_model, load_sample_spec
from hvac_incentives.static_model import build_static_model, monte_carlo_cloud


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--n", type=int, default=10_000)
    args = ap.parse_args(argv)
    model = load_building_model(data_path("building_model.json"))
    base = load_sample_spec(data_path("sample_spec.json"))
    clauses = collections.Counter()
    passed = 0
    for seed in [base.seed, *range(1, args.seeds + 1)]:
        cloud = monte_carlo_cloud(model, dataclasses.replace(base, seed=seed, N=args.n))
        try:
            build_static_model(cloud.S, cloud.E)
            passed += 1
            print(f"seed {seed}: ok")
        except ModelShapeError as exc:
            for clause in str(exc).split("; "):
                clauses[clause] += 1
            print(f"seed {seed}: {exc}")
    print(f"\n{passed}/{args.seeds + 1} seeds pass at N={args.n}")
    for clause, count in clauses.most_common():
        print(f"{count:4d}  {clause}")


if __name__ == "__main__":
    main()

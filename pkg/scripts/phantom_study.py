"""Accuracy study: measure synthetic speckled phantoms against ground truth.

Runs the full pipeline over a grid of band thicknesses and orientations and
prints per-thickness error statistics. The defaults reproduce the shipped
acceptance protocol (20 runs per thickness, 0.1 mm/px, 4-look speckle).

Usage:
    python scripts/phantom_study.py
    python scripts/phantom_study.py --runs-per-thickness 50 --looks 2.0
"""

import argparse
import sys
import time

import numpy as np

from ntscan.image import Roi
from ntscan.phantom import PhantomSpec, generate_phantom
from ntscan.pipeline import PipelineConfig, run_pipeline

ORIENTATIONS = [0.0, 30.0, 60.0]


def run_study(thicknesses, runs_per, looks, tolerance_mm):
    cfg = PipelineConfig()
    roi = Roi(16, 16, 64, 64)
    rows = []
    seed = 0
    start = time.perf_counter()
    for thickness in thicknesses:
        errors = []
        misses = 0
        for rep in range(runs_per):
            spec = PhantomSpec(
                width=96,
                height=96,
                band_thickness_mm=thickness,
                band_orientation_deg=ORIENTATIONS[rep % len(ORIENTATIONS)],
                speckle_looks=looks,
                seed=seed,
            )
            seed += 1
            result = run_pipeline(generate_phantom(spec).image, roi, cfg)
            if result.measurement is None:
                misses += 1
                continue
            errors.append(result.measurement.thickness_mm - thickness)
        errors = np.asarray(errors)
        within = int((np.abs(errors) <= tolerance_mm).sum())
        rows.append({
            "thickness": thickness,
            "n": runs_per,
            "unmeasured": misses,
            "mean_err": float(errors.mean()) if errors.size else float("nan"),
            "max_abs_err": float(np.abs(errors).max()) if errors.size else float("nan"),
            "within": within,
        })
    return rows, time.perf_counter() - start


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--thicknesses", type=float, nargs="+",
                        default=[1.0, 1.5, 2.0, 2.5, 3.0])
    parser.add_argument("--runs-per-thickness", type=int, default=20)
    parser.add_argument("--looks", type=float, default=4.0)
    parser.add_argument("--tolerance-mm", type=float, default=0.2)
    args = parser.parse_args(argv)

    rows, elapsed = run_study(
        args.thicknesses, args.runs_per_thickness, args.looks, args.tolerance_mm
    )

    print(f"{'true mm':>8} {'n':>4} {'unmeasured':>10} {'mean err':>10} "
          f"{'max |err|':>10} {'within tol':>10}")
    total = within = 0
    for r in rows:
        print(f"{r['thickness']:>8.1f} {r['n']:>4d} {r['unmeasured']:>10d} "
              f"{r['mean_err']:>10.3f} {r['max_abs_err']:>10.3f} "
              f"{r['within']:>7d}/{r['n']}")
        total += r["n"]
        within += r["within"]
    print(f"\n{within}/{total} within ±{args.tolerance_mm} mm "
          f"in {elapsed:.1f} s")
    return 0 if within / total >= 0.9 else 1


if __name__ == "__main__":
    sys.exit(main())

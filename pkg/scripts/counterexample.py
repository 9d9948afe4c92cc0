"""Slit-square curve: right-side conditional against the gap width d."""

import argparse
import csv
import time
from dataclasses import dataclass
from pathlib import Path

from condexit import brownian


@dataclass
class CurveRun:
    d: str = "0.4 0.2 0.1 0.05"
    dt: float = 1e-4
    count: int = 128 * brownian.CHUNK
    min_hits: int = 100_000
    seed: int = 0
    threads: int = 1
    out: str = "results/counterexample.csv"


def main(cfg: CurveRun):
    start = time.perf_counter()
    ds = [float(v) for v in cfg.d.split()]
    rows = brownian.counterexample_curve(ds, dt=cfg.dt, count=cfg.count, seed=cfg.seed, threads=cfg.threads,
                                         refine=True, min_hits=cfg.min_hits)
    recs = [r.record() for r in rows]
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, list(recs[0]))
        w.writeheader()
        w.writerows(recs)
    for r in rows:
        lo, hi = r.right.interval()
        print(f"d={r.d:<5} right={r.right.estimate:.4f} [{lo:.4f}, {hi:.4f}] dt/2={r.right_fine.estimate:.4f} "
              f"denominator={r.denominator.estimate:.4f} paths={r.right.count} conditioned={r.right.hits}")
    print(f"{time.perf_counter() - start:.0f}s")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    for name, default in vars(CurveRun()).items():
        ap.add_argument(f"--{name.replace('_', '-')}", type=type(default), default=default)
    main(CurveRun(**vars(ap.parse_args())))

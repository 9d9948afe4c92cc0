"""Exact checks over the generated corpus; writes one CSV per check."""

import argparse
import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

from condexit import chain, coupling, verifier
from condexit.rng import make_rng


@dataclass
class CorpusRun:
    instances: int = 500
    instances_3d: int = 60
    barrier_problems: int = 600
    sequences_per_instance: int = 2
    seed: int = 0
    out: str = "results"


def write(path: Path, rows: list[dict]):
    keys = list(dict.fromkeys(k for r in rows for k in r))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, keys)
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {path}")


def flat(v: verifier.InequalityVerdict) -> dict:
    rec = v.record()
    rec["instance"] = rec["instance"].get("hash", "")
    return rec


def main(cfg: CorpusRun):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    corpus = verifier.generate_corpus(verifier.CorpusSpec(cfg.seed, cfg.seed + cfg.instances))
    corpus += [verifier.generate_instance(s, 3, 3, 12) for s in range(cfg.seed, cfg.seed + cfg.instances_3d)]
    write(out / "proposition.csv",
          [flat(verifier.verify_proposition(i.domain, i.rect, i.z, i.m, i.n)) for i in corpus])

    rows = []
    for inst in corpus[: cfg.instances]:
        seqs = chain.admissible_sequences(inst.domain, inst.z, max(inst.m, inst.n), cap=0,
                                          rng=make_rng(inst.seed, "sequences"), samples=cfg.sequences_per_instance)
        rows += [flat(verifier.verify_conditioned_lemma(inst.domain, inst.rect, s, inst.m, inst.n)) for s in seqs]
    write(out / "lemma.csv", rows)

    rng = make_rng(cfg.seed, "barriers")
    problems = [chain.random_barrier_problem(rng, 10, 5) for _ in range(cfg.barrier_problems)]
    write(out / "barrier.csv", [flat(verifier.verify_barrier_inequality(p)) for p in problems])

    rows = []
    for idx, p in enumerate(problems):
        res = verifier.verify_partition(p)
        rows += [{"problem": idx, "zeros": " ".join(map(str, c.positions)) or "-", "e0": float(res.e0),
                  "h_given_cell": float(c.conditional), "holds": res.e0 <= c.conditional,
                  "mixture_identity": res.mixture_ok} for c in res.cells]
    write(out / "partition.csv", rows)

    rows = []
    for idx, p in enumerate(problems):
        rep = coupling.check_dominance_p(p.f, 0, p.n)
        for b0, b1 in itertools.combinations_with_replacement(range(1, p.f[p.n] + 1), 2):
            rep = rep.merge(coupling.check_dominance_r(p.f, 0, p.n, b0, b1))
        rows.append({"problem": idx, "comparisons": rep.checked, "violations": len(rep.violations)})
    write(out / "dominance.csv", rows)

    rep = verifier.explore_conjecture(corpus[: cfg.instances], cross_check_tol=1e-9)
    write(out / "conjecture.csv", rep.rows)
    print(f"conjecture: {len(rep.violations)} of {len(rep.rows)} instances with negative margin, "
          f"{len(rep.cross_check_failures)} cross-check failures")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    for name, default in vars(CorpusRun()).items():
        ap.add_argument(f"--{name.replace('_', '-')}", type=type(default), default=default)
    main(CorpusRun(**vars(ap.parse_args())))

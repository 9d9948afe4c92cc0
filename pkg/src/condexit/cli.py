"""Command-line entry point.

Every report starts with an envelope: a timestamp line, the full run
configuration as JSON with its hash, and a git-style hash of the body.
Re-running the echoed configuration reproduces the body byte for byte.

Exit codes: 0 all checks hold, 1 a theorem-tagged check failed,
2 bad input, 3 a size cap or resource limit was hit (or a verdict is
inconclusive at the requested tolerance).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import itertools
import json
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources

import numpy as np

from . import brownian, chain, coupling, verifier
from ._util import CapExceeded, content_hash, frac_str
from .lattice import LatticeRect, ParseError, load_domain
from .rng import RNG_ALGORITHM, make_rng

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    inputs: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    cap_paths: int = 10**6
    tolerance: float = 1e-9
    dt: float = brownian.DEFAULT_DT
    count: int | None = None
    out: str | None = None
    format: str = "csv"
    params: dict = field(default_factory=dict)
    algorithm: str = RNG_ALGORITHM

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, default=str)


@dataclass
class Report:
    records: list[dict]
    status: int = EXIT_OK
    summary: dict = field(default_factory=dict)


def bundled(name: str) -> str:
    return str(resources.files("condexit") / "data" / name)


# --------------------------------------------------------------------------
# formatting


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return v


def render_body(report: Report, fmt: str) -> str:
    buf = io.StringIO()
    if fmt == "jsonl":
        if report.summary:
            buf.write(json.dumps({"summary": report.summary}, sort_keys=True, default=str) + "\n")
        for rec in report.records:
            buf.write(json.dumps(rec, sort_keys=True, default=str) + "\n")
        return buf.getvalue()
    keys: list[str] = []
    for rec in report.records:
        keys.extend(k for k in rec if k not in keys)
    if report.summary:
        buf.write("# summary " + json.dumps(report.summary, sort_keys=True, default=str) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    if keys:
        w.writerow(keys)
    for rec in report.records:
        w.writerow([_cell(rec.get(k, "")) for k in keys])
    return buf.getvalue()


def git_hash(body: str) -> str:
    data = body.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def envelope(config: RunConfig, body: str) -> str:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    cfg = config.to_json()
    return (f"# generated {stamp}\n"
            f"# config {cfg}\n"
            f"# config-hash {content_hash(json.loads(cfg))}\n"
            f"# body-hash {git_hash(body)}\n") + body


# --------------------------------------------------------------------------
# inputs


def _domain_input(args):
    path = args.domain or bundled("example_domain.txt")
    domain, rect = load_domain(path)
    report = domain.validate()
    if not report.ok:
        raise InputError(f"{path}: domain is not {', '.join(report.failures())}")
    if rect is None:
        rect = LatticeRect.bounding(domain)
    return path, domain, rect


def _start(args, domain):
    if args.z:
        z = tuple(args.z)
        if len(z) != domain.dimension:
            raise InputError(f"--z needs {domain.dimension} coordinates")
        return z
    return sorted(domain.half().points)[0]


def _instances(args, config):
    """Instances from a corpus file, a generated range, or one domain file."""
    if args.corpus:
        with open(args.corpus) as fh:
            spec = verifier.CorpusSpec.from_json(fh.read())
        config.inputs["corpus"] = args.corpus
        insts = verifier.generate_corpus(spec)
    elif args.instances:
        insts = [verifier.generate_instance(s, args.dim, args.max_extent, args.max_steps)
                 for s in range(args.seed, args.seed + args.instances)]
    else:
        path, domain, rect = _domain_input(args)
        config.inputs["domain"] = path
        insts = [verifier.Instance(domain, rect, _start(args, domain), 4, 4)]
    out = []
    for inst in insts:
        m = inst.m if args.m is None else args.m
        n = inst.n if args.n is None else args.n
        out.append(dataclasses.replace(inst, m=m, n=n))
    return out


def _barriers(args, config, default_bundled: bool = True):
    if args.barrier or (default_bundled and not args.instances):
        path = args.barrier or bundled("example_barrier.txt")
        config.inputs["barrier"] = path
        return [chain.load_barrier(path)]
    rng = make_rng(args.seed, "barriers")
    return [chain.random_barrier_problem(rng, args.max_len, args.max_f) for _ in range(args.instances)]


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise InputError(f"expected numbers, got {text!r}") from None


def _rectangle(text: str) -> brownian.Rectangle:
    vals = _floats(text)
    if len(vals) != 3:
        raise InputError("--rect needs 'half_width y_lo y_hi'")
    return brownian.Rectangle(*vals)


def _verdict_status(verdicts) -> int:
    return EXIT_VIOLATION if any(v.theorem and v.status == "violated" for v in verdicts) else EXIT_OK


# --------------------------------------------------------------------------
# subcommands


def cmd_verify_discrete(args, config: RunConfig) -> Report:
    insts = _instances(args, config)
    verdicts = []
    for inst in insts:
        if args.corollary:
            v = verifier.verify_corollary_discrete(inst.domain, inst.rect, inst.z, inst.n, args.tolerance)
        else:
            v = verifier.verify_proposition(inst.domain, inst.rect, inst.z, inst.m, inst.n)
        verdicts.append(v)
    records = sorted((v.record() for v in verdicts), key=lambda r: r["instance"]["hash"])
    status = _verdict_status(verdicts)
    if status == EXIT_OK and any(v.status == "inconclusive" for v in verdicts):
        status = EXIT_CAP
    summary = {"instances": len(verdicts), "violations": sum(v.status == "violated" for v in verdicts),
               "inconclusive": sum(v.status == "inconclusive" for v in verdicts)}
    return Report(records, status, summary)


def cmd_verify_lemma(args, config: RunConfig) -> Report:
    insts = _instances(args, config)
    verdicts = []
    for idx, inst in enumerate(insts):
        l = max(inst.m, inst.n)
        rng = make_rng(args.seed, "sequences", idx)
        seqs = chain.admissible_sequences(inst.domain, inst.z, l, cap=min(args.cap_paths, 3**10), rng=rng,
                                             samples=args.count or 200)
        for seq in seqs:
            verdicts.append(verifier.verify_conditioned_lemma(inst.domain, inst.rect, seq, inst.m, inst.n))
    records = [v.record() for v in verdicts]
    summary = {"instances": len(insts), "sequences": len(verdicts),
               "violations": sum(v.status == "violated" for v in verdicts)}
    return Report(records, _verdict_status(verdicts), summary)


def cmd_verify_barrier(args, config: RunConfig) -> Report:
    verdicts = [verifier.verify_barrier_inequality(p) for p in _barriers(args, config)]
    summary = {"problems": len(verdicts), "violations": sum(v.status == "violated" for v in verdicts)}
    return Report([v.record() for v in verdicts], _verdict_status(verdicts), summary)


def cmd_partition(args, config: RunConfig) -> Report:
    records, verdicts, mixture_ok = [], [], True
    for idx, p in enumerate(_barriers(args, config)):
        res = verifier.verify_partition(p, cap=args.cap_paths)
        verdicts.append(res.verdict)
        mixture_ok &= res.mixture_ok
        for c in res.cells:
            records.append({"problem": idx, "zeros": " ".join(map(str, c.positions)) or "-",
                            "cell_probability": frac_str(c.probability), "h_given_cell": frac_str(c.conditional),
                            "e0": frac_str(res.e0), "holds": res.e0 <= c.conditional})
    status = _verdict_status(verdicts)
    if not mixture_ok:
        status = EXIT_VIOLATION
    summary = {"problems": len(verdicts), "violations": sum(v.status == "violated" for v in verdicts),
               "mixture_identity": mixture_ok, "verdicts": [v.record() for v in verdicts]}
    return Report(records, status, summary)


def cmd_couple(args, config: RunConfig) -> Report:
    (p,) = _barriers(args, config)
    zeros = tuple(args.zeros or ())
    lower, upper = coupling.cell_kernels(p, zeros)
    count = args.count or 100_000
    psi, zeta, unif = coupling.sample_coupled(lower, upper, p.x, p.x, count, args.seed)
    post = p.m > p.n
    order = (coupling.conditional_order_violations(psi, zeta) if post else int((psi > zeta).any(axis=1).sum()))
    incl = coupling.inclusion_violations(psi, zeta, p.h)
    summary = {"pairs": count, "order_violations": order, "inclusion_violations": incl, "zeros": list(zeros),
               "post_horizon": post, "seed": args.seed, "algorithm": RNG_ALGORITHM}
    if p.l <= args.max_exact_horizon:
        res = coupling.product_chain(lower, upper, p.x, p.x, conditional=post, h=p.h)
        summary["exact_violation"] = frac_str(res.violation)
        summary["exact_inclusion_violation"] = frac_str(res.inclusion_violation)
        summary["exact_marginals_match"] = (res.lower_marginals == chain.marginals(lower)
                                            and res.upper_marginals == chain.marginals(upper))
    pair = coupling.CoupledPathPair(tuple(int(v) for v in psi[0]), tuple(int(v) for v in zeta[0]),
                                    tuple(float(t) for t in unif[0]), (lower.kind, upper.kind), args.seed)
    records = [{"step": i, "psi": pair.psi[i], "zeta": pair.zeta[i],
                "uniform": "" if i == 0 else repr(pair.uniforms[i - 1])} for i in range(len(pair.psi))]
    bad = order or incl or summary.get("exact_violation", "0/1") != "0/1" or \
        summary.get("exact_inclusion_violation", "0/1") != "0/1" or summary.get("exact_marginals_match") is False
    return Report(records, EXIT_VIOLATION if bad else EXIT_OK, summary)


def cmd_dominance(args, config: RunConfig) -> Report:
    records = []
    total = coupling.DominanceReport()
    for idx, p in enumerate(_barriers(args, config)):
        reports = {"P": coupling.check_dominance_p(p.f, 0, p.n)}
        betas = [b for b in range(1, p.f[p.n] + 1)
                 if chain.survival_weights_r(p.f, 0, p.n, b)(0, p.x) > 0]
        for b0, b1 in itertools.combinations_with_replacement(betas, 2):
            reports[f"R {b0} {b1}"] = coupling.check_dominance_r(p.f, 0, p.n, b0, b1)
        reports["post"] = coupling.check_dominance_post(max(p.f) + p.l)
        for name, rep in reports.items():
            total = total.merge(rep)
            records.append({"problem": idx, "check": name, "comparisons": rep.checked,
                            "violations": len(rep.violations)})
    summary = {"comparisons": total.checked, "violations": len(total.violations),
               "examples": total.violations[:5]}
    return Report(records, EXIT_OK if total.ok else EXIT_VIOLATION, summary)


def cmd_mc(args, config: RunConfig) -> Report:
    path = args.profile or bundled("example_profile.txt")
    config.inputs["profile"] = path
    u = brownian.load_profile(path)
    r = _rectangle(args.rect)
    z = tuple(args.z or (0.25, 0.25))
    left, right = brownian.conditional_estimate(z, u, r, args.s, args.t, args.dt, args.count or 100_000, args.seed,
                                                threads=args.threads, bridge=args.bridge, label="mc")
    records = [{"side": side, **est.record()} for side, est in (("left", left), ("right", right))]
    # the comparison is statistical, so report it without failing the run
    summary = {"difference": right.estimate - left.estimate,
               "combined_stderr": float(np.hypot(left.stderr, right.stderr))}
    return Report(records, EXIT_OK, summary)


def cmd_counterexample(args, config: RunConfig) -> Report:
    ds = _floats(args.d)
    rows = brownian.counterexample_curve(ds, args.s, args.t, args.dt, args.count or 100_000, args.seed,
                                         threads=args.threads, refine=args.refine, min_hits=args.min_hits)
    return Report([r.record() for r in rows])


def cmd_conjecture(args, config: RunConfig) -> Report:
    insts = _instances(args, config)
    rep = verifier.explore_conjecture(insts, args.tolerance if args.cross_check else None)
    rows = sorted(rep.rows, key=lambda r: r["instance"])
    summary = {"instances": len(rows), "negative_margins": len(rep.violations),
               "cross_check_failures": len(rep.cross_check_failures)}
    return Report(rows, EXIT_CAP if rep.cross_check_failures else EXIT_OK, summary)


def cmd_scaling(args, config: RunConfig) -> Report:
    path = args.profile or bundled("example_profile.txt")
    config.inputs["profile"] = path
    u = brownian.load_profile(path)
    r = _rectangle(args.rect)
    z = tuple(args.z or (0.25, 0.25))
    scales = [eval_fraction(v) for v in args.scales.replace(",", " ").split()]
    rows = brownian.scaling_limit_check(u, r, z, args.s, args.t, scales, args.dt, args.count or 100_000,
                                        args.seed, threads=args.threads)
    bad = any(row.discrete_left > row.discrete_right for row in rows)
    return Report([row.record() for row in rows], EXIT_VIOLATION if bad else EXIT_OK)


def eval_fraction(text: str) -> float:
    if "/" in text:
        a, b = text.split("/")
        return float(a) / float(b)
    return float(text)


COMMANDS = {
    "verify-discrete": cmd_verify_discrete,
    "verify-lemma": cmd_verify_lemma,
    "verify-barrier": cmd_verify_barrier,
    "partition": cmd_partition,
    "couple": cmd_couple,
    "dominance": cmd_dominance,
    "mc": cmd_mc,
    "counterexample": cmd_counterexample,
    "conjecture": cmd_conjecture,
    "scaling": cmd_scaling,
}


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--cap-paths", type=int, default=10**6, help="enumeration cap")
    common.add_argument("--tolerance", type=float, default=1e-9)
    common.add_argument("--dt", type=float, default=brownian.DEFAULT_DT)
    common.add_argument("--count", type=int, help="samples or paths")

    corpus = argparse.ArgumentParser(add_help=False)
    corpus.add_argument("--domain", help="domain file (default: bundled example)")
    corpus.add_argument("--corpus", help="JSON corpus spec")
    corpus.add_argument("--instances", type=int, default=0, help="generate this many instances from --seed")
    corpus.add_argument("--dim", type=int, default=2)
    corpus.add_argument("--max-extent", type=int, default=4)
    corpus.add_argument("--max-steps", type=int, default=12)
    corpus.add_argument("--z", type=int, nargs="+")
    corpus.add_argument("--m", type=int)
    corpus.add_argument("--n", type=int)

    barrier = argparse.ArgumentParser(add_help=False)
    barrier.add_argument("--barrier", help="barrier file (default: bundled example)")
    barrier.add_argument("--instances", type=int, default=0, help="random problems instead of a file")
    barrier.add_argument("--max-len", type=int, default=8)
    barrier.add_argument("--max-f", type=int, default=5)

    continuous = argparse.ArgumentParser(add_help=False)
    continuous.add_argument("--profile", help="row-profile geometry file (default: bundled example)")
    continuous.add_argument("--rect", default="1 -1 1", help="outer rectangle 'half_width y_lo y_hi'")
    continuous.add_argument("--z", type=float, nargs=2)
    continuous.add_argument("--s", type=float, default=0.5)
    continuous.add_argument("--t", type=float, default=0.5)

    parser = argparse.ArgumentParser(prog="condexit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    p = sub.add_parser("verify-discrete", parents=[common, corpus], help="exact conditional comparison")
    p.add_argument("--corollary", action="store_true", help="compare conditional expected exit times instead")
    sub.add_parser("verify-lemma", parents=[common, corpus], help="comparison conditioned on the tail path")
    sub.add_parser("verify-barrier", parents=[common, barrier], help="one-dimensional barrier inequality")
    sub.add_parser("partition", parents=[common, barrier], help="zero-set partition check")
    p = sub.add_parser("couple", parents=[common, barrier], help="monotone coupling of conditioned chains")
    p.add_argument("--zeros", type=int, nargs="*", help="zero positions of the lower chain")
    p.add_argument("--max-exact-horizon", type=int, default=8)
    sub.add_parser("dominance", parents=[common, barrier], help="exhaustive CDF dominance checks")
    p = sub.add_parser("mc", parents=[common, continuous], help="Monte Carlo conditional estimates")
    p.add_argument("--bridge", action="store_true", help="Brownian-bridge correction for rectangles")
    p = sub.add_parser("counterexample", parents=[common], help="slit-square curve")
    p.add_argument("--d", default="0.4 0.2 0.1 0.05")
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--min-hits", type=int, default=0, help="extend runs until this many conditioned paths")
    p.add_argument("--refine", action="store_true", help="also report dt/2 estimates on the same paths")
    p = sub.add_parser("conjecture", parents=[common, corpus], help="expected exit time ratios")
    p.add_argument("--cross-check", action="store_true", help="check each solve against survival sums")
    p = sub.add_parser("scaling", parents=[common, continuous], help="lattice against Monte Carlo")
    p.add_argument("--scales", default="1/8 1/12 1/16")
    return parser


def make_config(args) -> RunConfig:
    skip = {"subcommand", "seed", "threads", "cap_paths", "tolerance", "dt", "count", "out", "format"}
    params = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return RunConfig(args.subcommand, {}, args.seed, args.threads, args.cap_paths, args.tolerance, args.dt,
                     args.count, args.out, args.format, params)


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    config = make_config(args)
    try:
        report = COMMANDS[args.subcommand](args, config)
    except (ParseError, InputError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"condexit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CapExceeded as exc:
        print(f"condexit: size cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ValueError, ZeroDivisionError) as exc:
        print(f"condexit: invalid instance: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = envelope(config, render_body(report, args.format))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return report.status


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

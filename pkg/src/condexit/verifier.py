"""Inequality checks over generated or user-supplied instances.

Each check returns an :class:`InequalityVerdict` carrying both sides as
exact rationals.  Theorem-tagged verdicts are expected to hold; the
conjecture explorer only reports margins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from . import exact
from ._util import CapExceeded, content_hash, frac_str
from .chain import (AdmissibleSequence, BarrierProblem, all_tail_paths, event_prob, row_bound_or_empty,
                    walk_paths)
from .lattice import LatticeDomain, LatticeRect, contains_rect, generate_random_domain
from .rng import make_rng


@dataclass(frozen=True)
class InequalityVerdict:
    """``left <= right``; ``status`` is holds, violated or inconclusive."""

    check: str
    instance: dict
    left: Fraction | float
    right: Fraction | float
    exact: bool
    theorem: bool = True
    status: str | None = None

    def __post_init__(self):
        if self.status is None:
            object.__setattr__(self, "status", "holds" if self.margin >= 0 else "violated")

    @property
    def margin(self):
        return self.right - self.left

    @property
    def holds(self) -> bool:
        return self.margin >= 0

    def record(self) -> dict:
        return {
            "check": self.check,
            "instance": self.instance,
            "left": frac_str(self.left),
            "right": frac_str(self.right),
            "margin": frac_str(self.margin),
            "left_float": float(self.left),
            "right_float": float(self.right),
            "margin_float": float(self.margin),
            "exact": self.exact,
            "theorem": self.theorem,
            "holds": self.holds,
            "status": self.status,
        }


# --------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class Instance:
    domain: LatticeDomain
    rect: LatticeRect
    z: tuple[int, ...]
    m: int
    n: int
    seed: int | None = None

    def descriptor(self) -> dict:
        d = {
            "domain": {" ".join(map(str, t)) or "-": self.domain.rows[t][-1] for t in sorted(self.domain.rows)},
            "rect": [self.rect.half_width, [list(b) for b in self.rect.bounds]],
            "z": list(self.z),
            "m": self.m,
            "n": self.n,
        }
        d["hash"] = content_hash(d)
        if self.seed is not None:
            d["seed"] = self.seed
        return d


@dataclass(frozen=True)
class CorpusSpec:
    """Declarative corpus: instances for seeds ``seed_start .. seed_stop - 1``."""

    seed_start: int = 0
    seed_stop: int = 500
    dimension: int = 2
    max_extent: int = 4
    max_steps: int = 12
    tail_slack: int = 1

    @classmethod
    def from_json(cls, text: str) -> CorpusSpec:
        raw = json.loads(text)
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown corpus fields: {sorted(unknown)}")
        return cls(**raw)


def generate_instance(seed: int, k: int = 2, max_extent: int = 4, max_steps: int = 12, tail_slack: int = 1) -> Instance:
    """Random valid (domain, symmetric rect, start in the positive half, m, n)."""
    domain = generate_random_domain(seed, k, max_extent)
    rng = make_rng(seed, "instance", k, max_extent, max_steps)
    widest = max(xs[-1] for xs in domain.rows.values())
    half_width = widest + int(rng.integers(0, max(max_extent, widest) - widest + 1))
    box = domain.bbox()
    bounds = tuple((lo - int(rng.integers(0, tail_slack + 1)), hi + int(rng.integers(0, tail_slack + 1)))
                   for lo, hi in box[1:])
    rect = LatticeRect(half_width, bounds)
    plus = sorted(domain.half().points)
    z = plus[int(rng.integers(len(plus)))]
    m = int(rng.integers(0, max_steps + 1))
    n = int(rng.integers(0, max_steps + 1))
    return Instance(domain, rect, z, m, n, seed)


def generate_corpus(spec: CorpusSpec) -> list[Instance]:
    return [generate_instance(s, spec.dimension, spec.max_extent, spec.max_steps, spec.tail_slack)
            for s in range(spec.seed_start, spec.seed_stop)]


def _check_instance(domain, rect, z):
    if not contains_rect(rect, domain):
        raise ValueError("rectangle does not contain the domain")
    if tuple(z) not in domain or z[0] <= 0:
        raise ValueError(f"start point {tuple(z)} is not in the positive half of the domain")


def _desc(domain, rect, z, m, n, **extra) -> dict:
    d = Instance(domain, rect, tuple(z), m, n).descriptor()
    d.update(extra)
    return d


# --------------------------------------------------------------------------
# the discrete comparison and its ratio form


def proposition_sides(domain: LatticeDomain, rect: LatticeRect, z, m: int, n: int, exact_mode: bool | None = None):
    """``(P(tau_L+ > m | tau_T+ > n), P(tau_L > m | tau_T > n))``."""
    T = rect.points()
    left = exact.conditional_exit_prob(z, domain.half(), T.half(), m, n, exact_mode)
    right = exact.conditional_exit_prob(z, domain, T, m, n, exact_mode)
    return left, right


def verify_proposition(domain: LatticeDomain, rect: LatticeRect, z, m: int, n: int) -> InequalityVerdict:
    _check_instance(domain, rect, z)
    left, right = proposition_sides(domain, rect, z, m, n, exact_mode=True)
    return InequalityVerdict("proposition", _desc(domain, rect, z, m, n), left, right, True)


def verify_ratio_form(domain: LatticeDomain, rect: LatticeRect, z, m: int, n: int) -> InequalityVerdict:
    """Joint-over-joint against marginal-over-marginal, compared by cross-multiplication."""
    _check_instance(domain, rect, z)
    T = rect.points()
    jp = exact.joint_survival(z, domain.half(), T.half(), m, n, True)
    j = exact.joint_survival(z, domain, T, m, n, True)
    sp = exact.survival(z, T.half(), n, True)[n]
    s = exact.survival(z, T, n, True)[n]
    if j == 0 or s == 0:
        raise ZeroDivisionError("zero denominator in the ratio form")
    holds = jp * s <= sp * j
    v = InequalityVerdict("ratio-form", _desc(domain, rect, z, m, n), jp / j, sp / s, True)
    assert v.holds == holds
    return v


# --------------------------------------------------------------------------
# conditioning on the y-path


def lemma_barriers(domain: LatticeDomain, rect: LatticeRect, values, m: int, n: int):
    """``f(i)`` from the rectangle rows on ``0..n`` and ``h(i)`` from the domain rows on ``0..m``.

    Empty rows give -1, which makes every event through that index impossible.
    """
    f = [row_bound_or_empty(rect, values[i]) for i in range(n + 1)]
    h = [row_bound_or_empty(domain, values[i]) for i in range(m + 1)]
    return f, h


def lemma_quantities(x: int, f, h) -> dict[str, Fraction]:
    return {
        "joint_plus": event_prob(x, f, h, True),
        "joint": event_prob(x, f, h, False),
        "outer_plus": event_prob(x, f, None, True),
        "outer": event_prob(x, f, None, False),
    }


def verify_conditioned_lemma(domain: LatticeDomain, rect: LatticeRect, y_seq: AdmissibleSequence,
                             m: int, n: int) -> InequalityVerdict:
    z = y_seq.z
    _check_instance(domain, rect, z)
    if y_seq.l < max(m, n):
        raise ValueError("sequence is shorter than max(m, n)")
    f, h = lemma_barriers(domain, rect, y_seq.values, m, n)
    q = lemma_quantities(z[0], f, h)
    if q["joint"] == 0 or q["outer"] == 0:
        raise ValueError("inadmissible sequence: zero conditioning probability")
    desc = _desc(domain, rect, z, m, n, y=[list(v) for v in y_seq.values])
    return InequalityVerdict("conditioned-lemma", desc, q["joint_plus"] / q["joint"], q["outer_plus"] / q["outer"], True)


def aggregate_lemma(domain: LatticeDomain, rect: LatticeRect, z, m: int, n: int) -> dict[str, Fraction]:
    """Average the 1-D quantities over every y-path, weighted by its probability.

    By independence of the coordinates this must reproduce the four joint
    and marginal probabilities of the full walk.
    """
    l = max(m, n)
    k = len(z)
    w = Fraction(1, 3 ** ((k - 1) * l))
    acc = {key: Fraction(0) for key in ("joint_plus", "joint", "outer_plus", "outer")}
    for values in all_tail_paths(z, l):
        f, h = lemma_barriers(domain, rect, values, m, n)
        for key, v in lemma_quantities(z[0], f, h).items():
            acc[key] += w * v
    return acc


# --------------------------------------------------------------------------
# barrier form and the partition argument


def _barrier_sides(p: BarrierProblem):
    hp_fp = event_prob(p.x, p.f, p.h, True)
    h_f = event_prob(p.x, p.f, p.h, False)
    fp = event_prob(p.x, p.f, None, True)
    ff = event_prob(p.x, p.f, None, False)
    if fp == 0:
        raise ZeroDivisionError("P(F+) = 0")
    return hp_fp / fp, h_f / ff


def _problem_desc(p: BarrierProblem) -> dict:
    d = {"n": p.n, "m": p.m, "x": p.x, "f": list(p.f), "h": list(p.h)}
    d["hash"] = content_hash(d)
    return d


def verify_barrier_inequality(problem: BarrierProblem) -> InequalityVerdict:
    left, right = _barrier_sides(problem)
    return InequalityVerdict("barrier", _problem_desc(problem), left, right, True)


@dataclass(frozen=True)
class PartitionCell:
    positions: tuple[int, ...]
    probability: Fraction  # P(cell)
    conditional: Fraction  # P(H | cell)

    @property
    def zero_count(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class PartitionResult:
    cells: list[PartitionCell]
    e0: Fraction
    h_given_f: Fraction
    mixture: Fraction
    verdict: InequalityVerdict

    @property
    def mixture_ok(self) -> bool:
        return self.mixture == self.h_given_f


def verify_partition(problem: BarrierProblem, cap: int = 10**6) -> PartitionResult:
    """Bucket the paths of ``F`` by their zero set in ``(0, n]`` and compare
    ``e0 = P(H+ | F+)`` with ``P(H | cell)`` for every nonempty cell."""
    p = problem
    l = p.l
    if 3**l > cap:
        raise CapExceeded(f"3^{l} paths exceed the enumeration cap {cap}")
    paths = walk_paths(p.x, l)
    f = np.array(p.f)
    h = np.array(p.h)
    head = paths[:, : p.n + 1]
    in_f = np.all(np.abs(head) <= f, axis=1)
    in_fp = np.all((head > 0) & (head <= f), axis=1)
    hpart = paths[:, : p.m + 1]
    in_h = np.all(np.abs(hpart) <= h, axis=1)
    in_hp = np.all((hpart > 0) & (hpart <= h), axis=1)
    weights = (1 << np.arange(1, p.n + 1, dtype=np.int64)) if p.n else np.zeros(0, dtype=np.int64)
    codes = (head[:, 1:] == 0).astype(np.int64) @ weights if p.n else np.zeros(len(paths), dtype=np.int64)

    total = 3**l
    n_f = int(in_f.sum())
    e0 = Fraction(int((in_hp & in_fp).sum()), int(in_fp.sum()))
    h_given_f = Fraction(int((in_h & in_f).sum()), n_f)

    fc = codes[in_f]
    uniq, cell_counts = np.unique(fc, return_counts=True)
    h_counts = {int(c): int(v) for c, v in zip(*np.unique(codes[in_f & in_h], return_counts=True))}
    cells = []
    mixture = Fraction(0)
    for code, cnt in zip(uniq.tolist(), cell_counts.tolist()):
        pos = tuple(i for i in range(1, p.n + 1) if code >> i & 1)
        cond = Fraction(h_counts.get(code, 0), cnt)
        cells.append(PartitionCell(pos, Fraction(cnt, total), cond))
        mixture += Fraction(cnt, n_f) * cond
    worst = min(c.conditional for c in cells)
    verdict = InequalityVerdict("partition", _problem_desc(p), e0, worst, True)
    return PartitionResult(cells, e0, h_given_f, mixture, verdict)


# --------------------------------------------------------------------------
# expected exit times


@dataclass
class ConjectureReport:
    rows: list[dict] = field(default_factory=list)
    violations: list[dict] = field(default_factory=list)
    cross_check_failures: list[dict] = field(default_factory=list)


def explore_conjecture(instances: Iterable[Instance], cross_check_tol: float | None = None) -> ConjectureReport:
    """Ratio of expected exit times, half domains against full ones.

    Nothing is asserted; margins (right minus left) and sign changes are
    reported.  With ``cross_check_tol`` each of the four solves is also
    compared with a bracketed survival series.
    """
    report = ConjectureReport()
    for inst in instances:
        z = inst.z
        T = inst.rect.points()
        doms = {"L+": inst.domain.half(), "T+": T.half(), "L": inst.domain, "T": T}
        E = {name: exact.expected_exit_time(z, d) for name, d in doms.items()}
        left = E["L+"] / E["T+"]
        right = E["L"] / E["T"]
        desc = inst.descriptor()
        row = {"instance": desc["hash"], "z": list(z), **{f"E[{k}]": frac_str(v) for k, v in E.items()},
               "left": frac_str(left), "right": frac_str(right), "margin": frac_str(right - left),
               "margin_float": float(right - left)}
        report.rows.append(row)
        if right < left:
            report.violations.append({**row, "descriptor": desc})
        if cross_check_tol is not None:
            for name, d in doms.items():
                lo, hi = exact.survival_sum_bounds(z, d, cross_check_tol / 10)
                val = float(E[name])
                if not (lo - cross_check_tol <= val <= hi + cross_check_tol):
                    report.cross_check_failures.append({"instance": desc["hash"], "domain": name,
                                                        "solve": val, "series": [lo, hi]})
    return report


def verify_corollary_discrete(domain: LatticeDomain, rect: LatticeRect, z, n: int, tolerance) -> InequalityVerdict:
    """Conditional expected exit times via bracketed series; inconclusive when
    the brackets overlap on the wrong side."""
    _check_instance(domain, rect, z)
    T = rect.points()
    lo_p, hi_p = exact.conditional_expected_exit(z, domain.half(), T.half(), n, tolerance)
    lo, hi = exact.conditional_expected_exit(z, domain, T, n, tolerance)
    desc = _desc(domain, rect, z, 0, n, intervals={"plus": [frac_str(lo_p), frac_str(hi_p)],
                                                   "full": [frac_str(lo), frac_str(hi)]})
    status = None
    if lo < hi_p:
        status = "inconclusive" if lo_p <= hi else "violated"
    return InequalityVerdict("corollary", desc, hi_p, lo, True, status=status)

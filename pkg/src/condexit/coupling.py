"""Inverse-CDF (monotone) couplings of conditioned chains.

Two chains are driven by one shared uniform per step through their
quantile functions ``F^{-1}(t, u) = inf{r : F(r, u) >= t}``.  When the
lower chain's one-step CDF dominates the upper one's, ``F(r, u) >= G(r, u')``
for ``u <= u'``, the order of the paths is preserved at every step.

The coupling is realized twice: by seeded sampling, and exactly, as a
Markov chain on pairs whose one-step law comes from intersecting the two
CDF partitions of ``[0, 1]`` (:func:`coupled_joint_kernel`).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .chain import (ONE_THIRD, ChainKernel, UnreachableState, _weighted_row, chain_law_from_zeros, concat_kernels,
                    kernel_p, kernel_zeta_free, survival_weights_p, survival_weights_r)
from .rng import RNG_ALGORITHM, make_rng


@dataclass(frozen=True)
class StepCdf:
    """CDF of a distribution on at most three integers."""

    states: tuple[int, ...]
    masses: tuple[Fraction, ...]

    @classmethod
    def from_row(cls, row: dict[int, Fraction]) -> StepCdf:
        items = sorted((v, Fraction(p)) for v, p in row.items())
        return cls(tuple(v for v, _ in items), tuple(p for _, p in items))

    @property
    def cum(self) -> tuple[Fraction, ...]:
        out, acc = [], Fraction(0)
        for p in self.masses:
            acc += p
            out.append(acc)
        return tuple(out)

    def __call__(self, r) -> Fraction:
        return sum((p for v, p in zip(self.states, self.masses) if v <= r), Fraction(0))


def inverse_cdf(cdf: StepCdf, t) -> int:
    """Smallest support point ``v`` with ``F(v) >= t``."""
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    for v, p, c in zip(cdf.states, cdf.masses, cdf.cum):
        if p > 0 and c >= t:
            return v
    raise ValueError("distribution has no mass")


# --------------------------------------------------------------------------
# dominance checks


@dataclass
class DominanceReport:
    checked: int = 0
    violations: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def merge(self, other: DominanceReport) -> DominanceReport:
        return DominanceReport(self.checked + other.checked, self.violations + other.violations)


def _compare(report: DominanceReport, lo_row, hi_row, tag: dict):
    """Record every ``r`` where ``F(r) < G(r)`` for ``F`` from ``lo_row``, ``G`` from ``hi_row``."""
    F, G = StepCdf.from_row(lo_row), StepCdf.from_row(hi_row)
    rs = sorted(set(F.states) | set(G.states))
    for r in rs:
        report.checked += 1
        if F(r) < G(r):
            report.violations.append({**tag, "r": r, "F": str(F(r)), "G": str(G(r))})


def _all_rows(w, f, k):
    rows = {}
    for u in range(1, f[k] + 1):
        r = _weighted_row(w, k, u)
        if r is not None:
            rows[u] = r
    return rows


def check_dominance_p(f: Sequence[int], a: int, b: int) -> DominanceReport:
    """``F_{k+1}(r, u) >= F_{k+1}(r, u')`` for every ``1 <= u <= u' <= f(k)``.

    The unpinned kernel does not depend on its start, so both sides use the
    same table.
    """
    w = survival_weights_p(f, a, b)
    report = DominanceReport()
    for k in range(a, b):
        rows = _all_rows(w, f, k)
        for u in rows:
            for u2 in rows:
                if u <= u2:
                    _compare(report, rows[u], rows[u2], {"kind": "P", "k": k, "u": u, "u2": u2})
    return report


def check_dominance_r(f: Sequence[int], a: int, b: int, beta0: int, beta1: int) -> DominanceReport:
    """Pinned-kernel dominance: rows for ``beta0`` from ``u`` against rows for
    ``beta1`` from ``u' >= u``; also checks each ``G(r, .)`` is nonincreasing."""
    if beta0 > beta1:
        raise ValueError("need beta0 <= beta1")
    w0 = survival_weights_r(f, a, b, beta0)
    w1 = survival_weights_r(f, a, b, beta1)
    report = DominanceReport()
    for k in range(a, b):
        rows0, rows1 = _all_rows(w0, f, k), _all_rows(w1, f, k)
        for u in rows0:
            for u2 in rows1:
                if u <= u2:
                    _compare(report, rows0[u], rows1[u2], {"kind": "R", "k": k, "u": u, "u2": u2})
        for tag, rows in (("R-mono0", rows0), ("R-mono1", rows1)):
            keys = sorted(rows)
            for u, u2 in zip(keys, keys[1:]):
                _compare(report, rows[u], rows[u2], {"kind": tag, "k": k, "u": u, "u2": u2})
    return report


def _psi_row(u):
    return {0: ONE_THIRD, 1: 2 * ONE_THIRD} if u == 0 else {u - 1: ONE_THIRD, u: ONE_THIRD, u + 1: ONE_THIRD}


def check_dominance_post(max_state: int) -> DominanceReport:
    """Reflected-walk row from ``u`` against free-walk row from ``v`` for ``0 <= u <= v``, ``v > 0``."""
    report = DominanceReport()
    for u in range(0, max_state + 1):
        for v in range(max(u, 1), max_state + 1):
            zeta = {v - 1: ONE_THIRD, v: ONE_THIRD, v + 1: ONE_THIRD}
            _compare(report, _psi_row(u), zeta, {"kind": "post", "u": u, "u2": v})
    return report


# --------------------------------------------------------------------------
# exact coupling


def coupled_joint_kernel(lower_row: dict[int, Fraction], upper_row: dict[int, Fraction]) -> dict[tuple[int, int], Fraction]:
    """Law of ``(F^{-1}(T), G^{-1}(T))`` for a single uniform ``T``."""
    F, G = StepCdf.from_row(lower_row), StepCdf.from_row(upper_row)
    cuts = sorted({c for c, p in zip(F.cum, F.masses) if p} | {c for c, p in zip(G.cum, G.masses) if p})
    joint: dict[tuple[int, int], Fraction] = {}
    prev = Fraction(0)
    for c in cuts:
        if c > prev:
            # on (prev, c] both quantile functions are constant
            key = (inverse_cdf(F, c), inverse_cdf(G, c))
            joint[key] = joint.get(key, Fraction(0)) + (c - prev)
        prev = c
    return joint


@dataclass(frozen=True)
class ProductChainResult:
    violation: Fraction
    inclusion_violation: Fraction | None
    lower_marginals: list[dict[int, Fraction]]
    upper_marginals: list[dict[int, Fraction]]


def product_chain(lower: ChainKernel, upper: ChainKernel, start_lower: int, start_upper: int,
                  conditional: bool = False, h: Sequence[int] | None = None) -> ProductChainResult:
    """Propagate the exact coupled chain on pairs.

    ``violation`` is the probability that the lower path exceeds the upper
    one at some index; with ``conditional`` only indices where the upper
    path has stayed positive at all earlier indices count.  With ``h`` the
    probability of ``{0 < upper_k <= h(k) for all k} minus {lower_k <= h(k)
    for all k}`` is reported too.
    """
    if (lower.a, lower.b) != (upper.a, upper.b):
        raise ValueError("kernels must share the time range")
    a, b = lower.a, lower.b

    def _h_ok(k, v):
        # the barrier h only constrains indices 0..len(h)-1
        return h is None or k >= len(h) or v <= h[k]

    def _up_ok(k, v):
        return _h_ok(k, v) and (h is None or k >= len(h) or v > 0)

    # state: (psi, zeta, guard, up_in, low_in)
    start = (start_lower, start_upper, start_upper > 0, _up_ok(a, start_upper), _h_ok(a, start_lower))
    dist = {start: Fraction(1)}
    violation = Fraction(1) if start_lower > start_upper else Fraction(0)
    lows, ups = [{start_lower: Fraction(1)}], [{start_upper: Fraction(1)}]
    for k in range(a, b):
        nxt: dict = {}
        for (u, v, guard, up_in, low_in), p in dist.items():
            for (u2, v2), q in coupled_joint_kernel(lower.row(k, u), upper.row(k, v)).items():
                if not q:
                    continue
                pq = p * q
                if u2 > v2 and (guard or not conditional):
                    violation += pq
                key = (u2, v2, guard and v2 > 0, up_in and _up_ok(k + 1, v2), low_in and _h_ok(k + 1, u2))
                nxt[key] = nxt.get(key, Fraction(0)) + pq
        dist = nxt
        lm: dict[int, Fraction] = {}
        um: dict[int, Fraction] = {}
        for (u, v, *_), p in dist.items():
            lm[u] = lm.get(u, Fraction(0)) + p
            um[v] = um.get(v, Fraction(0)) + p
        lows.append(lm)
        ups.append(um)
    incl = None
    if h is not None:
        incl = sum((p for (_, _, _, up_in, low_in), p in dist.items() if up_in and not low_in), Fraction(0))
    return ProductChainResult(violation, incl, lows, ups)


def cell_kernels(problem, zeros=()) -> tuple[ChainKernel, ChainKernel]:
    """Chains compared on one zero-set cell, both started at ``x``.

    Lower: ``|X|`` given ``F`` with zeros exactly at ``zeros``.  Upper: ``X``
    given ``F+``, continued as the free walk past ``n`` when ``m > n``.
    """
    p = problem
    parts = [kernel_p(p.f, 0, p.n, p.x)] if p.n > 0 else []
    if p.m > p.n:
        parts.append(kernel_zeta_free(p.n, p.m))
    if not parts:
        raise ValueError("nothing to couple: n = m = 0")
    upper = concat_kernels(parts, start=p.x)
    lower = chain_law_from_zeros(p.x, p.f, zeros, p.m)
    return lower, upper


# --------------------------------------------------------------------------
# sampled coupling


@dataclass(frozen=True)
class CoupledPathPair:
    psi: tuple[int, ...]
    zeta: tuple[int, ...]
    uniforms: tuple[float, ...]
    kinds: tuple[str, str]
    seed: int
    algorithm: str = RNG_ALGORITHM

    def ordered(self) -> bool:
        return all(p <= z for p, z in zip(self.psi, self.zeta))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "psi", "zeta", "uniform"])
        for i, (p, z) in enumerate(zip(self.psi, self.zeta)):
            w.writerow([i, p, z, "" if i == 0 else repr(self.uniforms[i - 1])])
        return buf.getvalue()


def _supports(kernel: ChainKernel, starts: Sequence[int]) -> list[list[int]]:
    cur = sorted(set(starts))
    out = [cur]
    for k in range(kernel.a, kernel.b):
        nxt = set()
        for u in cur:
            try:
                row = kernel.row(k, u)
            except UnreachableState:
                continue
            nxt.update(v for v, p in row.items() if p)
        cur = sorted(nxt)
        out.append(cur)
    return out


def _quantile_tables(kernel: ChainKernel, start: int):
    """Per step: (lowest state, cum at u-1, cum at u, mass>0 at u-1, mass>0 at u)."""
    tables = []
    for k, states in zip(range(kernel.a, kernel.b), _supports(kernel, [start])):
        lo, hi = states[0], states[-1]
        size = hi - lo + 1
        c0 = np.full(size, np.nan)
        c1 = np.full(size, np.nan)
        m0 = np.zeros(size, dtype=bool)
        m1 = np.zeros(size, dtype=bool)
        for u in states:
            row = kernel.row(k, u)
            p0, p1 = row.get(u - 1, Fraction(0)), row.get(u, Fraction(0))
            c0[u - lo], c1[u - lo] = float(p0), float(p0 + p1)
            m0[u - lo], m1[u - lo] = p0 > 0, p1 > 0
        tables.append((lo, c0, c1, m0, m1))
    return tables


def _quantile_step(table, u: np.ndarray, t: np.ndarray) -> np.ndarray:
    lo, c0, c1, m0, m1 = table
    i = u - lo
    down = m0[i] & (t <= c0[i])
    stay = ~down & m1[i] & (t <= c1[i])
    return u - 1 + (~down).astype(np.int64) + (~down & ~stay).astype(np.int64)


def sample_coupled(lower: ChainKernel, upper: ChainKernel, start_lower: int, start_upper: int,
                   count: int, seed: int, label: str = "couple"):
    """``count`` coupled path pairs; returns ``(psi, zeta, uniforms)`` arrays."""
    if start_lower > start_upper:
        raise ValueError("need start_lower <= start_upper")
    if (lower.a, lower.b) != (upper.a, upper.b):
        raise ValueError("kernels must share the time range")
    rng = make_rng(seed, label)
    steps = lower.b - lower.a
    tl, tu = _quantile_tables(lower, start_lower), _quantile_tables(upper, start_upper)
    psi = np.empty((count, steps + 1), dtype=np.int64)
    zeta = np.empty((count, steps + 1), dtype=np.int64)
    unif = rng.random((count, steps))
    psi[:, 0], zeta[:, 0] = start_lower, start_upper
    for s in range(steps):
        psi[:, s + 1] = _quantile_step(tl[s], psi[:, s], unif[:, s])
        zeta[:, s + 1] = _quantile_step(tu[s], zeta[:, s], unif[:, s])
    return psi, zeta, unif


def couple_paths(lower: ChainKernel, upper: ChainKernel, start_lower: int, start_upper: int, seed: int) -> CoupledPathPair:
    psi, zeta, unif = sample_coupled(lower, upper, start_lower, start_upper, 1, seed)
    return CoupledPathPair(tuple(int(v) for v in psi[0]), tuple(int(v) for v in zeta[0]),
                           tuple(float(t) for t in unif[0]), (lower.kind, upper.kind), seed)


def conditional_order_violations(psi: np.ndarray, zeta: np.ndarray) -> int:
    """Number of paths with ``psi_K > zeta_K`` at some ``K`` while ``zeta_j > 0`` for all ``j < K``."""
    guard = np.ones(len(psi), dtype=bool)
    bad = np.zeros(len(psi), dtype=bool)
    for K in range(psi.shape[1]):
        bad |= guard & (psi[:, K] > zeta[:, K])
        guard &= zeta[:, K] > 0
    return int(bad.sum())


def inclusion_violations(psi: np.ndarray, zeta: np.ndarray, h: Sequence[int]) -> int:
    """Paths in ``{0 < zeta_k <= h(k)}`` but not in ``{psi_k <= h(k)}``, over the indices of ``h``."""
    h = np.asarray(h)
    psi, zeta = psi[:, : len(h)], zeta[:, : len(h)]
    upper_in = np.all((zeta > 0) & (zeta <= h), axis=1)
    lower_in = np.all(np.abs(psi) <= h, axis=1)
    return int((upper_in & ~lower_in).sum())

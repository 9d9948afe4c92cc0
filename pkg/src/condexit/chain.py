"""One-dimensional machinery behind the conditioned comparison.

The x-coordinate of the walk is a lazy walk on Z.  Given barriers ``f`` on
``0..n`` and ``h`` on ``0..m`` the events are

    F+ = {0 < X_i <= f(i), i <= n}     F = {|X_i| <= f(i), i <= n}
    H+ = {0 < X_i <= h(i), i <= m}     H = {|X_i| <= h(i), i <= m}

Conditioned on staying in ``(0, f]`` (and optionally on the endpoint) the
walk is a nonhomogeneous Markov chain whose kernels are built here as
explicit tables of exact rationals.  Barrier sequences are indexed by
absolute time, so ``f[k]`` is the barrier at step ``k``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .lattice import LatticeDomain, LatticeRect, ParseError

ONE_THIRD = Fraction(1, 3)


class UnreachableState(KeyError):
    """A kernel row was requested for a state the chain never visits."""


# --------------------------------------------------------------------------
# barriers extracted from domains


def gamma(domain: LatticeDomain | LatticeRect, y_row) -> int:
    """Largest first coordinate of ``domain`` in the row ``y_row``."""
    tail = (y_row,) if np.isscalar(y_row) else tuple(y_row)
    if isinstance(domain, LatticeRect):
        if len(tail) != len(domain.bounds) or not all(lo <= c <= hi for c, (lo, hi) in zip(tail, domain.bounds)):
            raise ValueError(f"row {tail} does not meet the rectangle")
        return domain.half_width
    g = domain.row_bound(tail)
    if g < 0:
        raise ValueError(f"row {tail} does not meet the domain")
    return g


def row_bound_or_empty(domain: LatticeDomain | LatticeRect, tail) -> int:
    """Like :func:`gamma` but returns -1 for an empty row."""
    try:
        return gamma(domain, tail)
    except ValueError:
        return -1


@dataclass(frozen=True)
class BarrierProblem:
    n: int
    m: int
    f: tuple[int, ...]
    h: tuple[int, ...]
    x: int

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(int(v) for v in self.f))
        object.__setattr__(self, "h", tuple(int(v) for v in self.h))
        if self.n < 0 or self.m < 0:
            raise ValueError("horizons must be nonnegative")
        if len(self.f) != self.n + 1 or len(self.h) != self.m + 1:
            raise ValueError("f needs n+1 values and h needs m+1 values")
        if min(self.f) < 1 or min(self.h) < 1:
            raise ValueError("barriers must be positive integers")
        if any(self.h[i] > self.f[i] for i in range(min(self.m, self.n) + 1)):
            raise ValueError("need h(i) <= f(i) on the common range")
        if not 0 < self.x <= self.h[0]:
            raise ValueError("need 0 < x <= h(0)")

    @property
    def l(self) -> int:
        return max(self.m, self.n)

    def to_text(self) -> str:
        return f"{self.n} {self.m} {self.x}\n{' '.join(map(str, self.f))}\n{' '.join(map(str, self.h))}\n"


def parse_barrier_text(text: str) -> BarrierProblem:
    lines = [(i, ln.split("#", 1)[0].split()) for i, ln in enumerate(text.splitlines(), start=1)]
    lines = [(i, w) for i, w in lines if w]
    if len(lines) != 3:
        raise ParseError(f"expected 3 non-empty lines (header, f, h), got {len(lines)}")
    try:
        head = [int(v) for v in lines[0][1]]
    except ValueError:
        raise ParseError("header must be 'n m x'", lines[0][0]) from None
    if len(head) != 3:
        raise ParseError("header must be 'n m x'", lines[0][0])
    n, m, x = head
    rows = []
    for (lineno, words), want, name in ((lines[1], n + 1, "f"), (lines[2], m + 1, "h")):
        try:
            vals = [int(v) for v in words]
        except ValueError:
            raise ParseError(f"{name} row must be integers", lineno) from None
        if len(vals) != want:
            raise ParseError(f"{name} row needs {want} values, got {len(vals)}", lineno)
        rows.append(vals)
    try:
        return BarrierProblem(n, m, tuple(rows[0]), tuple(rows[1]), x)
    except ValueError as exc:
        raise ParseError(str(exc), lines[0][0]) from None


def load_barrier(path) -> BarrierProblem:
    with open(path) as fh:
        return parse_barrier_text(fh.read())


def random_barrier_problem(rng: np.random.Generator, max_len: int = 10, max_f: int = 5) -> BarrierProblem:
    """Random problem with ``P(F+) > 0``; infeasible draws are redrawn."""
    while True:
        n = int(rng.integers(0, max_len + 1))
        m = int(rng.integers(0, max_len + 1))
        f = [int(v) for v in rng.integers(1, max_f + 1, size=n + 1)]
        h = []
        for i in range(m + 1):
            cap = f[i] if i <= n else max_f
            h.append(int(rng.integers(1, cap + 1)))
        x = int(rng.integers(1, h[0] + 1))
        if barrier_count(x, f, True) > 0:
            return BarrierProblem(n, m, tuple(f), tuple(h), x)


# --------------------------------------------------------------------------
# exact 1-D barrier probabilities


def barrier_count(x: int, bounds: Sequence[int], positive: bool) -> int:
    """Number of lazy paths ``X_0 = x, ..., X_L`` (``L = len(bounds) - 1``)
    with ``0 < X_i <= bounds[i]`` (``positive``) or ``|X_i| <= bounds[i]``.

    The probability is the count over ``3**L``.  A bound of -1 is an empty row.
    """
    top = max(max(bounds), abs(x)) + 1
    lo_state = -top
    size = 2 * top + 1

    def allowed(i):
        b = bounds[i]
        return [(0 < s <= b) if positive else (abs(s) <= b) for s in range(lo_state, top + 1)]

    cur = [0] * size
    if allowed(0)[x - lo_state]:
        cur[x - lo_state] = 1
    for i in range(1, len(bounds)):
        ok = allowed(i)
        nxt = [0] * size
        for j in range(size):
            if ok[j]:
                nxt[j] = cur[j] + (cur[j - 1] if j > 0 else 0) + (cur[j + 1] if j + 1 < size else 0)
        cur = nxt
    return sum(cur)


def combined_bounds(f: Sequence[int] | None, h: Sequence[int] | None) -> list[int]:
    """Pointwise barrier for the intersection of an f-event and an h-event."""
    f = list(f or [])
    h = list(h or [])
    out = []
    for i in range(max(len(f), len(h))):
        vals = [b[i] for b in (f, h) if i < len(b)]
        out.append(min(vals))
    return out


def event_prob(x: int, f: Sequence[int] | None, h: Sequence[int] | None, positive: bool) -> Fraction:
    bounds = combined_bounds(f, h)
    return Fraction(barrier_count(x, bounds, positive), 3 ** (len(bounds) - 1))


def walk_paths(x: int, l: int) -> np.ndarray:
    """All ``3**l`` lazy paths from ``x`` as an int array of shape ``(3**l, l+1)``."""
    if l == 0:
        return np.array([[x]], dtype=np.int64)
    digits = (np.arange(3**l, dtype=np.int64)[:, None] // 3 ** np.arange(l - 1, -1, -1, dtype=np.int64)) % 3 - 1
    return np.concatenate([np.full((3**l, 1), x, dtype=np.int64), x + np.cumsum(digits, axis=1)], axis=1)


# --------------------------------------------------------------------------
# admissible y-sequences


@dataclass(frozen=True)
class AdmissibleSequence:
    values: tuple[tuple[int, ...], ...]
    z: tuple[int, ...]

    @property
    def l(self) -> int:
        return len(self.values) - 1


def _tail_tuple(v) -> tuple[int, ...]:
    return (int(v),) if np.isscalar(v) else tuple(int(c) for c in v)


def _reachable_x(reach: set[int], bound: int) -> set[int]:
    return {v for u in reach for v in (u - 1, u, u + 1) if abs(v) <= bound}


def make_admissible(domain: LatticeDomain, z, values) -> AdmissibleSequence:
    """Validate a y-sequence for the walk started at ``z`` inside ``domain``.

    Admissible means unit steps in every tail coordinate and a positive
    probability that the x-coordinate can follow the visited rows, i.e. the
    set of x values reachable inside the rows never becomes empty.
    """
    z = tuple(z)
    vals = tuple(_tail_tuple(v) for v in values)
    if not vals or vals[0] != z[1:]:
        raise ValueError("sequence must start at the tail of z")
    if z not in domain:
        raise ValueError("z is outside the domain")
    for i, (a, b) in enumerate(zip(vals, vals[1:]), start=1):
        if any(abs(p - q) > 1 for p, q in zip(a, b)):
            raise ValueError(f"step {i} moves by more than 1")
    reach = {z[0]}
    for i, v in enumerate(vals[1:], start=1):
        reach = _reachable_x(reach, domain.row_bound(v))
        if not reach:
            raise ValueError(f"the walk cannot follow row {v} at index {i}")
    return AdmissibleSequence(vals, z)


def all_tail_paths(z, l: int):
    """Every tail sequence of length ``l+1`` from ``z`` (inadmissible ones included)."""
    z = tuple(z)
    moves = list(itertools.product((-1, 0, 1), repeat=len(z) - 1))
    for seq in itertools.product(moves, repeat=l):
        cur = z[1:]
        out = [cur]
        for mv in seq:
            cur = tuple(a + b for a, b in zip(cur, mv))
            out.append(cur)
        yield tuple(out)


def admissible_sequences(domain: LatticeDomain, z, l: int, cap: int = 3**10, rng: np.random.Generator | None = None,
                         samples: int = 200) -> list[AdmissibleSequence]:
    """All admissible sequences when there are at most ``cap`` candidates,
    otherwise ``samples`` random admissible ones (needs ``rng``)."""
    z = tuple(z)
    nmoves = 3 ** (len(z) - 1)
    moves = list(itertools.product((-1, 0, 1), repeat=len(z) - 1))

    def options(seq, reach):
        for mv in moves:
            nxt = tuple(a + b for a, b in zip(seq[-1], mv))
            r = _reachable_x(reach, domain.row_bound(nxt))
            if r:
                yield nxt, r

    if nmoves**l <= cap:
        out = []
        stack = [((z[1:],), {z[0]})]
        while stack:
            seq, reach = stack.pop()
            if len(seq) == l + 1:
                out.append(AdmissibleSequence(seq, z))
                continue
            for nxt, r in options(seq, reach):
                stack.append((seq + (nxt,), r))
        return sorted(out, key=lambda s: s.values)
    if rng is None:
        raise ValueError("too many sequences to enumerate; pass an rng to sample")
    # uniform over the extensions that keep the sequence admissible; the
    # forward-reachable check alone cannot dead-end
    out = []
    while len(out) < samples:
        seq, reach = (z[1:],), {z[0]}
        for _ in range(l):
            opts = list(options(seq, reach))
            nxt, reach = opts[int(rng.integers(len(opts)))]
            seq = seq + (nxt,)
        out.append(AdmissibleSequence(seq, z))
    return out


# --------------------------------------------------------------------------
# backward survival weights


@dataclass(frozen=True)
class Weights:
    """``w(k, j)``: probability of staying in ``(0, f]`` from ``X_k = j`` to time ``b``
    (and ending at ``beta`` for the pinned version)."""

    a: int
    b: int
    table: dict[int, dict[int, Fraction]]

    def __call__(self, k: int, j: int) -> Fraction:
        return self.table[k].get(j, Fraction(0))


def _weights(f: Sequence[int], a: int, b: int, terminal: dict[int, Fraction]) -> Weights:
    if not 0 <= a <= b < len(f):
        raise ValueError(f"need 0 <= a <= b < len(f), got a={a}, b={b}")
    table = {b: {j: v for j, v in terminal.items() if v}}
    for k in range(b - 1, a - 1, -1):
        nxt = table[k + 1]
        row = {}
        for j in range(1, f[k] + 1):
            v = (nxt.get(j - 1, 0) + nxt.get(j, 0) + nxt.get(j + 1, 0)) * ONE_THIRD
            if v:
                row[j] = v
        table[k] = row
    return Weights(a, b, table)


def survival_weights_p(f: Sequence[int], a: int, b: int) -> Weights:
    return _weights(f, a, b, {j: Fraction(1) for j in range(1, f[b] + 1)})


def survival_weights_r(f: Sequence[int], a: int, b: int, beta: int) -> Weights:
    if not 0 < beta <= f[b]:
        raise ValueError(f"endpoint beta={beta} is outside the barrier (0, {f[b]}]")
    return _weights(f, a, b, {beta: Fraction(1)})


# --------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class ChainKernel:
    """Transition tables for times ``a -> a+1 -> ... -> b``.

    ``row(k, u)`` is the law of the state at ``k+1`` given state ``u`` at
    ``k`` as ``{v: prob}`` over ``v in {u-1, u, u+1}``.
    """

    kind: str
    a: int
    b: int
    rows: dict[tuple[int, int], dict[int, Fraction]] = field(default_factory=dict)
    start: int | None = None
    parts: tuple = ()

    def row(self, k: int, u: int) -> dict[int, Fraction]:
        if not self.a <= k < self.b:
            raise UnreachableState(f"step {k} outside [{self.a}, {self.b})")
        if self.kind == "zeta-free":
            return {u - 1: ONE_THIRD, u: ONE_THIRD, u + 1: ONE_THIRD}
        if self.kind == "psi-free":
            if u < 0:
                raise UnreachableState(f"psi chain has no negative state {u}")
            if u == 0:
                return {0: ONE_THIRD, 1: 2 * ONE_THIRD}
            return {u - 1: ONE_THIRD, u: ONE_THIRD, u + 1: ONE_THIRD}
        if self.kind == "composite":
            for part in self.parts:
                if part.a <= k < part.b:
                    return part.row(k, u)
        try:
            return self.rows[(k, u)]
        except KeyError:
            raise UnreachableState(f"no row for state {u} at step {k} ({self.kind} kernel)") from None

    def has_row(self, k: int, u: int) -> bool:
        try:
            self.row(k, u)
            return True
        except UnreachableState:
            return False

    def states(self, k: int) -> list[int]:
        """States with a materialized row at step ``k`` (table kinds only)."""
        if self.kind == "composite":
            for part in self.parts:
                if part.a <= k < part.b:
                    return part.states(k)
        return sorted(u for (kk, u) in self.rows if kk == k)


def _weighted_row(w: Weights, k: int, u: int) -> dict[int, Fraction] | None:
    vals = {v: w(k + 1, v) for v in (u - 1, u, u + 1)}
    tot = sum(vals.values())
    if tot == 0:
        return None
    return {v: p / tot for v, p in vals.items()}


def _reachable_rows(w: Weights, a: int, b: int, alpha: int) -> dict:
    rows = {}
    cur = {alpha}
    for k in range(a, b):
        nxt = set()
        for u in sorted(cur):
            r = _weighted_row(w, k, u)
            if r is None:
                raise ValueError(f"state {u} at step {k} cannot continue")
            rows[(k, u)] = r
            nxt.update(v for v, p in r.items() if p)
        cur = nxt
    return rows


def kernel_p(f: Sequence[int], a: int, b: int, alpha: int) -> ChainKernel:
    """Walk from ``alpha`` at time ``a`` conditioned on ``0 < X_i <= f(i)``, ``a <= i <= b``."""
    if not 0 < alpha <= f[a]:
        raise ValueError(f"alpha={alpha} is outside the barrier (0, {f[a]}]")
    w = survival_weights_p(f, a, b)
    if w(a, alpha) == 0:
        raise ValueError(f"no path from alpha={alpha} survives to time {b}")
    return ChainKernel("P", a, b, _reachable_rows(w, a, b, alpha), start=alpha)


def kernel_r(f: Sequence[int], a: int, b: int, alpha: int, beta: int) -> ChainKernel:
    """As :func:`kernel_p`, additionally pinned to ``X_b = beta``."""
    if not 0 < alpha <= f[a]:
        raise ValueError(f"alpha={alpha} is outside the barrier (0, {f[a]}]")
    w = survival_weights_r(f, a, b, beta)
    if w(a, alpha) == 0:
        raise ValueError(f"endpoints alpha={alpha}, beta={beta} are incompatible on [{a}, {b}]")
    return ChainKernel("R", a, b, _reachable_rows(w, a, b, alpha), start=alpha)


def kernel_psi_free(a: int, b: int) -> ChainKernel:
    """Absolute value of the free lazy walk (reflected at 0)."""
    return ChainKernel("psi-free", a, b)


def kernel_zeta_free(a: int, b: int) -> ChainKernel:
    return ChainKernel("zeta-free", a, b)


def fixed_kernel(a: int, b: int, moves: dict[int, int]) -> ChainKernel:
    """Deterministic one-step kernel ``u -> moves[u]`` from time ``a`` to ``b = a+1``."""
    return ChainKernel("fixed", a, b, {(a, u): {v: Fraction(1)} for u, v in moves.items()})


def concat_kernels(parts: Sequence[ChainKernel], start: int | None = None) -> ChainKernel:
    parts = [p for p in parts if p.b > p.a]
    if not parts:
        raise ValueError("nothing to concatenate")
    for p, q in zip(parts, parts[1:]):
        if p.b != q.a:
            raise ValueError(f"kernels are not contiguous: [{p.a},{p.b}] then [{q.a},{q.b}]")
    return ChainKernel("composite", parts[0].a, parts[-1].b, start=start, parts=tuple(parts))


def chain_law_from_zeros(x: int, f: Sequence[int], zeros: Sequence[int], m: int | None = None) -> ChainKernel:
    """Law of ``|X_0|, ..., |X_l|`` given ``F`` and zeros exactly at ``zeros`` in ``(0, n]``.

    Between zeros the absolute value is a pinned chain with endpoints 1
    (the start ``x`` before the first zero), after the last zero it is the
    unpinned chain up to ``n``, and past ``n`` (when ``m > n``) it is the
    reflected free walk.  Returns one composite kernel started at ``x``.
    """
    n = len(f) - 1
    m = n if m is None else m
    zeros = list(zeros)
    if x < 1:
        raise ValueError("x must be >= 1")
    if any(z <= 0 or z > n for z in zeros) or any(p >= q for p, q in zip(zeros, zeros[1:])):
        raise ValueError("zero positions must be strictly increasing in (0, n]")
    parts: list[ChainKernel] = []
    pos, cur = 0, x
    try:
        for idx, c in enumerate(zeros):
            if c > pos:
                # positive excursion on [pos, c-1] ending at 1, then down to 0
                if c - 1 > pos:
                    parts.append(kernel_r(f, pos, c - 1, cur, 1))
                elif cur != 1:
                    raise ValueError(f"state {cur} at time {pos} cannot reach 0 at time {c}")
                parts.append(fixed_kernel(c - 1, c, {1: 0}))
            else:
                parts.append(fixed_kernel(c - 1, c, {0: 0}))
            nxt = zeros[idx + 1] if idx + 1 < len(zeros) else None
            if c < n and nxt != c + 1:
                parts.append(fixed_kernel(c, c + 1, {0: 1}))
            pos, cur = c + 1, 1
        if pos < n:
            parts.append(kernel_p(f, pos, n, cur))
        elif pos == n and not 0 < cur <= f[n]:
            raise ValueError("final state violates the barrier")
    except ValueError as exc:
        raise ValueError(f"inconsistent zero positions {zeros}: {exc}") from None
    if m > n:
        parts.append(kernel_psi_free(n, m))
    l = max(m, n)
    if not [p for p in parts if p.b > p.a]:
        return ChainKernel("composite", 0, l, start=x)
    return concat_kernels(parts, start=x)


# --------------------------------------------------------------------------
# laws of kernels


def path_law(kernel: ChainKernel, start: int | None = None) -> dict[tuple[int, ...], Fraction]:
    start = kernel.start if start is None else start
    law = {(start,): Fraction(1)}
    for k in range(kernel.a, kernel.b):
        nxt = {}
        for path, p in law.items():
            for v, q in kernel.row(k, path[-1]).items():
                if q:
                    nxt[path + (v,)] = p * q
        law = nxt
    return law


def marginals(kernel: ChainKernel, start: int | None = None) -> list[dict[int, Fraction]]:
    start = kernel.start if start is None else start
    out = [{start: Fraction(1)}]
    for k in range(kernel.a, kernel.b):
        nxt: dict[int, Fraction] = {}
        for u, p in out[-1].items():
            for v, q in kernel.row(k, u).items():
                if q:
                    nxt[v] = nxt.get(v, 0) + p * q
        out.append(nxt)
    return out

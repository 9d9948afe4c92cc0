"""Exact forward dynamic programming for the lazy walk on Z^k.

Every coordinate moves by -1, 0 or +1 with probability 1/3, independently.
After ``i`` steps every probability is an integer multiple of ``3**(-k*i)``,
so the DP carries integer path counts and divides once at the end.  Above
``EXACT_CAP`` (grid cells times steps) the float path is used and results
are plain floats; callers can force either mode with ``exact=``.

Exit-time convention: ``tau_A > m`` means ``Z_i in A`` for ``0 <= i <= m``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._util import CapExceeded, content_hash, number_record
from .lattice import LatticeDomain, Point, king_neighbors

EXACT_CAP = 2_000_000
BRUTE_FORCE_CAP = 10**7
_INT64_SAFE = 2**62


def as_domain(points, dimension: int | None = None) -> LatticeDomain:
    if isinstance(points, LatticeDomain):
        return points
    return LatticeDomain.from_points(points, dimension)


@dataclass(frozen=True)
class Grid:
    """Dense box covering a set of domains, padded by one cell on each side."""

    origin: tuple[int, ...]
    shape: tuple[int, ...]

    @classmethod
    def covering(cls, *domains: LatticeDomain, pad: int = 1) -> Grid:
        pts = np.array([p for d in domains for p in d.points])
        lo = pts.min(axis=0) - pad
        hi = pts.max(axis=0) + pad
        return cls(tuple(int(v) for v in lo), tuple(int(v) for v in hi - lo + 1))

    def index(self, p) -> tuple[int, ...]:
        return tuple(c - o for c, o in zip(p, self.origin))

    def mask(self, domain: LatticeDomain) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        if domain.points:
            idx = np.array([self.index(p) for p in domain.points])
            m[tuple(idx.T)] = True
        return m


def _neighbor_sum(a: np.ndarray) -> np.ndarray:
    # the 3^k-point kernel factorizes into a 3-point sum along each axis
    for axis in range(a.ndim):
        b = a.copy()
        lo = [slice(None)] * a.ndim
        hi = [slice(None)] * a.ndim
        lo[axis] = slice(1, None)
        hi[axis] = slice(None, -1)
        b[tuple(lo)] += a[tuple(hi)]
        b[tuple(hi)] += a[tuple(lo)]
        a = b
    return a


def _propagate(a: np.ndarray, mask: np.ndarray, exact: bool) -> np.ndarray:
    out = _neighbor_sum(a)
    if not exact:
        out = out / 3.0 ** a.ndim
    out[~mask] = 0
    return out


def _count_dtype(k: int, steps: int):
    return np.int64 if 3 ** (k * steps) < _INT64_SAFE else object


def _use_exact(grid: Grid, steps: int, exact: bool | None) -> bool:
    if exact is not None:
        return exact
    return int(np.prod(grid.shape)) * max(steps, 1) <= EXACT_CAP


def _delta(grid: Grid, z, exact: bool, steps: int) -> np.ndarray:
    dtype = _count_dtype(len(grid.shape), steps) if exact else float
    a = np.zeros(grid.shape, dtype=dtype)
    a[grid.index(z)] = 1
    return a


def _total(a: np.ndarray) -> int | float:
    return int(a.sum()) if a.dtype != float else float(a.sum())


def _prob(count, k: int, steps: int, exact: bool):
    return Fraction(int(count), 3 ** (k * steps)) if exact else float(count)


# --------------------------------------------------------------------------
# sparse exact probability vectors (reference semantics of one step)


@dataclass(frozen=True)
class ProbVector:
    dimension: int
    step_index: int
    mass: dict[Point, Fraction] = field(default_factory=dict)

    @classmethod
    def delta(cls, z) -> ProbVector:
        z = tuple(z)
        return cls(len(z), 0, {z: Fraction(1)})

    def total(self) -> Fraction:
        return sum(self.mass.values(), Fraction(0))


def step(pv: ProbVector, kill_domain) -> ProbVector:
    """One lazy-walk step from ``pv``, then kill mass outside ``kill_domain``."""
    kill = as_domain(kill_domain, pv.dimension)
    w = Fraction(1, 3**pv.dimension)
    new: dict[Point, Fraction] = {}
    for v, q in pv.mass.items():
        if not q:
            continue
        for u in itertools.chain([v], king_neighbors(v)):
            if u in kill.points:
                new[u] = new.get(u, Fraction(0)) + q * w
    return ProbVector(pv.dimension, pv.step_index + 1, new)


# --------------------------------------------------------------------------
# survival probabilities


@dataclass(frozen=True)
class SurvivalCurve:
    values: tuple
    exact: bool

    def __getitem__(self, m):
        return self.values[m]

    def __len__(self):
        return len(self.values)


def survival(z, domain, M: int, exact: bool | None = None) -> SurvivalCurve:
    """``s_m = P^z(tau_domain > m)`` for ``m = 0..M``."""
    domain = as_domain(domain, len(z))
    z = tuple(z)
    if z not in domain:
        raise ValueError(f"start point {z} is outside the domain")
    grid = Grid.covering(domain)
    ex = _use_exact(grid, M, exact)
    mask = grid.mask(domain)
    a = _delta(grid, z, ex, M)
    k = domain.dimension
    vals = [_prob(1, k, 0, ex)]
    for i in range(1, M + 1):
        a = _propagate(a, mask, ex)
        vals.append(_prob(_total(a), k, i, ex))
    return SurvivalCurve(tuple(vals), ex)


def _check_nested(z, inner: LatticeDomain, outer: LatticeDomain):
    if not inner.issubset(outer):
        raise ValueError("inner domain is not contained in the outer domain")
    if tuple(z) not in inner:
        raise ValueError(f"start point {tuple(z)} is outside the inner domain")


def joint_survival(z, inner, outer, m: int, n: int, exact: bool | None = None):
    """``P^z(tau_inner > m, tau_outer > n)`` for ``inner`` inside ``outer``."""
    inner = as_domain(inner, len(z))
    outer = as_domain(outer, len(z))
    _check_nested(z, inner, outer)
    if m >= n:
        return survival(z, inner, m, exact)[m]
    grid = Grid.covering(outer)
    ex = _use_exact(grid, n, exact)
    a = _delta(grid, tuple(z), ex, n)
    mi, mo = grid.mask(inner), grid.mask(outer)
    for i in range(n):
        a = _propagate(a, mi if i < m else mo, ex)
    return _prob(_total(a), len(grid.shape), n, ex)


def conditional_exit_prob(z, inner, outer, m: int, n: int, exact: bool | None = None):
    """``P^z(tau_inner > m | tau_outer > n)``."""
    outer = as_domain(outer, len(z))
    den = survival(z, outer, n, exact)[n]
    if den == 0:
        raise ZeroDivisionError("conditioning event has probability zero")
    return joint_survival(z, inner, outer, m, n, exact) / den


# --------------------------------------------------------------------------
# expected exit times


def _solve_sparse(rows: list[dict[int, Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Gaussian elimination in index order, no pivoting.

    Only used on irreducibly diagonally dominant systems, for which every
    leading pivot is nonzero.  With band-friendly ordering fill-in stays
    inside the band.
    """
    n = len(rows)
    rows = [dict(r) for r in rows]
    rhs = list(rhs)
    below: list[set[int]] = [set() for _ in range(n)]
    for i, r in enumerate(rows):
        for j in r:
            if j < i:
                below[j].add(i)
    for p in range(n):
        piv = rows[p].get(p, 0)
        if piv == 0:
            raise ZeroDivisionError("singular system")
        prow = rows[p]
        for i in sorted(below[p]):
            r = rows[i]
            factor = r.pop(p) / piv
            for j, v in prow.items():
                if j == p:
                    continue
                nv = r.get(j, 0) - factor * v
                if nv:
                    r[j] = nv
                else:
                    r.pop(j, None)
                if j < i and j > p:
                    below[j].add(i)
            rhs[i] -= factor * rhs[p]
    x = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        s = rhs[i] - sum((v * x[j] for j, v in rows[i].items() if j > i), Fraction(0))
        x[i] = s / rows[i][i]
    return x


def expected_exit_times(domain) -> dict[Point, Fraction]:
    """Exact ``E^v(tau)`` for every ``v`` in the domain.

    Solves ``3^k E(v) - sum_{w ~ v, w in D} E(w) = 3^k`` (the sum includes
    ``w = v``), i.e. ``E = 1 + 3^-k sum E`` with ``E = 0`` off the domain.
    """
    domain = as_domain(domain)
    k = domain.dimension
    order = sorted(domain.points, key=lambda p: (p[1:], p[0]))
    index = {p: i for i, p in enumerate(order)}
    w = 3**k
    rows = []
    for p in order:
        r = {index[p]: Fraction(w - 1)}
        for q in king_neighbors(p):
            j = index.get(q)
            if j is not None:
                r[j] = Fraction(-1)
        rows.append(r)
    sol = _solve_sparse(rows, [Fraction(w)] * len(order))
    return {p: sol[i] for p, i in index.items()}


def expected_exit_time(z, domain) -> Fraction:
    domain = as_domain(domain, len(z))
    if tuple(z) not in domain:
        raise ValueError(f"start point {tuple(z)} is outside the domain")
    return expected_exit_times(domain)[tuple(z)]


def decay_block(domain, exact: bool = True, max_block: int = 4096):
    """Smallest power of two ``j`` with ``q_j = max_v P^v(tau > j) <= 1/2``.

    Returns ``(j, q_j)``.  Since ``S(i + j) <= q_j S(i)`` for every start
    law, this gives a rigorous geometric tail bound.
    """
    domain = as_domain(domain)
    grid = Grid.covering(domain)
    mask = grid.mask(domain)
    k = domain.dimension
    j = 1
    a = mask.astype(np.int64).astype(object) if exact else mask.astype(float)
    done = 0
    while True:
        while done < j:
            a = _propagate(a, mask, exact)
            done += 1
        top = a.max()
        q = Fraction(int(top), 3 ** (k * j)) if exact else float(top)
        if q <= Fraction(1, 2):
            return j, q
        if j >= max_block:
            raise CapExceeded("survival does not decay within the block cap")
        j *= 2


def survival_sum_bounds(z, domain, tolerance: float, max_steps: int = 200_000, exact: bool = False):
    """Bracket ``sum_m P^z(tau > m)`` (which equals ``E^z(tau)``) by a truncated
    series plus a rigorous geometric tail; used as an independent cross-check
    of the linear solve."""
    domain = as_domain(domain, len(z))
    j, q = decay_block(domain, exact=exact)
    grid = Grid.covering(domain)
    mask = grid.mask(domain)
    k = domain.dimension
    a = _delta(grid, tuple(z), exact, 0)
    if exact:
        a = a.astype(object)
    partial = Fraction(0) if exact else 0.0
    for m in range(max_steps):
        s = _prob(_total(a), k, m, exact)
        tail = j * s / (1 - q)
        if tail <= tolerance:
            return partial, partial + tail
        partial += s
        a = _propagate(a, mask, exact)
    raise CapExceeded("series did not reach the tolerance within max_steps")


def conditional_expected_exit(z, inner, outer, n: int, tolerance, max_steps: int = 20_000):
    """Exact bracket ``(lo, hi)`` of ``sum_{m>=0} P^z(tau_inner > m | tau_outer > n)``.

    For ``m < n`` the joint probability is ``<mu_m, u_{n-m}>`` with ``mu_m``
    the inner-killed law at time ``m`` and ``u_j(v) = P^v(tau_outer > j)``;
    for ``m >= n`` it is the inner survival.  The tail beyond the last
    computed step is bounded with ``decay_block``.
    """
    inner = as_domain(inner, len(z))
    outer = as_domain(outer, len(z))
    _check_nested(z, inner, outer)
    tolerance = Fraction(tolerance)
    k = inner.dimension
    grid = Grid.covering(outer)
    mi, mo = grid.mask(inner), grid.mask(outer)

    u = [mo.astype(np.int64).astype(object)]
    for _ in range(n):
        u.append(_propagate(u[-1], mo, True))
    den = Fraction(int(u[n][grid.index(z)]), 3 ** (k * n))
    if den == 0:
        raise ZeroDivisionError("conditioning event has probability zero")

    j, q = decay_block(inner, exact=True)
    a = _delta(grid, tuple(z), True, 0).astype(object)
    partial = Fraction(0)
    for m in range(max_steps):
        if m < n:
            partial += Fraction(int((a * u[n - m]).sum()), 3 ** (k * n))
        else:
            s = Fraction(_total(a), 3 ** (k * m))
            tail = j * s / (1 - q)
            if tail / den <= tolerance:
                return partial / den, (partial + tail) / den
            partial += s
        a = _propagate(a, mi, True)
    raise CapExceeded("conditional expectation did not reach the tolerance within max_steps")


# --------------------------------------------------------------------------
# brute-force oracle


def _lookup(mask: np.ndarray, origin: np.ndarray, pos: np.ndarray) -> np.ndarray:
    idx = pos - origin
    ok = np.all((idx >= 0) & (idx < np.array(mask.shape)), axis=-1)
    out = np.zeros(pos.shape[:-1], dtype=bool)
    out[ok] = mask[tuple(idx[ok].T)]
    return out


def brute_force_joint(z, inner, outer, m: int, n: int, cap: int = BRUTE_FORCE_CAP) -> Fraction:
    """Enumerate every length-``max(m, n)`` path and add up the survivors.

    Independent of the DP: paths are checked point by point against both
    domains.  Enumeration is split into a Python loop over prefixes and a
    vectorized block of suffixes.
    """
    inner = as_domain(inner, len(z))
    outer = as_domain(outer, len(z))
    z = tuple(z)
    k = len(z)
    l = max(m, n)
    total = 3 ** (k * l)
    if total > cap:
        raise CapExceeded(f"{total} paths exceed the enumeration cap {cap}")
    if z not in inner or z not in outer:
        return Fraction(0)
    if l == 0:
        return Fraction(1)

    grid = Grid.covering(inner, outer, pad=l + 1)
    origin = np.array(grid.origin)
    mi, mo = grid.mask(inner), grid.mask(outer)
    moves = np.array(list(itertools.product((-1, 0, 1), repeat=k)))

    s = min(l, max(1, int(np.log(2**17) // np.log(3**k))))
    p = l - s
    suffix = np.array(list(itertools.product(range(3**k), repeat=s)))
    disp = np.cumsum(moves[suffix], axis=1)  # (paths, s, k)

    count = 0
    for prefix in itertools.product(range(3**k), repeat=p):
        pos = np.array(z)
        ok = True
        for i, mv in enumerate(prefix, start=1):
            pos = pos + moves[mv]
            pt = tuple(pos)
            if (i <= m and pt not in inner.points) or (i <= n and pt not in outer.points):
                ok = False
                break
        if not ok:
            continue
        path = pos + disp
        alive = np.ones(len(path), dtype=bool)
        for t in range(s):
            i = p + 1 + t
            if i <= m:
                alive &= _lookup(mi, origin, path[:, t])
            if i <= n:
                alive &= _lookup(mo, origin, path[:, t])
        count += int(alive.sum())
    return Fraction(count, total)


def result_record(instance: dict, z, m: int, n: int, value) -> dict:
    return {"instance": content_hash(instance), "z": list(z), "m": m, "n": n, **number_record(value)}

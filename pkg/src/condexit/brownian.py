"""Monte Carlo for planar Brownian motion killed on leaving a domain.

Paths are sampled on a fixed time grid.  A path exits when a sample
leaves the domain; for the slit square a sign change of x between samples
also counts as an exit when the linearly interpolated crossing height lies
on the slit.  For rectangles an optional Brownian-bridge correction kills
paths that would have touched a face between samples.

Each simulated path carries four survival flags, always in this order:
``U`` up to ``s``, ``U+`` up to ``s``, ``R`` up to ``t`` and ``R+`` up to
``t``.  With ``refine=True`` the path is sampled at ``dt/2`` and the flags
are evaluated twice, once on every sample and once on every second sample,
so the ``dt`` and ``dt/2`` estimates come from the same Brownian paths.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from . import exact
from .lattice import LatticeDomain, ParseError
from .rng import RNG_ALGORITHM, make_rng

DEFAULT_DT = 1e-4
CHUNK = 8192

U, UPLUS, R, RPLUS = 1, 2, 4, 8
_PROFILE, _RECT, _SLIT = 0, 1, 2


# --------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class RowProfile:
    """``{(x, y): y0 < y < yK, |x| < w(y)}`` from breakpoints ``(y_i, w_i)``.

    ``step``: ``w = w_i`` on ``(y_i, y_{i+1})``; the last width is unused and
    an interior breakpoint takes the smaller neighbouring width, so the set
    stays open.  ``linear``: piecewise-linear interpolation.
    """

    ys: tuple[float, ...]
    ws: tuple[float, ...]
    interp: str = "step"

    def __post_init__(self):
        if len(self.ys) != len(self.ws) or len(self.ys) < 2:
            raise ValueError("need at least two (y, w) breakpoints of equal count")
        if any(b <= a for a, b in zip(self.ys, self.ys[1:])):
            raise ValueError("breakpoints must be strictly increasing in y")
        if self.interp not in ("step", "linear"):
            raise ValueError(f"unknown interpolation {self.interp!r}")
        used = self.ws[:-1] if self.interp == "step" else self.ws
        if min(used) <= 0:
            raise ValueError("widths must be positive")

    @property
    def y_range(self) -> tuple[float, float]:
        return self.ys[0], self.ys[-1]

    @property
    def max_width(self) -> float:
        return max(self.ws[:-1] if self.interp == "step" else self.ws)

    def width(self, y: float) -> float:
        return _profile_width(self.encode()[1], float(y))

    def contains(self, x: float, y: float) -> bool:
        return bool(_inside_profile(self.encode()[1], float(x), float(y)))

    def encode(self):
        return _PROFILE, np.array([1.0 if self.interp == "linear" else 0.0, len(self.ys), *self.ys, *self.ws])

    def to_text(self) -> str:
        lines = [f"interp {self.interp}"] + [f"{y!r} {w!r}" for y, w in zip(self.ys, self.ws)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Rectangle:
    """``(-half_width, half_width) x (y_lo, y_hi)``."""

    half_width: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if self.half_width <= 0 or self.y_hi <= self.y_lo:
            raise ValueError("degenerate rectangle")

    def contains(self, x: float, y: float) -> bool:
        return abs(x) < self.half_width and self.y_lo < y < self.y_hi

    def encode(self):
        return _RECT, np.array([self.half_width, self.y_lo, self.y_hi], dtype=float)


@dataclass(frozen=True)
class SlitSquare:
    """``(-1, 1)^2`` minus ``{(0, y): |y| >= d/2}``."""

    d: float

    def __post_init__(self):
        if not 0 < self.d < 0.5:
            raise ValueError("slit gap must satisfy 0 < d < 1/2")

    def contains(self, x: float, y: float) -> bool:
        return abs(x) < 1 and abs(y) < 1 and not (x == 0 and abs(y) >= self.d / 2)

    def encode(self):
        return _SLIT, np.array([self.d], dtype=float)


def contains_domain(outer: Rectangle, inner) -> bool:
    """Sufficient check that ``inner`` lies in the rectangle ``outer``."""
    if isinstance(inner, Rectangle):
        return (inner.half_width <= outer.half_width and outer.y_lo <= inner.y_lo
                and inner.y_hi <= outer.y_hi)
    if isinstance(inner, RowProfile):
        lo, hi = inner.y_range
        return inner.max_width <= outer.half_width and outer.y_lo <= lo and hi <= outer.y_hi
    if isinstance(inner, SlitSquare):
        return outer.half_width >= 1 and outer.y_lo <= -1 and outer.y_hi >= 1
    raise TypeError(type(inner))


def parse_profile_text(text: str) -> RowProfile:
    """``y w`` pairs, one per line, plus an optional ``interp step|linear`` line."""
    ys, ws = [], []
    interp = "step"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if words[0] == "interp":
            if len(words) != 2 or words[1] not in ("step", "linear"):
                raise ParseError("expected 'interp step' or 'interp linear'", lineno)
            interp = words[1]
            continue
        if len(words) != 2:
            raise ParseError("expected a 'y w' pair", lineno)
        try:
            ys.append(float(words[0]))
            ws.append(float(words[1]))
        except ValueError:
            raise ParseError(f"not a number pair: {line!r}", lineno) from None
    try:
        return RowProfile(tuple(ys), tuple(ws), interp)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def load_profile(path) -> RowProfile:
    with open(path) as fh:
        return parse_profile_text(fh.read())


def random_row_profile(rng: np.random.Generator, outer: Rectangle, max_pieces: int = 4) -> RowProfile:
    pieces = int(rng.integers(1, max_pieces + 1))
    span = outer.y_hi - outer.y_lo
    lo = outer.y_lo + span * rng.uniform(0, 0.25)
    hi = outer.y_hi - span * rng.uniform(0, 0.25)
    inner = np.sort(rng.uniform(lo, hi, pieces - 1))
    ys = (lo, *inner.tolist(), hi)
    ws = tuple(outer.half_width * rng.uniform(0.25, 1.0, len(ys)))
    interp = "linear" if rng.random() < 0.5 else "step"
    return RowProfile(tuple(ys), ws, interp)


# --------------------------------------------------------------------------
# compiled path kernel


@numba.njit(cache=True, nogil=True)
def _profile_width(p, y):
    linear = p[0] > 0.5
    K = int(p[1])
    ys = p[2:2 + K]
    ws = p[2 + K:2 + 2 * K]
    if y <= ys[0] or y >= ys[K - 1]:
        return 0.0
    i = 0
    while ys[i + 1] < y:
        i += 1
    # now ys[i] < y <= ys[i + 1], or y == ys[i] only when i == 0 (excluded above)
    if linear:
        f = (y - ys[i]) / (ys[i + 1] - ys[i])
        return ws[i] + f * (ws[i + 1] - ws[i])
    if y == ys[i + 1]:
        return min(ws[i], ws[i + 1])
    return ws[i]


@numba.njit(cache=True, nogil=True)
def _inside_profile(p, x, y):
    return abs(x) < _profile_width(p, y)


@numba.njit(cache=True, nogil=True)
def _inside_rect(p, x, y):
    return abs(x) < p[0] and p[1] < y < p[2]


@numba.njit(cache=True, nogil=True)
def _inside_slit(p, x, y):
    if abs(x) >= 1.0 or abs(y) >= 1.0:
        return False
    return not (x == 0.0 and abs(y) >= p[0] / 2)


_INSIDE = {_PROFILE: _inside_profile, _RECT: _inside_rect, _SLIT: _inside_slit}


def _inside(code, p, x, y) -> bool:
    return bool(_INSIDE[code](p, x, y))


@numba.njit(cache=True, nogil=True)
def _crosses_slit(p, x0, y0, x1, y1):
    """A sign change of x whose linearly interpolated height lies on the slit."""
    if x0 * x1 >= 0.0:
        return False
    yc = y0 + (y1 - y0) * x0 / (x0 - x1)
    return abs(yc) >= p[0] / 2


@numba.njit(cache=True, nogil=True)
def _face_hit(d0, d1, h):
    e = 2.0 * d0 * d1 / h
    return math.exp(-e) if e < 700.0 else 0.0


@numba.njit(cache=True, nogil=True)
def _bridge_survives(ub, p, x0, y0, x1, y1, h, plus):
    """Survive the bridge between two interior samples of a rectangle, given a uniform ``ub``."""
    a = p[0]
    q = (1.0 - _face_hit(a - x0, a - x1, h)) * (1.0 - _face_hit(y0 - p[1], y1 - p[1], h))
    q *= 1.0 - _face_hit(p[2] - y0, p[2] - y1, h)
    if plus:
        q *= 1.0 - _face_hit(x0, x1, h)
    else:
        q *= 1.0 - _face_hit(a + x0, a + x1, h)
    return ub < q


@numba.njit(cache=True, nogil=True)
def _clearance_rect(p, x, y):
    return min(p[0] - abs(x), y - p[1], p[2] - y)


@numba.njit(cache=True, nogil=True)
def _clearance_slit(p, x, y):
    return min(1.0 - abs(x), 1.0 - abs(y), abs(x))


@numba.njit(cache=True, nogil=True)
def _clearance_profile(p, x, y):
    K = int(p[1])
    ys = p[2:2 + K]
    ws = p[2 + K:2 + 2 * K]
    w = _profile_width(p, y)
    r = min(y - ys[0], ys[K - 1] - y, w - abs(x))
    if r <= 0.0:
        return 0.0
    lo = y - r
    hi = y + r
    # smallest width over [lo, hi]
    for i in range(K - 1):
        if ys[i + 1] <= lo or ys[i] >= hi:
            continue
        if p[0] > 0.5:
            a = max(ys[i], lo)
            b = min(ys[i + 1], hi)
            f = (ws[i + 1] - ws[i]) / (ys[i + 1] - ys[i])
            w = min(w, ws[i] + f * (a - ys[i]), ws[i] + f * (b - ys[i]))
        else:
            w = min(w, ws[i])
    return min(r, w - abs(x))


_CLEARANCE = {_PROFILE: _clearance_profile, _RECT: _clearance_rect, _SLIT: _clearance_slit}

# Jumps of k grid steps are taken only while every active boundary is at least
# SKIP_SIGMAS * sqrt(k dt) away.  By the reflection inequality for symmetric
# sums, the chance that one of the skipped grid samples would have left the
# domain is below 8 * P(N > SKIP_SIGMAS), about 2.5e-13 per jump.
SKIP_SIGMAS = 7.5

_KERNELS: dict = {}


def _kernel(ucode: int, rcode: int, bridge: bool, refine: bool, skip: bool = True):
    """Path kernel specialised to one geometry pair, so the domain tests inline."""
    key = (ucode, rcode, bridge, refine, skip)
    if key in _KERNELS:
        return _KERNELS[key]
    inside_u = _INSIDE[ucode]
    inside_r = _INSIDE[rcode]
    clear_u = _CLEARANCE[ucode]
    clear_r = _CLEARANCE[rcode]
    slit_u = ucode == _SLIT
    slit_r = rcode == _SLIT
    bridge_u = bridge and ucode == _RECT
    bridge_r = bridge and rcode == _RECT
    sub = 2 if refine else 1

    @numba.njit(nogil=True)
    def update(flags, ub, up, rp, x0, y0, x1, y1, h, su, sr):
        if su and flags & 3:
            inside = inside_u(up, x1, y1)
            if flags & 1:
                ok = inside and not (slit_u and _crosses_slit(up, x0, y0, x1, y1))
                if ok and bridge_u:
                    ok = _bridge_survives(ub, up, x0, y0, x1, y1, h, False)
                if not ok:
                    flags &= ~1
            if flags & 2:
                ok = inside and x1 > 0.0
                if ok and bridge_u:
                    ok = _bridge_survives(ub, up, x0, y0, x1, y1, h, True)
                if not ok:
                    flags &= ~2
        if sr and flags & 12:
            inside = inside_r(rp, x1, y1)
            if flags & 4:
                ok = inside and not (slit_r and _crosses_slit(rp, x0, y0, x1, y1))
                if ok and bridge_r:
                    ok = _bridge_survives(ub, rp, x0, y0, x1, y1, h, False)
                if not ok:
                    flags &= ~4
            if flags & 8:
                ok = inside and x1 > 0.0
                if ok and bridge_r:
                    ok = _bridge_survives(ub, rp, x0, y0, x1, y1, h, True)
                if not ok:
                    flags &= ~8
        return flags

    @numba.njit(nogil=True)
    def clearance(flags, up, rp, x, y):
        c = np.inf
        if flags & 3:
            c = min(c, clear_u(up, x, y))
        if flags & 12:
            c = min(c, clear_r(rp, x, y))
        if flags & 10:
            c = min(c, abs(x))
        return c

    @numba.njit(nogil=True)
    def kernel(gen, n, zx, zy, steps_s, steps_t, dt, up, rp, out):
        """Coarse flags go in the low nibble of ``out[i]``, fine flags in the high one."""
        h = dt / sub
        sd = math.sqrt(h)
        skip_unit = SKIP_SIGMAS * math.sqrt(dt)
        coarse_total = max(steps_s, steps_t)
        total = coarse_total * sub
        start = 0
        if inside_u(up, zx, zy):
            start |= 1 | (2 if zx > 0.0 else 0)
        if inside_r(rp, zx, zy):
            start |= 4 | (8 if zx > 0.0 else 0)
        lim_s = steps_s * sub
        lim_t = steps_t * sub
        for path in range(n):
            x = zx
            y = zy
            cx = zx
            cy = zy
            fine = start
            coarse = start
            i = 0
            while i < total and (fine != 0 or coarse != 0):
                if skip:
                    # at a coarse grid point, so x == cx and y == cy
                    c = clearance(fine | coarse, up, rp, x, y) / skip_unit
                    k = 0 if c <= 0.0 else (int(c * c) if c < 1e4 else coarse_total)
                    k = min(k, coarse_total - i // sub)
                    if k >= 2:
                        sk = math.sqrt(k * dt)
                        x += sk * gen.standard_normal()
                        y += sk * gen.standard_normal()
                        cx = x
                        cy = y
                        i += k * sub
                        continue
                for _ in range(sub):
                    i += 1
                    nx = x + sd * gen.standard_normal()
                    ny = y + sd * gen.standard_normal()
                    # one uniform per step serves every bridge test, so kills stay nested
                    ub = gen.random() if bridge else 0.0
                    if sub > 1:
                        fine = update(fine, ub, up, rp, x, y, nx, ny, h, i <= lim_s, i <= lim_t)
                    else:
                        coarse = update(coarse, ub, up, rp, x, y, nx, ny, h, i <= lim_s, i <= lim_t)
                        fine = coarse
                    x = nx
                    y = ny
                if sub > 1:
                    j = i // sub
                    ub = gen.random() if bridge else 0.0
                    coarse = update(coarse, ub, up, rp, cx, cy, x, y, dt, j <= steps_s, j <= steps_t)
                    cx = x
                    cy = y
            out[path] = coarse | (fine << 4)

    _KERNELS[key] = kernel
    return kernel


# --------------------------------------------------------------------------
# runs and estimators


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    stderr: float
    count: int
    dt: float
    seed: int
    algorithm: str = RNG_ALGORITHM
    hits: int | None = None  # paths in the conditioning event, for ratios

    def interval(self, z: float = 1.959963984540054) -> tuple[float, float]:
        return self.estimate - z * self.stderr, self.estimate + z * self.stderr

    def record(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr, "count": self.count, "dt": self.dt,
                "seed": self.seed, "algorithm": self.algorithm, "hits": self.hits}


@dataclass
class PathTally:
    """Histogram of per-path flag bytes; merging is a plain sum."""

    counts: np.ndarray
    dt: float
    seed: int
    refine: bool
    codes: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: PathTally) -> PathTally:
        if (self.dt, self.seed, self.refine) != (other.dt, other.seed, other.refine):
            raise ValueError("cannot merge tallies from different runs")
        codes = None
        if self.codes is not None and other.codes is not None:
            codes = np.concatenate([self.codes, other.codes])
        return PathTally(self.counts + other.counts, self.dt, self.seed, self.refine, codes)

    def hits(self, bits: int, fine: bool = False) -> int:
        return int(self.counts[(self._flags(fine) & bits) == bits].sum())

    def _flags(self, fine: bool) -> np.ndarray:
        codes = np.arange(256)
        return (codes >> 4) & 15 if fine else codes & 15

    def _dt(self, fine: bool) -> float:
        return self.dt / 2 if fine else self.dt

    def probability(self, bits: int, fine: bool = False) -> McEstimate:
        flags = self._flags(fine)
        k = int(self.counts[(flags & bits) == bits].sum())
        n = self.n
        p = k / n
        se = math.sqrt(p * (1 - p) / (n - 1)) if n > 1 else math.inf
        return McEstimate(p, se, n, self._dt(fine), self.seed)

    def ratio(self, num_bits: int, den_bits: int, fine: bool = False) -> McEstimate:
        """Shared-path ratio ``P(num and den) / P(den)`` with a delta-method error."""
        flags = self._flags(fine)
        b = (flags & den_bits) == den_bits
        a = b & ((flags & num_bits) == num_bits)
        nb = int(self.counts[b].sum())
        na = int(self.counts[a].sum())
        n = self.n
        if nb == 0:
            raise ZeroDivisionError("no path survived the conditioning event")
        r = na / nb
        # influence values a_i - r b_i: (1 - r) on joint hits, -r on conditioning-only hits
        ss = na * (1 - r) ** 2 + (nb - na) * r**2
        se = math.sqrt(ss / (n * (n - 1))) / (nb / n) if n > 1 else math.inf
        return McEstimate(r, se, n, self._dt(fine), self.seed, hits=nb)

    def conditionals(self, fine: bool = False) -> tuple[McEstimate, McEstimate]:
        """``(P(tau_U+ > s | tau_R+ > t), P(tau_U > s | tau_R > t))``."""
        return self.ratio(UPLUS, RPLUS, fine), self.ratio(U, R, fine)


def _steps(horizon: float, dt: float) -> int:
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    return int(round(horizon / dt))


def run_paths(z, u_domain, r_domain, s: float, t: float, dt: float = DEFAULT_DT, count: int = 10_000,
              seed: int = 0, label: str = "", threads: int = 1, bridge: bool = False, refine: bool = False,
              keep_codes: bool = False, skip: bool = True, first_chunk: int = 0) -> PathTally:
    """Simulate ``count`` paths from ``z``; deterministic in (seed, label, dt, count) for any thread count."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if count < 1:
        raise ValueError("count must be >= 1")
    zx, zy = map(float, z)
    if not u_domain.contains(zx, zy) or not r_domain.contains(zx, zy):
        raise ValueError(f"start point {tuple(z)} is not inside the domains")
    ucode, up = u_domain.encode()
    rcode, rp = r_domain.encode()
    ss, st = _steps(s, dt), _steps(t, dt)
    sub = 2 if refine else 1
    sizes = [min(CHUNK, count - c) for c in range(0, count, CHUNK)]

    kernel = _kernel(ucode, rcode, bool(bridge), bool(refine), bool(skip))

    def work(idx):
        gen = make_rng(seed, "paths", label, repr(dt), first_chunk + idx)
        out = np.empty(sizes[idx], dtype=np.uint8)
        kernel(gen, sizes[idx], zx, zy, ss, st, dt, up, rp, out)
        return out

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            chunks = list(pool.map(work, range(len(sizes))))
    else:
        chunks = [work(i) for i in range(len(sizes))]
    codes = np.concatenate(chunks)
    counts = np.bincount(codes, minlength=256)
    return PathTally(counts, dt, seed, refine, codes if keep_codes else None)


def simulate_exit(z, domain, horizon: float, dt: float = DEFAULT_DT, seed: int = 0, count: int = 1,
                  label: str = "exit") -> np.ndarray:
    """Per-path indicators of ``tau > horizon``."""
    if not domain.contains(*map(float, z)):
        raise ValueError(f"start point {tuple(z)} is outside the domain")
    tally = run_paths(z, domain, domain, horizon, 0.0, dt, count, seed, label, keep_codes=True)
    return (tally.codes & U).astype(bool)


def conditional_estimate(z, u_domain, r_domain, s: float, t: float, dt: float = DEFAULT_DT,
                         count: int = 10_000, seed: int = 0, **kw) -> tuple[McEstimate, McEstimate]:
    """Left and right conditionals estimated from one set of shared paths."""
    if isinstance(r_domain, Rectangle) and not contains_domain(r_domain, u_domain):
        raise ValueError("U must lie inside R")
    if z[0] <= 0:
        raise ValueError("start point must have positive x")
    return run_paths(z, u_domain, r_domain, s, t, dt, count, seed, **kw).conditionals()


# --------------------------------------------------------------------------
# the slit counterexample


SQUARE = Rectangle(1.0, -1.0, 1.0)


@dataclass(frozen=True)
class CounterexampleRow:
    d: float
    left: float  # identically 1: the half slit square equals the half square
    right: McEstimate
    denominator: McEstimate
    right_fine: McEstimate | None = None

    def record(self) -> dict:
        out = {"d": self.d, "left": self.left, "estimate": self.right.estimate, "stderr": self.right.stderr,
               "count": self.right.count, "hits": self.right.hits, "dt": self.right.dt, "seed": self.right.seed,
               "denominator": self.denominator.estimate, "denominator_stderr": self.denominator.stderr}
        if self.right_fine is not None:
            out.update(fine_dt=self.right_fine.dt, fine_estimate=self.right_fine.estimate,
                       fine_stderr=self.right_fine.stderr)
        return out


def run_until(z, u_domain, r_domain, s: float, t: float, dt: float, count: int, seed: int, label: str,
              min_hits: int = 0, hit_bits: int = R, batch: int = 16 * CHUNK, **kw) -> PathTally:
    """At least ``count`` paths, extended batch by batch until ``min_hits`` paths satisfy ``hit_bits``.

    Batches start on chunk boundaries, so the result equals one long run
    with the same total count.
    """
    if batch % CHUNK:
        raise ValueError("batch must be a multiple of the chunk size")
    tally = run_paths(z, u_domain, r_domain, s, t, dt, count, seed, label, **kw)
    done = count
    while tally.hits(hit_bits) < min_hits:
        first = -(-done // CHUNK)
        if done % CHUNK:
            raise ValueError("count must be a multiple of the chunk size when extending")
        tally = tally.merge(run_paths(z, u_domain, r_domain, s, t, dt, batch, seed, label,
                                      first_chunk=first, **kw))
        done += batch
    return tally


def counterexample_curve(ds, s: float = 1.0, t: float = 1.0, dt: float = DEFAULT_DT, count: int = 100_000,
                         seed: int = 0, threads: int = 1, refine: bool = False,
                         min_hits: int = 0) -> list[CounterexampleRow]:
    """``P(tau_U > s | tau_R > t)`` from ``(d, 1/2)`` for each gap ``d``, sorted by ``d``.

    With ``min_hits`` the run is extended until that many paths satisfy the
    conditioning event.
    """
    rows = []
    for d in sorted(ds):
        tally = run_until((d, 0.5), SlitSquare(d), SQUARE, s, t, dt, count, seed, f"slit:{d!r}",
                          min_hits=min_hits, threads=threads, refine=refine)
        rows.append(CounterexampleRow(d, 1.0, tally.ratio(U, R), tally.probability(R),
                                      tally.ratio(U, R, fine=True) if refine else None))
    return rows


# --------------------------------------------------------------------------
# lattice discretization


def discretize(domain, delta: float) -> LatticeDomain:
    """Lattice points ``(i, j)`` with ``(i delta, j delta)`` inside the open domain."""
    if isinstance(domain, Rectangle):
        xr, (ylo, yhi) = domain.half_width, (domain.y_lo, domain.y_hi)
    elif isinstance(domain, RowProfile):
        xr, (ylo, yhi) = domain.max_width, domain.y_range
    else:
        xr, ylo, yhi = 1.0, -1.0, 1.0
    imax = int(math.ceil(xr / delta)) + 1
    js = range(int(math.floor(ylo / delta)) - 1, int(math.ceil(yhi / delta)) + 2)
    pts = [(i, j) for j in js for i in range(-imax, imax + 1) if domain.contains(i * delta, j * delta)]
    if not pts:
        raise ValueError(f"no lattice points at scale {delta}")
    return LatticeDomain.from_points(pts, 2)


@dataclass(frozen=True)
class ScalingRow:
    delta: float
    steps_s: int
    steps_t: int
    lattice_z: tuple[int, int]
    discrete_left: float
    discrete_right: float
    mc_left: McEstimate
    mc_right: McEstimate
    raw_s: float = 0.0
    raw_t: float = 0.0

    @property
    def gap_left(self) -> float:
        return abs(self.discrete_left - self.mc_left.estimate)

    @property
    def gap_right(self) -> float:
        return abs(self.discrete_right - self.mc_right.estimate)

    def record(self) -> dict:
        return {"scale": self.delta, "M": self.steps_s, "N": self.steps_t,
                "M_unrounded": self.raw_s, "N_unrounded": self.raw_t, "z": list(self.lattice_z),
                "discrete_left": self.discrete_left, "discrete_right": self.discrete_right,
                "estimate_left": self.mc_left.estimate, "stderr_left": self.mc_left.stderr,
                "estimate_right": self.mc_right.estimate, "stderr_right": self.mc_right.stderr,
                "count": self.mc_right.count, "dt": self.mc_right.dt, "seed": self.mc_right.seed,
                "gap_left": self.gap_left, "gap_right": self.gap_right}


def lattice_steps(horizon: float, delta: float) -> int:
    """Steps of the lazy walk matching ``horizon``; each step has variance ``2/3`` per coordinate."""
    return int(round(3 * horizon / (2 * delta * delta)))


def discrete_conditionals(u_domain, r_domain, z, s: float, t: float, delta: float, exact_mode: bool | None = None):
    lam, T = discretize(u_domain, delta), discretize(r_domain, delta)
    zl = (int(round(z[0] / delta)), int(round(z[1] / delta)))
    M, N = lattice_steps(s, delta), lattice_steps(t, delta)
    left = exact.conditional_exit_prob(zl, lam.half(), T.half(), M, N, exact_mode)
    right = exact.conditional_exit_prob(zl, lam, T, M, N, exact_mode)
    return zl, M, N, left, right


def scaling_limit_check(u_domain: RowProfile, r_domain: Rectangle, z, s: float, t: float, scales,
                        dt: float = DEFAULT_DT, count: int = 100_000, seed: int = 0, threads: int = 1,
                        exact_mode: bool | None = None) -> list[ScalingRow]:
    """Discrete conditionals at each lattice scale beside one shared Monte Carlo estimate."""
    mc_left, mc_right = conditional_estimate(z, u_domain, r_domain, s, t, dt, count, seed,
                                             label="scaling", threads=threads)
    rows = []
    for delta in scales:
        zl, M, N, left, right = discrete_conditionals(u_domain, r_domain, z, s, t, delta, exact_mode)
        raw = [3 * h / (2 * delta * delta) for h in (s, t)]
        rows.append(ScalingRow(delta, M, N, zl, float(left), float(right), mc_left, mc_right, *raw))
    return rows

"""Finite lattice domains in Z^k.

A domain is stored as an explicit point set.  Coordinates are tuples of
ints; the first coordinate is the one the walk is reflected in, the rest
form the "tail" (the y-coordinate in two dimensions).
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator

import numpy as np

Point = tuple[int, ...]


class ParseError(ValueError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass(frozen=True)
class ValidationReport:
    symmetric: bool
    convex: bool
    connected: bool

    @property
    def ok(self) -> bool:
        return self.symmetric and self.convex and self.connected

    def failures(self) -> list[str]:
        return [name for name in ("symmetric", "convex", "connected") if not getattr(self, name)]


@dataclass(frozen=True)
class LatticeDomain:
    dimension: int
    points: frozenset[Point]

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        for p in self.points:
            if len(p) != self.dimension:
                raise ValueError(f"point {p} has wrong dimension (expected {self.dimension})")

    @classmethod
    def from_points(cls, points: Iterable[Iterable[int]], dimension: int | None = None) -> LatticeDomain:
        pts = frozenset(tuple(int(c) for c in p) for p in points)
        if dimension is None:
            if not pts:
                raise ValueError("cannot infer the dimension of an empty domain")
            dimension = len(next(iter(pts)))
        return cls(dimension, pts)

    @classmethod
    def from_rows(cls, rows: dict[tuple[int, ...], tuple[int, int]], dimension: int) -> LatticeDomain:
        """Build from ``{tail: (xmin, xmax)}``; empty intervals are skipped."""
        pts = set()
        for tail, (lo, hi) in rows.items():
            if len(tail) != dimension - 1:
                raise ValueError(f"tail {tail} has wrong length")
            pts.update((x, *tail) for x in range(lo, hi + 1))
        return cls(dimension, frozenset(pts))

    def __contains__(self, p) -> bool:
        return tuple(p) in self.points

    def __iter__(self) -> Iterator[Point]:
        return iter(sorted(self.points))

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def rows(self) -> dict[tuple[int, ...], list[int]]:
        """Sorted first coordinates admitted in each tail row."""
        out: dict[tuple[int, ...], list[int]] = {}
        for p in self.points:
            out.setdefault(p[1:], []).append(p[0])
        for xs in out.values():
            xs.sort()
        return out

    def row_bound(self, tail) -> int:
        """Largest first coordinate in the row ``tail``; -1 if the row is empty.

        For a symmetric, convex domain the row is exactly ``[-b, b]``.
        """
        xs = self.rows.get(tuple(tail))
        return xs[-1] if xs else -1

    def bbox(self) -> tuple[tuple[int, int], ...]:
        if not self.points:
            raise ValueError("empty domain has no bounding box")
        arr = np.array(sorted(self.points))
        return tuple((int(lo), int(hi)) for lo, hi in zip(arr.min(axis=0), arr.max(axis=0)))

    @cached_property
    def report(self) -> ValidationReport:
        return ValidationReport(
            symmetric=_is_symmetric(self.points),
            convex=all(xs[-1] - xs[0] + 1 == len(xs) for xs in self.rows.values()),
            connected=_is_connected(self.points, self.dimension),
        )

    def validate(self) -> ValidationReport:
        if not self.points:
            raise ValueError("domain is empty")
        return self.report

    def half(self) -> LatticeDomain:
        return LatticeDomain(self.dimension, frozenset(p for p in self.points if p[0] > 0))

    def issubset(self, other: LatticeDomain) -> bool:
        return self.points <= other.points

    def to_text(self) -> str:
        lines = ["# lattice-domain v1", f"dim {self.dimension}"]
        for tail in sorted(self.rows):
            xs = self.rows[tail]
            if xs[-1] - xs[0] + 1 != len(xs):
                raise ValueError(f"row {tail} is not an interval; not representable in the text format")
            lines.append(" ".join(["tail", *map(str, tail), ":", str(xs[0]), str(xs[-1])]))
        return "\n".join(lines) + "\n"


def _is_symmetric(points: frozenset[Point]) -> bool:
    return all((-p[0], *p[1:]) in points for p in points)


def king_neighbors(p: Point) -> Iterator[Point]:
    for off in itertools.product((-1, 0, 1), repeat=len(p)):
        if any(off):
            yield tuple(a + b for a, b in zip(p, off))


def _is_connected(points: frozenset[Point], dimension: int) -> bool:
    if not points:
        return False
    start = next(iter(points))
    seen = {start}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        for q in king_neighbors(p):
            if q in points and q not in seen:
                seen.add(q)
                queue.append(q)
    return len(seen) == len(points)


def half(domain: LatticeDomain) -> LatticeDomain:
    return domain.half()


def validate(domain: LatticeDomain) -> ValidationReport:
    return domain.validate()


@dataclass(frozen=True)
class LatticeRect:
    """``|x_1| <= half_width`` and ``lo_j <= x_j <= hi_j`` for the tail coordinates."""

    half_width: int
    bounds: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.half_width < 1:
            raise ValueError("half_width must be a positive integer")
        for lo, hi in self.bounds:
            if lo > hi:
                raise ValueError(f"empty coordinate range [{lo}, {hi}]")

    @property
    def dimension(self) -> int:
        return 1 + len(self.bounds)

    def admits(self, p) -> bool:
        if abs(p[0]) > self.half_width:
            return False
        return all(lo <= c <= hi for c, (lo, hi) in zip(p[1:], self.bounds))

    def points(self) -> LatticeDomain:
        ranges = [range(-self.half_width, self.half_width + 1)]
        ranges += [range(lo, hi + 1) for lo, hi in self.bounds]
        return LatticeDomain(self.dimension, frozenset(itertools.product(*ranges)))

    @classmethod
    def bounding(cls, domain: LatticeDomain) -> LatticeRect:
        """Smallest symmetric rectangle containing ``domain``."""
        box = domain.bbox()
        return cls(max(1, max(abs(box[0][0]), abs(box[0][1]))), tuple(box[1:]))

    def to_text(self) -> str:
        parts = [str(self.half_width)] + [f"{lo} {hi}" for lo, hi in self.bounds]
        return "rect " + " ".join(parts) + "\n"


def contains_rect(rect: LatticeRect, domain: LatticeDomain) -> bool:
    if rect.dimension != domain.dimension:
        raise ValueError(f"dimension mismatch: rect {rect.dimension}, domain {domain.dimension}")
    return all(rect.admits(p) for p in domain.points)


def generate_random_domain(seed: int, k: int, max_extent: int) -> LatticeDomain:
    """Random symmetric, x-convex, king-connected domain.

    Each tail row gets a symmetric interval ``[-w, w]`` (or nothing); rows
    not king-connected to the widest one are dropped afterwards.
    """
    if max_extent < 1:
        raise ValueError("max_extent must be >= 1")
    rng = np.random.default_rng([seed, k, max_extent])
    sizes = [int(rng.integers(1, max_extent + 1)) for _ in range(k - 1)]
    rows: dict[tuple[int, ...], int] = {}
    for tail in itertools.product(*(range(s) for s in sizes)):
        # -1 marks an empty row
        w = int(rng.integers(-1, max_extent + 1)) if rng.random() < 0.15 else int(rng.integers(0, max_extent + 1))
        if w >= 0:
            rows[tail] = w
    if not rows:
        rows[(0,) * (k - 1)] = 0
    widest = max(sorted(rows), key=lambda t: rows[t])
    if rows[widest] == 0:
        rows[widest] = 1
    # rows are symmetric intervals containing 0, so two rows are king-adjacent
    # exactly when their tails are
    keep = {widest}
    queue = deque([widest])
    while queue:
        t = queue.popleft()
        for off in itertools.product((-1, 0, 1), repeat=k - 1):
            u = tuple(a + b for a, b in zip(t, off))
            if u in rows and u not in keep:
                keep.add(u)
                queue.append(u)
    return LatticeDomain.from_rows({t: (-rows[t], rows[t]) for t in keep}, k)


def parse_domain_text(text: str) -> tuple[LatticeDomain, LatticeRect | None]:
    """Parse the domain file format; an optional ``rect`` line is returned too."""
    dim = None
    rows: dict[tuple[int, ...], tuple[int, int]] = {}
    rect = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        try:
            if dim is None:
                if words[0] != "dim" or len(words) != 2:
                    raise ParseError("expected 'dim k' header", lineno)
                dim = int(words[1])
                if dim < 1:
                    raise ParseError("dimension must be >= 1", lineno)
            elif words[0] == "tail":
                if ":" not in words:
                    raise ParseError("tail line needs ':'", lineno)
                sep = words.index(":")
                tail = tuple(int(w) for w in words[1:sep])
                bounds = [int(w) for w in words[sep + 1:]]
                if len(tail) != dim - 1 or len(bounds) != 2:
                    raise ParseError(f"tail line must have {dim - 1} tail coords and 2 bounds", lineno)
                if bounds[0] > bounds[1]:
                    raise ParseError("xmin > xmax", lineno)
                if tail in rows:
                    raise ParseError(f"duplicate tail {tail}", lineno)
                rows[tail] = (bounds[0], bounds[1])
            elif words[0] == "rect":
                nums = [int(w) for w in words[1:]]
                if len(nums) != 1 + 2 * (dim - 1):
                    raise ParseError(f"rect line needs {1 + 2 * (dim - 1)} integers", lineno)
                rect = LatticeRect(nums[0], tuple(zip(nums[1::2], nums[2::2])))
            else:
                raise ParseError(f"unknown directive {words[0]!r}", lineno)
        except ParseError:
            raise
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if dim is None:
        raise ParseError("missing 'dim k' header")
    if not rows:
        raise ParseError("domain has no rows")
    domain = LatticeDomain.from_rows(rows, dim)
    if rect is not None and rect.dimension != dim:
        raise ParseError("rect dimension does not match domain")
    return domain, rect


def load_domain(path) -> tuple[LatticeDomain, LatticeRect | None]:
    with open(path) as fh:
        return parse_domain_text(fh.read())

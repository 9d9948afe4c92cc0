import itertools

import pytest
from hypothesis import given, settings, strategies as st

from condexit.lattice import (LatticeDomain, LatticeRect, ParseError, contains_rect, generate_random_domain, half,
                              parse_domain_text, validate)


def block(xs, ys):
    return LatticeDomain.from_points(itertools.product(xs, ys))


def test_full_block_is_valid():
    rep = validate(block(range(-1, 2), range(-1, 2)))
    assert rep.ok and rep.failures() == []


def test_split_row_fails_convexity_and_connectivity():
    rep = validate(LatticeDomain.from_points([(-1, 0), (1, 0)]))
    assert rep.symmetric
    assert not rep.convex
    assert not rep.connected


def test_distance_two_points_are_disconnected():
    rep = validate(LatticeDomain.from_points([(0, 0), (0, 2)]))
    assert not rep.connected


def test_diagonal_neighbours_are_connected():
    rep = validate(LatticeDomain.from_points([(0, 0), (1, 1), (-1, 1)]))
    assert rep.connected


def test_half_examples():
    assert half(block(range(-1, 2), [0])).points == {(1, 0)}
    assert len(half(block([0], [0, 1]))) == 0
    h = half(block(range(-2, 3), range(0, 3)))
    assert h.points == set(itertools.product([1, 2], range(3)))


def test_half_of_symmetric_domain_is_not_symmetric():
    assert not validate(half(block(range(-2, 3), [0]))).symmetric


def test_contains_rect_examples():
    assert contains_rect(LatticeRect(2, ((-1, 1),)), block(range(-1, 2), [0]))
    assert not contains_rect(LatticeRect(1, ((0, 0),)), block(range(-2, 3), [0]))
    d = block(range(-2, 3), range(1, 4))
    assert contains_rect(LatticeRect.bounding(d), d)


def test_contains_rect_dimension_mismatch():
    with pytest.raises(ValueError):
        contains_rect(LatticeRect(1, ()), block([0], [0]))


def test_generated_examples():
    a = generate_random_domain(1, 2, 4)
    assert validate(a).ok
    assert generate_random_domain(1, 2, 4) == a
    b = generate_random_domain(2, 3, 3)
    assert b.dimension == 3 and validate(b).ok


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(1, 3), extent=st.integers(1, 5))
def test_generated_domains_are_valid(seed, k, extent):
    d = generate_random_domain(seed, k, extent)
    assert validate(d).ok
    assert len(d.half()) > 0
    assert contains_rect(LatticeRect.bounding(d), d)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(1, 3))
def test_text_round_trip(seed, k):
    d = generate_random_domain(seed, k, 4)
    rect = LatticeRect.bounding(d)
    back, back_rect = parse_domain_text(d.to_text() + rect.to_text())
    assert back == d
    assert back_rect == rect


@pytest.mark.parametrize("text, line", [
    ("tail 0 : -1 1\n", 1),
    ("dim 2\ntail 0 -1 1\n", 2),
    ("dim 2\ntail 0 : 1 -1\n", 2),
    ("dim 2\ntail 0 : -1 1\ntail 0 : -1 1\n", 3),
    ("dim 2\ntail 0 : -1 1\nrect 2 0\n", 3),
    ("dim 2\ntail 0 : -1 x\n", 2),
    ("dim 2\n\nbogus 1\n", 3),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as err:
        parse_domain_text(text)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_parse_requires_rows():
    with pytest.raises(ParseError):
        parse_domain_text("dim 2\n# nothing\n")


def test_parse_allows_comments():
    d, rect = parse_domain_text("dim 2  # header\ntail 0 : -1 1\ntail 1 : 0 0\nrect 2 0 1\n")
    assert d.points == {(-1, 0), (0, 0), (1, 0), (0, 1)}
    assert rect == LatticeRect(2, ((0, 1),))

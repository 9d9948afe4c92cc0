import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from condexit import exact
from condexit._util import CapExceeded
from condexit.lattice import LatticeDomain, LatticeRect, generate_random_domain

THIRD = Fraction(1, 3)


def line(*xs):
    return LatticeDomain.from_points([(x,) for x in xs])


def test_step_from_centre_spreads_uniformly():
    box = LatticeRect(1, ((-1, 1),)).points()
    pv = exact.step(exact.ProbVector.delta((0, 0)), box)
    assert pv.mass == {p: Fraction(1, 9) for p in box.points}


def test_step_single_point_keeps_a_third():
    pv = exact.step(exact.ProbVector.delta((1,)), line(1))
    assert pv.mass == {(1,): THIRD}


def test_step_without_absorption_keeps_mass():
    big = LatticeRect(5, ((-5, 5),)).points()
    pv = exact.ProbVector.delta((0, 1))
    for _ in range(3):
        pv = exact.step(pv, big)
    assert pv.total() == 1


def test_step_matches_vectorized_survival():
    d = generate_random_domain(3, 2, 3)
    z = sorted(d.half().points)[0]
    pv = exact.ProbVector.delta(z)
    curve = exact.survival(z, d, 5, exact=True)
    for m in range(1, 6):
        pv = exact.step(pv, d)
        assert pv.total() == curve[m]


def test_survival_basics():
    d = LatticeRect(1, ((-1, 1),)).points()
    assert exact.survival((0, 0), d, 1)[0] == 1
    assert exact.survival((0, 0), d, 1)[1] == 1
    curve = exact.survival((1,), line(1), 8)
    assert list(curve.values) == [THIRD**m for m in range(9)]


def test_brute_force_single_point():
    assert exact.brute_force_joint((1,), line(1), line(1), 2, 0) == Fraction(1, 9)
    assert exact.brute_force_joint((1,), line(1), line(1), 0, 0) == 1


def test_brute_force_cap():
    d = LatticeRect(3, ((-3, 3),)).points()
    with pytest.raises(CapExceeded):
        exact.brute_force_joint((0, 0), d, d, 8, 8, cap=3**10)


def test_joint_trivial_cases():
    d = generate_random_domain(5, 2, 4)
    T = LatticeRect.bounding(d).points()
    z = sorted(d.half().points)[-1]
    assert exact.joint_survival(z, d, T, 0, 0) == 1
    assert exact.joint_survival(z, d, d, 3, 5) == exact.survival(z, d, 5)[5]
    assert exact.conditional_exit_prob(z, d, T, 0, 4) == 1
    assert exact.conditional_exit_prob(z, d, d, 2, 4) == 1


def test_start_outside_is_rejected():
    with pytest.raises(ValueError):
        exact.survival((5,), line(1), 2)
    with pytest.raises(ValueError):
        exact.joint_survival((1,), line(1, 2), line(1), 1, 1)


def random_instance(seed, k, max_steps):
    rng = np.random.default_rng(seed)
    inner = generate_random_domain(seed, k, 3)
    box = inner.bbox()
    rect = LatticeRect(max(abs(box[0][0]), 1) + int(rng.integers(0, 2)),
                       tuple((lo - int(rng.integers(0, 2)), hi + int(rng.integers(0, 2))) for lo, hi in box[1:]))
    pts = sorted(inner.points)
    z = pts[int(rng.integers(len(pts)))]
    m = int(rng.integers(0, max_steps + 1))
    n = int(rng.integers(0, max_steps + 1))
    return z, inner, rect.points(), m, n


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(1, 3))
def test_dp_equals_path_enumeration(seed, k):
    z, inner, outer, m, n = random_instance(seed, k, 12 // k)
    dp = exact.joint_survival(z, inner, outer, m, n, exact=True)
    assert dp == exact.brute_force_joint(z, inner, outer, m, n)
    assert isinstance(dp, Fraction)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_float_mode_matches_exact(seed):
    z, inner, outer, m, n = random_instance(seed, 2, 20)
    a = exact.joint_survival(z, inner, outer, m, n, exact=True)
    b = exact.joint_survival(z, inner, outer, m, n, exact=False)
    assert isinstance(b, float)
    assert abs(float(a) - b) < 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_survival_monotone_in_time_and_domain(seed):
    z, inner, outer, m, n = random_instance(seed, 2, 10)
    s_in = exact.survival(z, inner, 10).values
    s_out = exact.survival(z, outer, 10).values
    assert all(a >= b for a, b in zip(s_in, s_in[1:]))
    assert all(a <= b for a, b in zip(s_in, s_out))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), m=st.integers(0, 10))
def test_survival_is_reflection_symmetric(seed, m):
    d = generate_random_domain(seed, 2, 4)
    x, y = sorted(d.points)[seed % len(d)]
    assert exact.survival((x, y), d, m)[m] == exact.survival((-x, y), d, m)[m]


def one_dim_survival(x, lo, hi, m):
    # independent oracle: transfer matrix of the killed lazy walk on [lo, hi]
    size = hi - lo + 1
    P = np.zeros((size, size), dtype=object)
    for i in range(size):
        for j in (i - 1, i, i + 1):
            if 0 <= j < size:
                P[i, j] = THIRD
    v = np.array([Fraction(1)] * size, dtype=object)
    for _ in range(m):
        v = P.dot(v)
    return v[x - lo]


@pytest.mark.parametrize("z, rect, m", [((0, 0), LatticeRect(2, ((-1, 1),)), 6),
                                        ((1, 3), LatticeRect(3, ((0, 4),)), 9),
                                        ((0, 1, 0), LatticeRect(1, ((0, 2), (-1, 1))), 5)])
def test_rectangle_survival_factorizes(z, rect, m):
    want = one_dim_survival(z[0], -rect.half_width, rect.half_width, m)
    for c, (lo, hi) in zip(z[1:], rect.bounds):
        want *= one_dim_survival(c, lo, hi, m)
    assert exact.survival(z, rect.points(), m)[m] == want


def test_expected_exit_closed_forms():
    assert exact.expected_exit_time((1,), line(1)) == Fraction(3, 2)
    assert exact.expected_exit_time((1,), line(1, 2)) == 3
    assert exact.expected_exit_time((2,), line(1, 2)) == 3


def dense_expected_exit(domain):
    # independent oracle: dense float solve of (I - Q) E = 1
    pts = sorted(domain.points)
    index = {p: i for i, p in enumerate(pts)}
    k = domain.dimension
    Q = np.zeros((len(pts), len(pts)))
    for p in pts:
        for off in itertools.product((-1, 0, 1), repeat=k):
            q = tuple(a + b for a, b in zip(p, off))
            if q in index:
                Q[index[p], index[q]] += 3.0**-k
    E = np.linalg.solve(np.eye(len(pts)) - Q, np.ones(len(pts)))
    return {p: E[index[p]] for p in pts}


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(1, 3))
def test_expected_exit_matches_dense_solve(seed, k):
    d = generate_random_domain(seed, k, 3)
    got = exact.expected_exit_times(d)
    want = dense_expected_exit(d)
    for p in d.points:
        assert abs(float(got[p]) - want[p]) < 1e-9 * max(1.0, want[p])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_expected_exit_monotone_in_domain(seed):
    z, inner, outer, _, _ = random_instance(seed, 2, 0)
    assert exact.expected_exit_time(z, inner) <= exact.expected_exit_time(z, outer)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_survival_series_brackets_solve(seed):
    d = generate_random_domain(seed, 2, 4)
    z = sorted(d.points)[seed % len(d)]
    lo, hi = exact.survival_sum_bounds(z, d, 1e-10)
    E = float(exact.expected_exit_time(z, d))
    assert lo - 1e-12 <= E <= hi + 1e-12
    assert hi - lo <= 1e-10


def test_decay_block_is_rigorous():
    d = LatticeRect(2, ((0, 3),)).points()
    j, q = exact.decay_block(d)
    assert q <= Fraction(1, 2)
    worst = max(exact.survival(p, d, j)[j] for p in d.points)
    assert worst == q


def test_conditional_expected_exit_single_point():
    lo, hi = exact.conditional_expected_exit((1,), line(1), line(1), 0, Fraction(1, 10**12))
    assert lo <= Fraction(3, 2) <= hi
    assert hi - lo <= Fraction(1, 10**12)


@pytest.mark.parametrize("n", [1, 3, 6])
def test_conditional_expected_exit_shifts_by_horizon(n):
    # given survival to n, the single-point walk survives every m <= n, then (1/3)^(m-n)
    lo, hi = exact.conditional_expected_exit((1,), line(1), line(1), n, Fraction(1, 10**12))
    assert lo <= n + Fraction(3, 2) <= hi


def test_conditional_expected_exit_matches_partial_sums():
    d = generate_random_domain(7, 2, 3)
    T = LatticeRect.bounding(d).points()
    z = sorted(d.half().points)[0]
    n = 4
    lo, hi = exact.conditional_expected_exit(z, d, T, n, 1e-9)
    partial = sum(exact.conditional_exit_prob(z, d, T, m, n, exact=False) for m in range(400))
    assert float(lo) - 1e-8 <= partial <= float(hi) + 1e-12

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from condexit import chain, coupling
from condexit.coupling import StepCdf, coupled_joint_kernel, inverse_cdf, product_chain, sample_coupled

THIRD = Fraction(1, 3)
HALF = Fraction(1, 2)


def test_inverse_cdf_examples():
    cdf = StepCdf.from_row({4: THIRD, 5: THIRD, 6: THIRD})
    assert inverse_cdf(cdf, 0.5) == 5
    assert inverse_cdf(cdf, 0) == 4
    assert inverse_cdf(cdf, THIRD) == 4
    assert inverse_cdf(cdf, 2 * THIRD) == 5
    assert inverse_cdf(cdf, 1) == 6
    with pytest.raises(ValueError):
        inverse_cdf(cdf, 1.5)


def test_inverse_cdf_skips_zero_mass_states():
    cdf = StepCdf.from_row({0: Fraction(0), 1: HALF, 2: HALF})
    assert inverse_cdf(cdf, 0) == 1


def test_joint_kernel_examples():
    u = 3
    row = {u - 1: THIRD, u: THIRD, u + 1: THIRD}
    assert coupled_joint_kernel(row, row) == {(v, v): THIRD for v in row}
    lo = {u - 1: HALF, u: HALF, u + 1: Fraction(0)}
    hi = {u - 1: Fraction(0), u: HALF, u + 1: HALF}
    assert coupled_joint_kernel(lo, hi) == {(u - 1, u): HALF, (u, u + 1): HALF}


row_strategy = st.lists(st.integers(0, 6), min_size=3, max_size=3).filter(any)


def as_row(u, weights):
    tot = sum(weights)
    return {u - 1 + i: Fraction(w, tot) for i, w in enumerate(weights)}


@settings(max_examples=200, deadline=None)
@given(u=st.integers(-3, 3), shift=st.integers(0, 2), a=row_strategy, b=row_strategy)
def test_joint_kernel_has_exact_marginals(u, shift, a, b):
    lo, hi = as_row(u, a), as_row(u + shift, b)
    joint = coupled_joint_kernel(lo, hi)
    assert sum(joint.values()) == 1
    for side, row in ((0, lo), (1, hi)):
        marg = {}
        for key, p in joint.items():
            marg[key[side]] = marg.get(key[side], 0) + p
        assert marg == {v: p for v, p in row.items() if p}


@settings(max_examples=200, deadline=None)
@given(u=st.integers(-3, 3), a=row_strategy, b=row_strategy)
def test_joint_kernel_is_ordered_under_dominance(u, a, b):
    lo, hi = as_row(u, a), as_row(u, b)
    F, G = StepCdf.from_row(lo), StepCdf.from_row(hi)
    dominated = all(F(r) >= G(r) for r in range(u - 2, u + 3))
    ordered = all(v <= w for (v, w), p in coupled_joint_kernel(lo, hi).items() if p)
    assert ordered == dominated


def test_dominance_examples():
    rep = coupling.check_dominance_p([2, 2, 2], 0, 2)
    assert rep.ok and rep.checked > 0
    assert coupling.check_dominance_r([3, 3, 3, 3], 0, 3, 2, 2).ok
    assert coupling.check_dominance_post(6).ok
    with pytest.raises(ValueError):
        coupling.check_dominance_r([3, 3], 0, 1, 2, 1)


def test_dominance_detects_a_reversed_pair():
    rep = coupling.DominanceReport()
    coupling._compare(rep, {1: THIRD, 2: THIRD, 3: THIRD}, {0: THIRD, 1: THIRD, 2: THIRD}, {"kind": "probe"})
    assert not rep.ok


@settings(max_examples=150, deadline=None)
@given(f=st.lists(st.integers(1, 5), min_size=1, max_size=9), data=st.data())
def test_dominance_holds_on_random_barriers(f, data):
    b = len(f) - 1
    a = data.draw(st.integers(0, b))
    assert coupling.check_dominance_p(f, a, b).ok
    beta0 = data.draw(st.integers(1, f[b]))
    beta1 = data.draw(st.integers(beta0, f[b]))
    assert coupling.check_dominance_r(f, a, b, beta0, beta1).ok


def test_identical_chains_give_identical_paths():
    K = chain.kernel_p([3, 3, 3, 3, 3], 0, 4, 2)
    pair = coupling.couple_paths(K, K, 2, 2, seed=5)
    assert pair.psi == pair.zeta
    assert pair.ordered()
    assert pair.to_csv().splitlines()[0] == "step,psi,zeta,uniform"


def test_sampling_is_deterministic():
    K = chain.kernel_p([3, 4, 4, 3, 3, 2], 0, 5, 1)
    a = sample_coupled(K, K, 1, 1, 500, seed=9)
    b = sample_coupled(K, K, 1, 1, 500, seed=9)
    c = sample_coupled(K, K, 1, 1, 500, seed=10)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(a[2], c[2])


def test_sampled_marginals_match_kernel():
    K = chain.kernel_p([4, 4, 4, 4, 4], 0, 4, 2)
    psi, _, _ = sample_coupled(K, K, 2, 2, 40_000, seed=1)
    for k, law in enumerate(chain.marginals(K)):
        for v, p in law.items():
            freq = np.mean(psi[:, k] == v)
            assert abs(freq - float(p)) < 5 * np.sqrt(float(p) * (1 - float(p)) / len(psi)) + 1e-12


def test_start_order_is_required():
    K = chain.kernel_p([3, 3], 0, 1, 1)
    with pytest.raises(ValueError):
        sample_coupled(K, K, 2, 1, 10, seed=0)


@settings(max_examples=60, deadline=None)
@given(f=st.lists(st.integers(1, 4), min_size=2, max_size=7), data=st.data())
def test_unpinned_chains_from_ordered_starts_stay_ordered(f, data):
    b = len(f) - 1
    a0 = data.draw(st.integers(1, f[0]))
    a1 = data.draw(st.integers(a0, f[0]))
    try:
        k0, k1 = chain.kernel_p(f, 0, b, a0), chain.kernel_p(f, 0, b, a1)
    except ValueError:
        return
    res = product_chain(k0, k1, a0, a1)
    assert res.violation == 0
    assert res.lower_marginals == chain.marginals(k0)
    assert res.upper_marginals == chain.marginals(k1)
    psi, zeta, _ = sample_coupled(k0, k1, a0, a1, 2000, seed=data.draw(st.integers(0, 100)))
    assert np.all(psi <= zeta)


def test_product_chain_detects_violations():
    # a chain that always steps up against one that always steps down
    up = chain.ChainKernel("fixed", 0, 1, {(0, 2): {3: Fraction(1)}})
    down = chain.ChainKernel("fixed", 0, 1, {(0, 2): {1: Fraction(1)}})
    assert product_chain(up, down, 2, 2).violation == 1


def test_post_horizon_reflected_walk_is_below_free_walk():
    psi, zeta = chain.kernel_psi_free(0, 6), chain.kernel_zeta_free(0, 6)
    for u0 in range(0, 3):
        res = product_chain(psi, zeta, u0, u0 + (u0 == 0), conditional=True)
        assert res.violation == 0


def test_violation_counters():
    psi = np.array([[1, 2, 3], [1, 0, 1], [1, 0, 2]])
    zeta = np.array([[1, 2, 2], [1, 0, 0], [1, 1, 1]])
    # rows 0 and 2 exceed at K=2 with zeta positive before; row 1 exceeds only after zeta hit 0
    assert coupling.conditional_order_violations(psi, zeta) == 2
    assert coupling.inclusion_violations(psi, zeta, [2, 2]) == 0
    assert coupling.inclusion_violations(psi, zeta, [2, 2, 2]) == 1


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_cell_couplings_are_exactly_ordered(seed):
    from condexit.verifier import verify_partition
    p = chain.random_barrier_problem(np.random.default_rng(seed), max_len=6, max_f=4)
    if p.l == 0:
        return
    for cell in verify_partition(p).cells:
        lower, upper = coupling.cell_kernels(p, cell.positions)
        res = product_chain(lower, upper, p.x, p.x, conditional=p.m > p.n, h=p.h)
        assert res.violation == 0
        assert res.inclusion_violation == 0
        assert res.lower_marginals == chain.marginals(lower)
        assert res.upper_marginals == chain.marginals(upper)

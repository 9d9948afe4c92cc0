"""Acceptance run: one test per criterion, each printing a PASS/FAIL line.

The Monte Carlo criteria are deterministic given their seeds; their
tolerances are the stated ones, not tuned to the seeds.
"""

import itertools
import math
import time

import pytest

from condexit import brownian, chain, coupling, exact, verifier
from condexit.brownian import CHUNK, U, Rectangle, RowProfile
from condexit.rng import make_rng
from series import rectangle_survival

SQUARE = Rectangle(1.0, -1.0, 1.0)


@pytest.fixture
def emit(capsys):
    def _emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n:>2}] {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return _emit


def test_criterion_01_dp_equals_enumeration(emit):
    start = time.perf_counter()
    checked = 0
    mismatches = []
    for k, per in ((1, 90), (2, 90), (3, 60)):
        for seed in range(per):
            inst = verifier.generate_instance(seed, k, 3, 12 // k)
            z, m, n = inst.z, inst.m, inst.n
            assert k * max(m, n) <= 12
            T = inst.rect.points()
            for inner, outer in ((inst.domain, T), (inst.domain.half(), T.half())):
                joint = exact.joint_survival(z, inner, outer, m, n, exact=True)
                brute = exact.brute_force_joint(z, inner, outer, m, n)
                cond = exact.conditional_exit_prob(z, inner, outer, m, n, exact=True)
                brute_cond = brute / exact.brute_force_joint(z, outer, outer, n, n)
                if joint != brute or cond != brute_cond:
                    mismatches.append((k, seed))
            checked += 1
    elapsed = time.perf_counter() - start
    ok = checked >= 200 and not mismatches and elapsed <= 600
    emit(1, ok, f"{checked} instances, {len(mismatches)} mismatches, {elapsed:.0f}s")


def test_criterion_02_discrete_comparison(emit):
    corpus = verifier.generate_corpus(verifier.CorpusSpec())
    corpus3 = [verifier.generate_instance(s, 3, 3, 12) for s in range(60)]
    bad, disagree = [], 0
    for inst in corpus + corpus3:
        assert max(inst.rect.half_width, inst.m, inst.n) <= 12 and inst.rect.half_width <= 4
        v = verifier.verify_proposition(inst.domain, inst.rect, inst.z, inst.m, inst.n)
        r = verifier.verify_ratio_form(inst.domain, inst.rect, inst.z, inst.m, inst.n)
        if not v.holds:
            bad.append(inst.seed)
        disagree += v.status != r.status
    ok = len(corpus) == 500 and len(corpus3) >= 50 and not bad and disagree == 0
    emit(2, ok, f"{len(corpus)} 2-D + {len(corpus3)} 3-D instances, {len(bad)} violations, "
                f"{disagree} ratio-form disagreements")


def test_criterion_03_barrier_and_conditioned_lemma(emit):
    rng = make_rng(0, "acceptance", 3)
    problems = [chain.random_barrier_problem(rng, 10, 5) for _ in range(600)]
    barrier_bad = sum(not verifier.verify_barrier_inequality(p).holds for p in problems)
    barrier_regimes = {p.m <= p.n for p in problems}

    lemma_count, lemma_bad, lemma_regimes = 0, 0, set()
    for inst in verifier.generate_corpus(verifier.CorpusSpec(seed_stop=150)):
        l = max(inst.m, inst.n)
        seqs = chain.admissible_sequences(inst.domain, inst.z, l, cap=0, rng=make_rng(inst.seed, "sequences"),
                                          samples=2)
        for seq in seqs:
            v = verifier.verify_conditioned_lemma(inst.domain, inst.rect, seq, inst.m, inst.n)
            lemma_count += 1
            lemma_bad += not v.holds
            lemma_regimes.add(inst.m <= inst.n)
    ok = (len(problems) >= 500 and barrier_bad == 0 and barrier_regimes == {True, False}
          and lemma_count >= 200 and lemma_bad == 0 and lemma_regimes == {True, False})
    emit(3, ok, f"barrier: {len(problems)} problems, {barrier_bad} violations; "
                f"lemma: {lemma_count} sequences, {lemma_bad} violations; both m<=n and m>n covered")


def test_criterion_04_stochastic_dominance(emit):
    rng = make_rng(0, "acceptance", 4)
    total = coupling.DominanceReport()
    configs = 0
    for _ in range(120):
        p = chain.random_barrier_problem(rng, 10, 5)
        total = total.merge(coupling.check_dominance_p(p.f, 0, p.n))
        configs += 1
        for b0, b1 in itertools.combinations_with_replacement(range(1, p.f[p.n] + 1), 2):
            total = total.merge(coupling.check_dominance_r(p.f, 0, p.n, b0, b1))
            configs += 1
        total = total.merge(coupling.check_dominance_post(max(p.f) + p.l))
        configs += 1
    ok = configs >= 500 and total.ok
    emit(4, ok, f"{configs} configurations, {total.checked} CDF comparisons, {len(total.violations)} violations")


def test_criterion_05_coupling(emit):
    rng = make_rng(0, "acceptance", 5)
    pairs = 100_000
    configs, sampled_bad, exact_bad, marg_bad, post = 0, 0, 0, 0, 0
    while configs < 60:
        p = chain.random_barrier_problem(rng, 6, 4)
        if p.l == 0:
            continue
        is_post = p.m > p.n
        runs = [(z.positions,) for z in verifier.verify_partition(p).cells]
        for (zeros,) in runs:
            lower, upper = coupling.cell_kernels(p, zeros)
            psi, zeta, _ = coupling.sample_coupled(lower, upper, p.x, p.x, pairs, seed=configs)
            order = (coupling.conditional_order_violations(psi, zeta) if is_post
                     else int((psi > zeta).any(axis=1).sum()))
            sampled_bad += order + coupling.inclusion_violations(psi, zeta, p.h)
            res = coupling.product_chain(lower, upper, p.x, p.x, conditional=is_post, h=p.h)
            exact_bad += res.violation != 0 or res.inclusion_violation != 0
            marg_bad += (res.lower_marginals != chain.marginals(lower)
                         or res.upper_marginals != chain.marginals(upper))
            configs += 1
            post += is_post
        # unpinned chains from ordered starts under one barrier
        if p.n > 0 and p.f[0] > 1:
            a0, a1 = 1, p.f[0]
            try:
                k0, k1 = chain.kernel_p(p.f, 0, p.n, a0), chain.kernel_p(p.f, 0, p.n, a1)
            except ValueError:
                continue
            psi, zeta, _ = coupling.sample_coupled(k0, k1, a0, a1, pairs, seed=configs)
            sampled_bad += int((psi > zeta).any(axis=1).sum())
            res = coupling.product_chain(k0, k1, a0, a1)
            exact_bad += res.violation != 0
            marg_bad += res.lower_marginals != chain.marginals(k0) or res.upper_marginals != chain.marginals(k1)
            configs += 1
    ok = sampled_bad == 0 and exact_bad == 0 and marg_bad == 0 and post > 0
    emit(5, ok, f"{configs} configurations x {pairs} sampled pairs ({post} past the horizon): "
                f"{sampled_bad} sampled violations, {exact_bad} nonzero exact violations, "
                f"{marg_bad} marginal mismatches")


def test_criterion_06_partition(emit):
    rng = make_rng(0, "acceptance", 6)
    count, bad, mixture_bad, post = 0, 0, 0, 0
    while count < 150:
        p = chain.random_barrier_problem(rng, 11, 5)
        assert 3**p.l <= 10**6
        res = verifier.verify_partition(p)
        bad += not res.verdict.holds
        mixture_bad += not res.mixture_ok
        post += p.m > p.n
        count += 1
    ok = count >= 100 and bad == 0 and mixture_bad == 0 and post > 0
    emit(6, ok, f"{count} problems ({post} with m>n), {bad} cells below e0, {mixture_bad} mixture mismatches")


def test_criterion_07_counterexample(emit):
    start = time.perf_counter()
    ds = [0.4, 0.2, 0.1, 0.05]
    rows = {r.d: r for r in brownian.counterexample_curve(ds, dt=1e-4, count=128 * CHUNK, seed=0, refine=True,
                                                          min_hits=100_000)}
    elapsed = time.perf_counter() - start
    enough = all(rows[d].right.hits >= 100_000 for d in ds)
    left_one = all(rows[d].left == 1.0 for d in ds)
    separated = rows[0.4].right.interval()[0] > rows[0.05].right.interval()[1]
    monotone = all(rows[b].right.estimate <= rows[a].right.estimate + math.hypot(rows[a].right.stderr,
                                                                                rows[b].right.stderr)
                   for a, b in zip(ds, ds[1:]))
    halving = all(abs(rows[d].right.estimate - rows[d].right_fine.estimate)
                  < 3 * math.hypot(rows[d].right.stderr, rows[d].right_fine.stderr) for d in ds)
    ok = enough and left_one and separated and monotone and halving and elapsed <= 1800
    table = ", ".join(f"d={d}: {rows[d].right.estimate:.4f}+-{rows[d].right.stderr:.4f}"
                      f" (dt/2 {rows[d].right_fine.estimate:.4f})" for d in ds)
    emit(7, ok, f"{table}; hits>=1e5 {enough}, separated {separated}, monotone {monotone}, "
                f"dt-halving {halving}, {elapsed:.0f}s")


def random_start(rng, prof):
    lo, hi = prof.y_range
    while True:
        y = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo))
        x = rng.uniform(0.1, 0.9) * prof.width(y)
        if prof.contains(x, y):
            return x, y


def test_criterion_08_continuous_comparison(emit):
    passed, lines = 0, []
    for i in range(20):
        rng = make_rng(0, "acceptance", 8, i)
        prof = brownian.random_row_profile(rng, SQUARE)
        z = random_start(rng, prof)
        s, t = (float(v) for v in rng.uniform(0.2, 1.0, 2))
        left, right = brownian.conditional_estimate(z, prof, SQUARE, s, t, dt=1e-4, count=50_000, seed=i,
                                                    label="profile")
        se = math.hypot(left.stderr, right.stderr)
        passed += left.estimate <= right.estimate + 3 * se
        lines.append(f"{right.estimate - left.estimate:+.3f}")
    ok = passed >= 19
    emit(8, ok, f"{passed}/20 geometries with left <= right + 3 SE; margins {' '.join(lines)}")


def test_criterion_09_rectangle_calibration(emit):
    rect = Rectangle(1.0, -0.5, 1.5)
    cases = [((0.0, 0.5), 0.25), ((0.5, 0.0), 0.5), ((-0.7, 1.2), 0.1), ((0.2, 0.9), 1.0), ((0.9, -0.3), 0.05)]
    good, parts = 0, []
    for i, (z, t) in enumerate(cases):
        tally = brownian.run_paths(z, rect, rect, t, t, dt=1e-3, count=100_000, seed=i, label="calibration",
                                   bridge=True)
        est = tally.probability(U)
        ref = rectangle_survival(z, rect.half_width, rect.y_lo, rect.y_hi, t)
        dev = (est.estimate - ref) / est.stderr
        good += abs(dev) <= 3
        parts.append(f"{ref:.4f}/{dev:+.2f}SE")
    ok = good == len(cases)
    emit(9, ok, f"{good}/{len(cases)} within 3 SE (series/deviation: {', '.join(parts)})")


def test_criterion_10_scaling(emit):
    prof = RowProfile((-1.0, -0.5, 0.5, 1.0), (0.5, 0.75, 0.5, 0.5))
    rows = brownian.scaling_limit_check(prof, SQUARE, (0.25, 0.25), 0.5, 0.5, [1 / 8, 1 / 12, 1 / 16],
                                        dt=1e-4, count=200_000, seed=0)
    se_l, se_r = rows[0].mc_left.stderr, rows[0].mc_right.stderr
    left_ok = all(b.gap_left <= a.gap_left + 2 * se_l for a, b in zip(rows, rows[1:]))
    right_ok = all(b.gap_right <= a.gap_right + 2 * se_r for a, b in zip(rows, rows[1:]))
    discrete_ok = all(r.discrete_left <= r.discrete_right for r in rows)
    ok = left_ok and right_ok and discrete_ok
    gaps = ", ".join(f"M={r.steps_s}: {r.gap_left:.4f}/{r.gap_right:.4f}" for r in rows)
    emit(10, ok, f"gaps left/right {gaps}; SE {se_l:.4f}/{se_r:.4f}; discrete comparison holds {discrete_ok}")


def test_criterion_11_conjecture_explorer(emit):
    corpus = verifier.generate_corpus(verifier.CorpusSpec())
    rep = verifier.explore_conjecture(corpus, cross_check_tol=1e-9)
    ok = len(rep.rows) == 500 and not rep.cross_check_failures
    emit(11, ok, f"{len(rep.rows)} instances reported, {len(rep.violations)} negative margins (not asserted), "
                 f"{len(rep.cross_check_failures)} cross-check failures")

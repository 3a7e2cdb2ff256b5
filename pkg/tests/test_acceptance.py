"""End-to-end acceptance checks, one test per claimed behavior.

Each test is self-contained and named for the behavior it verifies; the
verbose pytest line is the pass/fail record.  The heavier ensemble tests
share optimized angles from a small representative instance (the local
geometry, not the instance size, fixes the correlation structure).
"""

import math

import numpy as np
import pytest

from qprecond.diagnostics import (
    circuit_time,
    fidelity_model,
    fit_runtime_model,
    frustration_index,
    normalized_gap,
)
from qprecond.lightcone import (
    CorrelationCache,
    _adjacency,
    _ball,
    build_correlation_matrix,
    lightcone_subgraph,
    subgraph_size_bound,
)
from qprecond.precond import (
    AngleSource,
    Engine,
    PrecondOptions,
    analytic_p1_matrix,
    ideal_preconditioner,
    precondition,
    sk_default_angles,
)
from qprecond.problems import (
    evaluate_cut,
    evaluate_objective,
    gen_random_regular,
    gen_sk,
    load_mpes,
    extract_component,
    reconstruct_solution,
)
from qprecond.qaoa import (
    AngleSchedule,
    apply_qaoa,
    correlation_matrix_full,
    optimize_angles,
)
from qprecond.solvers import (
    brute_force,
    burer_monteiro,
    greedy_local_descent,
    simulated_annealing,
)

MINI_GRID = __file__.rsplit("/", 1)[0] + "/data/mini_grid.csv"


@pytest.fixture(scope="module")
def rep_angles_p1():
    # depth-1 angles optimized on a small 3-regular representative;
    # reused on large instances of the same local geometry
    angles, _ = optimize_angles(gen_random_regular(16, 3, 123), 1, 6, 0)
    return angles


@pytest.fixture(scope="module")
def rep_angles_p2():
    angles, _ = optimize_angles(gen_random_regular(16, 3, 123), 2, 4, 0)
    return angles


def test_criterion_01_engine_equivalence():
    # three correlation engines agree entrywise on small weighted problems
    rng = np.random.default_rng(0)
    for trial in range(50):
        n = int(rng.integers(6, 13))
        prob = gen_sk(n, 1000 + trial)
        gamma = float(rng.uniform(-1.0, 1.0))
        beta = float(rng.uniform(0.0, math.pi))
        angles = AngleSchedule(gammas=[gamma], betas=[beta])
        exact = correlation_matrix_full(apply_qaoa(prob, angles))
        closed = analytic_p1_matrix(prob, gamma, beta)
        assert np.max(np.abs(closed - exact)) < 1e-10
        lc = build_correlation_matrix(prob, 1, angles, threshold=0.0)
        for i in range(n):
            for j in range(i + 1, n):
                assert lc.entries.get((i, j), 0.0) == pytest.approx(
                    -exact[i, j], abs=1e-10)


def test_criterion_02_infinite_depth_triviality():
    # greedy descent on the ideal preconditioner always lands on +-z_opt
    n = 16
    rng = np.random.default_rng(42)
    for _ in range(100):
        z_opt = 1 - 2 * rng.integers(0, 2, size=n)
        ideal = ideal_preconditioner(z_opt)
        for _ in range(100):
            z0 = 1 - 2 * rng.integers(0, 2, size=n)
            z = greedy_local_descent(ideal, z0)
            assert np.array_equal(z, z_opt) or np.array_equal(z, -z_opt)
        # counting both (i,j) and (j,i), the optimum is exactly -N(N-1)
        assert 2 * evaluate_objective(ideal, z_opt) == -n * (n - 1)


def test_criterion_03_lightcone_size_bound():
    # vertex counts of pair light cones on 3-regular ensembles stay within
    # the closed-form bound, and the bound is attained
    for p, bound in ((1, 7), (2, 19), (3, 43)):
        assert subgraph_size_bound(3, p, 10 ** 9) == bound
        observed_max = 0
        for seed in range(3):
            prob = gen_random_regular(300, 3, seed)
            adj = _adjacency(prob)
            balls = [_ball(adj, v, p) for v in range(prob.n_vars)]
            for i in range(prob.n_vars):
                for j in _ball(adj, i, 2 * p):
                    if j <= i or not (balls[i] & balls[j]):
                        continue
                    observed_max = max(observed_max, len(balls[i] | balls[j]))
        assert observed_max == bound
    # spot check that the ball-union count equals the documented subgraph
    prob = gen_random_regular(300, 3, 0)
    for i, j in list(prob.entries)[:5]:
        sub = lightcone_subgraph(prob, i, j, 2)
        adj = _adjacency(prob)
        assert sub.n_vertices == len(_ball(adj, i, 2) | _ball(adj, j, 2))


def test_criterion_04_term_count_asymptotics(rep_angles_p1, rep_angles_p2):
    # sparsity of the preconditioned matrix at N=1024: ~4.5N (p=1) and
    # ~22.5N (p=2) nonzero terms; p=1 needs only a handful of distinct
    # subcircuit emulations thanks to the tree cache
    n = 1024
    count = 50
    terms_p1, emulations = [], []
    for seed in range(count):
        prob = gen_random_regular(n, 3, seed)
        stats = {}
        out = build_correlation_matrix(prob, 1, rep_angles_p1,
                                       cache=CorrelationCache(), stats=stats)
        terms_p1.append(out.n_terms)
        emulations.append(stats["distinct_emulations"])
    mean_p1 = np.mean(terms_p1) / n
    mean_emul = np.mean(emulations)
    assert abs(mean_p1 - 4.5) / 4.5 < 0.02
    assert 8 <= mean_emul <= 15

    shared = CorrelationCache(cache_nontrees=True)
    terms_p2 = []
    for seed in range(count):
        prob = gen_random_regular(n, 3, seed)
        out = build_correlation_matrix(prob, 2, rep_angles_p2, cache=shared,
                                       cache_nontrees=True)
        terms_p2.append(out.n_terms)
    mean_p2 = np.mean(terms_p2) / n
    assert abs(mean_p2 - 22.5) / 22.5 < 0.02


def _advantage_ratios(n, count, angles, sa_grid, bm_grid):
    """Mean alpha difference (preconditioned - original) over its standard
    error, per (solver, n_iter) cell."""
    cache = CorrelationCache()
    store = {}
    for seed in range(count):
        prob = gen_random_regular(n, 3, seed)
        pre = build_correlation_matrix(prob, 1, angles, cache=cache)
        cuts = {}
        for tag, target in (("orig", prob), ("pre", pre)):
            for m in sa_grid:
                tr = simulated_annealing(target, m, seed)
                cuts[(tag, "sa", m)] = evaluate_cut(prob, tr.best_z)
            for m in bm_grid:
                tr = burer_monteiro(target, m, seed)
                cuts[(tag, "bm", m)] = evaluate_cut(prob, tr.best_z)
        c_opt = max(cuts.values())   # best found across every run
        for key, val in cuts.items():
            store.setdefault(key, []).append(val / c_opt)
    ratios = {}
    for solver, grid in (("sa", sa_grid), ("bm", bm_grid)):
        for m in grid:
            d = np.array(store[("pre", solver, m)]) - np.array(
                store[("orig", solver, m)])
            ratios[(solver, m)] = d.mean() / (d.std(ddof=1) / math.sqrt(len(d)))
    return ratios


def test_criterion_05_desk_scale_advantage(rep_angles_p1):
    # preconditioning wins at low iteration budgets, for both solvers,
    # at every size; directional claim at >2 standard errors
    sa_grid = (3, 10, 30, 100, 300)
    bm_grid = (1, 2, 3, 5, 10)
    for n in (128, 256, 512):
        ratios = _advantage_ratios(n, 50, rep_angles_p1, sa_grid, bm_grid)
        for m in (3, 10):
            assert ratios[("sa", m)] > 2.0, (n, "sa", m, ratios)
        for m in (1, 2, 3):
            assert ratios[("bm", m)] > 2.0, (n, "bm", m, ratios)


def test_criterion_06_sk_crossing_window():
    # dense SK: preconditioned input is ahead early, the original wins at
    # saturation, and the preconditioned curve saturates just below 1
    grid = (10, 100, 30000)
    store = {}
    for seed in range(50):
        prob = gen_sk(256, seed)
        pre = precondition(prob, PrecondOptions())  # analytic p=1 defaults
        objs = {}
        for tag, target in (("orig", prob), ("pre", pre)):
            for m in grid:
                tr = simulated_annealing(target, m, seed)
                objs[(tag, m)] = evaluate_objective(prob, tr.best_z)
        c_opt = min(objs.values())
        for key, val in objs.items():
            store.setdefault(key, []).append(val / c_opt)
    means = {key: np.mean(vals) for key, vals in store.items()}
    assert means[("pre", 10)] > means[("orig", 10)]
    assert means[("pre", 100)] > means[("orig", 100)]
    assert means[("orig", 30000)] > means[("pre", 30000)]
    assert 0.97 <= means[("pre", 30000)] < 1.0


def test_criterion_07_oracle_optimality():
    # converged heuristics reproduce the exact optimum on every instance
    for family, gen in (("regular", lambda s: gen_random_regular(16, 3, s)),
                        ("sk", lambda s: gen_sk(16, s))):
        for seed in range(50):
            prob = gen(seed)
            _, opt = brute_force(prob)
            sa = simulated_annealing(prob, 1000, seed)
            bm = burer_monteiro(prob, 50, seed)
            assert sa.best_objective == pytest.approx(opt), (family, seed)
            assert bm.best_objective == pytest.approx(opt), (family, seed)


def test_criterion_08_frustration_trend():
    # deeper circuits produce less frustrated preconditioned problems;
    # the infinite-depth limit is rank-1 (gap 1)
    means = {}
    for p in (1, 2, 3):
        fs = []
        for seed in range(20):
            prob = gen_sk(10, seed)
            pre = precondition(prob, PrecondOptions(
                p=p, angle_source=AngleSource.OPTIMIZE, restarts=4,
                opt_seed=seed, engine=Engine.FULL_STATEVECTOR))
            z_opt, _ = brute_force(pre)
            fs.append(frustration_index(pre, z_opt))
        means[p] = np.mean(fs)
    assert means[1] > means[2] > means[3]
    z, _ = brute_force(gen_sk(10, 0))
    assert normalized_gap(ideal_preconditioner(z)) == pytest.approx(1.0, abs=1e-12)


def test_criterion_09_sampling_convergence(rep_angles_p1):
    # shot-noise on correlation estimates decays as K^(-1/2), and K=1e4
    # already reproduces the exact-preconditioning solution quality
    prob = gen_random_regular(128, 3, 0)
    exact = precondition(prob, PrecondOptions(
        angle_source=AngleSource.PROVIDED, angles=rep_angles_p1,
        engine=Engine.LIGHTCONE))
    ks = [100, 1000, 10000]
    rms = []
    for k in ks:
        sampled = precondition(prob, PrecondOptions(
            angle_source=AngleSource.PROVIDED, angles=rep_angles_p1,
            engine=Engine.LIGHTCONE, sampling=(k, 7), threshold=0.0))
        pairs = set(exact.entries) | set(sampled.entries)
        errs = [sampled.entries.get(q, 0.0) - exact.entries.get(q, 0.0)
                for q in pairs]
        rms.append(math.sqrt(np.mean(np.square(errs))))
    slope = np.polyfit(np.log10(ks), np.log10(rms), 1)[0]
    assert -0.6 < slope < -0.4

    scores_exact, scores_sampled = [], []
    for seed in range(30):
        prob = gen_random_regular(128, 3, seed)
        exact = precondition(prob, PrecondOptions(
            angle_source=AngleSource.PROVIDED, angles=rep_angles_p1,
            engine=Engine.LIGHTCONE))
        sampled = precondition(prob, PrecondOptions(
            angle_source=AngleSource.PROVIDED, angles=rep_angles_p1,
            engine=Engine.LIGHTCONE, sampling=(10000, seed)))
        for s in range(4):
            sa_seed = 1000 * seed + s
            scores_exact.append(evaluate_cut(
                prob, simulated_annealing(exact, 100, sa_seed).best_z))
            scores_sampled.append(evaluate_cut(
                prob, simulated_annealing(sampled, 100, sa_seed).best_z))
    mean_exact = np.mean(scores_exact)
    mean_sampled = np.mean(scores_sampled)
    # same c_opt cancels in the ratio, so compare raw mean cut values
    assert abs(mean_sampled - mean_exact) / mean_exact < 1e-3


def test_criterion_10_cost_models():
    assert circuit_time(5, 1) == pytest.approx(203.12e-6, rel=1e-12)
    assert 1e-23 <= fidelity_model(0.995, n_2q=10 ** 4) <= 1e-21
    assert 1e-3 <= fidelity_model(0.995, n_2q=10 ** 3) <= 1e-1


def _timing_rows(reps=16):
    """Min-over-reps cell timings, reps interleaved across cells so a
    transient load spike cannot poison a whole cell."""
    sa_grid = (20, 50, 100, 200, 500)
    bm_grid = (25, 50, 100, 200, 400)
    rows_sa, rows_bm, r2 = [], [], []
    for n in (256, 512, 1024):
        prob = gen_random_regular(n, 3, 0)
        best_sa = {m: np.inf for m in sa_grid}
        best_bm = {m: np.inf for m in bm_grid}
        for rep in range(reps):
            for m in sa_grid:
                t = simulated_annealing(prob, m, rep).checkpoints[-1][2]
                best_sa[m] = min(best_sa[m], t)
            for m in bm_grid:
                t = burer_monteiro(prob, m, rep).checkpoints[-1][2]
                best_bm[m] = min(best_bm[m], t)
        per_sa = [(prob.n_terms, m, best_sa[m]) for m in sa_grid]
        per_bm = [(prob.n_terms, m, best_bm[m]) for m in bm_grid]
        rows_sa += per_sa
        rows_bm += per_bm
        r2.append((fit_runtime_model(per_sa).r_squared,
                   fit_runtime_model(per_bm).r_squared))
    return rows_sa, rows_bm, r2


def test_criterion_11_runtime_model():
    # t/n is linear in n_iter; SA carries a positive constant (schedule
    # setup), BM's constant is statistically zero.  Wall-clock timing on
    # shared hardware is retried on load spikes.
    last = None
    for attempt in range(3):
        rows_sa, rows_bm, r2 = _timing_rows()
        fit_sa = fit_runtime_model(rows_sa)
        fit_bm = fit_runtime_model(rows_bm)
        ok = (
            all(a >= 0.99 and b >= 0.99 for a, b in r2)
            and fit_sa.b_intercept > 0
            and abs(fit_bm.b_intercept) <= fit_bm.b_stderr
        )
        last = (r2, fit_sa, fit_bm)
        if ok:
            break
    else:
        pytest.fail(f"runtime model checks failed on all attempts: {last}")


def test_criterion_12_mpes_pipeline():
    # bundled synthetic grid: 14 buses / 16 lines (one parallel pair), a
    # 9-bus meshed component with a 2-bus dangling chain plus a triangle
    # with one leaf
    prob, pmap = load_mpes(MINI_GRID)
    assert prob.provenance["raw_n_vars"] == 14
    assert prob.provenance["raw_n_terms"] == 15     # after parallel merge
    assert prob.n_terms == 12                       # after pruning 3 leaves
    assert len(pmap.removed) == 3
    assert [len(c) for c in pmap.components] == [8, 3]

    # per-component optima: the 8-bus mesh breaks exactly the 0.4 and
    # 0.25 lines (value -6.35); the unit triangle gives -1
    expected = {8: -6.35, 3: -1.0}
    parts = {}
    best = np.ones(prob.n_vars, dtype=np.int8)
    for comp in pmap.components:
        sub, index = extract_component(prob, comp)
        z, value = brute_force(sub)
        parts[len(comp)] = value
        for v, local in index.items():
            best[v] = z[local]
    assert parts[8] == pytest.approx(expected[8], abs=1e-12)
    assert parts[3] == pytest.approx(expected[3], abs=1e-12)

    # dangling buses reattach optimally against the unpruned problem:
    # every removed line is satisfied, so the reconstruction is globally
    # optimal whenever the core assignment is
    assert pmap.removed == [(13, 10, 0.2), (9, 8, 0.5), (8, 0, 1.0)]
    raw_entries = dict(prob.entries)
    for leaf, anchor, w in pmap.removed:
        raw_entries[(min(leaf, anchor), max(leaf, anchor))] = w
    raw = prob.__class__(n_vars=prob.n_vars, entries=raw_entries,
                         kind=prob.kind)
    full = reconstruct_solution(best, pmap, raw)
    for leaf, anchor, w in pmap.removed:
        assert w * full[leaf] * full[anchor] == pytest.approx(-abs(w))
    raw_total = sum(expected.values()) - sum(w for _, _, w in pmap.removed)
    assert evaluate_objective(raw, full) == pytest.approx(raw_total, abs=1e-12)
    assert raw_total == pytest.approx(-9.05, abs=1e-12)

    # p=1 preconditioning keeps exactly the pairs within graph distance 2
    from qprecond.qaoa import AngleSchedule
    pre = precondition(prob, PrecondOptions(
        angle_source=AngleSource.PROVIDED,
        angles=AngleSchedule(gammas=[0.4], betas=[0.3]),
        engine=Engine.LIGHTCONE))
    adj = {}
    for i, j in prob.entries:
        adj.setdefault(i, set()).add(j)
        adj.setdefault(j, set()).add(i)
    within_two = 0
    for v in adj:
        reach = set(adj[v])
        for u in adj[v]:
            reach |= adj[u]
        reach.discard(v)
        within_two += sum(1 for u in reach if u > v)
    assert pre.n_terms == within_two == 24

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsbm import _core
from hsbm.evalgen import nmi
from hsbm.graph import Graph
from hsbm.inference import (FitConfig, Membership, _DeterministicRunner, _softmax_row,
                            auto_depth, exclude_vertex, fit, global_update,
                            local_update_deterministic, local_update_probabilistic,
                            read_membership, run_deterministic, score_proxy, write_membership,
                            write_trace)
from hsbm.kernels import get_kernel
from hsbm.tree import Tree

from oracles import (barbell, direct_stats, exact_conditional, naive_path_scores,
                     random_graph, random_instance)

COMBOS = [(m, r) for m in ("hdsb", "hsb") for r in ("mf", "collapsed")]


def planted_two_block(seed=3, n=200, p_in=0.1, p_out=0.005):
    rng = np.random.default_rng(seed)
    truth = np.repeat([1, 2], n // 2)
    P = np.where(truth[:, None] == truth[None, :], p_in, p_out)
    i, j = np.nonzero(np.triu(rng.random((n, n)) < P, 1))
    return Graph.from_edges(n, i, j), truth


def tree_for(g, mu, depth, model):
    t = Tree(depth)
    global_update(g, mu, t, get_kernel(model))
    return t


class TestGlobalUpdate:
    def test_barbell_truth(self):
        g = barbell()
        t = tree_for(g, Membership(np.array([1, 1, 1, 2, 2, 2])), 1, "hdsb")
        assert t.alpha[2] == pytest.approx(4.0)
        assert t.beta[2] == pytest.approx(1 + 16 / 14)
        assert t.E[1] == 1.0
        assert t.W[1] == pytest.approx(3.5)
        assert (t.alpha[1], t.beta[1]) == pytest.approx((2.0, 4.5))

    def test_empty_graph_keeps_prior(self):
        g = Graph.from_edges(5, [], [])
        for model in ("hdsb", "hsb"):
            t = Tree(2, 1.5, 2.5)
            global_update(g, Membership(np.array([1, 2, 3, 4, 1])), t, get_kernel(model))
            assert np.all(t.E[1:] == 0)
            if model == "hdsb":
                assert np.all(t.alpha[1:] == 1.5) and np.all(t.beta[1:] == 2.5)

    @pytest.mark.parametrize("model", ["hdsb", "hsb"])
    @pytest.mark.parametrize("seed", range(12))
    def test_soft_matches_pairwise_sums(self, model, seed):
        g, soft, depth = random_instance(seed, model)
        t = tree_for(g, Membership.from_soft(soft), depth, model)
        E, W = direct_stats(g, soft, depth, model)
        assert np.allclose(t.E[1:], E[1:], atol=1e-9, rtol=0)
        assert np.allclose(t.W[1:], W[1:], atol=1e-9, rtol=0)

    @pytest.mark.parametrize("model", ["hdsb", "hsb"])
    @pytest.mark.parametrize("seed", range(8))
    def test_hard_matches_pairwise_sums(self, model, seed):
        g, soft, depth = random_instance(seed, model)
        mu = Membership(np.argmax(soft, axis=1) + 1)
        t = tree_for(g, mu, depth, model)
        E, W = direct_stats(g, mu.dense(1 << depth), depth, model)
        assert np.allclose(t.E[1:], E[1:], atol=1e-9, rtol=0)
        assert np.allclose(t.W[1:], W[1:], atol=1e-9, rtol=0)

    def test_vol_is_additive(self):
        g, soft, depth = random_instance(5, "hdsb")
        t = tree_for(g, Membership.from_soft(soft), depth, "hdsb")
        r = np.arange(1, t.K)
        assert np.allclose(t.vol[r], t.vol[2 * r] + t.vol[2 * r + 1])
        assert t.vol[1] == pytest.approx(g.total_degree)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            global_update(barbell(), Membership(np.array([1, 1])), Tree(1), get_kernel("hdsb"))


class TestExcludeVertex:
    @pytest.mark.parametrize("model", ["hdsb", "hsb"])
    @pytest.mark.parametrize("seed", range(6))
    def test_leave_one_out(self, model, seed):
        g, soft, depth = random_instance(seed, model)
        mu = Membership.from_soft(soft)
        t = tree_for(g, mu, depth, model)
        i = seed % g.n
        view = exclude_vertex(g, mu, t, get_kernel(model), i)
        E, W = direct_stats(g, soft, depth, model, skip=i)
        assert np.allclose(view.E[1:], E[1:], atol=1e-9, rtol=0)
        assert np.allclose(view.W[1:], W[1:], atol=1e-9, rtol=0)


class TestDeterministicUpdate:
    @pytest.mark.parametrize("model, rule", COMBOS)
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_naive_argmax(self, model, rule, seed):
        g, soft, depth = random_instance(seed, model)
        hard = seed % 2 == 0
        mu = Membership(np.argmax(soft, axis=1) + 1) if hard else Membership.from_soft(soft)
        dense = mu.dense(1 << depth)
        t = tree_for(g, mu, depth, model)
        for i in range(0, g.n, max(1, g.n // 5)):
            naive = naive_path_scores(g, dense, i, depth, model, rule)
            up = local_update_deterministic(i, g, mu, t, get_kernel(model), rule)
            best = naive.max()
            assert up.score == pytest.approx(best, abs=1e-9, rel=1e-12)
            # ties resolved towards the smallest label
            assert up.label == int(np.flatnonzero(np.isclose(naive, best, atol=1e-9, rtol=0))[0]) + 1

    def test_barbell_vertex_returns_to_its_triangle(self):
        g = barbell()
        mu = Membership(np.array([1, 1, 2, 2, 2, 2]))
        t = tree_for(g, mu, 1, "hdsb")
        up = local_update_deterministic(2, g, mu, t, get_kernel("hdsb"), "collapsed")
        assert up.label == 1
        scores = naive_path_scores(g, mu.dense(2), 2, 1, "hdsb", "collapsed")
        assert scores[0] > scores[1]

    def test_isolated_vertex_keeps_label_when_restricted(self):
        g = Graph.from_edges(5, [0, 1, 2], [1, 2, 3])
        mu = Membership(np.array([1, 2, 3, 4, 3]))
        t = tree_for(g, mu, 2, "hdsb")
        up = local_update_deterministic(4, g, mu, t, get_kernel("hdsb"), "collapsed", True)
        assert up.label == 3
        assert up.root == t.leaf(3)

    def test_tie_goes_to_smallest_label(self):
        # vertex 0 touches one vertex in each group; both groups look the same
        g = Graph.from_edges(3, [0, 0], [1, 2])
        for start in (1, 2):
            mu = Membership(np.array([start, 1, 2]))
            t = tree_for(g, mu, 1, "hdsb")
            for rule in ("mf", "collapsed"):
                assert local_update_deterministic(0, g, mu, t, get_kernel("hdsb"), rule).label == 1

    @pytest.mark.parametrize("model, rule", COMBOS)
    def test_restricted_equals_full_at_root(self, model, rule):
        g, soft, depth = random_instance(21, model)
        mu = Membership(np.argmax(soft, axis=1) + 1)
        t = tree_for(g, mu, depth, model)
        k = get_kernel(model)
        for i in range(g.n):
            full = local_update_deterministic(i, g, mu, t, k, rule, restricted=False)
            forced = local_update_deterministic(i, g, mu, t, k, rule, restricted=True, root=1)
            assert full == forced

    @pytest.mark.parametrize("model, rule", COMBOS)
    def test_restricted_is_best_within_subtree(self, model, rule):
        g, soft, depth = random_instance(4, model, depths=(3,))
        mu = Membership(np.argmax(soft, axis=1) + 1)
        t = tree_for(g, mu, depth, model)
        k = get_kernel(model)
        for i in range(g.n):
            up = local_update_deterministic(i, g, mu, t, k, rule, restricted=True)
            naive = naive_path_scores(g, mu.dense(t.K), i, depth, model, rule, root=up.root)
            assert up.score == pytest.approx(naive.max(), abs=1e-9)
            lo, hi = t.leaf_range(up.root)
            assert lo <= up.label < hi


class TestProbabilisticUpdate:
    @pytest.mark.parametrize("model, rule", COMBOS)
    @pytest.mark.parametrize("seed", range(8))
    def test_gradient_matches_naive(self, model, rule, seed):
        g, soft, depth = random_instance(seed, model)
        mu = Membership.from_soft(soft)
        t = tree_for(g, mu, depth, model)
        for i in range(0, g.n, max(1, g.n // 4)):
            naive = naive_path_scores(g, soft, i, depth, model, rule)
            up = local_update_probabilistic(i, g, mu, t, get_kernel(model), rule)
            assert np.allclose(up.grad, naive, atol=1e-9, rtol=0)
            assert up.mu.sum() == pytest.approx(1.0, abs=1e-12)

    def test_uniform_gradient_gives_uniform_row(self):
        t = Tree(3)
        row = _softmax_row(np.full(8, -2.5), 1, t)
        assert np.allclose(row, 1 / 8)

    def test_softmax_arithmetic(self):
        row = _softmax_row(np.array([np.log(3.0), 0.0]), 1, Tree(1))
        assert row == pytest.approx([0.75, 0.25])

    @pytest.mark.parametrize("model, rule", COMBOS)
    def test_restricted_matches_full_on_covered_leaves(self, model, rule):
        g, soft, depth = random_instance(8, model, depths=(3,))
        mu = Membership(np.argmax(soft, axis=1) + 1)
        t = tree_for(g, mu, depth, model)
        k = get_kernel(model)
        for i in range(g.n):
            full = local_update_probabilistic(i, g, mu, t, k, rule)
            part = local_update_probabilistic(i, g, mu, t, k, rule, restricted=True)
            forced = local_update_probabilistic(i, g, mu, t, k, rule, restricted=True, root=1)
            assert np.array_equal(forced.grad, full.grad)
            lo, hi = t.leaf_range(part.root)
            inside = np.zeros(t.K, dtype=bool)
            inside[lo - 1:hi - 1] = True
            assert np.all(part.mu[~inside] == 0)
            assert np.all(np.isneginf(part.grad[~inside]))
            # nodes above the traversal root add the same amount to every covered leaf
            diff = full.grad[inside] - part.grad[inside]
            assert np.allclose(diff, diff[0], atol=1e-9)

    @pytest.mark.parametrize("model", ["hdsb", "hsb"])
    @pytest.mark.parametrize("seed", range(6))
    def test_collapsed_is_exact_conditional(self, model, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(4, 13))
        depth = 1 + seed % 2
        g = random_graph(rng, n, 0.4, weighted=(model == "hdsb"))
        labels = rng.integers(1, (1 << depth) + 1, size=n)
        mu = Membership(labels.copy())
        t = tree_for(g, mu, depth, model)
        for i in range(n):
            up = local_update_probabilistic(i, g, mu, t, get_kernel(model), "collapsed")
            exact = exact_conditional(g, labels, i, depth, model)
            assert np.allclose(up.mu, exact, atol=1e-9)


class TestScoreProxy:
    def test_empty(self):
        g = Graph.from_edges(4, [], [])
        assert score_proxy(g, Membership(np.array([1, 2, 1, 2])), Tree(1), get_kernel("hdsb")) == 0

    def test_barbell_truth_beats_one_group(self):
        g, k = barbell(), get_kernel("hdsb")
        truth = score_proxy(g, Membership(np.array([1, 1, 1, 2, 2, 2])), Tree(1), k)
        one = score_proxy(g, Membership(np.ones(6, dtype=np.int64)), Tree(1), k)
        assert truth > one

    @pytest.mark.parametrize("model", ["hdsb", "hsb"])
    def test_invariant_to_swapping_subtrees(self, model):
        g, soft, depth = random_instance(3, model, depths=(2,))
        lab = np.argmax(soft, axis=1) + 1
        swapped = np.array([3, 4, 1, 2])[lab - 1]
        mirrored = np.array([2, 1, 3, 4])[lab - 1]
        k = get_kernel(model)
        base = score_proxy(g, Membership(lab), Tree(depth), k)
        assert score_proxy(g, Membership(swapped), Tree(depth), k) == pytest.approx(base, abs=1e-9)
        assert score_proxy(g, Membership(mirrored), Tree(depth), k) == pytest.approx(base, abs=1e-9)


class TestSweeps:
    @pytest.mark.parametrize("model, rule", COMBOS)
    @pytest.mark.parametrize("restricted", [False, True])
    def test_incremental_statistics_do_not_drift(self, model, rule, restricted):
        rng = np.random.default_rng(5)
        g = random_graph(rng, 60, 0.1)
        depth = 3
        mu = Membership(rng.integers(1, 9, size=g.n))
        t = tree_for(g, mu, depth, model)
        runner = _DeterministicRunner(g, t, get_kernel(model), rule, restricted)
        heap = mu.hard + t.K - 1
        for _ in range(4):
            runner.sweep(heap, np.arange(g.n))
        fresh = tree_for(g, Membership(heap - t.K + 1), depth, model)
        for name in ("E", "W", "vol", "N"):
            assert np.allclose(getattr(t, name), getattr(fresh, name), atol=1e-9), name
        assert not runner.dsub.any()

    @pytest.mark.parametrize("model, rule", COMBOS)
    def test_compiled_sweep_matches_python_updates(self, model, rule):
        # one Gauss-Seidel pass, replayed vertex by vertex with the pure update
        rng = np.random.default_rng(9)
        g = random_graph(rng, 30, 0.15)
        mu = Membership(rng.integers(1, 5, size=g.n))
        ref = mu.copy()
        t = tree_for(g, mu, 2, model)
        k = get_kernel(model)
        runner = _DeterministicRunner(g, t, k, rule, True)
        heap = mu.hard + t.K - 1
        runner.sweep(heap, np.arange(g.n))
        for i in range(g.n):
            tr = tree_for(g, ref, 2, model)
            ref.hard[i] = local_update_deterministic(i, g, ref, tr, k, rule, restricted=True).label
        assert np.array_equal(heap - t.K + 1, ref.hard)

    def test_deterministic_sweeps_stay_one_hot(self):
        g, _ = planted_two_block()
        r = fit(g, FitConfig(depth=3, init="random", seed=1))
        assert r.membership.soft is None
        dense = r.membership.dense(8)
        assert np.all((dense == 0) | (dense == 1))
        assert np.all(dense.sum(axis=1) == 1)

    def test_restricted_cost_counters(self):
        # per-vertex work is bounded by degree and depth, not by K
        from hsbm.evalgen import GenConfig, generate_planted
        g, _ = generate_planted(GenConfig(n=2000, k=20, seed=1))
        per_vertex = {}
        for depth in (6, 10, 14):
            cfg = FitConfig(depth=depth, seed=0, max_sweeps=3)
            r = fit(g, cfg)
            c = r.counters
            work = c["neighbors"] + depth * c["touched"]
            assert c["visited"] <= 2 * work + 2 * (depth + 1) * c["vertices"]
            per_vertex[depth] = c["visited"] / c["vertices"]
        # K grows 256-fold; the visited count per vertex grows at most like depth
        assert per_vertex[14] < 4 * per_vertex[6]


class TestFit:
    def test_planted_two_block_mf(self):
        g, truth = planted_two_block()
        r = fit(g, FitConfig(local_rule="mf", seed=0))
        assert nmi(r.groups, truth) == 1.0
        assert len(r.trace) <= 10

    def test_planted_two_block_probabilistic(self):
        g, truth = planted_two_block()
        r = fit(g, FitConfig(update_mode="probabilistic", depth=2, seed=0))
        assert nmi(r.groups, truth) == 1.0
        assert np.allclose(r.membership.soft.sum(axis=1), 1.0, atol=1e-9)
        assert np.allclose(r.group_probabilities().sum(axis=1), 1.0)

    def test_empty_graph_single_group(self):
        r = fit(Graph.from_edges(7, [], []), FitConfig(depth=2))
        assert r.group_count == 1
        assert np.all(r.groups == 1)

    def test_deterministic_given_seed(self):
        g, _ = planted_two_block(seed=4)
        for cfg in (FitConfig(seed=3, sweep_order="shuffled"),
                    FitConfig(seed=3, update_mode="probabilistic", depth=2, max_sweeps=5)):
            a, b = fit(g, cfg), fit(g, cfg)
            assert [(x.sweep, x.moved, x.score) for x in a.trace] == \
                   [(x.sweep, x.moved, x.score) for x in b.trace]
            assert np.array_equal(a.membership.hard, b.membership.hard)

    def test_trace_length_bounded(self):
        g, _ = planted_two_block()
        r = fit(g, FitConfig(init="random", max_sweeps=2, seed=0))
        assert len(r.trace) <= 2

    def test_hsb_rejects_weighted_graph(self):
        g = Graph.from_edges(3, [0, 1], [1, 2], [2.0, 1.0])
        with pytest.raises(ValueError):
            fit(g, FitConfig(model="hsb"))

    def test_hsb_mf_on_planted(self):
        g, truth = planted_two_block()
        r = fit(g, FitConfig(model="hsb", local_rule="mf", seed=0))
        assert nmi(r.groups, truth) == 1.0

    def test_hsb_collapsed_refines_planted(self):
        # without degree correction, hard sweeps may peel low-degree vertices
        # off a block; the planted cut itself must survive
        g, truth = planted_two_block()
        r = fit(g, FitConfig(model="hsb", seed=0))
        for k in np.unique(r.groups):
            assert len(np.unique(truth[r.groups == k])) == 1

    @pytest.mark.parametrize("bad", [dict(model="x"), dict(local_rule="y"), dict(depth=0),
                                     dict(depth=21), dict(update_mode="z"), dict(a0=0)])
    def test_config_validation(self, bad):
        with pytest.raises(ValueError):
            FitConfig(**bad)

    def test_default_sweep_caps(self):
        assert FitConfig().max_sweeps == 20
        assert FitConfig(update_mode="probabilistic").max_sweeps == 100

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 10 ** 8))
    def test_auto_depth(self, n):
        d = auto_depth(n)
        assert 1 <= d <= 20
        if 20 < n <= 10 * 2 ** 20:
            assert 10 * 2 ** (d - 1) < n <= 10 * 2 ** d


class TestOutputs:
    def test_membership_round_trip(self):
        g, truth = planted_two_block()
        r = fit(g, FitConfig(seed=0))
        buf = io.StringIO()
        write_membership(r, g.vertex_names, buf)
        back = read_membership(io.StringIO(buf.getvalue()))
        assert [back[nm] for nm in g.vertex_names] == r.groups.tolist()

    def test_soft_membership_round_trip(self):
        g, _ = planted_two_block()
        r = fit(g, FitConfig(update_mode="probabilistic", depth=2, seed=0, max_sweeps=3))
        buf = io.StringIO()
        write_membership(r, g.vertex_names, buf)
        back = read_membership(io.StringIO(buf.getvalue()))
        best = np.argmax(r.group_probabilities(), axis=1) + 1
        assert [back[nm] for nm in g.vertex_names] == best.tolist()

    def test_trace_format(self):
        g, _ = planted_two_block()
        r = fit(g, FitConfig(seed=0))
        buf = io.StringIO()
        write_trace(r.trace, buf)
        rows = [line.split("\t") for line in buf.getvalue().splitlines()]
        assert len(rows) == len(r.trace)
        assert all(len(row) == 4 for row in rows)
        assert float(rows[-1][2]) == r.trace[-1].score


def test_run_deterministic_reports_convergence():
    g, _ = planted_two_block()
    mu = Membership(np.repeat([1, 2], 100))
    t = Tree(1)
    assert run_deterministic(g, mu, t, get_kernel("hdsb"), "collapsed", True, 5)
    counters = np.zeros(_core.N_COUNTERS, dtype=np.int64)
    mu = Membership(np.tile([1, 2], 100))
    assert not run_deterministic(g, mu, Tree(1), get_kernel("hdsb"), "collapsed", True, 0,
                                 counters=counters)

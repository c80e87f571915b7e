import math

import numpy as np
import pytest
from scipy import stats

from treemart import exact
from treemart.model import BST, PORT, RT, alpha, mary
from treemart.tree_sim import (ReplicaSeed, ResourceLimit, TreeState, grow, increment_check,
                               init_state, insert_step, parent_probabilities)


def test_init_state():
    s = init_state(BST)
    assert s.external_profile[1] == 2 and s.total_weight == 2
    s = init_state(RT)
    assert s.external_path_length == 1 and s.path_length == 0
    assert init_state(PORT).total_weight == 1


def test_second_node_under_root(model):
    rng = ReplicaSeed(3).generator()
    for _ in range(20):
        _, d = insert_step(init_state(model), rng)
        assert d == 1


def test_parent_probabilities():
    s = TreeState.from_parents(BST, [1])
    assert parent_probabilities(s) == pytest.approx([1 / 3, 2 / 3])
    s = TreeState.from_parents(RT, [1, 1, 2, 3])
    assert parent_probabilities(s) == pytest.approx([0.2] * 5)
    s = TreeState.from_parents(PORT, [1, 1, 2])
    assert parent_probabilities(s) == pytest.approx(np.array([3, 2, 1, 1]) / 7)


def test_sampled_parent_frequencies():
    # BST with root-child pair: root chosen with probability 1/3
    base = TreeState.from_parents(BST, [1])
    rng = ReplicaSeed(11).generator()
    hits = sum(insert_step(base.copy(), rng)[0].parent[3] == 1 for _ in range(30_000))
    assert abs(hits / 30_000 - 1 / 3) < 4 * math.sqrt(2 / 9 / 30_000)


def _check_invariants(s):
    p = s.params
    n = s.n
    X = s.internal_profile
    U = s.external_profile
    for k in range(1, len(U)):
        assert abs(U[k] - (p.beta * X[k] + p.m * X[k - 1])) <= 1e-12
    assert s.external_path_length == pytest.approx(p.step * s.path_length + n * p.m, abs=1e-9)
    assert s.total_weight == pytest.approx(alpha(p, n), abs=1e-9)
    assert X.sum() == n
    assert s.path_length == s.depth[1:n + 1].sum()
    assert np.all(s.node_weights() >= 0)


def test_invariants_every_step(model):
    rng = ReplicaSeed(5).generator()
    s = init_state(model)
    _check_invariants(s)
    for _ in range(300):
        before = s.copy()
        s, d = insert_step(s, rng)
        _check_invariants(s)
        assert increment_check(before, s) <= 1e-10
        assert d == s.depth[s.n]


def test_increment_small_cases():
    s1 = init_state(BST)
    s2 = TreeState.from_parents(BST, [1])
    assert s2.martingale - 0.0 == 0.0
    assert increment_check(s1, s2) <= 1e-10
    s3 = TreeState.from_parents(BST, [1, 2])
    x3 = s3.martingale - s2.martingale
    assert x3 == pytest.approx(BST.step / alpha(BST, 3) * (2 - exact.depth_mean(BST, 3)), abs=1e-12)
    with pytest.raises(ValueError):
        increment_check(s1, s3)


def test_grow_small_examples():
    t = grow(RT, 1, ReplicaSeed(7))
    assert t.S.tolist() == [0.0]
    t = grow(BST, 2, ReplicaSeed(7))
    assert t.S[-1] == 0.0 and t.X[-1] == 0.0


def test_grow_matches_stepwise_states(model):
    t = grow(model, 200, ReplicaSeed(9))
    assert t.n.tolist() == list(range(1, 201))
    assert np.all(np.diff(t.P) == t.D[1:])
    s = t.state
    mean_p = np.array([exact.mean_path(model, k) for k in range(1, 201)])
    S = (t.P - mean_p) / (t.n - model.shift)
    assert np.allclose(t.S, S, rtol=0, atol=1e-10)
    assert np.allclose(np.diff(t.S), t.X[1:], atol=1e-12)
    alphas = np.array([alpha(model, k) for k in range(2, 201)])
    dm = np.array([exact.depth_mean(model, k) for k in range(2, 201)])
    predicted = model.step / alphas * (t.D[1:] - dm - t.S[:-1])
    assert np.max(np.abs(t.X[1:] - predicted)) <= 1e-10
    _check_invariants(s)


def test_saturation_respected():
    for p, cap in ((BST, 2), (mary(3), 3)):
        s = grow(p, 20_000, ReplicaSeed(1)).state
        assert s.outdegree[1:s.n + 1].max() <= cap
        assert s.total_weight == alpha(p, 20_000)


def test_determinism(model):
    a = grow(model, 5000, ReplicaSeed(42, 3))
    b = grow(model, 5000, ReplicaSeed(42, 3))
    c = grow(model, 5000, ReplicaSeed(42, 4))
    assert a.to_csv() == b.to_csv()
    assert not np.array_equal(a.P, c.P)


def test_lean_mode_and_checkpoints():
    t = grow(PORT, 150_000, ReplicaSeed(2), checkpoints=[10, 1000, 150_000])
    assert t.n.tolist() == [10, 1000, 150_000]
    full = grow(PORT, 1000, ReplicaSeed(2))
    assert t.P[1] == full.P[-1]
    with pytest.raises(ValueError):
        grow(PORT, 10, 0, checkpoints=[11])


def test_million_nodes_conserve_count():
    t = grow(RT, 10 ** 6, ReplicaSeed(0), checkpoints=[10 ** 6])
    assert t.state.internal_profile.sum() == 10 ** 6
    assert t.state.total_weight == alpha(RT, 10 ** 6)


def test_resource_limit():
    with pytest.raises(ResourceLimit):
        grow(RT, 10 ** 8)
    with pytest.raises(ValueError):
        grow(RT, 0)


def test_csv_format():
    text = grow(BST, 4, ReplicaSeed(1)).to_csv()
    lines = text.splitlines()
    assert lines[0] == "n,D,P,S,X"
    assert len(lines) == 5
    for line in lines[1:]:
        n, d, p, s, x = line.split(",")
        assert int(n) and float(s) == float(s)
    assert "," not in f"{1 / 3:.17g}"


@pytest.mark.parametrize("p", [BST, RT, PORT])
def test_empirical_martingale_mean(p):
    reps = 10_000
    marks = [10, 100, 1000]
    S = np.array([grow(p, 1000, ReplicaSeed(2024, r), checkpoints=marks, mode="lean").S for r in range(reps)])
    se = S.std(axis=0, ddof=1) / math.sqrt(reps)
    assert np.all(np.abs(S.mean(axis=0)) <= 4 * se)


def test_depth_law_of_simulated_trees():
    # D_12 under BST against the Poisson-binomial law
    reps = 20_000
    d = np.array([grow(BST, 12, ReplicaSeed(77, r)).D[-1] for r in range(reps)])
    pmf = exact.depth_pmf(BST, 12)
    expected = np.array(pmf.probs) * reps
    observed = np.array([np.sum(d == k) for k in pmf.support])
    keep = expected >= 5
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    assert stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue > 1e-3

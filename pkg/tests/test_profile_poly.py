import math

import numpy as np
import pytest

from treemart import exact, oracle, profile_poly as pp
from treemart.model import BST, PORT, RT, alpha, make_params
from treemart.tree_sim import ReplicaSeed, TreeState, grow, init_state


def test_eval_W_examples(model):
    s = init_state(model)
    for z in (0.5, 2.0, 1 + 1j):
        assert pp.eval_W(s, z) == pytest.approx(model.m * z)
    t = grow(model, 300, ReplicaSeed(4)).state
    assert pp.eval_W(t, 1.0) == pytest.approx(alpha(model, 300), abs=1e-9)
    assert pp.eval_W(TreeState.from_parents(BST, [1]), 2.0) == pytest.approx(10.0)


def test_eval_C_examples(model):
    for n in (1, 5, 1000, 10 ** 6):
        assert pp.eval_C(model, n, 1.0) == pytest.approx(alpha(model, n), rel=1e-10)
    assert pp.eval_C(BST, 2, 1.0) == pytest.approx(3.0)
    assert pp.eval_C(model, 1, 0.7 + 0.2j) == pytest.approx(model.m * (0.7 + 0.2j))
    with pytest.raises(ValueError):
        pp.eval_C(model, 5, -0.5)


def test_eval_C_is_mean_of_W(model):
    # against the enumeration oracle, for complex z
    for n in (3, 5):
        for z in (0.9 + 0.1j, 1.3):
            mean_w = sum(h.probability * pp.profile_polynomial(np.array(h.external_profile), z)
                         for h in oracle.enumerate_histories(model, n))
            assert pp.eval_C(model, n, z) == pytest.approx(mean_w, rel=1e-12)


def test_eval_M_examples(model):
    s = grow(model, 500, ReplicaSeed(8)).state
    assert pp.eval_M(s, 1.0) == pytest.approx(1.0, abs=1e-12)
    s1 = init_state(model)
    for z in (0.6, 1.05 + 0.03j):
        assert pp.eval_M(s1, z) == pytest.approx(1.0)
    ev = pp.evaluate(s, 1.0 + 0.1j)
    assert ev.M == pytest.approx(pp.eval_M(s, 1.0 + 0.1j))


def test_derivatives_at_one(model):
    t = grow(model, 2000, ReplicaSeed(12))
    s = t.state
    b = pp.derivatives_at_one(s)
    assert b.W1 == b.C1 == pytest.approx(alpha(model, 2000))
    assert b.Wp1 == pytest.approx(model.step * s.path_length + 2000 * model.m, rel=1e-12)
    mu = model.step * exact.mean_path(model, 2000) + 2000 * model.m
    assert b.Cp1 == pytest.approx(mu, rel=1e-9)
    assert b.Mp1 == pytest.approx(t.S[-1], rel=1e-9, abs=1e-12)


def test_derivatives_against_finite_differences():
    s = grow(PORT, 50, ReplicaSeed(3)).state
    b = pp.derivatives_at_one(s)
    h = 1e-4
    C = lambda z: pp.eval_C(PORT, 50, z).real
    M = lambda z: pp.eval_M(s, z).real
    assert (C(1 + h) - C(1 - h)) / (2 * h) == pytest.approx(b.Cp1, rel=1e-6)
    assert (C(1 + h) - 2 * C(1) + C(1 - h)) / h ** 2 == pytest.approx(b.Cpp1, rel=1e-4)
    assert (M(1 + h) - 2 * M(1) + M(1 - h)) / h ** 2 == pytest.approx(b.Mpp1, rel=1e-3, abs=1e-5)


def test_conditional_depth_moments_match_sampling_law(model):
    s = grow(model, 40, ReplicaSeed(6)).state
    e1, e2 = pp.conditional_depth_moments(s)
    U = s.external_profile
    k = np.arange(len(U))
    assert e1 == pytest.approx(np.dot(k, U) / U.sum())
    assert e2 == pytest.approx(np.dot(k * k, U) / U.sum())
    b = pp.derivatives_at_one(s)
    assert b.Wpp1 == pytest.approx(b.W1 * e2 - b.Wp1)


def test_conditional_increment_variance_small():
    assert pp.conditional_increment_variance(init_state(BST)) == pytest.approx(0.0, abs=1e-15)
    # BST prefix of size 2, against direct enumeration of the third step
    prefix = oracle.enumerate_histories(BST, 2)[0]
    direct = sum(q * (c.martingale[-1] - prefix.martingale[-1]) ** 2 for q, c in oracle._one_step(BST, prefix))
    assert pp.conditional_increment_variance(oracle.state_of(BST, prefix)) == pytest.approx(direct, abs=1e-10)


def test_identity_residuals_exact(model):
    t = grow(model, 5000, ReplicaSeed(1), track_profile=True)
    r1, r2 = pp.identity_residuals(t)
    if model.integer_beta:
        assert r1 == 0 and r2 == 0
    else:
        assert r1 <= 1e-9 * alpha(model, 5000) and r2 <= 1e-9 * t.Wp1.max()
    with pytest.raises(ValueError):
        pp.identity_residuals(grow(model, 10, 0))


def test_mc_mean_of_M():
    mean, se = pp.mean_M(RT, 100, 1.1, 10_000, seed=9)
    assert abs(mean - 1) <= 4 * se


@pytest.mark.parametrize("p", [BST, RT, PORT])
@pytest.mark.parametrize("order", [2, 4])
def test_lp_bounded_on_circle(p, order):
    v = pp.lp_on_circle(p, [100, 1000, 10_000], order, radius=0.05, replicas=200, seed=5)
    assert np.all(np.isfinite(v))
    assert np.all(v[1:] / v[:-1] < 1.5)


def test_second_derivative_trend_reported(capsys):
    # monitored, not asserted: increments |M''_{2n}(1) - M''_n(1)| for n = 1e3, 1e4, 1e5
    for p in (BST, RT, PORT):
        v = pp.second_derivative_path(p, [1000, 2000, 10_000, 20_000, 100_000, 200_000], seed=1)
        gaps = np.abs(v[1::2] - v[::2])
        assert np.all(np.isfinite(gaps))
        print(f"{p.tag}: M'' increments {np.array2string(gaps, precision=4)}")


def test_profile_csv():
    s = grow(make_params(0.5, 1), 30, ReplicaSeed(2)).state
    text = pp.profile_csv(s, [1.0, 1.1 + 0.05j])
    lines = text.splitlines()
    assert lines[0] == "n,re_z,im_z,re_W,im_W,re_M,im_M"
    row = [float(x) for x in lines[1].split(",")]
    assert row[0] == 30 and row[5] == pytest.approx(1.0, abs=1e-12)

import json
import math

import numpy as np
import pytest
from scipy import stats

from treemart import exact, limit_lab as ll
from treemart.model import BST, PORT, RT, make_params, mary

SMALL = dict(n=100, horizon=100_000, replicas=60, master_seed=5)


def test_proxy_guard():
    assert ll.ExperimentConfig(BST, 2000, 400_000, 10).validate()
    with pytest.raises(ll.ConfigError):
        ll.ExperimentConfig(BST, 2000, 200_000, 10).validate()
    with pytest.raises(ll.ConfigError):
        ll.ExperimentConfig(BST, 2000, 2000, 10).validate()
    with pytest.raises(ll.ConfigError):
        ll.clt_sample(ll.ExperimentConfig(RT, 500, 500, 10))


def test_config_round_trip():
    c = ll.ExperimentConfig(PORT, 100, 100_000, 7, 3, (20, 30), (2, 4))
    assert ll.ExperimentConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c


def test_prefactors():
    n = 2000
    assert ll.clt_prefactor(BST, n) == pytest.approx(math.sqrt(n / (2 * math.log(n))))
    assert ll.clt_prefactor(RT, n) == pytest.approx(math.sqrt(n / math.log(n)))
    assert ll.lil_prefactor(PORT, 100.0) == pytest.approx(math.sqrt(100 / (math.log(100) * math.log(math.log(100)))))


def test_std_normal_cdf():
    assert ll.std_normal_cdf(0.0) == 0.5
    x = np.linspace(-8, 8, 401)
    assert np.max(np.abs(ll.std_normal_cdf(x) - stats.norm.cdf(x))) <= 1e-10


def test_ks_statistic():
    assert ll.ks_statistic([0.0]) == pytest.approx(0.5)
    rng = np.random.default_rng(123)
    x = rng.standard_normal(10_000)
    d = ll.ks_statistic(x)
    assert d == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-12)
    assert d < 1.95 / math.sqrt(10_000)
    with pytest.raises(ValueError):
        ll.ks_statistic([])


def test_ks_false_positive_rate():
    # with 200 normal samples of size 10^4, D >= 1.95/100 should essentially never occur
    rng = np.random.default_rng(7)
    hits = sum(ll.ks_statistic(rng.standard_normal(10_000)) >= 0.0195 for _ in range(200))
    assert hits <= 1


def test_normal_abs_moments():
    assert ll.normal_abs_moment(2) == pytest.approx(1.0)
    assert ll.normal_abs_moment(4) == pytest.approx(3.0)
    assert ll.normal_abs_moment(3) == pytest.approx(2 * math.sqrt(2 / math.pi))
    assert ll.normal_abs_moment(6) == pytest.approx(15.0)


def test_map_replicas_order_and_threads():
    fn = lambda r: r * r
    assert ll.map_replicas(fn, 10, 1) == [r * r for r in range(10)]
    assert ll.map_replicas(fn, 10, 4, order=reversed(range(10))) == [r * r for r in range(10)]


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("TREEMART_THREADS", "3")
    assert ll.resolve_threads() == 3
    assert ll.resolve_threads(2) == 2
    monkeypatch.delenv("TREEMART_THREADS")
    assert ll.resolve_threads() >= 1


def test_report_order_independent():
    config = ll.ExperimentConfig(BST, **SMALL, threads=1)
    a = ll.run_clt(config)
    b = ll.run_clt(ll.ExperimentConfig(BST, **SMALL, threads=3), order=reversed(range(SMALL["replicas"])))
    assert a.to_json(include_metadata=False) == b.to_json(include_metadata=False)


def test_clt_sample_centered():
    config = ll.ExperimentConfig(PORT, 100, 100_000, 400, 11)
    z = ll.clt_sample(config)
    assert len(z) == 400
    assert abs(z.mean()) <= 4 / math.sqrt(400) * z.std(ddof=1)


def test_chain_depths_follow_poisson_binomial():
    for p in (BST, PORT, make_params(0.5, 1), mary(3)):
        d = ll.sample_depths(p, 30, 20_000, seed=4)
        pmf = exact.depth_pmf(p, 30)
        expected = pmf.probs * len(d)
        observed = np.array([np.sum(d == k) for k in pmf.support], dtype=float)
        keep = expected >= 5
        obs = np.append(observed[keep], observed[~keep].sum())
        exp = np.append(expected[keep], expected[~keep].sum())
        assert stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue > 1e-3, p


def test_chain_path_length_unbiased():
    for p in (BST, RT, make_params(0.5, 1)):
        P = np.array([ll.run_marks(p, 500, [50, 500], 9, r)[1] for r in range(4000)], dtype=float)
        s = P - [exact.mean_path(p, 50), exact.mean_path(p, 500)]
        se = s.std(axis=0, ddof=1) / math.sqrt(len(s))
        assert np.all(np.abs(s.mean(axis=0)) <= 4 * se)
        var = [exact.var_path(p, 50), exact.var_path(p, 500)]
        assert s.var(axis=0, ddof=1) == pytest.approx(var, rel=0.1)


def test_lil_trajectory_properties():
    cps = tuple(range(20, 1001))
    res = ll.lil_trajectory(ll.ExperimentConfig(RT, 20, 100_000, 8, 2, cps))
    assert res.scaled.shape == (8, len(cps))
    assert np.all(np.diff(res.running_max, axis=1) >= 0)
    assert np.all(np.diff(res.running_min, axis=1) <= 0)
    assert res.pooled_max == pytest.approx(res.final_max.mean())
    with pytest.raises(ll.ConfigError):
        ll.lil_trajectory(ll.ExperimentConfig(RT, 20, 100_000, 2, 0, (10, 100)))
    with pytest.raises(ll.ConfigError):
        ll.lil_trajectory(ll.ExperimentConfig(RT, 20, 100_000, 2, 0, (20, 5000)))


def test_moment_scope_flag():
    assert ll.in_theorem_scope(BST) and ll.in_theorem_scope(PORT)
    assert not ll.in_theorem_scope(make_params(0.5, 1))
    r = ll.run_clt(ll.ExperimentConfig(make_params(0.5, 1), 100, 100_000, 20, 1))
    assert r.summary["theorem_scope"] is False
    assert set(r.summary["moment_estimates"]) == {"2", "3", "4", "6"}


def test_condition_diagnostics_small():
    d = ll.condition_diagnostics(RT, 200, 20_000, 20, seed=3, l2_marks=[200, 2000, 20_000],
                                 s_marks=[200, 2000, 20_000])
    assert 0.7 < d["r_n"] < 1.3
    assert d["c1"]["1.0"] < 0.05
    assert np.all(np.diff(d["l2_partial"]) >= 0)
    assert len(d["abs_moments"]["4"]) == 3
    assert 0 < d["truncation_ratio"] < 0.1
    with pytest.raises(ll.ConfigError):
        ll.condition_diagnostics(RT, 10, 10, 2)


def test_depth_tail_rows():
    rows = ll.depth_tail_check(RT, 100, [1, 3, 6], 5000, seed=1)
    assert [r["t"] for r in rows] == [1, 3, 6]
    assert all(r["ok"] for r in rows)
    assert rows[0]["frequency"] >= rows[-1]["frequency"]


def test_report_files(tmp_path):
    config = ll.ExperimentConfig(BST, 100, 100_000, 10, 42)
    report = ll.run_clt(config)
    path = report.save(tmp_path, "clt", "samples")
    assert path.name == "clt_bst_n100_N100000_seed42.json"
    data = json.loads(path.read_text())
    assert set(data) == {"config", "summary", "arrays", "metadata"}
    csv_lines = (tmp_path / "clt_bst_n100_N100000_seed42.csv").read_text().splitlines()
    assert csv_lines[0] == "samples" and len(csv_lines) == 11
    assert float(csv_lines[1]) == report.arrays["samples"][0]

import math

import numpy as np
import pytest

import etso


def test_kernel_and_posterior():
    p = etso.KernelParams.defaults()
    p.lengthscales = np.array([1.0])
    k = etso.kernel_matrix(p, np.array([[0.0], [1.0]]), np.array([[0.0], [1.0]]))
    assert k.shape == (2, 2)
    assert k[0, 1] == pytest.approx(0.52399 / 9.0, rel=1e-4)

    post = etso.posterior(p, np.array([[0.0]]), np.array([-0.9]), np.array([[0.0], [5.0]]), beta=2.0)
    assert post["mean"][0] == pytest.approx(-0.90023, abs=1e-5)
    assert post["lower"][0] < post["mean"][0] < post["upper"][0]
    # Far from the data the posterior falls back to the prior.
    assert post["mean"][1] == pytest.approx(-1.0, abs=1e-3)


def test_safe_sets_masks():
    grid = etso.GridDomain([0.0], [1.0], [11])
    p = etso.KernelParams.defaults()
    p.lengthscales = np.array([0.15])
    masks = etso.safe_sets(p, np.array([[0.5]]), np.array([-0.9]), grid, -1.232, 2.0)
    assert masks["safe"][5]
    assert not masks["safe"][0]
    for name in ("maximizers", "expanders"):
        assert all(s or not m for s, m in zip(masks["safe"], masks[name]))


def test_trigger_constants():
    assert etso.rho(1, 0.1) == pytest.approx(6.9869, rel=1e-5)
    assert etso.threshold(1, 0.1, scaled=False) == pytest.approx(0.30662, rel=1e-5)
    assert etso.threshold(1, 0.1) == pytest.approx(0.20882, rel=1e-5)
    assert etso.safety_threshold() == pytest.approx(-1.232, abs=1e-12)
    assert etso.normalization_scale(-3.7) == 4.0


def test_episode_cost():
    r = etso.episode(np.array([0.4, 1.25, 0.05, 0.05]))
    assert not r["crashed"]
    assert r["cost"] < 0.0
    assert etso.episode(np.array([0.4, 1.25, 0.05, 0.05]), gain_factor=1.0)["cost"] == r["cost"]


def test_optimizer_loop():
    sc = etso.Scenario("stationary-gp", ["horizon=10", "learn_rounds=4"], seed=3)
    opt = etso.Optimizer("stationary-gp", "etso", sc.true_cost(1, sc.backup)[0])
    assert opt.raw_j_min == pytest.approx(-1.232 * etso.normalization_scale(sc.true_cost(1, sc.backup)[0]))
    for t in range(1, 6):
        theta = opt.next_query()
        cost, crashed = sc.true_cost(t, theta)
        events = opt.observe(cost, crashed)
        assert not events["crash"]
    assert opt.dataset_size == 6
    assert opt.checkpoint()["t_prime"] == opt.t_prime


def test_scenarios_and_run():
    ids = etso.scenario_ids()
    assert {"2dtv", "3dtv", "ac40", "ac65", "stationary-gp"} <= set(ids)
    assert all(ok for _, ok, _ in etso.validate_scenario("stationary-gp"))

    args = dict(policies=["etso", "backup"], seeds=[1, 2], overrides=["horizon=8", "learn_rounds=3"])
    serial = etso.run("stationary-gp", **args)
    parallel = etso.run("stationary-gp", threads=2, **args)
    assert serial == parallel
    assert len(serial) == 2 * 2 * 9
    assert all(math.isfinite(r["normalized_performance"]) for r in serial)
    assert {r["policy"] for r in serial} == {"etso", "backup"}


def test_errors_are_python_exceptions():
    with pytest.raises(ValueError):
        etso.Scenario("no-such-scenario")
    with pytest.raises(etso.ConfigError):
        etso.run("stationary-gp", overrides=["epsilon=-2"])

import math

import numpy as np
import pytest

from aloe import driver
from aloe import kernel as K
from aloe.acquisition import strategy_from_name
from aloe.classify import S_BAR, S_HAT, ScaleSchedule, Thresholds
from aloe.errors import NumericalError, UsageError

AXIS = 2.0 + 0.5 * np.arange(-2, 3)
GRID = np.array([(a, b) for a in AXIS for b in AXIS])
CENTRE = np.array([2.0, 2.0])
KP = K.KernelParams(2.0, 3.0)
TH = Thresholds.uniform(2, 0.35, 0.1)


def bowl(x):
    return float(np.sum((np.asarray(x) - CENTRE) ** 2))


def tiny_run(strategy="ALOE1", seed=0, budget=60, **kw):
    cfg = driver.LoopConfig(budget=budget, seed=seed, noise_variance=kw.pop("noise", 0.005), **kw)
    return driver.run(bowl, GRID, GRID, strategy_from_name(strategy), TH, ScaleSchedule(), KP, cfg)


def test_observe():
    rng = np.random.default_rng(0)
    assert driver.observe(bowl, [3.0, 2.0], 0.0, rng) == 1.0
    draws = np.array([driver.observe(bowl, [3.0, 2.0], 0.04, rng) for _ in range(100_000)])
    assert abs(draws.mean() - 1.0) < 3 * 0.2 / math.sqrt(100_000)
    a = [driver.observe(bowl, [1.0, 1.0], 0.1, np.random.default_rng(4)) for _ in range(2)]
    assert a[0] == a[1]


@pytest.mark.parametrize("seed", range(4))
def test_bowl_is_solved(seed):
    res = tiny_run(seed=seed)
    centre = int(np.flatnonzero(np.all(GRID == CENTRE, axis=1))[0])
    assert list(res.classification.s_hat) == [centre]
    assert len(res.classification.s_bar_hat) == len(GRID) - 1
    assert len(res.trace) <= 60
    assert res.trace[-1].branch == "stop"
    assert res.trace[-1].x is None


def test_budget_one():
    res = tiny_run(budget=1)
    assert len(res.trace) == 1
    assert res.trace[0].t == 1


def test_identical_config_identical_trace():
    a = tiny_run("ALOE2", seed=3)
    b = tiny_run("ALOE2", seed=3)
    assert [r.to_dict() for r in a.trace] == [r.to_dict() for r in b.trace]
    np.testing.assert_array_equal(a.outputs, b.outputs)


@pytest.mark.parametrize("strategy", ["Random", "US", "LCB", "NoLambda", "ALOE1", "ALOE3"])
def test_trace_invariants(strategy):
    res = tiny_run(strategy, seed=1, budget=25, initial_points=2)
    prev_hat, prev_bar = set(), 0
    for n, rec in enumerate(res.trace, start=1):
        assert rec.t == n
        assert rec.n_s_hat + rec.n_s_bar + rec.n_unknown == len(GRID)
        assert prev_hat <= set(rec.s_hat)
        assert rec.n_s_hat == len(rec.s_hat)
        prev_hat = set(rec.s_hat)
        assert rec.n_s_bar >= prev_bar
        prev_bar = rec.n_s_bar
    # training set at step t holds initial_points + t - 1 points
    chosen = sum(r.x is not None for r in res.trace)
    assert len(res.inputs) == 2 + chosen
    stopped = res.trace[-1].branch == "stop"
    assert stopped == (res.trace[-1].n_unknown == 0)
    assert stopped or len(res.trace) == 25


def test_keep_running_after_classification_completes():
    res = tiny_run(seed=0, budget=40, stop_on_empty_U=False)
    assert len(res.trace) == 40
    assert all(r.branch != "stop" for r in res.trace)


def test_infinite_mode_runs_and_lifts():
    res = tiny_run(seed=2, budget=80, mode="infinite")
    assert res.mode == "infinite"
    assert sum(res.classification.counts()) == len(GRID)
    assert res.lift(np.array([2.1, 1.9])) == res.classification.labels[12]
    probes = np.array([[1.0, 1.0], [2.9, 3.1]])
    assert set(res.lift(probes)) <= {S_HAT, S_BAR, 0}


def test_snapshots_recorded_on_request():
    res = tiny_run(seed=0, budget=2, snapshots=True)
    snap = res.trace[0].snapshot
    assert len(snap) == len(GRID)
    assert {"step", "index", "x", "label", "grad_lower", "grad_upper", "eig_lower", "eig_upper"} == set(snap[0])
    assert "snapshot" not in tiny_run(seed=0, budget=1).trace[0].to_dict()


def test_neighbor_run_never_assigns_non_minima():
    cfg = driver.LoopConfig(budget=4, seed=0, noise_variance=0.005)
    res = driver.run(bowl, GRID, GRID, strategy_from_name("Neighbor", mc_samples=2000), TH, ScaleSchedule(), KP, cfg)
    assert all(r.n_s_bar == 0 for r in res.trace)
    assert all(r.branch == "neighbor" for r in res.trace)


def test_config_validation():
    for bad in (dict(budget=0), dict(budget=5, initial_points=-1), dict(budget=5, noise_variance=-1.0),
                dict(budget=5, mode="sideways")):
        with pytest.raises(UsageError):
            driver.LoopConfig(**bad)
    cfg = driver.LoopConfig(budget=3)
    strat = strategy_from_name("US")
    with pytest.raises(UsageError):
        driver.run(bowl, GRID, np.zeros((0, 2)), strat, TH, ScaleSchedule(), KP, cfg)
    with pytest.raises(UsageError):
        driver.run(bowl, GRID, GRID[:, :1], strat, TH, ScaleSchedule(), KP, cfg)
    with pytest.raises(UsageError):
        driver.run(bowl, GRID, GRID, strat, Thresholds.uniform(3, 0.3, 0.1), ScaleSchedule(), KP, cfg)


def test_numerical_failure_carries_step_context(monkeypatch):
    from aloe import gp

    def broken(*a, **k):
        raise NumericalError("boom")

    monkeypatch.setattr(gp, "post_derivatives", broken)
    with pytest.raises(NumericalError, match=r"step 1 \(US, seed 9\): boom"):
        tiny_run("US", seed=9, budget=3)

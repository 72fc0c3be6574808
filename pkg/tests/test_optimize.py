import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mzinet.errors import NonFiniteGradientError
from mzinet.gradient import evaluate_objective
from mzinet.mesh import build_topology
from mzinet.optimize import (
    InitConfig,
    OptimizationError,
    OptimizerState,
    adam_step,
    convergence_check,
    initialize_parameters,
    learning_rate,
    optimize_device,
)

from _factories import random_device, splitter_objective


# initialization

def test_degenerate_init_widths():
    topo = build_topology(2, 3)
    x = initialize_parameters(topo, InitConfig(delta_w_nm=0.0, w_offset_nm=40.0))
    x = x.reshape(-1, 6)
    assert np.all(x[:, :5] == 0.49)
    assert np.all((x[:, 5] >= 8.0) & (x[:, 5] <= 10.0))


def test_init_reproducible():
    topo = build_topology(4, 3)
    a = initialize_parameters(topo, InitConfig(seed=3))
    b = initialize_parameters(topo, InitConfig(seed=3))
    c = initialize_parameters(topo, InitConfig(seed=4))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_init_uniform_statistics():
    topo = build_topology(2, 500)            # 500 * 4 * 5 = 10^4 widths
    cfg = InitConfig(seed=1)
    w = initialize_parameters(topo, cfg).reshape(-1, 6)[:, :5].ravel() * 1e3
    p = (w - cfg.w_default_nm - cfg.w_offset_nm) / cfg.delta_w_nm
    assert p.size == 10_000
    assert p.min() >= -1 and p.max() <= 1
    sigma = math.sqrt(1 / 3 / p.size)
    assert abs(p.mean()) < 3 * sigma


@pytest.mark.parametrize("kw", [
    dict(l_min_um=5.0),                       # shorter than 1 um x (xi + 1)
    dict(w_offset_nm=70.0),                   # initial widths past w_max
    dict(l_min_um=11.0),
    dict(xi=0),
])
def test_init_config_invariants(kw):
    with pytest.raises(ValueError):
        initialize_parameters(build_topology(2, 1), InitConfig(**kw))


# learning rate

def test_learning_rate_schedule():
    assert learning_rate(0) == 3e-3
    assert learning_rate(294) == pytest.approx(3e-3 / math.e, rel=1e-14)
    assert learning_rate(294) == pytest.approx(1.104e-3, abs=1e-6)
    assert learning_rate(1000) == 1e-4
    assert learning_rate(4000) == 1e-4
    with pytest.raises(ValueError):
        learning_rate(-1)


@given(st.integers(0, 5000))
def test_learning_rate_bounded_and_monotone(it):
    assert 1e-4 <= learning_rate(it) <= 3e-3
    assert learning_rate(it + 1) <= learning_rate(it)


# Adam

def test_zero_gradient_fixed_point():
    x = np.array([0.45, 0.47, 8.0])
    st0 = OptimizerState(x.copy(), np.array([1e-3, -2e-3, 1e-3]), np.array([1e-6, 1e-6, 1e-6]))
    st1 = adam_step(st0, np.zeros(3), -np.inf, np.inf, lr=0.0)
    assert np.array_equal(st1.params, x)
    assert np.all(np.abs(st1.m) < np.abs(st0.m)) and np.all(st1.v < st0.v)


def test_constant_gradient_step_size():
    st0 = OptimizerState.start(np.zeros(2))
    g = np.array([0.3, -2.0])
    for _ in range(200):
        prev = st0.params
        st0 = adam_step(st0, g, -np.inf, np.inf, lr=1e-3)
    step = st0.params - prev
    assert np.allclose(step, -1e-3 * np.sign(g), rtol=1e-6)


def test_adam_first_step_matches_formula():
    st0 = OptimizerState.start(np.array([1.0]))
    st1 = adam_step(st0, np.array([0.5]), -10, 10, lr=0.01)
    # bias-corrected first step is lr * g / (|g| + eps)
    assert st1.params[0] == pytest.approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8), rel=1e-14)
    assert st1.iteration == 1


def test_clip_to_bounds():
    dev = random_device(2, 1)
    x = dev.params.copy()
    x[0], x[5] = 0.5199, 9.99
    st0 = OptimizerState.start(x)
    g = np.zeros_like(x)
    g[0] = -1.0
    g[5] = -1.0          # push a length past l_max
    st1 = adam_step(st0, g, dev.lower_bounds(), dev.upper_bounds(), lr=0.05)
    assert st1.params[0] == 0.52
    assert st1.params[5] == 10.0
    d = dev.with_params(st1.params)
    assert np.all(d.bounds.l_max - d.lengths() >= 0)
    # moments are not touched by the clip
    assert st1.m[0] == pytest.approx(-0.1)


def test_non_finite_gradient():
    st0 = OptimizerState.start(np.zeros(4))
    with pytest.raises(NonFiniteGradientError) as err:
        adam_step(st0, np.array([0.0, np.nan, np.inf, 1.0]), -1, 1)
    assert err.value.indices == [1, 2]


def test_gradient_shape_checked():
    with pytest.raises(ValueError):
        adam_step(OptimizerState.start(np.zeros(3)), np.zeros(2), -1, 1)


# convergence rule

def test_constant_values_converge():
    assert convergence_check([0.2] * 10)
    assert not convergence_check([0.2] * 9)


def test_halving_never_converges():
    assert not convergence_check([2.0 ** -k for k in range(30)])


def test_slow_drift_converges():
    seq = [1.0 * (1 - 9.5e-4) ** k for k in range(10)]
    assert convergence_check(seq)
    seq[-1] = seq[-2] * (1 - 1.5e-3)
    assert not convergence_check(seq)


def test_iteration_cap():
    assert convergence_check([1.0, 0.5], max_iterations=2)


# loop

def test_optimize_feasible_and_monotone_minimum():
    dev = random_device(2, 2, seed=0, spread=False)
    obj = splitter_objective(8)
    seen = []

    def record(it, J):
        seen.append(J)

    best, trace = optimize_device(dev, obj, max_iterations=60, checkpoint_every=20, callback=record)
    assert len(trace) == len(trace.values) == len(trace.penalties) == len(trace.learning_rates) == 60
    assert len(trace.wall_ms) == 60
    assert trace.stop_reason == "max_iterations"
    assert sorted(trace.checkpoints) == [0, 20, 40]
    for params in trace.checkpoints.values():
        d = dev.with_params(params)
        assert np.all((params >= d.lower_bounds()) & (params <= d.upper_bounds()))
    rm = trace.running_min()
    assert np.all(np.diff(rm) <= 0)
    assert trace.best_value == rm[-1] == min(trace.values)
    assert seen == trace.values
    assert evaluate_objective(best, obj) == trace.best_value


def test_optimize_deterministic():
    dev = random_device(2, 2, seed=1, spread=False)
    obj = splitter_objective(8)
    a = optimize_device(dev, obj, max_iterations=40)[1]
    b = optimize_device(dev, obj, max_iterations=40)[1]
    assert a.values == b.values and a.penalties == b.penalties


def test_user_abort():
    dev = random_device(2, 1, seed=2)
    _, trace = optimize_device(dev, splitter_objective(4), callback=lambda it, J: it == 4)
    assert trace.stop_reason == "user_abort" and len(trace) == 5


def test_failure_carries_iteration():
    dev = random_device(2, 1, seed=3)
    bad = splitter_objective(4, start=1100.0, stop=1500.0)
    with pytest.raises(OptimizationError) as err:
        optimize_device(dev, bad, max_iterations=5)
    assert err.value.iteration == 0


def test_trace_jsonl(tmp_path):
    dev = random_device(2, 1, seed=4)
    _, trace = optimize_device(dev, splitter_objective(4), max_iterations=7)
    path = tmp_path / "t.jsonl"
    trace.write_jsonl(path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(rows) == 7
    assert set(rows[0]) == {"iter", "J", "P", "lr", "wall_ms"}
    assert [r["J"] for r in rows] == trace.values


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 1000))
def test_feasibility_every_iteration(seed):
    dev = random_device(2, 1, seed=seed, spread=False)
    _, trace = optimize_device(dev, splitter_objective(4, (0.9, 0.1)), max_iterations=25,
                               checkpoint_every=1)
    for params in trace.checkpoints.values():
        d = dev.with_params(params)
        assert np.all(params >= d.lower_bounds()) and np.all(params <= d.upper_bounds())
        assert np.all(d.bounds.l_max - d.lengths() >= 0)

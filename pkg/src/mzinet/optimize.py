"""
Initialization, Adam updates with clipping, the learning-rate schedule, the
relative convergence rule, and the optimization loop.
"""

from dataclasses import dataclass, field
import json
import math
import time

import numpy as np

from .errors import NonFiniteGradientError
from .gradient import gradient
from .mesh import TaperBounds
from .objective import DesignObjective, regularization_penalty  # noqa: F401  (re-export)

LR_START = 3e-3
LR_FLOOR = 1e-4
LR_DECAY_ITERATIONS = 294.0

STOP_REASONS = ("converged", "max_iterations", "user_abort")


class OptimizationError(RuntimeError):
    """A failure inside the optimization loop, tagged with its iteration."""

    def __init__(self, iteration, cause):
        self.iteration = iteration
        self.cause = cause
        super().__init__(f"iteration {iteration}: {cause}")


@dataclass(frozen=True)
class InitConfig:
    """Initial geometry and bounds. Widths in nm, lengths in um."""

    w_default_nm: float = 450.0
    delta_w_nm: float = 10.0
    w_offset_nm: float = 40.0
    w_min_nm: float = 400.0
    w_max_nm: float = 520.0
    l_max_um: float = 10.0
    l_min_um: float = 6.0
    delta_l_um: float = 2.0
    xi: int = 5
    seed: int = 0

    def problems(self):
        out = []
        if self.xi < 1:
            out.append(f"xi must be >= 1, got {self.xi}")
        if self.l_min_um < 1.0 * (self.xi + 1):
            out.append(f"l_min_um={self.l_min_um} is shorter than 1 um x (xi + 1) = {self.xi + 1}")
        if not self.l_min_um <= self.l_max_um:
            out.append("l_min_um must not exceed l_max_um")
        if self.delta_w_nm < 0 or self.delta_l_um < 0:
            out.append("deviation amplitudes must be non-negative")
        lo = self.w_default_nm + self.w_offset_nm - self.delta_w_nm
        hi = self.w_default_nm + self.w_offset_nm + self.delta_w_nm
        if lo < self.w_min_nm or hi > self.w_max_nm:
            out.append(
                f"initial widths span [{lo}, {hi}] nm, outside bounds "
                f"[{self.w_min_nm}, {self.w_max_nm}] nm"
            )
        return out

    def validate(self):
        probs = self.problems()
        if probs:
            raise ValueError("; ".join(probs))
        return self

    def bounds(self):
        return TaperBounds(self.w_default_nm / 1e3, self.w_min_nm / 1e3, self.w_max_nm / 1e3,
                           self.l_min_um, self.l_max_um)


def initialize_parameters(topology, config):
    """Random starting widths and lengths (um) for every taper in ``topology``.

    Widths are w_default + p_w * delta_w + w_offset with p_w ~ U[-1, 1];
    lengths are l_max - p_L * delta_L with p_L ~ U[0, 1].
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    shape = (topology.n_units, 4)
    p_w = rng.uniform(-1.0, 1.0, size=shape + (config.xi,))
    p_l = rng.uniform(0.0, 1.0, size=shape)
    widths = (config.w_default_nm + p_w * config.delta_w_nm + config.w_offset_nm) / 1e3
    lengths = np.clip(config.l_max_um - p_l * config.delta_l_um, config.l_min_um, config.l_max_um)
    return np.concatenate([widths, lengths[..., None]], axis=-1).reshape(-1)


def learning_rate(iteration):
    """3e-3 decaying exponentially to a 1e-4 floor, reached at iteration 1000."""
    if iteration < 0:
        raise ValueError("iteration must be non-negative")
    return max(LR_FLOOR, LR_START * math.exp(-iteration / LR_DECAY_ITERATIONS))


@dataclass
class OptimizerState:
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    iteration: int = 0
    lr: float = LR_START
    best_value: float = math.inf

    @classmethod
    def start(cls, params):
        params = np.array(params, dtype=float)
        return cls(params, np.zeros_like(params), np.zeros_like(params))


def adam_step(state, grad, lower, upper, lr=None, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update followed by clipping to [lower, upper].

    Moments are left untouched by the clip. ``lr`` defaults to the schedule
    value for ``state.iteration``.
    """
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.params.shape:
        raise ValueError(f"gradient shape {grad.shape} != parameter shape {state.params.shape}")
    bad = ~np.isfinite(grad)
    if bad.any():
        raise NonFiniteGradientError(state.iteration, np.flatnonzero(bad))
    if lr is None:
        lr = learning_rate(state.iteration)
    t = state.iteration + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    params = np.clip(state.params - lr * m_hat / (np.sqrt(v_hat) + eps), lower, upper)
    return OptimizerState(params, m, v, t, lr, state.best_value)


def _values(trace):
    return list(trace.values) if hasattr(trace, "values") else list(trace)


def convergence_check(trace, tol=1e-3, window=10, max_iterations=None):
    """True once the last ``window`` values each changed by < ``tol`` relative
    to their predecessor, or the iteration cap is reached.
    """
    values = _values(trace)
    if max_iterations is not None and len(values) >= max_iterations:
        return True
    if len(values) < max(window, 2):
        return False
    tail = values[-window:]
    for prev, cur in zip(tail[:-1], tail[1:]):
        denom = max(cur, prev)
        if denom <= 0:
            if cur != prev:
                return False
            continue
        if abs(cur - prev) / denom >= tol:
            return False
    return True


@dataclass
class OptimizationTrace:
    values: list = field(default_factory=list)
    penalties: list = field(default_factory=list)
    learning_rates: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    checkpoints: dict = field(default_factory=dict)
    stop_reason: str = ""
    wall_time: float = 0.0
    best_iteration: int = -1

    def __len__(self):
        return len(self.values)

    @property
    def best_value(self):
        return self.values[self.best_iteration] if self.values else math.inf

    def running_min(self):
        return np.minimum.accumulate(np.array(self.values))

    def records(self, timing=True):
        for i, (J, P, lr, ms) in enumerate(zip(self.values, self.penalties,
                                              self.learning_rates, self.wall_ms)):
            rec = {"iter": i, "J": J, "P": P, "lr": lr}
            if timing:
                rec["wall_ms"] = ms
            yield rec

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec) + "\n")


def optimize_device(device, objective, max_iterations=5000, tol=1e-3, window=10,
                    checkpoint_every=100, callback=None):
    """Adam loop from ``device.params`` until the convergence rule fires.

    Returns the device holding the lowest-J iterate and the trace. ``callback``
    is called as ``callback(iteration, J)``; a truthy return aborts the run.
    """
    lower, upper = device.lower_bounds(), device.upper_bounds()
    state = OptimizerState.start(np.clip(device.params, lower, upper))
    trace = OptimizationTrace()
    best_params = state.params.copy()
    t_start = time.perf_counter()
    it = 0
    try:
        while True:
            t0 = time.perf_counter()
            try:
                report = gradient(device.with_params(state.params), objective)
            except Exception as exc:
                raise OptimizationError(it, exc) from exc
            lr = learning_rate(it)
            trace.values.append(report.value)
            trace.penalties.append(report.penalty)
            trace.learning_rates.append(lr)
            if report.value < state.best_value:
                state.best_value = report.value
                best_params = state.params.copy()
                trace.best_iteration = it
            if checkpoint_every and it % checkpoint_every == 0:
                trace.checkpoints[it] = state.params.copy()
            if callback is not None and callback(it, report.value):
                trace.wall_ms.append((time.perf_counter() - t0) * 1e3)
                trace.stop_reason = "user_abort"
                break
            if convergence_check(trace.values, tol, window):
                trace.wall_ms.append((time.perf_counter() - t0) * 1e3)
                trace.stop_reason = "converged"
                break
            if it + 1 >= max_iterations:
                trace.wall_ms.append((time.perf_counter() - t0) * 1e3)
                trace.stop_reason = "max_iterations"
                break
            try:
                state = adam_step(state, report.gradient, lower, upper, lr)
            except NonFiniteGradientError:
                raise
            except Exception as exc:
                raise OptimizationError(it, exc) from exc
            trace.wall_ms.append((time.perf_counter() - t0) * 1e3)
            it += 1
    except KeyboardInterrupt:
        trace.stop_reason = "user_abort"
        if len(trace.wall_ms) < len(trace.values):
            trace.wall_ms.append((time.perf_counter() - t0) * 1e3)
    trace.wall_time = time.perf_counter() - t_start
    return device.with_params(best_params), trace


def run_optimization(spec, max_iterations=None, seed=None, callback=None):
    """Optimize the device described by a ``DesignSpec``."""
    device = spec.initial_device(seed=seed)
    objective = spec.objective()
    cap = spec.max_iterations if max_iterations is None else max_iterations
    return optimize_device(device, objective, max_iterations=cap,
                           checkpoint_every=spec.checkpoint_every, callback=callback)

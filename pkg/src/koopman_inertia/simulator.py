"""Fixed-step RK4 integration of the swing equations through a fault sequence."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, SimulationDivergenceError
from .grid_model import (
    FaultScenario,
    NetworkModel,
    OperatingPoint,
    Phase,
    ReducedNetwork,
    SystemState,
    accelerating_power,
    equilibrium_state,
    kron_reduce,
    operating_point,
)
from .series import POWER_CHANNEL, TimeSeriesSet, omega_label

DEFAULT_DT = 1.0 / 1200.0
_ALIGN_TOL = 1e-9


def _steps(interval: float, dt: float, what: str) -> int:
    n = round(interval / dt)
    if abs(n * dt - interval) > _ALIGN_TOL * max(1.0, abs(interval)):
        raise AlignmentError(f"{what} ({interval:g} s) is not a multiple of dt={dt:g} s")
    return int(n)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``x[k] = [delta, omega]`` at ``t[k] = k * dt``."""

    t: np.ndarray
    x: np.ndarray
    dt: float
    fault_index: int | None
    clear_index: int
    gen_ids: tuple[int, ...]  # dynamic generators, state order

    @property
    def n_dynamic(self) -> int:
        return self.x.shape[1] // 2

    def state(self, k: int) -> SystemState:
        return SystemState.from_vector(self.x[k])

    @property
    def clearing_time(self) -> float:
        return float(self.t[self.clear_index])


def _vector_field(red: ReducedNetwork, damping: float):
    n = red.n_dynamic
    Y = red.admittance
    emf = red.emf
    dyn = red.dynamic
    theta = np.full(len(emf), red.infinite_angle if red.infinite_angle is not None else 0.0)
    pm, M = red.p_mech, red.inertia

    def f(x):
        theta[dyn] = x[:n]
        E = emf * np.exp(1j * theta)
        pe = (E * np.conj(Y @ E)).real[dyn]
        out = np.empty_like(x)
        out[:n] = x[n:]
        out[n:] = (pm - pe - damping * x[n:]) / M
        return out

    return f


def rk4_steps(f, x0: np.ndarray, n_steps: int, dt: float, t0: float = 0.0) -> np.ndarray:
    """Classical RK4; returns ``n_steps + 1`` states including ``x0``."""
    out = np.empty((n_steps + 1, len(x0)))
    out[0] = x = np.array(x0, dtype=float)
    half = 0.5 * dt
    for k in range(n_steps):
        k1 = f(x)
        k2 = f(x + half * k1)
        k3 = f(x + half * k2)
        k4 = f(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            t = t0 + (k + 1) * dt
            raise SimulationDivergenceError(f"state became non-finite at t = {t:.6g} s", t)
        out[k + 1] = x
    return out


def integrate(net: NetworkModel, scenario: FaultScenario | None, t_end: float,
              dt: float = DEFAULT_DT, damping: float = 0.0,
              op: OperatingPoint | None = None,
              initial: SystemState | None = None) -> Trajectory:
    """Integrate pre-fault, fault-on and post-fault phases from the equilibrium.

    Phase boundaries must fall on integration nodes. Without a scenario the
    pre-fault network is integrated over the whole span.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    op = operating_point(net) if op is None else op
    x = (initial or equilibrium_state(op, net)).as_vector()
    n_total = int(math.floor(t_end / dt + _ALIGN_TOL))
    segments: list[tuple[ReducedNetwork, int]] = []
    if scenario is None:
        if n_total < 1:
            raise ValueError("t_end must cover at least one step")
        segments.append((kron_reduce(net, Phase.PRE_FAULT, op=op), n_total))
        fault_index, clear_index = None, 0
    else:
        scenario.validate(net)
        n_pre = _steps(scenario.start, dt, "fault start")
        n_fault = _steps(scenario.duration(net.frequency_hz), dt, "fault duration")
        fault_index, clear_index = n_pre, n_pre + n_fault
        if n_total <= clear_index:
            raise ValueError("t_end must exceed the fault clearing time")
        if n_pre:
            segments.append((kron_reduce(net, Phase.PRE_FAULT, scenario, op), n_pre))
        segments.append((kron_reduce(net, Phase.FAULT_ON, scenario, op), n_fault))
        segments.append((kron_reduce(net, Phase.POST_FAULT, scenario, op), n_total - clear_index))

    pieces = [x[None, :]]
    k0 = 0
    for red, n in segments:
        seg = rk4_steps(_vector_field(red, damping), pieces[-1][-1], n, dt, k0 * dt)
        pieces.append(seg[1:])
        k0 += n
    xs = np.concatenate(pieces)
    t = dt * np.arange(xs.shape[0])
    gen_ids = tuple(g.id for g in net.dynamic_generators)
    return Trajectory(t, xs, dt, fault_index, clear_index, gen_ids)


def sample_observables(traj: Trajectory, red_post: ReducedNetwork, period: float) -> TimeSeriesSet:
    """Sample omega_i and the net accelerating power from fault clearing onward.

    The power channel is evaluated from the post-fault network at the sample
    instants, not derived from the speeds.
    """
    stride = _steps(period, traj.dt, "sample period")
    if stride < 1:
        raise AlignmentError("sample period must be at least one integration step")
    idx = np.arange(traj.clear_index, len(traj.t), stride)
    n = traj.n_dynamic
    omega = traj.x[idx, n:]
    dP = np.array([accelerating_power(red_post, traj.x[k, :n]).sum() for k in idx])
    labels = tuple(omega_label(g) for g in traj.gen_ids) + (POWER_CHANNEL,)
    return TimeSeriesSet(period, labels, np.column_stack([omega, dP]), 0.0)


def simulate(net: NetworkModel, scenario: FaultScenario | None, t_end: float,
             period: float = 1.0 / 60.0, dt: float = DEFAULT_DT,
             damping: float = 0.0) -> tuple[TimeSeriesSet, Trajectory]:
    """Run a scenario and return the sampled observables with the raw trajectory."""
    op = operating_point(net)
    traj = integrate(net, scenario, t_end, dt, damping, op)
    phase = Phase.PRE_FAULT if scenario is None else Phase.POST_FAULT
    red_post = kron_reduce(net, phase, scenario, op)
    return sample_observables(traj, red_post, period), traj


def energy_function(red: ReducedNetwork, state: SystemState) -> float:
    """Transient energy of a lossless reduced network (conductances ignored)."""
    theta = np.full(len(red.emf), red.infinite_angle if red.infinite_angle is not None else 0.0)
    theta[red.dynamic] = state.delta
    kinetic = 0.5 * float(np.sum(red.inertia * state.omega**2))
    B = red.admittance.imag
    EE = np.outer(red.emf, red.emf) * B
    iu = np.triu_indices(len(theta), 1)
    coupling = np.sum(EE[iu] * np.cos(theta[iu[0]] - theta[iu[1]]))
    return kinetic - float(np.dot(red.p_mech, state.delta)) - float(coupling)

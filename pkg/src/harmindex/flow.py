"""Gradient flows of the test functions and the functionals along them.

The flow of w = -grad u is integrated with classical RK4 in the ambient
space and renormalised onto the sphere after every step.  Images of tangent
vectors under the flow are carried by the linearised equation
J' = DV(y) J on the same RK4 steps, so the differential of phi_t o f is
exact at t = 0 and shares the integrator's O(step^4) error afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conformal import TestFunction
from .geometry import SpherePoint, tangent_project
from .maps import ZooMap, pullback_metric, stress_energy, total_energy, volume

FLOW_STEP = 1e-2
ENERGY_STEP_TOL = 1e-8
VOLUME_REL_TOL = 1e-8
U_STEP_TOL = 1e-12


def _velocity(u: TestFunction, y, J=None):
    g = u.ambient_gradients(y)
    yg = np.einsum("pd,pd->p", y, g)
    v = -g + yg[:, None] * y
    if J is None:
        return v, None
    H = u.ambient_hessians(y)
    HJ = np.einsum("pab,pkb->pka", H, J)
    gJ = np.einsum("pd,pkd->pk", g, J)
    yHJ = np.einsum("pd,pkd->pk", y, HJ)
    dJ = -HJ + (gJ + yHJ)[:, :, None] * y[:, None, :] + yg[:, None, None] * J
    return v, dJ


def _rk4(u: TestFunction, y, J, dt: float, nsteps: int):
    for _ in range(nsteps):
        k1, l1 = _velocity(u, y, J)
        k2, l2 = _velocity(u, y + 0.5 * dt * k1, None if J is None else J + 0.5 * dt * l1)
        k3, l3 = _velocity(u, y + 0.5 * dt * k2, None if J is None else J + 0.5 * dt * l2)
        k4, l4 = _velocity(u, y + dt * k3, None if J is None else J + dt * l3)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y = y / np.linalg.norm(y, axis=-1, keepdims=True)
        if J is not None:
            J = J + dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
            J = tangent_project(y[:, None, :], J)
    return y, J


def _substeps(dt: float, step: float) -> int:
    return max(1, math.ceil(dt / step - 1e-9))


def flow_points(y0, u: TestFunction, t: float, step: float = FLOW_STEP) -> np.ndarray:
    """phi_t(y0) for rows of y0 under dy/ds = -grad u(y)."""
    if t < 0 or step <= 0:
        raise ValueError("need t >= 0 and step > 0")
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    if t == 0:
        return y0.copy()
    n = _substeps(t, step)
    y, _ = _rk4(u, y0, None, t / n, n)
    return y


def flow_point(y0: SpherePoint, u: TestFunction, t: float, step: float = FLOW_STEP) -> SpherePoint:
    y = flow_points(y0.ambient, u, t, step)[0]
    return SpherePoint(y / np.linalg.norm(y))


def flow_sequence(y0, J0, u: TestFunction, times, step: float = FLOW_STEP):
    """Yield (y, J) at each of the increasing ``times`` (the first must be 0)."""
    y, J = np.array(y0, dtype=float), None if J0 is None else np.array(J0, dtype=float)
    prev = 0.0
    for t in times:
        dt = t - prev
        if dt > 0:
            n = _substeps(dt, step)
            y, J = _rk4(u, y, J, dt / n, n)
        prev = t
        yield y, J


@dataclass(frozen=True)
class FlowSeries:
    times: np.ndarray
    values: np.ndarray
    kind: str
    verdict: bool
    worst: float
    tolerance: float

    def to_csv(self) -> str:
        lines = ["t,value"]
        lines += [f"{t!r},{v!r}" for t, v in zip(self.times.tolist(), self.values.tolist())]
        lines.append(f"# kind: {self.kind}")
        lines.append(f"# verdict: {'PASS' if self.verdict else 'FAIL'} (worst {self.worst!r}, tolerance {self.tolerance!r})")
        return "\n".join(lines) + "\n"


def _times(t_max: float, samples: int) -> np.ndarray:
    if samples < 2 or t_max <= 0:
        raise ValueError("need samples >= 2 and t_max > 0")
    return np.linspace(0.0, t_max, samples)


def energy_series(f: ZooMap, u: TestFunction, t_max: float = 1.0, samples: int = 21,
                  step: float = FLOW_STEP) -> FlowSeries:
    """E(phi_t o f) on an even time grid, with a per-step monotonicity verdict."""
    if not f.harmonic:
        raise ValueError("energy series is defined for harmonic maps")
    if not stress_energy(f).positive:
        raise ValueError("energy series needs a positive stress-energy tensor")
    times = _times(t_max, samples)
    vals = []
    for _, J in flow_sequence(f.values, f.differential, u, times, step):
        e = 0.5 * np.sum(J * J, axis=(-2, -1))
        vals.append(f.grid.integrate(e))
    vals = np.array(vals)
    worst = float(np.max(np.diff(vals)))
    return FlowSeries(times, vals, "energy", worst <= ENERGY_STEP_TOL, worst, ENERGY_STEP_TOL)


def volume_series(f: ZooMap, u: TestFunction, t_max: float = 1.0, samples: int = 21,
                  step: float = FLOW_STEP) -> FlowSeries:
    """V(phi_t o f) with verdict V(f_t) <= V(f) (1 + 1e-8)."""
    if not (f.minimal_immersion and f.isometric):
        raise ValueError("volume series is defined for minimal isometric immersions")
    times = _times(t_max, samples)
    vals = []
    for _, J in flow_sequence(f.values, f.differential, u, times, step):
        vals.append(f.grid.integrate(np.sqrt(np.linalg.det(pullback_metric(J)))))
    vals = np.array(vals)
    worst = float(np.max(vals / vals[0] - 1.0))
    return FlowSeries(times, vals, "volume", worst <= VOLUME_REL_TOL, worst, VOLUME_REL_TOL)


def u_series(f: ZooMap, u: TestFunction, t_max: float = 1.0, samples: int = 21,
             step: float = FLOW_STEP) -> FlowSeries:
    """Integral of u o phi_t o f; the verdict is pointwise: u must not increase at any node."""
    times = _times(t_max, samples)
    traces = np.array([u.values(y) for y, _ in flow_sequence(f.values, None, u, times, step)])
    worst = float(np.max(np.diff(traces, axis=0)))
    vals = traces @ f.grid.weights
    return FlowSeries(times, vals, "u_along_flow", worst <= U_STEP_TOL, worst, U_STEP_TOL)


def base_value(f: ZooMap, kind: str) -> float:
    return total_energy(f) if kind == "energy" else volume(f)

"""Explicit maps into round spheres and their first-order functionals."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .geometry import (
    DomainGrid,
    GeometryError,
    SpherePoint,
    TangentVec,
    make_grid,
    tangent_project,
)

TENSION_STEP = 1e-3
SECOND_FORM_STEP = 1e-4
RANK_CUTOFF = 1e-10


class NotAnImmersion(ValueError):
    pass


@dataclass(frozen=True)
class ZooMap:
    """A map f: (M^m, g) -> S^n with an analytic differential.

    ``value_fn(points)`` returns f at domain points (grid representation) and
    ``push_fn(points, vectors)`` returns df applied to tangent vectors of
    shape (P, K, D), giving (P, K, n+1).
    """

    name: str
    grid: DomainGrid
    target_dim: int
    value_fn: Callable
    push_fn: Callable
    harmonic: bool = False
    minimal_immersion: bool = False
    isometric: bool = False
    totally_geodesic: bool = False

    @property
    def domain_dim(self) -> int:
        return self.grid.dim

    @property
    def flags(self) -> dict:
        return {
            "harmonic": self.harmonic,
            "minimal_immersion": self.minimal_immersion,
            "isometric": self.isometric,
            "totally_geodesic": self.totally_geodesic,
        }

    @cached_property
    def values(self) -> np.ndarray:
        return self.value_fn(self.grid.points)

    @cached_property
    def differential(self) -> np.ndarray:
        """(P, m, n+1): images df(e_alpha) of the g-orthonormal frame at each node."""
        return self.push_fn(self.grid.points, self.grid.frame)

    def value_at(self, node: int) -> SpherePoint:
        v = self.values[node]
        return SpherePoint(v / np.linalg.norm(v))

    def differential_at(self, node: int) -> list[TangentVec]:
        base = self.value_at(node)
        return [TangentVec(base, tangent_project(base.ambient, d)) for d in self.differential[node]]


# ---------------------------------------------------------------------------
# the zoo


def _identity(n: int, res: int) -> ZooMap:
    grid = make_grid(("sphere", n), res)
    return ZooMap(
        name=f"identity{n}",
        grid=grid,
        target_dim=n,
        value_fn=lambda x: np.array(x, dtype=float),
        push_fn=lambda x, v: np.array(v, dtype=float),
        harmonic=True,
        isometric=True,
    )


def _equator(m: int, n: int, res: int) -> ZooMap:
    if not 1 <= m < n:
        raise GeometryError("equator(m, n) needs 1 <= m < n")
    grid = make_grid(("sphere", m), res)
    pad = n - m

    def value(x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([x, np.zeros(x.shape[:-1] + (pad,))], axis=-1)

    return ZooMap(
        name=f"equator{m}{n}",
        grid=grid,
        target_dim=n,
        value_fn=value,
        push_fn=lambda x, v: value(v),
        harmonic=True,
        minimal_immersion=True,
        isometric=True,
        totally_geodesic=True,
    )


def clifford_value(coords) -> np.ndarray:
    u, v = coords[..., 0], coords[..., 1]
    return np.stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v)], axis=-1) / np.sqrt(2.0)


def clifford_normal(coords) -> np.ndarray:
    """Unit normal of the Clifford torus inside S^3."""
    u, v = coords[..., 0], coords[..., 1]
    return np.stack([np.cos(u), np.sin(u), -np.cos(v), -np.sin(v)], axis=-1) / np.sqrt(2.0)


def _clifford(res: int) -> ZooMap:
    grid = make_grid(("torus", (2 * np.pi, 2 * np.pi), 0.5), res)

    def push(x, vecs):
        u, v = x[..., 0], x[..., 1]
        du = np.stack([-np.sin(u), np.cos(u), 0 * u, 0 * u], axis=-1) / np.sqrt(2.0)
        dv = np.stack([0 * v, 0 * v, -np.sin(v), np.cos(v)], axis=-1) / np.sqrt(2.0)
        return vecs[..., 0:1] * du[..., None, :] + vecs[..., 1:2] * dv[..., None, :]

    return ZooMap(
        name="clifford",
        grid=grid,
        target_dim=3,
        value_fn=clifford_value,
        push_fn=push,
        harmonic=True,
        minimal_immersion=True,
        isometric=True,
        totally_geodesic=False,
    )


def _constant(n: int, res: int, point=None) -> ZooMap:
    grid = make_grid(("sphere", n), res)
    p = np.zeros(n + 1)
    p[0] = 1.0
    if point is not None:
        p = np.asarray(point, dtype=float) / np.linalg.norm(point)

    def value(x):
        return np.broadcast_to(p, np.shape(x)[:-1] + (n + 1,)).copy()

    def push(x, vecs):
        return np.zeros(np.shape(vecs)[:-1] + (n + 1,))

    return ZooMap(
        name=f"constant{n}",
        grid=grid,
        target_dim=n,
        value_fn=value,
        push_fn=push,
        harmonic=True,
    )


_TAG = re.compile(
    r"^(?:(?P<id>identity)\(?(?P<idn>\d)\)?"
    r"|(?P<eq>equator)\(?(?P<eqm>\d),?(?P<eqn>\d)\)?"
    r"|(?P<cl>clifford(?:_torus)?)"
    r"|(?P<const>constant)\(?(?P<cn>\d)\)?)$"
)

ZOO_TAGS = ("identity2", "identity3", "identity4", "equator23", "equator24", "clifford", "constant2", "constant3")


def make_zoo_map(name: str, resolution: int = 64, **options) -> ZooMap:
    """Build a zoo map from a tag such as ``identity3``, ``equator(2,3)``,
    ``clifford_torus`` or ``constant2``."""
    m = _TAG.match(name.strip().lower().replace(" ", ""))
    if m is None:
        raise ValueError(f"unknown zoo map {name!r}")
    if m["id"]:
        n = int(m["idn"])
        if n < 2:
            raise ValueError("identity needs n >= 2")
        return _identity(n, resolution)
    if m["eq"]:
        return _equator(int(m["eqm"]), int(m["eqn"]), resolution)
    if m["cl"]:
        return _clifford(resolution)
    return _constant(int(m["cn"]), resolution, options.get("point"))


# ---------------------------------------------------------------------------
# first-order functionals


def energy_density(f: ZooMap, node: int | None = None):
    """e(f) = 1/2 sum_alpha |df(e_alpha)|^2; an array over nodes unless ``node`` is given."""
    d = f.differential if node is None else f.differential[node]
    e = 0.5 * np.sum(d * d, axis=(-2, -1))
    return e if node is None else float(e)


def total_energy(f: ZooMap) -> float:
    return f.grid.integrate(energy_density(f))


def _second_differences(f: ZooMap, points, frames, step: float, directions):
    """Ambient second differences of f along domain geodesics.

    ``directions`` is a list of (P, D) arrays; returns (len(directions), P, n+1).
    """
    f0 = f.value_fn(points)
    out = []
    for d in directions:
        xp, _ = f.grid.shift(points, frames, d, step)
        xm, _ = f.grid.shift(points, frames, d, -step)
        out.append((f.value_fn(xp) - 2.0 * f0 + f.value_fn(xm)) / step**2)
    return np.stack(out), f0


def ambient_laplacian(f: ZooMap, step: float = TENSION_STEP) -> np.ndarray:
    """sum_alpha d^2/ds^2 f(gamma_alpha(s)) in R^{n+1} at every node."""
    pts, frames = f.grid.points, f.grid.frame
    dirs = [frames[:, a, :] for a in range(f.domain_dim)]
    acc, _ = _second_differences(f, pts, frames, step, dirs)
    return acc.sum(axis=0)


def tension_field(f: ZooMap, step: float = TENSION_STEP) -> np.ndarray:
    """tau(f) = trace nabla df, the tangential part of the ambient Laplacian."""
    return tangent_project(f.values, ambient_laplacian(f, step))


def tension_residual(f: ZooMap, step: float = TENSION_STEP) -> float:
    return float(np.max(np.linalg.norm(tension_field(f, step), axis=-1)))


def tension_convergence(f: ZooMap, step: float = 1e-2) -> dict:
    """Observed order of the finite-difference trace under step halving.

    Uses successive differences A(h) - A(h/2) and A(h/2) - A(h/4), so no
    analytic answer enters.  ``order`` is None when the differences are at
    rounding level (e.g. a constant map, where the stencil is exact).
    """
    a = [ambient_laplacian(f, step / 2**i) for i in range(3)]
    d1 = float(np.max(np.abs(a[0] - a[1])))
    d2 = float(np.max(np.abs(a[1] - a[2])))
    order = None if d2 < 1e-11 else float(np.log2(d1 / d2))
    return {
        "step": step,
        "residual": tension_residual(f),
        "delta_h": d1,
        "delta_h2": d2,
        "order": order,
    }


@dataclass(frozen=True)
class StressReport:
    s_min: np.ndarray
    global_min: float
    trace: np.ndarray

    @property
    def positive(self) -> bool:
        return self.global_min >= -1e-10

    @property
    def positive_definite(self) -> bool:
        return self.global_min > 1e-10


def pullback_metric(d: np.ndarray) -> np.ndarray:
    """f*h in the frame: G_ab = <df(e_a), df(e_b)>."""
    return np.einsum("...ad,...bd->...ab", d, d)


def stress_energy(f: ZooMap) -> StressReport:
    """S_g(f) = e(f) g - f*h with its pointwise minimal eigenvalue."""
    G = pullback_metric(f.differential)
    e = 0.5 * np.trace(G, axis1=-2, axis2=-1)
    m = f.domain_dim
    S = e[:, None, None] * np.eye(m) - G
    s_min = np.linalg.eigvalsh(S)[:, 0]
    return StressReport(s_min=s_min, global_min=float(s_min.min()), trace=np.trace(S, axis1=-2, axis2=-1))


def volume(f: ZooMap) -> float:
    det = np.linalg.det(pullback_metric(f.differential))
    if np.any(det <= 1e-14):
        raise NotAnImmersion("not an immersion: degenerate pullback metric")
    return f.grid.integrate(np.sqrt(det))


def image_basis(d: np.ndarray, cutoff: float = RANK_CUTOFF):
    """Orthonormal basis of span df(e_alpha) per point.

    Returns (Q, rank) with Q of shape (P, n+1, m) whose leading ``rank[p]``
    columns span the image; trailing columns are zeroed.
    """
    u, s, _ = np.linalg.svd(np.swapaxes(d, -1, -2), full_matrices=False)
    keep = s > cutoff
    return u * keep[..., None, :], keep.sum(axis=-1)


def normal_part(f_values, d, w, require_immersion: bool = True):
    """Component of tangent vectors w orthogonal to df(T M) (and to f)."""
    Q, rank = image_basis(d)
    if require_immersion and np.any(rank < d.shape[-2]):
        raise NotAnImmersion("rank-deficient differential")
    w = tangent_project(f_values, w)
    coef = np.einsum("...dk,...d->...k", Q, w)
    return w - np.einsum("...dk,...k->...d", Q, coef)


def second_fundamental_tensor(f: ZooMap, points=None, frames=None, step: float = SECOND_FORM_STEP):
    """II(e_a, e_b) projected to the normal space, shape (P, m, m, n+1).

    Diagonal terms are geodesic second differences; off-diagonal terms use
    polarisation along e_a + e_b and e_a - e_b.
    """
    if points is None:
        points, frames = f.grid.points, f.grid.frame
    m = f.domain_dim
    dirs, keys = [], []
    for a in range(m):
        dirs.append(frames[:, a, :])
        keys.append((a, a, 1.0))
    for a in range(m):
        for b in range(a + 1, m):
            dirs.append(frames[:, a, :] + frames[:, b, :])
            dirs.append(frames[:, a, :] - frames[:, b, :])
            keys.append((a, b, None))
    acc, f0 = _second_differences(f, points, frames, step, dirs)
    P = points.shape[0]
    II = np.zeros((P, m, m, f.target_dim + 1))
    i = 0
    for a, b, _ in keys:
        if a == b:
            II[:, a, a] = acc[i]
            i += 1
        else:
            II[:, a, b] = II[:, b, a] = 0.25 * (acc[i] - acc[i + 1])
            i += 2
    d = f.push_fn(points, frames)
    flat = II.reshape(P, m * m, -1)
    normal = normal_part(f0[:, None, :], d[:, None, :, :], flat, require_immersion=False)
    return normal.reshape(II.shape)


def sigma_norm_sq(II: np.ndarray, w: np.ndarray) -> np.ndarray:
    """||sigma(w)||^2 = sum_ab <II(e_a, e_b), w>^2, vectorised over points."""
    c = np.einsum("...abd,...d->...ab", II, w)
    return np.sum(c * c, axis=(-2, -1))


def second_fundamental_form(
    f: ZooMap, node: int, w_normal: TangentVec, step: float = SECOND_FORM_STEP
) -> float:
    if not f.minimal_immersion:
        raise ValueError("second fundamental form requested for a map not flagged as a minimal immersion")
    d = f.differential[node]
    w = np.asarray(w_normal.vec, dtype=float)
    if np.max(np.abs(d @ w)) > 1e-10 * max(1.0, np.linalg.norm(w)):
        raise ValueError("w is not normal to the immersion")
    pts = f.grid.points[node : node + 1]
    frames = f.grid.frame[node : node + 1]
    II = second_fundamental_tensor(f, pts, frames, step)
    return float(sigma_norm_sq(II, w[None, :])[0])


def clifford_sigma_norm_sq(coords, w) -> np.ndarray:
    """Analytic ||sigma(w)||^2 for the Clifford torus: principal curvatures -1, +1."""
    return 2.0 * np.einsum("...d,...d->...", clifford_normal(coords), w) ** 2

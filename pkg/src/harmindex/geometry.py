"""Round-sphere primitives and quadrature grids on source manifolds.

Points of S^n are stored as unit vectors in R^{n+1}; tangent vectors at a
point y are ambient vectors orthogonal to y.  The vectorised helpers
(``sphere_exp``, ``sphere_transport``, ...) operate on arrays whose last axis
is the ambient coordinate and broadcast over any leading axes.  The typed
wrappers (``exp_map``, ``log_map``, ...) act on single points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# tolerance ladder shared by every module
TOL_ALGEBRAIC = 1e-10
TOL_QUADRATURE = 1e-8
TOL_FINITE_DIFF = 1e-6


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class SpherePoint:
    """A point of the unit sphere S^n in R^{n+1}."""

    ambient: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.ambient, dtype=float)
        if a.ndim != 1 or a.size < 3:
            raise GeometryError("a SpherePoint needs a 1-d vector of length n+1 >= 3")
        if abs(a @ a - 1.0) > 1e-12:
            raise GeometryError(f"point is not on the unit sphere (|x|^2 = {a @ a!r})")
        a.setflags(write=False)
        object.__setattr__(self, "ambient", a)
        object.__setattr__(self, "dim", a.size - 1)

    @classmethod
    def normalized(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        return cls(v / np.linalg.norm(v))

    @classmethod
    def basis(cls, n: int, i: int, sign: float = 1.0) -> "SpherePoint":
        e = np.zeros(n + 1)
        e[i] = sign
        return cls(e)


@dataclass(frozen=True)
class TangentVec:
    """An ambient vector tangent to S^n at ``base``."""

    base: SpherePoint
    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=float)
        if v.shape != self.base.ambient.shape:
            raise GeometryError("tangent vector and base point have different lengths")
        if abs(self.base.ambient @ v) > TOL_ALGEBRAIC * max(1.0, np.linalg.norm(v)):
            raise GeometryError("vector is not tangent at its base point")
        v.setflags(write=False)
        object.__setattr__(self, "vec", v)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))

    def inner(self, other: "TangentVec") -> float:
        _same_base(self, other)
        return float(self.vec @ other.vec)

    def scaled(self, c: float) -> "TangentVec":
        return TangentVec(self.base, c * self.vec)


def _same_base(a: TangentVec, b: TangentVec):
    if a.base.dim != b.base.dim or not np.allclose(
        a.base.ambient, b.base.ambient, rtol=0.0, atol=1e-12
    ):
        raise GeometryError("tangent vectors live at different base points")


def _check_dims(x: SpherePoint, y: SpherePoint):
    if x.dim != y.dim:
        raise GeometryError(f"dimension mismatch: S^{x.dim} vs S^{y.dim}")


# ---------------------------------------------------------------------------
# vectorised kernels


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def tangent_project(y, v):
    """Orthogonal projection of ambient vectors ``v`` onto T_y S^n."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    return v - _dot(y, v)[..., None] * y


def sphere_exp(y, v):
    """cos|v| y + sin|v| v/|v|, returning y where |v| < 1e-14."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v, axis=-1)
    small = r < 1e-14
    safe = np.where(small, 1.0, r)
    out = np.cos(r)[..., None] * y + (np.sin(safe) / safe)[..., None] * v
    return np.where(small[..., None], y, out)


def sphere_log(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = np.clip(_dot(x, y), -1.0, 1.0)
    if np.any(c < -1.0 + 1e-12):
        raise GeometryError("log undefined at antipodal points")
    d = y - c[..., None] * x
    s = np.linalg.norm(d, axis=-1)
    theta = np.arctan2(s, c)
    small = s < 1e-300
    scale = np.where(small, 0.0, theta / np.where(small, 1.0, s))
    return scale[..., None] * d


def sphere_transport(x, y, v):
    """Parallel transport of v in T_x along the minimal geodesic to y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    c = _dot(x, y)
    if np.any(1.0 + c < 1e-12):
        raise GeometryError("parallel transport undefined at antipodal points")
    return v - (_dot(y, v) / (1.0 + c))[..., None] * (x + y)


def tangent_frame(y) -> np.ndarray:
    """Orthonormal basis of T_y S^n as the rows of an n x (n+1) array."""
    y = np.asarray(y, dtype=float)
    # Householder reflection sending e_0 to y; its other columns span y-perp.
    e = np.zeros_like(y)
    e[0] = 1.0
    u = e - y if y[0] < 0 else e + y
    h = np.eye(y.size) - 2.0 * np.outer(u, u) / (u @ u)
    frame = h[:, 1:].T
    return frame


def random_sphere_points(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((count, n + 1))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def random_tangent(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return tangent_project(y, rng.standard_normal(np.shape(y)))


# ---------------------------------------------------------------------------
# typed operations


def geodesic_distance(x: SpherePoint, y: SpherePoint) -> float:
    _check_dims(x, y)
    # atan2 form is accurate at both ends where arccos loses digits
    c = float(x.ambient @ y.ambient)
    s = float(np.linalg.norm(y.ambient - c * x.ambient))
    return float(np.clip(np.arctan2(s, c), 0.0, np.pi))


def exp_map(x: SpherePoint, v: TangentVec) -> SpherePoint:
    if v.base.dim != x.dim or not np.allclose(v.base.ambient, x.ambient, atol=1e-12):
        raise GeometryError("tangent vector is not based at x")
    out = sphere_exp(x.ambient, v.vec)
    return SpherePoint(out / np.linalg.norm(out))


def log_map(x: SpherePoint, y: SpherePoint) -> TangentVec:
    _check_dims(x, y)
    v = sphere_log(x.ambient, y.ambient)
    return TangentVec(x, tangent_project(x.ambient, v))


def parallel_transport(x: SpherePoint, y: SpherePoint, v: TangentVec) -> TangentVec:
    _check_dims(x, y)
    if not np.allclose(v.base.ambient, x.ambient, atol=1e-12):
        raise GeometryError("tangent vector is not based at x")
    out = sphere_transport(x.ambient, y.ambient, v.vec)
    return TangentVec(y, tangent_project(y.ambient, out))


def curvature_term(X: TangentVec, W: TangentVec, kappa: float = 1.0) -> float:
    """<R(X,W)W, X> for constant sectional curvature kappa."""
    _same_base(X, W)
    xx, ww, xw = X.vec @ X.vec, W.vec @ W.vec, X.vec @ W.vec
    return float(kappa * (xx * ww - xw * xw))


def curvature_polarized(X, W1, W2, kappa: float = 1.0):
    """Bilinear form <R(X,W1)W2, X> = kappa(<X,X><W1,W2> - <X,W1><X,W2>), vectorised."""
    return kappa * (_dot(X, X) * _dot(W1, W2) - _dot(X, W1) * _dot(X, W2))


# ---------------------------------------------------------------------------
# domain grids


def sphere_volume(n: int) -> float:
    from scipy.special import gamma

    return float(2.0 * np.pi ** ((n + 1) / 2) / gamma((n + 1) / 2))


def _hyperspherical_embedding(angles: np.ndarray) -> np.ndarray:
    """angles (P, m) = (theta_1..theta_{m-1}, phi) -> unit vectors (P, m+1)."""
    P, m = angles.shape
    s = np.sin(angles)
    c = np.cos(angles)
    x = np.empty((P, m + 1))
    prod = np.ones(P)
    for k in range(m):
        x[:, k] = prod * c[:, k]
        prod = prod * s[:, k]
    x[:, m] = prod
    return x


def _hyperspherical_frame(angles: np.ndarray) -> np.ndarray:
    """Unit coordinate vectors d x / d a_i / |d x / d a_i| as (P, m, m+1)."""
    P, m = angles.shape
    s = np.sin(angles)
    c = np.cos(angles)
    frame = np.zeros((P, m, m + 1))
    for i in range(m):
        frame[:, i, i] = -s[:, i]
        prod = c[:, i].copy()
        for k in range(i + 1, m + 1):
            tail = c[:, k] if k < m else 1.0
            frame[:, i, k] = prod * tail
            if k < m:
                prod = prod * s[:, k]
    return frame


@dataclass(frozen=True)
class DomainGrid:
    """Quadrature nodes on a source manifold (M^m, g).

    ``points`` is the representation maps consume: unit vectors in R^{m+1} on
    a sphere, chart coordinates on a flat torus.  ``frame[p]`` holds a
    g-orthonormal basis of T M at node p in that same representation.
    """

    kind: str
    dim: int
    resolution: int
    coords: np.ndarray
    weights: np.ndarray
    metric: np.ndarray
    points: np.ndarray
    frame: np.ndarray
    params: tuple = ()

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def volume(self) -> float:
        return float(np.sum(self.weights))

    def metric_at(self, node: int) -> np.ndarray:
        return self.metric[node]

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def shift(self, points, frames, direction, s: float):
        """Move points along domain geodesics with initial velocity ``direction``
        for time s, carrying the frames by parallel transport."""
        if self.kind == "sphere":
            moved = sphere_exp(points, s * direction)
            moved /= np.linalg.norm(moved, axis=-1, keepdims=True)
            carried = sphere_transport(points[..., None, :], moved[..., None, :], frames)
            return moved, carried
        return points + s * direction, frames


def make_grid(manifold, resolution: int = 64) -> DomainGrid:
    """Product quadrature grid.

    ``manifold`` is ``("sphere", m)`` or ``("torus", periods, scale)`` where the
    torus metric is ``scale * Id`` on the coordinate box ``[0, periods)``.
    Spheres use Gauss-Legendre nodes in every polar angle and ``2*resolution``
    trapezoid nodes in azimuth; tori use a uniform product grid.
    """
    if resolution < 8:
        raise GeometryError("resolution must be at least 8")
    if not isinstance(manifold, (tuple, list)) or not manifold:
        raise GeometryError(f"unsupported manifold {manifold!r}")
    tag = manifold[0]
    if tag == "sphere":
        m = int(manifold[1])
        if m < 1:
            raise GeometryError("sphere dimension must be >= 1")
        return _sphere_grid(m, resolution)
    if tag == "torus":
        periods = tuple(float(p) for p in manifold[1])
        scale = float(manifold[2]) if len(manifold) > 2 else 1.0
        return _torus_grid(periods, scale, resolution)
    raise GeometryError(f"unsupported manifold tag {tag!r}")


def _sphere_grid(m: int, res: int) -> DomainGrid:
    xg, wg = np.polynomial.legendre.leggauss(res)
    theta = 0.5 * np.pi * (xg + 1.0)
    wtheta = 0.5 * np.pi * wg
    nphi = 2 * res
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    wphi = np.full(nphi, 2.0 * np.pi / nphi)

    axes = [theta] * (m - 1) + [phi]
    waxes = [wtheta] * (m - 1) + [wphi]
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*waxes, indexing="ij")
    angles = np.stack([a.ravel() for a in mesh], axis=1)
    w = np.prod(np.stack([a.ravel() for a in wmesh], axis=1), axis=1)

    sin = np.sin(angles)
    # sqrt(det g) = prod_i sin^{m-i}(theta_i)
    jac = np.ones(len(w))
    diag = np.ones((len(w), m))
    running = np.ones(len(w))
    for i in range(m):
        diag[:, i] = running**2
        if i < m - 1:
            jac *= sin[:, i] ** (m - 1 - i)
            running = running * sin[:, i]
    metric = np.zeros((len(w), m, m))
    idx = np.arange(m)
    metric[:, idx, idx] = diag
    return DomainGrid(
        kind="sphere",
        dim=m,
        resolution=res,
        coords=angles,
        weights=w * jac,
        metric=metric,
        points=_hyperspherical_embedding(angles),
        frame=_hyperspherical_frame(angles),
        params=(m,),
    )


def _torus_grid(periods, scale: float, res: int) -> DomainGrid:
    m = len(periods)
    if scale <= 0:
        raise GeometryError("torus scale must be positive")
    axes = [p * np.arange(res) / res for p in periods]
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([a.ravel() for a in mesh], axis=1)
    P = coords.shape[0]
    cell = np.prod([p / res for p in periods])
    weights = np.full(P, cell * scale ** (m / 2))
    metric = np.broadcast_to(scale * np.eye(m), (P, m, m)).copy()
    frame = np.broadcast_to(np.eye(m) / np.sqrt(scale), (P, m, m)).copy()
    return DomainGrid(
        kind="torus",
        dim=m,
        resolution=res,
        coords=coords,
        weights=weights,
        metric=metric,
        points=coords.copy(),
        frame=frame,
        params=(tuple(periods), scale),
    )


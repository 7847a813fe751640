"""Test functions u_j = sum_i phi_i(m_j) phi_i and their gradient fields.

For a degree-1 eigenbasis the gradients of the u_j are the conformal (non
Killing) vector fields of the round sphere.  The residual checks below use
finite differences only, so they measure the identities rather than assume
them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import (
    SpherePoint,
    TangentVec,
    make_grid,
    random_sphere_points,
    sphere_exp,
    tangent_frame,
    tangent_project,
)
from .spectral import Eigenbasis, Polynomial, XiKernel, xi_matrix

HESSIAN_STEP = 1e-4
RANK_THRESHOLD = 1e-6
DET_THRESHOLD = 1e-8
GRAM_THRESHOLD = 1e-8


class DegenerateConfiguration(RuntimeError):
    pass


@dataclass(frozen=True)
class TestFunction:
    """u(y) = scale * sum_i phi_i(m) phi_i(y) for a basepoint m."""

    __test__ = False  # keep pytest from collecting this class

    basis: Eigenbasis
    basepoint: SpherePoint
    scale: float = 1.0

    @property
    def weights(self) -> np.ndarray:
        return self.scale * self.basis.values(self.basepoint.ambient)[0]

    @property
    def eigenvalue(self) -> float:
        return self.basis.eigenvalue

    def values(self, points) -> np.ndarray:
        return self.polynomial(points)

    def gradients(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return tangent_project(pts, self.ambient_gradients(pts))

    @cached_property
    def polynomial(self) -> Polynomial:
        return Polynomial(self.basis.exponents, self.weights @ self.basis.coeffs)

    @cached_property
    def _gradient_polys(self):
        p = self.polynomial
        first = [p.derivative(d) for d in range(self.basis.sphere_dim + 1)]
        second = [[g.derivative(d) for d in range(len(first))] for g in first]
        return first, second

    def ambient_gradients(self, points) -> np.ndarray:
        """Euclidean gradient of the polynomial extension of u."""
        first, _ = self._gradient_polys
        return np.stack([g(points) for g in first], axis=-1)

    def ambient_hessians(self, points) -> np.ndarray:
        _, second = self._gradient_polys
        return np.stack([np.stack([h(points) for h in row], axis=-1) for row in second], axis=-2)

    def eval(self, y: SpherePoint) -> float:
        return float(self.values(y.ambient)[0])

    def grad(self, y: SpherePoint) -> TangentVec:
        return TangentVec(y, self.gradients(y.ambient)[0])

    def scaled(self, c: float) -> "TestFunction":
        return TestFunction(self.basis, self.basepoint, self.scale * c)


def fd_hessian(fn, y, step: float = HESSIAN_STEP, frame=None):
    """Hessian of a scalar function on S^n at ambient point y, in an orthonormal frame.

    Diagonal entries are second differences along geodesics; off-diagonal
    entries come from polarisation along the geodesics in directions
    E_a + E_b and E_a - E_b.  Returns (H, frame).
    """
    y = np.asarray(y, dtype=float)
    E = tangent_frame(y) if frame is None else np.asarray(frame)
    n = E.shape[0]
    f0 = fn(y[None, :])[0]

    def second(direction):
        pts = sphere_exp(np.stack([y, y]), np.stack([step * direction, -step * direction]))
        fp, fm = fn(pts)
        return (fp - 2.0 * f0 + fm) / step**2

    H = np.empty((n, n))
    for a in range(n):
        H[a, a] = second(E[a])
    for a in range(n):
        for b in range(a + 1, n):
            H[a, b] = H[b, a] = 0.25 * (second(E[a] + E[b]) - second(E[a] - E[b]))
    return H, E


def fd_laplacian(fn, y, step: float = HESSIAN_STEP) -> float:
    """Laplace-Beltrami (positive convention) by geodesic second differences."""
    y = np.asarray(y, dtype=float)
    E = tangent_frame(y)
    f0 = fn(y[None, :])[0]
    pts = sphere_exp(np.repeat(y[None], 2 * len(E), axis=0), np.concatenate([step * E, -step * E]))
    vals = fn(pts)
    return float(-(np.sum(vals) - 2.0 * len(E) * f0) / step**2)


def hessian_residual(u: TestFunction, y: SpherePoint, step: float = HESSIAN_STEP) -> float:
    """max |Hess(u)(y) + (lambda/n) u(y) Id| in an orthonormal frame."""
    H, E = fd_hessian(u.values, y.ambient, step)
    n = len(E)
    return float(np.max(np.abs(H + u.eigenvalue / n * u.eval(y) * np.eye(n))))


def conformality_residual(
    u: TestFunction,
    y: SpherePoint,
    seed: int = 0,
    X: np.ndarray | None = None,
    Y: np.ndarray | None = None,
    step: float = HESSIAN_STEP,
) -> float:
    """|(L_Z h)(X, Y)| = |2 Hess(u)(X, Y)| for Z = grad u.

    X and Y default to a random orthonormal pair at y drawn from ``seed``.
    """
    if X is None or Y is None:
        rng = np.random.default_rng(seed)
        E = tangent_frame(y.ambient)
        q, _ = np.linalg.qr(rng.standard_normal((len(E), 2)))
        X, Y = q[:, 0] @ E, q[:, 1] @ E
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    # polarisation also covers X = Y: Hess(2X, 2X) / 4
    H, _ = fd_hessian(u.values, y.ambient, step, frame=np.stack([X, Y]))
    return float(abs(2.0 * H[0, 1]))


def basepoint_rank_ok(basis: Eigenbasis, points, threshold: float = RANK_THRESHOLD) -> bool:
    """True when (phi_i(m_j)) has full column rank len(points)."""
    pts = np.array([p.ambient if isinstance(p, SpherePoint) else p for p in points])
    sv = np.linalg.svd(basis.values(pts), compute_uv=False)
    return bool(len(sv) == len(pts) and sv[-1] > threshold)


def choose_basepoints(basis: Eigenbasis, seed: int = 0, tries: int = 100) -> list[SpherePoint]:
    n = basis.sphere_dim
    if basis.size < n + 1:
        raise DegenerateConfiguration("eigenspace too small for n+1 basepoints")
    rng = np.random.default_rng(seed)
    kernel = XiKernel(basis)
    for _ in range(tries):
        pts = random_sphere_points(n, n + 1, rng)
        if not basepoint_rank_ok(basis, pts):
            continue
        if np.linalg.det(xi_matrix(kernel, pts)) > DET_THRESHOLD:
            return [SpherePoint(p / np.linalg.norm(p)) for p in pts]
    raise DegenerateConfiguration("degenerate basepoint configuration")


@dataclass(frozen=True)
class FieldFamily:
    basis: Eigenbasis
    points: tuple
    functions: tuple
    gram: np.ndarray
    resolution: int

    @property
    def kernel_matrix(self) -> np.ndarray:
        return xi_matrix(XiKernel(self.basis), self.points)


def gradient_gram(functions, grid) -> np.ndarray:
    grads = np.stack([u.gradients(grid.points) for u in functions])
    inner = np.einsum("jpd,kpd->jkp", grads, grads)
    return inner @ grid.weights


def build_family(basis: Eigenbasis, points, resolution: int = 64) -> FieldFamily:
    """Test functions at ``points`` with the quadrature Gram matrix of their gradients."""
    functions = tuple(TestFunction(basis, p) for p in points)
    grid = make_grid(("sphere", basis.sphere_dim), resolution)
    gram = gradient_gram(functions, grid)
    gram = 0.5 * (gram + gram.T)
    if np.linalg.eigvalsh(gram)[0] <= GRAM_THRESHOLD:
        raise DegenerateConfiguration("gradient Gram matrix is not positive definite")
    return FieldFamily(basis, tuple(points), functions, gram, resolution)

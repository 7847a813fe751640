"""Spherical-harmonic eigenbases of S^n and the kernels built from them.

A degree-k eigenspace of the Laplace-Beltrami operator (Delta = -div grad)
on S^n is represented by homogeneous harmonic polynomials of degree k in
n+1 variables, stored as a coefficient matrix over an explicit monomial
list.  Orthonormality is taken in L^2(S^n) using exact monomial moments.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import null_space
from scipy.special import eval_gegenbauer, gammaln

from .geometry import (
    GeometryError,
    SpherePoint,
    geodesic_distance,
    random_sphere_points,
    sphere_volume,
    tangent_project,
)

MAX_DEGREE = 3
MAX_SPHERE_DIM = 4


class UnsupportedBasis(ValueError):
    pass


def eigenvalue(n: int, k: int) -> float:
    return float(k * (k + n - 1))


def multiplicity(n: int, k: int) -> int:
    if k == 0:
        return 1
    return math.comb(n + k, n) - math.comb(n + k - 2, n)


@lru_cache(maxsize=None)
def monomial_exponents(nvars: int, degree: int) -> np.ndarray:
    """All exponent vectors of total ``degree`` in ``nvars`` variables, lexicographic."""
    if degree < 0:
        return np.zeros((0, nvars), dtype=int)
    exps = [
        e
        for e in itertools.product(range(degree, -1, -1), repeat=nvars)
        if sum(e) == degree
    ]
    return np.array(exps, dtype=int).reshape(-1, nvars)


def monomial_integral(alpha) -> float:
    """Exact integral of x^alpha over the unit sphere S^{len(alpha)-1}."""
    alpha = np.asarray(alpha)
    if np.any(alpha % 2):
        return 0.0
    beta = (alpha + 1) / 2.0
    return float(2.0 * np.exp(np.sum(gammaln(beta)) - gammaln(np.sum(beta))))


def _laplacian_matrix(nvars: int, k: int) -> np.ndarray:
    src = monomial_exponents(nvars, k)
    dst = monomial_exponents(nvars, k - 2)
    index = {tuple(e): i for i, e in enumerate(dst)}
    L = np.zeros((len(dst), len(src)))
    for j, a in enumerate(src):
        for d in range(nvars):
            if a[d] >= 2:
                b = a.copy()
                b[d] -= 2
                L[index[tuple(b)], j] += a[d] * (a[d] - 1)
    return L


def _moment_matrix(exps: np.ndarray) -> np.ndarray:
    M = len(exps)
    G = np.empty((M, M))
    for a in range(M):
        for b in range(a, M):
            G[a, b] = G[b, a] = monomial_integral(exps[a] + exps[b])
    return G


def _monomials(points: np.ndarray, exps: np.ndarray) -> np.ndarray:
    P, nv = points.shape
    top = int(exps.max(initial=0))
    out = np.ones((P, len(exps)))
    for d in range(nv):
        col = exps[:, d]
        if not col.any():
            continue
        x = points[:, d]
        powers = [np.ones_like(x), x]
        for _ in range(2, top + 1):
            powers.append(powers[-1] * x)
        for e in np.unique(col):
            if e:
                out[:, col == e] *= powers[e][:, None]
    return out


def _monomial_gradients(points: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """(P, M, nvars) ambient gradients of every monomial."""
    P, nv = points.shape
    out = np.empty((P, len(exps), nv))
    for d in range(nv):
        lowered = exps.copy()
        lowered[:, d] = np.maximum(lowered[:, d] - 1, 0)
        out[:, :, d] = exps[None, :, d] * _monomials(points, lowered)
    return out


def _monomial_hessians(points: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """(P, M, nvars, nvars) ambient Hessians of every monomial."""
    P, nv = points.shape
    out = np.empty((P, len(exps), nv, nv))
    for a in range(nv):
        for b in range(a, nv):
            lowered = exps.copy()
            if a == b:
                factor = exps[:, a] * (exps[:, a] - 1)
                lowered[:, a] = np.maximum(lowered[:, a] - 2, 0)
            else:
                factor = exps[:, a] * exps[:, b]
                lowered[:, a] = np.maximum(lowered[:, a] - 1, 0)
                lowered[:, b] = np.maximum(lowered[:, b] - 1, 0)
            out[:, :, a, b] = out[:, :, b, a] = factor[None, :] * _monomials(points, lowered)
    return out


@dataclass(frozen=True)
class Polynomial:
    """sum_m coef[m] x^exps[m] in n+1 ambient variables."""

    exps: np.ndarray
    coef: np.ndarray

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not len(self.coef):
            return np.zeros(len(pts))
        return _monomials(pts, self.exps) @ self.coef

    def derivative(self, d: int) -> "Polynomial":
        keep = (self.exps[:, d] > 0) & (self.coef != 0)
        exps = self.exps[keep].copy()
        coef = self.coef[keep] * exps[:, d]
        exps[:, d] -= 1
        return Polynomial(exps, coef)


@dataclass(frozen=True)
class Eigenbasis:
    """L^2-orthonormal basis of the degree-k spherical harmonics on S^n."""

    sphere_dim: int
    degree: int
    eigenvalue: float
    size: int
    exponents: np.ndarray
    coeffs: np.ndarray

    @property
    def volume(self) -> float:
        return sphere_volume(self.sphere_dim)

    def values(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return _monomials(pts, self.exponents) @ self.coeffs.T

    def gradients(self, points) -> np.ndarray:
        """Spherical gradients, shape (P, N, n+1)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return tangent_project(pts[:, None, :], self.ambient_gradients(pts))

    def ambient_gradients(self, points) -> np.ndarray:
        """Euclidean gradients of the polynomial extensions, (P, N, n+1)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.einsum("pmd,im->pid", _monomial_gradients(pts, self.exponents), self.coeffs)

    def ambient_hessians(self, points) -> np.ndarray:
        """Euclidean Hessians of the polynomial extensions, (P, N, n+1, n+1)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.einsum("pmab,im->piab", _monomial_hessians(pts, self.exponents), self.coeffs)

    def evaluate(self, i: int, y: SpherePoint) -> float:
        if y.dim != self.sphere_dim:
            raise GeometryError("point lives on a sphere of the wrong dimension")
        return float(self.values(y.ambient)[0, i])


def make_eigenbasis(n: int, k: int) -> Eigenbasis:
    if n < 2 or k < 1:
        raise UnsupportedBasis("need n >= 2 and k >= 1")
    if k > MAX_DEGREE or n > MAX_SPHERE_DIM:
        raise UnsupportedBasis(f"unsupported degree/dimension (n={n}, k={k})")
    nv = n + 1
    exps = monomial_exponents(nv, k)
    if k < 2:
        harmonic = np.eye(len(exps))
    else:
        harmonic = null_space(_laplacian_matrix(nv, k))
    G = _moment_matrix(exps)

    # modified Gram-Schmidt in the L^2(S^n) inner product
    cols = [harmonic[:, j].copy() for j in range(harmonic.shape[1])]
    basis = []
    for v in cols:
        for q in basis:
            v = v - (q @ G @ v) * q
        norm = math.sqrt(v @ G @ v)
        basis.append(v / norm)
    coeffs = np.array(basis)
    N = multiplicity(n, k)
    if coeffs.shape[0] != N:
        raise UnsupportedBasis(f"harmonic space has dimension {coeffs.shape[0]}, expected {N}")
    return Eigenbasis(
        sphere_dim=n,
        degree=k,
        eigenvalue=eigenvalue(n, k),
        size=N,
        exponents=exps,
        coeffs=coeffs,
    )


def xi_closed_form(n: int, k: int, rho):
    """Addition-theorem kernel (N/Vol) C_k^nu(cos rho) / C_k^nu(1), nu = (n-1)/2."""
    nu = (n - 1) / 2.0
    scale = multiplicity(n, k) / sphere_volume(n)
    if k == 0:
        return scale * np.ones_like(np.asarray(rho, dtype=float))
    if k == 1:
        return scale * np.cos(rho)
    return scale * eval_gegenbauer(k, nu, np.cos(rho)) / eval_gegenbauer(k, nu, 1.0)


@dataclass(frozen=True)
class XiKernel:
    """Xi(rho) with sum_i phi_i(x) phi_i(y) = Xi(rho(x, y))."""

    basis: Eigenbasis

    def eval(self, rho):
        return xi_closed_form(self.basis.sphere_dim, self.basis.degree, rho)

    __call__ = eval

    def between(self, x, y):
        """Xi evaluated on the distance between rows of x and y (ambient arrays)."""
        c = np.clip(np.einsum("...i,...i->...", x, y), -1.0, 1.0)
        return self.eval(np.arccos(c))


def basis_sum(basis: Eigenbasis, x, y) -> np.ndarray:
    return np.sum(basis.values(x) * basis.values(y), axis=-1)


def make_xi(basis: Eigenbasis, checks: int = 16, seed: int = 0) -> XiKernel:
    kernel = XiKernel(basis)
    rng = np.random.default_rng(seed)
    x = random_sphere_points(basis.sphere_dim, checks, rng)
    y = random_sphere_points(basis.sphere_dim, checks, rng)
    # closed form and basis sum must describe the same kernel
    dev = np.max(np.abs(kernel.between(x, y) - basis_sum(basis, x, y)))
    if dev > 1e-10:
        raise UnsupportedBasis(f"kernel disagrees with basis sum (deviation {dev:.3e})")
    return kernel


def xi_second_derivative_check(kernel: XiKernel, step: float = 1e-4) -> float:
    """|Xi''(0) + (lambda/n) Xi(0)| with Xi'' from a central difference at 0."""
    x0 = kernel.eval(0.0)
    # Xi is even in rho, so Xi(-h) = Xi(h)
    d2 = 2.0 * (kernel.eval(step) - x0) / step**2
    lam = kernel.basis.eigenvalue
    n = kernel.basis.sphere_dim
    return float(abs(d2 + lam / n * x0))


def heat_kernel_partial(x: SpherePoint, y: SpherePoint, t: float, k_max: int = 8) -> float:
    if t <= 0:
        raise ValueError("heat kernel needs t > 0")
    n = x.dim
    rho = geodesic_distance(x, y)
    total = 1.0 / sphere_volume(n)
    for k in range(1, k_max + 1):
        total += math.exp(-eigenvalue(n, k) * t) * float(xi_closed_form(n, k, rho))
    return total


def heat_kernel_array(x, ys, t: float, k_max: int = 8) -> np.ndarray:
    """Vectorised heat kernel from a fixed ambient point x to rows of ys."""
    if t <= 0:
        raise ValueError("heat kernel needs t > 0")
    ys = np.atleast_2d(ys)
    n = ys.shape[1] - 1
    rho = np.arccos(np.clip(ys @ np.asarray(x), -1.0, 1.0))
    total = np.full(len(ys), 1.0 / sphere_volume(n))
    for k in range(1, k_max + 1):
        total += math.exp(-eigenvalue(n, k) * t) * xi_closed_form(n, k, rho)
    return total


def xi_matrix(kernel: XiKernel, points) -> np.ndarray:
    pts = np.array([p.ambient if isinstance(p, SpherePoint) else p for p in points])
    return kernel.between(pts[:, None, :], pts[None, :, :])


def gram_det_check(points, basis: Eigenbasis) -> tuple[float, float]:
    """det(Xi(rho(m_j, m_k))) against (1/p!) sum of squared p x p minors.

    The right-hand side is a brute-force sum over all p-tuples of basis
    indices, O(N^p), and never goes through the kernel.
    """
    pts = np.array([p.ambient for p in points])
    p = len(pts)
    lhs = float(np.linalg.det(xi_matrix(XiKernel(basis), pts)))
    phi = basis.values(pts).T  # (N, p): phi_i(m_j)
    total = 0.0
    for rows in itertools.product(range(basis.size), repeat=p):
        total += np.linalg.det(phi[list(rows), :]) ** 2
    rhs = total / math.factorial(p)
    return lhs, float(rhs)


def embedding_norm_sq(basis: Eigenbasis, y) -> np.ndarray:
    """|Lambda(y)|^2 = sum_i phi_i(y)^2 for the eigenfunction map Lambda."""
    return np.sum(basis.values(y) ** 2, axis=-1)

"""Second variation of energy and volume along the conformal test fields.

Q_f(w1, w2) = int <nabla w1, nabla w2> - sum_a <R(df e_a, w1) w2, df e_a>
H_f(w)      = int |nabla^perp w|^2 - |sigma(w)|^2 - sum_a <R(df e_a, w) w, df e_a>

Covariant derivatives of fields along f are central differences along
domain geodesics, with the shifted values carried back to f(x) by parallel
transport in the target sphere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .conformal import FieldFamily, TestFunction
from .geometry import TangentVec, curvature_polarized, sphere_transport, tangent_project
from .maps import (
    NotAnImmersion,
    ZooMap,
    energy_density,
    image_basis,
    normal_part,
    second_fundamental_tensor,
    sigma_norm_sq,
    stress_energy,
)

FIELD_STEP = 1e-4
SPAN_THRESHOLD = 1e-8
NEGATIVE_RELATIVE = 1e-8
NORMAL_TOLERANCE = 1e-8
TOTALLY_GEODESIC_TOL = 1e-6


class HypothesisError(ValueError):
    pass


@dataclass(frozen=True)
class VariationField:
    """A section of f^{-1} T S^n, evaluable at any domain point.

    ``fn(points, frames)`` returns ambient vectors tangent at f(points).
    """

    map: ZooMap
    fn: Callable

    @cached_property
    def at_nodes(self) -> np.ndarray:
        return self.fn(self.map.grid.points, self.map.grid.frame)

    def at_node(self, node: int) -> TangentVec:
        base = self.map.value_at(node)
        return TangentVec(base, tangent_project(base.ambient, self.at_nodes[node]))

    def combine(self, a: float, other: "VariationField", b: float) -> "VariationField":
        return VariationField(self.map, lambda x, e: a * self.fn(x, e) + b * other.fn(x, e))


def restrict_field(u: TestFunction, f: ZooMap) -> VariationField:
    """w = -grad u composed with f."""
    if u.basis.sphere_dim != f.target_dim:
        raise ValueError("test function and map target live on different spheres")
    return VariationField(f, lambda x, e: -u.gradients(f.value_fn(x)))


def normal_projection(f: ZooMap, w: VariationField) -> VariationField:
    def fn(x, e):
        return normal_part(f.value_fn(x), f.push_fn(x, e), w.fn(x, e))

    # fail early on a rank-deficient differential
    normal_part(f.values, f.differential, w.at_nodes)
    return VariationField(f, fn)


def field_jet(f: ZooMap, w: VariationField, step: float = FIELD_STEP):
    """(w, nabla_{e_a} w) at every node; the derivative has shape (P, m, n+1)."""
    grid = f.grid
    pts, frames = grid.points, grid.frame
    F0 = f.values
    W0 = w.at_nodes
    D = np.empty(frames.shape[:2] + (F0.shape[-1],))
    for a in range(f.domain_dim):
        direction = frames[:, a, :]
        xp, ep = grid.shift(pts, frames, direction, step)
        xm, em = grid.shift(pts, frames, direction, -step)
        tp = sphere_transport(f.value_fn(xp), F0, w.fn(xp, ep))
        tm = sphere_transport(f.value_fn(xm), F0, w.fn(xm, em))
        D[:, a, :] = (tp - tm) / (2.0 * step)
    return W0, tangent_project(F0[:, None, :], D)


def _q_integrand(f: ZooMap, jet1, jet2, kappa: float) -> np.ndarray:
    (w1, d1), (w2, d2) = jet1, jet2
    grad = np.einsum("pad,pad->p", d1, d2)
    curv = curvature_polarized(f.differential, w1[:, None, :], w2[:, None, :], kappa).sum(axis=1)
    return grad - curv


def _require_harmonic(f: ZooMap):
    if not f.harmonic:
        raise HypothesisError("Q_f defined for harmonic maps")


def q_form(f: ZooMap, w1: VariationField, w2: VariationField, kappa: float = 1.0,
           step: float = FIELD_STEP) -> float:
    _require_harmonic(f)
    j1 = field_jet(f, w1, step)
    j2 = j1 if w2 is w1 else field_jet(f, w2, step)
    return f.grid.integrate(_q_integrand(f, j1, j2, kappa))


def q_matrix(f: ZooMap, fields, kappa: float = 1.0, step: float = FIELD_STEP) -> np.ndarray:
    _require_harmonic(f)
    jets = [field_jet(f, w, step) for w in fields]
    k = len(jets)
    Q = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            Q[i, j] = f.grid.integrate(_q_integrand(f, jets[i], jets[j], kappa))
    return Q


def l2_gram(f: ZooMap, fields) -> np.ndarray:
    vals = np.stack([w.at_nodes for w in fields])
    return np.einsum("jpd,kpd->jkp", vals, vals) @ f.grid.weights


def _normal_jet(f: ZooMap, w: VariationField, step: float):
    w0, D = field_jet(f, w, step)
    Dn = normal_part(f.values[:, None, :], f.differential[:, None, :, :], D, require_immersion=False)
    return w0, Dn


def _h_integrand(f: ZooMap, jet1, jet2, II, kappa: float) -> np.ndarray:
    (w1, d1), (w2, d2) = jet1, jet2
    grad = np.einsum("pad,pad->p", d1, d2)
    s1 = np.einsum("pabd,pd->pab", II, w1)
    s2 = np.einsum("pabd,pd->pab", II, w2)
    sigma = np.einsum("pab,pab->p", s1, s2)
    curv = curvature_polarized(f.differential, w1[:, None, :], w2[:, None, :], kappa).sum(axis=1)
    return grad - sigma - curv


def _check_normal(f: ZooMap, w: VariationField):
    dots = np.einsum("pad,pd->pa", f.differential, w.at_nodes)
    if np.max(np.abs(dots), initial=0.0) > NORMAL_TOLERANCE:
        raise HypothesisError("H_f needs a normal variation field")


def h_form(f: ZooMap, w: VariationField, kappa: float = 1.0, step: float = FIELD_STEP,
           II: np.ndarray | None = None) -> float:
    if not f.minimal_immersion:
        raise HypothesisError("H_f defined for minimal immersions")
    _check_normal(f, w)
    if II is None:
        II = second_fundamental_tensor(f)
    jet = _normal_jet(f, w, step)
    return f.grid.integrate(_h_integrand(f, jet, jet, II, kappa))


def h_matrix(f: ZooMap, fields, kappa: float = 1.0, step: float = FIELD_STEP,
             II: np.ndarray | None = None) -> np.ndarray:
    if II is None:
        II = second_fundamental_tensor(f)
    jets = [_normal_jet(f, w, step) for w in fields]
    k = len(jets)
    H = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            H[i, j] = f.grid.integrate(_h_integrand(f, jets[i], jets[j], II, kappa))
    return H


def conformal_volume_estimate(f: ZooMap, w_normal: VariationField, lam: float,
                              kappa: float = 1.0, II: np.ndarray | None = None) -> float:
    """int 2 e(f)(lambda/n^2 - kappa/2)|w|^2 - int |sigma(w)|^2 for a normal field w.

    This is the closed expression one gets for H_f by substituting the
    energy identity for |nabla w|^2; it is reported next to the direct
    quadrature, not used in place of it.
    """
    if II is None:
        II = second_fundamental_tensor(f)
    n = f.target_dim
    w = w_normal.at_nodes
    e = energy_density(f)
    integrand = 2.0 * e * (lam / n**2 - kappa / 2.0) * np.sum(w * w, axis=-1) - sigma_norm_sq(II, w)
    return f.grid.integrate(integrand)


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class IndexCertificate:
    kind: str
    map_name: str
    q_matrix: np.ndarray
    gram: np.ndarray
    hypotheses: dict
    eigenvalues: np.ndarray
    negative_count: int
    certified_bound: int
    span_dim: int
    thresholds: dict
    resolution: int
    seed: int | None = None
    reasons: tuple = ()
    extras: dict = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return not self.reasons

    def to_record(self) -> dict:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer, np.bool_)):
                return v.item()
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v

        return clean({
            "kind": self.kind,
            "map": self.map_name,
            "hypotheses": self.hypotheses,
            "accepted": self.accepted,
            "reasons": list(self.reasons),
            "eigenvalues": np.sort(self.eigenvalues),
            "negative_count": self.negative_count,
            "certified_bound": self.certified_bound,
            "span_dim": self.span_dim,
            "thresholds": self.thresholds,
            "resolution": self.resolution,
            "seed": self.seed,
            "q_matrix": self.q_matrix,
            "gram": self.gram,
            "extras": self.extras,
        })


def _restricted_spectrum(Q: np.ndarray, gram: np.ndarray):
    """Eigenvalues of the form Q on the span of fields with L^2 Gram matrix ``gram``."""
    gev, gvec = np.linalg.eigh(0.5 * (gram + gram.T))
    V = gvec[:, gev > SPAN_THRESHOLD]
    Qs = V.T @ (0.5 * (Q + Q.T)) @ V
    ev = np.linalg.eigvalsh(Qs) if V.shape[1] else np.zeros(0)
    scale = float(np.max(np.abs(ev))) if ev.size else 0.0
    negative = int(np.sum(ev < -NEGATIVE_RELATIVE * scale)) if scale > 0 else 0
    return V.shape[1], ev, negative


def _thresholds() -> dict:
    return {
        "span": SPAN_THRESHOLD,
        "negative_relative": NEGATIVE_RELATIVE,
        "field_step": FIELD_STEP,
        "normal_tolerance": NORMAL_TOLERANCE,
    }


def certify_energy_index(f: ZooMap, family: FieldFamily, kappa: float = 1.0,
                         seed: int | None = None, step: float = FIELD_STEP) -> IndexCertificate:
    """Energy-index certificate for a harmonic map with the n+1 gradient test fields.

    Hypotheses failing never raise: the certificate comes back declined
    with ``certified_bound = 0`` and the reasons listed.
    """
    _require_harmonic(f)
    n = f.target_dim
    lam = family.basis.eigenvalue
    fields = [restrict_field(u, f) for u in family.functions]
    Q = q_matrix(f, fields, kappa, step)
    gram = l2_gram(f, fields)
    span_dim, ev, negative = _restricted_spectrum(Q, gram)

    stress = stress_energy(f)
    e = energy_density(f)
    hyp = {
        "kappa": kappa,
        "lambda": lam,
        "lambda_bound_ok": bool(lam <= n * n * kappa / 2.0),
        "stress_positive": stress.positive_definite,
        "stress_min": stress.global_min,
        "totally_geodesic": f.totally_geodesic,
        "target_dim_ok": n >= 3,
        "nonconstant": bool(f.grid.integrate(e) > 1e-12),
        "degree_one": family.basis.degree == 1,
    }
    reasons = []
    if not hyp["lambda_bound_ok"]:
        reasons.append("eigenvalue exceeds n^2 kappa / 2")
    if not hyp["stress_positive"]:
        reasons.append("stress-energy tensor not positive definite")
    if not hyp["target_dim_ok"]:
        reasons.append("target dimension below 3")
    if not hyp["nonconstant"]:
        reasons.append("constant map")
    if not hyp["degree_one"]:
        reasons.append("Hessian identity only holds for first eigenfunctions")

    # upper bound for each diagonal entry from the stress/energy estimate
    s0 = stress.s_min
    slacks = []
    for j, w in enumerate(fields):
        g2 = np.sum(w.at_nodes**2, axis=-1)
        rhs = f.grid.integrate(e * (2.0 * lam / n**2 - kappa) * g2) - kappa * f.grid.integrate(s0 * g2)
        slacks.append(rhs - Q[j, j])

    return IndexCertificate(
        kind="energy",
        map_name=f.name,
        q_matrix=Q,
        gram=gram,
        hypotheses=hyp,
        eigenvalues=ev,
        negative_count=negative,
        certified_bound=0 if reasons else negative,
        span_dim=span_dim,
        thresholds=_thresholds(),
        resolution=f.grid.resolution,
        seed=seed,
        reasons=tuple(reasons),
        extras={
            "inequality_slack": np.array(slacks),
            "symmetry_defect": float(np.max(np.abs(Q - Q.T))),
        },
    )


def certify_volume_index(f: ZooMap, family: FieldFamily, kappa: float = 1.0,
                         seed: int | None = None, step: float = FIELD_STEP) -> IndexCertificate:
    n = f.target_dim
    lam = family.basis.eigenvalue
    hyp = {
        "kappa": kappa,
        "lambda": lam,
        "lambda_bound_ok": bool(lam <= n * n * kappa / 2.0),
        "stress_positive": None,
        "totally_geodesic": f.totally_geodesic,
        "minimal_immersion": f.minimal_immersion,
        "isometric": f.isometric,
        "target_dim_ok": n >= 3,
        "degree_one": family.basis.degree == 1,
    }
    _, rank = image_basis(f.differential)
    if np.any(rank < f.domain_dim):
        return IndexCertificate(
            kind="volume", map_name=f.name, q_matrix=np.zeros((0, 0)), gram=np.zeros((0, 0)),
            hypotheses=hyp, eigenvalues=np.zeros(0), negative_count=0, certified_bound=0,
            span_dim=0, thresholds=_thresholds(), resolution=f.grid.resolution, seed=seed,
            reasons=("not an immersion",),
        )

    II = second_fundamental_tensor(f)
    ii_max = float(np.max(np.linalg.norm(II, axis=-1)))
    hyp["second_form_max"] = ii_max
    hyp["totally_geodesic"] = bool(f.totally_geodesic or ii_max < TOTALLY_GEODESIC_TOL)

    fields = [normal_projection(f, restrict_field(u, f)) for u in family.functions]
    gram = l2_gram(f, fields)
    H = h_matrix(f, fields, kappa, step, II)
    span_dim, ev, negative = _restricted_spectrum(H, gram)

    reasons = []
    if not f.minimal_immersion:
        reasons.append("not flagged as a minimal immersion")
    if not f.isometric:
        reasons.append("not isometric")
    if hyp["totally_geodesic"]:
        reasons.append("totally geodesic immersion is excluded")
    if not hyp["lambda_bound_ok"]:
        reasons.append("eigenvalue exceeds n^2 kappa / 2")
    if not hyp["target_dim_ok"]:
        reasons.append("target dimension below 3")
    if not hyp["degree_one"]:
        reasons.append("Hessian identity only holds for first eigenfunctions")

    estimates = np.array([conformal_volume_estimate(f, w, lam, kappa, II) for w in fields])
    return IndexCertificate(
        kind="volume",
        map_name=f.name,
        q_matrix=H,
        gram=gram,
        hypotheses=hyp,
        eigenvalues=ev,
        negative_count=negative,
        certified_bound=0 if reasons else min(negative, span_dim),
        span_dim=span_dim,
        thresholds=_thresholds(),
        resolution=f.grid.resolution,
        seed=seed,
        reasons=tuple(reasons),
        extras={
            "conformal_estimate": estimates,
            "symmetry_defect": float(np.max(np.abs(H - H.T))),
        },
    )

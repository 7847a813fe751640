"""Verification suites behind the command line.

Each suite returns a flat report dictionary whose ``checks`` entry maps a
check name to ``{"value", "tolerance", "verdict"}``.  Verdicts are PASS,
FAIL or XFAIL (a documented expected failure).
"""

from __future__ import annotations

import math

import numpy as np

from .conformal import (
    TestFunction,
    build_family,
    choose_basepoints,
    conformality_residual,
    fd_laplacian,
    hessian_residual,
)
from .flow import base_value, energy_series, u_series, volume_series
from .geometry import (
    TOL_ALGEBRAIC,
    TOL_FINITE_DIFF,
    TOL_QUADRATURE,
    SpherePoint,
    make_grid,
    random_sphere_points,
    sphere_volume,
)
from .maps import make_zoo_map
from .spectral import basis_sum, gram_det_check, make_eigenbasis, make_xi, xi_second_derivative_check
from .variation import certify_energy_index, certify_volume_index

TOLERANCES = {
    "algebraic": TOL_ALGEBRAIC,
    "quadrature": TOL_QUADRATURE,
    "finite_difference": TOL_FINITE_DIFF,
}

BRUTE_FORCE_LIMIT = 20000


def _check(value, tolerance, ok, expected_failure=False) -> dict:
    if expected_failure:
        verdict = "XFAIL" if not ok else "XPASS"
    else:
        verdict = "PASS" if ok else "FAIL"
    return {"value": value, "tolerance": tolerance, "verdict": verdict}


def suite_passed(report: dict) -> bool:
    return all(c["verdict"] in ("PASS", "XFAIL") for c in report["checks"].values())


def identity_suite(n: int, degree: int, seed: int, resolution: int,
                   points: int = 200, hessian_xfail: bool = False) -> dict:
    """Spectral and conformal identities for the degree-``degree`` eigenspace of S^n."""
    rng = np.random.default_rng(seed)
    basis = make_eigenbasis(n, degree)
    kernel = make_xi(basis)
    checks = {}

    grid = make_grid(("sphere", n), resolution)
    vol_err = abs(grid.volume - sphere_volume(n))
    checks["sphere_volume"] = _check(vol_err, TOL_QUADRATURE, vol_err <= TOL_QUADRATURE)

    x = random_sphere_points(n, 1000, rng)
    y = random_sphere_points(n, 1000, rng)
    dev = float(np.max(np.abs(kernel.between(x, y) - basis_sum(basis, x, y))))
    checks["strong_harmonicity"] = _check(dev, TOL_ALGEBRAIC, dev <= TOL_ALGEBRAIC)

    worst = 0.0
    for p in range(1, 5):
        if basis.size**p > BRUTE_FORCE_LIMIT:
            break
        pts = [SpherePoint(v) for v in random_sphere_points(n, p, rng)]
        lhs, rhs = gram_det_check(pts, basis)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    checks["gram_determinant"] = _check(worst, 1e-9, worst <= 1e-9)

    r = xi_second_derivative_check(kernel)
    checks["xi_second_derivative"] = _check(r, TOL_FINITE_DIFF, r <= TOL_FINITE_DIFF)

    family = build_family(basis, choose_basepoints(basis, seed), resolution)
    lam = basis.eigenvalue
    gram_dev = float(np.max(np.abs(family.gram - lam * family.kernel_matrix)))
    checks["gradient_gram"] = _check(gram_dev, TOL_QUADRATURE, gram_dev <= TOL_QUADRATURE)

    samples = random_sphere_points(n, points, rng)
    hess, conf, lap = 0.0, 0.0, 0.0
    for i, yv in enumerate(samples):
        yp = SpherePoint(yv / np.linalg.norm(yv))
        u = family.functions[i % len(family.functions)]
        hess = max(hess, hessian_residual(u, yp))
        conf = max(conf, conformality_residual(u, yp, seed=seed + i))
        scale = max(1.0, float(np.max(np.abs(u.values(samples)))))
        lap = max(lap, abs(fd_laplacian(u.values, yv) - lam * u.eval(yp)) / scale)
    checks["eigenfunction_laplacian"] = _check(lap, 1e-5, lap <= 1e-5)
    checks["hessian_identity"] = _check(hess, TOL_FINITE_DIFF, hess <= TOL_FINITE_DIFF,
                                        expected_failure=hessian_xfail)
    checks["conformality"] = _check(conf, TOL_FINITE_DIFF, conf <= TOL_FINITE_DIFF,
                                    expected_failure=hessian_xfail)
    return {
        "suite": "identities",
        "sphere": n,
        "degree": degree,
        "eigenvalue": lam,
        "multiplicity": basis.size,
        "xi_at_zero": float(kernel.eval(0.0)),
        "checks": checks,
    }


def _family_for(target_dim: int, degree: int, seed: int, resolution: int):
    basis = make_eigenbasis(target_dim, degree)
    return build_family(basis, choose_basepoints(basis, seed), resolution)


def energy_suite(map_tag: str, degree: int, seed: int, resolution: int, kappa: float = 1.0) -> dict:
    f = make_zoo_map(map_tag, resolution)
    family = _family_for(f.target_dim, degree, seed, resolution)
    cert = certify_energy_index(f, family, kappa, seed=seed)
    checks = {
        "symmetric": _check(cert.extras["symmetry_defect"], TOL_ALGEBRAIC,
                            cert.extras["symmetry_defect"] <= TOL_ALGEBRAIC),
    }
    if cert.accepted:
        slack = float(np.min(cert.extras["inequality_slack"]))
        checks["stress_energy_bound"] = _check(slack, -TOL_FINITE_DIFF, slack >= -TOL_FINITE_DIFF)
        checks["bound_fills_span"] = _check(cert.certified_bound, cert.span_dim,
                                            cert.certified_bound == cert.span_dim)
    report = {"suite": "certify-energy", "certificate": cert.to_record(), "checks": checks}
    return report


def volume_suite(map_tag: str, degree: int, seed: int, resolution: int, kappa: float = 1.0) -> dict:
    f = make_zoo_map(map_tag, resolution)
    family = _family_for(f.target_dim, degree, seed, resolution)
    cert = certify_volume_index(f, family, kappa, seed=seed)
    checks = {}
    if cert.span_dim:
        checks["symmetric"] = _check(cert.extras["symmetry_defect"], TOL_ALGEBRAIC,
                                     cert.extras["symmetry_defect"] <= TOL_ALGEBRAIC)
    if cert.accepted:
        checks["bound_fills_span"] = _check(cert.certified_bound, cert.span_dim,
                                            cert.certified_bound == cert.span_dim)
    return {"suite": "certify-volume", "certificate": cert.to_record(), "checks": checks}


def flow_suite(map_tag: str, degree: int, seed: int, resolution: int, t_max: float,
               samples: int = 21) -> tuple[dict, dict]:
    """Returns (report, {name: FlowSeries})."""
    f = make_zoo_map(map_tag, resolution)
    basis = make_eigenbasis(f.target_dim, degree)
    u = TestFunction(basis, choose_basepoints(basis, seed)[0])
    series = {}
    if f.minimal_immersion and f.isometric:
        series["volume"] = volume_series(f, u, t_max, samples)
    if f.harmonic:
        series["energy"] = energy_series(f, u, t_max, samples)
    series["u_along_flow"] = u_series(f, u, t_max, samples)
    checks = {}
    for kind, s in series.items():
        checks[f"{kind}_monotone"] = _check(s.worst, s.tolerance, s.verdict)
        if kind in ("energy", "volume"):
            dev = abs(s.values[0] - base_value(f, kind))
            checks[f"{kind}_initial_value"] = _check(dev, TOL_ALGEBRAIC, dev <= TOL_ALGEBRAIC * max(1.0, abs(s.values[0])))
    report = {
        "suite": "flow-decay",
        "map": f.name,
        "t_max": t_max,
        "samples": samples,
        "basepoint": u.basepoint.ambient.tolist(),
        "series": {k: {"times": s.times.tolist(), "values": s.values.tolist()} for k, s in series.items()},
        "checks": checks,
    }
    return report, series


def is_finite_report(report) -> bool:
    """Guard against NaN leaking into a report."""
    def walk(v):
        if isinstance(v, float):
            return math.isfinite(v)
        if isinstance(v, dict):
            return all(walk(x) for x in v.values())
        if isinstance(v, list):
            return all(walk(x) for x in v)
        return True

    return walk(report)

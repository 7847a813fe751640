import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from harmindex.conformal import TestFunction, choose_basepoints
from harmindex.flow import energy_series, flow_point, flow_points, flow_sequence, u_series, volume_series
from harmindex.geometry import SpherePoint, random_sphere_points, sphere_volume, tangent_frame
from harmindex.maps import make_zoo_map, total_energy, volume
from harmindex.spectral import make_eigenbasis


def _u(n, seed=0, degree=1):
    basis = make_eigenbasis(n, degree)
    return TestFunction(basis, choose_basepoints(basis, seed)[0])


def test_zero_time_is_identity(rng):
    u = _u(3)
    y = random_sphere_points(3, 5, rng)
    assert_allclose(flow_points(y, u, 0.0), y)


def test_invalid_arguments():
    u = _u(2)
    with pytest.raises(ValueError):
        flow_points(np.array([1.0, 0.0, 0.0]), u, -1.0)
    with pytest.raises(ValueError):
        flow_points(np.array([1.0, 0.0, 0.0]), u, 1.0, step=0.0)


def test_degree_one_flow_closed_form():
    # u = c <m, y>; the angle theta to m obeys theta' = c sin(theta),
    # so tan(theta / 2) grows like exp(c t)
    n = 3
    u = _u(n)
    m = u.basepoint.ambient
    c = (n + 1) / sphere_volume(n)
    y0 = SpherePoint(tangent_frame(m)[0] * math.sin(0.4) + m * math.cos(0.4))
    for t in (0.5, 2.0):
        yt = flow_point(y0, u, t).ambient
        theta = math.acos(np.clip(yt @ m, -1, 1))
        assert theta == pytest.approx(2 * math.atan(math.tan(0.2) * math.exp(c * t)), abs=1e-9)


def test_flow_stays_on_sphere_and_decreases_u(rng):
    u = _u(4)
    y = random_sphere_points(4, 50, rng)
    yt = flow_points(y, u, 1.5)
    assert_allclose(np.linalg.norm(yt, axis=-1), 1.0, atol=1e-14)
    assert np.all(u.values(yt) <= u.values(y) + 1e-14)


def test_flow_differential_matches_finite_differences(rng):
    u = _u(3, degree=2)
    y = random_sphere_points(3, 4, rng)
    v = np.stack([tangent_frame(p)[0] for p in y])
    t, h = 0.7, 1e-6
    *_, (yt, J) = flow_sequence(y, v[:, None, :], u, [0.0, t])
    plus = flow_points((y + h * v) / np.linalg.norm(y + h * v, axis=-1, keepdims=True), u, t)
    minus = flow_points((y - h * v) / np.linalg.norm(y - h * v, axis=-1, keepdims=True), u, t)
    assert_allclose(J[:, 0, :], (plus - minus) / (2 * h), atol=1e-6)


def test_energy_series_identity3():
    f = make_zoo_map("identity3", 12)
    s = energy_series(f, _u(3), t_max=1.0, samples=11)
    assert s.values[0] == pytest.approx(total_energy(f), abs=1e-10)
    assert s.verdict
    assert s.values[-1] < s.values[0]


def test_energy_series_independent_of_step():
    f = make_zoo_map("identity3", 8)
    a = energy_series(f, _u(3), 0.5, 5, step=0.05)
    b = energy_series(f, _u(3), 0.5, 5, step=0.0125)
    assert_allclose(a.values, b.values, rtol=1e-8)


def test_energy_series_requires_harmonic():
    f = dataclasses.replace(make_zoo_map("identity3", 8), harmonic=False)
    with pytest.raises(ValueError):
        energy_series(f, _u(3))


def test_volume_series_clifford():
    f = make_zoo_map("clifford", 24)
    s = volume_series(f, _u(3), t_max=0.5, samples=11)
    assert s.values[0] == pytest.approx(volume(f), abs=1e-10)
    assert s.verdict
    assert np.all(s.values <= 2 * math.pi**2 * (1 + 1e-8))


def test_volume_series_requires_minimal_isometric():
    with pytest.raises(ValueError):
        volume_series(make_zoo_map("identity3", 8), _u(3))


def test_u_series_pointwise_monotone():
    f = make_zoo_map("equator23", 16)
    s = u_series(f, _u(3), t_max=1.0, samples=11)
    assert s.verdict
    assert np.all(np.diff(s.values) <= 1e-12)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.1, 20.0), st.integers(0, 1000))
def test_scaled_flows_decrease_energy(scale, seed):
    f = make_zoo_map("identity3", 8)
    u = _u(3, seed).scaled(scale)
    assert energy_series(f, u, t_max=0.5, samples=6).verdict


def test_series_validation():
    f = make_zoo_map("identity3", 8)
    with pytest.raises(ValueError):
        energy_series(f, _u(3), t_max=0.0)
    with pytest.raises(ValueError):
        energy_series(f, _u(3), samples=1)


def test_csv_format():
    f = make_zoo_map("identity3", 8)
    text = energy_series(f, _u(3), 0.2, 3).to_csv()
    lines = text.splitlines()
    assert lines[0] == "t,value"
    t, v = lines[1].split(",")
    assert float(t) == 0.0 and float(v) == pytest.approx(total_energy(f))
    assert lines[-2] == "# kind: energy"
    assert lines[-1].startswith("# verdict: PASS")


def test_critical_point_is_fixed():
    u = _u(3)
    m = u.basepoint
    for p in (m, SpherePoint(-m.ambient)):
        assert_allclose(flow_point(p, u, 1.0).ambient, p.ambient, atol=1e-10)


def test_u_monotone_along_single_trajectory(rng):
    u = _u(3, degree=2)
    y0 = random_sphere_points(3, 1, rng)
    times = np.linspace(0, 2.0, 100)
    vals = [u.values(y)[0] for y, _ in flow_sequence(y0, None, u, times)]
    assert np.all(np.diff(vals) <= 1e-12)


def test_constant_map_energy_series_is_zero():
    s = energy_series(make_zoo_map("constant3", 8), _u(3), 0.5, 6)
    assert np.all(s.values == 0.0)
    assert s.verdict


def test_equator_volume_series_bounded():
    f = make_zoo_map("equator23", 24)
    s = volume_series(f, _u(3), 0.5, 11)
    assert s.values[0] == pytest.approx(4 * math.pi, abs=1e-10)
    assert s.verdict


def test_series_are_deterministic():
    f = make_zoo_map("identity3", 8)
    a, b = energy_series(f, _u(3), 0.5, 6), energy_series(f, _u(3), 0.5, 6)
    assert np.array_equal(a.values, b.values)


def test_step_halving_convergence():
    f = make_zoo_map("identity3", 8)
    step = 0.1
    e1 = energy_series(f, _u(3), 1.0, 3, step=step).values
    e2 = energy_series(f, _u(3), 1.0, 3, step=step / 2).values
    assert np.max(np.abs(e1 - e2)) <= 10 * step**4


def test_first_variation_vanishes_for_harmonic_maps():
    f = make_zoo_map("identity3", 12)
    for dt in (1e-2, 5e-3):
        s = energy_series(f, _u(3), dt, 2)
        slope = (s.values[1] - s.values[0]) / dt
        assert abs(slope) <= 50 * dt

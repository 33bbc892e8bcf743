from fractions import Fraction

import numpy as np
import pytest

from framesnap import (
    Realization,
    bar_force,
    build_framework,
    build_realization,
    energy_density,
    energy_gradient,
    energy_hessian,
    p_distance,
    p_metric,
    self_stress,
    snappability_pseudometric,
    strain,
    total_energy,
)
from framesnap.errors import DimensionMismatch, NonPositiveLength
from framesnap.framework import gauge_chart

from conftest import fd_gradient, fd_hessian, manipulator_coords, random_realization
from conftest import MAGENTA6, TRIANGLE_EDGES

GREEN_UNPINNED = np.array([220 / 21, 20 / 3, 80 / 21])   # bar lengths
GREEN_PINNED = np.array([10.0, 70 / 11, 40 / 11])


def test_strain_values():
    assert strain(11, 10) == pytest.approx(0.1, abs=1e-15)
    assert strain(10, 10) == 0.0
    assert strain(16 / 11, 4) == pytest.approx(float(Fraction(-7, 11)), abs=1e-15)


def test_strain_rejects_nonpositive():
    with pytest.raises(NonPositiveLength):
        strain(0.0, 1.0)
    with pytest.raises(NonPositiveLength):
        strain(1.0, -1.0)


def test_bar_force_values():
    assert bar_force(10, 10, 1, 1) == 0.0
    assert bar_force(220 / 21, 10, 1, 1) == pytest.approx(float(Fraction(1, 21)), abs=1e-15)
    assert bar_force(8 / 3, 4, 1, 1) == pytest.approx(float(Fraction(-1, 3)), abs=1e-15)


def test_total_energy_undeformed(triangle_unpinned):
    profile = total_energy(triangle_unpinned, np.array([10.0, 7.0, 4.0]))
    assert profile.total == 0.0
    assert np.all(profile.per_bar == 0.0)


def test_total_energy_green_saddles(triangle_unpinned, triangle_pinned):
    U = total_energy(triangle_unpinned, GREEN_UNPINNED).total
    assert U == pytest.approx(float(Fraction(1, 42)), abs=1e-15)
    U = total_energy(triangle_pinned, GREEN_PINNED).total
    assert U == pytest.approx(float(Fraction(1, 22)), abs=1e-15)


def test_pinned_pinned_bar_contributes_nothing(triangle_pinned):
    # same deformable lengths, nonsense value for the grounded bar
    a = total_energy(triangle_pinned, np.array([10.0, 6.0, 3.0])).total
    b = total_energy(triangle_pinned, np.array([4.0, 6.0, 3.0])).total
    assert a == b


def test_energy_density_values(triangle_unpinned, triangle_pinned):
    assert energy_density(triangle_unpinned, 1 / 42) == pytest.approx(
        float(Fraction(1, 882)), abs=1e-16)
    assert energy_density(triangle_pinned, 1 / 22) == pytest.approx(
        float(Fraction(1, 462)), abs=1e-16)
    assert energy_density(triangle_unpinned, 0.0) == 0.0


def test_energy_nonnegative_and_zero_iff_undeformed(triangle_unpinned):
    rng = np.random.default_rng(2)
    L = triangle_unpinned.rest_lengths
    for _ in range(50):
        l = L * rng.uniform(0.5, 1.5, size=3)
        U = total_energy(triangle_unpinned, l).total
        assert U >= 0.0
        if np.max(np.abs(l - L)) > 1e-6:
            assert U > 0.0
    assert total_energy(triangle_unpinned, L.copy()).total <= 1e-12


def test_gradient_zero_at_critical_points(triangle_pinned):
    for x3 in (126 / 11, 70 / 11):
        r = build_realization(triangle_pinned, [[0, 0], [10, 0], [x3, 0]])
        g = energy_gradient(triangle_pinned, r)
        assert np.max(np.abs(g)) < 1e-12
    undeformed = build_realization(
        triangle_pinned, [[0, 0], [10, 0], [133 / 20, 7 * np.sqrt(39) / 20]])
    assert np.max(np.abs(energy_gradient(triangle_pinned, undeformed))) < 1e-14


def test_gradient_matches_finite_differences(triangle_pinned):
    r = build_realization(triangle_pinned, [[0, 0], [10, 0], [7.0, 0.1]])
    g = energy_gradient(triangle_pinned, r)
    g_fd = fd_gradient(triangle_pinned, r)
    np.testing.assert_allclose(g, g_fd, rtol=1e-6)


@pytest.mark.parametrize("fixture", ["triangle_unpinned", "triangle_pinned", "manipulator"])
def test_gradient_and_hessian_fd_sweep(fixture, request):
    fw = request.getfixturevalue(fixture)
    chart = gauge_chart(fw)
    rng = np.random.default_rng(17)
    for _ in range(25):
        r = random_realization(fw, rng, spread=1.0)
        g = energy_gradient(fw, r, chart)
        g_fd = fd_gradient(fw, r, chart)
        scale = max(1.0, np.abs(g_fd).max())
        assert np.max(np.abs(g - g_fd)) / scale < 1e-5
        H = energy_hessian(fw, r, chart)
        H_fd = fd_hessian(fw, r, chart)
        hscale = max(1.0, np.abs(H_fd).max())
        assert np.max(np.abs(H - H_fd)) / hscale < 1e-4


def test_hessian_definiteness_classifies_triangle(triangle_pinned):
    blue = build_realization(
        triangle_pinned, [[0, 0], [10, 0], [133 / 20, 7 * np.sqrt(39) / 20]])
    eigs = np.linalg.eigvalsh(energy_hessian(triangle_pinned, blue))
    assert np.all(eigs > 0)
    saddle = build_realization(triangle_pinned, [[0, 0], [10, 0], [70 / 11, 0]])
    eigs = np.linalg.eigvalsh(energy_hessian(triangle_pinned, saddle))
    assert eigs[0] < 0 < eigs[1]
    # closed forms for the axis-aligned saddle
    np.testing.assert_allclose(sorted(eigs), sorted([11 / 28, -11 / 280]), atol=1e-12)


def test_p_distance_basics(triangle_unpinned):
    P = p_metric(triangle_unpinned)
    L = triangle_unpinned.rest_lengths
    assert p_distance(P, L, L) == 0.0
    rng = np.random.default_rng(8)
    x = rng.uniform(1, 10, 3)
    y = rng.uniform(1, 10, 3)
    assert p_distance(P, x, y) == pytest.approx(p_distance(P, y, x), abs=0)
    with pytest.raises(DimensionMismatch):
        p_distance(P, x[:2], y[:2])


def test_energy_is_squared_p_distance(triangle_unpinned):
    P = p_metric(triangle_unpinned)
    L = triangle_unpinned.rest_lengths
    assert p_distance(P, GREEN_UNPINNED, L) ** 2 == pytest.approx(1 / 42, abs=1e-15)
    rng = np.random.default_rng(9)
    for _ in range(50):
        l = L * rng.uniform(0.4, 1.8, size=3)
        U = total_energy(triangle_unpinned, l).total
        assert abs(U - p_distance(P, l, L) ** 2) < 1e-12


def test_pseudometric_values(triangle_unpinned):
    P = p_metric(triangle_unpinned)
    L = triangle_unpinned.rest_lengths
    assert snappability_pseudometric(P, L, GREEN_UNPINNED, GREEN_UNPINNED) == 0.0
    assert snappability_pseudometric(P, L, L, GREEN_UNPINNED) == pytest.approx(
        1 / 42, abs=1e-15)
    # distinct length vectors equidistant from L: a pseudometric, not a metric
    l1 = np.array([11.0, 7.0, 4.0])
    l2 = np.array([9.0, 7.0, 4.0])
    assert snappability_pseudometric(P, L, l1, l2) == 0.0


def test_density_scale_invariance():
    rng = np.random.default_rng(4)
    for c in (0.25, 3.0, 17.5):
        fw1 = build_framework(2, 3, TRIANGLE_EDGES)
        fw2 = build_framework(2, 3, [(i, j, c * L) for i, j, L in TRIANGLE_EDGES])
        for _ in range(20):
            l = fw1.rest_lengths * rng.uniform(0.5, 1.5, size=3)
            d1 = energy_density(fw1, total_energy(fw1, l).total)
            d2 = energy_density(fw2, total_energy(fw2, c * l).total)
            assert abs(d1 - d2) <= 1e-10 * max(1.0, abs(d1))


def test_self_stress_undeformed_is_zero(triangle_unpinned):
    r = build_realization(
        triangle_unpinned, [[0, 0], [10, 0], [133 / 20, 7 * np.sqrt(39) / 20]])
    ss = self_stress(triangle_unpinned, r)
    np.testing.assert_allclose(ss.omega, 0.0, atol=1e-15)
    assert ss.residual <= 1e-15


def test_self_stress_at_pinned_saddle(triangle_pinned):
    r = build_realization(triangle_pinned, [[0, 0], [10, 0], [70 / 11, 0]])
    ss = self_stress(triangle_pinned, r)
    assert np.linalg.norm(ss.omega) > 0
    assert ss.residual < 1e-12


def test_self_stress_magenta(manipulator):
    r = build_realization(manipulator, manipulator_coords(MAGENTA6))
    ss = self_stress(manipulator, r)
    assert np.linalg.norm(ss.omega) > 1e-3
    assert ss.residual < 1e-3      # coordinates tabulated to 4 decimals


def test_isometry_invariance_through_canonical_chart(triangle_unpinned):
    from framesnap import canonicalize

    rng = np.random.default_rng(31)
    chart = gauge_chart(triangle_unpinned)
    r = random_realization(triangle_unpinned, rng)
    U0 = total_energy(triangle_unpinned, r).total
    g0 = np.linalg.norm(energy_gradient(triangle_unpinned, Realization(
        canonicalize(triangle_unpinned, r)), chart))
    e0 = np.linalg.eigvalsh(energy_hessian(triangle_unpinned, Realization(
        canonicalize(triangle_unpinned, r)), chart))
    for _ in range(10):
        a = rng.uniform(0, 2 * np.pi)
        R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
        moved = Realization(r.coordinates @ R.T + rng.normal(size=2))
        canon = Realization(canonicalize(triangle_unpinned, moved))
        assert total_energy(triangle_unpinned, moved).total == pytest.approx(U0, rel=1e-12)
        assert np.linalg.norm(energy_gradient(
            triangle_unpinned, canon, chart)) == pytest.approx(g0, rel=1e-6, abs=1e-9)
        np.testing.assert_allclose(
            np.linalg.eigvalsh(energy_hessian(triangle_unpinned, canon, chart)),
            e0, rtol=1e-7, atol=1e-10)

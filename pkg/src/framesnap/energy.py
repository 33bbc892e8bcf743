"""Hooke-law bar mechanics: strain, forces, energy, derivatives, metrics.

All derivatives are taken with respect to the free coordinates of the
framework's gauge chart; the isometry null directions are never part of the
differentiation variables, so second-derivative classification is meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonPositiveLength, ZeroEdgeLength
from .framework import Framework, GaugeChart, Realization, edge_lengths, gauge_chart


@dataclass(frozen=True)
class PMetric:
    """Diagonal metric on edge-length space; weights E*A/(2*L) per edge."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w <= 0):
            raise NonPositiveLength("metric weights must be positive")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class EnergyProfile:
    strains: np.ndarray
    stresses: np.ndarray
    forces: np.ndarray
    per_bar: np.ndarray
    total: float


@dataclass(frozen=True)
class SelfStress:
    """Force densities per edge plus the worst-knot equilibrium defect."""

    omega: np.ndarray
    residual: float


def strain(l, L) -> float:
    """Engineering strain (l - L)/L of a single bar."""
    if l <= 0 or L <= 0:
        raise NonPositiveLength(f"bar lengths must be positive, got l={l}, L={L}")
    return (l - L) / L


def bar_force(l, L, E=1.0, A=1.0) -> float:
    """Axial force E*A*(l-L)/L; positive stretches, negative compresses."""
    if E <= 0 or A <= 0:
        raise NonPositiveLength("E and A must be positive")
    return E * A * strain(l, L)


def p_metric(framework: Framework) -> PMetric:
    m = framework.material
    return PMetric(m.modulus * m.area / (2.0 * framework.rest_lengths))


def _as_lengths(framework: Framework, lengths_or_realization) -> np.ndarray:
    if isinstance(lengths_or_realization, Realization):
        return edge_lengths(framework, lengths_or_realization)
    l = np.asarray(lengths_or_realization, dtype=float)
    if l.shape != (framework.num_edges,):
        raise DimensionMismatch(
            f"expected {framework.num_edges} edge lengths, got shape {l.shape}"
        )
    if np.any(l <= 0):
        raise NonPositiveLength("all edge lengths must be positive")
    return l


def total_energy(framework: Framework, lengths_or_realization) -> EnergyProfile:
    """Total elastic strain energy plus the per-bar breakdown.

    Bars between two pinned knots cannot deform and contribute nothing.
    """
    l = _as_lengths(framework, lengths_or_realization)
    L = framework.rest_lengths
    m = framework.material
    eps = np.where(framework.deformable, (l - L) / L, 0.0)
    stresses = m.modulus * eps
    forces = stresses * m.area
    per_bar = np.where(framework.deformable, 0.5 * forces * (l - L), 0.0)
    return EnergyProfile(
        strains=eps,
        stresses=stresses,
        forces=forces,
        per_bar=per_bar,
        total=float(per_bar.sum()),
    )


def energy_density(framework: Framework, U: float) -> float:
    """Energy per material volume U/(A*L), L summed over all edges."""
    return float(U) / (framework.material.area * framework.total_rest_length)


def p_distance(metric: PMetric, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.shape != metric.weights.shape:
        raise DimensionMismatch(
            f"metric of size {metric.weights.shape} applied to {x.shape} and {y.shape}"
        )
    d = x - y
    return float(np.sqrt(np.sum(metric.weights * d * d)))


def snappability_pseudometric(metric: PMetric, L, l1, l2) -> float:
    """|d_P(l2,L)^2 - d_P(l1,L)^2|: energy gap between two deformed states."""
    return abs(p_distance(metric, l2, L) ** 2 - p_distance(metric, l1, L) ** 2)


def _edge_geometry(framework: Framework, coords: np.ndarray):
    d = coords[framework.edge_index[:, 0]] - coords[framework.edge_index[:, 1]]
    l = np.linalg.norm(d, axis=1)
    if np.any(l <= 1e-14 * max(1.0, float(framework.rest_lengths.max()))):
        raise ZeroEdgeLength("adjacent knots (numerically) coincide")
    return d, l


def energy_gradient(framework: Framework, realization: Realization,
                    chart: GaugeChart | None = None) -> np.ndarray:
    """dU/d(free coordinates); equals minus the net bar-force at each free knot."""
    chart = chart or gauge_chart(framework)
    coords = realization.coordinates
    d, l = _edge_geometry(framework, coords)
    m = framework.material
    F = np.where(framework.deformable, m.modulus * m.area * (l - framework.rest_lengths)
                 / framework.rest_lengths, 0.0)
    # force vector F * (k_i - k_j)/l acts on i, opposite on j
    per_edge = (F / l)[:, None] * d
    g_full = np.zeros_like(coords)
    np.add.at(g_full, framework.edge_index[:, 0], per_edge)
    np.add.at(g_full, framework.edge_index[:, 1], -per_edge)
    return np.array([g_full[k, a] for k, a in chart.free])


def energy_hessian(framework: Framework, realization: Realization,
                   chart: GaugeChart | None = None) -> np.ndarray:
    """Analytic second derivatives of U in free coordinates (symmetric)."""
    chart = chart or gauge_chart(framework)
    coords = realization.coordinates
    n = framework.dimension
    s = framework.num_knots
    d, l = _edge_geometry(framework, coords)
    m = framework.material
    L = framework.rest_lengths
    H_full = np.zeros((s * n, s * n))
    for e in range(framework.num_edges):
        if not framework.deformable[e]:
            continue
        i, j = framework.edge_index[e]
        u = d[e] / l[e]
        stiff = m.modulus * m.area / L[e]                    # material part
        F = stiff * (l[e] - L[e])                            # geometric part scale
        block = stiff * np.outer(u, u) + (F / l[e]) * (np.eye(n) - np.outer(u, u))
        bi, bj = i * n, j * n
        H_full[bi:bi + n, bi:bi + n] += block
        H_full[bj:bj + n, bj:bj + n] += block
        H_full[bi:bi + n, bj:bj + n] -= block
        H_full[bj:bj + n, bi:bi + n] -= block
    idx = [k * n + a for k, a in chart.free]
    H = H_full[np.ix_(idx, idx)]
    return 0.5 * (H + H.T)


def self_stress(framework: Framework, realization: Realization) -> SelfStress:
    """Force densities omega = F/l and the max equilibrium defect at free knots.

    Pinned knots counterbalance any force, so they contribute no residual.
    Bars between two pinned knots carry no defined force density (entry 0).
    """
    coords = realization.coordinates
    d, l = _edge_geometry(framework, coords)
    m = framework.material
    F = np.where(framework.deformable,
                 m.modulus * m.area * (l - framework.rest_lengths) / framework.rest_lengths,
                 0.0)
    omega = np.where(framework.deformable, F / l, 0.0)
    per_edge = omega[:, None] * d
    g_full = np.zeros_like(coords)
    np.add.at(g_full, framework.edge_index[:, 0], per_edge)
    np.add.at(g_full, framework.edge_index[:, 1], -per_edge)
    free_knots = [k for k in range(framework.num_knots) if (k + 1) not in framework.pins]
    if free_knots:
        residual = float(np.max(np.linalg.norm(g_full[free_knots], axis=1)))
    else:
        residual = 0.0
    return SelfStress(omega=omega, residual=residual)


def constraint_jacobian(framework: Framework, coords: np.ndarray,
                        chart: GaugeChart) -> np.ndarray:
    """Jacobian of the deformable-edge length constraints wrt free coordinates.

    Row e is the gradient of |k_i - k_j| (unsquared), i.e. the rigidity matrix
    of the framework in the chart; its left kernel is a self-stress of the
    constraint system and signals infinitesimal flexibility.
    """
    d, l = _edge_geometry(framework, coords)
    idx = {(k, a): col for col, (k, a) in enumerate(chart.free)}
    dedges = framework.deformable_edges
    J = np.zeros((dedges.size, chart.size))
    for row, e in enumerate(dedges):
        i, j = framework.edge_index[e]
        u = d[e] / l[e]
        for a in range(framework.dimension):
            col = idx.get((i, a))
            if col is not None:
                J[row, col] += u[a]
            col = idx.get((j, a))
            if col is not None:
                J[row, col] -= u[a]
    return J

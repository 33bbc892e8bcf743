"""Stationarity system of the constrained strain-energy functional.

The energy is rewritten with an auxiliary length variable per deformable bar
and a multiplier enforcing length-squared consistency; differentiating that
functional in every variable yields a square system of quadratic polynomial
equations. Variables are ordered [free coordinates | q | lambda].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch
from .framework import Framework, GaugeChart, gauge_chart


class _Accumulator:
    """Collects one quadratic equation: constant + linear + {x_i x_j} terms."""

    def __init__(self, n):
        self.const = 0.0
        self.lin = np.zeros(n)
        self.quad = {}

    def add_quad(self, i, j, c):
        key = (i, j) if i <= j else (j, i)
        self.quad[key] = self.quad.get(key, 0.0) + c


@dataclass(frozen=True)
class PolynomialSystem:
    """Square quadratic system with batched evaluation.

    Equation e reads  const[e] + lin[e] . x + sum_k qc[k] x[qi[k]] x[qj[k]]
    over the quadratic terms with qeq[k] == e.
    """

    names: tuple[str, ...]
    const: np.ndarray                 # (m,)
    lin: np.ndarray                   # (m, N)
    qeq: np.ndarray                   # (T,) sorted
    qi: np.ndarray
    qj: np.ndarray
    qc: np.ndarray
    coord_vars: int                   # free coordinates come first
    edge_vars: int                    # then q, then lambda (edge_vars each)
    deformable_edges: tuple[int, ...] # indices into framework.edges
    framework: Framework = field(repr=False)
    chart: GaugeChart = field(repr=False)

    # evaluation scratch built once
    _qoff: np.ndarray = field(init=False, repr=False)
    _qcount: np.ndarray = field(init=False, repr=False)
    _jcols: np.ndarray = field(init=False, repr=False)
    _joff: np.ndarray = field(init=False, repr=False)
    _jsrc: np.ndarray = field(init=False, repr=False)
    _jcoef: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m, N = self.lin.shape
        order = np.argsort(self.qeq, kind="stable")
        for name in ("qeq", "qi", "qj", "qc"):
            object.__setattr__(self, name, np.asarray(getattr(self, name))[order])
        offsets = np.searchsorted(self.qeq, np.arange(m))
        counts = np.diff(np.append(offsets, self.qeq.size))
        object.__setattr__(self, "_qoff", offsets)
        object.__setattr__(self, "_qcount", counts)
        # Jacobian contributions: term (e,i,j,c) adds c*x_j to J[e,i] and c*x_i to J[e,j]
        cols = np.concatenate([self.qeq * N + self.qi, self.qeq * N + self.qj])
        src = np.concatenate([self.qj, self.qi])
        coef = np.concatenate([self.qc, self.qc])
        order = np.argsort(cols, kind="stable")
        cols, src, coef = cols[order], src[order], coef[order]
        ucols, uoff = np.unique(cols, return_index=True)
        object.__setattr__(self, "_jcols", ucols)
        object.__setattr__(self, "_joff", uoff)
        object.__setattr__(self, "_jsrc", src)
        object.__setattr__(self, "_jcoef", coef)

    @property
    def size(self) -> int:
        return self.lin.shape[1]

    @property
    def num_equations(self) -> int:
        return self.lin.shape[0]

    @property
    def variable_groups(self) -> tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]:
        f, b = self.coord_vars, self.edge_vars
        return self.names[:f], self.names[f:f + b], self.names[f + b:]

    def degrees(self) -> np.ndarray:
        """Total degree per equation."""
        deg = np.where(np.any(self.lin != 0, axis=1), 1, 0)
        deg = np.maximum(deg, np.where(self._qcount > 0, 2, 0))
        return deg

    def homogeneous_groups(self) -> tuple[np.ndarray, np.ndarray]:
        """Two-group split: [coordinates + q] and [multipliers]."""
        f, b = self.coord_vars, self.edge_vars
        return np.arange(f + b), np.arange(f + b, f + 2 * b)

    def multidegrees(self, groups) -> np.ndarray:
        """(m, len(groups)) degree of each equation within each variable group."""
        gid = np.empty(self.size, dtype=int)
        for g, idx in enumerate(groups):
            gid[np.asarray(idx, dtype=int)] = g
        m = self.num_equations
        md = np.zeros((m, len(groups)), dtype=int)
        for e in range(m):
            for v in np.flatnonzero(self.lin[e]):
                md[e, gid[v]] = max(md[e, gid[v]], 1)
        for e, i, j in zip(self.qeq, self.qi, self.qj):
            if gid[i] == gid[j]:
                md[e, gid[i]] = max(md[e, gid[i]], 2)
            else:
                md[e, gid[i]] = max(md[e, gid[i]], 1)
                md[e, gid[j]] = max(md[e, gid[j]], 1)
        return md

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Residuals, shape (B, m) for x of shape (B, N) (or (m,) for 1-D x)."""
        single = x.ndim == 1
        xb = np.atleast_2d(x)
        vals = self.qc * xb[:, self.qi] * xb[:, self.qj]
        quad = np.add.reduceat(vals, self._qoff, axis=1)
        quad[:, self._qcount == 0] = 0.0
        out = self.const + xb @ self.lin.T + quad
        return out[0] if single else out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Jacobian, shape (B, m, N)."""
        single = x.ndim == 1
        xb = np.atleast_2d(x)
        B = xb.shape[0]
        m, N = self.lin.shape
        J = np.zeros((B, m * N), dtype=np.result_type(xb.dtype, float))
        J[:] = self.lin.reshape(1, m * N)
        contrib = self._jcoef * xb[:, self._jsrc]
        summed = np.add.reduceat(contrib, self._joff, axis=1)
        J[:, self._jcols] += summed
        J = J.reshape(B, m, N)
        return J[0] if single else J


def _edge_label(framework: Framework, e: int) -> str:
    i, j = framework.edges[e]
    return f"{i}{j}" if max(i, j) <= 9 else f"{i}_{j}"


def assemble_lagrange_system(framework: Framework) -> PolynomialSystem:
    """Square polynomial system whose real solutions with positive auxiliary
    lengths are exactly the critical realizations of the strain energy."""
    chart = gauge_chart(framework)
    dedges = [int(e) for e in framework.deformable_edges]
    f = chart.size
    b = len(dedges)
    N = f + 2 * b
    names = list(chart.labels)
    names += [f"q_{_edge_label(framework, e)}" for e in dedges]
    names += [f"lam_{_edge_label(framework, e)}" for e in dedges]

    coord_var = {(k, a): col for col, (k, a) in enumerate(chart.free)}
    q_var = {e: f + r for r, e in enumerate(dedges)}
    lam_var = {e: f + b + r for r, e in enumerate(dedges)}
    A = framework.material.area * framework.material.modulus
    L = framework.rest_lengths
    base = chart.base
    n = framework.dimension

    eqs = [_Accumulator(N) for _ in range(N)]

    # stationarity in each free coordinate: -2 sum_e lam_e (k_i - k_j)_a
    edges_at = {}
    for e in dedges:
        i, j = framework.edge_index[e]
        edges_at.setdefault(i, []).append((e, j))
        edges_at.setdefault(j, []).append((e, i))
    for col, (k, a) in enumerate(chart.free):
        acc = eqs[col]
        for e, other in edges_at.get(k, ()):
            lam = lam_var[e]
            acc.add_quad(lam, col, -2.0)
            oc = coord_var.get((other, a))
            if oc is not None:
                acc.add_quad(lam, oc, 2.0)
            else:
                acc.lin[lam] += 2.0 * base[other, a]

    # stationarity in q_e: A (q - L)/L + 2 lam q
    for r, e in enumerate(dedges):
        acc = eqs[f + r]
        acc.lin[q_var[e]] += A / L[e]
        acc.const += -A
        acc.add_quad(q_var[e], lam_var[e], 2.0)

    # stationarity in lam_e: q^2 - |k_i - k_j|^2
    for r, e in enumerate(dedges):
        acc = eqs[f + b + r]
        acc.add_quad(q_var[e], q_var[e], 1.0)
        i, j = framework.edge_index[e]
        for a in range(n):
            vi = coord_var.get((i, a))
            vj = coord_var.get((j, a))
            ci = base[i, a]
            cj = base[j, a]
            if vi is not None and vj is not None:
                acc.add_quad(vi, vi, -1.0)
                acc.add_quad(vj, vj, -1.0)
                acc.add_quad(vi, vj, 2.0)
            elif vi is not None:
                acc.add_quad(vi, vi, -1.0)
                acc.lin[vi] += 2.0 * cj
                acc.const += -cj * cj
            elif vj is not None:
                acc.add_quad(vj, vj, -1.0)
                acc.lin[vj] += 2.0 * ci
                acc.const += -ci * ci
            else:
                acc.const += -(ci - cj) ** 2

    const = np.array([a.const for a in eqs])
    lin = np.vstack([a.lin for a in eqs]) if eqs else np.zeros((0, N))
    qeq, qi, qj, qc = [], [], [], []
    for e, acc in enumerate(eqs):
        for (i, j), c in sorted(acc.quad.items()):
            if c != 0.0:
                qeq.append(e)
                qi.append(i)
                qj.append(j)
                qc.append(c)

    return PolynomialSystem(
        names=tuple(names),
        const=const,
        lin=lin,
        qeq=np.array(qeq, dtype=int),
        qi=np.array(qi, dtype=int),
        qj=np.array(qj, dtype=int),
        qc=np.array(qc, dtype=float),
        coord_vars=f,
        edge_vars=b,
        deformable_edges=tuple(dedges),
        framework=framework,
        chart=chart,
    )


def initial_multipliers(system: PolynomialSystem, lengths: np.ndarray) -> np.ndarray:
    """Multipliers making the q-stationarity equations hold exactly for given q."""
    fw = system.framework
    A = fw.material.area * fw.material.modulus
    L = fw.rest_lengths[list(system.deformable_edges)]
    q = np.asarray(lengths, dtype=float)
    if q.shape[-1] != len(system.deformable_edges):
        raise DimensionMismatch("one auxiliary length per deformable edge required")
    return -A * (q - L) / (2.0 * L * q)


def pack_solution(system: PolynomialSystem, free_coords, q, lam) -> np.ndarray:
    return np.concatenate([np.asarray(free_coords, dtype=float),
                           np.asarray(q, dtype=float),
                           np.asarray(lam, dtype=float)])


@lru_cache(maxsize=None)
def _count_selections(eq_key, remaining):
    """Number of ways to pick one factor per equation respecting group budgets."""
    if not eq_key:
        return 1 if all(r == 0 for r in remaining) else 0
    total = 0
    head, rest = eq_key[0], eq_key[1:]
    for g, mult in head:
        if mult > 0 and remaining[g] >= 1:
            # one of `mult` distinct factors from group g, one budget unit
            rem = list(remaining)
            rem[g] -= 1
            total += mult * _count_selections(rest, tuple(rem))
    return total


def grouped_path_count(system: PolynomialSystem) -> int:
    """Number of start paths of the two-group product homotopy."""
    groups = system.homogeneous_groups()
    md = system.multidegrees(groups)
    sizes = tuple(len(g) for g in groups)
    eq_key = tuple(
        tuple((g, int(md[e, g])) for g in range(len(groups)) if md[e, g] > 0)
        for e in range(system.num_equations)
    )
    return _count_selections(eq_key, sizes)


def total_degree_path_count(system: PolynomialSystem) -> int:
    return int(np.prod(system.degrees(), dtype=object))

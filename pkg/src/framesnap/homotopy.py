"""Homotopy continuation for the stationarity system.

A start system with known solutions is deformed into the target system
through H(x,t) = (1-t)*gamma*G(x) + t*F(x) with a random complex constant
gamma; every start solution is tracked with a tangent predictor and a Newton
corrector (at most 3 iterations per step) under per-path adaptive steps.
Start systems: plain total degree (one power equation per variable) or the
two-group product structure [coordinates+q | multipliers], which cuts the
path count sharply (59136 instead of 262144 for an 18-variable system of a
pinned three-legged framework).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonSquareSystem, PathBudgetExceeded
from .polysys import PolynomialSystem, grouped_path_count, total_degree_path_count


@dataclass(frozen=True)
class TrackerConfig:
    seed: int = 0
    start_structure: str = "grouped"     # "grouped" | "total"
    max_paths: int = 500_000
    chunk_size: int = 4096
    dt_init: float = 0.02
    dt_min: float = 1e-10
    dt_max: float = 0.1
    corrector_iters: int = 3
    track_tol: float = 1e-9
    refine_tol: float = 1e-12
    refine_iters: int = 60
    blowup: float = 1e8
    max_steps: int = 3000
    workers: int = 1


@dataclass
class PathStats:
    paths_tracked: int = 0
    failures: int = 0
    deduplicated: int = 0


@dataclass(frozen=True)
class SolutionPoint:
    """One accepted endpoint of the solver."""

    values: np.ndarray            # complex (N,)
    residual: float
    condition_estimate: float = float("nan")


class TotalDegreeStart:
    """G_e = a_e * x_e^{d_e} - b_e with random unit-modulus coefficients."""

    def __init__(self, system: PolynomialSystem, rng: np.random.Generator):
        self.degrees = np.maximum(system.degrees(), 1)
        N = system.size
        self.a = np.exp(2j * np.pi * rng.random(N))
        self.b = np.exp(2j * np.pi * rng.random(N))
        self._roots = [
            (self.b[e] / self.a[e]) ** (1.0 / d) * np.exp(2j * np.pi * np.arange(d) / d)
            for e, d in enumerate(self.degrees)
        ]

    def count(self) -> int:
        return int(np.prod(self.degrees, dtype=object))

    def solutions_chunk(self, start: int, size: int) -> np.ndarray:
        """Start solutions [start, start+size) in mixed-radix enumeration order."""
        stop = min(start + size, self.count())
        idx = np.arange(start, stop, dtype=np.int64)
        N = self.degrees.size
        out = np.empty((idx.size, N), dtype=complex)
        rem = idx.copy()
        for e in range(N - 1, -1, -1):
            d = int(self.degrees[e])
            out[:, e] = self._roots[e][rem % d]
            rem //= d
        return out

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.a * x ** self.degrees - self.b

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        B, N = x.shape
        J = np.zeros((B, N, N), dtype=complex)
        diag = self.a * self.degrees * x ** (self.degrees - 1)
        J[:, np.arange(N), np.arange(N)] = diag
        return J


class GroupedProductStart:
    """Products of random linear forms, one group at a time, per equation."""

    def __init__(self, system: PolynomialSystem, rng: np.random.Generator):
        self.N = system.size
        groups = system.homogeneous_groups()
        self.groups = [np.asarray(g, dtype=int) for g in groups]
        md = system.multidegrees(groups)
        # factor list per equation: (group id, weights (N,), constant)
        self.factors: list[list[tuple[int, np.ndarray, complex]]] = []
        for e in range(system.num_equations):
            fs = []
            for g, gvars in enumerate(self.groups):
                for _ in range(int(md[e, g])):
                    w = np.zeros(self.N, dtype=complex)
                    w[gvars] = rng.normal(size=gvars.size) + 1j * rng.normal(size=gvars.size)
                    c = complex(rng.normal() + 1j * rng.normal())
                    fs.append((g, w, c))
            self.factors.append(fs)
        self._selections: list[tuple[int, ...]] | None = None

    def count(self) -> int:
        return len(self._all_selections())

    def _all_selections(self) -> list[tuple[int, ...]]:
        """Factor choice per equation so each group is chosen size-many times."""
        if self._selections is not None:
            return self._selections
        sizes = [g.size for g in self.groups]
        m = len(self.factors)
        # remaining capacity check: how many later equations can still feed group g
        feed = np.zeros((m + 1, len(sizes)), dtype=int)
        for e in range(m - 1, -1, -1):
            feed[e] = feed[e + 1]
            for g in {fg for fg, _, _ in self.factors[e]}:
                feed[e, g] += 1
        out: list[tuple[int, ...]] = []
        pick = [0] * m

        def rec(e, remaining):
            if e == m:
                if all(r == 0 for r in remaining):
                    out.append(tuple(pick))
                return
            if any(remaining[g] > feed[e, g] for g in range(len(sizes))):
                return
            for fidx, (g, _, _) in enumerate(self.factors[e]):
                if remaining[g] > 0:
                    remaining[g] -= 1
                    pick[e] = fidx
                    rec(e + 1, remaining)
                    remaining[g] += 1

        rec(0, list(sizes))
        self._selections = out
        return out

    def solutions_chunk(self, start: int, size: int) -> np.ndarray:
        sels = self._all_selections()
        sels = sels[start:min(start + size, len(sels))]
        B = len(sels)
        x = np.zeros((B, self.N), dtype=complex)
        for g, gvars in enumerate(self.groups):
            k = gvars.size
            A = np.empty((B, k, k), dtype=complex)
            rhs = np.empty((B, k), dtype=complex)
            for b, sel in enumerate(sels):
                rows = [
                    (self.factors[e][f][1], self.factors[e][f][2])
                    for e, f in enumerate(sel)
                    if self.factors[e][f][0] == g
                ]
                for r, (w, c) in enumerate(rows):
                    A[b, r] = w[gvars]
                    rhs[b, r] = -c
            x[:, gvars] = np.linalg.solve(A, rhs[..., None])[..., 0]
        return x

    def _factor_values(self, x: np.ndarray):
        vals = []
        for fs in self.factors:
            vals.append([x @ w + c for _, w, c in fs])
        return vals

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        B = x.shape[0]
        out = np.empty((B, len(self.factors)), dtype=complex)
        for e, fs in enumerate(self.factors):
            prod = np.ones(B, dtype=complex)
            for _, w, c in fs:
                prod = prod * (x @ w + c)
            out[:, e] = prod
        return out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        B = x.shape[0]
        m = len(self.factors)
        J = np.zeros((B, m, self.N), dtype=complex)
        for e, fs in enumerate(self.factors):
            vals = [x @ w + c for _, w, c in fs]
            for f, (_, w, _) in enumerate(fs):
                rest = np.ones(B, dtype=complex)
                for f2, v in enumerate(vals):
                    if f2 != f:
                        rest = rest * v
                J[:, e, :] += rest[:, None] * w[None, :]
        return J


def make_start_system(system: PolynomialSystem, config: TrackerConfig,
                      rng: np.random.Generator):
    if config.start_structure == "total":
        return TotalDegreeStart(system, rng)
    return GroupedProductStart(system, rng)


def planned_path_count(system: PolynomialSystem, config: TrackerConfig) -> int:
    if config.start_structure == "total":
        return total_degree_path_count(system)
    return grouped_path_count(system)


def _solve(A, b):
    """Batched linear solve tolerant of isolated singular or non-finite items."""
    try:
        return np.linalg.solve(A, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(b)
        for k in range(A.shape[0]):
            try:
                out[k] = np.linalg.solve(A[k], b[k])
            except np.linalg.LinAlgError:
                try:
                    out[k] = np.linalg.lstsq(A[k], b[k], rcond=None)[0]
                except np.linalg.LinAlgError:
                    out[k] = np.nan
        return out


def _residual_scale(x):
    return 1.0 + np.abs(x).max(axis=-1) ** 2


def track_chunk(system: PolynomialSystem, start, x0: np.ndarray, gamma: complex,
                config: TrackerConfig):
    """Track one chunk of start solutions to t=1.

    Returns (endpoints (B,N) complex, residuals (B,), ok (B,) bool, steps (B,)).
    Each path's float history is independent of the chunk it rides in, which
    keeps results bit-identical across worker counts.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _track_chunk_impl(system, start, x0, gamma, config)


def _track_chunk_impl(system, start, x0, gamma, config):
    x = x0.astype(complex)
    B, N = x.shape
    t = np.zeros(B)
    dt = np.full(B, config.dt_init)
    streak = np.zeros(B, dtype=int)
    steps = np.zeros(B, dtype=int)
    alive = np.ones(B, dtype=bool)
    arrived = np.zeros(B, dtype=bool)

    def H(xa, ta):
        return (gamma * (1.0 - ta)[:, None] * start.evaluate(xa)
                + ta[:, None] * system.evaluate(xa))

    def JH(xa, ta):
        return (gamma * (1.0 - ta)[:, None, None] * start.jacobian(xa)
                + ta[:, None, None] * system.jacobian(xa))

    while np.any(alive):
        idx = np.flatnonzero(alive)
        xa, ta, dta = x[idx], t[idx], dt[idx]
        steps[idx] += 1

        dHdt = system.evaluate(xa) - gamma * start.evaluate(xa)
        tangent = _solve(JH(xa, ta), -dHdt)
        tn = np.minimum(ta + dta, 1.0)
        h = tn - ta
        xp = xa + tangent * h[:, None]
        for _ in range(config.corrector_iters):
            # non-finite rows would poison the batched solve; park them on the
            # last good point, where the residual test will fail them
            bad = ~np.isfinite(xp).all(axis=1)
            xp[bad] = xa[bad]
            r = H(xp, tn)
            r[~np.isfinite(r).all(axis=1)] = 0.0
            xp = xp - _solve(JH(xp, tn), r)
        bad = ~np.isfinite(xp).all(axis=1)
        xp[bad] = xa[bad]
        r = H(xp, tn)
        res = np.abs(r).max(axis=1)
        finite = np.isfinite(xp).all(axis=1) & np.isfinite(res)
        ok = finite & (res <= config.track_tol * _residual_scale(xp))

        # successes advance, failures halve the step
        adv = idx[ok]
        x[adv] = xp[ok]
        t[adv] = tn[ok]
        streak[adv] += 1
        grow = adv[streak[adv] >= 4]
        dt[grow] = np.minimum(dt[grow] * 2.0, config.dt_max)
        fail = idx[~ok]
        dt[fail] *= 0.5
        streak[fail] = 0

        blown = np.abs(x[idx]).max(axis=1) > config.blowup
        dead = idx[(dt[idx] < config.dt_min) | blown | (steps[idx] >= config.max_steps)]
        done = idx[t[idx] >= 1.0]
        arrived[done] = True
        alive[done] = False
        alive[dead] = False
        # paths stalling close to the end still get an endpoint attempt
        near = dead[t[dead] >= 0.9]
        arrived[near] = True

    # endpoint refinement on the target system with tightened tolerance
    res_out = np.full(B, np.inf)
    if arrived.any():
        idx = np.flatnonzero(arrived)
        xe = x[idx]
        best = xe.copy()
        best_res = np.abs(system.evaluate(xe)).max(axis=1)
        for _ in range(config.refine_iters):
            r = system.evaluate(xe)
            r[~np.isfinite(r).all(axis=1)] = 0.0
            xn = xe - _solve(system.jacobian(xe), r)
            bad = ~np.isfinite(xn).all(axis=1)
            xn[bad] = xe[bad]
            xe = xn
            rn = np.abs(system.evaluate(xe)).max(axis=1)
            better = np.isfinite(rn) & (rn < best_res)
            best[better] = xe[better]
            best_res[better] = rn[better]
            if np.all(best_res <= config.refine_tol * _residual_scale(best)):
                break
        x[idx] = best
        res_out[idx] = best_res
    good = arrived & (res_out <= 1e-8 * _residual_scale(x))
    return x, res_out, good, steps


def _track_task(args):
    system, start, x0, gamma, config = args
    return track_chunk(system, start, x0, gamma, config)


def solve_total_degree(system: PolynomialSystem, config: TrackerConfig | None = None,
                       stats: PathStats | None = None) -> list[SolutionPoint]:
    """Track every start path of the chosen structure; return convergent endpoints."""
    config = config or TrackerConfig()
    if system.num_equations != system.size:
        raise NonSquareSystem(
            f"{system.num_equations} equations in {system.size} variables"
        )
    rng = np.random.default_rng(config.seed)
    gamma = complex(np.exp(2j * np.pi * rng.random()))
    start = make_start_system(system, config, rng)
    total = start.count()
    if total > config.max_paths:
        raise PathBudgetExceeded(f"{total} start paths exceed budget {config.max_paths}")

    tasks = [(system, start, start.solutions_chunk(c, config.chunk_size), gamma, config)
             for c in range(0, total, config.chunk_size)]

    if config.workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_track_task, tasks))
    else:
        results = [_track_task(t) for t in tasks]

    points: list[SolutionPoint] = []
    failures = 0
    for xs, res, good, _ in results:
        failures += int((~good).sum())
        idx = np.flatnonzero(good)
        if idx.size:
            with np.errstate(all="ignore"):
                conds = np.linalg.cond(system.jacobian(xs[idx]))
            for k, c in zip(idx, conds):
                points.append(SolutionPoint(values=xs[k].copy(),
                                            residual=float(res[k]),
                                            condition_estimate=float(c)))
    if stats is not None:
        stats.paths_tracked += total
        stats.failures += failures
    return points


def newton_polish(system: PolynomialSystem, x0: np.ndarray, iters: int = 80,
                  tol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Plain batched Newton on the target system (real or complex dtype).

    Returns (points, residuals); non-finite iterates are frozen where they were.
    """
    x = np.atleast_2d(np.array(x0))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        best = x.copy()
        best_res = np.abs(system.evaluate(x)).max(axis=1)
        for _ in range(iters):
            r = system.evaluate(x)
            step = _solve(system.jacobian(x), r)
            ok = np.isfinite(step).all(axis=1)
            x = np.where(ok[:, None], x - step, x)
            rn = np.abs(system.evaluate(x)).max(axis=1)
            better = np.isfinite(rn) & (rn < best_res)
            best[better] = x[better]
            best_res[better] = rn[better]
            if np.all(best_res <= tol * _residual_scale(best)):
                break
    return best, best_res

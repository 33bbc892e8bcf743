"""Critical-point catalogs: solver orchestration, filtering, classification.

The two backends are the homotopy tracker (complete up to the tracked start
count) and a seeded multistart Newton sweep (an independent cross-check that
is fast but carries no completeness claim). Real solutions with positive
auxiliary lengths become critical realizations, classified by energy and the
second-derivative test, then deduplicated modulo direct isometries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import (
    SelfStress,
    energy_density,
    energy_gradient,
    energy_hessian,
    self_stress,
    total_energy,
)
from .errors import SolverFailure
from .framework import (
    Framework,
    Realization,
    build_realization,
    canonicalize,
    edge_lengths,
)
from .homotopy import (
    PathStats,
    SolutionPoint,
    TrackerConfig,
    newton_polish,
    solve_total_degree,
)
from .polysys import (
    PolynomialSystem,
    assemble_lagrange_system,
    initial_multipliers,
    pack_solution,
)

STABLE_UNDEFORMED = "StableUndeformed"
STABLE_DEFORMED = "StableDeformed"
SADDLE = "Saddle"
DEGENERATE_DEFORMED = "DegenerateDeformed"


@dataclass(frozen=True)
class SolverConfig:
    backend: str = "total-degree"        # total-degree | multistart | both
    seed: int = 0
    workers: int = 1
    starts: int = 4000
    start_structure: str = "grouped"     # grouped | total
    max_paths: int = 500_000
    chunk_size: int = 4096
    tol_real: float = 1e-8
    tol_positive: float = 1e-8
    tol_energy_factor: float = 1e-10     # energy floor = factor * A * total length
    tol_eig_factor: float = 1e-8         # eigenvalue floor = factor * max |eig|
    grad_tol_factor: float = 1e-8
    dedup_tol: float = 1e-6

    def tracker(self) -> TrackerConfig:
        return TrackerConfig(
            seed=self.seed,
            start_structure=self.start_structure,
            max_paths=self.max_paths,
            chunk_size=self.chunk_size,
            workers=self.workers,
        )

    def tol_energy(self, framework: Framework) -> float:
        return self.tol_energy_factor * framework.material.area * framework.total_rest_length

    def grad_tol(self, framework: Framework) -> float:
        return self.grad_tol_factor * framework.material.area * framework.total_rest_length


@dataclass(frozen=True)
class CriticalPoint:
    """A polished critical realization of the strain energy."""

    realization: Realization
    free_coordinates: np.ndarray
    q: np.ndarray
    multipliers: np.ndarray
    lengths: np.ndarray
    energy: float
    density: float
    gradient_norm: float
    hessian_eigenvalues: np.ndarray
    classification: str
    stress: SelfStress

    @property
    def is_stable(self) -> bool:
        return self.classification in (STABLE_UNDEFORMED, STABLE_DEFORMED)


@dataclass(frozen=True)
class CatalogStats:
    backend: str
    paths_tracked: int
    failures: int
    raw_solutions: int
    deduplicated: int


@dataclass(frozen=True)
class RealizationCatalog:
    stable: tuple[CriticalPoint, ...]
    unstable: tuple[CriticalPoint, ...]
    stats: CatalogStats

    def __iter__(self):
        return iter(self.stable + self.unstable)


def _sample_box(framework: Framework):
    """Center and halfwidth of the multistart sampling box (3x the diameter)."""
    D = float(framework.rest_lengths.max())
    if framework.pins:
        pins = np.vstack(list(framework.pins.values()))
        center = pins.mean(axis=0)
        if len(framework.pins) > 1:
            spread = max(
                np.linalg.norm(p - q) for p in pins for q in pins
            )
            D = max(D, float(spread))
    else:
        center = np.zeros(framework.dimension)
    return center, 1.5 * D


def solve_multistart(framework: Framework, config: SolverConfig | None = None,
                     stats: PathStats | None = None) -> list[SolutionPoint]:
    """Newton sweeps from seeded random starts; deduplicated converged points.

    Knot coordinates are sampled uniformly in a box three framework diameters
    wide, auxiliary lengths from the sampled geometry and multipliers from the
    exactly-solvable stationarity rows, so only the force-balance residual is
    nonzero at the start.
    """
    config = config or SolverConfig()
    system = assemble_lagrange_system(framework)
    if config.starts <= 0:
        return []
    rng = np.random.default_rng(config.seed)
    center, hw = _sample_box(framework)
    chart = system.chart
    f = chart.size
    axes = np.array([a for _, a in chart.free], dtype=int)
    free0 = rng.uniform(-hw, hw, size=(config.starts, f)) + center[axes]

    coords = chart.embed(free0)
    d = coords[:, system.framework.edge_index[:, 0], :] - coords[:, system.framework.edge_index[:, 1], :]
    lengths = np.linalg.norm(d, axis=2)[:, list(system.deformable_edges)]
    keep = lengths.min(axis=1) > 1e-9
    free0, lengths = free0[keep], lengths[keep]
    lam0 = initial_multipliers(system, lengths)
    x0 = np.hstack([free0, lengths, lam0])

    tasks = [(system, x0[c:c + config.chunk_size])
             for c in range(0, x0.shape[0], config.chunk_size)]

    if config.workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_newton_task, tasks))
    else:
        results = [_newton_task(t) for t in tasks]

    sols = np.vstack([r[0] for r in results]) if results else np.zeros((0, system.size))
    residuals = np.concatenate([r[1] for r in results]) if results else np.zeros(0)
    converged = residuals <= 1e-10 * (1.0 + np.abs(sols).max(axis=1) ** 2)
    sols, residuals = sols[converged], residuals[converged]
    if stats is not None:
        stats.paths_tracked += int(x0.shape[0])
        stats.failures += int(x0.shape[0] - sols.shape[0])

    merged, res = _cluster_means(system, sols, residuals, config.dedup_tol)
    merged, res = newton_polish(system, merged, iters=40)
    merged = _sharpen(system, merged)
    if merged.shape[0] == 0:
        return []
    with np.errstate(all="ignore"):
        conds = np.linalg.cond(system.jacobian(merged))
    return [SolutionPoint(values=v.astype(complex), residual=float(r),
                          condition_estimate=float(c))
            for v, r, c in zip(merged, res, conds)]


def _newton_task(args):
    system, chunk = args
    return _pruned_newton(system, chunk)


def _pruned_newton(system: PolynomialSystem, x0: np.ndarray,
                   iters: int = 80) -> tuple[np.ndarray, np.ndarray]:
    """Batched Newton with early retirement of converged/diverged starts.

    Retirement is stall-based, not tolerance-based: multiplicity-two roots
    (shaky realizations) converge only linearly and need the extra iterations
    to reach the floating noise floor, else duplicates straddle the dedup
    tolerance.
    """
    x = np.array(x0, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        best = x.copy()
        best_res = np.abs(system.evaluate(x)).max(axis=1)
        best_res[~np.isfinite(best_res)] = np.inf
        stall = np.zeros(x.shape[0], dtype=int)
        active = np.isfinite(best_res)
        for _ in range(iters):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            xa = x[idx]
            r = system.evaluate(xa)
            try:
                step = np.linalg.solve(system.jacobian(xa), r[..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = np.empty_like(r)
                J = system.jacobian(xa)
                for k in range(xa.shape[0]):
                    try:
                        step[k] = np.linalg.solve(J[k], r[k])
                    except np.linalg.LinAlgError:
                        step[k] = np.linalg.lstsq(J[k], r[k], rcond=None)[0]
            xn = xa - step
            ok = np.isfinite(xn).all(axis=1)
            xn[~ok] = xa[~ok]
            x[idx] = xn
            rn = np.abs(system.evaluate(xn)).max(axis=1)
            rn = np.where(np.isfinite(rn), rn, np.inf)
            improved = rn < 0.5 * best_res[idx]
            better = rn < best_res[idx]
            upd = idx[better]
            best[upd] = xn[better]
            best_res[upd] = rn[better]
            stall[idx[improved]] = 0
            stall[idx[~improved]] += 1
            scale = 1.0 + np.abs(xn).max(axis=1) ** 2
            # stalling near the noise floor means converged; stalling far out
            # for long means oscillation between basins - either way, stop
            done = (rn <= 1e-15 * scale) | np.isinf(rn) \
                | (np.abs(xn).max(axis=1) > 1e9) | ~ok \
                | ((stall[idx] >= 3) & (rn <= 1e-6 * scale)) | (stall[idx] >= 15)
            active[idx[done]] = False
    return best, best_res


def _singular_refine(system: PolynomialSystem, x: np.ndarray) -> np.ndarray:
    """Sharpen a root whose Jacobian is rank-deficient (shaky realization).

    Plain Newton stalls at sqrt(noise) distance from a multiplicity-two root.
    Deflation restores quadratic convergence: solve the augmented system
    F(x) = 0, J(x) v = 0, c.v = 1 by Gauss-Newton, which is regular at the
    double root. The quadratic structure gives d(Jv)/dx in closed form.
    """
    x = np.array(x, dtype=float)
    J = system.jacobian(x)
    _, sv, vt = np.linalg.svd(J)
    if sv[-1] > 1e-8 * max(sv[0], 1.0):
        return x
    v = vt[-1]
    c = v.copy()                      # normalization c.v = 1 at the start
    m, N = J.shape
    res0 = np.linalg.norm(system.evaluate(x))
    z = np.concatenate([x, v])
    best_z, best_r = z.copy(), np.inf
    stall = 0
    for _ in range(40):
        xc, vc = z[:N], z[N:]
        Jc = system.jacobian(xc)
        Jv = Jc @ vc
        # rows of d(Jv)/dx: (S_e vc) from the quadratic terms
        H = np.zeros((m, N))
        contrib = system.qc * vc[system.qj]
        np.add.at(H, (system.qeq, system.qi), contrib)
        np.add.at(H, (system.qeq, system.qj), system.qc * vc[system.qi])
        top = np.hstack([Jc, np.zeros((m, N))])
        mid = np.hstack([H, Jc])
        bot = np.concatenate([np.zeros(N), c])[None, :]
        A = np.vstack([top, mid, bot])
        r = np.concatenate([system.evaluate(xc), Jv, [c @ vc - 1.0]])
        rn = np.linalg.norm(r)
        if rn < 0.5 * best_r:
            stall = 0
        else:
            stall += 1
        if rn < best_r:
            best_r, best_z = rn, z.copy()
        if stall >= 3:
            break
        step, *_ = np.linalg.lstsq(A, r, rcond=None)
        if not np.isfinite(step).all():
            break
        z = z - step
    x_defl = best_z[:N]
    if np.linalg.norm(system.evaluate(x_defl)) <= max(res0, 1e-13):
        return x_defl
    return x


def _sharpen(system: PolynomialSystem, X: np.ndarray) -> np.ndarray:
    if X.shape[0] == 0:
        return X
    return np.vstack([_singular_refine(system, x) for x in X])


def _canonical_free(system: PolynomialSystem, free_vec: np.ndarray) -> np.ndarray:
    """Dedup representative: canonical gauge position for unpinned frameworks."""
    fw = system.framework
    if fw.pins:
        return np.asarray(free_vec, dtype=float)
    coords = system.chart.embed(free_vec)
    return system.chart.extract(canonicalize(fw, Realization(coords)))


def _cluster_means(system: PolynomialSystem, sols: np.ndarray, residuals: np.ndarray,
                   tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge numerically coincident solution vectors and average each cluster.

    The mean cancels the leading error of multiplicity-two endpoints (shaky
    realizations), where individual paths stall at sqrt(machine) accuracy.
    Conjugate pairs stay separate: the key carries real and imaginary parts.
    """
    if sols.shape[0] == 0:
        return sols, residuals
    if np.iscomplexobj(sols):
        keys = np.hstack([sols.real, sols.imag])
    else:
        keys = np.asarray(sols, dtype=float)
    # bucket prepass keeps the greedy pass small for large endpoint sets
    buckets, inverse = np.unique(np.round(keys / tol), axis=0, return_inverse=True)
    rep_rows = np.full(buckets.shape[0], -1, dtype=int)
    for i, bucket in enumerate(inverse):
        if rep_rows[bucket] < 0:
            rep_rows[bucket] = i
    reps = keys[rep_rows]
    order = np.lexsort(reps.T[::-1])
    cluster_of = np.full(reps.shape[0], -1, dtype=int)
    centers: list[np.ndarray] = []
    for u in order:
        if centers:
            dist = np.max(np.abs(np.vstack(centers) - reps[u]), axis=1)
            hit = int(np.argmin(dist))
            if dist[hit] <= tol:
                cluster_of[u] = hit
                continue
        cluster_of[u] = len(centers)
        centers.append(reps[u])
    labels = cluster_of[inverse]
    merged = np.empty((len(centers), sols.shape[1]), dtype=sols.dtype)
    res = np.empty(len(centers))
    for c in range(len(centers)):
        members = labels == c
        merged[c] = sols[members].mean(axis=0)
        res[c] = residuals[members].min()
    return merged, res


def _classify_values(energy: float, eigenvalues: np.ndarray, tol_energy: float,
                     tol_eig_factor: float) -> str:
    if energy < tol_energy:
        return STABLE_UNDEFORMED
    if eigenvalues.size == 0:
        return STABLE_DEFORMED
    tol_eig = tol_eig_factor * float(np.abs(eigenvalues).max())
    if np.any(eigenvalues < -tol_eig):
        return SADDLE
    if np.all(eigenvalues > tol_eig):
        return STABLE_DEFORMED
    return DEGENERATE_DEFORMED


def classify(framework: Framework, point: CriticalPoint,
             config: SolverConfig | None = None) -> str:
    """Second-derivative test with the zero-energy override.

    An undeformed realization is the global minimum whatever its Hessian does
    (shaky frameworks have singular Hessians there), so it is always stable.
    """
    config = config or SolverConfig()
    return _classify_values(point.energy, point.hessian_eigenvalues,
                            config.tol_energy(framework), config.tol_eig_factor)


def _make_critical_point(system: PolynomialSystem, vec: np.ndarray,
                         config: SolverConfig) -> CriticalPoint | None:
    fw = system.framework
    f, b = system.coord_vars, system.edge_vars
    free = _canonical_free(system, vec[:f])
    q = vec[f:f + b]
    lam = vec[f + b:]
    try:
        realization = build_realization(fw, system.chart.embed(free))
    except Exception:
        return None
    grad = energy_gradient(fw, realization, system.chart)
    gnorm = float(np.linalg.norm(grad))
    if gnorm > config.grad_tol(fw):
        return None
    profile = total_energy(fw, realization)
    eigs = np.linalg.eigvalsh(energy_hessian(fw, realization, system.chart))
    cls = _classify_values(profile.total, eigs, config.tol_energy(fw), config.tol_eig_factor)
    return CriticalPoint(
        realization=realization,
        free_coordinates=free,
        q=np.array(q),
        multipliers=np.array(lam),
        lengths=edge_lengths(fw, realization),
        energy=profile.total,
        density=energy_density(fw, profile.total),
        gradient_norm=gnorm,
        hessian_eigenvalues=eigs,
        classification=cls,
        stress=self_stress(fw, realization),
    )


def filter_realizations(framework: Framework, solutions: list[SolutionPoint],
                        config: SolverConfig | None = None,
                        system: PolynomialSystem | None = None) -> list[CriticalPoint]:
    """Real solutions with positive auxiliary lengths, polished and classified."""
    config = config or SolverConfig()
    system = system or assemble_lagrange_system(framework)
    if not solutions:
        return []
    X = np.vstack([s.values for s in solutions])
    imag_ok = np.abs(X.imag).max(axis=1) <= config.tol_real
    f, b = system.coord_vars, system.edge_vars
    q_ok = X[:, f:f + b].real.min(axis=1) >= config.tol_positive if b else np.ones(len(X), bool)
    X = X[imag_ok & q_ok].real
    if X.shape[0] == 0:
        return []
    X, res = newton_polish(system, X, iters=60)
    scale = 1.0 + np.abs(X).max(axis=1) ** 2
    X = _sharpen(system, X[res <= 1e-9 * scale])
    points = []
    for vec in X:
        cp = _make_critical_point(system, vec, config)
        if cp is not None:
            points.append(cp)
    return points


def _is_duplicate(p: CriticalPoint, k: CriticalPoint, tol: float,
                  system: PolynomialSystem | None) -> bool:
    if k.free_coordinates.shape != p.free_coordinates.shape:
        return False
    d = p.free_coordinates - k.free_coordinates
    if np.abs(d).max() <= tol:
        return True
    # shaky realizations are multiplicity-two roots: their position along the
    # infinitesimal flex is only resolvable to sqrt(machine), so measure the
    # separation transverse to that null direction
    if system is None or np.abs(d).max() > 1000 * tol:
        return False
    eigs = k.hessian_eigenvalues
    if eigs.size == 0 or np.abs(eigs).min() > 1e-6 * max(1.0, np.abs(eigs).max()):
        return False
    H = energy_hessian(system.framework, k.realization, system.chart)
    w, V = np.linalg.eigh(H)
    v = V[:, int(np.argmin(np.abs(w)))]
    transverse = d - (d @ v) * v
    return bool(np.abs(transverse).max() <= tol)


def _dedup_points(points: list[CriticalPoint], tol: float,
                  system: PolynomialSystem | None = None) -> list[CriticalPoint]:
    kept: list[CriticalPoint] = []
    for p in sorted(points, key=lambda p: tuple(p.free_coordinates)):
        if not any(_is_duplicate(p, k, tol, system) for k in kept):
            kept.append(p)
    return kept


def _sort_key(p: CriticalPoint, tol_energy: float):
    # energies below the undeformed floor are all "zero"; without snapping
    # them the ordering of undeformed realizations would ride on float noise
    U = 0.0 if p.energy < tol_energy else p.energy
    return (U,) + tuple(p.free_coordinates)


def build_catalog(framework: Framework, config: SolverConfig | None = None) -> RealizationCatalog:
    """Run the configured backend(s) and assemble the stable/unstable catalog."""
    config = config or SolverConfig()
    system = assemble_lagrange_system(framework)
    stats = PathStats()
    solutions: list[SolutionPoint] = []
    try:
        if config.backend in ("total-degree", "both"):
            raw = solve_total_degree(system, config.tracker(), stats)
            merged, res = _cluster_means(
                system, np.vstack([p.values for p in raw]) if raw else np.zeros((0, system.size), complex),
                np.array([p.residual for p in raw]) if raw else np.zeros(0),
                config.dedup_tol,
            )
            solutions += [SolutionPoint(values=v, residual=float(r))
                          for v, r in zip(merged, res)]
        if config.backend in ("multistart", "both"):
            solutions += solve_multistart(framework, config, stats)
        if config.backend not in ("total-degree", "multistart", "both"):
            raise SolverFailure(f"unknown backend {config.backend!r}")
    except SolverFailure:
        raise
    except Exception as exc:  # backend errors surface as SolverFailure
        raise SolverFailure(str(exc)) from exc

    points = filter_realizations(framework, solutions, config, system)
    before = len(points)
    points = _dedup_points(points, config.dedup_tol, system)
    stats.deduplicated += before - len(points)

    tol_e = config.tol_energy(framework)
    stable = tuple(sorted((p for p in points if p.is_stable),
                          key=lambda p: _sort_key(p, tol_e)))
    unstable = tuple(sorted((p for p in points if not p.is_stable),
                            key=lambda p: _sort_key(p, tol_e)))
    return RealizationCatalog(
        stable=stable,
        unstable=unstable,
        stats=CatalogStats(
            backend=config.backend,
            paths_tracked=stats.paths_tracked,
            failures=stats.failures,
            raw_solutions=len(solutions),
            deduplicated=stats.deduplicated,
        ),
    )


def refine_critical_point(framework: Framework, coordinates,
                          config: SolverConfig | None = None) -> CriticalPoint | None:
    """Polish a coordinate guess into a cataloged critical point (or None).

    Useful for checking externally tabulated configurations: auxiliary lengths
    and multipliers are seeded from the geometry, then full Newton runs.
    """
    config = config or SolverConfig()
    system = assemble_lagrange_system(framework)
    coords = np.asarray(coordinates, dtype=float)
    if not np.isfinite(coords).all():
        return None
    if coords.shape == (framework.num_knots, framework.dimension):
        free = system.chart.extract(coords)
    else:
        free = coords
    emb = system.chart.embed(free)
    d = emb[framework.edge_index[:, 0]] - emb[framework.edge_index[:, 1]]
    q = np.linalg.norm(d, axis=1)[list(system.deformable_edges)]
    lam = initial_multipliers(system, q)
    x0 = pack_solution(system, free, q, lam)
    x, res = newton_polish(system, x0[None, :], iters=100)
    if res[0] > 1e-9 * (1.0 + np.abs(x[0]).max() ** 2):
        return None
    return _make_critical_point(system, _singular_refine(system, x[0]), config)

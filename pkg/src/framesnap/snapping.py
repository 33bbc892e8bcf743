"""Snap deformations along straight segments in edge-length space.

A snap out of a stable realization follows the segment from its bar lengths
to a saddle's bar lengths, realized as a 1-parameter family of frameworks.
Tracking uses tangent prediction and Gauss-Newton correction on the length
constraints in free coordinates; a real branch can die before the target at
a fold (boundary of reality), which is located exactly with the standard
extended turning-point system and is necessarily infinitesimally flexible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import (
    DEGENERATE_DEFORMED,
    SADDLE,
    STABLE_UNDEFORMED,
    CriticalPoint,
    RealizationCatalog,
    SolverConfig,
)
from .energy import (
    constraint_jacobian,
    energy_density,
    energy_gradient,
    energy_hessian,
    self_stress,
    total_energy,
)
from .errors import (
    NoUndeformedRealization,
    NotASaddle,
    StartMismatch,
)
from .framework import (
    Framework,
    Realization,
    build_realization,
    congruent_mod_se,
    edge_lengths,
    gauge_chart,
)

REACHED_TARGET = "ReachedTarget"
BOUNDARY_OF_REALITY = "BoundaryOfReality"
CORRECTOR_DIVERGED = "CorrectorDiverged"
MONOTONICITY_VIOLATED = "MonotonicityViolated"

FORWARD = "forward"
CONTINUE = "continue"

ACCEPTED = "Accepted"
ENERGY_BELOW_START = "EnergyBelowStart"
UNREACHABLE = "Unreachable"


@dataclass(frozen=True)
class SnapConfig:
    steps: int = 200
    corrector_tol: float = 1e-11      # max per-edge length mismatch at samples
    target_tol: float = 1e-9          # acceptance residual at t = 1
    max_corrector: int = 12
    min_substep: float = 1e-6
    max_substep: float = 0.005        # marching cap; sampling grid may be coarser
    tol_singular: float = 1e-6
    congruence_tol: float = 1e-6
    kick_scale: float = 1e-3
    relax_after_accept: bool = True


@dataclass(frozen=True)
class PathSample:
    t: float
    realization: Realization
    lengths: np.ndarray
    energy: float
    density: float


@dataclass(frozen=True)
class SingularSample:
    t: float
    realization: Realization
    sigma_min: float
    stress: np.ndarray            # left-kernel of the rigidity rows, unit norm
    stress_residual: float


@dataclass(frozen=True)
class DeformationPath:
    mode: str
    status: str
    samples: tuple[PathSample, ...]
    start_lengths: np.ndarray
    target_lengths: np.ndarray
    boundary: SingularSample | None = None

    @property
    def terminal(self) -> Realization:
        return self.samples[-1].realization


@dataclass(frozen=True)
class SaddleAttempt:
    saddle_index: int
    outcome: str
    status: str | None = None
    path: DeformationPath | None = None


@dataclass(frozen=True)
class RelaxedState:
    realization: Realization
    classification: str           # "Undeformed" | "DeformedShaky"
    energy: float
    stress_norm: float
    stress_residual: float
    min_abs_eigenvalue: float


@dataclass(frozen=True)
class RelaxationResult:
    gradient_flow: RelaxedState
    continuation: DeformationPath

    @property
    def final_realization(self) -> Realization:
        return self.gradient_flow.realization

    @property
    def classification(self) -> str:
        if self.continuation.status == BOUNDARY_OF_REALITY:
            return BOUNDARY_OF_REALITY
        return self.gradient_flow.classification


@dataclass(frozen=True)
class StableIndexReport:
    stable_index: int
    value: float                  # math.inf when no saddle is reachable
    saddle_index: int | None
    attempts: tuple[SaddleAttempt, ...]
    path: DeformationPath | None
    relaxation: RelaxationResult | None = None


@dataclass(frozen=True)
class SnappabilityReport:
    entries: tuple[StableIndexReport, ...]
    framework_index: float


class _Tracker:
    """Gauss-Newton machinery for one framework's length constraints."""

    def __init__(self, framework: Framework, config: SnapConfig):
        self.fw = framework
        self.cfg = config
        self.chart = gauge_chart(framework)
        self.dedges = framework.deformable_edges
        self.ei = framework.edge_index[self.dedges]

    def lengths_of(self, x):
        coords = self.chart.embed(x)
        d = coords[self.ei[:, 0]] - coords[self.ei[:, 1]]
        return np.linalg.norm(d, axis=1)

    def residual(self, x, l):
        return self.lengths_of(x) - l

    def jac(self, x):
        coords = self.chart.embed(x)
        return constraint_jacobian(self.fw, coords, self.chart)

    def correct(self, x, l, max_iters=None, sharpen=False, pin_direction=None):
        """Gauss-Newton onto the constraint set at prescribed lengths l.

        With sharpen=True iterates past the tolerance until progress stalls,
        which matters at fold targets where convergence is only linear.
        pin_direction adds the hyperplane condition dx . v = 0, the classic
        arclength-style corrector that keeps iterates on a chosen branch near
        a fold instead of shooting along the near-null direction.
        """
        cfg = self.cfg
        iters = max_iters or cfg.max_corrector
        cap = 0.5 * (1.0 + float(np.abs(x).max()))
        best_x, best_r = x, float(np.abs(self.residual(x, l)).max())
        stall = 0
        for _ in range(iters):
            r = self.residual(x, l)
            J = self.jac(x)
            if pin_direction is not None:
                w = max(1.0, float(np.abs(J).max()))
                J = np.vstack([J, w * pin_direction[None, :]])
                r = np.append(r, 0.0)
            dx, *_ = np.linalg.lstsq(J, r, rcond=None)
            if not np.isfinite(dx).all():
                break
            n = float(np.linalg.norm(dx))
            if n > cap:
                dx = dx * (cap / n)
            x = x - dx
            rn = float(np.abs(self.residual(x, l)).max())
            if rn < best_r:
                best_x, best_r = x, rn
                stall = 0
            else:
                stall += 1
            if best_r <= cfg.corrector_tol and not sharpen:
                break
            if stall >= 2:
                break
        return best_x, best_r

    def tangent(self, x, l, dl):
        # lengths_of(x(t)) = l0 + t dl differentiates to J dx/dt = dl
        J = self.jac(x)
        dx, *_ = np.linalg.lstsq(J, dl, rcond=None)
        return dx

    def fold_polish(self, x, t, l0, dl):
        """Newton on the extended turning-point system (x, t, v).

        Equations: lengths match, rigidity * v = 0, |v|^2 = 1. Regular at a
        simple fold, so the flagged realization is singular to machine
        precision.
        """
        J = self.jac(x)
        _, sv, vt = np.linalg.svd(J)
        v = vt[-1]
        z = np.concatenate([x, [t], v])
        f = x.size
        best_z, best_r = z.copy(), np.inf
        for _ in range(40):
            xc, tc, vc = z[:f], z[f], z[f + 1:]
            l = l0 + tc * dl
            r1 = self.residual(xc, l)
            Jc = self.jac(xc)
            r2 = Jc @ vc
            r3 = vc @ vc - 1.0
            r = np.concatenate([r1, r2, [r3]])
            rn = float(np.linalg.norm(r))
            if rn < best_r:
                best_z, best_r = z.copy(), rn
            if rn <= 1e-13:
                break
            # rows: [J, -dl, 0], [dJv/dx, 0, J], [0, 0, 2v]
            Hv = self._rigidity_dirdiff(xc, vc)
            top = np.hstack([Jc, -dl[:, None], np.zeros((r1.size, f))])
            mid = np.hstack([Hv, np.zeros((r2.size, 1)), Jc])
            bot = np.concatenate([np.zeros(f + 1), 2 * vc])[None, :]
            A = np.vstack([top, mid, bot])
            dz, *_ = np.linalg.lstsq(A, r, rcond=None)
            if not np.isfinite(dz).all():
                break
            z = z - dz
        xc, tc = best_z[:f], float(best_z[f])
        return xc, tc

    def _rigidity_dirdiff(self, x, v, eps=1e-7):
        scale = max(1.0, float(np.abs(x).max()))
        h = eps * scale
        return (self.jac(x + h * v) - self.jac(x - h * v)) / (2 * h)

    def singular_evidence(self, x, t) -> SingularSample:
        J = self.jac(x)
        u, sv, _ = np.linalg.svd(J)
        stress = u[:, -1]
        stress_full = np.zeros(self.fw.num_edges)
        stress_full[self.dedges] = stress
        realization = build_realization(self.fw, self.chart.embed(x))
        return SingularSample(
            t=float(t),
            realization=realization,
            sigma_min=float(sv[-1]),
            stress=stress_full,
            stress_residual=float(np.linalg.norm(stress @ J)),
        )


def _sample(framework: Framework, tracker: _Tracker, x, t) -> PathSample:
    realization = build_realization(framework, tracker.chart.embed(x))
    l = edge_lengths(framework, realization)
    U = total_energy(framework, l).total
    return PathSample(
        t=float(t),
        realization=realization,
        lengths=l,
        energy=U,
        density=energy_density(framework, U),
    )


def track_segment(framework: Framework, start: Realization, target_lengths,
                  steps: int = 200, mode: str = FORWARD,
                  start_lengths=None, branch_hint=None,
                  config: SnapConfig | None = None) -> DeformationPath:
    """Continue a realization along the straight segment of edge lengths.

    The prescribed lengths interpolate from the start realization's lengths
    to target_lengths over t in [0,1]; each accepted grid sample satisfies
    the constraints to corrector tolerance. Forward mode additionally guards
    per-bar monotone deformation; continue mode departs from a singular start
    onto the far-side branch selected by branch_hint.
    """
    config = config or SnapConfig(steps=steps)
    tracker = _Tracker(framework, config)
    target = np.asarray(target_lengths, dtype=float)
    l_start_actual = edge_lengths(framework, start)
    if start_lengths is not None:
        given = np.asarray(start_lengths, dtype=float)
        if np.abs(given - l_start_actual).max() > 1e-6 * max(1.0, given.max()):
            raise StartMismatch(
                "start realization's edge lengths do not match the segment origin"
            )
    if target.shape != (framework.num_edges,):
        raise StartMismatch(
            f"expected {framework.num_edges} target lengths, got {target.shape}"
        )
    fixed = ~framework.deformable
    if np.any(np.abs(target[fixed] - l_start_actual[fixed]) > 1e-9 * max(1.0, target.max())):
        raise StartMismatch("target prescribes a new length for a pinned-pinned bar")

    dedges = framework.deformable_edges
    l0 = l_start_actual[dedges]
    l1 = target[dedges]
    dl = l1 - l0
    L = framework.rest_lengths[dedges]

    x = tracker.chart.extract(start)
    grid = np.linspace(0.0, 1.0, max(steps, 1) + 1)
    samples = [_sample(framework, tracker, x, 0.0)]
    status = REACHED_TARGET
    boundary = None

    # monotone |l(t) - L| per bar is a property of the prescribed segment
    def monotone_between(ta, tb):
        da = np.abs(l0 + ta * dl - L)
        db = np.abs(l0 + tb * dl - L)
        return bool(np.all(db >= da - 1e-12 * max(1.0, L.max())))

    # a shaky start (saddles always, undeformed realizations sometimes) is a
    # double point: two real branches emanate and the corrector alone picks
    # one by noise, so depart with an explicit kick along the null direction
    J = tracker.jac(x)
    u, sv, vt = np.linalg.svd(J)
    start_singular = sv.size > 0 and sv[-1] <= 1e-6 * max(sv[0], 1.0)
    if start_singular:
        v = vt[-1]
        if branch_hint is not None:
            hint = np.asarray(branch_hint, dtype=float)
            if hint.shape == x.shape and abs(hint @ v) > 0:
                v = v if hint @ v >= 0 else -v
        elif v[np.argmax(np.abs(v))] < 0:
            v = -v
        t0 = min(grid[1], config.max_substep)
        scale = max(1.0, float(np.abs(x).max()))
        # quadratic fold model: lengths(x + s v) ~ l0 + (s^2/2) kappa, so the
        # branch at the first node sits near s = sqrt(2 u.dl t0 / u.kappa)
        kappa = tracker._rigidity_dirdiff(x, v) @ v
        ul = u[:, -1]
        num, den = ul @ (dl * t0), ul @ kappa
        kicks = []
        if den != 0 and num / den > 0:
            s_est = float(np.sqrt(2 * num / den))
            kicks += [s_est, 0.7 * s_est, 1.5 * s_est, 0.4 * s_est]
        kicks += [f * config.kick_scale * scale for f in (1.0, 3.0, 10.0, 30.0, 100.0)]
        kicked = None
        for s in kicks:
            cand = x + s * v
            xc, r = tracker.correct(cand, l0 + t0 * dl, max_iters=40,
                                    pin_direction=v)
            if r > config.corrector_tol:
                xc, r = tracker.correct(xc, l0 + t0 * dl, max_iters=20)
            if r <= config.corrector_tol and (xc - x) @ v > 0:
                kicked = xc
                break
        if kicked is None:
            return DeformationPath(mode=mode, status=CORRECTOR_DIVERGED,
                                   samples=tuple(samples), start_lengths=l_start_actual,
                                   target_lengths=target)
        x = kicked
        t_cur = t0
    else:
        t_cur = 0.0
    start_idx = 1
    for k in range(start_idx, grid.size):
        t_goal = grid[k]
        if mode == FORWARD and not monotone_between(t_cur, t_goal):
            status = MONOTONICITY_VIOLATED
            break
        reached, x, t_cur = _advance(tracker, x, t_cur, t_goal, l0, dl, config)
        if not reached:
            # a corrector that stalls under ever finer substeps signals a fold;
            # polish the turning point exactly and verify it is truly singular
            xf, tf = tracker.fold_polish(x, t_cur, l0, dl)
            fold_res = float(np.abs(tracker.residual(xf, l0 + tf * dl)).max())
            evidence = tracker.singular_evidence(xf, tf)
            plausible_t = t_cur - 0.1 <= tf <= min(1.0, t_goal) + 0.1
            if (evidence.sigma_min <= config.tol_singular
                    and fold_res <= 1e-7 and plausible_t):
                boundary = evidence
                samples.append(_sample(framework, tracker, xf, tf))
                status = BOUNDARY_OF_REALITY
            else:
                status = CORRECTOR_DIVERGED
            break
        samples.append(_sample(framework, tracker, x, t_goal))

    if status == REACHED_TARGET:
        final = samples[-1]
        resid = np.abs(final.lengths[dedges] - l1).max()
        if final.t < 1.0 or resid > config.target_tol:
            status = CORRECTOR_DIVERGED
    return DeformationPath(
        mode=mode,
        status=status,
        samples=tuple(samples),
        start_lengths=l_start_actual,
        target_lengths=target,
        boundary=boundary,
    )


def _advance(tracker: _Tracker, x, t_cur, t_goal, l0, dl, config: SnapConfig):
    """March from t_cur to t_goal with adaptive bisection of the substep."""
    h = min(t_goal - t_cur, config.max_substep)
    while t_cur < t_goal - 1e-15:
        h = min(h, t_goal - t_cur, config.max_substep)
        if h < config.min_substep:
            return False, x, t_cur
        t_try = t_cur + h
        l_cur = l0 + t_cur * dl
        l_try = l0 + t_try * dl
        step = tracker.tangent(x, l_cur, dl) * h
        pred = x + step
        final_node = abs(t_try - 1.0) < 1e-15
        xc, r = tracker.correct(
            pred, l_try,
            max_iters=60 if final_node else config.max_corrector,
            sharpen=final_node,
        )
        # a corrector that wanders far from the prediction hopped branches
        drift_cap = max(4.0 * float(np.linalg.norm(step)), 0.05 * (1.0 + float(np.abs(x).max())))
        drifted = float(np.linalg.norm(xc - pred)) > drift_cap
        if (r <= config.corrector_tol or (final_node and r <= config.target_tol)) \
                and not drifted:
            x, t_cur = xc, t_try
            if h < (t_goal - t_cur):
                h *= 2.0
        else:
            h *= 0.5
    return True, x, t_cur


def detect_reality_boundary(path: DeformationPath) -> SingularSample | None:
    """The singular sample where a tracked branch left the real locus, if any.

    Paths that reach their target never report a boundary even when the
    target itself is shaky (every minimal snap ends at a shaky realization).
    """
    if path.status == BOUNDARY_OF_REALITY:
        return path.boundary
    return None


def _candidate_order(catalog: RealizationCatalog):
    order = []
    for i, p in enumerate(catalog.unstable):
        degenerate = p.classification == DEGENERATE_DEFORMED
        order.append((degenerate, p.energy, tuple(p.free_coordinates), i))
    return [i for *_, i in sorted(order)]


def _branch_hints(framework: Framework, realization: Realization,
                  config: SnapConfig):
    """Initial branch choices out of a start realization.

    A regular start has a unique branch (no hint needed); a shaky start is a
    double point with two real branches, both of which count for
    reachability, so both null-direction signs are tried.
    """
    tracker = _Tracker(framework, config)
    x = tracker.chart.extract(realization)
    _, sv, vt = np.linalg.svd(tracker.jac(x))
    if sv.size and sv[-1] <= 1e-6 * max(sv[0], 1.0):
        v = vt[-1]
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        return [v, -v]
    return [None]


def snappability_index(framework: Framework, catalog: RealizationCatalog,
                       stable, config: SnapConfig | None = None,
                       solver_config: SolverConfig | None = None) -> StableIndexReport:
    """Minimal energy-density barrier out of one stable realization.

    Saddles are visited by ascending energy; ones at or below the start
    energy cannot gate an escape and are skipped; the first whose segment
    deformation reaches the saddle realization sets the index. If none does,
    the index is infinite.
    """
    config = config or SnapConfig()
    solver_config = solver_config or SolverConfig()
    if isinstance(stable, CriticalPoint):
        stable_index = next(
            i for i, p in enumerate(catalog.stable)
            if np.array_equal(p.free_coordinates, stable.free_coordinates)
        )
        point = stable
    else:
        stable_index = int(stable)
        point = catalog.stable[stable_index]

    AL = framework.material.area * framework.total_rest_length
    tol_e = solver_config.tol_energy(framework)
    hints = _branch_hints(framework, point.realization, config)
    attempts: list[SaddleAttempt] = []
    for i in _candidate_order(catalog):
        saddle = catalog.unstable[i]
        if saddle.energy <= point.energy + tol_e:
            attempts.append(SaddleAttempt(i, ENERGY_BELOW_START))
            continue
        accepted = None
        for hint in hints:
            path = track_segment(framework, point.realization, saddle.lengths,
                                 steps=config.steps, mode=FORWARD,
                                 branch_hint=hint, config=config)
            if path.status == REACHED_TARGET and congruent_mod_se(
                framework, path.terminal, saddle.realization, config.congruence_tol
            ):
                accepted = path
                attempts.append(SaddleAttempt(i, ACCEPTED, path.status, path))
                break
            attempts.append(SaddleAttempt(i, UNREACHABLE, path.status, path))
        if accepted is not None:
            relaxation = None
            if config.relax_after_accept and saddle.classification == SADDLE:
                relaxation = relax(framework, saddle, basin_hint=point.realization,
                                   config=config, solver_config=solver_config)
            return StableIndexReport(
                stable_index=stable_index,
                value=abs(saddle.energy - point.energy) / AL,
                saddle_index=i,
                attempts=tuple(attempts),
                path=accepted,
                relaxation=relaxation,
            )
    return StableIndexReport(
        stable_index=stable_index,
        value=float("inf"),
        saddle_index=None,
        attempts=tuple(attempts),
        path=None,
    )


def snappability_report(framework: Framework, catalog: RealizationCatalog,
                        config: SnapConfig | None = None,
                        solver_config: SolverConfig | None = None) -> SnappabilityReport:
    """Indices for every stable realization plus the framework-level index."""
    entries = tuple(
        snappability_index(framework, catalog, i, config, solver_config)
        for i in range(len(catalog.stable))
    )
    return SnappabilityReport(
        entries=entries,
        framework_index=framework_snappability(framework, catalog, entries=entries),
    )


def framework_snappability(framework: Framework, catalog: RealizationCatalog,
                           config: SnapConfig | None = None,
                           solver_config: SolverConfig | None = None,
                           entries=None) -> float:
    """Minimum index over the undeformed stable realizations."""
    undeformed = [i for i, p in enumerate(catalog.stable)
                  if p.classification == STABLE_UNDEFORMED]
    if not undeformed:
        raise NoUndeformedRealization(
            "no undeformed stable realization; the intrinsic metric admits none"
        )
    if entries is None:
        entries = [snappability_index(framework, catalog, i, config, solver_config)
                   for i in undeformed]
    else:
        entries = [e for e in entries if e.stable_index in undeformed]
    return min(e.value for e in entries)


def _descent_direction(framework, chart, saddle: CriticalPoint, basin_hint):
    H = energy_hessian(framework, saddle.realization, chart)
    w, V = np.linalg.eigh(H)
    if w[0] >= 0:
        raise NotASaddle("no negative Hessian eigenvalue at the given point")
    v = V[:, 0]
    x = chart.extract(saddle.realization)
    if basin_hint is not None:
        hx = chart.extract(basin_hint) if isinstance(basin_hint, Realization) \
            else np.asarray(basin_hint, dtype=float)
        away = x - hx
        if abs(away @ v) > 0:
            v = v if away @ v >= 0 else -v
    elif v[np.argmax(np.abs(v))] < 0:
        v = -v
    return x, v


def relax(framework: Framework, saddle: CriticalPoint, basin_hint=None,
          config: SnapConfig | None = None,
          solver_config: SolverConfig | None = None) -> RelaxationResult:
    """Let the framework fall from a saddle; report both relaxation views.

    Gradient flow descends the energy in free coordinates to the nearest
    stable realization (undeformed, or deformed and then necessarily shaky).
    Segment continuation instead follows the straight length-space segment
    back toward the rest lengths and may stop at the boundary of reality.
    """
    config = config or SnapConfig()
    solver_config = solver_config or SolverConfig()
    chart = gauge_chart(framework)
    x0, v = _descent_direction(framework, chart, saddle, basin_hint)
    scale = max(1.0, float(np.abs(x0).max()))
    x = _descend(framework, chart, x0 + config.kick_scale * scale * v)
    realization = build_realization(framework, chart.embed(x))
    profile = total_energy(framework, realization)
    stress = self_stress(framework, realization)
    eigs = np.linalg.eigvalsh(energy_hessian(framework, realization, chart))
    tol_e = solver_config.tol_energy(framework)
    state = RelaxedState(
        realization=realization,
        classification="Undeformed" if profile.total < tol_e else "DeformedShaky",
        energy=profile.total,
        stress_norm=float(np.linalg.norm(stress.omega)),
        stress_residual=stress.residual,
        min_abs_eigenvalue=float(np.abs(eigs).min()) if eigs.size else 0.0,
    )
    continuation = track_segment(
        framework, saddle.realization, framework.rest_lengths,
        steps=config.steps, mode=CONTINUE,
        branch_hint=v, config=config,
    )
    return RelaxationResult(gradient_flow=state, continuation=continuation)


def _descend(framework, chart, x, tol=1e-9, max_iters=50_000):
    """Energy descent with backtracking, finished by guarded Newton."""
    def U(z):
        return total_energy(framework, Realization(chart.embed(z))).total

    def grad(z):
        return energy_gradient(framework, Realization(chart.embed(z)), chart)

    u = U(x)
    g = grad(x)
    alpha = 1.0
    for _ in range(max_iters):
        gnorm = np.linalg.norm(g)
        if gnorm <= tol:
            break
        # guarded Newton once inside a convex basin
        H = energy_hessian(framework, Realization(chart.embed(x)), chart)
        newton_ok = False
        if np.all(np.linalg.eigvalsh(H) > 0):
            step = np.linalg.solve(H, g)
            xn = x - step
            un = U(xn)
            if un <= u + 1e-12:
                x, u, g = xn, un, grad(xn)
                newton_ok = True
        if newton_ok:
            continue
        while alpha > 1e-18:
            xn = x - alpha * g
            un = U(xn)
            if un < u - 0.5 * alpha * gnorm ** 2:
                break
            alpha *= 0.5
        x, u, g = xn, un, grad(xn)
        alpha = min(alpha * 2.0, 1e6)
    return x

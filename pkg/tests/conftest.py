import csv
from pathlib import Path

import numpy as np
import pytest

from framesnap import (
    Realization,
    SolverConfig,
    build_catalog,
    build_framework,
    total_energy,
)
from framesnap.energy import energy_gradient
from framesnap.framework import gauge_chart

DATA = Path(__file__).parent / "data"

TRIANGLE_EDGES = [(1, 2, 10.0), (1, 3, 7.0), (2, 3, 4.0)]
MANIPULATOR_EDGES = [(1, 4, 4.0), (2, 5, 5.0), (3, 6, 3.0),
                     (4, 5, 3.0), (4, 6, 1.0), (5, 6, 2.0)]
MANIPULATOR_PINS = {1: (0.0, 0.0), 2: (3.0, 0.0), 3: (2.0, 1.0)}

# reference realizations of the three-legged frame, 4 decimals
BLUE6 = [(0.8876, 3.9002), (-1.5278, 2.1210), (0.0824, 3.3071)]
CYAN6 = [(2.0771, 3.4184), (4.8072, 4.6619), (2.9871, 3.8329)]
MAGENTA6 = [(2.9116, -2.4707), (0.3581, -3.8446), (1.8691, -2.2512)]
GREEN6 = [(3.2050, 2.5883), (1.4895, 4.8801), (3.1261, 3.6410)]


@pytest.fixture(scope="session")
def triangle_unpinned():
    return build_framework(2, 3, TRIANGLE_EDGES)


@pytest.fixture(scope="session")
def triangle_pinned():
    return build_framework(2, 3, TRIANGLE_EDGES, pins={1: (0, 0), 2: (10, 0)})


@pytest.fixture(scope="session")
def manipulator():
    return build_framework(2, 6, MANIPULATOR_EDGES, pins=MANIPULATOR_PINS)


@pytest.fixture(scope="session")
def unpinned_catalog(triangle_unpinned):
    return build_catalog(triangle_unpinned, SolverConfig(backend="total-degree", seed=3))


@pytest.fixture(scope="session")
def pinned_catalog(triangle_pinned):
    return build_catalog(triangle_pinned, SolverConfig(backend="total-degree", seed=3))


MANIPULATOR_CONFIG = SolverConfig(backend="multistart", seed=7, starts=60_000,
                                  chunk_size=8192)


@pytest.fixture(scope="session")
def manipulator_catalog_timed(manipulator):
    import time

    t0 = time.perf_counter()
    catalog = build_catalog(manipulator, MANIPULATOR_CONFIG)
    return catalog, time.perf_counter() - t0


@pytest.fixture(scope="session")
def manipulator_catalog(manipulator_catalog_timed):
    return manipulator_catalog_timed[0]


def manipulator_coords(free_pairs):
    """Full 6-knot coordinate array from the three free-knot pairs."""
    return np.array([MANIPULATOR_PINS[1], MANIPULATOR_PINS[2], MANIPULATOR_PINS[3]]
                    + [list(p) for p in free_pairs])


def unstable_table():
    """Tabulated unstable configurations: (coords (3,2) free knots, density)."""
    rows = []
    with open(DATA / "manipulator_unstable.csv", newline="") as fh:
        for rec in csv.DictReader(fh):
            coords = [(float(rec["k4_x"]), float(rec["k4_y"])),
                      (float(rec["k5_x"]), float(rec["k5_y"])),
                      (float(rec["k6_x"]), float(rec["k6_y"]))]
            rows.append((coords, float(rec["density"])))
    return rows


def fd_gradient(framework, realization, chart=None, step_scale=1e-6):
    """Central finite differences of the total energy in free coordinates."""
    chart = chart or gauge_chart(framework)
    x0 = chart.extract(realization)
    h = step_scale * max(1.0, float(np.abs(x0).max()))
    g = np.empty(x0.size)
    for i in range(x0.size):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        up = total_energy(framework, Realization(chart.embed(xp))).total
        um = total_energy(framework, Realization(chart.embed(xm))).total
        g[i] = (up - um) / (2 * h)
    return g


def fd_hessian(framework, realization, chart=None, step_scale=1e-6):
    """Central finite differences of the analytic gradient."""
    chart = chart or gauge_chart(framework)
    x0 = chart.extract(realization)
    h = step_scale * max(1.0, float(np.abs(x0).max()))
    H = np.empty((x0.size, x0.size))
    for i in range(x0.size):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        gp = energy_gradient(framework, Realization(chart.embed(xp)), chart)
        gm = energy_gradient(framework, Realization(chart.embed(xm)), chart)
        H[:, i] = (gp - gm) / (2 * h)
    return 0.5 * (H + H.T)


def random_realization(framework, rng, spread=1.0):
    """A valid random realization: pins kept, free knots jittered."""
    chart = gauge_chart(framework)
    base = np.array([3.0, 7.0, 2.0, 6.0, 1.0, 5.0, 4.0, 8.0] * 3)
    x = base[: chart.size] + rng.normal(scale=spread, size=chart.size)
    return Realization(chart.embed(x))

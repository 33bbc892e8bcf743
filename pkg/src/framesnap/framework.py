"""Bar-joint frameworks, realizations and gauge fixing.

A framework is a connected graph on knots K_1..K_s with a rest length per
edge, an optional set of pinned (grounded) knots and a uniform material.
Knot indices are 1-based throughout the public API, mirroring the usual
K_1..K_s naming; edges are keyed by (i, j) with i < j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadPinDimension,
    CollinearKnots,
    DisconnectedGraph,
    DuplicateEdge,
    InsufficientKnots,
    InvalidRealization,
    NonPositiveLength,
)


@dataclass(frozen=True)
class Material:
    """Uniform bar material: elastic modulus and cross-section area."""

    modulus: float = 1.0
    area: float = 1.0

    def __post_init__(self):
        if self.modulus <= 0 or self.area <= 0:
            raise NonPositiveLength("material constants must be positive")


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Framework:
    """Immutable framework value. Build through :func:`build_framework`."""

    dimension: int
    knots: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]          # 1-based (i, j), i < j, canonical order
    rest_lengths: np.ndarray                    # (b,) aligned with edges
    pins: dict[int, np.ndarray]                 # 1-based knot index -> coordinates
    material: Material = field(default_factory=Material)

    # derived, filled in __post_init__
    edge_index: np.ndarray = field(init=False, repr=False)   # (b, 2) 0-based
    deformable: np.ndarray = field(init=False, repr=False)   # (b,) bool, False = pinned-pinned

    def __post_init__(self):
        object.__setattr__(self, "rest_lengths", _readonly(self.rest_lengths))
        ei = np.array([(i - 1, j - 1) for i, j in self.edges], dtype=int).reshape(-1, 2)
        ei.flags.writeable = False
        object.__setattr__(self, "edge_index", ei)
        pinned = set(self.pins)
        deform = np.array([not (i in pinned and j in pinned) for i, j in self.edges], dtype=bool)
        deform.flags.writeable = False
        object.__setattr__(self, "deformable", deform)

    @property
    def num_knots(self) -> int:
        return len(self.knots)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def total_rest_length(self) -> float:
        """Sum of rest lengths over all edges (pinned-pinned bars included)."""
        return float(self.rest_lengths.sum())

    @property
    def deformable_edges(self) -> np.ndarray:
        """Indices into ``edges`` of the bars that can actually deform."""
        return np.flatnonzero(self.deformable)

    def is_pinned(self, knot: int) -> bool:
        return knot in self.pins

    def pin_array(self) -> tuple[np.ndarray, np.ndarray]:
        """(pinned 0-based indices, stacked pin coordinates)."""
        idx = np.array(sorted(k - 1 for k in self.pins), dtype=int)
        if idx.size == 0:
            return idx, np.zeros((0, self.dimension))
        coords = np.vstack([self.pins[k + 1] for k in idx])
        return idx, coords


@dataclass(frozen=True)
class Realization:
    """Coordinates of every knot; validity is relative to a framework."""

    coordinates: np.ndarray  # (s, n)

    def __post_init__(self):
        object.__setattr__(self, "coordinates", _readonly(self.coordinates))

    def knot(self, i: int) -> np.ndarray:
        """Coordinates of knot K_i (1-based)."""
        return self.coordinates[i - 1]


@dataclass(frozen=True)
class GaugeChart:
    """Which scalar coordinates remain free after grounding the isometry group.

    For pinned frameworks these are exactly the coordinates of unpinned knots.
    For unpinned frameworks knot 1 sits at the origin, knot 2 on the positive
    first axis and (in 3D) knot 3 in the upper half of the 1-2 plane.
    """

    dimension: int
    free: tuple[tuple[int, int], ...]   # (0-based knot, axis) per free scalar
    base: np.ndarray                    # (s, n) pins / gauge zeros, zeros elsewhere
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "base", _readonly(self.base))

    @property
    def size(self) -> int:
        return len(self.free)

    def embed(self, x: np.ndarray) -> np.ndarray:
        """Free vector -> full coordinate array (batched if x is 2-D)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xb = np.atleast_2d(x)
        coords = np.broadcast_to(self.base, (xb.shape[0],) + self.base.shape).copy()
        for col, (k, a) in enumerate(self.free):
            coords[:, k, a] = xb[:, col]
        return coords[0] if single else coords

    def extract(self, realization: Realization | np.ndarray) -> np.ndarray:
        coords = realization.coordinates if isinstance(realization, Realization) else np.asarray(realization)
        return np.array([coords[k, a] for k, a in self.free], dtype=float)


_AXES = "xyz"


def build_framework(dimension, knots, edges, pins=None, material=None) -> Framework:
    """Validate and assemble a framework.

    Args:
        dimension: ambient dimension, 2 or 3.
        knots: iterable of knot names, or an integer count (names K1..Ks).
        edges: iterable of (i, j, rest_length) with 1-based knot indices.
        pins: optional {knot index: coordinate sequence}.
        material: optional Material.
    """
    if dimension not in (2, 3):
        raise BadPinDimension(f"ambient dimension must be 2 or 3, got {dimension}")
    if isinstance(knots, int):
        knots = tuple(f"K{i}" for i in range(1, knots + 1))
    else:
        knots = tuple(str(k) for k in knots)
    s = len(knots)
    if s < 1:
        raise InsufficientKnots("a framework needs at least one knot")
    if len(set(knots)) != s:
        raise DuplicateEdge(f"duplicate knot names in {knots}")

    canon = []
    seen = set()
    for i, j, length in edges:
        if i == j:
            raise DuplicateEdge(f"self-loop at knot {i}")
        if not (1 <= i <= s and 1 <= j <= s):
            raise DuplicateEdge(f"edge ({i},{j}) references an unknown knot")
        if i > j:
            i, j = j, i
        if (i, j) in seen:
            raise DuplicateEdge(f"duplicate edge ({i},{j})")
        seen.add((i, j))
        length = float(length)
        if not length > 0:
            raise NonPositiveLength(f"edge ({i},{j}) has rest length {length}")
        canon.append((i, j, length))
    if not canon:
        raise NonPositiveLength("a framework needs at least one edge")
    canon.sort(key=lambda e: (e[0], e[1]))
    edge_keys = tuple((i, j) for i, j, _ in canon)
    lengths = np.array([L for _, _, L in canon])

    # connectivity over the knot graph
    parent = list(range(s))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edge_keys:
        parent[find(i - 1)] = find(j - 1)
    if len({find(v) for v in range(s)}) != 1:
        raise DisconnectedGraph("framework graph is not connected")

    pin_map = {}
    for k, coords in (pins or {}).items():
        k = int(k)
        if not (1 <= k <= s):
            raise BadPinDimension(f"pin references unknown knot {k}")
        vec = np.asarray(coords, dtype=float).reshape(-1)
        if vec.shape != (dimension,):
            raise BadPinDimension(
                f"pin for knot {k} has {vec.size} coordinates, expected {dimension}"
            )
        pin_map[k] = _readonly(vec)

    return Framework(
        dimension=dimension,
        knots=knots,
        edges=edge_keys,
        rest_lengths=lengths,
        pins=pin_map,
        material=material or Material(),
    )


def gauge_chart(framework: Framework) -> GaugeChart:
    """Deterministic chart of free scalar coordinates for a framework."""
    n = framework.dimension
    s = framework.num_knots
    base = np.zeros((s, n))
    free: list[tuple[int, int]] = []

    if framework.pins:
        for k, vec in framework.pins.items():
            base[k - 1] = vec
        for k in range(s):
            if (k + 1) not in framework.pins:
                free.extend((k, a) for a in range(n))
    else:
        if (n == 2 and s < 2) or (n == 3 and s < 3):
            raise InsufficientKnots(
                f"an unpinned {n}D framework needs at least {n} knots to fix a frame"
            )
        # knot 1 at the origin, knot 2 on the positive first axis,
        # knot 3 (3D only) in the upper half of the first coordinate plane
        free.append((1, 0))
        if n == 3:
            free.extend([(2, 0), (2, 1)])
        for k in range(2 if n == 2 else 3, s):
            free.extend((k, a) for a in range(n))

    labels = tuple(f"{framework.knots[k]}_{_AXES[a]}" for k, a in free)
    return GaugeChart(dimension=n, free=tuple(free), base=base, labels=labels)


def build_realization(framework: Framework, coordinates) -> Realization:
    """Validate coordinates against the framework invariants."""
    coords = np.asarray(coordinates, dtype=float)
    if coords.shape != (framework.num_knots, framework.dimension):
        raise InvalidRealization(
            f"expected coordinate array of shape {(framework.num_knots, framework.dimension)},"
            f" got {coords.shape}"
        )
    for k, vec in framework.pins.items():
        if not np.array_equal(coords[k - 1], vec):
            raise InvalidRealization(f"knot {k} is pinned at {vec}, got {coords[k - 1]}")
    d = coords[framework.edge_index[:, 0]] - coords[framework.edge_index[:, 1]]
    if np.any(np.linalg.norm(d, axis=1) <= 0.0):
        raise InvalidRealization("adjacent knots coincide (zero edge length)")
    return Realization(coords)


def realization_from_free(framework: Framework, chart: GaugeChart, x) -> Realization:
    return build_realization(framework, chart.embed(np.asarray(x, dtype=float)))


def edge_lengths(framework: Framework, realization: Realization) -> np.ndarray:
    """Stressed bar lengths in canonical edge order."""
    coords = realization.coordinates
    d = coords[framework.edge_index[:, 0]] - coords[framework.edge_index[:, 1]]
    return np.linalg.norm(d, axis=1)


def _rotation_to_positive_axis(v: np.ndarray) -> np.ndarray:
    """Direct 2D/3D rotation taking unit(v) to the first axis."""
    n = v.size
    r = np.linalg.norm(v)
    u = v / r
    if n == 2:
        c, s = u
        return np.array([[c, s], [-s, c]])
    # 3D: a Householder-free construction via two Givens rotations
    rot = np.eye(3)
    # rotate about axis 3 to kill component 2
    h = np.hypot(u[0], u[1])
    if h > 0:
        c, s = u[0] / h, u[1] / h
        g = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    else:
        g = np.eye(3)
    w = g @ u
    rot = g
    # rotate about axis 2 to kill component 3
    h2 = np.hypot(w[0], w[2])
    c, s = w[0] / h2, w[2] / h2
    g2 = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return g2 @ rot


def canonicalize(framework: Framework, realization: Realization) -> np.ndarray:
    """Map a realization to canonical gauge position (identity for pinned frameworks).

    Only direct isometries are applied, so mirror images stay distinct.
    """
    coords = np.array(realization.coordinates, dtype=float)
    if framework.pins:
        return coords
    n = framework.dimension
    coords -= coords[0]
    v = coords[1]
    if np.linalg.norm(v) == 0:
        raise InvalidRealization("knots 1 and 2 coincide; no canonical frame")
    rot = _rotation_to_positive_axis(v)
    coords = coords @ rot.T
    if n == 3:
        w = coords[2]
        h = np.hypot(w[1], w[2])
        if h <= 1e-12 * max(1.0, np.abs(coords).max()):
            raise CollinearKnots(
                "first three knots are collinear; canonical 3D frame undefined"
            )
        c, s = w[1] / h, w[2] / h
        spin = np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])
        coords = coords @ spin.T
    return coords


def congruent_mod_se(framework, r1: Realization, r2: Realization, tolerance=1e-9) -> bool:
    """True iff a direct isometry maps r1 onto r2 within coordinate tolerance."""
    c1 = canonicalize(framework, r1)
    c2 = canonicalize(framework, r2)
    return bool(np.max(np.abs(c1 - c2)) <= tolerance)

"""
Node graph, combination weights and the per-iteration random link matrix.

Convention: ``weights[k, l]`` is the weight node k applies to what it receives
from node l. Node indices are 0-based in memory and 1-based in files.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .channel import (
    DEFAULT_TABLE,
    FadingModel,
    Normalization,
    VarianceTable,
    link_moments,
    lookup_variance_by_distance,
)


class TopologyError(ValueError):
    pass


def _is_connected(neighbors) -> bool:
    seen = {0}
    queue = deque([0])
    while queue:
        k = queue.popleft()
        for l in neighbors[k]:
            if l not in seen:
                seen.add(l)
                queue.append(l)
    return len(seen) == len(neighbors)


@dataclass(frozen=True)
class Topology:
    """Undirected connected graph with mandatory self-loops.

    ``neighbors[k]`` always contains ``k``. ``distances`` maps each ordered
    pair ``(k, l)``, ``l != k``, of neighbours to the link length in metres.
    """

    neighbors: tuple[frozenset, ...]
    distances: Mapping[tuple[int, int], float]
    positions: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.neighbors)
        if n < 1:
            raise TopologyError("topology needs at least one node")
        nbrs = tuple(frozenset(s) | {k} for k, s in enumerate(self.neighbors))
        object.__setattr__(self, "neighbors", nbrs)
        for k, s in enumerate(nbrs):
            for l in s:
                if not 0 <= l < n:
                    raise TopologyError(f"node {k + 1} lists unknown neighbour {l + 1}")
                if k not in nbrs[l]:
                    raise TopologyError(f"asymmetric edge ({k + 1}, {l + 1})")
                if l == k:
                    continue
                d = self.distances.get((k, l))
                if d is None or not d > 0:
                    raise TopologyError(f"missing or non-positive distance on link ({k + 1}, {l + 1})")
                if not math.isclose(d, self.distances.get((l, k), -1.0), rel_tol=1e-12):
                    raise TopologyError(f"link ({k + 1}, {l + 1}) has direction-dependent distance")
        if not _is_connected(nbrs):
            raise TopologyError("graph is not connected")

    @property
    def n_nodes(self) -> int:
        return len(self.neighbors)

    def degree(self, k: int) -> int:
        """Neighbourhood size including the node itself."""
        return len(self.neighbors[k])

    def links(self) -> list[tuple[int, int]]:
        """Ordered pairs ``(k, l)``, ``l != k``, sorted."""
        return sorted((k, l) for k, s in enumerate(self.neighbors) for l in s if l != k)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n_nodes, self.n_nodes), dtype=bool)
        for k, s in enumerate(self.neighbors):
            A[k, list(s)] = True
        return A

    def with_uniform_distance(self, distance: float) -> "Topology":
        """Same graph, every link set to ``distance`` metres."""
        return Topology(self.neighbors, {kl: float(distance) for kl in self.distances}, self.positions)


def generate_topology(n_nodes: int, radius: float, area: float, seed, max_tries: int = 1000) -> Topology:
    """Random geometric graph in a square of ``area`` m^2, redrawn until connected."""
    if n_nodes < 2:
        raise TopologyError("need at least two nodes")
    if not radius > 0 or not area > 0:
        raise TopologyError("radius and area must be positive")
    rng = np.random.default_rng(seed)
    side = math.sqrt(area)
    for _ in range(max_tries):
        pos = rng.uniform(0.0, side, size=(n_nodes, 2))
        dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
        adj = dist <= radius
        nbrs = tuple(frozenset(np.flatnonzero(adj[k]).tolist()) for k in range(n_nodes))
        if _is_connected(nbrs):
            d = {(k, l): float(dist[k, l]) for k in range(n_nodes) for l in nbrs[k] if l != k}
            return Topology(nbrs, d, pos)
    raise TopologyError(f"no connected graph after {max_tries} draws; increase the radius")


def load_topology(path: str | Path) -> Topology:
    """Read an adjacency file.

    One directed edge per line as ``k l distance_m`` (1-based); ``node k x y``
    lines give optional positions. ``#`` starts a comment. Self-loops are added
    whether or not they are listed.
    """
    edges: dict[tuple[int, int], float] = {}
    positions: dict[int, tuple[float, float]] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "node":
                if len(parts) != 4:
                    raise ValueError
                positions[int(parts[1]) - 1] = (float(parts[2]), float(parts[3]))
                continue
            if len(parts) != 3:
                raise ValueError
            k, l, d = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
        except ValueError:
            raise TopologyError(f"{path}:{lineno}: cannot parse {raw!r}") from None
        if k < 0 or l < 0:
            raise TopologyError(f"{path}:{lineno}: node indices are 1-based")
        if k != l:
            edges[(k, l)] = d
    nodes = {k for kl in edges for k in kl} | set(positions)
    if not nodes:
        raise TopologyError(f"{path}: no edges")
    n = max(nodes) + 1
    nbrs = [set() for _ in range(n)]
    for k, l in edges:
        nbrs[k].add(l)
    pos = None
    if positions:
        if set(positions) != set(range(n)):
            raise TopologyError(f"{path}: positions given for some nodes only")
        pos = np.array([positions[k] for k in range(n)])
    return Topology(tuple(frozenset(s) for s in nbrs), edges, pos)


def save_topology(topo: Topology, path: str | Path) -> None:
    lines = ["# k l distance_m (1-based, both directions listed)"]
    for k, l in topo.links():
        lines.append(f"{k + 1} {l + 1} {float(topo.distances[(k, l)])!r}")
    if topo.positions is not None:
        lines.append("# node k x y")
        for k, (x, y) in enumerate(topo.positions):
            lines.append(f"node {k + 1} {float(x)!r} {float(y)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class CombinationMatrix:
    weights: np.ndarray

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("combination matrix must be square")
        if np.any(W < 0):
            raise ValueError("combination weights must be non-negative")
        if not np.allclose(W.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("each row of the combination matrix must sum to one")
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    def support_of(self, topo: Topology) -> bool:
        return not np.any(self.weights[~topo.adjacency()])


def uniform_weights(topo: Topology) -> CombinationMatrix:
    """``c[k, l] = 1 / n_k`` over the neighbourhood of k (self included)."""
    W = np.zeros((topo.n_nodes, topo.n_nodes))
    for k, s in enumerate(topo.neighbors):
        W[k, sorted(s)] = 1.0 / len(s)
    return CombinationMatrix(W)


# ---------------------------------------------------------------------------
# fading assignment

FadingMap = Mapping[tuple[int, int], FadingModel]


def uniform_fading(topo: Topology, model: FadingModel) -> dict[tuple[int, int], FadingModel]:
    """Same fading statistics on every link."""
    return {kl: model for kl in topo.links()}


def fading_from_distances(
    topo: Topology,
    table: VarianceTable = DEFAULT_TABLE,
    normalization: Normalization = Normalization.UNIT_MEAN,
) -> dict[tuple[int, int], FadingModel]:
    """Per-link variance interpolated from the distance table.

    Links shorter than the first tabulated distance take its value; longer
    than the last are rejected.
    """
    dmin = table.distances[0]
    out = {}
    for kl in topo.links():
        d = max(topo.distances[kl], dmin)
        out[kl] = FadingModel(lookup_variance_by_distance(table, d, "linear"), normalization)
    return out


@dataclass(frozen=True)
class LinkArrays:
    """Flattened off-diagonal links of a combination matrix, for vectorised sampling."""

    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    mu_x: np.ndarray
    sd_x: np.ndarray
    diag: np.ndarray
    n_nodes: int

    @property
    def n_links(self) -> int:
        return len(self.rows)

    def gains(self, x: np.ndarray) -> np.ndarray:
        """Irradiance from standard normal draws ``x`` (last axis = link)."""
        return np.exp(2.0 * (self.mu_x + self.sd_x * x))

    def assemble(self, gains: np.ndarray) -> np.ndarray:
        """Link matrices ``(..., N, N)`` from per-link gains ``(..., L)``."""
        G = np.zeros(gains.shape[:-1] + (self.n_nodes, self.n_nodes))
        idx = np.arange(self.n_nodes)
        G[..., idx, idx] = self.diag
        G[..., self.rows, self.cols] = gains * self.weights
        return G


def compile_links(C: CombinationMatrix, fading: FadingMap) -> LinkArrays:
    W = C.weights
    N = W.shape[0]
    rows, cols = np.nonzero(W * (1 - np.eye(N)))
    mu, sd = [], []
    for k, l in zip(rows.tolist(), cols.tolist()):
        try:
            m = fading[(k, l)]
        except KeyError:
            raise KeyError(f"no fading model for link ({k + 1}, {l + 1})") from None
        mu.append(m.mu_x)
        sd.append(math.sqrt(m.sigma_x2))
    return LinkArrays(rows, cols, W[rows, cols], np.array(mu), np.array(sd), np.diag(W).copy(), N)


def sample_link_matrix(C: CombinationMatrix, fading: FadingMap, rng: np.random.Generator) -> np.ndarray:
    """One realisation of the link matrix: faded off-diagonal weights, exact diagonal.

    Gains on ``(k, l)`` and ``(l, k)`` are drawn independently.
    """
    links = compile_links(C, fading)
    return links.assemble(links.gains(rng.standard_normal(links.n_links)))


def link_gain_moments(C: CombinationMatrix, fading: FadingMap) -> tuple[np.ndarray, np.ndarray]:
    """Entrywise ``E[I]`` and ``E[I^2]`` (ones on the diagonal and off-support)."""
    N = C.n_nodes
    EI, EI2 = np.ones((N, N)), np.ones((N, N))
    rows, cols = np.nonzero(C.weights * (1 - np.eye(N)))
    for k, l in zip(rows.tolist(), cols.tolist()):
        EI[k, l], EI2[k, l] = link_moments(fading[(k, l)])
    return EI, EI2

"""
Random sensor placements and communication graphs.

Two graph models are supported: a random geometric graph (link iff the two
nodes are within ``radius``) and a symmetrized k-nearest-neighbour graph,
which keeps the neighbourhood size bounded as the network grows.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np


class TopologyError(RuntimeError):
    """A topology could not be generated or does not meet a requirement."""


@dataclass(frozen=True)
class TopologyConfig:
    """Parameters of the random topology model.

    `min_degree` is an additional regeneration constraint; set it to
    ``2 p + 1`` when the graph will be used with the trimmed ADMM.
    """

    n_nodes: int = 10
    region: float = 3.0
    kind: str = "geometric"
    radius: float = 1.5
    k: int = 10
    max_retries: int = 1000
    min_degree: int = 0

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError(f"n_nodes must be >= 1, got {self.n_nodes}")
        if not self.region > 0:
            raise ValueError(f"region must be > 0, got {self.region}")
        if self.kind == "geometric":
            if not self.radius > 0:
                raise ValueError(f"radius must be > 0, got {self.radius}")
        elif self.kind == "k_nearest":
            if not 1 <= self.k < max(self.n_nodes, 2):
                raise ValueError(f"k must satisfy 1 <= k < n_nodes, got k={self.k}, "
                                 f"n_nodes={self.n_nodes}")
        else:
            raise ValueError(f"unknown topology kind {self.kind!r}")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        if self.min_degree < 0:
            raise ValueError("min_degree must be >= 0")


@dataclass(frozen=True, eq=False)
class Topology:
    """Node coordinates plus a symmetric, loop-free neighbour structure."""

    positions: np.ndarray
    neighbors: tuple[tuple[int, ...], ...] = field(repr=False)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        nbrs = tuple(tuple(sorted(set(int(j) for j in row))) for row in self.neighbors)
        object.__setattr__(self, "neighbors", nbrs)
        n = len(pos)
        if len(nbrs) != n:
            raise ValueError(f"{len(nbrs)} neighbour lists for {n} nodes")
        for i, row in enumerate(nbrs):
            for j in row:
                if not 0 <= j < n:
                    raise ValueError(f"node {i} lists out-of-range neighbour {j}")
                if j == i:
                    raise ValueError(f"self-loop at node {i}")
                if i not in nbrs[j]:
                    raise ValueError(f"asymmetric link {i}->{j}")

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (self.neighbors == other.neighbors
                and np.array_equal(self.positions, other.positions))

    @property
    def n_nodes(self) -> int:
        return len(self.neighbors)

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.array([len(row) for row in self.neighbors], dtype=int)
        d.setflags(write=False)
        return d

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, row in enumerate(self.neighbors) for j in row if i < j]

    @property
    def n_edges(self) -> int:
        return int(self.degrees.sum()) // 2

    @cached_property
    def padded_neighbors(self) -> tuple[np.ndarray, np.ndarray]:
        """Neighbour indices as an (N, max degree) array plus a validity mask."""
        width = max(int(self.degrees.max(initial=0)), 1)
        idx = np.zeros((self.n_nodes, width), dtype=int)
        mask = np.zeros((self.n_nodes, width), dtype=bool)
        for i, row in enumerate(self.neighbors):
            idx[i, :len(row)] = row
            mask[i, :len(row)] = True
        idx.setflags(write=False)
        mask.setflags(write=False)
        return idx, mask

    @classmethod
    def from_edges(cls, positions, edges) -> Topology:
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        nbrs = [set() for _ in range(len(positions))]
        for i, j in edges:
            nbrs[int(i)].add(int(j))
            nbrs[int(j)].add(int(i))
        return cls(positions, tuple(tuple(s) for s in nbrs))

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "positions": self.positions.tolist(),
            "edges": [list(e) for e in self.edges()],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Topology:
        top = cls.from_edges(doc["positions"], doc["edges"])
        if "n_nodes" in doc and doc["n_nodes"] != top.n_nodes:
            raise ValueError("n_nodes does not match the positions array")
        return top

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> Topology:
        return cls.from_dict(json.loads(text))


class TrimReport(NamedTuple):
    ok: bool
    p: int
    violating: tuple[int, ...]


def is_connected(top: Topology) -> bool:
    """True iff breadth-first search from node 0 reaches every node."""
    n = top.n_nodes
    if n == 0:
        return False
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in top.neighbors[i]:
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def validate_for_trim(top: Topology, p: int) -> TrimReport:
    """Check that every node has more than ``2 p`` neighbours."""
    if p < 0:
        raise ValueError("p must be >= 0")
    bad = tuple(int(i) for i in np.flatnonzero(top.degrees <= 2 * p))
    return TrimReport(ok=not bad, p=p, violating=bad)


def _link_sets(config: TopologyConfig, pos: np.ndarray) -> list[set]:
    n = len(pos)
    d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1)
    nbrs = [set() for _ in range(n)]
    if config.kind == "geometric":
        ii, jj = np.nonzero(d2 <= config.radius ** 2)
        for i, j in zip(ii, jj):
            if i != j:
                nbrs[i].add(int(j))
    else:
        np.fill_diagonal(d2, np.inf)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :config.k]
        for i in range(n):
            for j in nearest[i]:
                nbrs[i].add(int(j))
                nbrs[int(j)].add(i)
    return nbrs


def generate(config: TopologyConfig, rng: np.random.Generator) -> Topology:
    """Draw a random connected topology.

    Node positions are i.i.d. uniform on ``[0, region]^2``.  The placement is
    redrawn until the graph is connected and every degree is at least
    ``config.min_degree``.

    Raises
    ------
    TopologyError
        If no acceptable placement was found within ``config.max_retries``.
    """
    failures = {"connected": 0, "min_degree": 0}
    for _ in range(config.max_retries):
        pos = rng.uniform(0.0, config.region, size=(config.n_nodes, 2))
        top = Topology(pos, tuple(tuple(s) for s in _link_sets(config, pos)))
        if not is_connected(top):
            failures["connected"] += 1
            continue
        if config.n_nodes > 1 and top.degrees.min() < config.min_degree:
            failures["min_degree"] += 1
            continue
        return top
    failed = [f"{name} ({count}x)" for name, count in failures.items() if count]
    raise TopologyError(
        f"no topology satisfying the constraints after {config.max_retries} draws; "
        f"failed constraints: {', '.join(failed)}")

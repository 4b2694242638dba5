"""Graph construction and operator views (Laplacians, incidence, edge Laplacian)."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ..core.errors import DataError, GraphError
from ..core.models import Operator

LOGGER = logging.getLogger(__name__)

ER_MAX_ATTEMPTS = 1000
_NODES_DIRECTIVE = "# nodes"


@dataclass(frozen=True, eq=True)
class Graph:
    """Undirected weighted graph with canonical edges ``(i, j, w)``, ``i < j``, sorted.

    Operator views are sparse and computed lazily; instances are immutable.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([w for _, _, w in self.edges], dtype=float)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        if not self.edges:
            return sp.csr_matrix((self.n, self.n))
        rows = np.array([i for i, _, _ in self.edges])
        cols = np.array([j for _, j, _ in self.edges])
        data = self.weights
        adj = sp.coo_matrix(
            (np.concatenate([data, data]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
            shape=(self.n, self.n),
        )
        return adj.tocsr()

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(self.degrees) - self.adjacency).tocsr()

    @cached_property
    def _inv_sqrt_degrees(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            scale = 1.0 / np.sqrt(self.degrees)
        scale[~np.isfinite(scale)] = 0.0
        return scale

    @cached_property
    def normalized_laplacian(self) -> sp.csr_matrix:
        d = sp.diags(self._inv_sqrt_degrees)
        return (sp.eye(self.n) - d @ self.adjacency @ d).tocsr()

    @cached_property
    def spectral_radius(self) -> float:
        if self.m == 0:
            return 0.0
        return float(np.linalg.eigvalsh(self.laplacian.toarray())[-1])

    @cached_property
    def scaled_laplacian(self) -> sp.csr_matrix:
        if self.m == 0:
            return self.laplacian
        return (self.laplacian / self.spectral_radius).tocsr()

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Oriented weighted incidence: +sqrt(w) at i, -sqrt(w) at j for edge (i, j, w)."""
        if not self.edges:
            return sp.csr_matrix((self.n, 0))
        cols = np.arange(self.m)
        root = np.sqrt(self.weights)
        rows = np.concatenate([[i for i, _, _ in self.edges], [j for _, j, _ in self.edges]])
        data = np.concatenate([root, -root])
        return sp.coo_matrix((data, (rows, np.concatenate([cols, cols]))), shape=(self.n, self.m)).tocsr()

    @cached_property
    def normalized_incidence(self) -> sp.csr_matrix:
        """D^{-1/2} B, whose Gram matrix is the normalized Laplacian."""
        return (sp.diags(self._inv_sqrt_degrees) @ self.incidence).tocsr()

    @cached_property
    def edge_laplacian(self) -> sp.csr_matrix:
        return (self.incidence.T @ self.incidence).tocsr()

    @cached_property
    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        count, _ = connected_components(self.adjacency, directed=False)
        return count == 1

    def operator(self, kind: Operator | str) -> sp.csr_matrix:
        kind = Operator(kind)
        if kind is Operator.LAPLACIAN:
            return self.laplacian
        if kind is Operator.NORMALIZED_LAPLACIAN:
            return self.normalized_laplacian
        if kind is Operator.SCALED_LAPLACIAN:
            return self.scaled_laplacian
        return self.edge_laplacian

    def operator_incidence(self, kind: Operator | str) -> sp.csr_matrix:
        """Incidence whose Gram matrix equals the requested node operator."""
        kind = Operator(kind)
        if kind is Operator.LAPLACIAN:
            return self.incidence
        if kind is Operator.NORMALIZED_LAPLACIAN:
            return self.normalized_incidence
        if kind is Operator.SCALED_LAPLACIAN:
            scale = 1.0 / np.sqrt(self.spectral_radius) if self.m else 1.0
            return (self.incidence * scale).tocsr()
        raise GraphError("edge-laplacian has no node incidence")

    def require_connected(self) -> None:
        if not self.is_connected:
            raise GraphError(f"graph with n={self.n}, m={self.m} is not connected")

    def permuted(self, perm: Sequence[int]) -> "Graph":
        """Relabel node ``i`` as ``perm[i]``."""
        perm = list(perm)
        return build_graph([(perm[i], perm[j], w) for i, j, w in self.edges], n=self.n)

    def with_weights(self, weights: np.ndarray) -> "Graph":
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (self.m,):
            raise GraphError(f"expected {self.m} weights, got shape {weights.shape}")
        return build_graph([(i, j, float(w)) for (i, j, _), w in zip(self.edges, weights)], n=self.n)


def build_graph(edge_list: Iterable[Sequence[float]], n: int | None = None) -> Graph:
    """Validate an undirected edge list and return a canonical :class:`Graph`.

    Each entry is ``(i, j)`` or ``(i, j, w)``; ``n`` defaults to ``max index + 1``.
    """
    raw: list[tuple[int, int, float]] = []
    for entry in edge_list:
        if len(entry) not in (2, 3):
            raise GraphError("edge must be (i, j) or (i, j, w)", edge=tuple(entry))
        i, j = entry[0], entry[1]
        w = float(entry[2]) if len(entry) == 3 else 1.0
        if int(i) != i or int(j) != j:
            raise GraphError("node indices must be integers", edge=tuple(entry))
        raw.append((int(i), int(j), w))

    if n is None:
        n = max((max(i, j) for i, j, _ in raw), default=-1) + 1
    if n < 1:
        raise GraphError("graph must have at least one node")

    seen: set[tuple[int, int]] = set()
    canonical: list[tuple[int, int, float]] = []
    for i, j, w in raw:
        edge = (i, j, w)
        if i == j:
            raise GraphError("self-loop", edge=edge)
        if min(i, j) < 0 or max(i, j) >= n:
            raise GraphError(f"dangling node index (n={n})", edge=edge)
        if not np.isfinite(w) or w <= 0:
            raise GraphError("nonpositive weight", edge=edge)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphError("duplicate edge", edge=edge)
        seen.add(key)
        canonical.append((key[0], key[1], w))

    canonical.sort(key=lambda e: (e[0], e[1]))
    return Graph(n=n, edges=tuple(canonical))


def incidence(g: Graph) -> sp.csr_matrix:
    return g.incidence


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """Connected G(n, p) sample with unit weights.

    Attempt ``k`` draws from seed ``seed + k``; the first connected draw wins.
    """
    if n < 2:
        raise GraphError(f"erdos_renyi needs n >= 2, got {n}")
    if not 0 < p <= 1:
        raise GraphError(f"erdos_renyi needs 0 < p <= 1, got {p}")

    rows, cols = np.triu_indices(n, k=1)
    for attempt in range(ER_MAX_ATTEMPTS):
        rng = np.random.default_rng(seed + attempt)
        keep = rng.random(rows.size) < p
        graph = build_graph(zip(rows[keep].tolist(), cols[keep].tolist()), n=n)
        if graph.is_connected:
            if attempt:
                LOGGER.debug("erdos_renyi(n=%s, p=%s, seed=%s) connected after %s resamples", n, p, seed, attempt)
            return graph
    raise GraphError(f"no connected G({n}, {p}) sample within {ER_MAX_ATTEMPTS} attempts from seed {seed}")


def read_edge_list(path: Path | str, n: int | None = None) -> Graph:
    """Read ``i j w`` lines ('#' comments, 0-based). A ``# nodes N`` line fixes the node count."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"edge list not found at {path}") from exc
    except OSError as exc:
        raise DataError(f"Failed to read {path}: {exc}") from exc

    edges: list[tuple[int, int, float]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith(_NODES_DIRECTIVE) and n is None:
            n = int(stripped[len(_NODES_DIRECTIVE):].strip())
            continue
        content = stripped.split("#", 1)[0].strip()
        if not content:
            continue
        parts = content.split()
        if len(parts) not in (2, 3):
            raise DataError(f"{path}:{lineno}: expected 'i j w', got {line!r}")
        try:
            edges.append((int(parts[0]), int(parts[1]), float(parts[2]) if len(parts) == 3 else 1.0))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return build_graph(edges, n=n)


def write_edge_list(g: Graph, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{_NODES_DIRECTIVE} {g.n}"]
    lines.extend(f"{i} {j} {w:.17g}" for i, j, w in g.edges)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path

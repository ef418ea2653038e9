"""Undirected text-attributed graph with degree/volume/cut queries."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class InputError(ValueError):
    """Malformed or inconsistent input files."""


class MetricError(ValueError):
    pass


@dataclass
class Graph:
    n: int
    adj: list = field(default_factory=list)
    features: Optional[np.ndarray] = None
    texts: list = field(default_factory=list)
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.adj:
            self.adj = [set() for _ in range(self.n)]
        if not self.texts:
            self.texts = [""] * self.n
        if self.features is None:
            # constant features keep cosine similarity defined everywhere
            self.features = np.ones((self.n, 1))
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2 or self.features.shape[0] != self.n or self.features.shape[1] < 1:
            raise InputError(f"features must have shape ({self.n}, f>=1), got {self.features.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.n,):
                raise InputError(f"expected {self.n} labels, got {self.labels.shape[0]}")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple], **kw) -> "Graph":
        g = cls(n, **kw)
        for u, v in edges:
            g.add_edge(int(u), int(v))
        return g

    @property
    def m(self) -> int:
        return sum(len(a) for a in self.adj) // 2

    def edges(self) -> list:
        """Sorted list of (u, v) with u < v."""
        return sorted((u, v) for u in range(self.n) for v in self.adj[u] if u < v)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj[u]

    def neighbors(self, v: int) -> set:
        return self.adj[v]

    def degree(self, v: int) -> int:
        self._check_node(v)
        return len(self.adj[v])

    def volume(self, s: Iterable[int]) -> int:
        return sum(len(self.adj[v]) for v in s)

    def cut_size(self, s: Iterable[int]) -> int:
        members = s if isinstance(s, (set, frozenset)) else set(s)
        return sum(1 for v in members for w in self.adj[v] if w not in members)

    def add_edge(self, u: int, v: int) -> bool:
        self._check_pair(u, v)
        if v in self.adj[u]:
            return False
        self.adj[u].add(v)
        self.adj[v].add(u)
        return True

    def remove_edge(self, u: int, v: int) -> bool:
        self._check_pair(u, v)
        if v not in self.adj[u]:
            return False
        self.adj[u].discard(v)
        self.adj[v].discard(u)
        return True

    def copy(self) -> "Graph":
        return Graph(
            self.n,
            adj=[set(a) for a in self.adj],
            features=self.features.copy(),
            texts=list(self.texts),
            labels=None if self.labels is None else self.labels.copy(),
        )

    def _check_node(self, v):
        if not 0 <= v < self.n:
            raise InputError(f"node {v} out of range [0, {self.n})")

    def _check_pair(self, u, v):
        self._check_node(u)
        self._check_node(v)
        if u == v:
            raise InputError(f"self-loop on node {u}")


def edge_homophily(g: Graph, labels: Sequence[int]) -> float:
    labels = np.asarray(labels)
    edges = g.edges()
    if not edges:
        raise MetricError("edge homophily undefined on a graph without edges")
    same = sum(1 for u, v in edges if labels[u] == labels[v])
    return same / len(edges)


def _read_edge_file(path) -> list:
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected two integers, got {line!r}")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    return pairs


def _read_texts(path) -> dict:
    texts = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            i = int(rec["id"])
            if i in texts:
                raise InputError(f"{path}:{lineno}: duplicate text id {i}")
            if i < 0:
                raise InputError(f"{path}:{lineno}: negative id {i}")
            texts[i] = str(rec.get("text", ""))
    return texts


def load_graph(edge_path, text_path=None, feature_path=None, label_path=None) -> Graph:
    """Load a graph from an edge list plus optional texts/features/labels.

    When a texts file is given it fixes the node count (1 + max id); edge
    endpoints beyond it are rejected. Without texts, n comes from the edges.
    """
    pairs = _read_edge_file(edge_path)
    texts = _read_texts(text_path) if text_path is not None else {}
    if texts:
        n = 1 + max(texts)
    else:
        n = 1 + max((max(p) for p in pairs), default=-1)

    for u, v in pairs:
        if not (0 <= u < n and 0 <= v < n):
            raise InputError(f"edge ({u}, {v}) out of range for n={n}")
        if u == v:
            raise InputError(f"self-loop on node {u}")

    features = None
    if feature_path is not None:
        with open(feature_path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if len(rows) != n:
            raise InputError(f"feature rows ({len(rows)}) != node count ({n})")
        features = np.array([[float(x) for x in r] for r in rows])

    labels = None
    if label_path is not None:
        labels = [int(x) for x in Path(label_path).read_text().split()]
        if len(labels) != n:
            raise InputError(f"label count ({len(labels)}) != node count ({n})")

    g = Graph(n, features=features, texts=[texts.get(i, "") for i in range(n)], labels=labels)
    for u, v in pairs:
        g.add_edge(u, v)
    return g


def write_edges(g: Graph, path) -> None:
    with open(path, "w") as fh:
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")


def write_graph_files(g: Graph, out_dir) -> dict:
    """Write edges/texts/features/labels in the loader's formats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "graph": out / "edges.txt",
        "texts": out / "texts.jsonl",
        "features": out / "features.csv",
    }
    write_edges(g, paths["graph"])
    with open(paths["texts"], "w") as fh:
        for i, t in enumerate(g.texts):
            fh.write(json.dumps({"id": i, "text": t}) + "\n")
    with open(paths["features"], "w", newline="") as fh:
        w = csv.writer(fh)
        for row in g.features:
            w.writerow([repr(float(x)) for x in row])
    if g.labels is not None:
        paths["labels"] = out / "labels.txt"
        paths["labels"].write_text("".join(f"{int(y)}\n" for y in g.labels))
    return paths

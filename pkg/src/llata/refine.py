"""Silhouette-guided re-clustering of low-level communities by soft label."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import Graph
from .tree import EncodingTree, TreeError, TreeInvariantError

log = logging.getLogger(__name__)


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    k: int
    silhouette: float = 0.0

    def clusters(self) -> list:
        return [np.flatnonzero(self.labels == j) for j in range(self.k)]


@dataclass
class RefinedTree:
    tree: EncodingTree
    moves: list = field(default_factory=list)


def _canonical(labels: np.ndarray) -> np.ndarray:
    # relabel clusters in order of first appearance
    mapping: dict = {}
    return np.array([mapping.setdefault(int(x), len(mapping)) for x in labels])


def _lloyd(X, centers, max_iter=100):
    k = len(centers)
    labels = None
    for _ in range(max_iter):
        d = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        new = d.argmin(1)
        # repair empty clusters with the point farthest from its centre
        for j in range(k):
            if not np.any(new == j):
                sizes = np.bincount(new, minlength=k)
                dist = d[np.arange(len(X)), new].copy()
                dist[sizes[new] <= 1] = -1.0
                far = int(dist.argmax())
                new[far] = j
        centers = np.array([X[new == j].mean(0) for j in range(k)])
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
    inertia = float(((X - centers[labels]) ** 2).sum())
    return labels, inertia


def _plusplus(X, k, rng):
    idx = [int(rng.integers(len(X)))]
    for _ in range(1, k):
        d = ((X[:, None, :] - X[idx][None, :, :]) ** 2).sum(-1).min(1)
        total = d.sum()
        p = d / total if total > 0 else None
        idx.append(int(rng.choice(len(X), p=p)))
    return X[idx].copy()


def kmeans(points, k: int, seed: int = 0, n_init: int = 5) -> ClusterAssignment:
    """Lloyd's k-means with k-means++ seeding; best of n_init restarts."""
    X = np.asarray(points, dtype=float)
    if not 2 <= k <= len(X):
        raise ValueError(f"k={k} out of range [2, {len(X)}]")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        labels, inertia = _lloyd(X, _plusplus(X, k, rng))
        if best is None or inertia < best[1] - 1e-12:
            best = (labels, inertia)
    labels = _canonical(best[0])
    return ClusterAssignment(labels, k, silhouette(X, labels))


def silhouette(points, labels) -> float:
    """Mean silhouette with Euclidean distance; singleton clusters score 0."""
    X = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    ids = np.unique(labels)
    if len(ids) < 2:
        return 0.0
    D = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    scores = np.zeros(len(X))
    for i in range(len(X)):
        own = labels == labels[i]
        if own.sum() == 1:
            continue
        a = D[i, own].sum() / (own.sum() - 1)
        b = min(D[i, labels == j].mean() for j in ids if j != labels[i])
        top = max(a, b)
        scores[i] = 0.0 if top == 0 else (b - a) / top
    return float(scores.mean())


def adaptive_cluster(points, s: float = 0.01, seed: int = 0) -> Optional[ClusterAssignment]:
    """Scan k = 2..m//2, keep extending while silhouette improves by >= s.

    Returns None ("unchanged") for fewer than 4 points or when no k beats a
    silhouette of 0 by at least s.
    """
    if s <= 0:
        raise ValueError("improvement threshold s must be positive")
    X = np.asarray(points, dtype=float)
    m = len(X)
    if m < 4:
        return None
    best, sil_max = None, 0.0
    for k in range(2, m // 2 + 1):
        asg = kmeans(X, k, seed)
        if asg.silhouette - sil_max < s:
            break
        best, sil_max = asg, asg.silhouette
    return best


def _cos(a, b) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return 0.0 if na == 0 or nb == 0 else float(a @ b / (na * nb))


def _leaf_children(t: EncodingTree, x: int) -> list:
    return [c for c in t.children(x) if t.is_leaf(c)]


def refine_tree(t: EncodingTree, soft_labels, s: float = 0.01, seed: int = 0,
                g: Optional[Graph] = None) -> RefinedTree:
    """Split soft-label-heterogeneous low-level communities into siblings.

    Clusters with two or more members become new communities under the
    original community's parent; singleton clusters join the sibling
    community whose mean soft label is closest in cosine.
    """
    Y = np.asarray(soft_labels, dtype=float)
    t = t.copy()
    if g is not None and g is not t.graph:
        t.graph = g
    moves = []
    for parent, _ in t.low_level_communities():
        if parent not in t.nodes:
            continue
        members = sorted(_leaf_children(t, parent))
        if len(members) < 4:
            continue
        if len({int(Y[v].argmax()) for v in members}) == 1:
            continue
        asg = adaptive_cluster(Y[members], s, seed)
        if asg is None:
            continue
        home = t.parent(parent) if t.parent(parent) is not None else t.root
        singles = []
        for idx in asg.clusters():
            group = [members[i] for i in idx]
            if len(group) > 1:
                new = t.new_node(home, group)
                moves.append({"community": parent, "action": "split", "members": group, "target": new})
            else:
                singles.extend(group)
        for v in singles:
            target = _best_sibling(t, home, Y, Y[v], exclude=parent)
            t.move(v, target)
            moves.append({"community": parent, "action": "reallocate", "members": [v], "target": target})
        t.delete_if_empty(parent)
    t.rebuild()
    try:
        t.check()
    except TreeInvariantError as exc:
        raise TreeInvariantError(f"refinement broke the tree: {exc}; dump: {t.to_json()}") from None
    return RefinedTree(t, moves)


def _best_sibling(t: EncodingTree, home: int, Y, y, exclude: int) -> int:
    best, best_sim = None, -np.inf
    for x in sorted(t.children(home)):
        if t.is_leaf(x) or x == exclude:
            continue
        leaves = _leaf_children(t, x)
        if not leaves:
            continue
        sim = _cos(Y[leaves].mean(0), y)
        if sim > best_sim:
            best, best_sim = x, sim
    if best is None:
        raise TreeError(f"no sibling community under {home} to take a reallocated leaf")
    return best

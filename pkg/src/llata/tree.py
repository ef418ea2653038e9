"""Structural encoding trees and greedy structural-entropy minimization.

Leaves carry the ids of the graph nodes they encode (leaf ``v`` is graph
node ``v``), the root is ``n`` and internal nodes get fresh ids above it.
Every tree node caches its community, volume and cut so that entropy
changes of a combine/lift can be evaluated locally.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .graph import Graph


class TreeError(ValueError):
    """Illegal tree operation (wrong parent, lifting to the root, ...)."""


class TreeInvariantError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


@dataclass
class TreeNode:
    id: int
    parent: Optional[int]
    children: list = field(default_factory=list)
    community: frozenset = frozenset()
    vol: int = 0
    g: int = 0


def _term(g: int, vol: int, parent_vol: int, total: int) -> float:
    # 0*log(.) = 0, which also covers degree-0 leaves
    if g == 0 or vol == 0 or total == 0:
        return 0.0
    return -(g / total) * math.log2(vol / parent_vol)


class EncodingTree:
    def __init__(self, graph: Graph):
        self.graph = graph
        self.total_vol = 2 * graph.m
        self.nodes: dict[int, TreeNode] = {}
        self.root = graph.n
        self._next_id = graph.n + 1
        self._sub_h: dict[int, int] = {}
        self.entropy = 0.0
        self.log: list = []

    # -- construction -----------------------------------------------------
    @classmethod
    def flat(cls, graph: Graph) -> "EncodingTree":
        if graph.n < 1:
            raise TreeError("cannot build a tree over an empty graph")
        t = cls(graph)
        everyone = frozenset(range(graph.n))
        t.nodes[t.root] = TreeNode(t.root, None, list(range(graph.n)), everyone, t.total_vol, 0)
        t._sub_h[t.root] = 1
        for v in range(graph.n):
            t.nodes[v] = TreeNode(v, t.root, [], frozenset((v,)), graph.degree(v), graph.degree(v))
            t._sub_h[v] = 0
        t.entropy = t.full_entropy()
        return t

    def copy(self) -> "EncodingTree":
        """Independent copy sharing the (read-only) graph."""
        t = EncodingTree(self.graph)
        t.root, t._next_id, t.entropy = self.root, self._next_id, self.entropy
        t.nodes = {
            x: TreeNode(x, nd.parent, list(nd.children), nd.community, nd.vol, nd.g)
            for x, nd in self.nodes.items()
        }
        t._sub_h = dict(self._sub_h)
        t.log = list(self.log)
        return t

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def leaf_of(self) -> list:
        """Graph node id -> leaf tree-node id."""
        return list(range(self.graph.n))

    def is_leaf(self, x: int) -> bool:
        return x < self.graph.n

    def parent(self, x: int) -> Optional[int]:
        return self.nodes[x].parent

    def children(self, x: int) -> list:
        return self.nodes[x].children

    @property
    def height(self) -> int:
        return self._sub_h[self.root]

    def depth(self, x: int) -> int:
        d = 0
        while self.nodes[x].parent is not None:
            x = self.nodes[x].parent
            d += 1
        return d

    # -- entropy ----------------------------------------------------------
    def node_entropy(self, x: int) -> float:
        node = self.nodes[x]
        if node.parent is None:
            raise TreeError("the root has no entropy term")
        if self.total_vol == 0:
            raise TreeError("structural entropy needs at least one edge")
        return _term(node.g, node.vol, self.nodes[node.parent].vol, self.total_vol)

    def full_entropy(self) -> float:
        return sum(self.node_entropy(x) for x in self.nodes if x != self.root)

    def _cut_between(self, a: frozenset, b: frozenset) -> int:
        if len(a) > len(b):
            a, b = b, a
        adj = self.graph.adj
        return sum(1 for u in a for w in adj[u] if w in b)

    # -- combine ----------------------------------------------------------
    def _check_siblings(self, a: int, b: int) -> int:
        if a == b:
            raise TreeError("cannot combine a node with itself")
        if a not in self.nodes or b not in self.nodes:
            raise TreeError(f"unknown tree node {a if a not in self.nodes else b}")
        pa, pb = self.nodes[a].parent, self.nodes[b].parent
        if pa is None or pa != pb:
            raise TreeError(f"nodes {a} and {b} do not share a parent")
        return pa

    def delta_combine(self, a: int, b: int, cut: Optional[int] = None) -> float:
        """Entropy decrease caused by inserting a common parent over a and b."""
        p = self._check_siblings(a, b)
        na, nb, V = self.nodes[a], self.nodes[b], self.total_vol
        vp = self.nodes[p].vol
        if cut is None:
            cut = self._cut_between(na.community, nb.community)
        vol = na.vol + nb.vol
        g = na.g + nb.g - 2 * cut
        before = _term(na.g, na.vol, vp, V) + _term(nb.g, nb.vol, vp, V)
        after = _term(na.g, na.vol, vol, V) + _term(nb.g, nb.vol, vol, V) + _term(g, vol, vp, V)
        return before - after

    def combine(self, a: int, b: int, cut: Optional[int] = None) -> int:
        p = self._check_siblings(a, b)
        na, nb = self.nodes[a], self.nodes[b]
        if cut is None:
            cut = self._cut_between(na.community, nb.community)
        delta = self.delta_combine(a, b, cut)
        new = self._next_id
        self._next_id += 1
        self.nodes[new] = TreeNode(
            new, p, [a, b], na.community | nb.community, na.vol + nb.vol, na.g + nb.g - 2 * cut
        )
        kids = self.nodes[p].children
        kids.remove(a)
        kids.remove(b)
        kids.append(new)
        na.parent = nb.parent = new
        self._sub_h[new] = 1 + max(self._sub_h[a], self._sub_h[b])
        self._refresh_height(p)
        self.entropy -= delta
        self.log.append(("combine", a, b, new, delta))
        return new

    # -- lift -------------------------------------------------------------
    def _lift_parts(self, a: int):
        node = self.nodes.get(a)
        if node is None or node.parent is None:
            raise TreeError(f"node {a} is the root or unknown")
        b = node.parent
        nb = self.nodes[b]
        if nb.parent is None:
            raise TreeError(f"cannot lift {a}: its parent is the root")
        return node, nb, self.nodes[nb.parent]

    def delta_lift(self, a: int) -> float:
        """Entropy decrease caused by moving a up to its grandparent."""
        na, nb, nc = self._lift_parts(a)
        V = self.total_vol
        rest = nb.community - na.community
        cut = self._cut_between(na.community, rest)
        siblings = [self.nodes[s] for s in nb.children if s != a]
        before = _term(na.g, na.vol, nb.vol, V) + _term(nb.g, nb.vol, nc.vol, V)
        before += sum(_term(s.g, s.vol, nb.vol, V) for s in siblings)
        after = _term(na.g, na.vol, nc.vol, V)
        if siblings:
            vol_b = nb.vol - na.vol
            g_b = nb.g - na.g + 2 * cut
            after += _term(g_b, vol_b, nc.vol, V)
            after += sum(_term(s.g, s.vol, vol_b, V) for s in siblings)
        return before - after

    def lift(self, a: int) -> float:
        na, nb, nc = self._lift_parts(a)
        delta = self.delta_lift(a)
        rest = nb.community - na.community
        cut = self._cut_between(na.community, rest)
        nb.children.remove(a)
        nc.children.append(a)
        na.parent = nc.id
        if nb.children:
            nb.g = nb.g - na.g + 2 * cut
            nb.vol -= na.vol
            nb.community = rest
            self._refresh_height(nb.id)
        else:
            nc.children.remove(nb.id)
            del self.nodes[nb.id]
            del self._sub_h[nb.id]
        self._refresh_height(nc.id)
        self.entropy -= delta
        self.log.append(("lift", a, nb.id, nc.id, delta))
        return delta

    def _refresh_height(self, x: Optional[int]) -> None:
        while x is not None:
            kids = self.nodes[x].children
            h = 1 + max(self._sub_h[c] for c in kids) if kids else 0
            if self._sub_h.get(x) == h:
                break
            self._sub_h[x] = h
            x = self.nodes[x].parent

    # -- generic rebuild (used by refinement) ----------------------------
    def new_node(self, parent: int, children=()) -> int:
        new = self._next_id
        self._next_id += 1
        self.nodes[new] = TreeNode(new, parent, [])
        self.nodes[parent].children.append(new)
        for c in children:
            self.move(c, new)
        return new

    def move(self, x: int, new_parent: int) -> None:
        """Re-parent x; caches are stale until rebuild() is called."""
        old = self.nodes[x].parent
        self.nodes[old].children.remove(x)
        self.nodes[new_parent].children.append(x)
        self.nodes[x].parent = new_parent

    def delete_if_empty(self, x: int) -> bool:
        node = self.nodes[x]
        if node.children or node.parent is None or self.is_leaf(x):
            return False
        self.nodes[node.parent].children.remove(x)
        del self.nodes[x]
        self._sub_h.pop(x, None)
        return True

    def rebuild(self) -> None:
        """Recompute communities, caches, heights and entropy from scratch."""
        g = self.graph
        order = self._postorder()
        for x in order:
            node = self.nodes[x]
            if self.is_leaf(x):
                node.community = frozenset((x,))
                self._sub_h[x] = 0
            else:
                node.community = frozenset().union(*(self.nodes[c].community for c in node.children))
                self._sub_h[x] = 1 + max((self._sub_h[c] for c in node.children), default=-1)
            node.vol = g.volume(node.community)
            node.g = g.cut_size(node.community)
        self.entropy = self.full_entropy()

    def _postorder(self) -> list:
        out, stack = [], [(self.root, False)]
        while stack:
            x, done = stack.pop()
            if done:
                out.append(x)
                continue
            stack.append((x, True))
            stack.extend((c, False) for c in self.nodes[x].children)
        return out

    # -- queries ----------------------------------------------------------
    def low_level_communities(self) -> list:
        """(parent id, sorted leaf members) for every parent of a leaf."""
        groups: dict[int, list] = {}
        for v in range(self.n):
            groups.setdefault(self.nodes[v].parent, []).append(v)
        return [(p, tuple(sorted(groups[p]))) for p in sorted(groups)]

    def check(self) -> None:
        """Raise TreeInvariantError unless the tree is a valid encoding tree."""
        g = self.graph
        root = self.nodes[self.root]
        if root.community != frozenset(range(self.n)):
            raise TreeInvariantError("root community is not the full node set")
        seen_leaves = 0
        for x, node in self.nodes.items():
            if self.is_leaf(x):
                seen_leaves += 1
                if node.children or node.community != frozenset((x,)):
                    raise TreeInvariantError(f"leaf {x} malformed")
            else:
                if not node.children:
                    raise TreeInvariantError(f"internal node {x} has no children")
                parts = [self.nodes[c].community for c in node.children]
                if sum(len(p) for p in parts) != len(node.community) or frozenset().union(*parts) != node.community:
                    raise TreeInvariantError(f"children of {x} do not partition its community")
            for c in node.children:
                if self.nodes[c].parent != x:
                    raise TreeInvariantError(f"parent pointer of {c} != {x}")
            if node.vol != g.volume(node.community) or node.g != g.cut_size(node.community):
                raise TreeInvariantError(f"stale cache on node {x}")
        if seen_leaves != self.n:
            raise TreeInvariantError("leaf set does not match graph nodes")

    def to_json(self) -> dict:
        nodes = []
        for x in sorted(self.nodes):
            node = self.nodes[x]
            nodes.append({
                "id": x,
                "parent": node.parent,
                "children": list(node.children),
                "community": sorted(node.community),
                "g": node.g,
                "vol": node.vol,
                "entropy_term": 0.0 if node.parent is None else self.node_entropy(x),
            })
        return {"root": self.root, "height": self.height, "entropy": self.entropy, "nodes": nodes}

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


# -- module-level API ------------------------------------------------------

def init_flat_tree(g: Graph) -> EncodingTree:
    return EncodingTree.flat(g)


def node_entropy(t: EncodingTree, x: int) -> float:
    return t.node_entropy(x)


def tree_entropy(t: EncodingTree) -> float:
    return t.full_entropy()


def _lift_candidates(t: EncodingTree):
    root = t.root
    return [x for x, node in t.nodes.items() if node.parent is not None and node.parent != root]


def minimize(g: Graph, K: int, tie_seed: int = 0) -> EncodingTree:
    """Greedy combine-then-lift minimization of structural entropy.

    Combines run among connected children of the root while it has more
    than two of them; lifts then run until the height is at most K. Both
    phases always take the argmax-delta move, ties going to the smallest
    ids. ``tie_seed`` is accepted for interface stability and unused.
    """
    if K < 2:
        raise ConfigError(f"tree height K must be >= 2, got {K}")
    if g.m < 1:
        raise ConfigError("structural entropy minimization needs at least one edge")
    t = EncodingTree.flat(g)
    root = t.root

    # root-level adjacency: child -> {neighbor child: edge count}
    radj: dict[int, dict[int, int]] = {v: {w: 1 for w in g.adj[v]} for v in range(g.n)}
    heap = []
    for u in range(g.n):
        for w in g.adj[u]:
            if u < w:
                heap.append((-t.delta_combine(u, w, 1), u, w))
    heapq.heapify(heap)

    n_root_kids = len(t.children(root))
    while n_root_kids > 2 and heap:
        _, a, b = heapq.heappop(heap)
        if t.nodes.get(a) is None or t.nodes.get(b) is None:
            continue
        if t.parent(a) != root or t.parent(b) != root:
            continue
        new = t.combine(a, b, radj[a][b])
        n_root_kids -= 1
        merged: dict[int, int] = {}
        for old in (a, b):
            for s, c in radj.pop(old).items():
                if s in (a, b):
                    continue
                merged[s] = merged.get(s, 0) + c
                del radj[s][old]
        radj[new] = merged
        for s, c in merged.items():
            radj[s][new] = c
            x, y = (s, new) if s < new else (new, s)
            heapq.heappush(heap, (-t.delta_combine(x, y, c), x, y))

    cand = {x: t.delta_lift(x) for x in _lift_candidates(t)}
    while t.height > K:
        a = max(cand, key=lambda x: (cand[x], -x, -t.parent(x)))
        b = t.parent(a)
        c = t.parent(b)
        affected = {a}
        b_alive = len(t.children(b)) > 1
        for s in t.children(b):
            affected.add(s)
            affected.update(t.children(s))
        affected.update(t.children(a))
        t.lift(a)
        affected.update(t.children(c))
        if b_alive:
            affected.add(b)
        else:
            cand.pop(b, None)
        for x in affected:
            if x in t.nodes and t.parent(x) is not None and t.parent(x) != root:
                cand[x] = t.delta_lift(x)
            else:
                cand.pop(x, None)
    return t

"""Reference computations that share no code with the package.

Everything here works from a dense adjacency matrix and explicit
community lists, so the package's cached/incremental paths can be checked
against it.
"""
import math

import numpy as np


def adjacency(n, edges):
    A = np.zeros((n, n), dtype=int)
    for u, v in edges:
        A[u, v] = A[v, u] = 1
    return A


def vol_cut(A, members):
    members = sorted(members)
    mask = np.zeros(len(A), dtype=bool)
    mask[members] = True
    vol = int(A[mask].sum())
    cut = int(A[np.ix_(mask, ~mask)].sum())
    return vol, cut


def term(A, members, parent_members):
    total = int(A.sum())
    vol, cut = vol_cut(A, members)
    pvol, _ = vol_cut(A, parent_members)
    if cut == 0 or vol == 0:
        return 0.0
    return -(cut / total) * math.log2(vol / pvol)


def tree_entropy_from_parents(A, parent, community):
    """parent: {node: parent or None}; community: {node: iterable of graph nodes}."""
    return sum(term(A, community[x], community[p]) for x, p in parent.items() if p is not None)


def entropy_of_tree(A, tree):
    """Evaluate a package EncodingTree structurally, recomputing communities."""
    comm = {}

    def members(x):
        if x not in comm:
            kids = tree.children(x)
            comm[x] = [x] if tree.is_leaf(x) else sorted(v for c in kids for v in members(c))
        return comm[x]

    parent = {x: tree.parent(x) for x in tree.nodes}
    for x in tree.nodes:
        members(x)
    return tree_entropy_from_parents(A, parent, comm)


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def partition_entropy(A, blocks):
    """Entropy of the height-2 tree root -> blocks -> leaves."""
    n = len(A)
    everyone = list(range(n))
    h = 0.0
    for b in blocks:
        h += term(A, b, everyone)
        for v in b:
            h += term(A, [v], b)
    return h


def brute_force_min_height2(A):
    return min(partition_entropy(A, p) for p in set_partitions(range(len(A))))


def softmax(xs):
    m = max(xs)
    e = [math.exp(x - m) for x in xs]
    s = sum(e)
    return [x / s for x in e]

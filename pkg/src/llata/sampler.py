"""Two-step edge sampling over the refined encoding tree.

Step one draws a leaf from a low-level community with probability
softmax(leaf entropy); step two draws a partner among semantic candidates
with probability softmax(cosine of soft labels). Additions keep the theta
most similar candidates and draw from their more similar half; removals
keep the theta least similar and draw from their less similar half. A
removal that lands on a non-neighbour is recorded as skipped.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .graph import Graph
from .tree import EncodingTree

MODES = ("add", "remove", "both")


@dataclass
class SamplingConfig:
    theta: int = 5
    r: int = 3
    mode: str = "both"
    seed: int = 0

    def __post_init__(self):
        if self.theta < 1:
            raise ValueError(f"theta must be >= 1, got {self.theta}")
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class EdgeAction:
    kind: str  # added | removed | skipped
    u: int
    v: Optional[int]
    reason: Optional[str] = None
    op: str = "add"


def softmax(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    e = np.exp(x - x.max())
    return e / e.sum()


def cosine(a, b) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return 0.0 if na == 0 or nb == 0 else float(np.dot(a, b) / (na * nb))


def p_topo(t: EncodingTree, community: Sequence[int]) -> np.ndarray:
    """Selection probabilities of community members, softmax of leaf entropy."""
    return softmax([t.node_entropy(v) for v in community])


def p_sema(soft_labels, alpha: int, candidates: Sequence[int]) -> np.ndarray:
    Y = np.asarray(soft_labels)
    return softmax([cosine(Y[b], Y[alpha]) for b in candidates])


def draw(rng, p, size=None):
    """Index (or array of indices) drawn from the categorical p."""
    return rng.choice(len(p), size=size, p=p)


def _leaves_under(t: EncodingTree, x: int) -> list:
    return sorted(c for c in t.children(x) if t.is_leaf(c))


def expand_candidates(t: EncodingTree, alpha: int, theta: int, soft_labels,
                      descending: bool = True) -> list:
    """Candidate partners for alpha, at most theta of them.

    Overfull sets keep the theta most similar members, or the theta least
    similar when ``descending`` is False.
    """
    Y = np.asarray(soft_labels)
    y = Y[alpha]
    parent = t.parent(alpha)
    cands = [v for v in _leaves_under(t, parent) if v != alpha]
    grand = t.parent(parent)
    if len(cands) < theta and grand is not None:
        others = []
        for x in sorted(t.children(grand)):
            if x == parent or t.is_leaf(x):
                continue
            members = _leaves_under(t, x)
            if members:
                others.append((-cosine(Y[members].mean(0), y), x, members))
        others.sort()
        for _, _, members in others:
            if len(cands) >= theta:
                break
            cands.extend(members)
    if len(cands) > theta:
        sign = -1.0 if descending else 1.0
        ranked = sorted(cands, key=lambda b: (sign * cosine(Y[b], y), b))
        cands = sorted(ranked[:theta])
    return cands


def _draw_ranked(rng, soft_labels, alpha, pool, descending: bool):
    Y = np.asarray(soft_labels)
    sims = {b: cosine(Y[b], Y[alpha]) for b in pool}
    order = sorted(pool, key=lambda b: ((-sims[b] if descending else sims[b]), b))
    top = order[: (len(order) + 1) // 2]
    p = p_sema(Y, alpha, top)
    return top[int(draw(rng, p))]


def run_sampling(g: Graph, t: EncodingTree, soft_labels, cfg: SamplingConfig,
                 communities: Optional[Sequence] = None):
    """Mutate a copy of g; returns (new graph, list of EdgeAction).

    communities: sequence of (community id, members); defaults to all
    low-level communities of t. Leaf entropies are read from t as built.
    """
    rng = np.random.default_rng(cfg.seed)
    out = g.copy()
    actions = []
    if communities is None:
        communities = t.low_level_communities()
    for _, members in communities:
        members = list(members)
        probs = p_topo(t, members)
        for i in range(len(members) * cfg.r):
            op = cfg.mode if cfg.mode != "both" else ("add" if i % 2 == 0 else "remove")
            alpha = members[int(draw(rng, probs))]
            cands = expand_candidates(t, alpha, cfg.theta, soft_labels, descending=(op == "add"))
            if not cands:
                actions.append(EdgeAction("skipped", alpha, None, "no candidates", op))
                continue
            beta = _draw_ranked(rng, soft_labels, alpha, cands, descending=(op == "add"))
            if op == "add":
                if out.add_edge(alpha, beta):
                    actions.append(EdgeAction("added", alpha, beta, None, op))
                else:
                    actions.append(EdgeAction("skipped", alpha, beta, "edge exists", op))
            elif out.remove_edge(alpha, beta):
                actions.append(EdgeAction("removed", alpha, beta, None, op))
            else:
                actions.append(EdgeAction("skipped", alpha, beta, "not adjacent", op))
    return out, actions


def write_actions(actions, path) -> None:
    with open(path, "w") as fh:
        for a in actions:
            fh.write(json.dumps(asdict(a)) + "\n")

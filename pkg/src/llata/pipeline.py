"""End-to-end orchestration: tree, prompts, oracle, refinement, sampling."""
from __future__ import annotations

import json
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .graph import Graph, edge_homophily, load_graph, write_edges, write_graph_files
from .oracle import Oracle, OracleConfig, to_soft_label
from .refine import refine_tree
from .sampler import SamplingConfig, run_sampling, write_actions
from .text import ClassInfo, PromptBundle, augment_text, build_prompt, check_template, load_classes, topology_description
from .tree import EncodingTree, minimize

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
TASK_DESCRIPTION = "Task: classify paper 1 into one of the categories below."


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    graph: str = ""
    texts: Optional[str] = None
    features: Optional[str] = None
    labels: Optional[str] = None
    classes: Optional[str] = None
    template: Optional[str] = None
    out: str = "edges.out.txt"
    report: Optional[str] = None
    actions: Optional[str] = None
    height: int = 3
    epsilon: float = 0.45
    ktop: int = 3
    theta: int = 5
    rate: int = 3
    s: float = 0.01
    mode: str = "both"
    fraction: float = 1.0
    weights: tuple = (1 / 3, 1 / 3, 1 / 3)
    seed: int = 0
    max_chars_per_text: int = 2000
    oracle: OracleConfig = field(default_factory=OracleConfig)

    def validate(self) -> None:
        if not 2 <= self.height <= 8:
            raise ValueError(f"height K must lie in [2, 8], got {self.height}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"fraction must lie in (0, 1], got {self.fraction}")
        if len(self.weights) != 3 or min(self.weights) < 0 or sum(self.weights) <= 0:
            raise ValueError(f"weights must be three non-negative numbers, got {self.weights}")
        if self.ktop < 0:
            raise ValueError("ktop must be >= 0")
        total = float(sum(self.weights))
        self.weights = tuple(float(w) / total for w in self.weights)
        SamplingConfig(self.theta, self.rate, self.mode, self.seed)
        self.oracle.validate()

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        raw = dict(raw)
        oracle = OracleConfig(**raw.pop("oracle", {}))
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "weights" in raw:
            raw["weights"] = tuple(raw["weights"])
        return cls(oracle=oracle, **raw)


@dataclass
class RunReport:
    schema_version: int = REPORT_SCHEMA_VERSION
    nodes: int = 0
    edges_before: int = 0
    edges_after: int = 0
    entropy_flat: float = 0.0
    entropy_minimized: float = 0.0
    entropy_refined: float = 0.0
    tree_height: int = 0
    communities_total: int = 0
    communities_selected: int = 0
    oracle_calls: int = 0
    cache_hits: int = 0
    parse_fallbacks: int = 0
    refinement_splits: int = 0
    refinement_reallocations: int = 0
    edges_added: int = 0
    edges_removed: int = 0
    edges_skipped: int = 0
    homophily_before: Optional[float] = None
    homophily_after: Optional[float] = None
    timings: dict = field(default_factory=dict)


def emit_report(report: RunReport, path) -> str:
    text = json.dumps(asdict(report), indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _shannon_bits(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _mean_pairwise_cosine(X) -> float:
    if len(X) < 2:
        return 1.0
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    U = X / safe[:, None]
    S = U @ U.T
    m = len(X)
    return float((S.sum() - np.trace(S)) / (m * (m - 1)))


def community_score(members, t: EncodingTree, g: Graph, soft_labels=None,
                    weights=(1 / 3, 1 / 3, 1 / 3)) -> float:
    """Weighted sum of leaf entropy, label entropy and text dissimilarity.

    Without soft labels the label-entropy term is dropped and the two
    remaining weights are rescaled to sum to one.
    """
    w1, w2, w3 = weights
    members = list(members)
    h_struct = sum(t.node_entropy(v) for v in members)
    mu = _mean_pairwise_cosine(g.features[members])
    if soft_labels is None:
        rest = w1 + w3
        if rest == 0:
            return 0.0
        return (w1 * h_struct + w3 * (1.0 - mu)) / rest
    h_label = _shannon_bits(np.asarray(soft_labels)[members].mean(0))
    return w1 * h_struct + w2 * h_label + w3 * (1.0 - mu)


def select_communities(scores, f: float) -> list:
    """Indices of the top ceil(f * count) scores; ties go to the smallest index."""
    if not 0.0 < f <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {f}")
    scores = list(scores)
    keep = math.ceil(f * len(scores) - 1e-12)
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return sorted(order[:keep])


def generate_sbm(blocks: int, size: int, p_intra: float, p_inter: float, seed: int,
                 feature_noise: float = 1.0) -> Graph:
    """Planted-partition graph with class-correlated features and texts."""
    rng = np.random.default_rng(seed)
    n = blocks * size
    labels = np.repeat(np.arange(blocks), size)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_intra, p_inter)
    draws = rng.random((n, n)) < prob
    iu, ju = np.nonzero(np.triu(draws, k=1))
    features = np.eye(blocks)[labels] + feature_noise * rng.normal(size=(n, blocks))
    texts = [f"Document {i} discusses topic-{labels[i]} themes." for i in range(n)]
    return Graph.from_edges(n, zip(iu.tolist(), ju.tolist()), features=features, texts=texts, labels=labels)


def sbm_classes(blocks: int) -> list:
    return [ClassInfo(f"topic-{b}", f"Documents about topic {b}.") for b in range(blocks)]


def write_sbm(g: Graph, out_dir) -> dict:
    paths = write_graph_files(g, out_dir)
    blocks = int(g.labels.max()) + 1
    paths["classes"] = Path(out_dir) / "classes.json"
    paths["classes"].write_text(json.dumps([asdict(c) for c in sbm_classes(blocks)], indent=2) + "\n")
    return paths


@contextmanager
def _stage(name: str, timings: dict):
    start = time.perf_counter()
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, f"{type(exc).__name__}: {exc}") from exc
    finally:
        timings[name] = max(0.0, time.perf_counter() - start)
        log.info("stage %s done in %.3fs", name, timings[name])


def run_pipeline(cfg: PipelineConfig, oracle_backend=None) -> RunReport:
    report = RunReport()
    timings = report.timings

    with _stage("config", timings):
        cfg.validate()
        template = None
        if cfg.template:
            template = Path(cfg.template).read_text()
            check_template(template)

    with _stage("load", timings):
        g = load_graph(cfg.graph, cfg.texts, cfg.features, cfg.labels)
        if cfg.classes:
            classes = load_classes(cfg.classes)
        elif g.labels is not None:
            classes = [ClassInfo(f"class-{i}") for i in range(int(g.labels.max()) + 1)]
        else:
            raise ValueError("need either a classes file or a labels file to know the class set")
        c = len(classes)
        report.nodes, report.edges_before = g.n, g.m
        if g.labels is not None and g.m > 0:
            report.homophily_before = edge_homophily(g, g.labels)

    with _stage("minimize", timings):
        report.entropy_flat = EncodingTree.flat(g).full_entropy()
        tree = minimize(g, cfg.height, cfg.seed)
        report.entropy_minimized = tree.entropy
        communities = tree.low_level_communities()
        report.communities_total = len(communities)

    with _stage("select", timings):
        if cfg.fraction < 1.0:
            scores = [community_score(mem, tree, g, None, cfg.weights) for _, mem in communities]
            chosen = [communities[i] for i in select_communities(scores, cfg.fraction)]
        else:
            chosen = communities
        report.communities_selected = len(chosen)

    with _stage("prompt", timings):
        prompts = []
        for _, members in chosen:
            for v in members:
                aug = augment_text(g, members, v, cfg.epsilon, cfg.ktop)
                bundle = PromptBundle(
                    TASK_DESCRIPTION,
                    topology_description(len(members), len(aug.appended)),
                    classes,
                    aug,
                    cfg.max_chars_per_text,
                )
                prompts.append((v, build_prompt(bundle, template)))

    with _stage("infer", timings):
        oracle = Oracle(cfg.oracle, c, labels=g.labels, backend=oracle_backend)
        logits = oracle.infer_many(prompts)
        soft = np.full((g.n, c), 1.0 / c)
        for v, z in logits.items():
            soft[v] = to_soft_label(z)
        report.oracle_calls = oracle.calls
        report.cache_hits = oracle.cache_hits
        report.parse_fallbacks = oracle.parse_fallbacks

    with _stage("refine", timings):
        refined = refine_tree(tree, soft, cfg.s, cfg.seed, g)
        report.entropy_refined = refined.tree.entropy
        report.tree_height = refined.tree.height
        report.refinement_splits = sum(1 for m in refined.moves if m["action"] == "split")
        report.refinement_reallocations = sum(1 for m in refined.moves if m["action"] == "reallocate")

    with _stage("sample", timings):
        selected = {v for _, mem in chosen for v in mem}
        targets = [(p, mem) for p, mem in refined.tree.low_level_communities()
                   if any(v in selected for v in mem)]
        scfg = SamplingConfig(cfg.theta, cfg.rate, cfg.mode, cfg.seed)
        out, actions = run_sampling(g, refined.tree, soft, scfg, targets)
        report.edges_added = sum(a.kind == "added" for a in actions)
        report.edges_removed = sum(a.kind == "removed" for a in actions)
        report.edges_skipped = sum(a.kind == "skipped" for a in actions)
        report.edges_after = out.m
        if g.labels is not None and out.m > 0:
            report.homophily_after = edge_homophily(out, g.labels)

    with _stage("write", timings):
        write_edges(out, cfg.out)
        if cfg.actions:
            write_actions(actions, cfg.actions)
    if cfg.report:
        emit_report(report, cfg.report)
    return report

"""Community-based text augmentation and prompt assembly."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from string import Formatter
from typing import Optional, Sequence

import numpy as np

from .graph import Graph

log = logging.getLogger(__name__)

RELATED_HEADER = "The abstract of other papers related to its content:"
EXAMPLE_DIGITS = (8, 4, 1, 2, 5, 3, 7, 0, 6, 9)

DEFAULT_TEMPLATE = """\
Paper 1 falls into exactly one of these categories: {classes}

The abstract of paper 1:
{target_text}
{related_texts}
Using paper 1 and the related papers, estimate how likely paper 1 is to belong to each category.
Weigh the topic, method, keywords and findings of paper 1 most; use the related papers only where they overlap with it.

Use integers from 0 to 9 to represent the probabilities, one per category in the order listed above (0 = cannot belong, 9 = certainly belongs).
The example format is:
{format_line}
"""

TEMPLATE_FIELDS = {"classes", "target_text", "related_texts", "format_line"}


@dataclass(frozen=True)
class ClassInfo:
    name: str
    description: str = ""


@dataclass
class AugmentedText:
    node: int
    base: str
    appended: list = field(default_factory=list)  # (source node, text)

    @property
    def text(self) -> str:
        if not self.appended:
            return self.base
        return "\n".join([self.base, RELATED_HEADER] + [t for _, t in self.appended])


@dataclass
class PromptBundle:
    task: str
    topology: str
    classes: Sequence[ClassInfo]
    payload: AugmentedText
    max_chars_per_text: int = 2000


def load_classes(path) -> list:
    with open(path) as fh:
        return [ClassInfo(str(rec["name"]), str(rec.get("description", ""))) for rec in json.load(fh)]


def _cosine_row(x: np.ndarray, others: np.ndarray) -> np.ndarray:
    nx_ = np.linalg.norm(x)
    no = np.linalg.norm(others, axis=1)
    denom = nx_ * no
    dots = others @ x
    # zero vectors get similarity 0
    return np.divide(dots, denom, out=np.zeros_like(dots, dtype=float), where=denom > 0)


def similarity_weights(g: Graph, community: Sequence[int], alpha: int) -> dict:
    """Softmax of feature cosine similarity from alpha to the rest of its community."""
    others = [v for v in community if v != alpha]
    if not others:
        return {}
    sims = _cosine_row(g.features[alpha], g.features[others])
    e = np.exp(sims - sims.max())
    w = e / e.sum()
    return {v: float(x) for v, x in zip(others, w)}


def augment_text(g: Graph, community, alpha: int, eps: float, k_top: int = 3) -> AugmentedText:
    weights = similarity_weights(g, community, alpha)
    passing = [(w, v) for v, w in weights.items() if w >= eps and g.texts[v]]
    passing.sort(key=lambda p: (-p[0], p[1]))
    return AugmentedText(alpha, g.texts[alpha], [(v, g.texts[v]) for _, v in passing[:k_top]])


def format_line(c: int) -> str:
    digits = [EXAMPLE_DIGITS[i % len(EXAMPLE_DIGITS)] for i in range(c)]
    return "[" + ", ".join(map(str, digits)) + "]"


def _clip(text: str, limit: int) -> str:
    return text if len(text) <= limit else text[:limit]


def check_template(template: str) -> None:
    names = {f for _, f, _, _ in Formatter().parse(template) if f}
    unknown = names - TEMPLATE_FIELDS
    if unknown:
        raise ValueError(f"unknown template placeholders: {sorted(unknown)}")


def build_prompt(bundle: PromptBundle, template: Optional[str] = None) -> str:
    classes = list(bundle.classes)
    if len(classes) < 2:
        raise ValueError("a prompt needs at least two classes")
    cap = bundle.max_chars_per_text
    names = ", ".join(c.name for c in classes)
    lines = [f"{{{names}}}."]
    missing = [c.name for c in classes if not c.description]
    if missing:
        log.info("no description for classes %s; listing names only", missing)
    for c in classes:
        if c.description:
            lines.append("")
            lines.append(f"The description of {{{c.name}}}:")
            lines.append(_clip(c.description, cap))

    related = ""
    if bundle.payload.appended:
        parts = [RELATED_HEADER] + [_clip(t, cap) for _, t in bundle.payload.appended]
        related = "\n" + "\n".join(parts) + "\n"
    target = _clip(bundle.payload.base, cap)
    if bundle.topology:
        target = target + "\n\n" + bundle.topology

    body = (template or DEFAULT_TEMPLATE).format(
        classes="\n".join(lines),
        target_text=target,
        related_texts=related,
        format_line=format_line(len(classes)),
    )
    return f"{bundle.task}\n\n{body}" if bundle.task else body


def topology_description(community_size: int, neighbors_used: int) -> str:
    return (
        f"Paper 1 sits in a tightly connected community of {community_size} papers; "
        f"{neighbors_used} of them were selected as related papers below."
    )

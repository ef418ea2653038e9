"""Encoding-tree guided structure learning for text-attributed graphs."""
from .graph import Graph, InputError, MetricError, edge_homophily, load_graph
from .oracle import Oracle, OracleConfig, OracleError, ParseError, extract_logits, mock_infer, to_soft_label
from .pipeline import PipelineConfig, PipelineError, RunReport, community_score, run_pipeline, select_communities
from .refine import adaptive_cluster, kmeans, refine_tree, silhouette
from .sampler import SamplingConfig, expand_candidates, p_sema, p_topo, run_sampling
from .text import augment_text, build_prompt, similarity_weights
from .tree import EncodingTree, init_flat_tree, minimize, tree_entropy

__version__ = "0.1.0"

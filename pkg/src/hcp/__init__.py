"""Hierarchical context pruning for repository-level code completion prompts."""

from .dependency_graph import DependencySet, ImportRef, dependency_closure, extract_imports, resolve_import
from .hcp_planner import ContextPlan, PruningLevel, SamplingConfig, apply_pruning, build_hcp_plan, plan_context
from .prompt_builder import TEMPLATES, TokenBudget, count_tokens, render
from .relevance import EmbeddingCache, OfflineEmbedder, build_query, score_functions
from .repo_model import FileNode, RepoIndex, index_repository, parse_file, render_node
from .tasks import CompletionTask, FimTriple, make_task

__version__ = "0.1.0"

__all__ = [
    "CompletionTask", "ContextPlan", "DependencySet", "EmbeddingCache", "FileNode", "FimTriple", "ImportRef",
    "OfflineEmbedder", "PruningLevel", "RepoIndex", "SamplingConfig", "TEMPLATES", "TokenBudget", "apply_pruning",
    "build_hcp_plan", "build_query", "count_tokens", "dependency_closure", "extract_imports", "index_repository",
    "make_task", "parse_file", "plan_context", "render", "render_node", "resolve_import", "score_functions",
]

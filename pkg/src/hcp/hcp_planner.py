"""Hierarchical context pruning: sampling, weighting, ranking and plan assembly."""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Union

from .dependency_graph import DependencySet, dependency_closure
from .relevance import EmbeddingCache, EmbeddingProvider, RelevanceScores, build_query, score_functions
from .repo_model import ClassNode, FileNode, FunctionNode, RepoIndex, render_class, render_file, render_function
from .tasks import CompletionTask, FimTriple, split_fim


class PruningLevel(enum.Enum):
    P0 = 0  # nothing removed
    P1 = 1  # global context removed, imports kept
    P2 = 2  # P1 plus every function/method body
    HCP = "hcp"  # P1 base, then per-function tiers


class Tier(enum.Enum):
    TOP_K = "top_k"
    TOP_P_ONLY = "top_p_only"
    PRUNED = "pruned"


TIER_WEIGHT = {Tier.TOP_K: 1.0, Tier.TOP_P_ONLY: 0.5, Tier.PRUNED: 0.0}


@dataclass(frozen=True)
class FunctionWeight:
    ref: str
    weight: float
    tier: Tier


@dataclass(frozen=True)
class SamplingConfig:
    top_k: int = 5
    top_p: float = 0.3
    dependency_depth: int = 1
    query_radius: int = 10

    def __post_init__(self):
        if self.top_k < 0:
            raise ValueError("top_k must be >= 0")
        if not 0.0 <= self.top_p <= 1.0:
            raise ValueError("top_p must lie in [0, 1]")
        if self.dependency_depth < 0:
            raise ValueError("dependency_depth must be >= 0")


@dataclass
class ContextPlan:
    current: FimTriple
    dependency_files: list[tuple[str, str]] = field(default_factory=list)
    other_files: list[tuple[str, str, float]] = field(default_factory=list)
    config: Optional[SamplingConfig] = None
    strategy: str = "hcp"

    def files(self) -> list[str]:
        return [p for p, *_ in self.other_files] + [p for p, _ in self.dependency_files]

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "current": {
                "path": self.current.path,
                "prefix_len": len(self.current.prefix),
                "suffix_len": len(self.current.suffix),
            },
            "dependency": [p for p, _ in self.dependency_files],
            "other": [{"path": p, "score": s, "render_len": len(t)} for p, t, s in self.other_files],
            "config": asdict(self.config) if self.config else None,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Sampling and weights
# ---------------------------------------------------------------------------


def _as_map(scores: Union[RelevanceScores, Mapping[str, float]]) -> Mapping[str, float]:
    return scores.scores if isinstance(scores, RelevanceScores) else scores


def _ranked(scores: Mapping[str, float]) -> list[str]:
    return sorted(scores, key=lambda r: (-scores[r], r))


def sample_top_k(scores, k: int) -> set[str]:
    if k < 0:
        raise ValueError("k must be >= 0")
    return set(_ranked(_as_map(scores))[:k])


def sample_top_p(scores, p: float) -> set[str]:
    """Smallest score-ranked prefix holding at least ``p`` of the clamped score mass."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    smap = _as_map(scores)
    if p == 0.0:
        return set()
    if p >= 1.0:
        return set(smap)
    ranked = _ranked(smap)
    mass = [max(smap[r], 0.0) for r in ranked]
    total = sum(mass)
    if total <= 0.0:
        return set()
    target = p * total
    cum = 0.0
    for i, m in enumerate(mass):
        cum += m
        # relative slack absorbs float drift in the running sum
        if cum >= target * (1 - 1e-12):
            return set(ranked[: i + 1])
    return set(ranked)


def assign_weights(all_refs: Iterable[str], f_k: set[str], f_p: set[str]) -> list[FunctionWeight]:
    f_p = set(f_p) | set(f_k)
    out = []
    for ref in sorted(set(all_refs)):
        if ref in f_k:
            tier = Tier.TOP_K
        elif ref in f_p:
            tier = Tier.TOP_P_ONLY
        else:
            tier = Tier.PRUNED
        out.append(FunctionWeight(ref, TIER_WEIGHT[tier], tier))
    return out


WeightMap = Mapping[str, Union[FunctionWeight, float]]


def _weight(weights: WeightMap, ref: str) -> float:
    w = weights.get(ref, 0.0)
    return w.weight if isinstance(w, FunctionWeight) else float(w)


def class_score(cls: ClassNode, weights: WeightMap, scores) -> float:
    smap = _as_map(scores)
    return sum(_weight(weights, m.ref) * smap.get(m.ref, 0.0) for m in cls.methods)


def file_score(file: FileNode, weights: WeightMap, scores) -> float:
    smap = _as_map(scores)
    total = sum(_weight(weights, f.ref) * smap.get(f.ref, 0.0) for f in file.functions)
    return total + sum(class_score(c, weights, smap) for c in file.classes)


# ---------------------------------------------------------------------------
# Pruning
# ---------------------------------------------------------------------------


def _tier(weights: Optional[Mapping], ref: str) -> Tier:
    if not weights:
        return Tier.PRUNED
    w = weights.get(ref)
    if w is None:
        return Tier.PRUNED
    if isinstance(w, Tier):
        return w
    if isinstance(w, FunctionWeight):
        return w.tier
    return {1.0: Tier.TOP_K, 0.5: Tier.TOP_P_ONLY}.get(float(w), Tier.PRUNED)


def _hcp_function(file: FileNode, fn: FunctionNode, weights) -> Optional[str]:
    tier = _tier(weights, fn.ref)
    if tier is Tier.TOP_K:
        return render_function(file, fn, "full")
    if tier is Tier.TOP_P_ONLY:
        return render_function(file, fn, "header_only")
    return None


def apply_pruning(file: FileNode, level: PruningLevel, weights: Optional[Mapping] = None) -> str:
    """Render ``file`` at a pruning level.

    ``weights`` (ref -> FunctionWeight, Tier or numeric weight) is only read in
    ``HCP`` mode, where functions outside it count as pruned.
    """
    if level is PruningLevel.P0:
        return file.raw_text

    def item(kind: str, span, node) -> Optional[str]:
        if kind == "import":
            return file.span_text(span)
        if kind == "global":
            return None
        if level is PruningLevel.P1:
            return file.span_text(span)
        if kind == "function":
            if level is PruningLevel.P2:
                return render_function(file, node, "header_only")
            return _hcp_function(file, node, weights)
        if level is PruningLevel.P2:
            return render_class(file, node, lambda m: render_function(file, m, "header_only"))
        has_attrs = bool(node.attribute_spans)
        return render_class(file, node, lambda m: _hcp_function(file, m, weights), drop_if_empty=not has_attrs)

    return render_file(file, item)


# ---------------------------------------------------------------------------
# Planning
# ---------------------------------------------------------------------------


def current_triple(task: CompletionTask, index: RepoIndex) -> FimTriple:
    if task.target_file not in index.files:
        raise KeyError(f"task file not indexed: {task.target_file}")
    triple, _ = split_fim(index.files[task.target_file].raw_text, task.line, task.column, task.target_file)
    return triple


def plan_context(
    task: CompletionTask,
    index: RepoIndex,
    dep_set: DependencySet,
    scores,
    config: SamplingConfig = SamplingConfig(),
) -> ContextPlan:
    current = current_triple(task, index)
    focal = task.target_file
    depth = min(config.dependency_depth, max(dep_set.levels))
    dep_paths = dep_set.levels[depth] - {focal}
    # closest dependencies sit nearest to the completion point
    dep_order = [p for p in dep_set.reachable if p in dep_paths]
    dep_order.reverse()
    dependency_files = [(p, apply_pruning(index.files[p], PruningLevel.P1)) for p in dep_order]

    others = sorted(set(index.files) - dep_paths - {focal})
    smap = _as_map(scores)
    other_refs = [fn.ref for p in others for fn in index.files[p].all_functions()]
    pool = {r: smap.get(r, 0.0) for r in other_refs}
    f_k = sample_top_k(pool, config.top_k)
    f_p = sample_top_p(pool, config.top_p) | f_k
    weights = {w.ref: w for w in assign_weights(other_refs, f_k, f_p)}

    rendered = []
    for p in others:
        file = index.files[p]
        score = file_score(file, weights, pool)
        text = apply_pruning(file, PruningLevel.HCP, weights)
        if score == 0.0 and not text.strip():
            continue
        rendered.append((p, text, score))
    # ascending: the best file lands right before the dependency block
    rendered.sort(key=lambda t: (t[2], t[0]))
    return ContextPlan(current, dependency_files, rendered, config, "hcp")


def build_hcp_plan(
    task: CompletionTask,
    index: RepoIndex,
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
    config: SamplingConfig = SamplingConfig(),
) -> ContextPlan:
    """Dependency analysis, relevance scoring and planning for one task."""
    dep_set = dependency_closure(task.target_file, index, max(config.dependency_depth, 1))
    query = build_query(task, index.files[task.target_file], config.query_radius)
    dep_paths = dep_set.levels[config.dependency_depth]
    scope = set(index.files) - set(dep_paths) - {task.target_file}
    scores = score_functions(scope, index, query, provider, cache)
    return plan_context(task, index, dep_set, scores, config)

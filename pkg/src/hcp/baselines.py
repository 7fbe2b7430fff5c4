"""Comparison strategies: in-file only, BM25 retrieval, random concatenation, fixed D/P levels."""

from __future__ import annotations

import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Union

from .dependency_graph import dependency_closure
from .hcp_planner import ContextPlan, PruningLevel, apply_pruning, current_triple
from .relevance import Query
from .repo_model import RepoIndex
from .tasks import CompletionTask

INFINITY = "inf"
Level = Union[int, str]


def infile_only_plan(task: CompletionTask, index: RepoIndex) -> ContextPlan:
    return ContextPlan(current_triple(task, index), strategy="infile")


# ---------------------------------------------------------------------------
# RAG-BM25
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Chunk:
    path: str
    start_line: int
    end_line: int
    text: str

    @property
    def n_lines(self) -> int:
        return self.end_line - self.start_line + 1


def chunk_file(path: str, text: str, chunk_size: int = 10) -> list[Chunk]:
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    lines = text.splitlines(keepends=True)
    return [
        Chunk(path, i + 1, min(i + chunk_size, len(lines)), "".join(lines[i : i + chunk_size]))
        for i in range(0, len(lines), chunk_size)
    ]


def chunk_repository(index: RepoIndex, chunk_size: int = 10, exclude: tuple[str, ...] = ()) -> list[Chunk]:
    out: list[Chunk] = []
    for path in sorted(index.files):
        if path not in exclude:
            out.extend(chunk_file(path, index.files[path].raw_text, chunk_size))
    return out


_WORD = re.compile(r"[a-z_][a-z0-9_]*|[0-9]+")


def bm25_tokenize(text: str) -> list[str]:
    return _WORD.findall(text.lower())


@dataclass
class Bm25Index:
    chunks: list[Chunk]
    k1: float = 1.2
    b: float = 0.75
    doc_freq: dict[str, int] = field(default_factory=dict)
    avg_len: float = 0.0
    _tfs: list[Counter] = field(default_factory=list, repr=False)
    _lens: list[int] = field(default_factory=list, repr=False)
    _postings: dict[str, list[int]] = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, chunks: list[Chunk], k1: float = 1.2, b: float = 0.75) -> "Bm25Index":
        idx = cls(list(chunks), k1, b)
        df: Counter = Counter()
        for i, ch in enumerate(idx.chunks):
            tf = Counter(bm25_tokenize(ch.text))
            idx._tfs.append(tf)
            idx._lens.append(sum(tf.values()))
            for term in tf:
                df[term] += 1
                idx._postings.setdefault(term, []).append(i)
        idx.doc_freq = dict(df)
        idx.avg_len = sum(idx._lens) / len(idx._lens) if idx._lens else 0.0
        return idx

    def idf(self, term: str) -> float:
        n, df = len(self.chunks), self.doc_freq.get(term, 0)
        # Lucene form: never negative, finite for every df in [0, n]
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def scores(self, query_text: str) -> list[float]:
        out = [0.0] * len(self.chunks)
        avg = self.avg_len or 1.0
        for term in bm25_tokenize(query_text):
            posting = self._postings.get(term)
            if not posting:
                continue
            w = self.idf(term)
            for i in posting:
                tf = self._tfs[i][term]
                norm = self.k1 * (1 - self.b + self.b * self._lens[i] / avg)
                out[i] += w * tf * (self.k1 + 1) / (tf + norm)
        return out


def bm25_retrieve(bm25: Bm25Index, query: Union[Query, str], top_n: int = 5) -> list[tuple[Chunk, float]]:
    """Highest-scoring chunks, ties broken by (path, start_line)."""
    if not bm25.chunks:
        return []
    text = query.text if isinstance(query, Query) else query
    scores = bm25.scores(text)
    order = sorted(
        range(len(bm25.chunks)),
        key=lambda i: (-scores[i], bm25.chunks[i].path, bm25.chunks[i].start_line),
    )
    return [(bm25.chunks[i], scores[i]) for i in order[:top_n]]


def rag_plan(task: CompletionTask, index: RepoIndex, snippets: list[tuple[Chunk, float]]) -> ContextPlan:
    """Snippets become pseudo-files named ``path:start-end``, most relevant first."""
    other = [(f"{c.path}:{c.start_line}-{c.end_line}", c.text, s) for c, s in snippets]
    return ContextPlan(current_triple(task, index), other_files=other, strategy="rag-bm25")


def rag_bm25_plan(
    task: CompletionTask,
    index: RepoIndex,
    query: Query,
    chunk_size: int = 10,
    top_n: int = 5,
    bm25: Optional[Bm25Index] = None,
) -> ContextPlan:
    if bm25 is None:
        bm25 = Bm25Index.build(chunk_repository(index, chunk_size, exclude=(task.target_file,)))
    return rag_plan(task, index, bm25_retrieve(bm25, query, top_n))


# ---------------------------------------------------------------------------
# Random-All and fixed levels
# ---------------------------------------------------------------------------


def random_all_plan(task: CompletionTask, index: RepoIndex, seed: int = 0) -> ContextPlan:
    others = sorted(p for p in index.files if p != task.target_file)
    random.Random(f"{seed}:{task.id}").shuffle(others)
    return ContextPlan(
        current_triple(task, index),
        other_files=[(p, index.files[p].raw_text, 0.0) for p in others],
        strategy="random-all",
    )


def _parse_level(level: Level) -> Optional[int]:
    if level in (INFINITY, "∞", math.inf):
        return None
    level = int(level)
    if level < 0:
        raise ValueError("dependency level must be >= 0")
    return level


def d_level_plan(task: CompletionTask, level: Level, index: RepoIndex) -> ContextPlan:
    """All files of ``D_level`` (or the whole repo for ``inf``) at full fidelity."""
    lv = _parse_level(level)
    dep = dependency_closure(task.target_file, index, 4 if lv is None else lv)
    focal = task.target_file
    reach = [p for p in dep.reachable if p != focal]
    # nearest dependencies go closest to the completion point
    dependency = [(p, index.files[p].raw_text) for p in reversed(reach)]
    other = [(p, index.files[p].raw_text, 0.0) for p in dep.remainder] if lv is None else []
    return ContextPlan(current_triple(task, index), dependency, other, strategy=f"d-level:{level}")


def p_level_plan(
    task: CompletionTask,
    level: Union[int, PruningLevel],
    index: RepoIndex,
    dep_depth: Optional[int] = None,
) -> ContextPlan:
    """Every other file at one pruning level.

    With ``dep_depth`` the files of ``D_dep_depth`` are kept at P1 instead and
    placed next to the completion point.
    """
    plevel = level if isinstance(level, PruningLevel) else PruningLevel(int(level))
    focal = task.target_file
    deps: list[str] = []
    if dep_depth is not None:
        dep = dependency_closure(focal, index, dep_depth)
        deps = [p for p in reversed(dep.reachable) if p != focal]
    rest = sorted(set(index.files) - set(deps) - {focal})
    dependency = [(p, apply_pruning(index.files[p], PruningLevel.P1)) for p in deps]
    other = [(p, apply_pruning(index.files[p], plevel), 0.0) for p in rest]
    name = f"p-level:{plevel.value}" + (f"+d:{dep_depth}" if dep_depth is not None else "")
    return ContextPlan(current_triple(task, index), dependency, other, strategy=name)

"""Completion backends, EM/ES scoring, evaluation runs and report comparison."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import statistics
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol, Sequence, Union

from rapidfuzz.distance import Levenshtein

from . import baselines
from .hcp_planner import ContextPlan, SamplingConfig, build_hcp_plan
from .prompt_builder import MAX_NEW_TOKENS, TokenBudget, count_tokens, get_template, render, render_unbounded
from .relevance import EmbeddingCache, EmbeddingProvider, OfflineEmbedder, build_query
from .repo_model import RepoIndex, index_repository
from .tasks import CompletionTask

logger = logging.getLogger(__name__)

COMPLETION_KEY_ENV = "HCP_COMPLETION_API_KEY"


class BackendError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _normalize(text: str) -> str:
    return text.rstrip()


def exact_match(prediction: str, reference: str) -> int:
    return int(_normalize(prediction) == _normalize(reference))


def edit_similarity(prediction: str, reference: str) -> float:
    """``100 * (1 - lev / max_len)`` on trailing-whitespace-trimmed strings."""
    a, b = _normalize(prediction), _normalize(reference)
    longest = max(len(a), len(b))
    if longest == 0:
        return 100.0
    return 100.0 * (1.0 - Levenshtein.distance(a, b) / longest)


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


class CompletionBackend(Protocol):
    def generate(self, prompt: str, max_new_tokens: int = MAX_NEW_TOKENS) -> str: ...


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class ReplayBackend:
    """Serves recorded completions keyed by the SHA-256 of the prompt."""

    def __init__(self, records: Optional[dict[str, str]] = None):
        self.records = dict(records or {})

    @classmethod
    def load(cls, path: Union[str, os.PathLike]) -> "ReplayBackend":
        records = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    records[rec["prompt_sha256"]] = rec["completion"]
        return cls(records)

    def save(self, path: Union[str, os.PathLike]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for key in sorted(self.records):
                fh.write(json.dumps({"prompt_sha256": key, "completion": self.records[key]}) + "\n")

    def add(self, prompt: str, completion: str) -> None:
        self.records[prompt_sha256(prompt)] = completion

    def generate(self, prompt: str, max_new_tokens: int = MAX_NEW_TOKENS) -> str:
        try:
            return self.records[prompt_sha256(prompt)]
        except KeyError:
            raise BackendError("no recorded completion for this prompt") from None


class EchoBackend:
    """Returns the same canned text for every prompt."""

    def __init__(self, text: str = "pass\n"):
        self.text = text

    def generate(self, prompt: str, max_new_tokens: int = MAX_NEW_TOKENS) -> str:
        return self.text


class OpenAICompletionBackend:
    """Greedy decoding against an OpenAI-compatible ``/completions`` endpoint."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: Optional[str] = None,
        attempts: int = 3,
        backoff: float = 0.5,
        timeout: float = 120.0,
        transport=None,
    ):
        import httpx

        self.model = model
        self.attempts = attempts
        self.backoff = backoff
        key = os.environ.get(COMPLETION_KEY_ENV) or api_key
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(base_url=base_url.rstrip("/"), headers=headers, timeout=timeout, transport=transport)

    def generate(self, prompt: str, max_new_tokens: int = MAX_NEW_TOKENS) -> str:
        import httpx

        payload = {"model": self.model, "prompt": prompt, "max_tokens": max_new_tokens, "temperature": 0}
        last: Optional[Exception] = None
        for attempt in range(self.attempts):
            try:
                resp = self._client.post("/completions", json=payload)
                resp.raise_for_status()
                return resp.json()["choices"][0]["text"]
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last = exc
                if attempt + 1 < self.attempts:
                    time.sleep(self.backoff * 2**attempt)
        raise BackendError(f"completion request failed after {self.attempts} attempts: {last}")


def first_line(text: str) -> str:
    return text.split("\n", 1)[0]


def complete(backend: CompletionBackend, prompt: str, max_new_tokens: int = MAX_NEW_TOKENS, greedy: bool = True) -> tuple[str, str]:
    """Returns ``(first line, raw generation)``."""
    if not greedy:
        raise ValueError("only greedy decoding is supported")
    raw = backend.generate(prompt, max_new_tokens)
    return first_line(raw), raw


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


@dataclass
class StrategySettings:
    top_k: int = 5
    top_p: float = 0.3
    d_level: int = 1
    radius: int = 10
    chunk_size: int = 10
    top_n: int = 5
    seed: int = 0
    provider: Optional[EmbeddingProvider] = None
    cache: Optional[EmbeddingCache] = None


Strategy = Callable[[CompletionTask, RepoIndex], ContextPlan]


def make_strategy(descriptor: str, settings: Optional[StrategySettings] = None) -> Strategy:
    """Build a planner from ``infile``, ``rag-bm25``, ``random-all``, ``d-level:N``,
    ``p-level:N[+d:M]`` or ``hcp``."""
    s = settings or StrategySettings()
    name, _, arg = descriptor.partition(":")
    if name == "infile":
        return baselines.infile_only_plan
    if name == "rag-bm25":

        def rag(task: CompletionTask, index: RepoIndex) -> ContextPlan:
            query = build_query(task, index.files[task.target_file], s.radius)
            return baselines.rag_bm25_plan(task, index, query, s.chunk_size, s.top_n)

        return rag
    if name == "random-all":
        return lambda task, index: baselines.random_all_plan(task, index, s.seed)
    if name == "d-level":
        level = arg or "1"
        if level not in (baselines.INFINITY, "∞"):
            int(level)
        return lambda task, index: baselines.d_level_plan(task, level, index)
    if name == "p-level":
        plevel, _, dep = arg.partition("+")
        dep_depth = int(dep.split(":", 1)[1]) if dep else None
        return lambda task, index: baselines.p_level_plan(task, int(plevel), index, dep_depth)
    if name == "hcp":
        config = SamplingConfig(s.top_k, s.top_p, s.d_level, s.radius)
        provider = s.provider or OfflineEmbedder()
        cache = s.cache if s.cache is not None else EmbeddingCache()
        return lambda task, index: build_hcp_plan(task, index, provider, cache, config)
    raise ValueError(f"unknown strategy {descriptor!r}")


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


@dataclass
class EvalConfig:
    family: str = "starcoder2"
    model_max_length: Optional[int] = None
    max_new_tokens: int = MAX_NEW_TOKENS
    workers: int = 4
    counter: Callable[[str], int] = count_tokens

    def budget(self) -> TokenBudget:
        if self.model_max_length is None:
            return TokenBudget.for_family(self.family)
        return TokenBudget(self.model_max_length, self.max_new_tokens)


@dataclass
class EvalReport:
    strategy: str
    records: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def aggregates(self) -> dict:
        return aggregate(self.records)

    def to_json(self) -> dict:
        return {"meta": {"strategy": self.strategy, **self.meta}, "aggregates": self.aggregates, "records": self.records}

    def write(self, path: Union[str, os.PathLike]) -> None:
        """Atomic write via a temp file in the destination directory."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: Union[str, os.PathLike]) -> "EvalReport":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        meta = dict(data.get("meta", {}))
        return cls(meta.pop("strategy", ""), data.get("records", []), meta)


def aggregate(records: Sequence[dict]) -> dict:
    ok = [r for r in records if not r.get("error")]
    n = len(ok)
    return {
        "count": n,
        "errors": len(records) - n,
        "EM": 100.0 * sum(r["em"] for r in ok) / n if n else 0.0,
        "ES": sum(r["es"] for r in ok) / n if n else 0.0,
    }


class IndexCache:
    """One RepoIndex per repository root, built on first use."""

    def __init__(self):
        self._indexes: dict[str, RepoIndex] = {}
        self._lock = threading.Lock()

    def get(self, root: str) -> RepoIndex:
        with self._lock:
            if root not in self._indexes:
                self._indexes[root] = index_repository(root)
            return self._indexes[root]


def evaluate_task(
    task: CompletionTask,
    strategy: Strategy,
    backend: CompletionBackend,
    config: EvalConfig,
    indexes: IndexCache,
) -> dict:
    record = {"id": task.id, "target_file": task.target_file, "ground_truth": task.ground_truth}
    start = time.perf_counter()
    try:
        index = indexes.get(task.repo_root)
        plan = strategy(task, index)
        prompt = render(plan, get_template(config.family), config.counter, config.budget(), Path(task.repo_root).name)
        prediction, raw = complete(backend, prompt.text, config.max_new_tokens)
    except Exception as exc:  # per-task failures are recorded, the run continues
        logger.warning("task %s failed: %s", task.id, exc)
        record.update(error=f"{type(exc).__name__}: {exc}", latency=time.perf_counter() - start)
        return record
    record.update(
        prediction=prediction,
        raw=raw,
        em=exact_match(prediction, task.ground_truth),
        es=edit_similarity(prediction, task.ground_truth),
        prompt_tokens=prompt.counted_tokens,
        truncated=prompt.truncated,
        latency=time.perf_counter() - start,
    )
    return record


def run_eval(
    tasks: Iterable[CompletionTask],
    strategy: Union[str, Strategy],
    backend: CompletionBackend,
    config: Optional[EvalConfig] = None,
    settings: Optional[StrategySettings] = None,
    out_path: Optional[Union[str, os.PathLike]] = None,
) -> EvalReport:
    config = config or EvalConfig()
    name = strategy if isinstance(strategy, str) else getattr(strategy, "__name__", "custom")
    planner = make_strategy(strategy, settings) if isinstance(strategy, str) else strategy
    indexes = IndexCache()
    tasks = list(tasks)
    if config.workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(lambda t: evaluate_task(t, planner, backend, config, indexes), tasks))
    else:
        records = [evaluate_task(t, planner, backend, config, indexes) for t in tasks]
    records.sort(key=lambda r: r["id"])
    report = EvalReport(name, records, {"family": config.family, "model_max_length": config.budget().budget})
    if out_path is not None:
        report.write(out_path)
    return report


@dataclass(frozen=True)
class HitDiff:
    gained: int
    lost: int

    @property
    def net(self) -> int:
        return self.gained - self.lost


def diff_reports(a: EvalReport, b: EvalReport) -> HitDiff:
    """EM flips from ``a`` to ``b`` over tasks scored in both."""
    ea = {r["id"]: r["em"] for r in a.records if not r.get("error")}
    eb = {r["id"]: r["em"] for r in b.records if not r.get("error")}
    common = ea.keys() & eb.keys()
    gained = sum(1 for i in common if not ea[i] and eb[i])
    lost = sum(1 for i in common if ea[i] and not eb[i])
    return HitDiff(gained, lost)


# ---------------------------------------------------------------------------
# Prompt length statistics
# ---------------------------------------------------------------------------

STAT_LEVELS: tuple = (0, 1, 2, 3, 4, "inf")


def prompt_length_stats(
    tasks: Iterable[CompletionTask],
    family: str = "starcoder2",
    counter: Callable[[str], int] = count_tokens,
    levels: Sequence = STAT_LEVELS,
) -> dict[str, dict]:
    """Median and mean untruncated prompt length per dependency level."""
    template = get_template(family)
    indexes = IndexCache()
    lengths: dict[str, list[int]] = {str(lv): [] for lv in levels}
    for task in tasks:
        index = indexes.get(task.repo_root)
        for lv in levels:
            plan = baselines.d_level_plan(task, lv, index)
            lengths[str(lv)].append(counter(render_unbounded(plan, template, Path(task.repo_root).name)))
    return {
        lv: {"median": statistics.median(v), "average": statistics.fmean(v), "count": len(v)}
        for lv, v in lengths.items()
        if v
    }

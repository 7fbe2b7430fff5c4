"""Completion queries, cached embeddings and cosine relevance of functions."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from .repo_model import FileNode, RepoIndex, render_function

logger = logging.getLogger(__name__)

DEFAULT_RADIUS = 10
API_KEY_ENV = "HCP_EMBEDDING_API_KEY"


class ProviderError(RuntimeError):
    def __init__(self, message: str, failed_indices: Sequence[int] = ()):
        super().__init__(message)
        self.failed_indices = list(failed_indices)


class CachePoisonError(RuntimeError):
    pass


@dataclass(frozen=True)
class Query:
    text: str
    anchor: tuple[str, int, int]
    window_radius: int = DEFAULT_RADIUS


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    provider_id: str
    model_id: str

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class RelevanceScores:
    scores: dict[str, float]
    query: Optional[Query] = None

    def restricted(self, refs: Iterable[str]) -> "RelevanceScores":
        keep = set(refs)
        return RelevanceScores({r: s for r, s in self.scores.items() if r in keep}, self.query)


def build_query(task, file: FileNode, radius: int = DEFAULT_RADIUS) -> Query:
    """The ``radius`` lines around the cursor, with the cursor line cut at the cursor.

    ``task`` needs ``line`` (1-based) and ``column`` (0-based, characters).
    """
    lines = file.raw_text.splitlines()
    line, column = task.line, task.column
    if not 1 <= line <= max(len(lines), 1):
        raise IndexError(f"cursor line {line} outside {file.path} (1..{len(lines)})")
    current = lines[line - 1] if lines else ""
    if not 0 <= column <= len(current):
        raise IndexError(f"cursor column {column} outside line {line} of {file.path}")
    before = lines[max(0, line - 1 - radius) : line - 1]
    after = lines[line : line + radius]
    text = "\n".join([*before, current[:column], *after])
    return Query(text=text, anchor=(file.path, line, column), window_radius=radius)


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------


class EmbeddingProvider(Protocol):
    provider_id: str
    model_id: str
    dimension: int

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class OfflineEmbedder:
    """Deterministic bag-of-identifiers embedder, hashed into ``dimension`` buckets."""

    provider_id = "offline"
    model_id = "bag-of-identifiers"

    def __init__(self, dimension: int = 256):
        self.dimension = dimension
        self.calls = 0
        self.texts_sent = 0

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.dimension

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        self.calls += 1
        self.texts_sent += len(texts)
        out = []
        for text in texts:
            vec = np.zeros(self.dimension)
            for tok in _IDENT.findall(text):
                vec[self._bucket(tok)] += 1.0
            norm = np.linalg.norm(vec)
            if norm > 0:
                vec /= norm
            out.append(vec.tolist())
        return out


class OpenAIEmbeddingProvider:
    """Client for an OpenAI-compatible ``/embeddings`` endpoint."""

    provider_id = "openai-compatible"

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: Optional[str] = None,
        dimension: int = 1536,
        attempts: int = 3,
        backoff: float = 0.5,
        timeout: float = 60.0,
        transport=None,
    ):
        import httpx

        self.model_id = model
        self.dimension = dimension
        self.attempts = attempts
        self.backoff = backoff
        key = os.environ.get(API_KEY_ENV) or api_key
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(base_url=base_url.rstrip("/"), headers=headers, timeout=timeout, transport=transport)

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        import httpx

        last: Optional[Exception] = None
        for attempt in range(self.attempts):
            try:
                resp = self._client.post("/embeddings", json={"model": self.model_id, "input": list(texts)})
                resp.raise_for_status()
                data = sorted(resp.json()["data"], key=lambda d: d.get("index", 0))
                return [d["embedding"] for d in data]
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last = exc
                if attempt + 1 < self.attempts:
                    time.sleep(self.backoff * 2**attempt)
        raise ProviderError(f"embedding request failed after {self.attempts} attempts: {last}")


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------


def cache_key(provider_id: str, model_id: str, text: str) -> str:
    h = hashlib.sha256()
    for part in (provider_id, model_id, text):
        h.update(part.encode("utf-8"))
        h.update(b"\0")
    return h.hexdigest()


class EmbeddingCache:
    """Append-only JSON-Lines store of vectors keyed by content hash."""

    FILENAME = "embeddings.jsonl"

    def __init__(self, directory: Optional[os.PathLike] = None):
        self.path = Path(directory) / self.FILENAME if directory is not None else None
        self._mem: dict[str, list[float]] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        lines = self.path.read_text(encoding="utf-8").splitlines()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                self._mem[rec["key"]] = rec["vector"]
            except (ValueError, KeyError):
                if i == len(lines) - 1:
                    logger.warning("dropping corrupt trailing cache record in %s", self.path)
                    self._truncate_to(lines[:i])
                else:
                    raise CachePoisonError(f"corrupt record at line {i + 1} of {self.path}")

    def _truncate_to(self, lines: list[str]) -> None:
        self.path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")

    def __len__(self) -> int:
        return len(self._mem)

    def get(self, key: str) -> Optional[list[float]]:
        return self._mem.get(key)

    def put_many(self, records: dict[str, list[float]]) -> None:
        with self._lock:
            self._mem.update(records)
            if self.path is None:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                for key, vec in records.items():
                    fh.write(json.dumps({"key": key, "vector": vec}) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def clear(self) -> None:
        with self._lock:
            self._mem.clear()
            if self.path is not None and self.path.exists():
                self.path.unlink()


def embed_batch(
    texts: Sequence[str],
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
    batch_size: int = 64,
    max_in_flight: int = 4,
) -> list[EmbeddingVector]:
    """Embed ``texts`` cache-first; only misses reach the provider."""
    if not texts:
        raise ValueError("embed_batch needs at least one text")
    cache = cache if cache is not None else EmbeddingCache()
    keys = [cache_key(provider.provider_id, provider.model_id, t) for t in texts]
    vectors: dict[str, list[float]] = {}
    missing: dict[str, int] = {}
    for i, key in enumerate(keys):
        hit = cache.get(key)
        if hit is not None:
            if len(hit) != provider.dimension:
                raise CachePoisonError(
                    f"cached vector has dimension {len(hit)}, provider declares {provider.dimension}"
                )
            vectors[key] = hit
        elif key not in missing:
            missing[key] = i

    if missing:
        order = list(missing)
        batches = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]

        def run(batch: list[str]) -> dict[str, list[float]]:
            try:
                out = provider.embed([texts[missing[k]] for k in batch])
            except ProviderError as exc:
                raise ProviderError(str(exc), [missing[k] for k in batch]) from exc
            if len(out) != len(batch):
                raise ProviderError("provider returned wrong number of vectors", [missing[k] for k in batch])
            for vec in out:
                if len(vec) != provider.dimension or not all(math.isfinite(v) for v in vec):
                    raise ProviderError("provider returned a malformed vector", [missing[k] for k in batch])
            return dict(zip(batch, out))

        if len(batches) == 1 or max_in_flight <= 1:
            results = [run(b) for b in batches]
        else:
            with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
                results = list(pool.map(run, batches))
        fresh: dict[str, list[float]] = {}
        for r in results:
            fresh.update(r)
        cache.put_many(fresh)
        vectors.update(fresh)

    return [EmbeddingVector(tuple(vectors[k]), provider.provider_id, provider.model_id) for k in keys]


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    va, vb = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(va @ vb / (na * nb), -1.0, 1.0))


def candidate_texts(scope: Iterable[str], index: RepoIndex) -> dict[str, str]:
    """Full source of every function and method in ``scope``, keyed by ref."""
    out = {}
    for path in sorted(scope):
        file = index.files[path]
        for fn in file.all_functions():
            out[fn.ref] = render_function(file, fn, "full")
    return out


def score_functions(
    scope: Iterable[str],
    index: RepoIndex,
    query: Query,
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
) -> RelevanceScores:
    candidates = candidate_texts(scope, index)
    if not candidates:
        return RelevanceScores({}, query)
    refs = list(candidates)
    vecs = embed_batch([query.text, *(candidates[r] for r in refs)], provider, cache)
    q = np.asarray(vecs[0].values)
    mat = np.asarray([v.values for v in vecs[1:]])
    qn = np.linalg.norm(q)
    norms = np.linalg.norm(mat, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = (mat @ q) / (norms * qn)
    sims = np.where((norms == 0) | (qn == 0), 0.0, np.clip(sims, -1.0, 1.0))
    return RelevanceScores({r: float(s) for r, s in zip(refs, sims)}, query)

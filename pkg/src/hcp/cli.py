"""Command-line entry point: ``hcp {index,prompt,eval,diff,stats,cache}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

from .eval_harness import (
    BackendError,
    EchoBackend,
    EvalConfig,
    EvalReport,
    OpenAICompletionBackend,
    ReplayBackend,
    StrategySettings,
    diff_reports,
    make_strategy,
    prompt_length_stats,
    run_eval,
)
from .prompt_builder import BudgetError, TokenBudget, get_template, render
from .relevance import EmbeddingCache, OfflineEmbedder, OpenAIEmbeddingProvider, ProviderError, candidate_texts, embed_batch
from .repo_model import dump_index, index_repository
from .tasks import CompletionTask, load_tasks

logger = logging.getLogger("hcp")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_BUDGET, EXIT_BACKEND = 0, 2, 3, 4, 5


@dataclass
class Config:
    repo_root: str = "."
    family: str = "starcoder2"
    model_max_length: Optional[int] = None
    max_new_tokens: int = 32
    strategy: str = "hcp"
    top_k: int = 5
    top_p: float = 0.3
    d_level: int = 1
    radius: int = 10
    chunk_size: int = 10
    top_n: int = 5
    seed: int = 0
    embedding_provider: str = "offline"
    embedding_base_url: str = "https://api.openai.com/v1"
    embedding_model: str = "text-embedding-ada-002"
    embedding_dimension: int = 1536
    embedding_api_key: Optional[str] = None
    cache_dir: Optional[str] = ".hcp_cache"
    backend: str = "echo"
    backend_base_url: str = "http://localhost:8000/v1"
    backend_model: str = ""
    backend_api_key: Optional[str] = None
    workers: int = 4

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: Optional[str]) -> "Config":
        if path is None:
            return cls()
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def dumps(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def provider(self):
        if self.embedding_provider == "offline":
            return OfflineEmbedder()
        if self.embedding_provider == "openai":
            return OpenAIEmbeddingProvider(
                self.embedding_base_url, self.embedding_model, self.embedding_api_key, self.embedding_dimension
            )
        raise ValueError(f"unknown embedding provider {self.embedding_provider!r}")

    def cache(self) -> EmbeddingCache:
        return EmbeddingCache(self.cache_dir)

    def settings(self) -> StrategySettings:
        return StrategySettings(
            self.top_k, self.top_p, self.d_level, self.radius, self.chunk_size, self.top_n, self.seed,
            provider=self.provider(), cache=self.cache(),
        )

    def eval_config(self) -> EvalConfig:
        return EvalConfig(self.family, self.model_max_length, self.max_new_tokens, self.workers)

    def budget(self) -> TokenBudget:
        return self.eval_config().budget()

    def make_backend(self):
        kind, _, arg = self.backend.partition(":")
        if kind == "echo":
            return EchoBackend(arg or "pass\n")
        if kind == "replay":
            return ReplayBackend.load(arg)
        if kind == "openai":
            return OpenAICompletionBackend(self.backend_base_url, self.backend_model, self.backend_api_key)
        raise ValueError(f"unknown backend {self.backend!r}")


_OVERRIDES = [
    ("--repo", "repo_root", str),
    ("--family", "family", str),
    ("--model-max-length", "model_max_length", int),
    ("--strategy", "strategy", str),
    ("--top-k", "top_k", int),
    ("--top-p", "top_p", float),
    ("--d-level", "d_level", int),
    ("--radius", "radius", int),
    ("--chunk-size", "chunk_size", int),
    ("--top-n", "top_n", int),
    ("--seed", "seed", int),
    ("--embedding-provider", "embedding_provider", str),
    ("--cache-dir", "cache_dir", str),
    ("--backend", "backend", str),
    ("--workers", "workers", int),
]


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override it")
    for flag, dest, typ in _OVERRIDES:
        p.add_argument(flag, dest=dest, type=typ, default=None)


def _config(args: argparse.Namespace) -> Config:
    cfg = Config.load(args.config)
    for _, dest, _ in _OVERRIDES:
        value = getattr(args, dest, None)
        if value is not None:
            setattr(cfg, dest, value)
    return cfg


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_index(args) -> int:
    index = index_repository(args.root)
    if args.out:
        dump_index(index, args.out)
    n_fn = sum(len(f.functions) + sum(len(c.methods) for c in f.classes) for f in index.files.values())
    n_cls = sum(len(f.classes) for f in index.files.values())
    degraded = sum(f.degraded for f in index.files.values())
    summary = {
        "files": len(index.files),
        "functions": n_fn,
        "classes": n_cls,
        "degraded": degraded,
        "failures": len(index.errors),
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_prompt(args) -> int:
    cfg = _config(args)
    index = index_repository(cfg.repo_root)
    if args.file not in index.files:
        raise FileNotFoundError(f"{args.file} not found under {cfg.repo_root}")
    task = CompletionTask("cli", cfg.repo_root, args.file, args.line, args.column, "?")
    plan = make_strategy(cfg.strategy, cfg.settings())(task, index)
    prompt = render(plan, get_template(cfg.family), budget=cfg.budget(), repo_name=Path(index.root).name)
    if args.out:
        Path(args.out).write_text(prompt.text, encoding="utf-8")
    else:
        sys.stdout.write(prompt.text)
    if args.stats:
        print(
            json.dumps(
                {
                    "counted_tokens": prompt.counted_tokens,
                    "budget": cfg.budget().budget,
                    "truncated": prompt.truncated,
                    "segments_dropped": prompt.segments_dropped,
                    "partial_head": prompt.partial_head,
                }
            ),
            file=sys.stderr,
        )
    return EXIT_OK


def _print_aggregates(rows: list[tuple[str, dict]]) -> None:
    print(f"{'strategy':<24} {'EM':>8} {'ES':>8} {'n':>6} {'err':>5}")
    for name, agg in rows:
        print(f"{name:<24} {agg['EM']:>8.2f} {agg['ES']:>8.2f} {agg['count']:>6} {agg['errors']:>5}")


def cmd_eval(args) -> int:
    cfg = _config(args)
    tasks = load_tasks(args.tasks)
    report = run_eval(tasks, cfg.strategy, cfg.make_backend(), cfg.eval_config(), cfg.settings(), args.out)
    _print_aggregates([(cfg.strategy, report.aggregates)])
    return EXIT_OK


def cmd_diff(args) -> int:
    a, b = EvalReport.load(args.a), EvalReport.load(args.b)
    d = diff_reports(a, b)
    _print_aggregates([(a.strategy or "a", a.aggregates), (b.strategy or "b", b.aggregates)])
    print(f"gained {d.gained}  lost {d.lost}  net {d.net:+d}")
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = _config(args)
    tasks = load_tasks(args.tasks)
    stats = prompt_length_stats(tasks, cfg.family)
    print(f"{'level':<6} {'median':>10} {'average':>10} {'n':>5}")
    for level, row in stats.items():
        label = "inf" if level == "inf" else level
        print(f"{label:<6} {row['median']:>10.1f} {row['average']:>10.1f} {row['count']:>5}")
    if args.out:
        Path(args.out).write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_cache(args) -> int:
    cfg = _config(args)
    cache = cfg.cache()
    if args.action == "clear":
        n = len(cache)
        cache.clear()
        print(f"cleared {n} cached embeddings")
        return EXIT_OK
    index = index_repository(cfg.repo_root)
    texts = list(candidate_texts(index.files, index).values())
    before = len(cache)
    if texts:
        embed_batch(texts, cfg.provider(), cache)
    print(f"warmed {len(cache) - before} new embeddings ({len(texts)} functions)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hcp", description="Hierarchical context pruning for repository-level completion.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="parse a repository and report node counts")
    p.add_argument("root")
    p.add_argument("--out", help="write a JSON-Lines index dump")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("prompt", help="build the completion prompt for one cursor")
    _add_config_args(p)
    p.add_argument("file", help="repo-relative path of the file being completed")
    p.add_argument("line", type=int, help="1-based cursor line")
    p.add_argument("column", type=int, help="0-based cursor column")
    p.add_argument("--stats", action="store_true", help="print token counts to stderr")
    p.add_argument("--out")
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("eval", help="run a strategy over a task file")
    _add_config_args(p)
    p.add_argument("--tasks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diff", help="hit-count changes between two reports")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("stats", help="prompt length per dependency level")
    _add_config_args(p)
    p.add_argument("--tasks", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("cache", help="manage the embedding cache")
    _add_config_args(p)
    p.add_argument("action", choices=["warm", "clear"])
    p.set_defaults(func=cmd_cache)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (BackendError, ProviderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

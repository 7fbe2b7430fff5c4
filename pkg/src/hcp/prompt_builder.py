"""Model-family FIM prompt rendering under a token budget."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .hcp_planner import ContextPlan
from .tasks import FimTriple

TokenCounter = Callable[[str], int]

DEFAULT_MAX_LENGTH = {"deepseekcoder": 16352, "starcoder2": 16352, "codegemma": 8160}
MAX_NEW_TOKENS = 32


class BudgetError(ValueError):
    pass


_TOKEN = re.compile(r"\.\.\.|[^\W\d]\w*|\d+|[^\w\s]")


def count_tokens(text: str) -> int:
    """Identifiers, digit runs and single punctuation marks; whitespace is free.

    An ellipsis counts once so a placeholder body never outweighs the body it replaces.
    """
    return len(_TOKEN.findall(text))


@dataclass(frozen=True)
class PromptTemplate:
    family: str
    fim_prefix: str
    fim_suffix: str
    fim_middle: str
    repo_token: Optional[str] = None
    # None selects the "#path" comment-line convention
    file_sep: Optional[str] = None

    def repo_header(self, repo_name: str) -> str:
        return f"{self.repo_token}{repo_name}" if self.repo_token else ""

    def wrap(self, path: str, content: str) -> "Segment":
        if self.file_sep is None:
            return Segment(f"#{path}\n", content, "\n")
        return Segment(f"{self.file_sep}{path}\n", content, "")

    def fim(self, triple: FimTriple) -> str:
        return f"{self.fim_prefix}{triple.prefix}{self.fim_suffix}{triple.suffix}{self.fim_middle}"


TEMPLATES = {
    "deepseekcoder": PromptTemplate("deepseekcoder", "<|fim_begin|>", "<|fim_hole|>", "<|fim_end|>"),
    "starcoder2": PromptTemplate(
        "starcoder2", "<fim_prefix>", "<fim_suffix>", "<fim_middle>", repo_token="<repo_name>", file_sep="<file_sep>"
    ),
    "codegemma": PromptTemplate(
        "codegemma", "<|fim_prefix|>", "<|fim_suffix|>", "<|fim_middle|>", file_sep="<|file_separator|>"
    ),
}


def get_template(family: str) -> PromptTemplate:
    try:
        return TEMPLATES[family]
    except KeyError:
        raise ValueError(f"unknown template family {family!r}; choose from {sorted(TEMPLATES)}") from None


@dataclass(frozen=True)
class TokenBudget:
    model_max_length: int
    reserve_for_generation: int = MAX_NEW_TOKENS

    def __post_init__(self):
        if self.model_max_length <= 0:
            raise ValueError("model_max_length must be positive")

    @property
    def budget(self) -> int:
        return self.model_max_length

    @classmethod
    def for_family(cls, family: str) -> "TokenBudget":
        return cls(DEFAULT_MAX_LENGTH[family])


@dataclass(frozen=True)
class Segment:
    """One cross-file block: wrapper head, file body, wrapper tail."""

    head: str
    body: str
    tail: str = ""

    @property
    def text(self) -> str:
        return self.head + self.body + self.tail


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    counted_tokens: int
    truncated: bool = False
    segments_dropped: int = 0
    partial_head: bool = False


def _trim_lines(seg: Segment, room: int, counter: TokenCounter) -> Optional[Segment]:
    """Drop leading body lines of ``seg`` until it costs at most ``room``."""
    lines = seg.body.splitlines(keepends=True)

    def fits(j: int) -> bool:
        return counter(seg.head + "".join(lines[j:]) + seg.tail) <= room

    if not fits(len(lines)):
        return None
    lo, hi = 0, len(lines)
    while lo < hi:
        mid = (lo + hi) // 2
        if fits(mid):
            hi = mid
        else:
            lo = mid + 1
    return Segment(seg.head, "".join(lines[lo:]), seg.tail)


def truncate_left(
    segments: Sequence[Segment],
    fim_triple_cost: int,
    budget: int,
    counter: TokenCounter = count_tokens,
    overhead: int = 0,
) -> tuple[list[Segment], bool]:
    """Keep the longest suffix of ``segments`` that fits next to the FIM triple.

    Whole leading segments go first; the earliest survivor may lose leading
    lines. ``overhead`` is charged once when anything is kept.
    """
    room = budget - fim_triple_cost - overhead
    costs = [counter(s.text) for s in segments]
    if sum(costs) <= room:
        return list(segments), False
    start, tail_cost = len(segments), 0
    while start > 0 and tail_cost + costs[start - 1] <= room:
        start -= 1
        tail_cost += costs[start]
    kept = list(segments[start:])
    partial = False
    if start > 0:
        trimmed = _trim_lines(segments[start - 1], room - tail_cost, counter)
        if trimmed is not None and trimmed.body:
            kept.insert(0, trimmed)
            partial = True
    return kept, partial


def render(
    plan: ContextPlan,
    template: PromptTemplate,
    counter: TokenCounter = count_tokens,
    budget: Optional[TokenBudget] = None,
    repo_name: str = "",
) -> RenderedPrompt:
    budget = budget or TokenBudget.for_family(template.family)
    fim = template.fim(plan.current)
    fim_cost = counter(fim)
    limit = budget.budget
    if fim_cost > limit:
        raise BudgetError(f"in-file context alone needs {fim_cost} tokens, budget is {limit}")

    segments = [template.wrap(p, text) for p, text, *_ in plan.other_files]
    segments += [template.wrap(p, text) for p, text in plan.dependency_files]
    header = template.repo_header(repo_name)
    overhead = counter(header) if header else 0

    def assemble(kept: list[Segment]) -> str:
        if not kept:
            return fim
        return header + "".join(s.text for s in kept) + fim

    slack = 0
    while True:
        kept, partial = truncate_left(segments, fim_cost, limit - slack, counter, overhead)
        text = assemble(kept)
        total = counter(text)
        if total <= limit:
            break
        # the counter is not additive over this split; tighten and retry
        slack += total - limit
    dropped = len(segments) - len(kept)
    return RenderedPrompt(
        text=text,
        counted_tokens=total,
        truncated=dropped > 0 or partial,
        segments_dropped=dropped,
        partial_head=partial,
    )


def render_unbounded(plan: ContextPlan, template: PromptTemplate, repo_name: str = "") -> str:
    """Full prompt text with no truncation, for length statistics."""
    segments = [template.wrap(p, t) for p, t, *_ in plan.other_files]
    segments += [template.wrap(p, t) for p, t in plan.dependency_files]
    fim = template.fim(plan.current)
    if not segments:
        return fim
    return template.repo_header(repo_name) + "".join(s.text for s in segments) + fim

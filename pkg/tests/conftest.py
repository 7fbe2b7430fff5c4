import os
import sysconfig
from pathlib import Path

import hypothesis
import pytest

from hcp.synthetic import write_repo

hypothesis.settings.register_profile("ci", deadline=None, max_examples=200)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=25)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"
GOLDEN = Path(__file__).parent / "golden"

STDLIB = Path(sysconfig.get_paths()["stdlib"])
STDLIB_SAMPLE = [
    "argparse.py", "ast.py", "bisect.py", "calendar.py", "dataclasses.py", "difflib.py",
    "enum.py", "fnmatch.py", "fractions.py", "functools.py", "heapq.py", "inspect.py",
    "ipaddress.py", "json/__init__.py", "json/decoder.py", "json/encoder.py", "json/scanner.py",
    "logging/__init__.py", "logging/handlers.py", "pathlib.py", "pprint.py", "queue.py",
    "random.py", "shlex.py", "statistics.py", "string.py", "textwrap.py", "tokenize.py",
    "typing.py", "uuid.py", "email/message.py", "email/utils.py", "collections/__init__.py",
    "concurrent/futures/_base.py", "asyncio/queues.py", "asyncio/locks.py",
]


def corpus_files() -> list[tuple[str, str]]:
    """(name, text) for the handwritten fixtures, this package's sources and a stdlib sample."""
    out = [(p.name, p.read_text(encoding="utf-8")) for p in sorted(CORPUS.glob("*.py"))]
    src = Path(__file__).parent.parent / "src" / "hcp"
    out += [(f"hcp/{p.name}", p.read_text(encoding="utf-8")) for p in sorted(src.glob("*.py"))]
    for rel in STDLIB_SAMPLE:
        p = STDLIB / rel
        if p.exists():
            out.append((f"stdlib/{rel}", p.read_text(encoding="utf-8")))
    return out


@pytest.fixture
def make_repo(tmp_path):
    def _make(files: dict[str, str], name: str = "repo") -> Path:
        return write_repo(tmp_path / name, files)

    return _make


def golden_plan():
    """Plan behind the files in tests/golden/."""
    from hcp.hcp_planner import ContextPlan
    from hcp.tasks import FimTriple

    return ContextPlan(
        FimTriple("import util\n\n\ndef run():\n    return ", "\nprint(run())\n", "app.py"),
        dependency_files=[("util.py", "def helper():\n    return 1\n")],
        other_files=[("far.py", "X = 1\n", 0.1)],
    )


def infile_plan():
    from hcp.hcp_planner import ContextPlan
    from hcp.tasks import FimTriple

    return ContextPlan(FimTriple("x = ", "\n", "a.py"))


EVAL_TASKS = FIXTURES / "eval_tasks.jsonl"


def dp_levenshtein(a: str, b: str) -> int:
    """Textbook Wagner-Fischer distance."""
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def es_oracle(pred: str, ref: str) -> float:
    a, b = pred.rstrip(), ref.rstrip()
    if not a and not b:
        return 100.0
    return 100.0 * (1 - dp_levenshtein(a, b) / max(len(a), len(b)))


def naive_levels(edges: dict[str, set[str]], focal: str, depth: int) -> list[set[str]]:
    """D_{i+1} = D_i ∪ I(D_i), applied literally."""
    levels = [{focal}]
    for _ in range(depth):
        cur = levels[-1]
        levels.append(cur | {g for f in cur for g in edges[f]})
    return levels

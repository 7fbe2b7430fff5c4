"""Completion tasks and the in-file fill-in-the-middle split."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Union


@dataclass(frozen=True)
class FimTriple:
    prefix: str
    suffix: str
    path: str


@dataclass(frozen=True)
class CompletionTask:
    id: str
    repo_root: str
    target_file: str
    line: int
    column: int
    ground_truth: str

    def to_json(self) -> dict:
        return asdict(self)


def split_fim(text: str, line: int, column: int, path: str = "") -> tuple[FimTriple, str]:
    """Cut ``text`` at a 1-based line / 0-based column cursor.

    The rest of the cursor line is removed; the suffix resumes at the next
    line. Returns the triple and the removed tail.
    """
    lines = text.splitlines(keepends=True)
    if not 1 <= line <= len(lines):
        raise IndexError(f"cursor line {line} outside 1..{len(lines)}")
    current = lines[line - 1]
    body = current.rstrip("\r\n")
    if not 0 <= column <= len(body):
        raise IndexError(f"cursor column {column} outside 0..{len(body)} on line {line}")
    prefix = "".join(lines[: line - 1]) + body[:column]
    suffix = "".join(lines[line:])
    return FimTriple(prefix, suffix, path), body[column:]


def make_task(
    repo_root: Union[str, os.PathLike],
    file: str,
    line: int,
    column: int,
    ground_truth: str,
    task_id: str = "",
) -> tuple[CompletionTask, FimTriple]:
    text = (Path(repo_root) / file).read_text(encoding="utf-8")
    triple, _ = split_fim(text, line, column, file)
    if not ground_truth:
        raise ValueError("ground_truth must be non-empty")
    task = CompletionTask(task_id or f"{file}:{line}:{column}", str(repo_root), file, line, column, ground_truth)
    return task, triple


def load_tasks(path: Union[str, os.PathLike]) -> list[CompletionTask]:
    """Read a JSON-Lines task file; relative repo roots resolve against the file's directory."""
    base = Path(path).resolve().parent
    tasks = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            root = Path(rec["repo_root"])
            if not root.is_absolute():
                root = base / root
            tasks.append(
                CompletionTask(
                    id=str(rec["id"]),
                    repo_root=str(root),
                    target_file=rec["target_file"],
                    line=int(rec["line"]),
                    column=int(rec["column"]),
                    ground_truth=rec["ground_truth"],
                )
            )
    return tasks


def write_tasks(tasks, path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in tasks:
            fh.write(json.dumps(t.to_json(), sort_keys=True) + "\n")

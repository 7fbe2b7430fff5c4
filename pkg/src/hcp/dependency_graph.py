"""Import extraction, local resolution and breadth-first dependency levels."""

from __future__ import annotations

import ast
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .repo_model import FileNode, RepoIndex, module_name

logger = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 4


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class ImportRef:
    raw_text: str
    module_path: str
    relative_level: int = 0
    imported_names: tuple[str, ...] = ()


@dataclass(frozen=True)
class DependencySet:
    focal: str
    levels: dict[int, frozenset[str]]
    # files within max_depth hops, by (level, path); then every other file by path
    reachable: tuple[str, ...] = ()
    remainder: tuple[str, ...] = ()
    depth_of: dict[str, int] = field(default_factory=dict)

    @property
    def infinity(self) -> list[str]:
        return [*self.reachable, *self.remainder]

    def to_json(self) -> dict:
        return {
            "focal": self.focal,
            "levels": {str(i): sorted(v) for i, v in sorted(self.levels.items())},
            "remainder": list(self.remainder),
        }


def extract_imports(file: FileNode) -> list[ImportRef]:
    """All import statements in ``file``, including those nested in functions."""
    if file.degraded or not file.raw_text:
        return []
    tree = ast.parse(file.raw_text)
    data = file.raw_bytes
    starts = [0]
    for line in data.splitlines(keepends=True):
        starts.append(starts[-1] + len(line))

    def source(node: ast.stmt) -> str:
        a = starts[node.lineno - 1] + node.col_offset
        b = starts[node.end_lineno - 1] + node.end_col_offset
        return data[a:b].decode("utf-8")

    found: list[tuple[int, int, ImportRef]] = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            raw = source(node)
            for alias in node.names:
                found.append((node.lineno, node.col_offset, ImportRef(raw, alias.name, 0, ())))
        elif isinstance(node, ast.ImportFrom):
            names = tuple(a.name for a in node.names)
            found.append((node.lineno, node.col_offset, ImportRef(source(node), node.module or "", node.level, names)))
    # ast.walk is breadth-first; report in source order instead
    found.sort(key=lambda t: (t[0], t[1]))
    return [ref for _, _, ref in found]


def _anchor(imp: ImportRef, importer: str) -> str:
    """Absolute dotted name of ``imp`` as seen from ``importer``."""
    if imp.relative_level == 0:
        return imp.module_path
    own = module_name(importer) or ""
    package = own.split(".") if own else []
    if not importer.endswith(("__init__.py", "__init__.pyi")):
        package = package[:-1]
    up = imp.relative_level - 1
    if up > len(package):
        raise ResolutionError(f"relative import beyond top-level package in {importer}: {imp.raw_text!r}")
    base = package[: len(package) - up]
    if imp.module_path:
        base = base + imp.module_path.split(".")
    return ".".join(base)


def _candidates(imp: ImportRef, importer: str) -> list[str]:
    try:
        target = _anchor(imp, importer)
    except ResolutionError as exc:
        logger.debug("%s", exc)
        return []
    names = [n for n in imp.imported_names if n != "*"]
    out = [f"{target}.{n}" if target else n for n in names]
    if target:
        out.append(target)
    return out


def resolve_import(imp: ImportRef, importer: str, index: RepoIndex) -> Optional[str]:
    """First local file ``imp`` refers to, trying ``module.name`` before ``module``."""
    for name in _candidates(imp, importer):
        if name in index.module_table:
            return index.module_table[name]
    return None


def resolve_targets(imp: ImportRef, importer: str, index: RepoIndex) -> list[str]:
    """Every local file ``imp`` pulls in.

    ``from pkg import a, b`` depends on both submodules; names that are not
    submodules fall back to ``pkg`` itself.
    """
    try:
        target = _anchor(imp, importer)
    except ResolutionError as exc:
        logger.debug("%s", exc)
        return []
    table = index.module_table
    out: list[str] = []
    fallback = False
    names = [n for n in imp.imported_names if n != "*"]
    for n in names:
        key = f"{target}.{n}" if target else n
        if key in table:
            out.append(table[key])
        else:
            fallback = True
    if (fallback or not names) and target in table:
        out.append(table[target])
    if not imp.imported_names and imp.relative_level == 0:
        # `import a.b.c` also executes a and a.b
        parts = target.split(".")
        for i in range(1, len(parts)):
            parent = ".".join(parts[:i])
            if parent in table:
                out.append(table[parent])
    return list(dict.fromkeys(out))


def direct_imports(path: str, index: RepoIndex) -> list[str]:
    """Local files imported by ``path``, in import order, without self-edges.

    Results are memoized on ``index``.
    """
    key = ("direct_imports", path)
    if key not in index.memo:
        out: list[str] = []
        for imp in extract_imports(index.files[path]):
            out.extend(resolve_targets(imp, path, index))
        index.memo[key] = tuple(p for p in dict.fromkeys(out) if p != path)
    return list(index.memo[key])


def dependency_closure(focal: str, index: RepoIndex, max_depth: int = DEFAULT_MAX_DEPTH) -> DependencySet:
    """Levels ``D_0 .. D_max_depth`` of ``focal`` by breadth-first search."""
    if focal not in index.files:
        raise KeyError(f"file not indexed: {focal}")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    depth_of = {focal: 0}
    queue = deque([focal])
    while queue:
        current = queue.popleft()
        depth = depth_of[current]
        if depth >= max_depth:
            continue
        for dep in direct_imports(current, index):
            if dep not in depth_of:
                depth_of[dep] = depth + 1
                queue.append(dep)
    levels = {
        i: frozenset(p for p, d in depth_of.items() if d <= i) for i in range(max_depth + 1)
    }
    reachable = tuple(sorted(depth_of, key=lambda p: (depth_of[p], p)))
    remainder = tuple(sorted(set(index.files) - set(depth_of)))
    return DependencySet(focal, levels, reachable, remainder, dict(depth_of))


def dump_dependency_set(dep: DependencySet) -> str:
    return json.dumps(dep.to_json(), indent=2, sort_keys=True)

"""Function-granularity model of a Python repository.

Files are parsed with the stdlib ``ast`` module into function, class and file
nodes whose spans are byte ranges into the UTF-8 encoded source. Spans of
top-level items are widened to whole lines where only whitespace (or a
trailing comment) surrounds them, so that dropping a node never leaves
dangling indentation behind.
"""

from __future__ import annotations

import ast
import fnmatch
import io
import json
import logging
import os
import tokenize
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Iterator, Literal, Optional, Union

logger = logging.getLogger(__name__)

SOURCE_EXTENSIONS = (".py", ".pyi")
PLACEHOLDER = "..."

RenderMode = Literal["full", "header_only"]


class SourceEncodingError(ValueError):
    pass


class UnsupportedFileError(ValueError):
    pass


class NodeNotFoundError(KeyError):
    pass


@dataclass(frozen=True)
class SourceSpan:
    """Half-open byte range ``[byte_start, byte_end)`` plus line/column view.

    Lines are 1-based, columns are 0-based byte columns (as reported by ``ast``).
    """

    start_line: int
    start_col: int
    end_line: int
    end_col: int
    byte_start: int
    byte_end: int

    def __len__(self) -> int:
        return self.byte_end - self.byte_start

    def as_list(self) -> list[int]:
        return [self.start_line, self.start_col, self.end_line, self.end_col]


@dataclass(frozen=True)
class FunctionNode:
    name: str
    qualified_name: str
    path: str
    span: SourceSpan
    header_span: SourceSpan
    body_span: SourceSpan
    decorators: tuple[str, ...] = ()
    is_method: bool = False
    # indentation used for the placeholder statement in header-only renderings
    body_indent: str = "    "
    # False when the body holds nothing but a docstring
    has_body: bool = True

    @property
    def ref(self) -> str:
        return make_ref(self.path, self.qualified_name)


@dataclass(frozen=True)
class ClassNode:
    name: str
    qualified_name: str
    path: str
    span: SourceSpan
    header_span: SourceSpan
    attribute_spans: tuple[SourceSpan, ...] = ()
    methods: tuple[FunctionNode, ...] = ()
    decorators: tuple[str, ...] = ()

    def members(self) -> list[Union[SourceSpan, FunctionNode]]:
        """Attributes and methods in source order."""
        items: list[Union[SourceSpan, FunctionNode]] = [*self.attribute_spans, *self.methods]
        return sorted(items, key=lambda it: _span_of(it).byte_start)


@dataclass(frozen=True)
class FileNode:
    path: str
    raw_text: str
    functions: tuple[FunctionNode, ...] = ()
    classes: tuple[ClassNode, ...] = ()
    import_spans: tuple[SourceSpan, ...] = ()
    global_spans: tuple[SourceSpan, ...] = ()
    degraded: bool = False

    @cached_property
    def raw_bytes(self) -> bytes:
        return self.raw_text.encode("utf-8")

    def text(self, start: int, end: int) -> str:
        return self.raw_bytes[start:end].decode("utf-8")

    def span_text(self, span: SourceSpan) -> str:
        return self.text(span.byte_start, span.byte_end)

    def items(self) -> list[tuple[str, SourceSpan, object]]:
        """Top-level items as ``(kind, span, node)`` sorted by position.

        ``kind`` is one of ``import``, ``global``, ``function``, ``class``.
        """
        out: list[tuple[str, SourceSpan, object]] = []
        out += [("import", s, None) for s in self.import_spans]
        out += [("global", s, None) for s in self.global_spans]
        out += [("function", f.span, f) for f in self.functions]
        out += [("class", c.span, c) for c in self.classes]
        out.sort(key=lambda it: it[1].byte_start)
        return out

    def all_functions(self) -> Iterator[FunctionNode]:
        """Module-level functions followed by class methods."""
        yield from self.functions
        for cls in self.classes:
            yield from cls.methods

    def find(self, qualified_name: str) -> Union[FunctionNode, ClassNode]:
        for fn in self.all_functions():
            if fn.qualified_name == qualified_name:
                return fn
        for cls in self.classes:
            if cls.qualified_name == qualified_name:
                return cls
        raise NodeNotFoundError(f"{qualified_name!r} not found in {self.path}")


@dataclass(frozen=True)
class RepoIndex:
    root: str
    files: dict[str, FileNode] = field(default_factory=dict)
    module_table: dict[str, str] = field(default_factory=dict)
    # per-file failures (path -> message); these files are absent from ``files``
    errors: dict[str, str] = field(default_factory=dict)
    # memo for derived per-file data such as resolved imports
    memo: dict = field(default_factory=dict, repr=False, compare=False)

    def functions(self, paths: Optional[Iterable[str]] = None) -> Iterator[FunctionNode]:
        for path in sorted(self.files if paths is None else paths):
            yield from self.files[path].all_functions()


def make_ref(path: str, qualified_name: str) -> str:
    return f"{path}::{qualified_name}"


def split_ref(ref: str) -> tuple[str, str]:
    path, _, qual = ref.rpartition("::")
    return path, qual


def _span_of(item: Union[SourceSpan, FunctionNode, ClassNode]) -> SourceSpan:
    return item if isinstance(item, SourceSpan) else item.span


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


class _Source:
    """Byte-offset bookkeeping for one file."""

    def __init__(self, data: bytes):
        self.data = data
        self.lines = data.splitlines(keepends=True)
        self.line_starts = [0]
        for line in self.lines:
            self.line_starts.append(self.line_starts[-1] + len(line))

    def offset(self, lineno: int, col: int) -> int:
        return self.line_starts[lineno - 1] + col

    def position(self, offset: int) -> tuple[int, int]:
        # bisect by hand; the list is small enough that clarity wins
        lo, hi = 0, len(self.line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.line_starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        if lo >= len(self.lines):
            # offset at EOF past a trailing newline
            return lo + 1, 0
        return lo + 1, offset - self.line_starts[lo]

    def span(self, start: int, end: int) -> SourceSpan:
        l1, c1 = self.position(start)
        l2, c2 = self.position(end)
        return SourceSpan(l1, c1, l2, c2, start, end)

    def line_start(self, offset: int) -> int:
        line, col = self.position(offset)
        return offset - col

    def widen(self, start: int, end: int) -> tuple[int, int]:
        """Extend to the start of line and past the newline when only blanks/comments border the range."""
        ls = self.line_start(start)
        if not self.data[ls:start].strip():
            start = ls
        line, _ = self.position(end)
        if line <= len(self.lines):
            line_end = self.line_starts[line]
            rest = self.data[end:line_end].strip()
            if not rest or rest.startswith(b"#"):
                end = line_end
        return start, end

    def node_range(self, node: ast.AST) -> tuple[int, int]:
        first = node
        decos = getattr(node, "decorator_list", None)
        if decos:
            first = decos[0]
        start = self.offset(first.lineno, first.col_offset)
        if decos:
            # the '@' sits one column before the decorator expression
            start = self.data.rindex(b"@", 0, start)
        end = self.offset(node.end_lineno, node.end_col_offset)
        return start, end


def _docstring_node(node: ast.AST) -> Optional[ast.Expr]:
    body = getattr(node, "body", None)
    if body and isinstance(body[0], ast.Expr):
        value = body[0].value
        if isinstance(value, ast.Constant) and isinstance(value.value, str):
            return body[0]
    return None


def _block_colon(src: _Source, node: ast.AST) -> int:
    """Byte offset just past the ':' that opens the block of a def/class."""
    start = src.offset(node.lineno, node.col_offset)
    stop = src.offset(node.body[0].lineno, node.body[0].col_offset)
    fragment = src.data[start:stop].decode("utf-8")
    lines = fragment.splitlines(keepends=True)
    depth = 0
    readline = io.StringIO(fragment).readline
    try:
        for tok in tokenize.generate_tokens(readline):
            if tok.type == tokenize.OP:
                if tok.string in "([{":
                    depth += 1
                elif tok.string in ")]}":
                    depth -= 1
                elif tok.string == ":" and depth == 0:
                    row, col = tok.end
                    prefix = "".join(lines[: row - 1]) + lines[row - 1][:col]
                    return start + len(prefix.encode("utf-8"))
    except (tokenize.TokenError, IndentationError):
        pass
    # fall back to the last colon before the body
    return src.data.rindex(b":", start, stop) + 1


def _leading_ws(src: _Source, offset: int) -> str:
    ls = src.line_start(offset)
    raw = src.data[ls:offset]
    stripped = raw[: len(raw) - len(raw.lstrip())]
    return stripped.decode("utf-8")


def _parse_function(src: _Source, node: ast.AST, path: str, prefix: str, is_method: bool) -> FunctionNode:
    start, end = src.widen(*src.node_range(node))
    doc = _docstring_node(node)
    if doc is not None:
        header_end = src.offset(doc.end_lineno, doc.end_col_offset)
    else:
        header_end = _block_colon(src, node)
    stmts = node.body[1:] if doc is not None else node.body
    def_offset = src.offset(node.lineno, node.col_offset)
    colon_line = src.position(_block_colon(src, node))[0]
    first = node.body[0]
    if first.lineno > colon_line:
        indent = _leading_ws(src, src.offset(first.lineno, first.col_offset))
    else:
        indent = _leading_ws(src, def_offset) + "    "
    decorators = tuple(
        src.data[src.offset(d.lineno, d.col_offset) : src.offset(d.end_lineno, d.end_col_offset)].decode("utf-8")
        for d in node.decorator_list
    )
    return FunctionNode(
        name=node.name,
        qualified_name=prefix + node.name,
        path=path,
        span=src.span(start, end),
        header_span=src.span(start, header_end),
        body_span=src.span(header_end, end),
        decorators=decorators,
        is_method=is_method,
        body_indent=indent,
        has_body=bool(stmts),
    )


def _dedupe(name: str, seen: dict[str, int]) -> str:
    seen[name] = seen.get(name, 0) + 1
    return name if seen[name] == 1 else f"{name}#{seen[name]}"


def _parse_class(src: _Source, node: ast.ClassDef, path: str, seen: dict[str, int]) -> ClassNode:
    start, end = src.widen(*src.node_range(node))
    doc = _docstring_node(node)
    if doc is not None:
        header_end = src.offset(doc.end_lineno, doc.end_col_offset)
    else:
        header_end = _block_colon(src, node)
    qual = _dedupe(node.name, seen)
    methods: list[FunctionNode] = []
    attrs: list[SourceSpan] = []
    method_seen: dict[str, int] = {}
    for stmt in node.body[1:] if doc is not None else node.body:
        if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
            fn = _parse_function(src, stmt, path, qual + ".", True)
            unique = _dedupe(stmt.name, method_seen)
            if unique != stmt.name:
                fn = _replace_qual(fn, f"{qual}.{unique}")
            methods.append(fn)
        else:
            attrs.append(src.span(*src.widen(*src.node_range(stmt))))
    decorators = tuple(
        src.data[src.offset(d.lineno, d.col_offset) : src.offset(d.end_lineno, d.end_col_offset)].decode("utf-8")
        for d in node.decorator_list
    )
    return ClassNode(
        name=node.name,
        qualified_name=qual,
        path=path,
        span=src.span(start, end),
        header_span=src.span(start, header_end),
        attribute_spans=tuple(attrs),
        methods=tuple(methods),
        decorators=decorators,
    )


def _replace_qual(fn: FunctionNode, qual: str) -> FunctionNode:
    from dataclasses import replace

    return replace(fn, qualified_name=qual)


def parse_file(source_text: Union[str, bytes], path: str) -> FileNode:
    """Parse one source file into a :class:`FileNode`.

    Syntax errors do not raise: the file comes back ``degraded`` with its whole
    text as a single global span.
    """
    if not path.endswith(SOURCE_EXTENSIONS):
        raise UnsupportedFileError(f"unsupported source file: {path}")
    if isinstance(source_text, bytes):
        try:
            source_text = source_text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SourceEncodingError(f"{path}: not valid UTF-8 ({exc})") from exc
    data = source_text.encode("utf-8")
    src = _Source(data)
    try:
        tree = ast.parse(source_text, filename=path)
    except (SyntaxError, ValueError):
        spans = (src.span(0, len(data)),) if data else ()
        return FileNode(path=path, raw_text=source_text, global_spans=spans, degraded=True)

    functions: list[FunctionNode] = []
    classes: list[ClassNode] = []
    imports: list[SourceSpan] = []
    globals_: list[SourceSpan] = []
    fn_seen: dict[str, int] = {}
    cls_seen: dict[str, int] = {}
    for stmt in tree.body:
        if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
            fn = _parse_function(src, stmt, path, "", False)
            unique = _dedupe(stmt.name, fn_seen)
            if unique != stmt.name:
                fn = _replace_qual(fn, unique)
            functions.append(fn)
        elif isinstance(stmt, ast.ClassDef):
            classes.append(_parse_class(src, stmt, path, cls_seen))
        elif isinstance(stmt, (ast.Import, ast.ImportFrom)):
            imports.append(src.span(*src.widen(*src.node_range(stmt))))
        else:
            globals_.append(src.span(*src.widen(*src.node_range(stmt))))
    return FileNode(
        path=path,
        raw_text=source_text,
        functions=tuple(functions),
        classes=tuple(classes),
        import_spans=tuple(imports),
        global_spans=tuple(globals_),
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _ensure_newline(text: str) -> str:
    return text if not text or text.endswith("\n") else text + "\n"


def render_function(file: FileNode, fn: FunctionNode, mode: RenderMode = "full") -> str:
    if mode == "full" or not fn.has_body:
        return file.span_text(fn.span)
    header = file.span_text(fn.header_span)
    return f"{header}\n{fn.body_indent}{PLACEHOLDER}\n"


MethodRenderer = Callable[[FunctionNode], Optional[str]]


def render_class(
    file: FileNode,
    cls: ClassNode,
    method_renderer: MethodRenderer,
    drop_if_empty: bool = False,
) -> Optional[str]:
    """Render a class keeping attributes verbatim and methods via ``method_renderer``.

    ``method_renderer`` returns ``None`` to omit a method. With ``drop_if_empty``
    a class left with neither attributes nor methods renders as ``None``.
    """
    parts = [file.span_text(cls.header_span)]
    cursor = cls.header_span.byte_end
    members = cls.members()
    if members:
        # the rest of the header line stays with the header even if the first member is omitted
        first = _span_of(members[0]).byte_start
        nl = file.raw_bytes.find(b"\n", cursor, first)
        if nl != -1:
            parts[0] += file.text(cursor, nl + 1)
            cursor = nl + 1
    kept = 0
    for member in members:
        span = _span_of(member)
        gap = file.text(cursor, span.byte_start)
        cursor = span.byte_end
        if isinstance(member, SourceSpan):
            body = file.span_text(member)
        else:
            body = method_renderer(member)
            if body is None:
                continue
        parts.append(gap + body)
        kept += 1
    if kept == 0 and drop_if_empty:
        return None
    if kept == 0 and not cls.methods and not cls.attribute_spans:
        # docstring-only class: the header already is a valid body
        parts.append(file.text(cursor, cls.span.byte_end))
    return _ensure_newline("".join(parts))


def render_node(file: FileNode, node_ref: Union[str, FunctionNode, ClassNode], mode: RenderMode = "full") -> str:
    """Render a function or class from ``file`` in full or header-only form."""
    node = file.find(split_ref(node_ref)[1] if "::" in node_ref else node_ref) if isinstance(node_ref, str) else node_ref
    if mode not in ("full", "header_only"):
        raise ValueError(f"unknown render mode {mode!r}")
    if isinstance(node, FunctionNode):
        return render_function(file, node, mode)
    if mode == "full":
        return file.span_text(node.span)
    return render_class(file, node, lambda m: render_function(file, m, "header_only"))


ItemRenderer = Callable[[str, SourceSpan, object], Optional[str]]


def render_file(file: FileNode, item_renderer: ItemRenderer) -> str:
    """Reassemble a file from its top-level items.

    ``item_renderer(kind, span, node)`` returns replacement text or ``None`` to
    drop the item. Text between items (blank lines, comments) travels with the
    item that follows it. Statements sharing a line are kept or dropped as a
    group so the result stays parseable.
    """
    groups: list[list[tuple[str, SourceSpan, object]]] = []
    for item in file.items():
        span = item[1]
        if groups:
            prev = groups[-1][-1][1]
            if prev.end_col != 0 and prev.end_line == span.start_line:
                groups[-1].append(item)
                continue
        groups.append([item])

    out: list[str] = []
    cursor = 0
    for group in groups:
        start, end = group[0][1].byte_start, group[-1][1].byte_end
        gap = file.text(cursor, start)
        cursor = end
        if len(group) == 1:
            kind, span, node = group[0]
            rendered = item_renderer(kind, span, node)
        else:
            keep = any(item_renderer(*it) is not None for it in group)
            rendered = file.text(start, end) if keep else None
        if rendered is not None:
            out.append(gap + rendered)
    out.append(file.text(cursor, len(file.raw_bytes)))
    return "".join(out)


# ---------------------------------------------------------------------------
# Repository indexing
# ---------------------------------------------------------------------------


def module_name(path: str) -> Optional[str]:
    """Dotted module name for a repo-relative path (``pkg/__init__.py`` -> ``pkg``)."""
    p = Path(path)
    if p.suffix not in SOURCE_EXTENSIONS:
        return None
    parts = list(p.with_suffix("").parts)
    if parts and parts[-1] == "__init__":
        parts.pop()
    if not parts or not all(part.isidentifier() for part in parts):
        return None
    return ".".join(parts)


def build_module_table(paths: Iterable[str]) -> dict[str, str]:
    table: dict[str, str] = {}
    # .py wins over .pyi, and package __init__ wins over a same-named bare module
    ordered = sorted(paths, key=lambda p: (p.endswith(".pyi"), not p.endswith("__init__.py"), p))
    for path in ordered:
        name = module_name(path)
        if name is not None:
            table.setdefault(name, path)
    # src-layout: expose src/pkg/... as pkg... unless that name is taken
    for name, path in sorted(table.items()):
        if name.startswith("src.") and not path.startswith("src/__init__"):
            table.setdefault(name[4:], path)
    return table


def _walk_sources(root: Path, include: tuple[str, ...], exclude: tuple[str, ...]) -> list[str]:
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if not d.startswith(".") and d != "__pycache__")
        for name in filenames:
            rel = Path(dirpath, name).relative_to(root).as_posix()
            if not any(fnmatch.fnmatch(rel, g) for g in include):
                continue
            if any(fnmatch.fnmatch(rel, g) for g in exclude):
                continue
            found.append(rel)
    return sorted(found)


def index_repository(
    root: Union[str, os.PathLike],
    include_globs: Iterable[str] = ("*.py",),
    exclude_globs: Iterable[str] = (),
) -> RepoIndex:
    root_path = Path(root)
    if not root_path.is_dir():
        raise OSError(f"repository root is not a readable directory: {root}")
    files: dict[str, FileNode] = {}
    errors: dict[str, str] = {}
    for rel in _walk_sources(root_path, tuple(include_globs), tuple(exclude_globs)):
        try:
            files[rel] = parse_file((root_path / rel).read_bytes(), rel)
        except (OSError, SourceEncodingError, UnsupportedFileError) as exc:
            logger.warning("skipping %s: %s", rel, exc)
            errors[rel] = str(exc)
    return RepoIndex(
        root=str(root_path.resolve()),
        files=files,
        module_table=build_module_table(files),
        errors=errors,
    )


def index_record(file: FileNode) -> dict:
    """One JSON-serializable index dump record."""

    def fn_record(fn: FunctionNode) -> dict:
        return {
            "name": fn.name,
            "qualified_name": fn.qualified_name,
            "header": fn.header_span.as_list(),
            "body": fn.body_span.as_list(),
        }

    return {
        "path": file.path,
        "functions": [fn_record(f) for f in file.functions],
        "classes": [
            {
                "name": c.name,
                "qualified_name": c.qualified_name,
                "header": c.header_span.as_list(),
                "attributes": [s.as_list() for s in c.attribute_spans],
                "methods": [fn_record(m) for m in c.methods],
            }
            for c in file.classes
        ],
        "degraded": file.degraded,
    }


def dump_index(index: RepoIndex, out: Union[str, os.PathLike, io.TextIOBase]) -> None:
    lines = [json.dumps(index_record(index.files[p]), sort_keys=True) for p in sorted(index.files)]
    text = "".join(line + "\n" for line in lines)
    if isinstance(out, (str, os.PathLike)):
        Path(out).write_text(text, encoding="utf-8")
    else:
        out.write(text)

import ast
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcp.repo_model import (
    NodeNotFoundError,
    SourceEncodingError,
    UnsupportedFileError,
    dump_index,
    index_repository,
    parse_file,
    render_node,
)
from hcp.synthetic import module_source

from conftest import CORPUS, corpus_files


def all_spans(file):
    spans = [s for _, s, _ in file.items()]
    return sorted(spans, key=lambda s: s.byte_start)


def reconstruct(file):
    """Concatenate spans with the gap text between them."""
    raw = file.raw_bytes
    out, cursor = [], 0
    for s in all_spans(file):
        out.append(raw[cursor : s.byte_start])
        out.append(raw[s.byte_start : s.byte_end])
        cursor = s.byte_end
    out.append(raw[cursor:])
    return b"".join(out)


def gap_texts(file):
    raw = file.raw_bytes
    cursor = 0
    for s in all_spans(file):
        yield raw[cursor : s.byte_start].decode()
        cursor = s.byte_end
    yield raw[cursor:].decode()


def assert_gaps_are_trivia(file):
    for gap in gap_texts(file):
        for line in gap.splitlines():
            stripped = line.strip().lstrip(";").strip()
            assert stripped == "" or stripped.startswith("#"), repr(gap)


def test_single_function():
    f = parse_file("def f():\n    return 1\n", "a.py")
    assert [fn.name for fn in f.functions] == ["f"]
    assert f.classes == () and f.global_spans == () and f.import_spans == ()
    assert not f.degraded


def test_empty_file():
    f = parse_file("", "a.py")
    assert f.raw_text == ""
    assert f.functions == () and f.classes == () and f.global_spans == () and f.import_spans == ()


def test_three_class_fixture_round_trips():
    text = (CORPUS / "three_classes.py").read_text()
    f = parse_file(text, "three_classes.py")
    assert len(f.classes) == 3
    assert sum(len(c.methods) for c in f.classes) == 7
    assert reconstruct(f) == text.encode()
    assert_gaps_are_trivia(f)
    # spans do not overlap
    spans = all_spans(f)
    for a, b in zip(spans, spans[1:]):
        assert a.byte_end <= b.byte_start


def test_header_plus_body_is_node_text():
    text = (CORPUS / "tricky.py").read_text()
    f = parse_file(text, "tricky.py")
    for fn in f.all_functions():
        assert fn.header_span.byte_end == fn.body_span.byte_start
        assert f.span_text(fn.header_span) + f.span_text(fn.body_span) == f.span_text(fn.span)
        assert fn.header_span.byte_start <= fn.header_span.byte_end <= fn.body_span.byte_end


def test_classification_of_tricky_constructs():
    f = parse_file((CORPUS / "tricky.py").read_text(), "tricky.py")
    assert [fn.qualified_name for fn in f.functions] == ["f", "g", "h", "only_doc"]
    c = f.find("C")
    assert [m.qualified_name for m in c.methods] == ["C.x", "C.x#2", "C.fetch"]
    assert all(m.is_method for m in c.methods)
    assert len(c.attribute_spans) == 2
    assert f.find("f").decorators == ("decorator(arg=1)",)
    # nested def stays inside f's body
    assert "def inner" in f.span_text(f.find("f").body_span)
    # the main guard and the version-conditional def are global context
    globals_text = "".join(f.span_text(s) for s in f.global_spans)
    assert "__main__" in globals_text and "def compat" in globals_text
    assert len(f.import_spans) == 3


def test_degraded_parse():
    text = (CORPUS / "broken.py").read_text()
    f = parse_file(text, "broken.py")
    assert f.degraded
    assert f.functions == () and f.classes == ()
    assert [f.span_text(s) for s in f.global_spans] == [text]


def test_encoding_and_extension_errors():
    with pytest.raises(SourceEncodingError):
        parse_file(b"x = '\xff'\n", "a.py")
    with pytest.raises(UnsupportedFileError):
        parse_file("x = 1\n", "a.txt")


def test_render_full_is_identity():
    f = parse_file("import os\n\ndef f():\n    return 1\n", "a.py")
    assert render_node(f, "f", "full") == "def f():\n    return 1\n"


def test_render_header_only_function():
    f = parse_file("def g(x):\n    return x*2\n", "a.py")
    out = render_node(f, "g", "header_only")
    assert out == "def g(x):\n    ...\n"
    tree = ast.parse(out)
    (fn,) = tree.body
    assert len(fn.body) == 1 and isinstance(fn.body[0].value, ast.Constant) and fn.body[0].value.value is Ellipsis


def test_render_header_only_single_line_and_docstring():
    f = parse_file((CORPUS / "tricky.py").read_text(), "tricky.py")
    assert render_node(f, "g", "header_only") == "async def g():\n    ...\n"
    assert render_node(f, "f", "header_only").endswith('"""Doc: with colon."""\n    ...\n')
    # docstring-only functions are already minimal
    assert render_node(f, "only_doc", "header_only") == render_node(f, "only_doc", "full")


def _body_is_placeholder(fn: ast.AST) -> bool:
    body = fn.body
    if body and isinstance(body[0], ast.Expr) and isinstance(body[0].value, ast.Constant) and isinstance(body[0].value.value, str):
        body = body[1:]
    return len(body) <= 1 and all(isinstance(s, ast.Expr) and s.value.value is Ellipsis for s in body)


def test_render_header_only_class():
    f = parse_file((CORPUS / "three_classes.py").read_text(), "three_classes.py")
    out = render_node(f, "Account", "header_only")
    tree = ast.parse(out)
    (cls,) = tree.body
    assert cls.name == "Account"
    methods = [s for s in cls.body if isinstance(s, ast.FunctionDef)]
    assert [m.name for m in methods] == ["__init__", "deposit", "withdraw"]
    assert all(_body_is_placeholder(m) for m in methods)
    assert 'currency = "EUR"' in out and "limits = " in out and '"""Bank account."""' in out


def test_render_dangling_ref():
    f = parse_file("def f():\n    pass\n", "a.py")
    with pytest.raises(NodeNotFoundError):
        render_node(f, "nope", "full")


@pytest.mark.parametrize("name,text", corpus_files(), ids=lambda v: v if isinstance(v, str) and len(v) < 60 else "")
def test_corpus_invariants(name, text):
    f = parse_file(text, name if name.endswith(".py") else name + ".py")
    assert reconstruct(f) == text.encode()
    if f.degraded:
        return
    assert_gaps_are_trivia(f)
    for fn in f.all_functions():
        assert f.span_text(fn.header_span) + f.span_text(fn.body_span) == f.span_text(fn.span)
        # header-only rendering re-parses to the same header text
        out = render_node(f, fn, "header_only")
        from textwrap import dedent

        g = parse_file(dedent(out), "x.py")
        (node,) = g.functions
        assert dedent(f.span_text(fn.header_span)).strip() == g.span_text(node.header_span).strip()


def test_parse_is_deterministic():
    text = (CORPUS / "tricky.py").read_text()
    assert parse_file(text, "t.py") == parse_file(text, "t.py")


@settings(max_examples=60, deadline=None)
@given(
    idx=st.integers(0, 50),
    n_functions=st.integers(0, 4),
    n_classes=st.integers(0, 3),
    methods=st.integers(0, 3),
    body=st.integers(0, 5),
)
def test_generated_modules_round_trip(idx, n_functions, n_classes, methods, body):
    text = module_source(idx, [idx + 1], n_functions, n_classes, methods, body)
    f = parse_file(text, "m.py")
    assert reconstruct(f) == text.encode()
    assert len(f.functions) == n_functions
    assert [len(c.methods) for c in f.classes] == [methods] * n_classes


def test_index_module_table(make_repo):
    root = make_repo({"a.py": "", "pkg/__init__.py": "", "pkg/b.py": ""})
    index = index_repository(root)
    assert index.module_table == {"a": "a.py", "pkg": "pkg/__init__.py", "pkg.b": "pkg/b.py"}
    assert set(index.files) == {"a.py", "pkg/__init__.py", "pkg/b.py"}


def test_index_empty_and_missing(tmp_path):
    assert index_repository(tmp_path).files == {}
    with pytest.raises(OSError):
        index_repository(tmp_path / "missing")


def test_index_records_failures(make_repo, tmp_path):
    root = make_repo({"ok.py": "x = 1\n"})
    (root / "bad.py").write_bytes(b"s = '\xff'\n")
    index = index_repository(root)
    assert set(index.files) == {"ok.py"}
    assert "bad.py" in index.errors


def test_index_twenty_files_matches_per_file_parse(make_repo, tmp_path):
    files = {f"pkg{i % 3}/m{i}.py": module_source(i, [], 2, 1, 2, 3) for i in range(20)}
    root = make_repo(files)
    index = index_repository(root)
    assert len(index.files) == 20
    for rel, text in files.items():
        assert index.files[rel] == parse_file(text, rel)
    out = tmp_path / "index.jsonl"
    dump_index(index, out)
    records = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(records) == 20
    assert records[0]["functions"][0]["header"][0] >= 1
    assert set(records[0]) == {"path", "functions", "classes", "degraded"}


def test_include_exclude_globs(make_repo):
    root = make_repo({"a.py": "", "tests/test_a.py": "", "b.pyi": "", "notes.txt": "x"})
    index = index_repository(root, include_globs=("*.py",), exclude_globs=("tests/*",))
    assert set(index.files) == {"a.py"}

import math
import random
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hcp.baselines import (
    Bm25Index,
    Chunk,
    bm25_retrieve,
    bm25_tokenize,
    chunk_file,
    d_level_plan,
    infile_only_plan,
    p_level_plan,
    rag_bm25_plan,
    rag_plan,
    random_all_plan,
)
from hcp.prompt_builder import count_tokens, get_template, render_unbounded
from hcp.relevance import build_query
from hcp.repo_model import index_repository
from hcp.synthetic import make_chain_repo
from hcp.tasks import CompletionTask


def brute_bm25(docs: list[str], query: str, k1=1.2, b=0.75) -> list[float]:
    """Textbook BM25 with the Lucene idf, recomputed from scratch for each document."""
    toks = [bm25_tokenize(d) for d in docs]
    n = len(docs)
    avg = sum(len(t) for t in toks) / n
    out = []
    for t in toks:
        score = 0.0
        for q in bm25_tokenize(query):
            df = sum(1 for other in toks if q in other)
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            tf = t.count(q)
            if tf == 0:
                continue
            score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(t) / avg))
        out.append(score)
    return out


def test_chunking_tiles_lines():
    text = "".join(f"line{i}\n" for i in range(1, 26))
    chunks = chunk_file("a.py", text, 10)
    assert [(c.start_line, c.end_line) for c in chunks] == [(1, 10), (11, 20), (21, 25)]
    assert "".join(c.text for c in chunks) == text
    assert chunk_file("e.py", "", 10) == []
    with pytest.raises(ValueError):
        chunk_file("a.py", text, 0)


@given(st.lists(st.text("ab \n", max_size=8), max_size=60), st.integers(1, 15))
def test_chunking_conserves_lines(lines, size):
    text = "\n".join(lines)
    chunks = chunk_file("f.py", text, size)
    assert "".join(c.text for c in chunks) == text
    assert sum(c.n_lines for c in chunks) == len(text.splitlines())
    assert all(c.n_lines <= size for c in chunks)


def test_tokenize():
    assert bm25_tokenize("Foo.bar_1(x, 42)") == ["foo", "bar_1", "x", "42"]


word = st.sampled_from("alpha beta gamma delta eps zeta eta theta".split())


@given(st.lists(st.lists(word, max_size=12).map(" ".join), min_size=1, max_size=12), st.lists(word, max_size=6).map(" ".join))
def test_bm25_matches_brute_force(docs, query):
    chunks = [Chunk("d.py", i + 1, i + 1, d) for i, d in enumerate(docs)]
    got = Bm25Index.build(chunks).scores(query)
    for g, e in zip(got, brute_bm25(docs, query)):
        assert g == pytest.approx(e, abs=1e-9)


def test_ranking_equals_brute_force_on_30_chunks():
    rng = random.Random(5)
    vocab = "alpha beta gamma delta eps zeta eta theta iota kappa".split()
    docs = [" ".join(rng.choices(vocab, k=rng.randint(3, 20))) for _ in range(30)]
    chunks = [Chunk(f"f{i % 4}.py", i * 10 + 1, i * 10 + 10, d) for i, d in enumerate(docs)]
    bm = Bm25Index.build(chunks)
    for _ in range(20):
        query = " ".join(rng.choices(vocab, k=3))
        exp = brute_bm25(docs, query)
        order = sorted(range(30), key=lambda i: (-exp[i], chunks[i].path, chunks[i].start_line))
        got = bm25_retrieve(bm, query, top_n=30)
        assert [c for c, _ in got] == [chunks[i] for i in order]


def test_unique_term_ranked_first():
    docs = ["common words here", "common words there", "common needle words", "words only"]
    bm = Bm25Index.build([Chunk("d.py", i, i, d) for i, d in enumerate(docs)])
    top = bm25_retrieve(bm, "needle words", top_n=10)
    assert top[0][0].text == "common needle words"
    assert len(top) == 4
    assert bm25_retrieve(Bm25Index.build([]), "x") == []


def test_rag_plan_order_and_names(make_repo):
    root = make_repo({"cur.py": "def f():\n    x = total_amount\n    return total_amount\n", "lib.py": "total_amount = 1\n" + "z = 2\n" * 12})
    index = index_repository(root)
    task = CompletionTask("t", str(root), "cur.py", 3, 11, "total_amount")
    query = build_query(task, index.files["cur.py"])
    plan = rag_bm25_plan(task, index, query, chunk_size=10, top_n=5)
    assert [p for p, _, _ in plan.other_files] == ["lib.py:1-10", "lib.py:11-13"]
    assert plan.other_files[0][2] > plan.other_files[1][2]
    # the most relevant snippet must land nearest the cursor once rendered
    text = render_unbounded(plan, get_template("starcoder2"))
    snippets = rag_plan(task, index, [(Chunk("x.py", 1, 1, "a\n"), 2.0), (Chunk("y.py", 1, 1, "b\n"), 1.0)])
    assert [p for p, _, _ in snippets.other_files] == ["x.py:1-1", "y.py:1-1"]
    assert text.index("lib.py:1-10") < text.index("lib.py:11-13") < text.index("<fim_prefix>")


def test_random_all_is_a_seeded_permutation(make_repo):
    root = make_chain_repo(make_repo({}), 8)
    index = index_repository(root)
    task = CompletionTask("t1", str(root), "m0.py", 1, 0, "x")
    a = random_all_plan(task, index, seed=3)
    assert a == random_all_plan(task, index, seed=3)
    assert sorted(p for p, _, _ in a.other_files) == [f"m{i}.py" for i in range(1, 8)]
    assert all(t == index.files[p].raw_text for p, t, _ in a.other_files)
    orders = {tuple(p for p, _, _ in random_all_plan(task, index, s).other_files) for s in range(10)}
    assert len(orders) > 1


def test_random_all_single_file(make_repo):
    root = make_repo({"a.py": "x = 1\n"})
    index = index_repository(root)
    plan = random_all_plan(CompletionTask("t", str(root), "a.py", 1, 0, "x"), index)
    assert plan.other_files == [] and plan.dependency_files == []


def test_d_level_examples(make_repo):
    root = make_chain_repo(make_repo({}), 6)
    index = index_repository(root)
    task = CompletionTask("t", str(root), "m0.py", 1, 0, "x")
    zero = d_level_plan(task, 0, index)
    assert zero.files() == [] and zero.current == infile_only_plan(task, index).current
    assert [p for p, _ in d_level_plan(task, 2, index).dependency_files] == ["m2.py", "m1.py"]
    inf = d_level_plan(task, "inf", index)
    assert sorted(inf.files()) == [f"m{i}.py" for i in range(1, 6)]
    sizes = [len(d_level_plan(task, lv, index).files()) for lv in (0, 1, 2, 3, 4, "inf")]
    assert sizes == sorted(sizes) and sizes[-1] > sizes[-2]
    with pytest.raises(ValueError):
        d_level_plan(task, -1, index)


def test_p_level_shrinks(make_repo):
    root = make_chain_repo(make_repo({}), 5)
    index = index_repository(root)
    task = CompletionTask("t", str(root), "m0.py", 1, 0, "x")
    t = get_template("deepseekcoder")
    lens = [count_tokens(render_unbounded(p_level_plan(task, lv, index), t)) for lv in (0, 1, 2)]
    assert lens[2] <= lens[1] <= lens[0]
    mixed = p_level_plan(task, 2, index, dep_depth=1)
    assert [p for p, _ in mixed.dependency_files] == ["m1.py"]
    assert "m1.py" not in [p for p, _, _ in mixed.other_files]
    assert mixed.strategy == "p-level:2+d:1"

"""Generators for synthetic Python repositories used by tests and experiment scripts."""

from __future__ import annotations

import random
from pathlib import Path
from typing import Iterable, Optional, Union

WORDS = (
    "alpha beta gamma delta epsilon zeta theta kappa lambda sigma omega "
    "buffer cache config parser token window stream record batch vector "
    "matrix graph node edge queue stack heap tree index table schema model "
    "reader writer loader saver client server request response handler route "
    "user account session order invoice payment price amount total balance"
).split()


def _ident(rng: random.Random, n: int = 2) -> str:
    return "_".join(rng.choice(WORDS) for _ in range(n))


def _body(rng: random.Random, lines: int, indent: str) -> list[str]:
    out = []
    names = ["value"]
    for i in range(lines):
        name = f"{_ident(rng)}_{i}"
        src = rng.choice(names)
        op = rng.choice(["+", "-", "*"])
        out.append(f"{indent}{name} = {src} {op} {rng.randint(1, 99)}")
        names.append(name)
    out.append(f"{indent}return {names[-1]}")
    return out


def module_source(
    idx: int,
    imports: Iterable[int] = (),
    n_functions: int = 3,
    n_classes: int = 1,
    methods_per_class: int = 2,
    body_lines: int = 6,
    seed: int = 0,
) -> str:
    rng = random.Random(f"{seed}:{idx}")
    lines = [f'"""Synthetic module {idx}."""', "", "import os"]
    for j in imports:
        lines.append(f"import m{j}")
    lines += ["", f"{_ident(rng).upper()} = {rng.randint(0, 1000)}", f"SETTINGS_{idx} = {{'name': 'm{idx}', 'size': {rng.randint(1, 9)}}}", ""]
    for f in range(n_functions):
        lines += ["", f"def {_ident(rng)}_{idx}_{f}(value, scale=1):", f'    """Compute {_ident(rng, 3)}."""']
        lines += _body(rng, body_lines, "    ")
        lines.append("")
    for c in range(n_classes):
        cname = "".join(w.title() for w in _ident(rng).split("_")) + f"{idx}x{c}"
        lines += ["", f"class {cname}:", f"    {_ident(rng)} = {rng.randint(0, 9)}", ""]
        for m in range(methods_per_class):
            lines += [f"    def {_ident(rng)}_{m}(self, value):"]
            lines += _body(rng, body_lines, "        ")
            lines.append("")
    lines += ["", 'if __name__ == "__main__":', f"    print(SETTINGS_{idx})", ""]
    return "\n".join(lines)


def write_repo(root: Union[str, Path], files: dict[str, str]) -> Path:
    root = Path(root)
    for rel, text in files.items():
        p = root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    return root


def random_import_graph(n: int, rng: random.Random, p_edge: float = 0.1, cycles: int = 2) -> dict[int, list[int]]:
    """Random DAG over ``n`` modules (edges point to higher indices) plus injected back-edges."""
    edges: dict[int, list[int]] = {i: [] for i in range(n)}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p_edge:
                edges[i].append(j)
    for _ in range(cycles if n > 1 else 0):
        a, b = rng.sample(range(n), 2)
        if a not in edges[b]:
            edges[b].append(a)
    return edges


def make_graph_repo(root: Union[str, Path], edges: dict[int, list[int]], seed: int = 0, **kwargs) -> Path:
    files = {f"m{i}.py": module_source(i, deps, seed=seed, **kwargs) for i, deps in edges.items()}
    return write_repo(root, files)


def make_chain_repo(root: Union[str, Path], length: int = 8, seed: int = 0, **kwargs) -> Path:
    """``m0 -> m1 -> ... -> m{length-1}``."""
    edges = {i: ([i + 1] if i + 1 < length else []) for i in range(length)}
    return make_graph_repo(root, edges, seed=seed, **kwargs)


def make_large_repo(
    root: Union[str, Path],
    n_files: int = 60,
    n_functions: int = 8,
    n_classes: int = 2,
    methods_per_class: int = 4,
    body_lines: int = 12,
    seed: int = 0,
    rng: Optional[random.Random] = None,
) -> Path:
    rng = rng or random.Random(seed)
    edges = random_import_graph(n_files, rng, p_edge=2.0 / max(n_files, 1), cycles=0)
    return make_graph_repo(
        root,
        edges,
        seed=seed,
        n_functions=n_functions,
        n_classes=n_classes,
        methods_per_class=methods_per_class,
        body_lines=body_lines,
    )

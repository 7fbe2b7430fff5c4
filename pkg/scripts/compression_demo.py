"""Prompt size of every strategy on one synthetic repository.

Prints untruncated token counts for Random-All, the fixed D-levels, the
P-levels and HCP, relative to Random-All.
"""

import argparse
import tempfile
import time
from pathlib import Path

from hcp.baselines import d_level_plan, infile_only_plan, p_level_plan, random_all_plan
from hcp.dependency_graph import direct_imports
from hcp.hcp_planner import SamplingConfig, build_hcp_plan
from hcp.prompt_builder import count_tokens, get_template, render_unbounded
from hcp.relevance import EmbeddingCache, OfflineEmbedder
from hcp.repo_model import index_repository
from hcp.synthetic import make_large_repo
from hcp.tasks import CompletionTask


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--files", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--top-k", type=int, default=5)
    ap.add_argument("--top-p", type=float, default=0.3)
    ap.add_argument("--family", default="starcoder2")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        root = make_large_repo(Path(tmp) / "repo", n_files=args.files, seed=args.seed)
        index = index_repository(root)
        # the file with the most local imports makes the dependency levels interesting
        focal = max(sorted(index.files), key=lambda p: len(direct_imports(p, index)))
        fn = index.files[focal].functions[0]
        task = CompletionTask("demo", str(root), focal, fn.body_span.start_line + 1, 4, "?")
        template = get_template(args.family)

        start = time.perf_counter()
        hcp = build_hcp_plan(task, index, OfflineEmbedder(), EmbeddingCache(), SamplingConfig(args.top_k, args.top_p, 1))
        hcp_seconds = time.perf_counter() - start
        plans = [
            ("infile", infile_only_plan(task, index)),
            ("random-all", random_all_plan(task, index, args.seed)),
            *[(f"d-level:{lv}", d_level_plan(task, lv, index)) for lv in (1, 2, 4, "inf")],
            *[(f"p-level:{lv}", p_level_plan(task, lv, index)) for lv in (1, 2)],
            (f"hcp k={args.top_k} p={args.top_p}", hcp),
        ]
        sizes = {name: count_tokens(render_unbounded(plan, template, root.name)) for name, plan in plans}
        base = sizes["random-all"]
        print(f"repo: {len(index.files)} files, focal {focal}, imports {direct_imports(focal, index)}")
        print(f"{'strategy':<22} {'tokens':>9} {'vs random-all':>14}")
        for name, n in sizes.items():
            print(f"{name:<22} {n:>9} {n / base:>14.3f}")
        print(f"hcp planning time {hcp_seconds:.2f}s")


if __name__ == "__main__":
    main()

"""Prompt length and cross-file coverage across a top-k / top-p grid."""

import argparse
import tempfile
from pathlib import Path

from hcp.dependency_graph import direct_imports
from hcp.hcp_planner import SamplingConfig, build_hcp_plan
from hcp.prompt_builder import count_tokens, get_template, render_unbounded
from hcp.relevance import EmbeddingCache, OfflineEmbedder
from hcp.repo_model import index_repository
from hcp.synthetic import make_large_repo
from hcp.tasks import CompletionTask


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--files", type=int, default=40)
    ap.add_argument("--top-k", type=int, nargs="+", default=[0, 1, 5, 10, 20])
    ap.add_argument("--top-p", type=float, nargs="+", default=[0.0, 0.1, 0.3, 0.5, 1.0])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        root = make_large_repo(Path(tmp) / "repo", n_files=args.files, seed=args.seed)
        index = index_repository(root)
        focal = max(sorted(index.files), key=lambda p: len(direct_imports(p, index)))
        fn = index.files[focal].functions[0]
        task = CompletionTask("sweep", str(root), focal, fn.body_span.start_line + 1, 4, "?")
        template = get_template("starcoder2")
        provider, cache = OfflineEmbedder(), EmbeddingCache()
        print("rows: top_k, columns: top_p, cells: prompt tokens")
        print(f"{'':>6}" + "".join(f"{p:>9.2f}" for p in args.top_p))
        for k in args.top_k:
            row = []
            for p in args.top_p:
                plan = build_hcp_plan(task, index, provider, cache, SamplingConfig(k, p, 1))
                row.append(count_tokens(render_unbounded(plan, template, root.name)))
            print(f"{k:>6}" + "".join(f"{n:>9}" for n in row))


if __name__ == "__main__":
    main()

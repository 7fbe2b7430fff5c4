"""Write a synthetic repository plus a JSON-Lines task file for it.

    python scripts/make_synthetic_repo.py out/ --kind large --files 60
    python scripts/make_synthetic_repo.py out/ --kind chain --files 8
"""

import argparse
import json
import random
from pathlib import Path

from hcp.repo_model import index_repository
from hcp.synthetic import make_chain_repo, make_large_repo


def make_tasks(root: Path, n_tasks: int, seed: int) -> list[dict]:
    """Cursor at the start of a random body line; the ground truth is that line."""
    index = index_repository(root)
    rng = random.Random(seed)
    candidates = []
    for path, f in sorted(index.files.items()):
        lines = f.raw_text.splitlines()
        for fn in f.all_functions():
            for ln in range(fn.body_span.start_line, fn.body_span.end_line + 1):
                text = lines[ln - 1]
                stripped = text.strip()
                if stripped and not stripped.startswith(('"', "'", "#")):
                    candidates.append((path, ln, len(text) - len(text.lstrip()), stripped))
    picked = rng.sample(candidates, min(n_tasks, len(candidates)))
    return [
        {"id": f"t{i:03d}", "repo_root": root.name, "target_file": p, "line": ln, "column": col, "ground_truth": gt}
        for i, (p, ln, col, gt) in enumerate(sorted(picked))
    ]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out", type=Path, help="parent directory; the repo goes in OUT/repo")
    ap.add_argument("--kind", choices=["large", "chain"], default="large")
    ap.add_argument("--files", type=int, default=60)
    ap.add_argument("--tasks", type=int, default=25)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    root = args.out / "repo"
    if args.kind == "chain":
        make_chain_repo(root, args.files, seed=args.seed)
    else:
        make_large_repo(root, n_files=args.files, seed=args.seed)
    tasks = make_tasks(root, args.tasks, args.seed)
    with open(args.out / "tasks.jsonl", "w", encoding="utf-8") as fh:
        for t in tasks:
            fh.write(json.dumps(t, sort_keys=True) + "\n")
    print(f"wrote {root} and {len(tasks)} tasks to {args.out / 'tasks.jsonl'}")


if __name__ == "__main__":
    main()

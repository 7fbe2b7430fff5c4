"""Median and mean prompt length per dependency level for a task file.

Without ``--tasks`` a chain repository is generated and every file gets one task.
"""

import argparse
import json
import tempfile
from pathlib import Path

from hcp.eval_harness import prompt_length_stats
from hcp.synthetic import make_chain_repo
from hcp.tasks import CompletionTask, load_tasks


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tasks", help="JSON-Lines task file")
    ap.add_argument("--family", default="starcoder2")
    ap.add_argument("--chain-length", type=int, default=10)
    ap.add_argument("--json", action="store_true", help="print JSON instead of a table")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        if args.tasks:
            tasks = load_tasks(args.tasks)
        else:
            root = make_chain_repo(Path(tmp) / "chain", args.chain_length)
            tasks = [CompletionTask(f"t{i}", str(root), f"m{i}.py", 5, 0, "?") for i in range(args.chain_length)]
        stats = prompt_length_stats(tasks, args.family)
    if args.json:
        print(json.dumps(stats, indent=2))
        return
    print(f"{'level':<6} {'median':>10} {'average':>10}")
    for level, row in stats.items():
        print(f"{level:<6} {row['median']:>10.1f} {row['average']:>10.1f}")


if __name__ == "__main__":
    main()

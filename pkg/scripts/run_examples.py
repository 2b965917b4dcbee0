"""Run every problem file in problems/ through the checks that apply to it.

Usage: python3 scripts/run_examples.py [--out DIR]
"""
import argparse
import json
from pathlib import Path

from raregion.decomposition import assemble
from raregion.problem import ProblemError, load
from raregion.reeb import export_dot, reeb_digraph
from raregion.region import check_definition1

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problems", type=Path, default=ROOT / "problems")
    ap.add_argument("--out", type=Path, default=None, help="write one JSON report per problem here")
    args = ap.parse_args()
    for path in sorted(args.problems.glob("*.toml")):
        try:
            prob = load(path)
        except ProblemError as exc:
            print(f"{path.stem:22s} input error: {exc}")
            continue
        direct = check_definition1(prob.region())
        row = {"direct": direct.overall}
        if prob.blocks is not None:
            rep = assemble(prob.decomposition(), prob.mode, prob.b)
            row[prob.mode] = rep.overall
            if args.out is not None:
                args.out.mkdir(parents=True, exist_ok=True)
                (args.out / f"{path.stem}.json").write_text(rep.to_json())
        g = reeb_digraph(prob.region(), prob.reeb_coord)
        row["reeb"] = f"{len(g.vertices)}v/{len(g.edges)}e" + (" flagged" if g.flags else "")
        if args.out is not None:
            (args.out / f"{path.stem}.dot").write_text(export_dot(g))
        print(f"{path.stem:22s} " + json.dumps(row))


if __name__ == "__main__":
    main()

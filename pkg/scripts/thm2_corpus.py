"""Compare the special-value test with conditions 6 and 7 on generated corpora.

Usage: python3 scripts/thm2_corpus.py [--count 50] [--seed 20240601]
"""
import argparse
from collections import Counter

from raregion.corpus import thm2_corpus
from raregion.decomposition import check_cond6, check_cond7, check_thm2
from raregion.region import check_definition1
from raregion.report import combine


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--verbose", action="store_true", help="print one line per configuration")
    args = ap.parse_args()
    table = Counter()
    for k, inp in enumerate(thm2_corpus(args.count, args.seed)):
        t = check_thm2(inp).verdict
        c = combine([check_cond6(inp).verdict, check_cond7(inp).verdict])
        d = check_definition1(inp.region_spec()).overall
        table[(t, c, d)] += 1
        if args.verbose:
            texts = " ; ".join(f"{s.label}: {s.f}" for s in inp.surfaces)
            print(f"{k:3d} thm2={t:13s} cond6+7={c:13s} direct={d:22s} {texts}")
    print("thm2           cond6+7        direct                  count")
    for (t, c, d), n in sorted(table.items()):
        print(f"{t:14s} {c:14s} {d:23s} {n}")


if __name__ == "__main__":
    main()

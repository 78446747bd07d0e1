#!/usr/bin/env python3
"""Convert tab-separated (utterance, logical form) files into corpus JSONL.

Expects one directory per release with files named
``<domain>_train.tsv`` and ``<domain>_test.tsv``. Predicates are the
property names a logical form mentions as ``(string name)`` or
``(string !name)``, converted to camelCase (``num_games_played`` becomes
``numGamesPlayed``) to match the built-in exclusion table. Writes ``<out>/<domain>.jsonl`` and prints a config
fragment with one ``[[domains]]`` table per converted domain.

    python3 scripts/convert_overnight.py data/overnight out/corpus
"""

import argparse
import json
import re
import sys
from pathlib import Path

PROPERTY = re.compile(r"\(string !?([A-Za-z_][\w]*)\)")


def camel(name):
    head, *rest = name.split("_")
    return head + "".join(p[:1].upper() + p[1:] for p in rest)


def predicates(logical_form):
    return sorted({camel(p) for p in PROPERTY.findall(logical_form)})


def convert(src, out):
    domains = {}
    for path in sorted(src.glob("*_*.tsv")):
        domain, split = path.stem.rsplit("_", 1)
        if split not in ("train", "test"):
            continue
        rows = domains.setdefault(domain, [])
        with path.open(encoding="utf-8") as f:
            for n, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                try:
                    text, form = line.split("\t")[:2]
                except ValueError:
                    sys.exit(f"{path}:{n}: expected utterance<TAB>logical form")
                rows.append(
                    {
                        "id": f"{domain}-{split}-{n}",
                        "text": text,
                        "predicates": predicates(form),
                        "split": split,
                    }
                )
    out.mkdir(parents=True, exist_ok=True)
    for domain, rows in domains.items():
        with (out / f"{domain}.jsonl").open("w", encoding="utf-8") as f:
            for r in rows:
                f.write(json.dumps(r) + "\n")
        print(f'[[domains]]\nname = "{domain}"\ncorpus = "{(out / domain).resolve()}.jsonl"\n')
    return domains


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("src", type=Path)
    ap.add_argument("out", type=Path)
    args = ap.parse_args()
    if not convert(args.src, args.out):
        sys.exit(f"no <domain>_<split>.tsv files under {args.src}")


if __name__ == "__main__":
    main()

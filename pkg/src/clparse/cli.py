"""Command line front end.

One sentence per input line.  A token is looked up in the lexicon
first; failing that it must be a raw category name.  cfg mode prints
reduction sequences, hpsg mode prints the dumps of the accepted signs.
Store events go to stderr with --trace, counter totals with --stats.
Exit status: 0 when every line got at least one analysis, 1 when some
line got none, 2 on usage or grammar errors.
"""

from __future__ import annotations

import argparse
import io
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor

from .cfg import derivations_to_tree, format_derivation, parse
from .errors import GrammarError, UsageError
from .grammar import Grammar, load_grammar_file
from .hpsg import parse_hpsg, sign_dump

STAT_KEYS = ("windows_tried", "reductions", "backtracks",
             "completeness_tests", "ask_evaluations")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="clparse",
        description="parse sentences against a constraint grammar")
    p.add_argument("--grammar", required=True, metavar="PATH",
                   help="grammar file to load")
    p.add_argument("--mode", choices=("cfg", "hpsg"), default="cfg",
                   help="reduction sequences or full signs (default: cfg)")
    p.add_argument("--strategy", choices=("active", "gentest"), default="active",
                   help="check while building, or build then check")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", metavar="STR", help="one sentence")
    src.add_argument("--file", metavar="PATH", help="sentences, one per line")
    p.add_argument("--limit", type=int, default=None, metavar="N",
                   help="cap the analyses reported per sentence")
    p.add_argument("--dedupe-trees", action="store_true",
                   help="keep one derivation per distinct tree")
    p.add_argument("--trace", action="store_true",
                   help="store events to stderr")
    p.add_argument("--stats", action="store_true",
                   help="counter totals to stderr")
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="parse input lines in parallel")
    return p


def _taggings(tokens, g: Grammar):
    """Category sequences a token line can stand for, lexicon first."""
    names = {c.name for c in g.categories()}
    per = []
    for tok in tokens:
        entries = g.entries(tok)
        if entries:
            cats = []
            for e in entries:
                if e.category not in cats:
                    cats.append(e.category)
            per.append(cats)
        elif tok in names:
            per.append([tok])
        else:
            raise UsageError(f"unknown token {tok!r}")
    return [tuple(t) for t in itertools.product(*per)]


def analyze_line(line: str, g: Grammar, *, mode: str, strategy: str,
                 limit: int | None, dedupe: bool, traced: bool):
    """Parse one sentence.  Returns (text, n_analyses, stats, trace)."""
    tokens = line.split()
    if not tokens:
        raise UsageError("empty sentence")
    buf = io.StringIO() if traced else None
    trace = (lambda s: buf.write(s + "\n")) if traced else None
    stats = dict.fromkeys(STAT_KEYS, 0)

    if mode == "hpsg":
        signs, hs = parse_hpsg(tokens, g, strategy=strategy, limit=limit,
                               trace=trace)
        stats["windows_tried"] = hs.windows_tried
        stats["reductions"] = hs.reductions_applied
        stats["backtracks"] = hs.backtracks
        stats["completeness_tests"] = hs.completeness_tests
        stats["ask_evaluations"] = hs.ask_evaluations
        stats["expansions"] = hs.expansions
        stats["trees_considered"] = hs.trees_considered
        stats["signs_accepted"] = hs.signs_accepted
        text = "\n\n".join(sign_dump(s) for s in signs)
        return text, len(signs), stats, buf.getvalue() if buf else ""

    found = []
    for cats in _taggings(tokens, g):
        derivs, ps = parse(cats, g, strategy=strategy, trace=trace)
        stats["windows_tried"] += ps.windows_tried
        stats["reductions"] += ps.reductions_applied
        stats["backtracks"] += ps.backtracks
        stats["completeness_tests"] += ps.completeness_tests
        stats["ask_evaluations"] += ps.ask_evaluations
        found.extend((cats, d) for d in derivs)
    if dedupe:
        trees, kept = [], []
        for cats, d in found:
            tree = derivations_to_tree(d, cats)
            if tree not in trees:
                trees.append(tree)
                kept.append((cats, d))
        found = kept
    if limit is not None:
        found = found[:limit]
    text = "\n".join(format_derivation(d) for _, d in found)
    return text, len(found), stats, buf.getvalue() if buf else ""


def _worker(task):
    line, g, mode, strategy, limit, dedupe, traced = task
    try:
        return "ok", analyze_line(line, g, mode=mode, strategy=strategy,
                                  limit=limit, dedupe=dedupe, traced=traced)
    except UsageError as e:
        return "usage", str(e)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    try:
        g = load_grammar_file(args.grammar)
    except (GrammarError, UsageError, OSError) as e:
        print(f"clparse: {e}", file=sys.stderr)
        return 2

    if args.input is not None:
        raw = [args.input]
    else:
        try:
            with open(args.file) as fh:
                raw = fh.readlines()
        except OSError as e:
            print(f"clparse: {e}", file=sys.stderr)
            return 2
    lines = [s for s in (s.strip() for s in raw) if s]
    if not lines:
        print("clparse: no input", file=sys.stderr)
        return 2

    tasks = [(line, g, args.mode, args.strategy, args.limit,
              args.dedupe_trees, args.trace) for line in lines]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_worker, tasks))   # input order kept
    else:
        results = [_worker(t) for t in tasks]

    headers = len(lines) > 1
    any_empty = False
    totals: dict[str, int] = {}
    for line, (status, payload) in zip(lines, results):
        if status == "usage":
            print(f"clparse: {payload}", file=sys.stderr)
            return 2
        text, n, stats, trace_text = payload
        if trace_text:
            sys.stderr.write(trace_text)
        if headers:
            print(f"# {line}")
        if text:
            print(text)
        if headers:
            print()
        if n == 0:
            any_empty = True
        for key, value in stats.items():
            totals[key] = totals.get(key, 0) + value

    if args.stats:
        for key, value in totals.items():
            print(f"{key} {value}", file=sys.stderr)
    return 1 if any_empty else 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``biplink <ingest|stats|communities|eval|recommend>``.

Exit status is 0 on success, 1 on a usage error (bad flags, unknown measure,
missing input path) and 2 when the input data itself is invalid.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .communities import DEFAULT_TRIALS, detect_communities, format_partition, parse_partition
from .errors import BiplinkError
from .evaluation import PARTITION_SOURCES, evaluate_measure
from .graph import compute_stats, largest_connected_component, log_binned_histogram
from .ingestion import IngestReport, build_graph, parse_events, parse_repo_meta, rank_repositories
from .io import GRAPH_FILE, load_graph, save_graph
from .projection import DEFAULT_DEGREE_CAP
from .recommend import DEFAULT_TOP_N, recommend_all, recommend_top_n
from .scoring import prepare
from .similarity import MeasureKind, MeasureSyntaxError, parse_measure

DEFAULT_SEED = 42
SEED_ENV = "BIPLINK_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _existing(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


def _measure(text: str, normalize: bool = False):
    return parse_measure(text, normalize=normalize)


def _weight(text: str) -> MeasureKind:
    m = parse_measure(text)
    if m.inverted or not m.is_local:
        raise UsageError(f"--weight must be a local index, got {text!r}")
    return m.kind


def _generated_at(graph_path: Path) -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        ts = int(epoch)
    else:
        f = graph_path / GRAPH_FILE if graph_path.is_dir() else graph_path
        ts = int(f.stat().st_mtime)
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# -- subcommands ----------------------------------------------------------


def cmd_ingest(args) -> int:
    events_path = _existing(args.events, "events file")
    repos_path = _existing(args.repos, "repository metadata file")
    if args.top_k < 1:
        raise UsageError("--top-k must be >= 1")
    events = parse_events(events_path.read_bytes())
    meta = parse_repo_meta(repos_path.read_bytes())
    report = IngestReport(
        event_rows=len(events) + len(events.errors),
        event_row_errors=len(events.errors),
        meta_rows=len(meta) + len(meta.errors),
        meta_row_errors=len(meta.errors),
    )
    top = rank_repositories(events.records, meta.records, args.top_k, report)
    g, ids = build_graph(events.records, top)
    if not args.no_lcc:
        g, mapping = largest_connected_component(g, return_mapping=True)
        ids = ids.restrict(mapping.users, mapping.repos)
    report.users = g.user_count
    report.links = g.edge_count
    out = Path(args.out)
    save_graph(out, g, ids)
    doc = {
        "version": __version__,
        "seed": args.seed,
        "top_k": args.top_k,
        "lcc": not args.no_lcc,
        "report": report.to_dict(),
        "ranking": [
            {"repo": e.repo_id, "distinct_committers": e.distinct_committers, "total_commits": e.total_commits}
            for e in top
        ],
        "row_errors": {
            "events": [{"line": e.line, "message": e.message} for e in events.errors],
            "repos": [{"line": e.line, "message": e.message} for e in meta.errors],
        },
    }
    _write(out / "report.json", _dump(doc))
    print(_dump({"version": __version__, "seed": args.seed, **report.to_dict()}), end="")
    return 0


def _histogram_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["degree_lo", "degree_hi", "count", "density"])
    for lo, hi, count, density in rows:
        w.writerow([lo, hi, count, repr(density)])
    return buf.getvalue()


def cmd_stats(args) -> int:
    g, _ = load_graph(_existing(args.graph, "graph"))
    stats = compute_stats(g)
    out = Path(args.out)
    doc = {"version": __version__, "seed": args.seed, **stats.to_dict()}
    _write(out / "stats.json", _dump(doc))
    _write(out / "user_degree_hist.csv", _histogram_csv(log_binned_histogram(stats.user_degree_histogram)))
    _write(out / "repo_degree_hist.csv", _histogram_csv(log_binned_histogram(stats.repo_degree_histogram)))
    print(_dump(doc), end="")
    return 0


def cmd_communities(args) -> int:
    g, _ = load_graph(_existing(args.graph, "graph"))
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    p = detect_communities(g, args.seed, args.trials)
    text = (
        f"# version={__version__} seed={args.seed} trials={args.trials} "
        f"communities={p.community_count} codelength={p.codelength!r}\n"
    ) + format_partition(p)
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval(args) -> int:
    g, _ = load_graph(_existing(args.graph, "graph"))
    measure = _measure(args.measure, args.normalize)
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    if args.epsilon < 0:
        raise UsageError("--epsilon must be >= 0")
    ev = evaluate_measure(
        g,
        measure,
        args.seed,
        args.repeats,
        exact=args.exact,
        epsilon=args.epsilon,
        threads=args.threads,
        partition_source=args.partition_source,
        weight=_weight(args.weight),
        threshold=args.threshold,
        degree_cap=args.degree_cap or None,
        trials=args.trials,
    )
    doc = {
        "version": __version__,
        "seed": args.seed,
        "measure": str(measure),
        "exact": args.exact,
        "epsilon": args.epsilon,
        "partition_source": args.partition_source,
        **ev.to_dict(),
    }
    text = _dump(doc)
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_recommend(args) -> int:
    gpath = _existing(args.graph, "graph")
    g, ids = load_graph(gpath)
    measure = _measure(args.measure)
    if args.top < 1:
        raise UsageError("--top must be >= 1")
    if not args.all_users and args.user is None:
        raise UsageError("give --user or --all-users")
    kwargs = dict(
        weight=_weight(args.weight),
        threshold=args.threshold,
        degree_cap=args.degree_cap or None,
        seed=args.seed,
        trials=args.trials,
    )
    if args.partition:
        kwargs["partition"] = parse_partition(_existing(args.partition, "partition file").read_text("utf-8"), g)
    stamp = _generated_at(gpath)
    if args.all_users:
        recs = recommend_all(g, measure, args.top, ids=ids, generated_at=stamp, **kwargs)
    else:
        scorer = prepare(measure, g, **kwargs)
        recs = [recommend_top_n(g, measure, args.user, args.top, ids=ids, scorer=scorer, generated_at=stamp)]
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        for rec in recs:
            line = {"version": __version__, "seed": args.seed, **rec.to_dict()}
            out.write(json.dumps(line, allow_nan=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"random seed (default: ${SEED_ENV} or {DEFAULT_SEED})")
    common.add_argument(
        "--threads", type=int, default=os.cpu_count() or 1, help="worker threads; 1 gives the serial schedule"
    )

    scoring = _Parser(add_help=False)
    scoring.add_argument("--weight", default="jaccard", help="projection weight for the internal-link measure")
    scoring.add_argument("--threshold", type=float, default=0.0, help="internal-link weight threshold")
    scoring.add_argument(
        "--degree-cap", type=int, default=DEFAULT_DEGREE_CAP, help="max repo degree for projection (0: no cap)"
    )
    scoring.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help="community detection trials")

    parser = _Parser(prog="biplink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"biplink {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="build a graph from contribution events")
    p.add_argument("--events", required=True, help="events CSV (user_id,repo_id,kind,timestamp)")
    p.add_argument("--repos", required=True, help="repository metadata CSV (repo_id,is_fork,is_deleted)")
    p.add_argument("--top-k", type=int, default=1000)
    p.add_argument("--no-lcc", action="store_true", help="keep every component instead of the largest")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", parents=[common], help="graph statistics and degree histograms")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("communities", parents=[common], help="map-equation community detection")
    p.add_argument("--graph", required=True)
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--out", help="partition file (default: stdout)")
    p.set_defaults(func=cmd_communities)

    p = sub.add_parser("eval", parents=[common, scoring], help="AUC evaluation of a measure")
    p.add_argument("--graph", required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--exact", action="store_true", help="compare every positive with every negative")
    p.add_argument("--epsilon", type=float, default=0.0, help="tie tolerance")
    p.add_argument("--normalize", action="store_true", help="min-max normalize combined components")
    p.add_argument("--partition-source", choices=PARTITION_SOURCES, default="reduced")
    p.add_argument("--out", help="results JSON (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("recommend", parents=[common, scoring], help="top-N repository recommendations")
    p.add_argument("--graph", required=True)
    p.add_argument("--measure", default="community")
    p.add_argument("--user", help="external user id")
    p.add_argument("--all-users", action="store_true")
    p.add_argument("--top", type=int, default=DEFAULT_TOP_N)
    p.add_argument("--partition", help="reuse a partition file from the communities command")
    p.add_argument("--out", help="JSON lines output (default: stdout)")
    p.set_defaults(func=cmd_recommend)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except (UsageError, MeasureSyntaxError) as exc:
        print(f"biplink: error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # downstream reader went away (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")
        return 0
    except (BiplinkError, ValueError, OSError) as exc:
        print(f"biplink: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

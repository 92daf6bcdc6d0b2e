"""Parse contribution events and repository metadata, rank repositories, build the graph.

Events CSV header: ``user_id,repo_id,kind,timestamp`` with ``kind`` in
``{commit, pull_request}``.  Metadata CSV header: ``repo_id,is_fork,is_deleted``
with ``true``/``false`` booleans.
"""

from __future__ import annotations

import csv
import enum
import io
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from typing import IO, Iterable

import numpy as np

from .errors import FormatError
from .graph import BipartiteGraph
from .io import IdMap

EVENT_HEADER = ("user_id", "repo_id", "kind", "timestamp")
META_HEADER = ("repo_id", "is_fork", "is_deleted")


class EventKind(enum.Enum):
    COMMIT = "commit"
    PULL_REQUEST = "pull_request"


@dataclass(frozen=True)
class ContributionEvent:
    user_id: str
    repo_id: str
    kind: EventKind
    timestamp: str


@dataclass(frozen=True)
class RepoMeta:
    repo_id: str
    is_fork: bool
    is_deleted: bool


@dataclass(frozen=True)
class RankingEntry:
    repo_id: str
    distinct_committers: int
    total_commits: int


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass
class ParseResult:
    """Well-formed records plus the rows that were rejected."""

    records: list
    errors: list[RowError] = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


@dataclass
class IngestReport:
    event_rows: int = 0
    event_row_errors: int = 0
    meta_rows: int = 0
    meta_row_errors: int = 0
    events_missing_meta: int = 0
    repos_missing_meta: int = 0
    excluded_fork_or_deleted: int = 0
    ranked_repos: int = 0
    users: int = 0
    links: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _text_stream(source: IO | bytes | str) -> IO[str]:
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8-sig"))
    if isinstance(source, str):
        return io.StringIO(source)
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")


def _read_header(reader, expected: tuple[str, ...]) -> None:
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"missing header; expected {','.join(expected)}") from None
    if tuple(h.strip().lstrip("﻿") for h in header) != expected:
        raise FormatError(f"bad header {header!r}; expected {','.join(expected)}")


def _check_timestamp(ts: str) -> None:
    # Python 3.10 fromisoformat rejects the trailing 'Z'
    datetime.fromisoformat(ts[:-1] + "+00:00" if ts.endswith("Z") else ts)


def parse_events(source: IO | bytes | str) -> ParseResult:
    """Parse an events CSV.  Malformed rows are collected in ``errors``."""
    reader = csv.reader(_text_stream(source))
    _read_header(reader, EVENT_HEADER)
    out = ParseResult([])
    for row in reader:
        line = reader.line_num
        if not row or row == [""]:
            continue
        if len(row) != 4:
            out.errors.append(RowError(line, f"expected 4 fields, got {len(row)}"))
            continue
        user, repo, kind, ts = (x.strip() for x in row)
        if not user or not repo:
            out.errors.append(RowError(line, "empty user_id or repo_id"))
            continue
        try:
            ekind = EventKind(kind)
        except ValueError:
            out.errors.append(RowError(line, f"unknown kind {kind!r}"))
            continue
        try:
            _check_timestamp(ts)
        except ValueError:
            out.errors.append(RowError(line, f"bad timestamp {ts!r}"))
            continue
        out.records.append(ContributionEvent(user, repo, ekind, ts))
    return out


_BOOL = {"true": True, "false": False}


def parse_repo_meta(source: IO | bytes | str) -> ParseResult:
    """Parse a repository metadata CSV; a repeated ``repo_id`` is a row error."""
    reader = csv.reader(_text_stream(source))
    _read_header(reader, META_HEADER)
    out = ParseResult([])
    seen: set[str] = set()
    for row in reader:
        line = reader.line_num
        if not row or row == [""]:
            continue
        if len(row) != 3:
            out.errors.append(RowError(line, f"expected 3 fields, got {len(row)}"))
            continue
        repo, fork, deleted = (x.strip() for x in row)
        if not repo:
            out.errors.append(RowError(line, "empty repo_id"))
            continue
        if fork.lower() not in _BOOL or deleted.lower() not in _BOOL:
            out.errors.append(RowError(line, "booleans must be true/false"))
            continue
        if repo in seen:
            out.errors.append(RowError(line, f"duplicate repo_id {repo!r}"))
            continue
        seen.add(repo)
        out.records.append(RepoMeta(repo, _BOOL[fork.lower()], _BOOL[deleted.lower()]))
    return out


def rank_repositories(
    events: Iterable[ContributionEvent],
    meta: Iterable[RepoMeta],
    k: int,
    report: IngestReport | None = None,
) -> list[RankingEntry]:
    """Top ``k`` original, live repositories by distinct committers.

    Candidates are repositories referenced by at least one event whose
    metadata marks them neither forked nor deleted.  Only commits count;
    order is (distinct committers desc, total commits desc, repo_id asc).
    Events on repositories without metadata are excluded and counted in
    ``report``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    meta_by_id = {m.repo_id: m for m in meta}
    committers: dict[str, set[str]] = defaultdict(set)
    commits: dict[str, int] = defaultdict(int)
    referenced: set[str] = set()
    missing_events = 0
    missing_repos: set[str] = set()
    for ev in events:
        m = meta_by_id.get(ev.repo_id)
        if m is None:
            missing_events += 1
            missing_repos.add(ev.repo_id)
            continue
        referenced.add(ev.repo_id)
        if ev.kind is EventKind.COMMIT:
            committers[ev.repo_id].add(ev.user_id)
            commits[ev.repo_id] += 1
    eligible = [r for r in referenced if not (meta_by_id[r].is_fork or meta_by_id[r].is_deleted)]
    entries = [RankingEntry(r, len(committers.get(r, ())), commits.get(r, 0)) for r in eligible]
    entries.sort(key=lambda e: (-e.distinct_committers, -e.total_commits, e.repo_id))
    if report is not None:
        report.events_missing_meta = missing_events
        report.repos_missing_meta = len(missing_repos)
        report.excluded_fork_or_deleted = len(referenced) - len(eligible)
        report.ranked_repos = min(k, len(entries))
    return entries[:k]


def build_graph(
    events: Iterable[ContributionEvent], top: list[RankingEntry]
) -> tuple[BipartiteGraph, IdMap]:
    """Link every user with an event (commit or pull request) on a top repository.

    Users and repositories are indexed by sorted external id, so the result
    does not depend on event order.  Callers typically follow this with
    :func:`biplink.graph.largest_connected_component`.
    """
    if not top:
        raise ValueError("top repository list is empty")
    repos = sorted({e.repo_id for e in top})
    repo_index = {r: i for i, r in enumerate(repos)}
    pairs = {(ev.user_id, ev.repo_id) for ev in events if ev.repo_id in repo_index}
    users = sorted({u for u, _ in pairs})
    user_index = {u: i for i, u in enumerate(users)}
    edges = np.array([(user_index[u], repo_index[r]) for u, r in pairs], dtype=np.int64).reshape(-1, 2)
    return BipartiteGraph(len(users), len(repos), edges), IdMap(tuple(users), tuple(repos))

"""On-disk formats for graphs, external ID maps and partitions.

Graph file::

    biplink-graph v1 <user_count> <repo_count> <edge_count>
    <u>\t<r>            one line per edge, sorted by (u, r)

ID map file::

    u\t<index>\t<external_id>
    r\t<index>\t<external_id>
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, UnknownIdError
from .graph import BipartiteGraph

GRAPH_MAGIC = "biplink-graph"
GRAPH_VERSION = "v1"
GRAPH_FILE = "graph.tsv"
IDMAP_FILE = "ids.tsv"


@dataclass(frozen=True)
class IdMap:
    """Dense index <-> external identifier (GitHub login / repo slug)."""

    users: tuple[str, ...]
    repos: tuple[str, ...]
    _user_lookup: dict[str, int] = field(init=False, repr=False, compare=False)
    _repo_lookup: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_user_lookup", {s: i for i, s in enumerate(self.users)})
        object.__setattr__(self, "_repo_lookup", {s: i for i, s in enumerate(self.repos)})
        if len(self._user_lookup) != len(self.users) or len(self._repo_lookup) != len(self.repos):
            raise FormatError("duplicate external id in id map")

    @classmethod
    def identity(cls, g: BipartiteGraph) -> "IdMap":
        return cls(
            tuple(f"u{i}" for i in range(g.user_count)),
            tuple(f"r{i}" for i in range(g.repo_count)),
        )

    def user_index(self, external_id: str) -> int:
        try:
            return self._user_lookup[external_id]
        except KeyError:
            raise UnknownIdError(f"unknown user id {external_id!r}") from None

    def repo_index(self, external_id: str) -> int:
        try:
            return self._repo_lookup[external_id]
        except KeyError:
            raise UnknownIdError(f"unknown repo id {external_id!r}") from None

    def restrict(self, users: np.ndarray, repos: np.ndarray) -> "IdMap":
        return IdMap(tuple(self.users[i] for i in users), tuple(self.repos[i] for i in repos))


def format_graph(g: BipartiteGraph) -> str:
    lines = [f"{GRAPH_MAGIC} {GRAPH_VERSION} {g.user_count} {g.repo_count} {g.edge_count}"]
    lines.extend(f"{u}\t{r}" for u, r in g.edges().tolist())
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> BipartiteGraph:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty graph file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != GRAPH_MAGIC or head[1] != GRAPH_VERSION:
        raise FormatError(f"bad graph header: {lines[0]!r}")
    try:
        nu, nr, m = (int(x) for x in head[2:])
    except ValueError:
        raise FormatError(f"bad graph header: {lines[0]!r}") from None
    body = [ln for ln in lines[1:] if ln]
    if len(body) != m:
        raise FormatError(f"header declares {m} edges, found {len(body)}")
    edges = np.empty((m, 2), dtype=np.int64)
    for i, ln in enumerate(body):
        parts = ln.split("\t")
        if len(parts) != 2:
            raise FormatError(f"line {i + 2}: expected '<u>\\t<r>'")
        try:
            edges[i] = (int(parts[0]), int(parts[1]))
        except ValueError:
            raise FormatError(f"line {i + 2}: non-integer index") from None
    if m > 1:
        keys = edges[:, 0] * max(nr, 1) + edges[:, 1]
        if np.any(np.diff(keys) <= 0):
            raise FormatError("edges must be unique and sorted by (u, r)")
    try:
        return BipartiteGraph(nu, nr, edges)
    except IndexError as exc:
        raise FormatError(str(exc)) from None


def _check_id(s: str) -> str:
    if not s or any(c in s for c in "\t\r\n"):
        raise FormatError(f"external id {s!r} is empty or contains tab/newline")
    return s


def format_id_map(ids: IdMap) -> str:
    lines = [f"u\t{i}\t{_check_id(s)}" for i, s in enumerate(ids.users)]
    lines += [f"r\t{i}\t{_check_id(s)}" for i, s in enumerate(ids.repos)]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_id_map(text: str) -> IdMap:
    users: dict[int, str] = {}
    repos: dict[int, str] = {}
    for no, ln in enumerate(text.splitlines(), 1):
        if not ln:
            continue
        parts = ln.split("\t")
        if len(parts) != 3 or parts[0] not in ("u", "r"):
            raise FormatError(f"id map line {no}: expected '<u|r>\\t<index>\\t<id>'")
        try:
            idx = int(parts[1])
        except ValueError:
            raise FormatError(f"id map line {no}: non-integer index") from None
        target = users if parts[0] == "u" else repos
        if idx in target:
            raise FormatError(f"id map line {no}: duplicate index {idx}")
        target[idx] = parts[2]
    for name, d in (("user", users), ("repo", repos)):
        if sorted(d) != list(range(len(d))):
            raise FormatError(f"{name} indices in id map are not dense")
    return IdMap(tuple(users[i] for i in range(len(users))), tuple(repos[i] for i in range(len(repos))))


def _write_text(path: Path, text: str) -> None:
    # newline="" keeps output byte-identical across platforms
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def save_graph(directory: str | os.PathLike, g: BipartiteGraph, ids: IdMap | None = None) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / GRAPH_FILE, format_graph(g))
    if ids is not None:
        if len(ids.users) != g.user_count or len(ids.repos) != g.repo_count:
            raise FormatError("id map does not match graph sizes")
        _write_text(out / IDMAP_FILE, format_id_map(ids))
    return out


def load_graph(path: str | os.PathLike) -> tuple[BipartiteGraph, IdMap]:
    """Load a graph from a directory (``graph.tsv`` + optional ``ids.tsv``) or a graph file.

    Without an ID map, external ids default to ``u<index>`` / ``r<index>``.
    """
    p = Path(path)
    if p.is_dir():
        gfile, ifile = p / GRAPH_FILE, p / IDMAP_FILE
    else:
        gfile, ifile = p, p.with_name(IDMAP_FILE)
    if not gfile.exists():
        raise FormatError(f"graph file not found: {gfile}")
    g = parse_graph(gfile.read_text(encoding="utf-8"))
    if ifile.exists():
        ids = parse_id_map(ifile.read_text(encoding="utf-8"))
        if len(ids.users) != g.user_count or len(ids.repos) != g.repo_count:
            raise FormatError("id map does not match graph sizes")
    else:
        ids = IdMap.identity(g)
    return g, ids

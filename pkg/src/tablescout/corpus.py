"""CSV table repository: loading, header statistics, and value scanning.

A corpus is a directory tree of ``.csv`` files. Each file is one table; its
id is the relative path without the extension (posix separators). Only the
first record of each file is parsed at load time; bodies are scanned on
demand by ``scan_for_value``.
"""

import csv
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .errors import EmptyCorpus, MalformedGraph

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def normalize_header(name: str) -> str:
    """Canonical form used for all header comparisons."""
    return name.strip().casefold()


def tokenize(text: str) -> List[str]:
    """Lowercased alphanumeric tokens, in order of appearance."""
    return _TOKEN_RE.findall(text.casefold())


@dataclass
class TableMeta:
    """One table: id, file location, and its header row as read."""

    id: str
    path: Path
    headers: Tuple[str, ...]
    row_count: Optional[int] = None

    def normalized_headers(self) -> Set[str]:
        return {normalize_header(h) for h in self.headers}


class Corpus:
    """Immutable collection of tables keyed by id.

    Header statistics are computed once; token document frequencies (used by
    lexical matching) are built lazily on first access.
    """

    def __init__(self, tables: Sequence[TableMeta], skipped: Optional[List[Tuple[Path, str]]] = None):
        self.tables: Dict[str, TableMeta] = {t.id: t for t in sorted(tables, key=lambda t: t.id)}
        if len(self.tables) != len(tables):
            raise ValueError("duplicate table ids in corpus")
        self.skipped: List[Tuple[Path, str]] = list(skipped or [])
        self.header_table_count: Dict[str, int] = {}
        for t in self.tables.values():
            for h in t.normalized_headers():
                self.header_table_count[h] = self.header_table_count.get(h, 0) + 1
        self._token_df: Optional[Dict[str, int]] = None

    @property
    def n_tables(self) -> int:
        return len(self.tables)

    def distinct_headers(self) -> List[str]:
        """Distinct normalized header names, sorted."""
        return sorted(self.header_table_count)

    @property
    def header_token_df(self) -> Dict[str, int]:
        """token -> number of distinct header names containing it."""
        if self._token_df is None:
            df: Dict[str, int] = {}
            for name in self.header_table_count:
                for tok in set(tokenize(name)):
                    df[tok] = df.get(tok, 0) + 1
            self._token_df = df
        return self._token_df

    def row_count(self, table_id: str) -> int:
        """Number of data records (header excluded); computed once per table."""
        meta = self.tables[table_id]
        if meta.row_count is None:
            with open(meta.path, "r", encoding="utf-8-sig", errors="replace", newline="") as fh:
                n = sum(1 for _ in csv.reader(fh))
            meta.row_count = max(0, n - 1)
        return meta.row_count


def load_corpus(root: Path) -> Corpus:
    """Walk ``root`` recursively and load every ``*.csv`` header.

    Files whose header record cannot be read are skipped with a warning and
    listed in ``Corpus.skipped``. Raises EmptyCorpus when nothing loads.
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptyCorpus(f"corpus root is not a directory: {root}")
    tables: List[TableMeta] = []
    skipped: List[Tuple[Path, str]] = []
    for path in sorted(root.rglob("*.csv")):
        if not path.is_file():
            continue
        table_id = path.relative_to(root).with_suffix("").as_posix()
        try:
            headers = _read_header_record(path)
        except Exception as exc:  # noqa: BLE001 - any parse failure skips the file
            log.warning("skipping %s: %s", path, exc)
            skipped.append((path, str(exc)))
            continue
        if not headers:
            log.warning("skipping %s: empty header record", path)
            skipped.append((path, "empty header record"))
            continue
        tables.append(TableMeta(id=table_id, path=path, headers=tuple(headers)))
    if not tables:
        raise EmptyCorpus(f"no readable csv tables under {root}")
    return Corpus(tables, skipped)


def _read_header_record(path: Path) -> List[str]:
    with open(path, "r", encoding="utf-8-sig", errors="replace", newline="") as fh:
        reader = csv.reader(fh)
        record = next(reader, None)
    if record is None:
        raise ValueError("file has no records")
    return record


@dataclass(frozen=True)
class ScanOptions:
    """Controls for the grep-style value scan."""

    case_sensitive: bool = False
    whole_cell: bool = False


def scan_for_value(corpus: Corpus, value: str, opts: ScanOptions = ScanOptions()) -> Set[str]:
    """Ids of tables whose body contains ``value``.

    Default mode is a raw substring search over the file past the first
    line, so no CSV parsing happens on the hot path and no index is built.
    ``whole_cell`` switches to parsed records with exact cell equality.
    """
    if not value.strip():
        raise ValueError("scan value must be non-empty")
    hits: Set[str] = set()
    for table_id, meta in corpus.tables.items():
        try:
            if opts.whole_cell:
                found = _scan_cells(meta.path, value, opts.case_sensitive)
            else:
                found = _scan_lines(meta.path, value, opts.case_sensitive)
        except OSError as exc:
            log.warning("value scan could not read %s: %s", meta.path, exc)
            continue
        if found:
            hits.add(table_id)
    return hits


def _scan_lines(path: Path, value: str, case_sensitive: bool) -> bool:
    data = path.read_bytes()
    nl = data.find(b"\n")
    body = data[nl + 1:] if nl >= 0 else b""
    needle = value.encode("utf-8")
    if not case_sensitive:
        body = body.lower()
        needle = needle.lower()
    return needle in body


def _scan_cells(path: Path, value: str, case_sensitive: bool) -> bool:
    target = value if case_sensitive else value.casefold()
    with open(path, "r", encoding="utf-8-sig", errors="replace", newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for record in reader:
            for cell in record:
                probe = cell if case_sensitive else cell.casefold()
                if probe == target:
                    return True
    return False


class JoinGraph:
    """Undirected join graph over corpus tables.

    Nodes are always the full corpus id set; edges may carry an optional
    (column, column) key pair. Self-loops and edges naming unknown tables
    are dropped at load time.
    """

    def __init__(self, nodes: Iterable[str]):
        self.nodes: Set[str] = set(nodes)
        self._adj: Dict[str, Set[str]] = {n: set() for n in self.nodes}
        self.edge_keys: Dict[Tuple[str, str], Optional[Tuple[str, str]]] = {}

    def add_edge(self, a: str, b: str, key: Optional[Tuple[str, str]] = None) -> None:
        if a not in self.nodes or b not in self.nodes or a == b:
            raise ValueError(f"invalid edge ({a!r}, {b!r})")
        if a > b:
            a, b = b, a
            key = (key[1], key[0]) if key else None
        self._adj[a].add(b)
        self._adj[b].add(a)
        self.edge_keys[(a, b)] = key

    @property
    def n_edges(self) -> int:
        return len(self.edge_keys)

    def neighbors(self, node: str) -> Set[str]:
        return self._adj.get(node, set())

    def has_edge(self, a: str, b: str) -> bool:
        return (min(a, b), max(a, b)) in self.edge_keys

    def is_connected(self, subset: Iterable[str]) -> bool:
        """True when ``subset`` induces a connected subgraph (singletons count)."""
        members = set(subset)
        if not members:
            return False
        start = next(iter(members))
        seen = {start}
        frontier = [start]
        while frontier:
            cur = frontier.pop()
            for nxt in self._adj.get(cur, ()):
                if nxt in members and nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen == members


def load_join_graph(path: Path, corpus: Corpus) -> JoinGraph:
    """Read a JSON edge list ``{"edges": [[a, b], [a, b, [c1, c2]], ...]}``."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedGraph(f"cannot read join graph {path}: {exc}") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("edges"), list):
        raise MalformedGraph(f"join graph {path} must be an object with an 'edges' list")
    graph = JoinGraph(corpus.tables)
    for i, edge in enumerate(payload["edges"]):
        if not isinstance(edge, list) or len(edge) not in (2, 3) or not all(isinstance(e, str) for e in edge[:2]):
            raise MalformedGraph(f"edge #{i} has invalid shape: {edge!r}")
        a, b = edge[0], edge[1]
        key: Optional[Tuple[str, str]] = None
        if len(edge) == 3:
            k = edge[2]
            if not isinstance(k, list) or len(k) != 2 or not all(isinstance(c, str) for c in k):
                raise MalformedGraph(f"edge #{i} key pair has invalid shape: {k!r}")
            key = (k[0], k[1])
        if a == b:
            log.warning("dropping self-loop edge on %r", a)
            continue
        if a not in graph.nodes or b not in graph.nodes:
            log.warning("dropping edge (%r, %r): unknown table", a, b)
            continue
        graph.add_edge(a, b, key)
    return graph

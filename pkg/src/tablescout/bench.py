"""Benchmark construction and evaluation metrics.

Retrieval quality is macro-averaged precision/recall/F1 over questions;
the join setting adds group Hit@K; answering quality compares multisets
of (table, row) pairs against executed ground truth. Benchmark builders
turn SQL clause metadata (independent setting) or PK-FK metadata plus
questions (join setting) into BenchRecord JSONL.
"""

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .corpus import Corpus
from .errors import EngineError, MissingQuestion
from .sqlrun import SqlEngine

log = logging.getLogger(__name__)

HIT_K_GRID = (1, 5, 10, 20)
NULL_TOKEN = "<NULL>"


@dataclass
class BenchRecord:
    qid: str
    question: str
    truth_tables: Set[str]
    truth_cells: Optional[Dict[str, List[List[str]]]] = None
    truth_group: Optional[Set[str]] = None

    def to_json_obj(self) -> dict:
        obj = {"qid": self.qid, "question": self.question, "truth_tables": sorted(self.truth_tables)}
        if self.truth_cells is not None:
            obj["truth_cells"] = {t: self.truth_cells[t] for t in sorted(self.truth_cells)}
        if self.truth_group is not None:
            obj["truth_group"] = sorted(self.truth_group)
        return obj

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "BenchRecord":
        cells = obj.get("truth_cells")
        return cls(
            qid=str(obj["qid"]),
            question=str(obj["question"]),
            truth_tables=set(obj.get("truth_tables", ())),
            truth_cells={t: [list(r) for r in rows] for t, rows in cells.items()} if cells is not None else None,
            truth_group=set(obj["truth_group"]) if obj.get("truth_group") is not None else None,
        )


def write_records(records: Iterable[BenchRecord], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_obj(), ensure_ascii=False) + "\n")


def read_records(path: Path) -> List[BenchRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(BenchRecord.from_json_obj(json.loads(line)))
    return records


@dataclass(frozen=True)
class PRF:
    p: float
    r: float
    f1: float


@dataclass
class EvalReport:
    per_question: Dict[str, PRF]
    macro_p: float
    macro_r: float
    macro_f1: float
    hit_at_k: Optional[Dict[int, float]] = None
    n_questions: int = 0

    def as_dict(self) -> dict:
        obj = {
            "n_questions": self.n_questions,
            "macro_p": self.macro_p,
            "macro_r": self.macro_r,
            "macro_f1": self.macro_f1,
            "per_question": {q: {"p": m.p, "r": m.r, "f1": m.f1} for q, m in sorted(self.per_question.items())},
        }
        if self.hit_at_k is not None:
            obj["hit_at_k"] = {str(k): v for k, v in sorted(self.hit_at_k.items())}
        return obj


def _prf(n_common: int, n_retrieved: int, n_truth: int) -> PRF:
    p = n_common / n_retrieved if n_retrieved else 0.0
    r = n_common / n_truth if n_truth else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return PRF(p, r, f1)


def _report(per_question: Dict[str, PRF]) -> EvalReport:
    n = len(per_question)
    if n == 0:
        return EvalReport({}, 0.0, 0.0, 0.0, n_questions=0)
    return EvalReport(
        per_question=per_question,
        macro_p=sum(m.p for m in per_question.values()) / n,
        macro_r=sum(m.r for m in per_question.values()) / n,
        macro_f1=sum(m.f1 for m in per_question.values()) / n,
        n_questions=n,
    )


def macro_prf(retrieved: Mapping[str, Set[str]], truth: Mapping[str, Set[str]]) -> EvalReport:
    """Unweighted per-question table-set precision/recall/F1."""
    if set(retrieved) != set(truth):
        missing = set(truth) ^ set(retrieved)
        raise MissingQuestion(f"question ids differ between predictions and truth: {sorted(missing)[:5]}")
    per_question = {}
    for qid in truth:
        r, g = set(retrieved[qid]), set(truth[qid])
        per_question[qid] = _prf(len(r & g), len(r), len(g))
    return _report(per_question)


def hit_at_k_group(ranked_groups: Mapping[str, Sequence[Set[str]]],
                   truth_group: Mapping[str, Set[str]], k: int) -> float:
    """Fraction of questions whose truth set is inside a top-k group."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not truth_group:
        return 0.0
    hits = 0
    for qid, truth in truth_group.items():
        groups = ranked_groups.get(qid, [])
        if any(set(truth) <= set(g) for g in list(groups)[:k]):
            hits += 1
    return hits / len(truth_group)


def canonical_cell(value) -> str:
    """Stable text form for cell comparison across engines and JSON."""
    if value is None:
        return NULL_TOKEN
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".6g")
    if isinstance(value, str):
        return value.strip()
    return str(value)


def canonical_row(row: Sequence) -> Tuple[str, ...]:
    return tuple(canonical_cell(v) for v in row)


def cell_prf(answers: Mapping[str, Sequence[Tuple[str, Sequence]]],
             truth_cells: Mapping[str, Mapping[str, Sequence[Sequence]]]) -> EvalReport:
    """Multiset comparison of (table, normalized row) pairs per question.

    ``answers`` maps qid to (table, row) pairs; ``truth_cells`` maps qid
    to per-table row lists. Aggregates can return duplicate tuples, so
    counts matter.
    """
    per_question = {}
    for qid, truth in truth_cells.items():
        got = Counter((t, canonical_row(row)) for t, row in answers.get(qid, []))
        want = Counter(
            (t, canonical_row(row)) for t, rows in truth.items() for row in rows
        )
        common = sum((got & want).values())
        per_question[qid] = _prf(common, sum(got.values()), sum(want.values()))
    return _report(per_question)


_EQ_TO_ILIKE_RE = re.compile(r'("[^"]+"|[A-Za-z_][\w.]*)\s*=\s*(\'[^\']*\')')


def rewrite_equality_to_ilike(clause: str) -> str:
    """String-equality predicates become case-insensitive ILIKE matches.

    The left side is cast to text so the rewrite also works on columns
    the CSV reader typed as numbers.
    """
    return _EQ_TO_ILIKE_RE.sub(lambda m: f"CAST({m.group(1)} AS VARCHAR) ILIKE {m.group(2)}", clause)


def assemble_sql(sql_meta: Mapping[str, object], table_id: str) -> str:
    """Build one executable statement from clause metadata."""
    select = str(sql_meta.get("select") or "*")
    parts = [f"SELECT {select}", f'FROM "{table_id}"']
    where = sql_meta.get("where")
    if where:
        parts.append("WHERE " + rewrite_equality_to_ilike(str(where)))
    group_by = sql_meta.get("group_by")
    if group_by:
        parts.append("GROUP BY " + str(group_by))
    having = sql_meta.get("having")
    if having:
        parts.append("HAVING " + rewrite_equality_to_ilike(str(having)))
    order_by = sql_meta.get("order_by")
    if order_by:
        parts.append("ORDER BY " + str(order_by))
    limit = sql_meta.get("limit")
    if limit is not None:
        parts.append(f"LIMIT {int(limit)}")
    return " ".join(parts)


def build_independent_benchmark(records: Iterable[Mapping], corpus: Corpus,
                                engine: SqlEngine) -> List[BenchRecord]:
    """Execute each record's SQL against every table; keep what matches.

    A record survives when at least one table returns rows; those tables
    become its truth set and their outputs the cell-level ground truth.
    """
    out: List[BenchRecord] = []
    for rec in records:
        qid = str(rec["qid"])
        question = str(rec["question"])
        sql_meta = rec.get("sql_meta") or {}
        cells: Dict[str, List[List[str]]] = {}
        for table_id, meta in corpus.tables.items():
            sql = assemble_sql(sql_meta, table_id)
            try:
                rows = engine.run(sql, table_id, meta.path)
            except EngineError as exc:
                log.debug("bench record %s does not run on %s: %s", qid, table_id, exc)
                continue
            if rows:
                cells[table_id] = [list(canonical_row(r)) for r in rows]
        if not cells:
            log.warning("dropping bench record %s: no table yields a non-empty result", qid)
            continue
        out.append(BenchRecord(
            qid=qid,
            question=question,
            truth_tables=set(cells),
            truth_cells=cells,
        ))
    return out


_SQL_TABLE_REF_RE = re.compile(r'\b(?:FROM|JOIN)\s+("[^"]+"|[A-Za-z_][\w.]*)', re.IGNORECASE)
_JOIN_RE = re.compile(r"\bJOIN\b", re.IGNORECASE)
_WS_RE = re.compile(r"\s+")


def _referenced_tables(sql: str) -> List[str]:
    refs = []
    for m in _SQL_TABLE_REF_RE.finditer(sql):
        name = m.group(1).strip('"')
        if name and name not in refs:
            refs.append(name)
    return refs


def build_join_benchmark(databases: Iterable[Mapping],
                         questions: Iterable[Mapping]) -> Tuple[List[BenchRecord], Dict[str, dict]]:
    """Join-setting records plus one join-graph payload per database.

    Keeps questions whose SQL actually joins, deduplicates identical SQL,
    and drops any question touching a table of join-graph degree < 2.
    Table ids are namespaced as ``db_id/table`` to match a corpus laid
    out one directory per database.
    """
    db_tables: Dict[str, Dict[str, str]] = {}
    degree: Dict[str, Dict[str, Set[str]]] = {}
    graphs: Dict[str, dict] = {}
    for db in databases:
        db_id = str(db["db_id"])
        tables = [str(t) for t in db.get("tables", ())]
        db_tables[db_id] = {t.casefold(): t for t in tables}
        adj: Dict[str, Set[str]] = {t: set() for t in tables}
        edges = []
        for fk in db.get("foreign_keys", ()):
            t1, c1, t2, c2 = (str(x) for x in fk)
            if t1 not in adj or t2 not in adj or t1 == t2:
                log.warning("db %s: skipping foreign key %r", db_id, fk)
                continue
            adj[t1].add(t2)
            adj[t2].add(t1)
            edges.append([f"{db_id}/{t1}", f"{db_id}/{t2}", [c1, c2]])
        degree[db_id] = adj
        graphs[db_id] = {"edges": edges}
    out: List[BenchRecord] = []
    seen_sql: Set[Tuple[str, str]] = set()
    for q in questions:
        qid = str(q["qid"])
        db_id = str(q["db_id"])
        sql = str(q["sql"])
        if db_id not in db_tables:
            log.warning("dropping %s: unknown database %r", qid, db_id)
            continue
        if not _JOIN_RE.search(sql):
            log.info("dropping %s: no JOIN in sql", qid)
            continue
        fingerprint = (db_id, _WS_RE.sub(" ", sql).strip().rstrip(";"))
        if fingerprint in seen_sql:
            log.info("dropping %s: duplicate sql", qid)
            continue
        seen_sql.add(fingerprint)
        refs = _referenced_tables(sql)
        resolved = []
        unknown = [r for r in refs if r.casefold() not in db_tables[db_id]]
        for r in refs:
            t = db_tables[db_id].get(r.casefold())
            if t and t not in resolved:
                resolved.append(t)
        if not resolved or unknown:
            log.warning("dropping %s: unresolvable table references %r", qid, unknown or refs)
            continue
        if any(len(degree[db_id][t]) < 2 for t in resolved):
            log.info("dropping %s: involved table has degree < 2", qid)
            continue
        group = {f"{db_id}/{t}" for t in resolved}
        out.append(BenchRecord(
            qid=qid,
            question=str(q["question"]),
            truth_tables=set(group),
            truth_group=group,
        ))
    return out, graphs

"""Cell-level answering: cluster, judge, generate once per cluster, execute.

Tables whose screened column sets are identical form a cluster and share
one generated SQL statement; the statement is re-targeted per member by
swapping only the table identifier. A cluster-level refusal falls back
to per-table prompting with the table's full column list. Generation is
always gated by an answerability judge so irrelevant tables get refused
cheaply instead of producing hallucinated queries.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .corpus import Corpus, TableMeta
from .errors import EngineError, LlmFailure
from .llm import ChatBackend
from .parsing import ParsedQuestion
from .prompts import judge_prompt, sql_prompt
from .retrieval import ScoredTable
from .sqlrun import SqlEngine, normalized_columns

log = logging.getLogger(__name__)


@dataclass
class Cluster:
    """Tables sharing one screened column signature.

    ``shared_cols`` is absent for tables retrieved on value evidence
    alone; those are answered per table with their full schema.
    """

    tables: List[str]
    shared_cols: Optional[List[str]] = None


@dataclass
class AnswerEntry:
    table_id: str
    sql: str
    rows: List[Tuple]


@dataclass
class QaStats:
    clusters: int = 0
    judge_calls: int = 0
    cluster_sql_calls: int = 0
    fallback_sql_calls: int = 0
    failures: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def sql_calls(self) -> int:
        return self.cluster_sql_calls + self.fallback_sql_calls


@dataclass
class AnswerSet:
    entries: List[AnswerEntry] = field(default_factory=list)
    stats: QaStats = field(default_factory=QaStats)


def cluster_by_signature(scored: Sequence[ScoredTable]) -> List[Cluster]:
    """Partition retrieved tables by their matched-header set.

    Clusters appear in order of first appearance in the ranking; members
    are sorted by id so the representative (first member) is stable.
    """
    order: List[frozenset] = []
    groups: Dict[frozenset, List[str]] = {}
    loners: List[str] = []
    for st in scored:
        signature = frozenset(h.header for h in st.hits)
        if not signature:
            loners.append(st.table_id)
            continue
        if signature not in groups:
            groups[signature] = []
            order.append(signature)
        groups[signature].append(st.table_id)
    clusters = [Cluster(tables=sorted(groups[sig]), shared_cols=sorted(sig)) for sig in order]
    clusters.extend(Cluster(tables=[t], shared_cols=None) for t in loners)
    return clusters


def _first_alpha_token(text: str) -> str:
    m = re.search(r"[A-Za-z]+", text)
    return m.group(0) if m else ""


def judge_answerable(question: str, table_name: str, columns: Sequence[str], llm: ChatBackend) -> bool:
    """Ask whether the table can answer the question; failure means no."""
    if not columns:
        raise ValueError("judge needs a non-empty column list")
    try:
        response = llm.complete(judge_prompt(question, table_name, columns))
    except LlmFailure as exc:
        log.warning("judge call failed for %s: %s", table_name, exc)
        return False
    return _first_alpha_token(response).casefold() == "yes"


_FENCE_LINE_RE = re.compile(r"^\s*```")


def generate_sql(question: str, table_name: str, columns: Sequence[str], llm: ChatBackend) -> Optional[str]:
    """One SQL statement for the table, or None on refusal.

    The statement must survive identifier validation against exactly the
    provided columns and table name before anyone executes it.
    """
    try:
        response = llm.complete(sql_prompt(question, table_name, columns))
    except LlmFailure as exc:
        log.warning("sql generation failed for %s: %s", table_name, exc)
        return None
    candidate = ""
    for line in response.split("\n"):
        if line.strip() and not _FENCE_LINE_RE.match(line):
            candidate = line.strip()
            break
    if not candidate or candidate.casefold() in ("none", "null"):
        return None
    if not validate_sql(candidate, table_name, columns):
        log.warning("generated sql failed validation for %s: %r", table_name, candidate)
        return None
    return candidate


_SQL_KEYWORDS = {
    "select", "from", "where", "group", "by", "having", "order", "limit", "offset",
    "and", "or", "not", "as", "asc", "desc", "distinct", "all", "between", "in",
    "is", "null", "true", "false", "like", "ilike", "case", "when", "then", "else",
    "end", "cast", "varchar", "integer", "bigint", "double", "float", "boolean",
    "date", "text", "count", "sum", "avg", "min", "max", "abs", "round", "floor",
    "ceil", "coalesce", "nullif", "lower", "upper", "trim", "length", "substr",
    "substring", "replace", "concat", "union",
}
_BARE_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def validate_sql(sql: str, table_name: str, columns: Sequence[str]) -> bool:
    """Single statement whose identifiers all come from the allowlist."""
    body = sql.strip().rstrip(";")
    if ";" in body:
        return False
    allowed: Set[str] = set(_SQL_KEYWORDS)
    allowed.add(table_name.casefold())
    for col in columns:
        allowed.add(col.casefold())
        allowed.update(_BARE_WORD_RE.findall(col.casefold()))
    masked = re.sub(r"'[^']*'", " ", body)
    for quoted in re.findall(r'"([^"]*)"', masked):
        if quoted.casefold() not in allowed:
            return False
    masked = re.sub(r'"[^"]*"', " ", masked)
    return all(word.casefold() in allowed for word in _BARE_WORD_RE.findall(masked))


def _quote_ident(name: str) -> str:
    return '"' + name + '"'


def replace_table_name(sql: str, old: str, new: str) -> str:
    """Swap only the table identifier; every other byte stays put."""
    quoted_new = _quote_ident(new)
    out = sql.replace(_quote_ident(old), quoted_new)
    bare = re.compile(r'(?<![\w"])' + re.escape(old) + r'(?![\w"])')
    return bare.sub(lambda _: quoted_new, out)


def execute_sql(sql: str, table: TableMeta, engine: SqlEngine) -> List[Tuple]:
    """Run after checking the statement actually targets this table."""
    if _quote_ident(table.id) not in sql and not re.search(
            r'(?<![\w"])' + re.escape(table.id) + r'(?![\w"])', sql):
        raise EngineError(f"sql does not reference table {table.id!r}")
    return engine.run(sql, table.id, table.path)


def answer_question(parsed: ParsedQuestion, clusters: Sequence[Cluster], corpus: Corpus,
                    engine: SqlEngine, llm: ChatBackend, combined: bool = False) -> AnswerSet:
    """Answer one question over its retrieved clusters.

    Cluster path: judge on the representative with the shared columns,
    generate once, execute on every member; valid results (empty ones
    included) are kept. Refusal at any step falls back to per-table
    prompting where only non-empty results are kept. ``combined`` skips
    the separate judge call and lets generation refuse on its own.
    """
    question = parsed.question
    result = AnswerSet(stats=QaStats(clusters=len(clusters)))
    for cluster in clusters:
        if cluster.shared_cols and _cluster_path(question, cluster, corpus, engine, llm, combined, result):
            continue
        _fallback_path(question, cluster, corpus, engine, llm, combined, result)
    return result


def _judged_yes(question: str, table: str, columns: Sequence[str], llm: ChatBackend,
                combined: bool, stats: QaStats) -> bool:
    if combined:
        return True
    stats.judge_calls += 1
    return judge_answerable(question, table, columns, llm)


def _cluster_path(question: str, cluster: Cluster, corpus: Corpus, engine: SqlEngine,
                  llm: ChatBackend, combined: bool, result: AnswerSet) -> bool:
    rep = cluster.tables[0]
    if not _judged_yes(question, rep, cluster.shared_cols, llm, combined, result.stats):
        return False
    result.stats.cluster_sql_calls += 1
    sql = generate_sql(question, rep, cluster.shared_cols, llm)
    if sql is None:
        return False
    for table_id in cluster.tables:
        meta = corpus.tables.get(table_id)
        if meta is None:
            result.stats.failures.append((table_id, "table not in corpus"))
            continue
        member_sql = replace_table_name(sql, rep, table_id)
        try:
            rows = execute_sql(member_sql, meta, engine)
        except EngineError as exc:
            result.stats.failures.append((table_id, str(exc)))
            continue
        result.entries.append(AnswerEntry(table_id, member_sql, rows))
    return True


def _fallback_path(question: str, cluster: Cluster, corpus: Corpus, engine: SqlEngine,
                   llm: ChatBackend, combined: bool, result: AnswerSet) -> None:
    for table_id in cluster.tables:
        meta = corpus.tables.get(table_id)
        if meta is None:
            result.stats.failures.append((table_id, "table not in corpus"))
            continue
        columns = normalized_columns(meta.headers)
        if not _judged_yes(question, table_id, columns, llm, combined, result.stats):
            continue
        result.stats.fallback_sql_calls += 1
        sql = generate_sql(question, table_id, columns, llm)
        if sql is None:
            continue
        try:
            rows = execute_sql(sql, meta, engine)
        except EngineError as exc:
            result.stats.failures.append((table_id, str(exc)))
            continue
        if rows:
            result.entries.append(AnswerEntry(table_id, sql, rows))


_PROMPT_QUESTION_RE = re.compile(r"Question:\n(.*?)\n\nTable:", re.DOTALL)
_PROMPT_TABLE_RE = re.compile(r"Table Name:\n    (.*?)\n")
_PROMPT_COLUMNS_RE = re.compile(r"Columns:\n    (.*?)\n\n", re.DOTALL)
_QUOTED_SPAN_RE = re.compile(r"'([^']*)'|\"([^\"]*)\"")
_NUM_SPAN_RE = re.compile(r"(?<![\w.])\d+(?:\.\d+)?(?![\w.])")


class OfflineQaChat:
    """Deterministic chat stand-in for network-free answering.

    Judge prompts get yes when any column token appears in the question;
    SQL prompts get a filter over all columns for each literal found in
    the question. Meant for tests and demos, not answer quality.
    """

    id = "offline-qa-v1"

    def complete(self, prompt: str) -> str:
        question = _search_or_empty(_PROMPT_QUESTION_RE, prompt)
        table = _search_or_empty(_PROMPT_TABLE_RE, prompt)
        columns = [c.strip() for c in _search_or_empty(_PROMPT_COLUMNS_RE, prompt).split(",") if c.strip()]
        if prompt.rstrip().endswith("Answer only 'yes' or 'no'."):
            return self._judge(question, columns)
        return self._sql(question, table, columns)

    def _judge(self, question: str, columns: Sequence[str]) -> str:
        question_tokens = set(re.findall(r"[a-z0-9]+", question.casefold()))
        for col in columns:
            col_tokens = set(re.findall(r"[a-z0-9]+", col.casefold()))
            if col_tokens and col_tokens <= question_tokens:
                return "yes"
        return "no"

    def _sql(self, question: str, table: str, columns: Sequence[str]) -> str:
        literals: List[str] = []
        masked = question
        for m in _QUOTED_SPAN_RE.finditer(question):
            content = (m.group(1) if m.group(1) is not None else m.group(2)).strip()
            if content and "'" not in content:
                literals.append(content)
            masked = masked.replace(m.group(0), " " * len(m.group(0)), 1)
        literals.extend(m.group(0) for m in _NUM_SPAN_RE.finditer(masked))
        target = _quote_ident(table)
        if not literals or not columns:
            return f"SELECT count(*) FROM {target}"
        conjuncts = []
        for lit in literals:
            pattern = "%" + lit.replace("%", "") + "%"
            ors = " OR ".join(
                f"CAST({_quote_ident(c)} AS VARCHAR) ILIKE '{pattern}'" for c in columns
            )
            conjuncts.append(f"({ors})")
        return f"SELECT * FROM {target} WHERE " + " AND ".join(conjuncts)


def _search_or_empty(rx: re.Pattern, text: str) -> str:
    m = rx.search(text)
    return (m.group(1) or "").strip() if m else ""

"""Column-side and value-side retrieval with rank fusion.

Per column mention, headers are matched lexically (shared informative
token, fixed score 1.0) and semantically (top-k cosine above eta); each
table keeps its single best-matching header per mention, weighted by how
rare the header is across tables. Value mentions are scanned verbatim in
table bodies and weighted the same way. The final score couples both
sides, with the value side amplified by the mention count.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Set

import numpy as np

from .corpus import Corpus, ScanOptions, normalize_header, scan_for_value, tokenize
from .encoders import Encoder
from .errors import UnknownHeader
from .headerindex import HeaderIndex, top_k_names
from .parsing import ParsedQuestion

log = logging.getLogger(__name__)

LEXICAL = "lexical"
SEMANTIC = "semantic"


@dataclass(frozen=True)
class MatchHit:
    score: float
    provenance: str  # LEXICAL | SEMANTIC


@dataclass
class MatchSet:
    """Matched header names for one column mention."""

    mention_index: int
    hits: Dict[str, MatchHit] = field(default_factory=dict)


@dataclass(frozen=True)
class ColumnHit:
    """Best-matching header of one table for one mention."""

    mention_index: int
    table_id: str
    header: str
    score: float


@dataclass
class ScoredTable:
    table_id: str
    s_col: float
    s_val: float
    s_total: float
    hits: List[ColumnHit] = field(default_factory=list)
    matched_values: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 5
    eta: float = 0.7
    tau: float = 0.6
    scan: ScanOptions = ScanOptions()

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must be in [0, 1]")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must be in [0, 1]")


@dataclass
class RetrievalContext:
    corpus: Corpus
    index: HeaderIndex
    encoder: Encoder
    config: RetrievalConfig = RetrievalConfig()


def lexical_match(mention: str, corpus: Corpus, mention_index: int = 0) -> MatchSet:
    """Headers sharing at least one informative token with the mention.

    A token carried by every distinct header name separates nothing and is
    ignored, which is exactly when a BM25 score would degenerate to zero.
    All hits score a fixed 1.0.
    """
    n_headers = len(corpus.header_table_count)
    df = corpus.header_token_df
    mention_tokens = {t for t in tokenize(mention) if df.get(t, 0) < n_headers and t in df}
    ms = MatchSet(mention_index=mention_index)
    if not mention_tokens:
        return ms
    for name in corpus.header_table_count:
        if mention_tokens.intersection(tokenize(name)):
            ms.hits[name] = MatchHit(1.0, LEXICAL)
    return ms


def semantic_match(mention_vec: np.ndarray, index: HeaderIndex, k: int, eta: float,
                   mention_index: int = 0) -> MatchSet:
    """Top-k distinct header names by cosine, pruned below eta."""
    ms = MatchSet(mention_index=mention_index)
    for name, score in top_k_names(index, mention_vec, k):
        if score >= eta:
            ms.hits[name] = MatchHit(score, SEMANTIC)
    return ms


def merge_matches(lex: MatchSet, sem: MatchSet) -> MatchSet:
    """Union of both branches, keeping the max score per name."""
    merged = MatchSet(mention_index=lex.mention_index, hits=dict(lex.hits))
    for name, hit in sem.hits.items():
        prior = merged.hits.get(name)
        if prior is None or hit.score > prior.score:
            merged.hits[name] = hit
    return merged


def best_hits(match_set: MatchSet, corpus: Corpus) -> List[ColumnHit]:
    """At most one hit per table: highest score, ties to the smaller name."""
    out: List[ColumnHit] = []
    for table_id, meta in corpus.tables.items():
        inter = meta.normalized_headers().intersection(match_set.hits)
        if not inter:
            continue
        best = min(inter, key=lambda h: (-match_set.hits[h].score, h))
        out.append(ColumnHit(match_set.mention_index, table_id, best, match_set.hits[best].score))
    return out


def idf_col(header: str, corpus: Corpus) -> float:
    """ln(N / number of tables carrying the header)."""
    count = corpus.header_table_count.get(normalize_header(header))
    if not count:
        raise UnknownHeader(f"header {header!r} not present in corpus")
    return math.log(corpus.n_tables / count)


def column_score(hits: Sequence[ColumnHit], corpus: Corpus) -> float:
    """Rarity-weighted sum of one table's per-mention best hits."""
    return sum(h.score * idf_col(h.header, corpus) for h in hits)


def value_score(value_tables: Mapping[str, Set[str]], corpus: Corpus) -> Dict[str, float]:
    """Per-table sum of value idfs; values found nowhere are skipped.

    Accumulation runs in sorted-value order so repeated runs produce
    bit-identical floats.
    """
    scores: Dict[str, float] = {}
    for value in sorted(value_tables):
        tables = value_tables[value]
        if not tables:
            continue
        idf = math.log(corpus.n_tables / len(tables))
        for t in tables:
            scores[t] = scores.get(t, 0.0) + idf
    return scores


@dataclass
class Evidence:
    """Everything either ranking mode needs, gathered once per question."""

    match_sets: List[MatchSet]
    hits: List[ColumnHit]
    value_tables: Dict[str, Set[str]]
    value_scores: Dict[str, float]
    n_mentions: int


def gather_evidence(parsed: ParsedQuestion, ctx: RetrievalContext) -> Evidence:
    mentions = parsed.column_mentions
    match_sets: List[MatchSet] = []
    hits: List[ColumnHit] = []
    if mentions:
        vectors = ctx.encoder.encode(mentions)
        for i, mention in enumerate(mentions):
            lex = lexical_match(mention, ctx.corpus, i)
            sem = semantic_match(vectors[i], ctx.index, ctx.config.k, ctx.config.eta, i)
            merged = merge_matches(lex, sem)
            match_sets.append(merged)
            hits.extend(best_hits(merged, ctx.corpus))
    value_tables = {
        v: scan_for_value(ctx.corpus, v, ctx.config.scan)
        for v in sorted(parsed.value_mentions)
    }
    return Evidence(
        match_sets=match_sets,
        hits=hits,
        value_tables=value_tables,
        value_scores=value_score(value_tables, ctx.corpus),
        n_mentions=len(mentions),
    )


def retrieve(parsed: ParsedQuestion, ctx: RetrievalContext) -> List[ScoredTable]:
    """Rank candidate tables by fused schema and value evidence.

    Candidates are tables with positive evidence on either side; a hit
    whose header sits in every table carries idf 0 and on its own does
    not qualify. Ranking is descending by total score, ties by table id.
    """
    ev = gather_evidence(parsed, ctx)
    return rank_tables(ev, ctx.corpus)


def rank_tables(ev: Evidence, corpus: Corpus) -> List[ScoredTable]:
    hits_by_table: Dict[str, List[ColumnHit]] = {}
    for hit in ev.hits:
        hits_by_table.setdefault(hit.table_id, []).append(hit)
    matched_values: Dict[str, List[str]] = {}
    for value in sorted(ev.value_tables):
        for t in ev.value_tables[value]:
            matched_values.setdefault(t, []).append(value)
    candidates = set(hits_by_table) | set(matched_values)
    scored: List[ScoredTable] = []
    for table_id in candidates:
        table_hits = sorted(hits_by_table.get(table_id, []), key=lambda h: h.mention_index)
        s_col = column_score(table_hits, corpus)
        s_val = ev.value_scores.get(table_id, 0.0)
        if s_col <= 0.0 and s_val <= 0.0:
            continue
        scored.append(ScoredTable(
            table_id=table_id,
            s_col=s_col,
            s_val=s_val,
            s_total=s_col + ev.n_mentions * s_val,
            hits=table_hits,
            matched_values=matched_values.get(table_id, []),
        ))
    scored.sort(key=lambda st: (-st.s_total, st.table_id))
    return scored


def select_by_threshold(ranked: Sequence[ScoredTable], tau: float) -> List[ScoredTable]:
    """Keep tables whose per-query min-max-scaled score reaches tau.

    With all scores equal (singletons included) everything scales to 1.0
    and is kept. Input order is preserved.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    if not ranked:
        return []
    scores = [st.s_total for st in ranked]
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return list(ranked)
    return [st for st in ranked if (st.s_total - lo) / (hi - lo) >= tau]

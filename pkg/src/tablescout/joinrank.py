"""Ranking of connected table groups for the join setting.

Candidate groups are connected subgraphs of the join graph seeded at
tables with any evidence; each group scores by giving every mention its
best supporting member and the value side its best member, so a group is
as good as the strongest table it contains for each signal.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence, Set

from .corpus import Corpus, JoinGraph
from .errors import GroupExplosion
from .retrieval import ColumnHit, idf_col

log = logging.getLogger(__name__)

DEFAULT_MAX_GROUP_SIZE = 4
DEFAULT_ENUMERATION_CAP = 1_000_000


@dataclass
class ScoredGroup:
    tables: FrozenSet[str]
    score: float
    per_mention_support: Dict[int, str] = field(default_factory=dict)


def enumerate_candidate_groups(graph: JoinGraph, hit_tables: Set[str],
                               max_size: int = DEFAULT_MAX_GROUP_SIZE,
                               cap: int = DEFAULT_ENUMERATION_CAP) -> List[FrozenSet[str]]:
    """All connected subgraphs up to ``max_size`` containing a hit table.

    Seed singletons at hit tables and grow by one neighbor at a time;
    every connected superset of a seed is reachable this way. Enumeration
    past ``cap`` groups aborts with GroupExplosion.
    """
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    seeds = sorted(set(hit_tables) & graph.nodes)
    visited: Set[FrozenSet[str]] = set()
    stack: List[FrozenSet[str]] = [frozenset((s,)) for s in seeds]
    while stack:
        group = stack.pop()
        if group in visited:
            continue
        visited.add(group)
        if len(visited) > cap:
            raise GroupExplosion(cap)
        if len(group) >= max_size:
            continue
        for member in group:
            for neighbor in graph.neighbors(member):
                if neighbor not in group:
                    grown = group | {neighbor}
                    if grown not in visited:
                        stack.append(grown)
    return sorted(visited, key=lambda g: (len(g), tuple(sorted(g))))


def mention_weights(hits: Sequence[ColumnHit], corpus: Corpus) -> Dict[int, Dict[str, float]]:
    """mention index -> table -> hit score times header idf."""
    weights: Dict[int, Dict[str, float]] = {}
    for hit in hits:
        weights.setdefault(hit.mention_index, {})[hit.table_id] = hit.score * idf_col(hit.header, corpus)
    return weights


def score_group(group: Iterable[str], hits: Sequence[ColumnHit],
                value_scores: Mapping[str, float], n_mentions: int,
                corpus: Corpus) -> ScoredGroup:
    """Evaluate one group; see ``rank_groups`` for the batch path."""
    return _score(frozenset(group), mention_weights(hits, corpus), value_scores, n_mentions)


def _score(group: FrozenSet[str], weights: Mapping[int, Mapping[str, float]],
           value_scores: Mapping[str, float], n_mentions: int) -> ScoredGroup:
    if not group:
        raise ValueError("group must be non-empty")
    total = 0.0
    support: Dict[int, str] = {}
    for i in range(n_mentions):
        table_weights = weights.get(i)
        if not table_weights:
            continue
        in_group = [t for t in table_weights if t in group]
        if not in_group:
            continue
        best = min(in_group, key=lambda t: (-table_weights[t], t))
        total += table_weights[best]
        support[i] = best
    value_part = max((value_scores.get(t, 0.0) for t in group), default=0.0)
    total += n_mentions * value_part
    return ScoredGroup(tables=group, score=total, per_mention_support=support)


def rank_groups(groups: Iterable[Iterable[str]], hits: Sequence[ColumnHit],
                value_scores: Mapping[str, float], n_mentions: int,
                corpus: Corpus) -> List[ScoredGroup]:
    """Score, dedupe, and order groups.

    Descending score; at equal score the smaller group wins, then the
    lexicographically smaller id tuple. A table set appears once.
    """
    weights = mention_weights(hits, corpus)
    seen: Set[FrozenSet[str]] = set()
    scored: List[ScoredGroup] = []
    for g in groups:
        fs = frozenset(g)
        if fs in seen:
            continue
        seen.add(fs)
        scored.append(_score(fs, weights, value_scores, n_mentions))
    scored.sort(key=lambda sg: (-sg.score, len(sg.tables), tuple(sorted(sg.tables))))
    return scored

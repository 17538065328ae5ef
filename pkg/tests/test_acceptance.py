"""Acceptance suite: one test, one pass/fail line, per shipping criterion.

Each test prints an ACCEPT line on success; a failure surfaces through
pytest before the line is printed. Criterion 9 exercises a full-scale
external benchmark and only runs when TABLESCOUT_SPIDER_ROOT is set.
"""

import json
import math
import os
import random
import time
from itertools import combinations

import pytest

from tablescout.bench import (HIT_K_GRID, cell_prf, hit_at_k_group, macro_prf,
                              read_records)
from tablescout.config import EngineConfig
from tablescout.corpus import Corpus, JoinGraph, TableMeta
from tablescout.encoders import LocalHashEncoder
from tablescout.engine import Engine, ParseFailure
from tablescout.headerindex import build_header_index, load_index, save_index
from tablescout.joinrank import enumerate_candidate_groups, rank_groups
from tablescout.parsing import ParsedQuestion
from tablescout.qa import OfflineQaChat, answer_question, cluster_by_signature
from tablescout.retrieval import (ColumnHit, RetrievalConfig, RetrievalContext,
                                  ScoredTable, idf_col, retrieve,
                                  select_by_threshold)
from tablescout.sqlrun import PolarsSqlEngine

from conftest import CORPUS12_DIR, QUESTIONS_PATH, TRUTH_PATH, make_corpus
from oracles import (brute_force_group_score, brute_force_rank,
                     connected_subsets, random_corpus_spec, random_question,
                     ref_cell_prf, ref_hit_at_k, ref_macro_prf)


def test_criterion_01_ranking_matches_brute_force(tmp_path):
    """100 random corpora: retrieve() equals the reference ranking exactly."""
    rng = random.Random(8225531)
    encoder = LocalHashEncoder(64)
    start = time.perf_counter()
    for trial in range(100):
        spec = random_corpus_spec(rng, max_tables=20, max_headers=8)
        corpus = make_corpus(tmp_path / f"c{trial:03d}", spec)
        index = build_header_index(corpus, encoder)
        mentions, values = random_question(rng, spec)
        parsed = ParsedQuestion(question="synthetic", column_mentions=mentions,
                                value_mentions=frozenset(values))
        ctx = RetrievalContext(corpus, index, encoder, RetrievalConfig(k=5, eta=0.7))
        got = [(st.table_id, st.s_col, st.s_val, st.s_total)
               for st in retrieve(parsed, ctx)]
        want = brute_force_rank(corpus, index, encoder, mentions, values, k=5, eta=0.7)
        assert got == want, f"trial {trial}: {got} != {want}"
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"100 corpora took {elapsed:.1f}s"
    print(f"ACCEPT criterion 1: 100 random corpora match brute force ({elapsed:.1f}s)")


def test_criterion_02_group_ranking_matches_brute_force():
    """50 random join graphs: group ranking equals the reference, and group
    scores never drop when a group grows."""
    rng = random.Random(47102)
    start = time.perf_counter()
    for trial in range(50):
        n = rng.randint(2, 8)
        nodes = [f"t{i}" for i in range(n)]
        corpus = Corpus([TableMeta(t, None, (f"h{i}",)) for i, t in enumerate(nodes)])
        graph = JoinGraph(nodes)
        edges = []
        for a, b in combinations(nodes, 2):
            if rng.random() < 0.4:
                graph.add_edge(a, b)
                edges.append((a, b))
        seeds = set(rng.sample(nodes, rng.randint(1, n)))
        groups = enumerate_candidate_groups(graph, seeds, max_size=4)
        assert set(groups) == connected_subsets(nodes, edges, seeds, max_size=4), \
            f"trial {trial}: enumeration differs"
        n_mentions = rng.randint(1, 4)
        hits = [
            ColumnHit(m, t, f"h{i}", rng.uniform(0.7, 1.0))
            for m in range(n_mentions)
            for i, t in enumerate(nodes) if rng.random() < 0.5
        ]
        values = {t: rng.uniform(0.0, 2.0) for t in nodes if rng.random() < 0.4}
        ranked = rank_groups(groups, hits, values, n_mentions, corpus)
        want = sorted(
            ((brute_force_group_score(g, hits, values, n_mentions, corpus), g)
             for g in groups),
            key=lambda row: (-row[0], len(row[1]), tuple(sorted(row[1]))))
        assert [(sg.tables, sg.score) for sg in ranked] == \
            [(g, score) for score, g in want], f"trial {trial}: ranking differs"
        score_of = {sg.tables: sg.score for sg in ranked}
        for g1 in groups:
            for g2 in groups:
                if g1 < g2:
                    assert score_of[g1] <= score_of[g2], \
                        f"trial {trial}: {set(g1)} outscores superset {set(g2)}"
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"50 graphs took {elapsed:.1f}s"
    print(f"ACCEPT criterion 2: 50 random join graphs match brute force ({elapsed:.1f}s)")


def test_criterion_03_threshold_affine_invariance():
    """Selection depends only on relative score position, and the anchored
    example keeps exactly the top table."""
    start = time.perf_counter()
    anchored = [ScoredTable("t10", 0.0, 0.0, 10.0), ScoredTable("t05", 0.0, 0.0, 5.0),
                ScoredTable("t00", 0.0, 0.0, 0.0)]
    assert [t.table_id for t in select_by_threshold(anchored, 0.6)] == ["t10"]
    bases = [[7, 3, 1, 0], [10, 5, 0], [4, 4, 4], [9], [6, 2], [8, 7, 6, 5, 4]]
    taus = [0.0, 0.25, 0.5, 0.6, 0.75, 1.0]
    transforms = [(2.0, 5.0), (0.5, -1.0), (4.0, 0.25), (1.0, -3.0)]
    for base in bases:
        ordered = sorted(base, reverse=True)
        plain = [ScoredTable(f"t{i:02d}", 0.0, 0.0, float(s))
                 for i, s in enumerate(ordered)]
        for tau in taus:
            expected = [t.table_id for t in select_by_threshold(plain, tau)]
            for a, b in transforms:
                moved = [ScoredTable(f"t{i:02d}", 0.0, 0.0, a * s + b)
                         for i, s in enumerate(ordered)]
                assert [t.table_id for t in select_by_threshold(moved, tau)] == expected, \
                    f"base {base}, tau {tau}, transform ({a}, {b})"
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print(f"ACCEPT criterion 3: threshold selection is affine invariant ({elapsed:.2f}s)")


def test_criterion_04_idf_closed_form():
    """Header idf equals ln(N / carrier count) to 1e-9, zero included."""
    for n in range(1, 11):
        for count in range(1, n + 1):
            tables = [
                TableMeta(f"t{i:02d}", None,
                          ("shared col",) if i < count else (f"only {i:02d}",))
                for i in range(n)
            ]
            corpus = Corpus(tables)
            got = idf_col("shared col", corpus)
            assert abs(got - math.log(n / count)) <= 1e-9, (n, count)
            if count == n:
                assert got == 0.0, f"idf of a ubiquitous header must be exactly 0, got {got}"
    print("ACCEPT criterion 4: idf matches ln(N/count) within 1e-9, ln(1) == 0")


def test_criterion_05_fixture_macro_f1(tmp_path):
    """The shipped 12-table corpus answers its 10 questions at macro-F1 1.0
    with the offline parser and default thresholds."""
    start = time.perf_counter()
    config = EngineConfig(corpus_root=str(CORPUS12_DIR),
                          index_path=str(tmp_path / "headers.idx"))
    assert (config.tau, config.k, config.eta) == (0.6, 5, 0.7)
    engine = Engine(config)
    engine.build_index()
    questions = [json.loads(line) for line in
                 QUESTIONS_PATH.read_text(encoding="utf-8").splitlines() if line.strip()]
    truth_rows = [json.loads(line) for line in
                  TRUTH_PATH.read_text(encoding="utf-8").splitlines() if line.strip()]
    parsed_list = engine.parse_questions([q["question"] for q in questions])
    predictions = {}
    for q, parsed in zip(questions, parsed_list):
        assert not isinstance(parsed, ParseFailure), f"{q['qid']}: {parsed}"
        _, selected = engine.retrieve_independent(parsed)
        predictions[q["qid"]] = {st.table_id for st in selected}
    truth = {row["qid"]: set(row["truth_tables"]) for row in truth_rows}
    report = macro_prf(predictions, truth)
    elapsed = time.perf_counter() - start
    assert report.macro_f1 == 1.0, report.as_dict()
    assert report.n_questions == 10
    assert elapsed < 5.0, f"fixture run took {elapsed:.1f}s"
    print(f"ACCEPT criterion 5: fixture corpus reaches macro-F1 1.0 ({elapsed:.1f}s)")


class CountingOfflineChat(OfflineQaChat):
    """Counts SQL-generation completions; judge prompts pass through."""

    def __init__(self):
        self.sql_completions = 0

    def complete(self, prompt):
        if not prompt.rstrip().endswith("Answer only 'yes' or 'no'."):
            self.sql_completions += 1
        return super().complete(prompt)


def test_criterion_06_one_generation_per_cluster(tmp_path):
    """10 retrieved tables in 3 signature clusters cost exactly 3 SQL
    generation calls."""
    spec = {}
    for i in range(4):
        spec[f"a{i}"] = (["alpha", "pad"], [["v1", "x"]])
    for i in range(3):
        spec[f"b{i}"] = (["beta", "pad"], [["v1", "y"]])
    for i in range(3):
        spec[f"ab{i}"] = (["alpha", "beta"], [["v1", "v1"]])
    corpus = make_corpus(tmp_path, spec)

    def hit_table(tid, headers):
        hits = [ColumnHit(j, tid, h, 1.0) for j, h in enumerate(headers)]
        return ScoredTable(tid, 1.0, 0.0, 1.0, hits=hits)

    ranking = [hit_table("a0", ["alpha"]), hit_table("b0", ["beta"]),
               hit_table("ab0", ["alpha", "beta"])]
    ranking += [hit_table(f"a{i}", ["alpha"]) for i in range(1, 4)]
    ranking += [hit_table(f"b{i}", ["beta"]) for i in range(1, 3)]
    ranking += [hit_table(f"ab{i}", ["alpha", "beta"]) for i in range(1, 3)]
    clusters = cluster_by_signature(ranking)
    assert [c.tables for c in clusters] == [
        ["a0", "a1", "a2", "a3"], ["b0", "b1", "b2"], ["ab0", "ab1", "ab2"],
    ]
    parsed = ParsedQuestion(question="what is the alpha and beta of 'v1'?",
                            column_mentions=["alpha", "beta"],
                            value_mentions=frozenset({"v1"}))
    chat = CountingOfflineChat()
    out = answer_question(parsed, clusters, corpus, PolarsSqlEngine(), chat)
    assert chat.sql_completions == 3, f"expected 3 generation calls, saw {chat.sql_completions}"
    assert out.stats.cluster_sql_calls == 3
    assert out.stats.fallback_sql_calls == 0
    assert out.stats.judge_calls == 3
    assert len(out.entries) == 10
    print("ACCEPT criterion 6: 3 signature clusters cost exactly 3 SQL generations")


def test_criterion_07_metrics_match_references():
    """Randomized comparison against the short reference implementations,
    plus hit@K monotonicity over the whole K grid."""
    rng = random.Random(991173)
    pool = ["t1", "t2", "t3", "t4", "t5", "t6"]
    for _ in range(30):
        qids = [f"q{i}" for i in range(rng.randint(1, 8))]
        retrieved = {q: set(rng.sample(pool, rng.randint(0, 4))) for q in qids}
        truth = {q: set(rng.sample(pool, rng.randint(1, 4))) for q in qids}
        report = macro_prf(retrieved, truth)
        rows, macro = ref_macro_prf(retrieved, truth)
        for qid, (p, r, f1) in rows.items():
            m = report.per_question[qid]
            assert abs(m.p - p) <= 1e-12 and abs(m.r - r) <= 1e-12 and abs(m.f1 - f1) <= 1e-12
        assert abs(report.macro_p - macro[0]) <= 1e-12
        assert abs(report.macro_r - macro[1]) <= 1e-12
        assert abs(report.macro_f1 - macro[2]) <= 1e-12

        ranked = {q: [set(rng.sample(pool, rng.randint(1, 3)))
                      for _ in range(rng.randint(0, 5))] for q in qids}
        group_truth = {q: set(rng.sample(pool, rng.randint(1, 2))) for q in qids}
        rates = []
        for k in HIT_K_GRID:
            got = hit_at_k_group(ranked, group_truth, k)
            assert got == ref_hit_at_k(ranked, group_truth, k)
            rates.append(got)
        assert rates == sorted(rates), "hit@K must not decrease as K grows"

        cells = [None, True, 1.5, "x", 7, 0.1 + 0.2]
        answers = {q: [(rng.choice(pool), (rng.choice(cells),))
                       for _ in range(rng.randint(0, 4))] for q in qids}
        cell_truth = {q: {t: [[str(rng.choice(["1.5", "x", "7", "true"]))]]
                          for t in rng.sample(pool, rng.randint(1, 2))} for q in qids}
        report = cell_prf(answers, cell_truth)
        for qid, (p, r, f1) in ref_cell_prf(answers, cell_truth).items():
            m = report.per_question[qid]
            assert abs(m.p - p) <= 1e-12 and abs(m.r - r) <= 1e-12 and abs(m.f1 - f1) <= 1e-12
    print("ACCEPT criterion 7: metrics match the reference implementations")


def test_criterion_08_large_index_budget(tmp_path):
    """10,000 distinct headers index in under a minute into under 20MB."""
    tables = [
        TableMeta(f"t{i:04d}", None, tuple(f"col {i:04d} {j}" for j in range(8)))
        for i in range(1250)
    ]
    corpus = Corpus(tables)
    start = time.perf_counter()
    index = build_header_index(corpus, LocalHashEncoder(256))
    path = tmp_path / "large.idx"
    save_index(index, path)
    elapsed = time.perf_counter() - start
    assert len(index) == 10_000
    assert elapsed < 60.0, f"indexing took {elapsed:.1f}s"
    size = path.stat().st_size
    assert size < 20 * 1024 * 1024, f"index file is {size} bytes"
    assert len(load_index(path)) == 10_000
    print(f"ACCEPT criterion 8: 10k headers indexed in {elapsed:.1f}s into {size / 1e6:.1f}MB")


SPIDER_ROOT = os.environ.get("TABLESCOUT_SPIDER_ROOT")


@pytest.mark.skipif(not SPIDER_ROOT, reason="full-scale join benchmark is opt-in: "
                    "set TABLESCOUT_SPIDER_ROOT to a prepared benchmark directory")
def test_criterion_09_full_scale_join_hit1(tmp_path):
    """Join-setting Hit@1 lands within 5 points of the published 56.72.

    Expects a directory prepared with the bench-build command:
      <root>/corpus/<db_id>/<table>.csv   one directory per database
      <root>/bench.jsonl                  records with truth_group
      <root>/graphs/<db_id>.json          one join graph per database
    """
    root = os.path.abspath(SPIDER_ROOT)
    config = EngineConfig(corpus_root=os.path.join(root, "corpus"),
                          index_path=str(tmp_path / "headers.idx"))
    engine = Engine(config)
    engine.build_index()
    records = read_records(os.path.join(root, "bench.jsonl"))
    graphs = {}
    parsed_list = engine.parse_questions([r.question for r in records])
    predicted = {}
    truth = {}
    for rec, parsed in zip(records, parsed_list):
        truth[rec.qid] = set(rec.truth_group or rec.truth_tables)
        if isinstance(parsed, ParseFailure):
            predicted[rec.qid] = []
            continue
        db_id = next(iter(truth[rec.qid])).split("/", 1)[0]
        if db_id not in graphs:
            graphs[db_id] = engine.load_graph(
                os.path.join(root, "graphs", f"{db_id}.json"))
        groups = engine.retrieve_join(parsed, graphs[db_id])
        predicted[rec.qid] = [set(g.tables) for g in groups]
    hit1 = hit_at_k_group(predicted, truth, 1)
    assert 0.5172 <= hit1 <= 0.6172, f"join Hit@1 {hit1:.4f} outside 0.5672 +/- 0.05"
    print(f"ACCEPT criterion 9: full-scale join Hit@1 {hit1:.4f} within tolerance")

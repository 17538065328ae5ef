"""Facade tying the corpus, index, parser, retrieval, and QA together.

One Engine instance owns all lazily built components for one config.
Components are immutable once built, so an Engine can serve concurrent
requests after ``load()``; only index (re)building mutates files.
"""

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from . import bench
from .config import EngineConfig
from .corpus import Corpus, JoinGraph, ScanOptions, load_corpus, load_join_graph
from .encoders import Encoder, LocalHashEncoder, RemoteHttpEncoder
from .errors import ConfigError, UnparseableOutput
from .headerindex import HeaderIndex, build_header_index, load_index, save_index
from .joinrank import ScoredGroup, enumerate_candidate_groups, rank_groups
from .llm import ChatBackend, RemoteChatBackend
from .parsing import (OfflineQuestionParser, ParsedQuestion, ParserBackend,
                      RemoteLlmParser, schedule_batches, to_parsed_question)
from .qa import AnswerSet, OfflineQaChat, answer_question, cluster_by_signature
from .retrieval import (RetrievalConfig, RetrievalContext, ScoredTable,
                        gather_evidence, rank_tables, select_by_threshold)
from .sqlrun import PolarsSqlEngine, SqlEngine

log = logging.getLogger(__name__)


@dataclass
class ParseFailure:
    question: str
    error: str


@dataclass
class IndexSummary:
    n_tables: int
    n_headers: int
    index_path: str
    elapsed_s: float


class Engine:
    def __init__(self, config: EngineConfig):
        self.config = config
        self._corpus: Optional[Corpus] = None
        self._index: Optional[HeaderIndex] = None
        self._encoder: Optional[Encoder] = None
        self._parser: Optional[ParserBackend] = None
        self._qa_chat: Optional[ChatBackend] = None
        self._sql_engine: Optional[SqlEngine] = None

    @property
    def corpus(self) -> Corpus:
        if self._corpus is None:
            self._corpus = load_corpus(Path(self.config.corpus_root))
        return self._corpus

    @property
    def encoder(self) -> Encoder:
        if self._encoder is None:
            if self.config.encoder_backend == "local":
                self._encoder = LocalHashEncoder(self.config.encoder_dim)
            else:
                if not self.config.encoder_endpoint:
                    raise ConfigError("encoder_backend=remote requires encoder_endpoint")
                self._encoder = RemoteHttpEncoder(self.config.encoder_endpoint, self.config.encoder_dim)
        return self._encoder

    @property
    def index(self) -> HeaderIndex:
        if self._index is None:
            path = Path(self.config.index_path)
            if not path.is_file():
                raise ConfigError(f"header index not found at {path}; run the index command first")
            loaded = load_index(path)
            if loaded.encoder_id != self.encoder.id:
                raise ConfigError(
                    f"index at {path} was built with encoder {loaded.encoder_id!r}, "
                    f"config selects {self.encoder.id!r}; rebuild the index")
            self._index = loaded
        return self._index

    @property
    def parser(self) -> ParserBackend:
        if self._parser is None:
            if self.config.parser_backend == "offline":
                self._parser = OfflineQuestionParser(self.corpus.header_table_count)
            else:
                if not self.config.parser_endpoint or not self.config.parser_model:
                    raise ConfigError("parser_backend=remote requires parser_endpoint and parser_model")
                backend = RemoteChatBackend(
                    self.config.parser_endpoint, self.config.parser_model, api_key=self.config.api_key)
                self._parser = RemoteLlmParser(backend)
        return self._parser

    @property
    def qa_chat(self) -> ChatBackend:
        if self._qa_chat is None:
            if self.config.qa_backend == "offline":
                self._qa_chat = OfflineQaChat()
            else:
                if not self.config.qa_endpoint or not self.config.qa_model:
                    raise ConfigError("qa_backend=remote requires qa_endpoint and qa_model")
                self._qa_chat = RemoteChatBackend(
                    self.config.qa_endpoint, self.config.qa_model, api_key=self.config.api_key)
        return self._qa_chat

    @property
    def sql_engine(self) -> SqlEngine:
        if self._sql_engine is None:
            self._sql_engine = PolarsSqlEngine()
        return self._sql_engine

    def build_index(self) -> IndexSummary:
        """Encode all distinct headers and write the index file."""
        start = time.perf_counter()
        index = build_header_index(self.corpus, self.encoder)
        path = Path(self.config.index_path)
        save_index(index, path)
        self._index = index
        elapsed = time.perf_counter() - start
        log.info("indexed %d headers from %d tables in %.2fs", len(index), self.corpus.n_tables, elapsed)
        return IndexSummary(self.corpus.n_tables, len(index), str(path), elapsed)

    def retrieval_context(self) -> RetrievalContext:
        cfg = RetrievalConfig(
            k=self.config.k,
            eta=self.config.eta,
            tau=self.config.tau,
            scan=ScanOptions(
                case_sensitive=self.config.value_case_sensitive,
                whole_cell=self.config.value_match_mode == "cell",
            ),
        )
        return RetrievalContext(self.corpus, self.index, self.encoder, cfg)

    def parse_questions(self, texts: Sequence[str]) -> List[Union[ParsedQuestion, ParseFailure]]:
        """Parse a batch; failures isolate to their own question."""
        raw_by_text: Dict[str, str] = {}
        for batch in schedule_batches(texts, self.config.max_batch, self.config.var_bound):
            outputs = self.parser.parse(batch)
            for text, raw in zip(batch, outputs):
                raw_by_text[text] = raw
        results: List[Union[ParsedQuestion, ParseFailure]] = []
        for text in texts:
            try:
                results.append(to_parsed_question(text, raw_by_text.get(text, "")))
            except (UnparseableOutput, ValueError) as exc:
                results.append(ParseFailure(question=text, error=str(exc)))
        return results

    def retrieve_independent(self, parsed: ParsedQuestion) -> Tuple[List[ScoredTable], List[ScoredTable]]:
        """Full ranking plus the thresholded selection."""
        ctx = self.retrieval_context()
        ev = gather_evidence(parsed, ctx)
        ranked = rank_tables(ev, ctx.corpus)
        return ranked, select_by_threshold(ranked, ctx.config.tau)

    def retrieve_join(self, parsed: ParsedQuestion, graph: JoinGraph) -> List[ScoredGroup]:
        """Ranked connected groups seeded at evidence-bearing tables."""
        ctx = self.retrieval_context()
        ev = gather_evidence(parsed, ctx)
        hit_tables = {h.table_id for h in ev.hits} | set(ev.value_scores)
        groups = enumerate_candidate_groups(
            graph, hit_tables, self.config.max_group_size, self.config.enumeration_cap)
        return rank_groups(groups, ev.hits, ev.value_scores, ev.n_mentions, ctx.corpus)

    def load_graph(self, path: Path) -> JoinGraph:
        return load_join_graph(path, self.corpus)

    def answer(self, parsed: ParsedQuestion, selected: Sequence[ScoredTable]) -> AnswerSet:
        clusters = cluster_by_signature(selected)
        return answer_question(parsed, clusters, self.corpus, self.sql_engine,
                               self.qa_chat, combined=self.config.qa_combined)

    def eval_tables(self, predictions: Mapping[str, Set[str]],
                    truth_records: Sequence[bench.BenchRecord]) -> bench.EvalReport:
        truth = {rec.qid: set(rec.truth_tables) for rec in truth_records}
        return bench.macro_prf(predictions, truth)

    def eval_groups(self, predicted: Mapping[str, Sequence[Set[str]]],
                    truth_records: Sequence[bench.BenchRecord]) -> Dict[int, float]:
        truth = {rec.qid: set(rec.truth_group or rec.truth_tables) for rec in truth_records}
        return {k: bench.hit_at_k_group(predicted, truth, k) for k in bench.HIT_K_GRID}

    def eval_cells(self, answers: Mapping[str, Sequence[Tuple[str, Sequence]]],
                   truth_records: Sequence[bench.BenchRecord]) -> Optional[bench.EvalReport]:
        truth = {rec.qid: rec.truth_cells for rec in truth_records if rec.truth_cells is not None}
        if not truth:
            return None
        return bench.cell_prf(answers, truth)

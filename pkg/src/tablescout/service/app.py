"""FastAPI application wrapping one Engine instance.

Domain errors map to 400 with the error class name in the detail; the
engine is shared across requests, so everything it caches (corpus,
index, encoder) is loaded once and reused.
"""

import logging
from pathlib import Path
from typing import List, Union

from fastapi import FastAPI, HTTPException

from ..bench import BenchRecord, build_independent_benchmark, build_join_benchmark, canonical_cell
from ..config import EngineConfig
from ..engine import Engine, ParseFailure
from ..errors import TablescoutError
from ..parsing import ParsedQuestion
from . import models

log = logging.getLogger(__name__)


def create_app(config: EngineConfig) -> FastAPI:
    app = FastAPI(title="tablescout", version="0.1.0")
    app.state.engine = Engine(config)

    def engine() -> Engine:
        return app.state.engine

    def fail(exc: TablescoutError) -> HTTPException:
        return HTTPException(status_code=400, detail=f"{type(exc).__name__}: {exc}")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/index", response_model=models.IndexResponse)
    def index(_req: models.IndexRequest) -> models.IndexResponse:
        try:
            summary = engine().build_index()
        except TablescoutError as exc:
            raise fail(exc)
        return models.IndexResponse(
            n_tables=summary.n_tables, n_headers=summary.n_headers,
            index_path=summary.index_path, elapsed_s=summary.elapsed_s)

    @app.post("/retrieve", response_model=models.RetrieveResponse)
    def retrieve(req: models.RetrieveRequest) -> models.RetrieveResponse:
        eng = engine()
        graph = None
        try:
            if req.mode == "join":
                if not req.join_graph_path:
                    raise HTTPException(status_code=400, detail="join mode requires join_graph_path")
                graph = eng.load_graph(Path(req.join_graph_path))
            parsed_list = eng.parse_questions([q.question for q in req.questions])
        except TablescoutError as exc:
            raise fail(exc)
        results = []
        for q, parsed in zip(req.questions, parsed_list):
            results.append(_one_retrieve(eng, q.qid, parsed, req.mode, graph))
        return models.RetrieveResponse(results=results)

    @app.post("/ask", response_model=models.AskResponse)
    def ask(req: models.AskRequest) -> models.AskResponse:
        eng = engine()
        try:
            parsed_list = eng.parse_questions([q.question for q in req.questions])
        except TablescoutError as exc:
            raise fail(exc)
        results = []
        for q, parsed in zip(req.questions, parsed_list):
            if isinstance(parsed, ParseFailure):
                results.append(models.AskResultOut(qid=q.qid, ok=False, error=parsed.error))
                continue
            try:
                _, selected = eng.retrieve_independent(parsed)
                answers = eng.answer(parsed, selected)
            except TablescoutError as exc:
                results.append(models.AskResultOut(qid=q.qid, ok=False, error=f"{type(exc).__name__}: {exc}"))
                continue
            entries = [
                models.AnswerEntryOut(
                    question_id=q.qid, table=e.table_id, sql=e.sql,
                    rows=[[_json_cell(v) for v in row] for row in e.rows])
                for e in answers.entries
            ]
            results.append(models.AskResultOut(
                qid=q.qid, ok=True, entries=entries,
                clusters=answers.stats.clusters,
                judge_calls=answers.stats.judge_calls,
                sql_calls=answers.stats.sql_calls,
                failures=[[t, msg] for t, msg in answers.stats.failures]))
        return models.AskResponse(results=results)

    @app.post("/eval", response_model=models.EvalResponse)
    def evaluate(req: models.EvalRequest) -> models.EvalResponse:
        eng = engine()
        try:
            truth_records = [BenchRecord.from_json_obj(obj) for obj in req.truth]
        except (KeyError, TypeError, AttributeError) as exc:
            raise HTTPException(status_code=400, detail=f"malformed truth record: {exc}")
        response = models.EvalResponse()
        try:
            if req.mode == "independent":
                if req.predictions is None:
                    raise HTTPException(status_code=400, detail="independent mode requires predictions")
                report = eng.eval_tables({q: set(t) for q, t in req.predictions.items()}, truth_records)
                response.report = report.as_dict()
            else:
                if req.predicted_groups is None:
                    raise HTTPException(status_code=400, detail="join mode requires predicted_groups")
                groups = {q: [set(g) for g in gs] for q, gs in req.predicted_groups.items()}
                response.hit_at_k = eng.eval_groups(groups, truth_records)
            if req.answers is not None:
                answers = {
                    qid: [(cell.table, cell.row) for cell in cells]
                    for qid, cells in req.answers.items()
                }
                cell_report = eng.eval_cells(answers, truth_records)
                if cell_report is not None:
                    response.cell_report = cell_report.as_dict()
        except TablescoutError as exc:
            raise fail(exc)
        return response

    @app.post("/bench-build", response_model=models.BenchBuildResponse)
    def bench_build(req: models.BenchBuildRequest) -> models.BenchBuildResponse:
        eng = engine()
        try:
            if req.mode == "independent":
                if req.records is None:
                    raise HTTPException(status_code=400, detail="independent mode requires records")
                built = build_independent_benchmark(req.records, eng.corpus, eng.sql_engine)
                return models.BenchBuildResponse(
                    records=[r.to_json_obj() for r in built],
                    n_input=len(req.records), n_kept=len(built))
            if req.databases is None or req.questions is None:
                raise HTTPException(status_code=400, detail="join mode requires databases and questions")
            built, graphs = build_join_benchmark(req.databases, req.questions)
            return models.BenchBuildResponse(
                records=[r.to_json_obj() for r in built], graphs=graphs,
                n_input=len(req.questions), n_kept=len(built))
        except TablescoutError as exc:
            raise fail(exc)

    return app


def _one_retrieve(eng: Engine, qid: str, parsed: Union[ParsedQuestion, ParseFailure],
                  mode: str, graph) -> models.RetrieveResultOut:
    if isinstance(parsed, ParseFailure):
        return models.RetrieveResultOut(qid=qid, ok=False, error=parsed.error)
    try:
        if mode == "join":
            groups = eng.retrieve_join(parsed, graph)
            return models.RetrieveResultOut(
                qid=qid, ok=True,
                mentions=list(parsed.column_mentions),
                values=sorted(parsed.value_mentions),
                groups=[models.GroupOut(
                    tables=sorted(g.tables), score=g.score,
                    per_mention_support=dict(g.per_mention_support)) for g in groups])
        ranked, selected = eng.retrieve_independent(parsed)
        return models.RetrieveResultOut(
            qid=qid, ok=True,
            mentions=list(parsed.column_mentions),
            values=sorted(parsed.value_mentions),
            tables=[models.ScoredTableOut(
                table_id=st.table_id, s_col=st.s_col, s_val=st.s_val, s_total=st.s_total,
                hits=[models.HitOut(mention_index=h.mention_index, header=h.header, score=h.score)
                      for h in st.hits],
                matched_values=list(st.matched_values)) for st in ranked],
            selected=[st.table_id for st in selected])
    except TablescoutError as exc:
        return models.RetrieveResultOut(qid=qid, ok=False, error=f"{type(exc).__name__}: {exc}")


def _json_cell(value):
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    return canonical_cell(value)

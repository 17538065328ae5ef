"""Request and response models for the HTTP surface."""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field


class QuestionIn(BaseModel):
    qid: str
    question: str


class IndexRequest(BaseModel):
    # the server's config decides corpus root and index path; the request
    # body exists so the endpoint can grow options without breaking callers
    pass


class IndexResponse(BaseModel):
    n_tables: int
    n_headers: int
    index_path: str
    elapsed_s: float


class HitOut(BaseModel):
    mention_index: int
    header: str
    score: float


class ScoredTableOut(BaseModel):
    table_id: str
    s_col: float
    s_val: float
    s_total: float
    hits: List[HitOut] = Field(default_factory=list)
    matched_values: List[str] = Field(default_factory=list)


class GroupOut(BaseModel):
    tables: List[str]
    score: float
    per_mention_support: Dict[int, str] = Field(default_factory=dict)


class RetrieveRequest(BaseModel):
    questions: List[QuestionIn]
    mode: Literal["independent", "join"] = "independent"
    join_graph_path: Optional[str] = None


class RetrieveResultOut(BaseModel):
    qid: str
    ok: bool
    error: Optional[str] = None
    mentions: List[str] = Field(default_factory=list)
    values: List[str] = Field(default_factory=list)
    tables: List[ScoredTableOut] = Field(default_factory=list)
    selected: List[str] = Field(default_factory=list)
    groups: List[GroupOut] = Field(default_factory=list)


class RetrieveResponse(BaseModel):
    results: List[RetrieveResultOut]


class AskRequest(BaseModel):
    questions: List[QuestionIn]


class AnswerEntryOut(BaseModel):
    question_id: str
    table: str
    sql: str
    rows: List[List[Any]]


class AskResultOut(BaseModel):
    qid: str
    ok: bool
    error: Optional[str] = None
    entries: List[AnswerEntryOut] = Field(default_factory=list)
    clusters: int = 0
    judge_calls: int = 0
    sql_calls: int = 0
    failures: List[List[str]] = Field(default_factory=list)


class AskResponse(BaseModel):
    results: List[AskResultOut]


class AnswerCellIn(BaseModel):
    table: str
    row: List[Any]


class EvalRequest(BaseModel):
    mode: Literal["independent", "join"] = "independent"
    predictions: Optional[Dict[str, List[str]]] = None
    predicted_groups: Optional[Dict[str, List[List[str]]]] = None
    answers: Optional[Dict[str, List[AnswerCellIn]]] = None
    truth: List[Dict[str, Any]]


class EvalResponse(BaseModel):
    report: Optional[Dict[str, Any]] = None
    hit_at_k: Optional[Dict[int, float]] = None
    cell_report: Optional[Dict[str, Any]] = None


class BenchBuildRequest(BaseModel):
    mode: Literal["independent", "join"] = "independent"
    records: Optional[List[Dict[str, Any]]] = None
    databases: Optional[List[Dict[str, Any]]] = None
    questions: Optional[List[Dict[str, Any]]] = None


class BenchBuildResponse(BaseModel):
    records: List[Dict[str, Any]]
    graphs: Optional[Dict[str, Dict[str, Any]]] = None
    n_input: int
    n_kept: int

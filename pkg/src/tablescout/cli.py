"""Command-line client for the retrieval service.

Every command talks HTTP to the service layer: against a remote server
when --server is given, otherwise against an in-process application so
no daemon is needed for local work. Machine-readable JSONL goes to
stdout, human summaries to stderr. Exit codes: 0 success, 1 partial
per-question failures, 2 configuration or input errors.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import click
import httpx

from .config import EngineConfig, load_config
from .errors import ConfigError

log = logging.getLogger(__name__)

_CONFIG_FLAGS = [
    ("corpus_root", str, "Directory tree of CSV tables."),
    ("index_path", str, "Header index file location."),
    ("k", int, "Semantic top-k distinct header names."),
    ("eta", float, "Semantic cosine threshold."),
    ("tau", float, "Min-max selection threshold."),
    ("max_group_size", int, "Join group size cap."),
    ("enumeration_cap", int, "Join group enumeration cap."),
    ("value_match_mode", str, "Value scan mode: substring or cell."),
    ("max_batch", int, "Parser batch size cap."),
    ("var_bound", float, "Parser batch length variance bound."),
    ("parser_backend", str, "Parser backend: offline or remote."),
    ("parser_endpoint", str, "Remote parser chat endpoint."),
    ("parser_model", str, "Remote parser model name."),
    ("encoder_backend", str, "Encoder backend: local or remote."),
    ("encoder_endpoint", str, "Remote encoder endpoint."),
    ("encoder_dim", int, "Embedding dimensionality."),
    ("qa_backend", str, "QA backend: offline or remote."),
    ("qa_endpoint", str, "Remote QA chat endpoint."),
    ("qa_model", str, "Remote QA model name."),
]


def _config_options(fn):
    for name, ftype, help_text in reversed(_CONFIG_FLAGS):
        flag = "--" + name.replace("_", "-")
        fn = click.option(flag, name, type=ftype, default=None, help=help_text)(fn)
    return fn


class CliState:
    def __init__(self, config_path: Optional[str], server: Optional[str], overrides: Dict[str, object]):
        self.config_path = config_path
        self.server = server
        self.overrides = overrides
        self._client = None

    def config(self) -> EngineConfig:
        return load_config(Path(self.config_path) if self.config_path else None, self.overrides)

    def client(self):
        if self._client is None:
            if self.server:
                self._client = httpx.Client(base_url=self.server, timeout=300.0)
            else:
                import warnings
                with warnings.catch_warnings():
                    # some starlette builds warn about their httpx pin on import
                    warnings.simplefilter("ignore")
                    from fastapi.testclient import TestClient

                from .service import create_app
                self._client = TestClient(create_app(self.config()))
        return self._client


def _post(state: CliState, path: str, payload: dict) -> dict:
    try:
        resp = state.client().post(path, json=payload)
    except ConfigError as exc:
        _die(str(exc))
    except httpx.HTTPError as exc:
        _die(f"cannot reach server: {exc}")
    if resp.status_code >= 400:
        detail = ""
        try:
            detail = resp.json().get("detail", "")
        except ValueError:
            detail = resp.text
        _die(f"server rejected request: {detail}")
    return resp.json()


def _die(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _read_jsonl(path: str) -> List[dict]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        _die(f"cannot read {path}: {exc}")
    out = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            _die(f"{path}:{i + 1}: invalid JSON: {exc}")
    return out


def _collect_questions(question: tuple, questions_file: Optional[str]) -> List[dict]:
    items: List[dict] = []
    for i, text in enumerate(question):
        items.append({"qid": f"q{i + 1}", "question": text})
    if questions_file:
        for i, obj in enumerate(_read_jsonl(questions_file)):
            if "question" not in obj:
                _die(f"{questions_file}: line {i + 1} lacks a 'question' field")
            items.append({"qid": str(obj.get("qid", f"f{i + 1}")), "question": str(obj["question"])})
    if not items:
        _die("no questions given; use --question or --questions-file")
    return items


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="YAML config file; flags and TABLESCOUT_* env vars override it.")
@click.option("--server", default=None, metavar="URL",
              help="Talk to a running service instead of in-process execution.")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging to stderr.")
@_config_options
@click.pass_context
def main(ctx, config_path, server, verbose, **overrides):
    """Entity-aware table retrieval and cell-level answering over CSV repositories."""
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = CliState(config_path, server, {k: v for k, v in overrides.items() if v is not None})


@main.command()
@click.pass_obj
def index(state: CliState):
    """Build the header index for the configured corpus."""
    body = _post(state, "/index", {})
    click.echo(json.dumps(body))
    click.echo(
        f"indexed {body['n_tables']} tables, {body['n_headers']} distinct headers "
        f"-> {body['index_path']} in {body['elapsed_s']:.2f}s", err=True)


@main.command()
@click.option("--question", "-q", multiple=True, help="Inline question; repeatable.")
@click.option("--questions-file", type=click.Path(), default=None,
              help="JSONL file of {\"qid\", \"question\"} objects.")
@click.option("--mode", type=click.Choice(["independent", "join"]), default="independent")
@click.option("--join-graph", type=click.Path(), default=None, help="Join graph JSON (join mode).")
@click.pass_obj
def retrieve(state: CliState, question, questions_file, mode, join_graph):
    """Rank tables (independent) or join groups (join) per question."""
    if mode == "join" and not join_graph:
        _die("join mode requires --join-graph")
    payload = {
        "questions": _collect_questions(question, questions_file),
        "mode": mode,
        "join_graph_path": join_graph,
    }
    body = _post(state, "/retrieve", payload)
    failures = 0
    for result in body["results"]:
        click.echo(json.dumps(result))
        if not result["ok"]:
            failures += 1
    n = len(body["results"])
    click.echo(f"retrieved {n - failures}/{n} questions", err=True)
    sys.exit(1 if failures else 0)


@main.command()
@click.option("--question", "-q", multiple=True, help="Inline question; repeatable.")
@click.option("--questions-file", type=click.Path(), default=None,
              help="JSONL file of {\"qid\", \"question\"} objects.")
@click.pass_obj
def ask(state: CliState, question, questions_file):
    """Retrieve, cluster, generate SQL, and execute; emit answer rows."""
    payload = {"questions": _collect_questions(question, questions_file)}
    body = _post(state, "/ask", payload)
    failures = 0
    clusters = judge_calls = sql_calls = 0
    for result in body["results"]:
        if not result["ok"]:
            failures += 1
            click.echo(f"question {result['qid']} failed: {result['error']}", err=True)
            continue
        clusters += result["clusters"]
        judge_calls += result["judge_calls"]
        sql_calls += result["sql_calls"]
        for entry in result["entries"]:
            click.echo(json.dumps(entry))
    n = len(body["results"])
    click.echo(
        f"answered {n - failures}/{n} questions: {clusters} clusters, "
        f"{judge_calls} judge calls, {sql_calls} sql calls", err=True)
    sys.exit(1 if failures else 0)


@main.command()
@click.option("--mode", type=click.Choice(["independent", "join"]), default="independent")
@click.option("--predictions", type=click.Path(), required=True,
              help="JSONL: {\"qid\", \"tables\": [...]} or {\"qid\", \"groups\": [[...], ...]}.")
@click.option("--truth", type=click.Path(), required=True, help="Benchmark JSONL.")
@click.option("--answers", type=click.Path(), default=None,
              help="Answers JSONL from the ask command, for cell metrics.")
@click.pass_obj
def eval(state: CliState, mode, predictions, truth, answers):
    """Score predictions against benchmark truth."""
    payload: dict = {"mode": mode, "truth": _read_jsonl(truth)}
    pred_rows = _read_jsonl(predictions)
    if mode == "independent":
        payload["predictions"] = {str(r["qid"]): list(r.get("tables", ())) for r in pred_rows}
    else:
        payload["predicted_groups"] = {str(r["qid"]): [list(g) for g in r.get("groups", ())] for r in pred_rows}
    if answers:
        grouped: Dict[str, List[dict]] = {}
        for entry in _read_jsonl(answers):
            for row in entry.get("rows", ()):
                grouped.setdefault(str(entry["question_id"]), []).append(
                    {"table": str(entry["table"]), "row": list(row)})
        payload["answers"] = grouped
    body = _post(state, "/eval", payload)
    click.echo(json.dumps(body))
    if body.get("report"):
        rep = body["report"]
        click.echo(
            f"tables  macro-P {rep['macro_p']:.4f}  macro-R {rep['macro_r']:.4f}  "
            f"macro-F1 {rep['macro_f1']:.4f}  ({rep['n_questions']} questions)", err=True)
    if body.get("hit_at_k"):
        line = "  ".join(f"hit@{k} {v:.4f}" for k, v in sorted(body["hit_at_k"].items(), key=lambda kv: int(kv[0])))
        click.echo(f"groups  {line}", err=True)
    if body.get("cell_report"):
        rep = body["cell_report"]
        click.echo(
            f"cells   macro-P {rep['macro_p']:.4f}  macro-R {rep['macro_r']:.4f}  "
            f"macro-F1 {rep['macro_f1']:.4f}  ({rep['n_questions']} questions)", err=True)


@main.command("bench-build")
@click.option("--mode", type=click.Choice(["independent", "join"]), default="independent")
@click.option("--records", type=click.Path(), default=None,
              help="JSONL of {\"qid\", \"question\", \"sql_meta\"} (independent mode).")
@click.option("--databases", type=click.Path(), default=None,
              help="JSONL of {\"db_id\", \"tables\", \"foreign_keys\"} (join mode).")
@click.option("--questions", type=click.Path(), default=None,
              help="JSONL of {\"qid\", \"db_id\", \"question\", \"sql\"} (join mode).")
@click.option("--out", type=click.Path(), default=None, help="Benchmark JSONL output; stdout if omitted.")
@click.option("--graphs-dir", type=click.Path(), default=None, help="Directory for join graph JSON files.")
@click.pass_obj
def bench_build(state: CliState, mode, records, databases, questions, out, graphs_dir):
    """Construct benchmark records from SQL metadata or PK-FK metadata."""
    if mode == "independent":
        if not records:
            _die("independent mode requires --records")
        payload = {"mode": mode, "records": _read_jsonl(records)}
    else:
        if not databases or not questions:
            _die("join mode requires --databases and --questions")
        payload = {"mode": mode, "databases": _read_jsonl(databases), "questions": _read_jsonl(questions)}
    body = _post(state, "/bench-build", payload)
    lines = [json.dumps(rec) for rec in body["records"]]
    if out:
        Path(out).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    else:
        for line in lines:
            click.echo(line)
    if body.get("graphs"):
        if not graphs_dir:
            _die("join mode requires --graphs-dir for the graph files")
        graph_root = Path(graphs_dir)
        graph_root.mkdir(parents=True, exist_ok=True)
        for db_id, graph in body["graphs"].items():
            (graph_root / f"{db_id}.json").write_text(json.dumps(graph, indent=2), encoding="utf-8")
    click.echo(f"kept {body['n_kept']} of {body['n_input']} input questions", err=True)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.pass_obj
def serve(state: CliState, host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app
    try:
        app = create_app(state.config())
    except ConfigError as exc:
        _die(str(exc))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()

"""Versioned prompt templates.

Placeholders are filled in a single pass, so substituted text is never
re-scanned for further placeholders. Changing any template text must bump
its version constant; downstream caches may key on these.
"""

import re
from typing import Mapping, Sequence

PARSE_PROMPT_VERSION = "v1"
PARSE_PROMPT_TEMPLATE = """You are given a natural language question that corresponds to a SQL query. Your task is to infer the column names and the SQL query.

Question:
{question}

Your output must:
- In the first line, only contains column names in a single line separated by ' || '. For example, if you identify 3 columns, your output should be
column name 1 || column name 2 || column name 3
- In the second line, only contains the SQL query in a single line. Do not use "FROM" clause in the SQL query.
- Not include any explanation, commentary, or extra text."""

JUDGE_PROMPT_VERSION = "v1"
JUDGE_PROMPT_TEMPLATE = """I have the following question and table name and table column names.

Question:
{question}

Table:
    Table Name:
    {table_name}
    Columns:
    {columns}

Can this question be translated into an SQL query on this table?
- Note that the table may contain some columns that can be inferred from the question. If all the columns in the question can be inferred from the table, you should answer 'yes'.
- Note that the table may lack some columns that are necessary to answer the question, which you should answer 'no'.
Answer only 'yes' or 'no'."""

SQL_PROMPT_VERSION = "v1"
SQL_PROMPT_TEMPLATE = """I have the following question and table name and table column names.

Question:
{question}

Table:
    Table Name:
    {table_name}
    Columns:
    {columns}

Write a single SQL query over this table that answers the question.
- Use only the table name and the columns listed above; double-quote any identifier that contains spaces.
- Use ILIKE when comparing against string values.
- Output only the SQL query in a single line, with no explanation or extra text."""

_PLACEHOLDER_RE = re.compile(r"\{(question|table_name|columns)\}")


def _fill(template: str, mapping: Mapping[str, str]) -> str:
    return _PLACEHOLDER_RE.sub(lambda m: mapping[m.group(1)], template)


def parse_prompt(question: str) -> str:
    return _fill(PARSE_PROMPT_TEMPLATE, {"question": question})


def judge_prompt(question: str, table_name: str, columns: Sequence[str]) -> str:
    return _fill(JUDGE_PROMPT_TEMPLATE, {
        "question": question,
        "table_name": table_name,
        "columns": ", ".join(columns),
    })


def sql_prompt(question: str, table_name: str, columns: Sequence[str]) -> str:
    return _fill(SQL_PROMPT_TEMPLATE, {
        "question": question,
        "table_name": table_name,
        "columns": ", ".join(columns),
    })

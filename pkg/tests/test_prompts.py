"""Prompt template rendering rules."""

from tablescout.prompts import (JUDGE_PROMPT_VERSION, PARSE_PROMPT_VERSION,
                                SQL_PROMPT_VERSION, judge_prompt, parse_prompt, sql_prompt)


def test_parse_prompt_embeds_question():
    p = parse_prompt("what year was the peak?")
    assert "Question:\nwhat year was the peak?\n" in p
    assert "' || '" in p
    assert "column name 1 || column name 2 || column name 3" in p
    assert '"FROM"' in p
    assert "{question}" not in p


def test_judge_prompt_layout():
    p = judge_prompt("how many?", "sales_2021", ["year", "sale amount"])
    assert "Question:\nhow many?\n" in p
    assert "Table Name:\n    sales_2021\n" in p
    assert "Columns:\n    year, sale amount\n" in p
    assert p.rstrip().endswith("Answer only 'yes' or 'no'.")


def test_sql_prompt_layout():
    p = sql_prompt("how many?", "sales_2021", ["year"])
    assert "Table Name:\n    sales_2021\n" in p
    assert "Columns:\n    year\n" in p
    assert "ILIKE" in p
    assert "single line" in p


def test_single_pass_fill_does_not_rescan():
    # substituted text containing a placeholder pattern stays verbatim
    p = judge_prompt("what about {columns}?", "t", ["a"])
    assert "what about {columns}?" in p
    assert "Columns:\n    a\n" in p


def test_versions_are_pinned():
    assert (PARSE_PROMPT_VERSION, JUDGE_PROMPT_VERSION, SQL_PROMPT_VERSION) == ("v1", "v1", "v1")

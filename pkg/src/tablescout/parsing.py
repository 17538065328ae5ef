"""Question parsing: prompt construction, output decoding, value extraction.

One LLM call turns a question into two lines: column mentions joined by
" || " and a FROM-less SQL sketch. Value mentions come from the sketch,
not the raw question, via a conservative regex. An offline deterministic
parser with the same contract exists for tests and network-free runs; its
purpose is pipeline testability, not parse quality.
"""

import logging
import math
import re
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Protocol, Sequence, Set, Tuple

from .errors import LlmFailure, UnparseableOutput
from .llm import ChatBackend
from .prompts import parse_prompt

log = logging.getLogger(__name__)


@dataclass
class ParsedQuestion:
    """Question plus the entities extracted from it.

    ``column_mentions`` keeps order and duplicates; ``value_mentions`` is a
    set of literals expected to appear verbatim in table bodies.
    """

    question: str
    column_mentions: List[str]
    value_mentions: FrozenSet[str]
    sql_sketch: str = ""

    def __post_init__(self):
        if any(not m.strip() for m in self.column_mentions):
            raise ValueError("column mentions must be non-empty")
        if any(not v.strip() for v in self.value_mentions):
            raise ValueError("value mentions must be non-empty")
        if "\n" in self.sql_sketch:
            raise ValueError("sql sketch must be a single line")


class ParserBackend(Protocol):
    """Batch of questions in, batch of raw two-line outputs out, same order."""

    id: str

    def parse(self, questions: Sequence[str]) -> List[str]: ...


def build_parse_prompt(question: str) -> str:
    if not question.strip():
        raise ValueError("question must be non-empty")
    return parse_prompt(question)


_FENCE_RE = re.compile(r"^\s*```+\w*\s*$")


def parse_llm_output(raw: str) -> Tuple[List[str], str]:
    """Decode the two-line contract: mentions on line 1, sketch on line 2.

    Extra lines are ignored with a warning; a blank first line is a hard
    failure since there is nothing to retrieve with.
    """
    lines = [ln.rstrip("\r") for ln in raw.split("\n")]
    lines = [ln for ln in lines if not _FENCE_RE.match(ln)]
    first = lines[0].strip() if lines else ""
    if not first:
        raise UnparseableOutput("first output line is blank")
    mentions = [tok.strip() for tok in first.split(" || ")]
    mentions = [m for m in mentions if m]
    sketch = lines[1].strip() if len(lines) > 1 else ""
    if any(ln.strip() for ln in lines[2:]):
        log.warning("ignoring %d extra output line(s)", sum(1 for ln in lines[2:] if ln.strip()))
    return mentions, sketch


_FROM_CLAUSE_RE = re.compile(
    r"\bFROM\b.*?(?=\bWHERE\b|\bGROUP\b|\bHAVING\b|\bORDER\b|\bLIMIT\b|;|$)",
    re.IGNORECASE | re.DOTALL,
)
_QUOTED_RE = re.compile(r"'([^']*)'|\"([^\"]*)\"")
_NUM_CMP_RE = re.compile(r"(?:<=|>=|!=|<>|=|<|>|\bLIKE\b|\bILIKE\b)\s*([-+]?\d+(?:\.\d+)?)", re.IGNORECASE)
_BETWEEN_RE = re.compile(r"\bBETWEEN\s+([-+]?\d+(?:\.\d+)?)\s+AND\s+([-+]?\d+(?:\.\d+)?)", re.IGNORECASE)


def extract_values_from_sql(sql_sketch: str) -> Set[str]:
    """Literals from quoted strings and numeric comparison right-hand sides.

    Best-effort on malformed SQL. Any FROM clause is stripped first (the
    sketch should not have one, but outputs are not always obedient).
    """
    text = _FROM_CLAUSE_RE.sub(" ", sql_sketch)
    values: Set[str] = set()
    masked = []
    last = 0
    for m in _QUOTED_RE.finditer(text):
        content = m.group(1) if m.group(1) is not None else m.group(2)
        values.add(content)
        masked.append(text[last:m.start()])
        masked.append(" " * (m.end() - m.start()))
        last = m.end()
    masked.append(text[last:])
    unquoted = "".join(masked)
    # Cells print negatives with the sign but never a leading plus.
    for m in _NUM_CMP_RE.finditer(unquoted):
        values.add(m.group(1).lstrip("+"))
    for m in _BETWEEN_RE.finditer(unquoted):
        values.add(m.group(1).lstrip("+"))
        values.add(m.group(2).lstrip("+"))
    return {v.strip() for v in values if v.strip() and "'" not in v and '"' not in v}


def to_parsed_question(question: str, raw_output: str) -> ParsedQuestion:
    """Combine the decoded output and extracted values into a ParsedQuestion."""
    mentions, sketch = parse_llm_output(raw_output)
    return ParsedQuestion(
        question=question,
        column_mentions=mentions,
        value_mentions=frozenset(extract_values_from_sql(sketch)),
        sql_sketch=sketch,
    )


def estimate_tokens(question: str) -> int:
    """chars/4 heuristic, floor of one token."""
    return max(1, math.ceil(len(question) / 4))


def schedule_batches(questions: Sequence[str], max_batch: int = 16, var_bound: float = 0.05) -> List[List[str]]:
    """Near-homogeneous batches: sort by token estimate, group greedily.

    Within a batch (max − min)/max never exceeds ``var_bound`` and size
    never exceeds ``max_batch``. The result partitions the input.
    """
    if max_batch < 1:
        raise ValueError("max_batch must be >= 1")
    if not 0.0 < var_bound <= 1.0:
        raise ValueError("var_bound must be in (0, 1]")
    ordered = sorted(questions, key=estimate_tokens)
    batches: List[List[str]] = []
    current: List[str] = []
    current_min = 0
    for q in ordered:
        est = estimate_tokens(q)
        if current and len(current) < max_batch and (est - current_min) / est <= var_bound:
            current.append(q)
        else:
            if current:
                batches.append(current)
            current = [q]
            current_min = est
    if current:
        batches.append(current)
    return batches


_STOPWORDS = {
    "a", "an", "and", "any", "are", "at", "by", "did", "do", "does", "find", "for",
    "from", "give", "has", "have", "how", "in", "is", "it", "its", "list", "many",
    "much", "of", "on", "or", "per", "show", "tell", "that", "the", "their", "to",
    "was", "were", "what", "when", "where", "which", "who", "whose", "with",
}
_WORD_RE = re.compile(r"[a-z0-9]+")
_CAP_RUN_RE = re.compile(r"\b[A-Z][\w-]*(?:[ \t]+[A-Z][\w-]*)*")
_NUM_TOKEN_RE = re.compile(r"(?<![\w.])\d+(?:\.\d+)?(?![\w.])")


class OfflineQuestionParser:
    """Deterministic parser: quoted spans become values, known-header
    phrases and capitalized runs become column mentions.

    Needs no network and produces identical output across runs. Feed it
    the corpus header names as vocabulary for best mention recall.
    """

    def __init__(self, vocabulary: Iterable[str] = ()):
        entries = sorted({v.strip().casefold() for v in vocabulary if v.strip()})
        self._vocab: List[Tuple[Tuple[str, ...], str]] = sorted(
            ((tuple(_WORD_RE.findall(e)), e) for e in entries),
            key=lambda item: (-len(item[0]), item[1]),
        )
        self.id = "offline-v1"

    def parse(self, questions: Sequence[str]) -> List[str]:
        return [self._parse_one(q) for q in questions]

    def _parse_one(self, question: str) -> str:
        values: List[str] = []
        masked_chars = list(question)
        for m in _QUOTED_RE.finditer(question):
            content = (m.group(1) if m.group(1) is not None else m.group(2)).strip()
            if content and "'" not in content and '"' not in content:
                values.append(content)
            for i in range(m.start(), m.end()):
                masked_chars[i] = " "
        masked = "".join(masked_chars)
        for m in _NUM_TOKEN_RE.finditer(masked):
            values.append(m.group(0))
        mentions = self._extract_mentions(masked)
        if not mentions:
            fallback = self._fallback_mention(masked)
            if fallback:
                mentions = [fallback]
        line1 = " || ".join(mentions)
        return f"{line1}\n{self._sketch(mentions, values)}"

    def _extract_mentions(self, masked: str) -> List[str]:
        words = [(m.group(0), m.start()) for m in _WORD_RE.finditer(masked.casefold())]
        tokens = [w for w, _ in words]
        claimed = [False] * len(tokens)
        found: List[Tuple[int, str]] = []
        for vocab_tokens, vocab_text in self._vocab:
            width = len(vocab_tokens)
            if width == 0:
                continue
            for start in range(0, len(tokens) - width + 1):
                if any(claimed[start:start + width]):
                    continue
                if tuple(tokens[start:start + width]) == vocab_tokens:
                    for i in range(start, start + width):
                        claimed[i] = True
                    found.append((words[start][1], vocab_text))
        for m in _CAP_RUN_RE.finditer(masked):
            if m.start() == 0:
                continue  # sentence-initial capital carries no signal
            run_words = [w.casefold() for w in m.group(0).split()]
            core = [w for w in run_words if w not in _STOPWORDS]
            if not core:
                continue
            phrase = " ".join(core)
            if any(phrase in text or text in phrase for _, text in found):
                continue
            found.append((m.start(), phrase))
        found.sort(key=lambda item: item[0])
        mentions: List[str] = []
        for _, text in found:
            if text not in mentions:
                mentions.append(text)
        return mentions

    def _fallback_mention(self, masked: str) -> Optional[str]:
        candidates = [w for w in _WORD_RE.findall(masked.casefold()) if w not in _STOPWORDS and not w.isdigit()]
        if not candidates:
            return None
        return max(candidates, key=len)

    def _sketch(self, mentions: Sequence[str], values: Sequence[str]) -> str:
        select = ", ".join(mentions) if mentions else "*"
        if not values:
            return f"SELECT {select}"
        parts = []
        for i, v in enumerate(values):
            col = mentions[i % len(mentions)] if mentions else "value"
            rhs = v if re.fullmatch(r"[-+]?\d+(?:\.\d+)?", v) else f"'{v}'"
            parts.append(f"{col} = {rhs}")
        return f"SELECT {select} WHERE " + " AND ".join(parts)


class RemoteLlmParser:
    """Chat-backend parser; one call per question, temperature 0.

    A question whose call exhausts the backend's retries is mapped to an
    empty raw output so the rest of the batch survives; decoding turns
    that into UnparseableOutput for just that question.
    """

    def __init__(self, backend: ChatBackend):
        self._backend = backend
        self.id = f"remote-parser:{backend.id}"

    def parse(self, questions: Sequence[str]) -> List[str]:
        outputs: List[str] = []
        for q in questions:
            try:
                outputs.append(self._backend.complete(build_parse_prompt(q)))
            except LlmFailure as exc:
                log.warning("parse failed for question %.60r: %s", q, exc)
                outputs.append("")
        return outputs

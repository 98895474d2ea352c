"""Factor prompts and the JSON-lines request / JSON-array response protocol."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger("feedlab.scoring")

MAX_CHUNK = 10

# Question + definition blocks, one per factor (v1..v8).
FACTOR_DEFINITIONS = (
    'Do the following messages express partisan animosity?\n'
    'Partisan animosity is defined as "dislike for opposing partisans".',

    'Do the following messages express support for undemocratic practices?\n'
    'Support for undemocratic practices is defined as "willingness to forgo democratic principles '
    'for partisan gain". Undemocratic practices are undemocratic tendencies or actions such as '
    'reducing polling stations in areas that support their opponents, attacking the independence '
    'of the judiciary, undermining the free press, challenging the legitimacy of election results, '
    'or encouraging political violence.',

    'Do the following messages express support for partisan violence?\n'
    'Support for partisan violence is defined as a "willingness to use violent tactics against '
    'outpartisans". Examples of partisan violence include sending threatening and intimidating '
    'messages to the opponent party, harassing the opponent party on the Internet, using violence '
    'in advancing their political goals or winning more races in the next election.',

    'Do the following messages express support for undemocratic candidates?\n'
    'Support for undemocratic candidates is defined as "willingness to ignore democratic practices '
    'to elect inparty candidates." Undemocratic candidates often support undemocratic practices '
    'such as reducing polling stations in areas that support their opponents, attacking the '
    'independence of the judiciary, undermining the free press, challenging the legitimacy of '
    'election results, or encouraging political violence.',

    'Do the following messages express opposition to bipartisanship?\n'
    'Opposition to bipartisanship is defined as "resistance to cross-partisan collaboration".',

    'Do the following messages express social distrust?\n'
    'Social distrust is defined as "distrust of people in general".',

    'Do the following messages express social distance?\n'
    'Social distance is defined as "resistance to interpersonal contact with outpartisans". '
    'Messages that increase social distance may contain terms that increase distrust, distance, '
    'insecurity, hate, prejudice, or discrimination.',

    'Do the following messages express a biased evaluation of politicized facts?\n'
    'Biased evaluation of politicized facts is defined as "skepticism of facts that favor the '
    'worldview of the other party". Messages supporting a biased evaluation of politicized facts '
    'may partially present political facts or discuss a controversial issue with a certain '
    'political stance.',
)

FORMAT_SECTION = (
    "FORMAT:\n"
    "The input messages are given as JSON lines in the format\n"
    '{"id": <message_id>, "message": <message>}.\n'
    "The output must be a JSON array of objects in the format\n"
    '[{"id": <message_id>, "answer": <YES or NO>}, ... ].'
)

INPUT_HEADER = "INPUT MESSAGES:"

POLITICAL_PROMPT = (
    "Political content on Twitter is varied and can be about officials and\n"
    "activists, social issues, or news and current events.\n"
    "Looking at the following tweet, would you categorize it as POLITICAL\n"
    "or NOT POLITICAL content?\n"
    "\n"
    "Answer 1 if it is POLITICAL, 0 otherwise."
)


@dataclass(frozen=True)
class FactorPrompt:
    factor: int  # 0-based index into v1..v8
    messages: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if not 0 <= self.factor < len(FACTOR_DEFINITIONS):
            raise ValueError(f"unknown factor index {self.factor}")
        if not 1 <= len(self.messages) <= MAX_CHUNK:
            raise ValueError(f"a prompt carries 1..{MAX_CHUNK} messages, got {len(self.messages)}")

    @property
    def definition_text(self) -> str:
        return FACTOR_DEFINITIONS[self.factor]

    def render(self) -> str:
        return build_factor_prompt(self.factor, self.messages)


def chunk_messages(items: Sequence, max_chunk: int = MAX_CHUNK) -> list[list]:
    if max_chunk < 1:
        raise ValueError("max_chunk must be positive")
    return [list(items[i:i + max_chunk]) for i in range(0, len(items), max_chunk)]


def build_factor_prompt(factor: int, chunk: Iterable[tuple[str, str]]) -> str:
    chunk = list(chunk)
    if not chunk:
        raise ValueError("cannot build a prompt for an empty chunk")
    lines = [json.dumps({"id": mid, "message": text}, ensure_ascii=False) for mid, text in chunk]
    return "\n\n".join([FACTOR_DEFINITIONS[factor], FORMAT_SECTION, INPUT_HEADER + "\n" + "\n".join(lines)])


def parse_prompt(prompt: str) -> tuple[int, list[tuple[str, str]]]:
    """Inverse of :func:`build_factor_prompt`; used by offline backends."""
    head, _, body = prompt.partition(INPUT_HEADER)
    factor = None
    for i, definition in enumerate(FACTOR_DEFINITIONS):
        if head.startswith(definition.split("\n", 1)[0]):
            factor = i
            break
    if factor is None:
        raise ValueError("prompt does not start with a known factor question")
    messages = []
    for line in body.splitlines():
        line = line.strip()
        if line:
            obj = json.loads(line)
            messages.append((str(obj["id"]), obj["message"]))
    return factor, messages


def _extract_array(raw: str):
    start, end = raw.find("["), raw.rfind("]")
    if start < 0 or end < start:
        raise ValueError("no JSON array in response")
    return json.loads(raw[start:end + 1])


def parse_factor_response(raw: str, expected_ids: Iterable[str], events: list | None = None) -> dict[str, bool]:
    """Map each expected id to its YES/NO answer.

    Anything missing, malformed or not exactly YES counts as NO, and a
    ``DegradedParse`` event is logged.
    """
    expected = [str(i) for i in expected_ids]
    out = {i: False for i in expected}
    answered = set()
    try:
        parsed = _extract_array(raw)
        if not isinstance(parsed, list):
            raise ValueError("response is not a list")
    except (ValueError, TypeError) as exc:
        if expected:
            _degraded(events, expected, f"unparseable response: {exc}")
        return out
    for entry in parsed:
        if not isinstance(entry, Mapping) or "id" not in entry:
            continue
        mid = str(entry["id"])
        if mid not in out:
            continue
        answer = entry.get("answer")
        if isinstance(answer, str) and answer.strip().upper() in ("YES", "NO"):
            out[mid] = answer.strip().upper() == "YES"
            answered.add(mid)
    missing = [i for i in expected if i not in answered]
    if missing:
        _degraded(events, missing, "ids missing or malformed in response")
    return out


def _degraded(events, ids, reason):
    logger.warning("DegradedParse: %s (%d ids)", reason, len(ids))
    if events is not None:
        events.append({"event": "DegradedParse", "ids": list(ids), "reason": reason})


def parse_political_answer(raw: str) -> bool:
    text = raw.strip()
    if text.startswith("1"):
        return True
    if text.startswith("0"):
        return False
    return "NOT POLITICAL" not in text.upper() and "POLITICAL" in text.upper()

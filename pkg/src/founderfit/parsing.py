"""Parsers for free-text analyst transcripts.

All functions are pure and tolerant of Markdown/LaTeX emphasis around the
values they look for.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import FeatureCountOutOfRange, MissingExpert, NoListFound, NoScoreFound, ValueOutOfRange

STATED_FEATURE_RANGE = (4, 6)    # what the prompt asks for
ACCEPTED_FEATURE_RANGE = (3, 8)  # what we accept without a reprompt

_NUM = r"((?:\d+(?:\.\d+)?|\.\d+)(?:[eE][-+]?\d+)?)\s*(%)?"
_MARKUP = r"[*_`{}\\]*"

_ITEM_RE = re.compile(
    r"^(?P<indent>\s*)(?:\d{1,2}[.)]|[-*•–+]|\\item(?:\[[^\]]*\])?)\s+(?P<body>\S.*?)\s*$")
_FEATURE_HEADING_RE = re.compile(r"successful\b.*\bfeatures", re.IGNORECASE)

_STEP_RE = re.compile(r"^[\W_]*(?:textbf\{)?\s*step\s+(\d+)\b\W*(.*?)[\s*_{}\\:.]*$", re.IGNORECASE | re.MULTILINE)
_EXPERT_RE = re.compile(r"^[\W_]*(?:textbf\{)?\s*(?:expert|analyst)\s*#?\s*(\d+)", re.IGNORECASE | re.MULTILINE)
_LIKELIHOOD_RE = re.compile(
    rf"likelihood{_MARKUP}(?:\s+of\s+success)?{_MARKUP}\s*(?:[:=]|\bis\b)?\s*{_MARKUP}\s*{_NUM}",
    re.IGNORECASE)

_SCORE_LABEL_RE = re.compile(
    rf"(?:overall\s+likelihood\s+of\s+success|\b(?:founder|idea|fit|final|overall)\s+score)"
    rf"[^\d]{{0,40}}?(?<![\w.]){_NUM}", re.IGNORECASE)
_STANDALONE_RE = re.compile(rf"(?<![\w.]){_NUM}(?![\w]|\.\d)")

_REFUSAL_RE = re.compile(
    r"\b(?:unethical|illegal|deceiv\w*|deception|fraudulent|scam\w*|"
    r"i\s+(?:cannot|can't|can not|won't|will\s+not)\s+(?:help|assist|evaluate|rate|provide|support))",
    re.IGNORECASE)

_LATEX_ENV_RE = re.compile(r"^\s*\\(?:begin|end)\{\w+\}\s*$")
_PROS_CONS_RE = re.compile(r"^[\W_]*(pros|cons)\W*:?\s*(.*)$", re.IGNORECASE)


@dataclass(frozen=True)
class FeatureList:
    items: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.items)

    @property
    def within_stated_range(self) -> bool:
        lo, hi = STATED_FEATURE_RANGE
        return lo <= len(self.items) <= hi


@dataclass(frozen=True)
class StepRating:
    feature: str
    expert_likelihoods: tuple[float, ...]
    agreed_note: str = ""

    @property
    def mean(self) -> float:
        return sum(self.expert_likelihoods) / len(self.expert_likelihoods)

    def to_dict(self) -> dict:
        return {"feature": self.feature, "expert_likelihoods": list(self.expert_likelihoods),
                "agreed_note": self.agreed_note}


@dataclass
class ProsConsEntry:
    subject_id: str
    pros: list[str] = field(default_factory=list)
    cons: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"subject": self.subject_id, "pros": list(self.pros), "cons": list(self.cons)}


def _clean_item(body: str) -> str:
    body = re.sub(r"\\textbf\{([^}]*)\}", r"\1", body)
    body = body.replace("**", "").replace("__", "")
    return body.strip().strip("`").strip()


def _list_blocks(lines: list[str]) -> list[tuple[int, list[str]]]:
    """Contiguous list blocks as (start line, items); blank lines do not break a block."""
    blocks: list[tuple[int, list[str]]] = []
    current: list[str] | None = None
    base_indent = 0
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        m = _ITEM_RE.match(line)
        if m:
            indent = len(m.group("indent").expandtabs())
            if current is None:
                current, base_indent = [], indent
                blocks.append((i, current))
            if indent > base_indent and current:
                current[-1] += " " + _clean_item(m.group("body"))
            else:
                current.append(_clean_item(m.group("body")))
        elif current is not None and line[:1].isspace() and current:
            current[-1] += " " + line.strip()
        else:
            current = None
    return [(s, b) for s, b in blocks if b]


def parse_feature_list(text: str) -> FeatureList:
    """Items of the final list in ``text``.

    Prefers the first list after the last "Successful ... Features" heading,
    otherwise the last contiguous numbered/bulleted list.
    """
    lines = (text or "").splitlines()
    blocks = _list_blocks(lines)
    if not blocks:
        raise NoListFound("no numbered or bulleted list in response")
    heading = None
    for i, line in enumerate(lines):
        if _FEATURE_HEADING_RE.search(line) and not _ITEM_RE.match(line):
            heading = i
    if heading is not None:
        after = [b for s, b in blocks if s > heading]
        if after:
            return FeatureList(tuple(after[0]))
    return FeatureList(tuple(blocks[-1][1]))


def check_feature_count(features: FeatureList, bounds: tuple[int, int] = ACCEPTED_FEATURE_RANGE) -> FeatureList:
    lo, hi = bounds
    if not lo <= len(features) <= hi:
        raise FeatureCountOutOfRange(len(features), lo, hi)
    return features


def _to_unit(number: str, percent: str | None, context: str) -> float:
    value = float(number)
    if percent:
        value /= 100.0
    if not 0.0 <= value <= 1.0:
        raise ValueOutOfRange(f"{context}: likelihood {number}{percent or ''} is outside [0, 1]")
    return value


def _sections(text: str) -> list[tuple[str, str]]:
    heads = list(_STEP_RE.finditer(text))
    if not heads:
        return [("", text)]
    out = []
    for j, m in enumerate(heads):
        end = heads[j + 1].start() if j + 1 < len(heads) else len(text)
        title = _clean_item(m.group(2)).lstrip(":").strip().rstrip("}").strip()
        out.append((title or f"Step {m.group(1)}", text[m.end():end]))
    return out


def parse_step_ratings(text: str, experts: int = 3) -> list[StepRating]:
    """Per-step expert likelihoods from a rating transcript."""
    text = text or ""
    if not _LIKELIHOOD_RE.search(text):
        raise MissingExpert("no likelihood values found in response")
    ratings = []
    for title, body in _sections(text):
        label = title or "overall"
        markers = list(_EXPERT_RE.finditer(body))
        values: dict[str, float] = {}
        tail_start = 0
        if markers:
            for j, m in enumerate(markers):
                end = markers[j + 1].start() if j + 1 < len(markers) else len(body)
                hit = _LIKELIHOOD_RE.search(body, m.end(), end)
                if hit:
                    values[m.group(1)] = _to_unit(hit.group(1), hit.group(2), label)
                    tail_start = max(tail_start, hit.end())
        else:
            for n, hit in enumerate(_LIKELIHOOD_RE.finditer(body)):
                if n >= experts:
                    break
                values[str(n + 1)] = _to_unit(hit.group(1), hit.group(2), label)
                tail_start = hit.end()
        if len(values) < experts:
            raise MissingExpert(f"{label}: found {len(values)} expert likelihood(s), expected {experts}")
        ordered = [values[k] for k in sorted(values, key=int)][:experts]
        note = re.sub(r"^[\W_]+", "", body[tail_start:]).strip()
        ratings.append(StepRating(label, tuple(ordered), note))
    return ratings


def is_refusal(text: str) -> bool:
    return bool(_REFUSAL_RE.search(text or ""))


def render_final_score(score: float) -> str:
    return f"Overall likelihood of success: {score}"


def parse_final_score(text: str) -> float:
    """Final score in [0, 1].

    Takes the last in-range number right after "overall likelihood of success"
    (or a "founder/idea/fit score" label); failing that, a refusal maps to 0,
    and otherwise the last standalone number in [0, 1] is used.
    """
    text = text or ""
    labelled = [_unit_or_none(m) for m in _SCORE_LABEL_RE.finditer(text)]
    labelled = [v for v in labelled if v is not None]
    if labelled:
        return labelled[-1]
    if is_refusal(text):
        return 0.0
    loose = [_unit_or_none(m) for m in _STANDALONE_RE.finditer(text)]
    loose = [v for v in loose if v is not None]
    if loose:
        return loose[-1]
    raise NoScoreFound("no score in [0, 1] found in response")


def _unit_or_none(m: re.Match) -> float | None:
    value = float(m.group(1))
    if m.group(2):
        value /= 100.0
    return value if 0.0 <= value <= 1.0 else None


def parse_pros_cons(text: str) -> list[ProsConsEntry]:
    """Best-effort extraction of per-profile pros/cons lists from a Step-1 transcript."""
    lines = [ln.rstrip() for ln in (text or "").splitlines() if not _LATEX_ENV_RE.match(ln)]
    entries: dict[str, ProsConsEntry] = {}
    subject: str | None = None
    mode: str | None = None
    nonblank = [i for i, ln in enumerate(lines) if ln.strip()]
    for pos, i in enumerate(nonblank):
        line = lines[i]
        pc = _PROS_CONS_RE.match(line)
        if pc and not _ITEM_RE.match(line):
            mode = pc.group(1).lower()
            if subject is not None and pc.group(2).strip():
                _add(entries, subject, mode, _clean_item(pc.group(2)))
            continue
        item = _ITEM_RE.match(line)
        if item and subject is not None and mode is not None:
            _add(entries, subject, mode, _clean_item(item.group("body")))
            continue
        nxt = lines[nonblank[pos + 1]] if pos + 1 < len(nonblank) else ""
        if _PROS_CONS_RE.match(nxt) and not _ITEM_RE.match(nxt):
            subject = _clean_item(line).rstrip(":").strip()
            mode = None
        elif not item:
            mode = None
    return [e for e in entries.values() if e.pros or e.cons]


def _add(entries: dict[str, ProsConsEntry], subject: str, mode: str, item: str) -> None:
    entry = entries.setdefault(subject, ProsConsEntry(subject))
    target = entry.pros if mode == "pros" else entry.cons
    if item and item not in target:
        target.append(item)

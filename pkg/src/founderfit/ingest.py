"""Ingestion of raw founder/company CSVs into normalized records.

Degree levels and subject categories come from fixed keyword tables; the
defaults below are the published tables, and any of them can be replaced by
a JSON mapping file (see ``MappingConfig.from_file``).
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

from .errors import ConfigError, DuplicateId, MissingColumn, ProfileParseError


class Outcome(str, Enum):
    SUCCESS = "Success"
    FAILURE = "Failure"

    @classmethod
    def parse(cls, value: "str | Outcome") -> "Outcome":
        if isinstance(value, Outcome):
            return value
        v = str(value).strip().lower()
        if v in ("success", "successful", "s"):
            return cls.SUCCESS
        if v in ("fail", "failure", "failed", "unsuccessful", "f"):
            return cls.FAILURE
        raise ValueError(f"unknown outcome label {value!r}")


DEFAULT_DEGREE_KEYWORDS: list[tuple[str, int]] = [
    ("bachelor", 1), ("beng", 1), ("b.a.", 1), ("b.a", 1), ("bs", 1),
    ("master", 2), ("msc", 2), ("m.sc", 2), ("m.sc.", 2),
    ("ma", 2), ("m.a.", 2), ("meng", 2), ("mba", 2),
    ("phd", 3), ("doctor of philosophy", 3),
]

DEFAULT_SUBJECT_KEYWORDS: list[tuple[str, int]] = [
    ("math", 0), ("quant", 0),
    ("bio", 1), ("molecular", 1), ("cellular", 1), ("developmental", 1),
    ("physiology", 1), ("anatomy", 1), ("immunology", 1), ("genetics", 1),
    ("chemi", 2), ("medic", 2), ("pharmacology", 2),
    ("accounting", 3), ("banking", 3), ("actuarial science", 3), ("finance", 3),
    ("economics", 3),
    ("business", 4), ("management", 4), ("entrepreneurship", 4), ("hotel", 4),
    ("leadership", 4),
    ("sales", 5), ("distribution", 5), ("marketing", 5),
    ("computer", 6), ("machine learning", 6), ("artificial intelligence", 6),
    ("hci", 6), ("software engineer", 6), ("telecommunications", 6),
    ("system", 6), ("information", 6), ("technology", 6),
    ("english", 7), ("arts", 7), ("digital media", 7), ("film", 7), ("history", 7),
    ("journalism", 7), ("philosophy", 7), ("multimedia", 7), ("counseling", 7),
    ("directing", 7), ("film", 7), ("liberal", 7),
    ("political", 8), ("sociology", 8), ("law", 8), ("consulting", 8),
    ("architecture", 9), ("design", 9), ("urban planning", 9),
    ("engineer", 10), ("robotics", 10), ("mechanical", 10), ("system", 10),
    ("electrical", 10), ("physics", 10),
    ("military", 11),
]

DEGREE_LABELS = {0: "N/A", 1: "Bachelors", 2: "Masters", 3: "PhD"}

SUBJECT_LABELS = {
    0: "Mathematics",
    1: "Life sciences",
    2: "Chemistry and medicine",
    3: "Finance and economics",
    4: "Business and management",
    5: "Sales and marketing",
    6: "Computer science and IT",
    7: "Arts and humanities",
    8: "Social sciences and law",
    9: "Architecture and design",
    10: "Engineering and physics",
    11: "Military",
}

# Joins multiple degree/field texts of one profile; contains no keyword characters
# so concatenated fields never form a keyword across the seam.
FIELD_SEPARATOR = " | "


def load_default_institutions() -> list[str]:
    text = resources.files("founderfit.data").joinpath("top_institutions.txt").read_text("utf-8")
    return _read_lines(text)


def _read_lines(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


@dataclass(frozen=True)
class ProfileFieldMap:
    """Where to find things inside a scraped profile JSON.

    Each entry is a list of candidate dotted paths; the first one that yields
    a non-empty value wins.
    """

    description: tuple[str, ...] = ("description", "summary", "about", "headline")
    education: tuple[str, ...] = ("education", "educations")
    degree: tuple[str, ...] = ("degree", "degree_name")
    field_of_study: tuple[str, ...] = ("field", "field_of_study", "major", "fields")
    school: tuple[str, ...] = ("school", "school_name", "institution", "name")
    employment: tuple[str, ...] = ("experience", "experiences", "employment", "jobs", "positions")
    company: tuple[str, ...] = ("company", "company_name", "organization")
    company_description: tuple[str, ...] = ("company_description", "company_desc", "description")
    title: tuple[str, ...] = ("title", "role", "position")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ProfileFieldMap":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown profile field keys: {sorted(unknown)}")
        kwargs = {}
        for k, v in data.items():
            kwargs[k] = (v,) if isinstance(v, str) else tuple(v)
        return cls(**kwargs)

    def to_dict(self) -> dict[str, list[str]]:
        return {k: list(getattr(self, k)) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class MappingConfig:
    degree_keywords: tuple[tuple[str, int], ...] = tuple(DEFAULT_DEGREE_KEYWORDS)
    subject_keywords: tuple[tuple[str, int], ...] = tuple(DEFAULT_SUBJECT_KEYWORDS)
    top_institutions: tuple[str, ...] = field(default_factory=lambda: tuple(load_default_institutions()))
    profile_fields: ProfileFieldMap = field(default_factory=ProfileFieldMap)

    def __post_init__(self):
        for kw, level in self.degree_keywords:
            if kw != kw.lower() or not 0 <= level <= 3:
                raise ConfigError(f"bad degree keyword entry {(kw, level)!r}")
        for kw, cat in self.subject_keywords:
            if kw != kw.lower() or not 0 <= cat <= 11:
                raise ConfigError(f"bad subject keyword entry {(kw, cat)!r}")

    @cached_property
    def _degree_patterns(self) -> list[tuple[re.Pattern, int]]:
        return [(_keyword_regex(kw, abbreviation=_is_abbreviation(kw)), lvl)
                for kw, lvl in self.degree_keywords]

    @cached_property
    def _subject_patterns(self) -> list[tuple[str, re.Pattern, int]]:
        return [(kw, re.compile(re.escape(kw)), cat) for kw, cat in self.subject_keywords]

    @cached_property
    def _institution_patterns(self) -> list[re.Pattern]:
        return [_keyword_regex(n.lower(), abbreviation=len(n) <= 4) for n in self.top_institutions]

    @classmethod
    def from_dict(cls, data: dict[str, Any], institutions_path: str | Path | None = None) -> "MappingConfig":
        kwargs: dict[str, Any] = {}
        if "degree_keywords" in data:
            kwargs["degree_keywords"] = tuple(
                (kw.lower(), int(level)) for level, kws in data["degree_keywords"].items() for kw in kws)
        if "subject_keywords" in data:
            kwargs["subject_keywords"] = tuple(
                (kw.lower(), int(cat)) for cat, kws in data["subject_keywords"].items() for kw in kws)
        if institutions_path is not None:
            kwargs["top_institutions"] = tuple(_read_lines(Path(institutions_path).read_text("utf-8")))
        elif "top_institutions" in data:
            kwargs["top_institutions"] = tuple(data["top_institutions"])
        if "profile_fields" in data:
            kwargs["profile_fields"] = ProfileFieldMap.from_dict(data["profile_fields"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path | None = None,
                  institutions_path: str | Path | None = None) -> "MappingConfig":
        data = json.loads(Path(path).read_text("utf-8")) if path else {}
        return cls.from_dict(data, institutions_path)

    def to_dict(self, include_institutions: bool = True) -> dict[str, Any]:
        deg: dict[str, list[str]] = {}
        for kw, lvl in self.degree_keywords:
            deg.setdefault(str(lvl), []).append(kw)
        subj: dict[str, list[str]] = {}
        for kw, cat in self.subject_keywords:
            subj.setdefault(str(cat), []).append(kw)
        out: dict[str, Any] = {"degree_keywords": deg, "subject_keywords": subj,
                               "profile_fields": self.profile_fields.to_dict()}
        if include_institutions:
            out["top_institutions"] = list(self.top_institutions)
        return out


def _is_abbreviation(keyword: str) -> bool:
    return len(keyword) <= 4 or "." in keyword


def _keyword_regex(keyword: str, abbreviation: bool) -> re.Pattern:
    body = re.escape(keyword)
    if abbreviation:
        return re.compile(rf"(?<![a-z0-9]){body}(?![a-z0-9])")
    return re.compile(body)


_DEFAULT_CONFIG: MappingConfig | None = None


def default_config() -> MappingConfig:
    global _DEFAULT_CONFIG
    if _DEFAULT_CONFIG is None:
        _DEFAULT_CONFIG = MappingConfig()
    return _DEFAULT_CONFIG


def map_degree(text: str, config: MappingConfig | None = None) -> int:
    """Highest degree level (0-3) whose keyword occurs in ``text``."""
    config = config or default_config()
    low = (text or "").lower()
    best = 0
    for pattern, level in config._degree_patterns:
        if level > best and pattern.search(low):
            best = level
    return best


def map_subjects(text: str, config: MappingConfig | None = None) -> frozenset[int]:
    """All subject categories matched in ``text``.

    A hit lying strictly inside the hit of a longer keyword from another
    category is dropped, so "software engineer" stays in its own category
    instead of also counting as "engineer".
    """
    config = config or default_config()
    low = (text or "").lower()
    hits: list[tuple[int, int, int]] = []
    for _kw, pattern, cat in config._subject_patterns:
        for m in pattern.finditer(low):
            hits.append((m.start(), m.end(), cat))
    cats = set()
    for s, e, cat in hits:
        shadowed = any(s2 <= s and e <= e2 and (e2 - s2) > (e - s) and c2 != cat
                       for s2, e2, c2 in hits)
        if not shadowed:
            cats.add(cat)
    return frozenset(cats)


def is_top_institution(name: str, config: MappingConfig | None = None) -> bool:
    config = config or default_config()
    low = (name or "").lower()
    return bool(low) and any(p.search(low) for p in config._institution_patterns)


@dataclass(frozen=True)
class RawFounderRow:
    linkedin_url: str
    json_string: str


@dataclass(frozen=True)
class RawCompanyRow:
    org_uuid: str
    long_description: str


@dataclass(frozen=True)
class FounderRecord:
    id: str
    description: str
    highest_degree: int
    top_institution: bool
    majors: frozenset[int]
    prior_jobs: str
    outcome: Outcome

    def __post_init__(self):
        if self.highest_degree not in (0, 1, 2, 3):
            raise ValueError(f"highest_degree out of range: {self.highest_degree}")
        object.__setattr__(self, "majors", frozenset(int(m) for m in self.majors))
        if not self.majors <= frozenset(range(12)):
            raise ValueError(f"majors out of range: {sorted(self.majors)}")
        object.__setattr__(self, "outcome", Outcome.parse(self.outcome))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "description": self.description,
            "highest_degree": self.highest_degree,
            "top_institution": self.top_institution,
            "majors": sorted(self.majors),
            "prior_jobs": self.prior_jobs,
            "outcome": self.outcome.value,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FounderRecord":
        return cls(
            id=str(d["id"]),
            description=str(d.get("description", "")),
            highest_degree=int(d.get("highest_degree", 0)),
            top_institution=bool(d.get("top_institution", False)),
            majors=frozenset(d.get("majors", ())),
            prior_jobs=str(d.get("prior_jobs", "")),
            outcome=Outcome.parse(d.get("outcome", "Failure")),
        )


@dataclass(frozen=True)
class IdeaRecord:
    id: str
    description: str
    outcome: Outcome

    def __post_init__(self):
        if not self.description.strip():
            raise ValueError("idea description must be non-empty")
        object.__setattr__(self, "outcome", Outcome.parse(self.outcome))

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "description": self.description, "outcome": self.outcome.value}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "IdeaRecord":
        return cls(id=str(d["id"]), description=str(d["description"]),
                   outcome=Outcome.parse(d["outcome"]))


@dataclass(frozen=True)
class Reject:
    source: str
    line: int
    record_id: str
    reason: str

    def to_dict(self) -> dict[str, Any]:
        return {"source": self.source, "line": self.line, "id": self.record_id, "reason": self.reason}


def _read_csv(path: str | Path, id_col: str, text_col: str, empty_reason: str,
              rejects: list[Reject] | None) -> list[tuple[str, str]]:
    path = Path(path)
    rows: list[tuple[str, str]] = []
    seen: set[str] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (id_col, text_col):
            if col not in header:
                raise MissingColumn(path, col)
        for raw in reader:
            line = reader.line_num
            rid = (raw.get(id_col) or "").strip()
            text = raw.get(text_col)
            reason = None
            if text is None or None in raw:
                reason = "malformed row"
            elif not rid:
                reason = f"missing {id_col}"
            elif not text.strip():
                reason = empty_reason
            if reason is not None:
                if rejects is not None:
                    rejects.append(Reject(str(path), line, rid, reason))
                continue
            if rid in seen:
                raise DuplicateId(path, rid)
            seen.add(rid)
            rows.append((rid, text))
    return rows


def parse_founder_csv(path: str | Path, outcome: Outcome | str | None = None,
                      rejects: list[Reject] | None = None) -> list[RawFounderRow]:
    """Read a founders CSV (``linkedin_url``, ``json_string``).

    Rows that cannot be used are appended to ``rejects`` with a reason.
    ``outcome`` is accepted for symmetry with ``parse_company_csv``; labels are
    attached later by ``normalize_founder``.
    """
    return [RawFounderRow(rid, text)
            for rid, text in _read_csv(path, "linkedin_url", "json_string", "empty profile", rejects)]


def parse_company_csv(path: str | Path, outcome: Outcome | str,
                      rejects: list[Reject] | None = None) -> list[IdeaRecord]:
    outcome = Outcome.parse(outcome)
    return [IdeaRecord(rid, text.strip(), outcome)
            for rid, text in _read_csv(path, "org_uuid", "long_description", "empty description", rejects)]


def _get_path(obj: Any, path: str) -> Any:
    for part in path.split("."):
        if isinstance(obj, dict):
            obj = obj.get(part)
        else:
            return None
    return obj


def _first(obj: Any, paths: Iterable[str]) -> Any:
    for p in paths:
        v = _get_path(obj, p)
        if v not in (None, "", [], {}):
            return v
    return None


def _as_text(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return FIELD_SEPARATOR.join(_as_text(v) for v in value if v not in (None, ""))
    if isinstance(value, dict):
        return _as_text(value.get("name"))
    return str(value).strip()


def _as_list(value: Any) -> list:
    if value is None:
        return []
    if isinstance(value, list):
        return value
    return [value]


def format_job(company: str, description: str, title: str) -> str:
    item = company
    if description:
        item += f"({description})"
    if title:
        item += f" as {title}" if item else title
    return item


def normalize_founder(row: RawFounderRow, config: MappingConfig | None = None,
                      outcome: Outcome | str = Outcome.FAILURE) -> FounderRecord:
    config = config or default_config()
    fm = config.profile_fields
    try:
        profile = json.loads(row.json_string)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ProfileParseError(f"unparseable profile JSON: {exc}") from exc
    if not isinstance(profile, dict):
        raise ProfileParseError(f"profile JSON is a {type(profile).__name__}, expected an object")

    description = _as_text(_first(profile, fm.description))

    degree = 0
    majors: set[int] = set()
    top = False
    for entry in _as_list(_first(profile, fm.education)):
        if not isinstance(entry, dict):
            continue
        level = map_degree(_as_text(_first(entry, fm.degree)), config)
        degree = max(degree, level)
        if level > 0:
            majors |= map_subjects(_as_text(_first(entry, fm.field_of_study)), config)
        if not top and is_top_institution(_as_text(_first(entry, fm.school)), config):
            top = True

    jobs = []
    for entry in _as_list(_first(profile, fm.employment)):
        if not isinstance(entry, dict):
            continue
        item = format_job(_as_text(_first(entry, fm.company)),
                          _as_text(_first(entry, fm.company_description)),
                          _as_text(_first(entry, fm.title)))
        if item:
            jobs.append(item)

    return FounderRecord(
        id=row.linkedin_url,
        description=description,
        highest_degree=degree,
        top_institution=top,
        majors=frozenset(majors),
        prior_jobs=", ".join(jobs),
        outcome=Outcome.parse(outcome),
    )


def normalize_founders(rows: Iterable[RawFounderRow], config: MappingConfig | None,
                       outcome: Outcome | str, rejects: list[Reject], source: str = "") -> list[FounderRecord]:
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(normalize_founder(row, config, outcome))
        except ProfileParseError as exc:
            rejects.append(Reject(source, i + 2, row.linkedin_url, str(exc)))
    return out


def render_founder_profile(record: FounderRecord) -> str:
    """Human-readable profile block shown to the analysts."""
    majors = ", ".join(SUBJECT_LABELS[m] for m in sorted(record.majors)) or "N/A"
    return "\n".join([
        f"Founder description: {record.description or 'N/A'}",
        f"Highest level of degree obtained: {DEGREE_LABELS[record.highest_degree]}",
        f"Did the founder go to a top university: {'Yes' if record.top_institution else 'No'}",
        f"The subjects studied at university (only degree awarding subjects): {majors}",
        f"The jobs worked prior to founding: {record.prior_jobs or 'N/A'}",
    ])


def write_jsonl(path: str | Path, items: Iterable[dict[str, Any]]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item, sort_keys=True, ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]

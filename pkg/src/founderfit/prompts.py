"""Prompt templates with named placeholders and the builders for each stage."""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import Sequence

from .errors import ConfigError, EmptyPanel
from .ingest import Outcome

ETHICS_CLAUSE = "Any unethical or illegal business idea must receive a score of 0."
ANALYST_DECORATOR = ("Imagine three different Venture Capital analysts are trying to find "
                     "the successful features")

TEMPLATE_NAMES = (
    "founder_features", "idea_features", "founder_rating", "idea_rating", "fit_rating",
    "extraction", "summary",
    "cot_founder_features", "cot_idea_features", "cot_founder_rating", "cot_idea_rating",
)
PLACEHOLDERS = frozenset({"panel", "subject", "features", "ethics_clause", "idea", "transcript"})
_PLACEHOLDER_RE = re.compile(r"\{(\w+)\}")


def _default_template(name: str) -> str:
    return (resources.files("founderfit.data") / "templates" / f"{name}.txt").read_text("utf-8")


class PromptTemplates:
    """Default templates, optionally overridden file-by-file from a directory."""

    def __init__(self, directory: str | Path | None = None):
        self.texts: dict[str, str] = {}
        for name in TEMPLATE_NAMES:
            override = Path(directory) / f"{name}.txt" if directory else None
            text = override.read_text("utf-8") if override and override.exists() else _default_template(name)
            unknown = set(_PLACEHOLDER_RE.findall(text)) - PLACEHOLDERS
            if unknown:
                raise ConfigError(f"template {name!r} uses unknown placeholders {sorted(unknown)}")
            self.texts[name] = text

    def render(self, name: str, **values: str) -> str:
        text = self.texts[name]

        def sub(m: re.Match) -> str:
            key = m.group(1)
            if key not in values:
                raise ConfigError(f"template {name!r} needs a value for {{{key}}}")
            return values[key]

        out = _PLACEHOLDER_RE.sub(sub, text)
        out = "\n".join(line.rstrip() for line in out.splitlines())
        return re.sub(r"\n{3,}", "\n\n", out).strip()

    def dump(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, text in self.texts.items():
            p = directory / f"{name}.txt"
            p.write_text(text, encoding="utf-8")
            paths.append(p)
        return paths


_DEFAULT: PromptTemplates | None = None


def default_templates() -> PromptTemplates:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = PromptTemplates()
    return _DEFAULT


def load_fit_features(path: str | Path | None = None) -> list[str]:
    if path is None:
        text = (resources.files("founderfit.data") / "fit_features.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    items = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not items:
        raise ConfigError("fit feature checklist is empty")
    return items


def _label(outcome: Outcome) -> str:
    return "Successful" if Outcome.parse(outcome) is Outcome.SUCCESS else "Unsuccessful"


def render_panel(panel: Sequence[tuple[str, Outcome]], kind: str) -> str:
    noun = "Founder" if kind == "founder" else "Idea"
    return "\n\n".join(f"{noun} {i} ({_label(o)}):\n{text}" for i, (text, o) in enumerate(panel, 1))


def render_steps(features: Sequence[str]) -> str:
    return "\n".join(f"Step {i}: {f}" for i, f in enumerate(features, 1))


def _ethics(kind: str) -> str:
    return ETHICS_CLAUSE if kind in ("idea", "fit") else ""


def _check_kind(kind: str) -> None:
    if kind not in ("founder", "idea"):
        raise ValueError(f"kind must be 'founder' or 'idea', got {kind!r}")


def build_feature_prompt(panel: Sequence[tuple[str, Outcome]], kind: str, strategy: str = "tot",
                         templates: PromptTemplates | None = None) -> str:
    """Step-1 prompt: generalize successful features from labelled comparison profiles."""
    _check_kind(kind)
    if not panel:
        raise EmptyPanel("feature prompt needs at least one comparison profile")
    outcomes = {Outcome.parse(o) for _, o in panel}
    if len(panel) >= 2 and len(outcomes) < 2:
        raise ValueError("panel must contain both successful and unsuccessful profiles")
    templates = templates or default_templates()
    name = f"{kind}_features" if strategy == "tot" else f"cot_{kind}_features"
    return templates.render(name, panel=render_panel(panel, kind), ethics_clause=_ethics(kind))


def build_rating_prompt(features: Sequence[str], subject: str, kind: str = "founder", strategy: str = "tot",
                        templates: PromptTemplates | None = None) -> str:
    """Step-2 prompt: rate ``subject`` feature by feature."""
    _check_kind(kind)
    if not features:
        raise ValueError("rating prompt needs at least one feature")
    templates = templates or default_templates()
    name = f"{kind}_rating" if strategy == "tot" else f"cot_{kind}_rating"
    return templates.render(name, subject=subject, features=render_steps(list(features)),
                            ethics_clause=_ethics(kind))


def build_fit_prompt(founder_profile: str, idea_text: str, fit_features: Sequence[str],
                     templates: PromptTemplates | None = None) -> str:
    if not fit_features:
        raise ValueError("fit prompt needs at least one fit feature")
    templates = templates or default_templates()
    return templates.render("fit_rating", subject=founder_profile, idea=idea_text,
                            features=render_steps(list(fit_features)), ethics_clause=_ethics("fit"))


def build_extraction_prompt(transcript: str, templates: PromptTemplates | None = None) -> str:
    return (templates or default_templates()).render("extraction", transcript=transcript)


def build_summary_prompt(transcript: str, templates: PromptTemplates | None = None) -> str:
    return (templates or default_templates()).render("summary", transcript=transcript)


def build_feature_reprompt(original_prompt: str, previous: str, count: int | None) -> str:
    problem = ("did not contain a bullet-point list" if count is None
               else f"listed {count} features")
    return (f"{original_prompt}\n\nA previous answer to this request {problem}:\n\n{previous}\n\n"
            "Answer again and end with a list of 4 to 6 bullet points.")

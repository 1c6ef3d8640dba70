"""Evaluation report: versioned JSON document and a Markdown rendering."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

from . import __version__
from .errors import SchemaVersionMismatch
from .pipeline import STAGES, EvaluationResult

SCHEMA_VERSION = 1


def _founder_input(record) -> dict:
    d = record.to_dict()
    d.pop("outcome", None)  # unknown for the founder being evaluated
    return d


def build_report(result: EvaluationResult, config_hash: str, include_transcripts: bool = True,
                 timestamps: dict[str, str] | None = None, extra_inputs: dict[str, Any] | None = None) -> dict:
    inputs = {"founder": _founder_input(result.founder_record), "idea": result.idea_text}
    inputs.update(extra_inputs or {})
    report = {
        "schema_version": SCHEMA_VERSION,
        "pipeline_version": __version__,
        "config_hash": config_hash,
        "status": "ok" if result.error is None else "partial",
        "error": result.error,
        "inputs": inputs,
        "neighbors": {
            "founders": result.founder_neighbors.to_dict() if result.founder_neighbors else None,
            "ideas": result.idea_neighbors.to_dict() if result.idea_neighbors else None,
        },
        "founder": result.founder.to_dict() if result.founder else None,
        "idea": result.idea.to_dict() if result.idea else None,
        "fit": result.fit.to_dict() if result.fit else None,
        "scores": result.scores.to_dict() if result.scores else None,
        "warnings": list(result.warnings),
        "stages": [s for s in STAGES if s in result.stages],
        "timestamps": dict(timestamps or {}),
    }
    if include_transcripts:
        report["transcripts"] = [t.to_dict() for t in result.transcripts]
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def without_timestamps(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timestamps"}


def content_key(report_inputs: dict, config_hash: str, index_digest: str) -> str:
    blob = json.dumps({"inputs": report_inputs, "config": config_hash, "index": index_digest},
                      sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def read_report(path: str | Path) -> tuple[str, dict]:
    """Raw text and parsed report; rejects unknown schema versions."""
    text = Path(path).read_text("utf-8")
    report = json.loads(text)
    version = report.get("schema_version") if isinstance(report, dict) else None
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"{path}: report schema_version {version!r}, expected {SCHEMA_VERSION}")
    return text, report


def _fmt(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.2f}"


def _panel_lines(neighbors: dict | None, noun: str) -> list[str]:
    if not neighbors:
        return []
    return [f"- {noun} {m['id']} ({m['outcome']}): similarity {m['score']:.3f}" for m in neighbors["panel"]]


def _branch_lines(title: str, branch: dict | None) -> list[str]:
    if not branch:
        return []
    out = [f"## {title}", ""]
    if branch["features"]:
        out += ["Successful features:", ""]
        out += [f"{i}. {f}" for i, f in enumerate(branch["features"], 1)]
        out.append("")
    for entry in branch.get("pros_cons", []):
        out.append(f"**{entry['subject']}**")
        out += [f"- Pro: {p}" for p in entry["pros"]]
        out += [f"- Con: {c}" for c in entry["cons"]]
        out.append("")
    for i, r in enumerate(branch.get("step_ratings", []), 1):
        vals = ", ".join(f"{v:.2f}" for v in r["expert_likelihoods"])
        out.append(f"- Step {i}: {r['feature']} [{vals}]")
    if branch.get("diagnostic_mean") is not None:
        out += ["", f"Mean of step likelihoods (diagnostic): {branch['diagnostic_mean']:.2f}"]
    if branch.get("refusal"):
        out += ["", "Refusal:", "", "> " + branch["refusal"].strip().replace("\n", "\n> ")]
    for note in branch.get("notes", []):
        out.append(f"- note: {note}")
    out.append("")
    return out


def render_markdown(report: dict) -> str:
    scores = report.get("scores") or {}
    get = report.get
    lines = ["# Founder-idea evaluation", ""]
    if report.get("status") != "ok":
        err = report.get("error") or {}
        lines += [f"**Partial report**: stage `{err.get('stage')}` failed ({err.get('type')}: "
                  f"{err.get('message')})", ""]
    lines += ["## Nearest founders", ""] + _panel_lines((get("neighbors") or {}).get("founders"), "Founder")
    lines += ["", "## Nearest ideas", ""] + _panel_lines((get("neighbors") or {}).get("ideas"), "Idea")
    lines.append("")
    lines += _branch_lines("Founder", get("founder"))
    lines += _branch_lines("Idea", get("idea"))
    fit = get("fit")
    if fit:
        lines += ["## Fit", "", f"Mode: {fit['mode']}"]
        if fit.get("refusal"):
            lines += ["", "> " + fit["refusal"].strip().replace("\n", "\n> ")]
        lines.append("")
    lines += [
        "## Scores",
        "",
        f"Founder score: {_fmt(scores.get('founder', (get('founder') or {}).get('score')))}",
        f"Idea score: {_fmt(scores.get('idea', (get('idea') or {}).get('score')))}",
        f"Fit score: {_fmt(scores.get('fit', (fit or {}).get('score')))}",
        f"Aggregated score: {_fmt(scores.get('aggregate'))}",
        "",
    ]
    if report.get("warnings"):
        lines += ["## Warnings", ""] + [f"- {w}" for w in report["warnings"]] + [""]
    lines += ["Stages: " + ", ".join(report.get("stages", [])), ""]
    return "\n".join(lines)

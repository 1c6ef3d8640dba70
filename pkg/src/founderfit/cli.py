"""``founderfit`` command-line interface.

Exit codes: 0 success, 2 usage or input error, 3 backend or pipeline failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, prompts
from .config import FIT_MODES, OUTPUT_FORMATS, STRATEGIES, PipelineConfig
from .embedding import CachedEmbedder, EmbeddingCache, make_provider
from .errors import (BackendUnavailable, FounderFitError, PipelineStageError, ProfileParseError,
                     ProviderUnavailable)
from .index import build_index, embed_founder, load_index, save_index
from .ingest import (DEGREE_LABELS, SUBJECT_LABELS, FounderRecord, IdeaRecord, MappingConfig, Outcome,
                     RawFounderRow, Reject, map_degree, map_subjects, normalize_founder, normalize_founders,
                     parse_company_csv, parse_founder_csv, read_jsonl, write_jsonl)
from .llm import Gateway, RemoteChatBackend, ScriptedBackend, record_session, replay_session
from .pipeline import EvaluationResult, Evaluator, run_evaluation
from .report import build_report, content_key, dumps, read_report, render_markdown

log = logging.getLogger("founderfit")

EXIT_OK, EXIT_USAGE, EXIT_BACKEND = 0, 2, 3

FOUNDERS_FILE = "founders.jsonl"
IDEAS_FILE = "ideas.jsonl"
REJECTS_FILE = "rejects.jsonl"


class UsageError(Exception):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _require_file(path: str | Path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {p}")
    return p


def _mapping(cfg: PipelineConfig) -> MappingConfig:
    return MappingConfig.from_file(cfg.mapping_path, cfg.institutions_path)


def _file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------- ingest

def cmd_ingest(args, cfg: PipelineConfig) -> int:
    inputs = [(p, Outcome.SUCCESS, "founders") for p in args.founders_success or []]
    inputs += [(p, Outcome.FAILURE, "founders") for p in args.founders_fail or []]
    inputs += [(p, Outcome.SUCCESS, "companies") for p in args.companies_success or []]
    inputs += [(p, Outcome.FAILURE, "companies") for p in args.companies_fail or []]
    if not inputs:
        raise UsageError("give at least one --founders-* or --companies-* file")
    for path, _, _ in inputs:
        _require_file(path)

    mapping = _mapping(cfg)
    rejects: list[Reject] = []
    founders: list[FounderRecord] = []
    ideas: list[IdeaRecord] = []
    for path, outcome, kind in inputs:
        if kind == "founders":
            rows = parse_founder_csv(path, outcome, rejects)
            founders += normalize_founders(rows, mapping, outcome, rejects, source=str(path))
        else:
            ideas += parse_company_csv(path, outcome, rejects)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / FOUNDERS_FILE, (f.to_dict() for f in founders))
    write_jsonl(out / IDEAS_FILE, (i.to_dict() for i in ideas))
    write_jsonl(out / REJECTS_FILE, (r.to_dict() for r in rejects))

    def count(items, outcome):
        return sum(1 for x in items if x.outcome is outcome)

    print(f"{count(founders, Outcome.SUCCESS)} success founders, {count(founders, Outcome.FAILURE)} failure founders")
    print(f"{count(ideas, Outcome.SUCCESS)} success ideas, {count(ideas, Outcome.FAILURE)} failure ideas")
    print(f"{len(rejects)} rejected rows (see {out / REJECTS_FILE})")
    return EXIT_OK


# ---------------------------------------------------------------- index

def _embedder(cfg: PipelineConfig, cache_path: str | Path | None) -> CachedEmbedder:
    return CachedEmbedder(make_provider(cfg.embedding), EmbeddingCache(cache_path))


def _embedder_for_index(cfg: PipelineConfig, index, cache_path) -> CachedEmbedder:
    """Query embedder configured to match the embedding space the index was built with."""
    meta = index.meta.get("embedding") or {}
    fields = {k: meta[k] for k in ("kind", "endpoint", "model_name", "dim", "seed")
              if meta.get(k) is not None}
    return _embedder(replace(cfg, embedding=replace(cfg.embedding, **fields)), cache_path)


def cmd_index_build(args, cfg: PipelineConfig) -> int:
    dataset = Path(args.dataset)
    founders = [FounderRecord.from_dict(d) for d in read_jsonl(_require_file(dataset / FOUNDERS_FILE))]
    ideas = [IdeaRecord.from_dict(d) for d in read_jsonl(_require_file(dataset / IDEAS_FILE))]
    cache = args.cache or dataset / "embedding_cache.jsonl"
    embedder = _embedder(cfg, cache)
    meta = {"embedding": cfg.embedding.public_dict(), "provider_id": embedder.provider_id}
    index = build_index(founders, ideas, embedder, meta)
    save_index(index, args.out)
    print(f"indexed {len(founders)} founders and {len(ideas)} ideas into {args.out}")
    return EXIT_OK


def cmd_index_stats(args, cfg: PipelineConfig) -> int:
    index = load_index(_require_file(args.index))
    stats = index.stats()
    stats["meta"] = index.meta
    print(json.dumps(stats, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_index_query(args, cfg: PipelineConfig) -> int:
    index = load_index(_require_file(args.index))
    embedder = _embedder_for_index(cfg, index, args.cache)
    k = args.k or cfg.k
    out = {}
    if args.idea_text or args.idea_file:
        vec = embedder.embed([_idea_text(args)])[0]
        out["ideas"] = index.top_k_ideas(vec, k).to_dict()
    if args.founder_file or args.founder_text is not None:
        query = embed_founder(_founder_input(args, _mapping(cfg)), embedder)
        out["founders"] = index.top_k_per_class(query, k).to_dict()
    if not out:
        raise UsageError("give an idea (--idea-text/--idea-file) and/or a founder (--founder-file/--founder-text)")
    print(json.dumps(out, sort_keys=True, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- evaluate

def _idea_text(args) -> str:
    if args.idea_file:
        text = _require_file(args.idea_file).read_text("utf-8")
    else:
        text = args.idea_text or ""
    if not text.strip():
        raise UsageError("idea text is empty")
    return text.strip()


def _parse_degree(value: str | None, mapping: MappingConfig) -> int:
    if value is None:
        return 0
    if value.strip().isdigit():
        level = int(value)
        if level not in DEGREE_LABELS:
            raise UsageError(f"--degree must be 0-3, got {value}")
        return level
    return map_degree(value, mapping)


def _parse_majors(value: str | None, mapping: MappingConfig) -> frozenset[int]:
    if not value:
        return frozenset()
    out: set[int] = set()
    for part in (p.strip() for p in value.split(",")):
        if not part:
            continue
        if part.isdigit():
            if int(part) not in SUBJECT_LABELS:
                raise UsageError(f"--majors category out of range: {part}")
            out.add(int(part))
        else:
            out |= map_subjects(part, mapping)
    return frozenset(out)


def _founder_input(args, mapping: MappingConfig) -> FounderRecord:
    """Founder under evaluation; its outcome is unknown and ignored downstream."""
    if args.founder_file:
        data = json.loads(_require_file(args.founder_file).read_text("utf-8"))
        if not isinstance(data, dict):
            raise UsageError(f"{args.founder_file}: expected a JSON object")
        if "highest_degree" in data:
            data.setdefault("id", args.linkedin_url or "query")
            return FounderRecord.from_dict(data)
        # an enriched profile; normalize it the same way as the dataset
        row = RawFounderRow(args.linkedin_url or "query", json.dumps(data))
        return normalize_founder(row, mapping)
    if args.founder_text is None:
        raise UsageError("give --founder-file or --founder-text")
    return FounderRecord(
        id=args.linkedin_url or "query",
        description=args.founder_text.strip(),
        highest_degree=_parse_degree(args.degree, mapping),
        top_institution=bool(args.top_institution),
        majors=_parse_majors(args.majors, mapping),
        prior_jobs=(args.jobs or "").strip(),
        outcome=Outcome.FAILURE,
    )


def _backend(args, cfg: PipelineConfig):
    chosen = [x for x in (args.llm_script, args.replay) if x]
    if len(chosen) > 1:
        raise UsageError("--llm-script and --replay are mutually exclusive")
    if args.llm_script:
        path = _require_file(args.llm_script)
        return ScriptedBackend.from_file(path), {"kind": "scripted", "sha256": _file_digest(path)}
    if args.replay:
        path = _require_file(args.replay)
        return replay_session(path, strict=args.strict), {"kind": "replay", "sha256": _file_digest(path)}
    return RemoteChatBackend(cfg.llm), {"kind": "remote", "model": cfg.llm.model}


def _write_report(report: dict, directory: Path, fmt: str) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "report.json"
    path.write_text(dumps(report), encoding="utf-8")
    if fmt == "markdown":
        (directory / "report.md").write_text(render_markdown(report), encoding="utf-8")
    return path


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    cfg = cfg.with_overrides(fit_mode=args.fit_mode, strategy=args.strategy, output_format=args.format, k=args.k)
    if args.no_transcripts:
        cfg = replace(cfg, include_transcripts=False)
    if args.summary:
        cfg = replace(cfg, summary=True)
    index_path = _require_file(args.index)
    mapping = _mapping(cfg)
    founder = _founder_input(args, mapping)
    idea = _idea_text(args)
    index = load_index(index_path)
    embedder = _embedder_for_index(cfg, index, args.cache)

    backend, llm_source = _backend(args, cfg)
    config_hash = cfg.config_hash()
    extra = {"linkedin_url": args.linkedin_url} if args.linkedin_url else {}
    inputs = {"founder": founder.to_dict(), "idea": idea, "llm_source": llm_source, **extra}
    directory = Path(args.out_dir) / content_key(inputs, config_hash, _file_digest(index_path))
    if (directory / "report.json").exists() and not (args.force or args.record):
        _, cached = read_report(directory / "report.json")
        if cached.get("status") == "ok":
            print(f"report (cached): {directory / 'report.json'}")
            _print_scores(cached)
            return EXIT_OK

    session = record_session(args.record, config_hash) if args.record else None
    gateway = Gateway(backend, max_retries=cfg.llm.max_retries, session=session)
    evaluator = Evaluator(gateway, cfg.llm, prompts.PromptTemplates(cfg.templates_dir), cfg.strategy,
                          prompts.load_fit_features(cfg.fit_features_path), cfg.fit_mode, cfg.summary)
    started = _now()
    code = EXIT_OK
    try:
        result: EvaluationResult = run_evaluation(index, founder, idea, embedder, evaluator, k=cfg.k,
                                                  parallel=cfg.parallel)
    except PipelineStageError as exc:
        result = getattr(exc, "partial", None) or EvaluationResult(founder, idea, error={
            "stage": exc.stage, "type": type(exc.cause).__name__, "message": str(exc.cause)})
        print(f"error: stage {exc.stage} failed: {exc.cause}", file=sys.stderr)
        code = EXIT_BACKEND
    report = build_report(result, config_hash, cfg.include_transcripts,
                          {"started": started, "finished": _now()}, extra)
    path = _write_report(report, directory, cfg.output_format)
    print(f"report: {path}")
    _print_scores(report)
    return code


def _print_scores(report: dict) -> None:
    scores = report.get("scores")
    if scores:
        for label, key in (("Founder", "founder"), ("Idea", "idea"), ("Fit", "fit"), ("Aggregated", "aggregate")):
            print(f"{label} score: {scores[key]:.2f}")


# ---------------------------------------------------------------- report / config

def cmd_report(args, cfg: PipelineConfig) -> int:
    text, report = read_report(_require_file(args.report))
    out = text if args.format == "json" else render_markdown(report)
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    return EXIT_OK


def cmd_config_dump(args, cfg: PipelineConfig) -> int:
    what = args.what
    if what == "mapping":
        text = json.dumps(_mapping(cfg).to_dict(include_institutions=False), indent=2) + "\n"
    elif what == "pipeline":
        text = json.dumps(cfg.public_dict(), sort_keys=True, indent=2) + "\n"
    elif what == "fit-features":
        text = "\n".join(prompts.load_fit_features(cfg.fit_features_path)) + "\n"
    elif what == "institutions":
        text = "\n".join(_mapping(cfg).top_institutions) + "\n"
    else:
        templates = prompts.PromptTemplates(cfg.templates_dir)
        if args.out:
            for p in templates.dump(args.out):
                print(p)
            return EXIT_OK
        text = "".join(f"===== {name} =====\n{body.rstrip()}\n\n" for name, body in templates.texts.items())
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_founder_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("founder under evaluation")
    g.add_argument("--founder-file", help="JSON founder record or enriched profile")
    g.add_argument("--founder-text", help="free-text founder description")
    g.add_argument("--degree", help="highest degree: 0-3 or degree text (e.g. 'MBA')")
    g.add_argument("--top-institution", action="store_true", help="attended a top institution")
    g.add_argument("--majors", help="comma-separated subject categories (0-11) or subject names")
    g.add_argument("--jobs", help="prior jobs, e.g. 'Acme(payments) as CTO, Foo as Engineer'")
    g.add_argument("--linkedin-url", help="profile URL, used only as an identifier")


def _add_idea_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("idea")
    g.add_argument("--idea-text")
    g.add_argument("--idea-file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="founderfit", description="Founder-idea fit evaluation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="pipeline config JSON")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize founder and company CSVs into a dataset directory")
    p.add_argument("--founders-success", action="append", metavar="CSV")
    p.add_argument("--founders-fail", action="append", metavar="CSV")
    p.add_argument("--companies-success", action="append", metavar="CSV")
    p.add_argument("--companies-fail", action="append", metavar="CSV")
    p.add_argument("--out", required=True, help="dataset directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build or inspect a similarity index")
    isub = p.add_subparsers(dest="index_command", required=True)
    q = isub.add_parser("build")
    q.add_argument("dataset", help="dataset directory written by 'ingest'")
    q.add_argument("--out", required=True, help="index file")
    q.add_argument("--cache", help="embedding cache file (default: <dataset>/embedding_cache.jsonl)")
    q.set_defaults(func=cmd_index_build)
    q = isub.add_parser("stats")
    q.add_argument("index")
    q.set_defaults(func=cmd_index_stats)
    q = isub.add_parser("query")
    q.add_argument("index")
    q.add_argument("--k", type=int)
    q.add_argument("--cache")
    _add_founder_args(q)
    _add_idea_args(q)
    q.set_defaults(func=cmd_index_query)

    p = sub.add_parser("evaluate", help="score a founder and idea against the index")
    p.add_argument("--index", required=True)
    _add_founder_args(p)
    _add_idea_args(p)
    g = p.add_argument_group("LLM")
    g.add_argument("--llm-script", help="JSON file of scripted replies (list, or stage tag -> list)")
    g.add_argument("--replay", help="session log to replay")
    g.add_argument("--strict", action=argparse.BooleanOptionalAction, default=True,
                   help="require replayed prompts to match the recording (default: on)")
    g.add_argument("--record", help="write a session log of every exchange")
    p.add_argument("--fit-mode", choices=FIT_MODES)
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--format", choices=OUTPUT_FORMATS)
    p.add_argument("--k", type=int)
    p.add_argument("--summary", action="store_true", help="add a pros/cons summary call per branch")
    p.add_argument("--no-transcripts", action="store_true")
    p.add_argument("--cache", help="embedding cache file")
    p.add_argument("--out-dir", default="reports")
    p.add_argument("--force", action="store_true", help="recompute even if a cached report exists")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render a stored report")
    p.add_argument("report")
    p.add_argument("--format", choices=OUTPUT_FORMATS, default="markdown")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("config", help="show effective configuration")
    csub = p.add_subparsers(dest="config_command", required=True)
    q = csub.add_parser("dump")
    q.add_argument("what", nargs="?", default="pipeline",
                   choices=("pipeline", "mapping", "prompts", "fit-features", "institutions"))
    q.add_argument("--out", help="output file (a directory for 'prompts')")
    q.set_defaults(func=cmd_config_dump)
    return parser


_USAGE_ERRORS = (UsageError, ValueError, OSError, json.JSONDecodeError)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = PipelineConfig.load(args.config)
        return args.func(args, cfg)
    except (BackendUnavailable, ProviderUnavailable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except ProfileParseError as exc:
        print(f"error: founder profile: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FounderFitError, *_USAGE_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

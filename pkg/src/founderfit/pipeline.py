"""Three-step analyst-panel evaluation of founder, idea and founder-idea fit."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import prompts
from .embedding import cosine_similarity
from .errors import (FeatureCountOutOfRange, FounderFitError, NoListFound, NoScoreFound, ParseError,
                     PipelineStageError)
from .index import EmbeddedFounder, NeighborSelection, SimilarityIndex, embed_founder
from .ingest import FounderRecord, render_founder_profile
from .llm import ChatRequest, Gateway, LLMConfig, SamplingParams
from .parsing import (FeatureList, ProsConsEntry, StepRating, check_feature_count, is_refusal,
                      parse_feature_list, parse_final_score, parse_pros_cons, parse_step_ratings)
from .scoring import EvaluationScores, formula_edge

log = logging.getLogger(__name__)

STAGES = ("retrieve-founders", "retrieve-ideas", "founder-features", "founder-rating",
          "idea-features", "idea-rating", "fit", "aggregate")


@dataclass(frozen=True)
class PanelTranscript:
    stage: str
    prompt_text: str
    response_text: str
    parsed: Any

    def to_dict(self) -> dict:
        parsed = self.parsed
        if isinstance(parsed, FeatureList):
            parsed = list(parsed.items)
        elif isinstance(parsed, list):
            parsed = [p.to_dict() if hasattr(p, "to_dict") else p for p in parsed]
        return {"stage": self.stage, "prompt": self.prompt_text, "response": self.response_text,
                "parsed": parsed}


@dataclass
class BranchResult:
    """Outcome of one founder or idea branch."""

    kind: str
    score: float | None = None
    features: FeatureList | None = None
    step_ratings: list[StepRating] = field(default_factory=list)
    pros_cons: list[ProsConsEntry] = field(default_factory=list)
    transcripts: list[PanelTranscript] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    refusal: str | None = None
    completed: list[str] = field(default_factory=list)

    @property
    def diagnostic_mean(self) -> float | None:
        """Mean of per-step expert means; shown next to the model's own score, never used for it."""
        if not self.step_ratings:
            return None
        return float(np.mean([r.mean for r in self.step_ratings]))

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "features": list(self.features.items) if self.features else [],
            "step_ratings": [r.to_dict() for r in self.step_ratings],
            "diagnostic_mean": self.diagnostic_mean,
            "pros_cons": [p.to_dict() for p in self.pros_cons],
            "notes": list(self.notes),
            "refusal": self.refusal,
        }


@dataclass
class FitResult:
    mode: str
    score: float | None = None
    features: list[str] = field(default_factory=list)
    step_ratings: list[StepRating] = field(default_factory=list)
    transcripts: list[PanelTranscript] = field(default_factory=list)
    refusal: str | None = None

    def to_dict(self) -> dict:
        return {"mode": self.mode, "score": self.score, "features": list(self.features),
                "step_ratings": [r.to_dict() for r in self.step_ratings], "refusal": self.refusal}


@dataclass
class EvaluationResult:
    founder_record: FounderRecord
    idea_text: str
    founder_neighbors: NeighborSelection | None = None
    idea_neighbors: NeighborSelection | None = None
    founder: BranchResult | None = None
    idea: BranchResult | None = None
    fit: FitResult | None = None
    scores: EvaluationScores | None = None
    warnings: list[str] = field(default_factory=list)
    stages: list[str] = field(default_factory=list)
    error: dict | None = None

    @property
    def transcripts(self) -> list[PanelTranscript]:
        out: list[PanelTranscript] = []
        for part in (self.founder, self.idea, self.fit):
            if part is not None:
                out += part.transcripts
        return out


def _check_unit(score: float, stage: str) -> float:
    if not 0.0 <= score <= 1.0:
        raise PipelineStageError(stage, ValueError(f"score {score} outside [0, 1]"))
    return score


class Evaluator:
    """Runs the prompting protocol against a ``Gateway``."""

    def __init__(self, gateway: Gateway, llm_config: LLMConfig | None = None,
                 templates: prompts.PromptTemplates | None = None, strategy: str = "tot",
                 fit_features: Sequence[str] | None = None, fit_mode: str = "llm", summary: bool = False):
        if strategy not in ("tot", "cot"):
            raise ValueError(f"unknown strategy {strategy!r}")
        if fit_mode not in ("llm", "embedding"):
            raise ValueError(f"unknown fit mode {fit_mode!r}")
        self.gateway = gateway
        self.llm = llm_config or LLMConfig()
        self.templates = templates or prompts.default_templates()
        self.strategy = strategy
        self.fit_features = list(fit_features) if fit_features is not None else prompts.load_fit_features()
        self.fit_mode = fit_mode
        self.summary = summary
        self.experts = 3 if strategy == "tot" else 1

    def _ask(self, tag: str, text: str, sampling: SamplingParams) -> str:
        try:
            return self.gateway.complete(ChatRequest("", text, sampling, tag)).response_text
        except FounderFitError as exc:
            raise PipelineStageError(tag, exc) from exc

    def _features(self, kind: str, panel: Sequence[tuple[str, Any]], out: BranchResult) -> FeatureList:
        tag = f"{kind}_features"
        prompt = prompts.build_feature_prompt(panel, kind, self.strategy, self.templates)
        response = self._ask(tag, prompt, self.llm.feature_sampling)
        try:
            features = check_feature_count(parse_feature_list(response))
        except (NoListFound, FeatureCountOutOfRange) as first:
            count = getattr(first, "count", None)
            out.notes.append(f"{tag}: first answer rejected ({first}); reprompted once")
            out.transcripts.append(PanelTranscript(tag, prompt, response, None))
            prompt = prompts.build_feature_reprompt(prompt, response, count)
            response = self._ask(tag, prompt, self.llm.feature_sampling)
            try:
                features = check_feature_count(parse_feature_list(response))
            except ParseError as exc:
                raise PipelineStageError(tag, exc) from exc
        if not features.within_stated_range:
            out.notes.append(f"{tag}: {len(features)} features returned, outside the requested 4-6; accepted")
        out.transcripts.append(PanelTranscript(tag, prompt, response, features))
        out.features = features
        out.pros_cons = parse_pros_cons(response)
        if self.summary:
            summary_prompt = prompts.build_summary_prompt(response, self.templates)
            summary = self._ask("summary", summary_prompt, self.llm.extraction_sampling)
            out.transcripts.append(PanelTranscript("summary", summary_prompt, summary, None))
            out.pros_cons = parse_pros_cons(summary) or out.pros_cons
        return features

    def _final(self, kind: str, transcript: str, out) -> float:
        tag = f"{kind}_final"
        prompt = prompts.build_extraction_prompt(transcript, self.templates)
        for attempt in range(2):
            response = self._ask(tag, prompt, self.llm.extraction_sampling)
            try:
                score = parse_final_score(response)
            except NoScoreFound as exc:
                out.transcripts.append(PanelTranscript(tag, prompt, response, None))
                if attempt == 1:
                    raise PipelineStageError(tag, exc) from exc
                continue
            out.transcripts.append(PanelTranscript(tag, prompt, response, score))
            return _check_unit(score, tag)
        raise AssertionError("unreachable")

    def _branch(self, kind: str, panel: Sequence[tuple[str, Any]], subject: str) -> BranchResult:
        out = BranchResult(kind)
        try:
            return self._steps(kind, panel, subject, out)
        except PipelineStageError as exc:
            exc.branch = out
            raise

    def _steps(self, kind: str, panel, subject: str, out: BranchResult) -> BranchResult:
        features = self._features(kind, panel, out)
        out.completed.append(f"{kind}-features")

        tag = f"{kind}_rating"
        prompt = prompts.build_rating_prompt(features.items, subject, kind, self.strategy, self.templates)
        response = self._ask(tag, prompt, self.llm.rating_sampling)
        try:
            out.step_ratings = parse_step_ratings(response, self.experts)
        except ParseError as exc:
            if kind == "idea" and is_refusal(response):
                out.transcripts.append(PanelTranscript(tag, prompt, response, 0.0))
                out.refusal = response
                out.score = 0.0
                out.completed.append(f"{kind}-rating")
                return out
            out.transcripts.append(PanelTranscript(tag, prompt, response, None))
            raise PipelineStageError(tag, exc) from exc
        out.transcripts.append(PanelTranscript(tag, prompt, response, out.step_ratings))
        out.score = self._final(kind, response, out)
        out.completed.append(f"{kind}-rating")
        return out

    def evaluate_founder(self, founder: FounderRecord, panel: NeighborSelection,
                         index: SimilarityIndex) -> BranchResult:
        profiles = [(render_founder_profile(index.founder(m.record_id).record), m.outcome) for m in panel.panel]
        return self._branch("founder", profiles, render_founder_profile(founder))

    def evaluate_idea(self, idea_text: str, panel: NeighborSelection, index: SimilarityIndex) -> BranchResult:
        if not idea_text or not idea_text.strip():
            raise ValueError("idea text must be non-empty")
        profiles = [(index.idea(m.record_id).record.description, m.outcome) for m in panel.panel]
        return self._branch("idea", profiles, idea_text.strip())

    def evaluate_fit(self, founder: FounderRecord, idea_text: str,
                     founder_vec: np.ndarray | None = None, idea_vec: np.ndarray | None = None) -> FitResult:
        if not self.fit_features:
            raise ValueError("fit feature checklist is empty")
        out = FitResult(self.fit_mode, features=list(self.fit_features))
        if self.fit_mode == "embedding":
            if founder_vec is None or idea_vec is None:
                raise ValueError("embedding fit mode needs founder and idea vectors")
            out.score = min(1.0, max(0.0, (cosine_similarity(founder_vec, idea_vec) + 1.0) / 2.0))
            return out
        prompt = prompts.build_fit_prompt(render_founder_profile(founder), idea_text, self.fit_features,
                                          self.templates)
        response = self._ask("fit_rating", prompt, self.llm.rating_sampling)
        try:
            out.step_ratings = parse_step_ratings(response, self.experts)
        except ParseError:
            if is_refusal(response):
                out.transcripts.append(PanelTranscript("fit_rating", prompt, response, 0.0))
                out.refusal = response
                out.score = 0.0
                return out
            log.info("fit_rating: no per-step likelihoods parsed; relying on final extraction")
        out.transcripts.append(PanelTranscript("fit_rating", prompt, response, out.step_ratings))
        out.score = self._final("fit", response, out)
        return out


def _run_branch(fn: Callable[[], BranchResult], kind: str) -> tuple[BranchResult | None, PipelineStageError | None]:
    try:
        return fn(), None
    except PipelineStageError as exc:
        return getattr(exc, "branch", None), exc
    except FounderFitError as exc:
        return None, PipelineStageError(f"{kind}_features", exc)


def run_evaluation(index: SimilarityIndex, founder: FounderRecord, idea_text: str, embedder,
                   evaluator: Evaluator, k: int = 3, parallel: bool = True) -> EvaluationResult:
    """Retrieve, rate founder and idea, rate fit, aggregate.

    On a stage failure raises ``PipelineStageError`` whose ``partial``
    attribute holds the result with every completed stage.
    """
    if not idea_text or not idea_text.strip():
        raise ValueError("idea text must be non-empty")
    idea_text = idea_text.strip()
    result = EvaluationResult(founder, idea_text)
    done: set[str] = set()

    def fail(exc: PipelineStageError):
        result.stages = [s for s in STAGES if s in done]
        result.error = {"stage": exc.stage, "type": type(exc.cause).__name__, "message": str(exc.cause)}
        exc.partial = result
        raise exc

    query: EmbeddedFounder = embed_founder(founder, embedder)
    result.founder_neighbors = index.top_k_per_class(query, k)
    done.add("retrieve-founders")
    idea_vec = np.asarray(embedder.embed([idea_text])[0], dtype=np.float32)
    result.idea_neighbors = index.top_k_ideas(idea_vec, k)
    done.add("retrieve-ideas")

    def founder_branch():
        return evaluator.evaluate_founder(founder, result.founder_neighbors, index)

    def idea_branch():
        return evaluator.evaluate_idea(idea_text, result.idea_neighbors, index)

    if parallel:
        with ThreadPoolExecutor(2) as pool:
            ff = pool.submit(_run_branch, founder_branch, "founder")
            fi = pool.submit(_run_branch, idea_branch, "idea")
            (f_res, f_err), (i_res, i_err) = ff.result(), fi.result()
    else:
        f_res, f_err = _run_branch(founder_branch, "founder")
        i_res, i_err = _run_branch(idea_branch, "idea") if f_err is None else (None, None)

    result.founder, result.idea = f_res, i_res
    for res in (f_res, i_res):
        if res is not None:
            done.update(res.completed)
    for err in (f_err, i_err):
        if err is not None:
            fail(err)

    try:
        result.fit = evaluator.evaluate_fit(founder, idea_text, query.desc_vec, idea_vec)
    except PipelineStageError as exc:
        fail(exc)
    done.add("fit")

    result.scores = EvaluationScores.combine(f_res.score, i_res.score, result.fit.score)
    done.add("aggregate")
    for branch in (f_res, i_res):
        result.warnings += branch.notes
    if formula_edge(f_res.score, i_res.score, result.fit.score):
        result.warnings.append("formula edge: near-perfect founder score dominates a weak idea/fit product")
    result.stages = [s for s in STAGES if s in done]
    return result

"""Embedded founder/idea index with weighted founder similarity and per-class retrieval."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .embedding import cosine_similarity
from .errors import CorruptFile, DimensionMismatch, EmptyClass, ScoreOutOfBounds, VersionMismatch, ZeroVector
from .ingest import FounderRecord, IdeaRecord, Outcome

EMPTY_MARKER = "none"

FOUNDER_SCORE_MIN = -2.3
FOUNDER_SCORE_MAX = 4.4
_BOUND_EPS = 1e-9

MAGIC = b"FFINDEX\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIIIQ32s")


@dataclass(frozen=True)
class EmbeddedFounder:
    record: FounderRecord
    desc_vec: np.ndarray
    jobs_vec: np.ndarray


@dataclass(frozen=True)
class EmbeddedIdea:
    record: IdeaRecord
    desc_vec: np.ndarray


@dataclass(frozen=True)
class ScoredMatch:
    record_id: str
    score: float
    outcome: Outcome

    def to_dict(self) -> dict:
        return {"id": self.record_id, "score": self.score, "outcome": self.outcome.value}


@dataclass(frozen=True)
class NeighborSelection:
    successes: list[ScoredMatch]
    failures: list[ScoredMatch]
    panel: list[ScoredMatch]

    def to_dict(self) -> dict:
        return {"successes": [m.to_dict() for m in self.successes],
                "failures": [m.to_dict() for m in self.failures],
                "panel": [m.to_dict() for m in self.panel]}


def _text_or_marker(text: str) -> str:
    return text if text.strip() else EMPTY_MARKER


def embed_founder(record: FounderRecord, embedder) -> EmbeddedFounder:
    desc, jobs = embedder.embed([_text_or_marker(record.description), _text_or_marker(record.prior_jobs)])
    return EmbeddedFounder(record, np.asarray(desc, np.float32), np.asarray(jobs, np.float32))


def embed_founders(records: Sequence[FounderRecord], embedder) -> list[EmbeddedFounder]:
    texts = []
    for r in records:
        texts += [_text_or_marker(r.description), _text_or_marker(r.prior_jobs)]
    vecs = embedder.embed(texts) if texts else []
    return [EmbeddedFounder(r, np.asarray(vecs[2 * i], np.float32), np.asarray(vecs[2 * i + 1], np.float32))
            for i, r in enumerate(records)]


def embed_ideas(records: Sequence[IdeaRecord], embedder) -> list[EmbeddedIdea]:
    vecs = embedder.embed([r.description for r in records]) if records else []
    return [EmbeddedIdea(r, np.asarray(v, np.float32)) for r, v in zip(records, vecs)]


def majors_mask(majors) -> int:
    m = 0
    for c in majors:
        m |= 1 << int(c)
    return m


def check_founder_score(score: float) -> float:
    if not (FOUNDER_SCORE_MIN - _BOUND_EPS <= score <= FOUNDER_SCORE_MAX + _BOUND_EPS):
        raise ScoreOutOfBounds(f"founder similarity {score} outside [{FOUNDER_SCORE_MIN}, {FOUNDER_SCORE_MAX}]")
    return score


def founder_similarity(alpha: EmbeddedFounder, beta: EmbeddedFounder) -> float:
    """Weighted similarity of two founders.

    -|deg_a - deg_b|/12 + cos(desc) + cos(jobs) + |majors_a & majors_b|/5 - |top_a - top_b|/20
    """
    a, b = alpha.record, beta.record
    d_deg = abs(a.highest_degree - b.highest_degree)
    d_top = abs(int(a.top_institution) - int(b.top_institution))
    shared = len(a.majors & b.majors)
    score = (-(d_deg / 12) + cosine_similarity(alpha.desc_vec, beta.desc_vec)
             + cosine_similarity(alpha.jobs_vec, beta.jobs_vec) + shared / 5 - d_top / 20)
    return check_founder_score(score)


def idea_similarity(alpha: EmbeddedIdea, beta: EmbeddedIdea) -> float:
    return cosine_similarity(alpha.desc_vec, beta.desc_vec)


def select_neighbors(matches: Sequence[ScoredMatch], k: int = 3, panel_size: int = 3) -> NeighborSelection:
    """Pick the k best of each outcome class and a mixed panel.

    The panel is the best success, the best failure, then the best remaining
    records overall, sorted by descending score (ties by ascending id).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(matches, key=lambda m: (-m.score, m.record_id))
    succ = [m for m in ranked if m.outcome is Outcome.SUCCESS]
    fail = [m for m in ranked if m.outcome is Outcome.FAILURE]
    if not succ or not fail:
        missing = "Success" if not succ else "Failure"
        raise EmptyClass(f"index has no {missing} records")
    panel = [succ[0], fail[0]]
    for m in ranked:
        if len(panel) >= panel_size:
            break
        if m is not succ[0] and m is not fail[0]:
            panel.append(m)
    panel.sort(key=lambda m: (-m.score, m.record_id))
    return NeighborSelection(succ[:k], fail[:k], panel)


class _Block:
    """Column-oriented float64 view of one record class for the kernels."""

    def __init__(self, mats: list[np.ndarray], dim: int):
        self.mats = [np.ascontiguousarray(np.stack(m).astype(np.float64)) if len(m)
                     else np.zeros((0, dim)) for m in mats]
        self.sq = [np.einsum("ij,ij->i", m, m) for m in self.mats]
        for sq in self.sq:
            if np.any(sq == 0.0):
                raise ZeroVector("index contains a zero embedding vector")


class SimilarityIndex:
    """Immutable in-memory index; queries are exhaustive scans."""

    def __init__(self, founders: Sequence[EmbeddedFounder], ideas: Sequence[EmbeddedIdea],
                 dim: int, meta: dict | None = None):
        self.founders = list(founders)
        self.ideas = list(ideas)
        self.dim = dim
        self.meta = dict(meta or {})
        for f in self.founders:
            if f.desc_vec.shape != (dim,) or f.jobs_vec.shape != (dim,):
                raise DimensionMismatch(f"founder {f.record.id} vectors do not have dim {dim}")
        for i in self.ideas:
            if i.desc_vec.shape != (dim,):
                raise DimensionMismatch(f"idea {i.record.id} vector does not have dim {dim}")
        self._f = _Block([[f.desc_vec for f in self.founders], [f.jobs_vec for f in self.founders]], dim)
        self._i = _Block([[i.desc_vec for i in self.ideas]], dim)
        self._f_deg = np.array([f.record.highest_degree for f in self.founders], dtype=np.int64)
        self._f_top = np.array([int(f.record.top_institution) for f in self.founders], dtype=np.int64)
        self._f_mask = np.array([majors_mask(f.record.majors) for f in self.founders], dtype=np.uint16)
        self._founders_by_id = {f.record.id: f for f in self.founders}
        self._ideas_by_id = {i.record.id: i for i in self.ideas}

    def __len__(self) -> int:
        return len(self.founders) + len(self.ideas)

    def stats(self) -> dict:
        def counts(items):
            s = sum(1 for x in items if x.record.outcome is Outcome.SUCCESS)
            return {"success": s, "failure": len(items) - s}
        return {"dim": self.dim, "founders": counts(self.founders), "ideas": counts(self.ideas),
                "records": len(self), "kernels": _kernels.BACKEND, "meta": self.meta}

    def _check_dim(self, vec: np.ndarray) -> np.ndarray:
        v = np.asarray(vec, dtype=np.float64)
        if v.shape != (self.dim,):
            raise DimensionMismatch(f"query vector has shape {v.shape}, index dim is {self.dim}")
        return v

    def founder_scores(self, query: EmbeddedFounder, kernel=None) -> np.ndarray:
        kernel = kernel or _kernels.founder_scores
        qd = self._check_dim(query.desc_vec)
        qj = self._check_dim(query.jobs_vec)
        qd_sq, qj_sq = float(qd @ qd), float(qj @ qj)
        if qd_sq == 0.0 or qj_sq == 0.0:
            raise ZeroVector("query founder has a zero embedding")
        r = query.record
        scores = kernel(qd, qd_sq, qj, qj_sq, r.highest_degree, int(r.top_institution),
                        majors_mask(r.majors), self._f.mats[0], self._f.sq[0], self._f.mats[1],
                        self._f.sq[1], self._f_deg, self._f_top, self._f_mask)
        if len(scores) and (scores.min() < FOUNDER_SCORE_MIN - _BOUND_EPS
                            or scores.max() > FOUNDER_SCORE_MAX + _BOUND_EPS):
            raise ScoreOutOfBounds("founder similarity outside its theoretical range")
        return scores

    def idea_scores(self, query: EmbeddedIdea | np.ndarray, kernel=None) -> np.ndarray:
        kernel = kernel or _kernels.cosine_scores
        q = self._check_dim(query.desc_vec if isinstance(query, EmbeddedIdea) else query)
        q_sq = float(q @ q)
        if q_sq == 0.0:
            raise ZeroVector("query idea has a zero embedding")
        return kernel(q, q_sq, self._i.mats[0], self._i.sq[0])

    def top_k_per_class(self, query: EmbeddedFounder | EmbeddedIdea, k: int = 3) -> NeighborSelection:
        if isinstance(query, EmbeddedFounder):
            items, scores = self.founders, self.founder_scores(query)
        elif isinstance(query, EmbeddedIdea):
            items, scores = self.ideas, self.idea_scores(query)
        else:
            raise TypeError(f"cannot query with {type(query).__name__}")
        matches = [ScoredMatch(it.record.id, float(s), it.record.outcome) for it, s in zip(items, scores)]
        return select_neighbors(matches, k)

    def top_k_ideas(self, vec: np.ndarray, k: int = 3) -> NeighborSelection:
        """Retrieval for a bare idea embedding (query ideas carry no outcome label)."""
        scores = self.idea_scores(vec)
        return select_neighbors([ScoredMatch(it.record.id, float(s), it.record.outcome)
                                 for it, s in zip(self.ideas, scores)], k)

    def founder(self, record_id: str) -> EmbeddedFounder:
        return self._founders_by_id[record_id]

    def idea(self, record_id: str) -> EmbeddedIdea:
        return self._ideas_by_id[record_id]


def build_index(founders: Sequence[FounderRecord], ideas: Sequence[IdeaRecord], embedder,
                meta: dict | None = None) -> SimilarityIndex:
    return SimilarityIndex(embed_founders(founders, embedder), embed_ideas(ideas, embedder),
                           embedder.dim, meta)


def _pack_json(obj) -> bytes:
    raw = json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def save_index(index: SimilarityIndex, path: str | Path) -> None:
    """Write the versioned binary index file (float32 little-endian vectors)."""
    parts = [_pack_json(index.meta)]
    for f in index.founders:
        parts += [_pack_json(f.record.to_dict()), f.desc_vec.astype("<f4").tobytes(),
                  f.jobs_vec.astype("<f4").tobytes()]
    for i in index.ideas:
        parts += [_pack_json(i.record.to_dict()), i.desc_vec.astype("<f4").tobytes()]
    payload = b"".join(parts)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, index.dim, len(index.founders), len(index.ideas),
                          len(payload), hashlib.sha256(payload).digest())
    Path(path).write_bytes(header + payload)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptFile("index payload ends early")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def json(self):
        (n,) = struct.unpack("<I", self.take(4))
        return json.loads(self.take(n).decode("utf-8"))

    def vec(self, dim: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * dim), dtype="<f4").astype(np.float32)


def load_index(path: str | Path, expected_dim: int | None = None) -> SimilarityIndex:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CorruptFile(f"{path}: file too short for an index header")
    magic, version, dim, n_f, n_i, plen, digest = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorruptFile(f"{path}: not a founderfit index file")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: index format version {version}, expected {FORMAT_VERSION}")
    if expected_dim is not None and dim != expected_dim:
        raise DimensionMismatch(f"{path}: index dim {dim}, expected {expected_dim}")
    payload = data[_HEADER.size:]
    if len(payload) != plen:
        raise CorruptFile(f"{path}: payload is {len(payload)} bytes, header says {plen}")
    if hashlib.sha256(payload).digest() != digest:
        raise CorruptFile(f"{path}: checksum mismatch")
    r = _Reader(payload)
    try:
        meta = r.json()
        founders = []
        for _ in range(n_f):
            rec = FounderRecord.from_dict(r.json())
            founders.append(EmbeddedFounder(rec, r.vec(dim), r.vec(dim)))
        ideas = []
        for _ in range(n_i):
            rec = IdeaRecord.from_dict(r.json())
            ideas.append(EmbeddedIdea(rec, r.vec(dim)))
    except (ValueError, KeyError, UnicodeDecodeError, struct.error) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    if r.pos != len(payload):
        raise CorruptFile(f"{path}: trailing bytes after records")
    return SimilarityIndex(founders, ideas, dim, meta)

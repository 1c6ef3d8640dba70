from __future__ import annotations

import json
import math
import shutil
from pathlib import Path

import numpy as np
import pytest

from founderfit.index import EmbeddedFounder, EmbeddedIdea
from founderfit.ingest import FounderRecord, IdeaRecord, Outcome

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text("utf-8")


def random_founder(rng: np.random.Generator, i: int, dim: int = 16) -> EmbeddedFounder:
    n_majors = int(rng.integers(0, 4))
    rec = FounderRecord(
        id=f"f{i:05d}",
        description=f"founder {i}",
        highest_degree=int(rng.integers(0, 4)),
        top_institution=bool(rng.integers(0, 2)),
        majors=frozenset(int(m) for m in rng.choice(12, n_majors, replace=False)),
        prior_jobs="",
        outcome=Outcome.SUCCESS if rng.random() < 0.4 else Outcome.FAILURE,
    )
    return EmbeddedFounder(rec, rng.normal(size=dim).astype(np.float32),
                           rng.normal(size=dim).astype(np.float32))


def random_idea(rng: np.random.Generator, i: int, dim: int = 16) -> EmbeddedIdea:
    rec = IdeaRecord(f"i{i:05d}", f"idea {i}", Outcome.SUCCESS if rng.random() < 0.4 else Outcome.FAILURE)
    return EmbeddedIdea(rec, rng.normal(size=dim).astype(np.float32))


def oracle_cosine(a, b) -> float:
    """Plain-python cosine, independent of the package code."""
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


def oracle_founder_score(a: EmbeddedFounder, b: EmbeddedFounder) -> float:
    ra, rb = a.record, b.record
    return (-abs(ra.highest_degree - rb.highest_degree) / 12
            + oracle_cosine(a.desc_vec, b.desc_vec)
            + oracle_cosine(a.jobs_vec, b.jobs_vec)
            + len(set(ra.majors) & set(rb.majors)) / 5
            - abs(int(ra.top_institution) - int(rb.top_institution)) / 20)


@pytest.fixture(scope="session")
def dataset_dir() -> Path:
    return FIXTURES / "dataset"


@pytest.fixture()
def built_index(tmp_path, dataset_dir):
    """Ingested synthetic dataset plus its index file, built through the CLI."""
    from founderfit.cli import main

    out = tmp_path / "ds"
    assert main(["ingest",
                 "--founders-success", str(dataset_dir / "founders_success.csv"),
                 "--founders-fail", str(dataset_dir / "founders_fail.csv"),
                 "--companies-success", str(dataset_dir / "companies_success.csv"),
                 "--companies-fail", str(dataset_dir / "companies_fail.csv"),
                 "--out", str(out)]) == 0
    assert main(["index", "build", str(out), "--out", str(out / "index.bin")]) == 0
    return out / "index.bin"


LOW_FOUNDER_ARGS = [
    "--founder-text", "Five years at a carbon exchange startup, then a public-service fellowship.",
    "--degree", "MBA", "--majors", "Spanish, International Studies",
    "--jobs", "Exchangery(Financial services company) as Co-founder, Organic Futures Group as Principal",
    "--idea-text", "Market data service and online trading platform for organic and non-GMO commodities.",
]


def scripted_replies(name: str) -> dict:
    return json.loads(fixture_text(name))["replies"]


def copy_fixture(name: str, dest: Path) -> Path:
    target = dest / name
    shutil.copy(FIXTURES / name, target)
    return target

import json

import pytest

from conftest import FIXTURES, LOW_FOUNDER_ARGS
from founderfit.cli import main
from founderfit.report import read_report, without_timestamps

LOW = str(FIXTURES / "scripted_low.json")
REFUSAL = str(FIXTURES / "scripted_refusal.json")


def _evaluate(index, out_dir, *extra):
    return main(["evaluate", "--index", str(index), *LOW_FOUNDER_ARGS, "--out-dir", str(out_dir), *extra])


def _report_path(out_dir):
    paths = list(out_dir.glob("*/report.json"))
    assert len(paths) == 1
    return paths[0]


def test_ingest_counts_and_rejects(tmp_path, dataset_dir, capsys):
    code = main(["ingest", "--founders-success", str(dataset_dir / "founders_success.csv"),
                 "--founders-fail", str(dataset_dir / "founders_fail.csv"),
                 "--founders-fail", str(dataset_dir / "founders_bad.csv"),
                 "--out", str(tmp_path / "ds")])
    assert code == 0
    assert "2 success founders, 3 failure founders" in capsys.readouterr().out
    rejects = [json.loads(x) for x in (tmp_path / "ds" / "rejects.jsonl").read_text().splitlines()]
    reasons = {r["id"]: r["reason"] for r in rejects}
    assert reasons["https://linkedin.example/in/bad"].startswith("unparseable profile JSON")
    assert reasons["https://linkedin.example/in/empty"] == "empty profile"


def test_ingest_missing_file(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["ingest", "--founders-success", str(missing), "--out", str(tmp_path)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_index_stats(built_index, capsys):
    assert main(["index", "stats", str(built_index)]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["records"] == 10
    assert stats["founders"] == {"success": 2, "failure": 3}


def test_index_rebuild_byte_identical(built_index):
    ds = built_index.parent
    first = built_index.read_bytes()
    assert (ds / "embedding_cache.jsonl").exists()
    assert main(["index", "build", str(ds), "--out", str(ds / "again.bin")]) == 0
    assert (ds / "again.bin").read_bytes() == first


def test_index_provider_down_cold_cache(built_index, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"embedding": {"kind": "remote", "endpoint": "http://127.0.0.1:9/embed",
                                             "max_retries": 0, "timeout": 2}}))
    code = main(["--config", str(cfg), "index", "build", str(built_index.parent), "--out", str(tmp_path / "x.bin"),
                 "--cache", str(tmp_path / "cold.jsonl")])
    assert code == 3
    err = capsys.readouterr().err
    assert "not in cache" in err


def test_index_query(built_index, capsys):
    assert main(["index", "query", str(built_index), "--idea-text", "agricultural commodities market data"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["ideas"]["successes"][0]["id"] == "c-s1"


def test_evaluate_low_example(built_index, tmp_path, capsys):
    assert _evaluate(built_index, tmp_path / "r", "--llm-script", LOW) == 0
    out = capsys.readouterr().out
    assert "Aggregated score: 0.66" in out
    _, report = read_report(_report_path(tmp_path / "r"))
    assert report["scores"]["founder"] == 0.71
    assert report["scores"]["idea"] == 0.6625
    assert report["scores"]["fit"] == 0.63
    assert report["scores"]["aggregate"] == pytest.approx(0.66, abs=0.005)
    assert report["stages"] == ["retrieve-founders", "retrieve-ideas", "founder-features", "founder-rating",
                                "idea-features", "idea-rating", "fit", "aggregate"]
    assert report["schema_version"] == 1 and report["status"] == "ok"
    assert "outcome" not in report["inputs"]["founder"]
    assert report["transcripts"]


def test_evaluate_refusal(built_index, tmp_path):
    code = main(["evaluate", "--index", str(built_index), "--founder-text", "ML researcher", "--degree", "3",
                 "--idea-text", "An app that tricks users into paying twice.", "--llm-script", REFUSAL,
                 "--out-dir", str(tmp_path / "r")])
    assert code == 0
    _, report = read_report(_report_path(tmp_path / "r"))
    assert report["scores"]["idea"] == 0.0 and report["scores"]["aggregate"] == 0.0
    assert "unethical" in report["idea"]["refusal"]


def test_evaluate_deterministic(built_index, tmp_path):
    texts = []
    for i in range(2):
        assert _evaluate(built_index, tmp_path / f"r{i}", "--llm-script", LOW) == 0
        texts.append(without_timestamps(read_report(_report_path(tmp_path / f"r{i}"))[1]))
    assert texts[0] == texts[1]
    a, b = (_report_path(tmp_path / f"r{i}") for i in range(2))
    assert a.parent.name == b.parent.name  # content-addressed


def test_evaluate_cached(built_index, tmp_path, capsys):
    assert _evaluate(built_index, tmp_path / "r", "--llm-script", LOW) == 0
    before = _report_path(tmp_path / "r").read_text()
    capsys.readouterr()
    assert _evaluate(built_index, tmp_path / "r", "--llm-script", LOW) == 0
    assert "cached" in capsys.readouterr().out
    assert _report_path(tmp_path / "r").read_text() == before


def test_record_then_replay(built_index, tmp_path):
    session = tmp_path / "session.jsonl"
    assert _evaluate(built_index, tmp_path / "a", "--llm-script", LOW, "--record", str(session)) == 0
    assert _evaluate(built_index, tmp_path / "b", "--replay", str(session)) == 0
    ra = without_timestamps(read_report(_report_path(tmp_path / "a"))[1])
    rb = without_timestamps(read_report(_report_path(tmp_path / "b"))[1])
    assert ra["scores"] == rb["scores"]
    assert ra["transcripts"] == rb["transcripts"]


def test_replay_strict_mismatch(built_index, tmp_path, capsys):
    session = tmp_path / "session.jsonl"
    assert _evaluate(built_index, tmp_path / "a", "--llm-script", LOW, "--record", str(session)) == 0
    args = ["evaluate", "--index", str(built_index), "--founder-text", "someone else entirely",
            "--idea-text", LOW_FOUNDER_ARGS[-1], "--out-dir", str(tmp_path / "b"), "--replay", str(session)]
    assert main(args) == 3
    _, report = read_report(_report_path(tmp_path / "b"))
    assert report["status"] == "partial"
    assert report["error"]["type"] == "ReplayMismatch"
    assert main(args[:-2] + ["--replay", str(session), "--no-strict", "--out-dir", str(tmp_path / "c")]) == 0


def test_evaluate_backend_failure_partial(built_index, tmp_path):
    replies = json.loads((FIXTURES / "scripted_low.json").read_text())
    del replies["replies"]["idea_final"]
    script = tmp_path / "broken.json"
    script.write_text(json.dumps(replies))
    assert _evaluate(built_index, tmp_path / "r", "--llm-script", str(script)) == 3
    _, report = read_report(_report_path(tmp_path / "r"))
    assert report["status"] == "partial"
    assert report["error"]["stage"] == "idea_final"
    assert report["scores"] is None
    assert report["stages"] == ["retrieve-founders", "retrieve-ideas", "founder-features", "founder-rating",
                                "idea-features"]


def test_evaluate_usage_errors(built_index, tmp_path):
    assert main(["evaluate", "--index", str(tmp_path / "missing.bin"), *LOW_FOUNDER_ARGS, "--llm-script", LOW]) == 2
    assert main(["evaluate", "--index", str(built_index), "--founder-text", "x", "--llm-script", LOW,
                 "--out-dir", str(tmp_path)]) == 2
    assert main(["evaluate", "--index", str(built_index), "--founder-text", "x", "--idea-text", "y",
                 "--degree", "7", "--llm-script", LOW, "--out-dir", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as err:
        main(["evaluate"])
    assert err.value.code == 2


def test_evaluate_founder_file(built_index, tmp_path):
    profile = tmp_path / "founder.json"
    profile.write_text(json.dumps({"description": "Trader", "education": [{"degree": "MBA", "field": "Finance"}]}))
    assert main(["evaluate", "--index", str(built_index), "--founder-file", str(profile),
                 "--linkedin-url", "https://linkedin.example/in/q", "--idea-text", "Commodity data",
                 "--llm-script", LOW, "--out-dir", str(tmp_path / "r")]) == 0
    _, report = read_report(_report_path(tmp_path / "r"))
    assert report["inputs"]["founder"]["highest_degree"] == 2
    assert report["inputs"]["founder"]["majors"] == [3]
    assert report["inputs"]["linkedin_url"] == "https://linkedin.example/in/q"


def test_report_render(built_index, tmp_path, capsys):
    assert _evaluate(built_index, tmp_path / "r", "--llm-script", LOW, "--format", "markdown") == 0
    path = _report_path(tmp_path / "r")
    assert (path.parent / "report.md").exists()
    capsys.readouterr()
    assert main(["report", str(path)]) == 0
    md = capsys.readouterr().out
    for line in ("Founder score: 0.71", "Idea score: 0.66", "Fit score: 0.63", "Aggregated score: 0.66"):
        assert line in md
    assert main(["report", str(path), "--format", "json", "--out", str(tmp_path / "copy.json")]) == 0
    assert (tmp_path / "copy.json").read_bytes() == path.read_bytes()


def test_report_schema_mismatch(tmp_path, capsys):
    bad = tmp_path / "r.json"
    bad.write_text(json.dumps({"schema_version": 99}))
    assert main(["report", str(bad)]) == 2
    assert "schema_version" in capsys.readouterr().err


@pytest.mark.parametrize("what", ["pipeline", "mapping", "fit-features", "institutions", "prompts"])
def test_config_dump(what, capsys):
    assert main(["config", "dump", what]) == 0
    out = capsys.readouterr().out
    assert out.strip()
    if what in ("pipeline", "mapping"):
        json.loads(out)


def test_config_dump_prompts_dir(tmp_path):
    assert main(["config", "dump", "prompts", "--out", str(tmp_path / "t")]) == 0
    assert (tmp_path / "t" / "founder_features.txt").exists()


def test_config_validation(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"strategy": "nope"}))
    assert main(["--config", str(cfg), "config", "dump"]) == 2
    cfg.write_text(json.dumps({"mapping_path": "does/not/exist.json"}))
    assert main(["--config", str(cfg), "config", "dump"]) == 2
    cfg.write_text(json.dumps({"k": 2, "fit_mode": "embedding"}))
    assert main(["--config", str(cfg), "config", "dump"]) == 0
    assert json.loads(capsys.readouterr().out)["k"] == 2

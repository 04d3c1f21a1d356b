from __future__ import annotations

import io
import json
from pathlib import Path

import pytest

from quandary.cli import main

from conftest import FIXTURES

HANDCRAFTED = Path(__file__).resolve().parent.parent / "src" / "quandary" / "data" / "principles" / "handcrafted.jsonl"


def run(argv: list[str]) -> int:
    return main(argv)


@pytest.fixture
def pipeline_dirs(tmp_path):
    """index + candidates prepared once for commands that need them."""
    index_dir = tmp_path / "index"
    assert run(["index", "--input", str(FIXTURES / "principles_100.jsonl"), "--output", str(index_dir)]) == 0
    cand_dir = tmp_path / "cand"
    assert (
        run(
            [
                "candidates",
                "--input", str(FIXTURES / "corpus_pipeline.jsonl"),
                "--index", str(index_dir / "index.jsonl"),
                "--handcrafted", str(HANDCRAFTED),
                "--output", str(cand_dir),
                "--seed", "7",
            ]
        )
        == 0
    )
    return index_dir, cand_dir


class TestIngest:
    def test_ingest_reports_counts(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert run(["ingest", "--input", str(FIXTURES / "corpus_small.jsonl"), "--output", str(out)]) == 0
        report = json.loads((out / "ingest_report.json").read_text())
        assert report["quandaries"] == 3 and report["answers"] == 3
        assert (out / "corpus.jsonl").exists()
        assert (out / "manifest.json").exists()

    def test_missing_input_is_json_error(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert run(["ingest", "--input", str(tmp_path / "nope.jsonl"), "--output", str(out)]) == 1
        err = json.loads(capsys.readouterr().err)
        assert "error" in err

    def test_manifest_is_immutable(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert run(["ingest", "--input", str(FIXTURES / "corpus_small.jsonl"), "--output", str(out)]) == 0
        assert run(["ingest", "--input", str(FIXTURES / "corpus_small.jsonl"), "--output", str(out)]) == 1
        err = json.loads(capsys.readouterr().err)
        assert "immutable" in err["error"]["message"]


class TestPipelineDeterminism:
    def test_candidates_and_generate_are_byte_identical_across_runs(self, tmp_path, pipeline_dirs):
        index_dir, cand_dir = pipeline_dirs
        gen1 = tmp_path / "gen1"
        gen2 = tmp_path / "gen2"
        cand2 = tmp_path / "cand2"
        base_cmd = [
            "candidates",
            "--input", str(FIXTURES / "corpus_pipeline.jsonl"),
            "--index", str(index_dir / "index.jsonl"),
            "--handcrafted", str(HANDCRAFTED),
            "--seed", "7",
        ]
        assert run(base_cmd + ["--output", str(cand2)]) == 0
        assert (cand_dir / "candidates.jsonl").read_bytes() == (cand2 / "candidates.jsonl").read_bytes()

        for gen_dir, cand in ((gen1, cand_dir), (gen2, cand2)):
            assert (
                run(
                    [
                        "generate",
                        "--input", str(FIXTURES / "corpus_pipeline.jsonl"),
                        "--candidates", str(cand / "candidates.jsonl"),
                        "--output", str(gen_dir),
                        "--seed", "7",
                    ]
                )
                == 0
            )
        assert (gen1 / "answers.jsonl").read_bytes() == (gen2 / "answers.jsonl").read_bytes()

    def test_generated_answers_have_three_segments_echoing_principles(self, tmp_path, pipeline_dirs):
        _, cand_dir = pipeline_dirs
        gen = tmp_path / "gen"
        assert (
            run(
                [
                    "generate",
                    "--input", str(FIXTURES / "corpus_pipeline.jsonl"),
                    "--candidates", str(cand_dir / "candidates.jsonl"),
                    "--output", str(gen),
                    "--seed", "7",
                ]
            )
            == 0
        )
        lines = [json.loads(l) for l in (gen / "answers.jsonl").read_text().splitlines()]
        assert len(lines) == 12
        for record in lines:
            assert len(record["segments"]) == 3
            for segment, principle in zip(record["segments"], record["selection"]["principles"]):
                assert principle["text"] in segment["text"]


class TestEvaluate:
    def test_identical_files_score_100(self, tmp_path):
        candidates = tmp_path / "cands.jsonl"
        with candidates.open("w") as fh:
            for qid, text in (("small-1", "tell the truth kindly"), ("small-2", "keep promises")):
                fh.write(json.dumps({"quandary_id": qid, "text": text}) + "\n")
        refs = tmp_path / "refs.jsonl"
        with refs.open("w") as fh:
            fh.write(json.dumps({"id": "small-1", "context": ["c."], "question": "q?"}) + "\n")
            fh.write(json.dumps({"id": "small-2", "context": ["c."], "question": "q?"}) + "\n")
            fh.write(json.dumps({"quandary_id": "small-1", "text": "tell the truth kindly"}) + "\n")
            fh.write(json.dumps({"quandary_id": "small-2", "text": "keep promises"}) + "\n")
        out = tmp_path / "eval"
        assert run(["evaluate", "--candidates", str(candidates), "--references", str(refs), "--output", str(out)]) == 0
        report = json.loads((out / "metric_report.json").read_text())
        assert report["means"]["rouge1"]["f1"] == pytest.approx(100.0)
        assert report["corpus_bleu"] == pytest.approx(100.0)


class TestAnalyze:
    def test_shipped_fixture_reproduces_published_rates(self, tmp_path):
        out = tmp_path / "ana"
        assert (
            run(
                [
                    "analyze",
                    "--annotations", str(FIXTURES / "annotations_130.jsonl"),
                    "--blinding", str(FIXTURES / "blinding_130.json"),
                    "--system", "pipeline",
                    "--scores", str(FIXTURES / "scores_bertscore_130.json"),
                    "--output", str(out),
                ]
            )
            == 0
        )
        report = json.loads((out / "analysis_report.json").read_text())
        rates = {c: report["criteria"][c]["success_rate"] for c in report["criteria"]}
        assert abs(rates["multi_perspective"] - 62.31) < 0.01
        assert abs(rates["coherence"] - 43.07) < 0.01
        assert abs(rates["justification"] - 64.61) < 0.01
        assert abs(report["conditional"]["coherence->justification"] - 91.07) < 0.01
        strat = report["stratified"]["criteria"]["multi_perspective"]
        assert abs(strat["rate_low"] - 51.35) < 0.01
        assert abs(strat["rate_high"] - 69.77) < 0.01
        assert (out / "criteria_table.txt").exists()
        assert (out / "stratified_table.txt").exists()


class TestSweep:
    def test_coverage_is_monotone_nonincreasing(self, tmp_path, pipeline_dirs):
        index_dir, _ = pipeline_dirs
        out = tmp_path / "sweep"
        assert (
            run(
                [
                    "sweep-threshold",
                    "--input", str(FIXTURES / "corpus_pipeline.jsonl"),
                    "--index", str(index_dir / "index.jsonl"),
                    "--handcrafted", str(HANDCRAFTED),
                    "--output", str(out),
                    "--grid", "0:0.6:13",
                    "--seed", "7",
                ]
            )
            == 0
        )
        rows = json.loads((out / "sweep.json").read_text())["rows"]
        assert len(rows) == 13
        coverages = [r["coverage"] for r in rows]
        sizes = [r["mean_pool_size"] for r in rows]
        assert all(a >= b for a, b in zip(coverages, coverages[1:]))
        assert all(a >= b for a, b in zip(sizes, sizes[1:]))


class TestExportAnnotations:
    def test_export_round_trips_through_analyze(self, tmp_path):
        from quandary.service import QuandaryService, ServiceConfig
        import io as _io

        config = ServiceConfig(data_dir=tmp_path / "svc")
        app = QuandaryService(config)

        def post(path, body):
            raw = json.dumps(body).encode()
            environ = {
                "REQUEST_METHOD": "POST",
                "PATH_INFO": path,
                "QUERY_STRING": "",
                "CONTENT_LENGTH": str(len(raw)),
                "wsgi.input": _io.BytesIO(raw),
            }
            captured = {}
            chunks = app.wsgi(environ, lambda s, h: captured.update(status=int(s.split()[0])))
            return captured["status"], json.loads(b"".join(chunks))

        def get(path):
            environ = {"REQUEST_METHOD": "GET", "PATH_INFO": path, "QUERY_STRING": ""}
            captured = {}
            chunks = app.wsgi(environ, lambda s, h: captured.update(status=int(s.split()[0])))
            return captured["status"], json.loads(b"".join(chunks))

        pairs = [
            {
                "pair_id": f"p{i}",
                "systems": [{"id": "pipeline", "text": f"sys {i}"}, {"id": "ethicist", "text": f"ref {i}"}],
            }
            for i in range(3)
        ]
        _, created = post("/sessions", {"kind": "annotation", "pairs": pairs, "seed": 2})
        sid = created["session_id"]
        for _ in range(3):
            _, nxt = get(f"/sessions/{sid}/next")
            post(
                f"/sessions/{sid}/votes",
                {
                    "pair_id": nxt["pair_id"],
                    "annotator": "ann-9",
                    "choices": {"multi_perspective": "Both", "coherence": "A", "justification": "None"},
                },
            )

        out = tmp_path / "export"
        assert run(["export-annotations", "--data-dir", str(tmp_path / "svc"), "--output", str(out)]) == 0
        exported = (out / "annotations.jsonl").read_text().splitlines()
        assert len(exported) == 9

        ana = tmp_path / "ana"
        assert (
            run(
                [
                    "analyze",
                    "--annotations", str(out / "annotations.jsonl"),
                    "--blinding", str(out / "blinding.json"),
                    "--system", "pipeline",
                    "--output", str(ana),
                ]
            )
            == 0
        )
        report = json.loads((ana / "analysis_report.json").read_text())
        assert report["criteria"]["coherence"]["total"] == 3


class TestConfigFile:
    def test_config_defaults_are_applied_and_flags_win(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"seed": 42}))
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        assert run(["--config", str(config), "ingest", "--input", str(FIXTURES / "corpus_small.jsonl"), "--output", str(out1)]) == 0
        manifest = json.loads((out1 / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 42

        assert run(["ingest", "--input", str(FIXTURES / "corpus_small.jsonl"), "--output", str(out2)]) == 0
        manifest2 = json.loads((out2 / "manifest.json").read_text())
        assert "seed" not in manifest2["config"] or manifest2["config"]["seed"] is None

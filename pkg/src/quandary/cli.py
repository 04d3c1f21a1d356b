"""Batch entry points for the pipeline and the experiment protocol.

Every batch subcommand writes exactly one run manifest (run id, argv, config
snapshot, inputs/outputs, seed, timestamps) into its output directory and
refuses to clobber an existing one: manifests are immutable, so each run gets
a fresh output directory. Data outputs are written atomically (temp + rename)
and contain no timestamps; with the mock backend and a fixed --seed they are
byte-identical across runs and platforms. Failures exit non-zero with one
machine-readable JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import uuid
from pathlib import Path

from . import analysis, corpus, generation, metrics, retrieval, scoring
from .llm import BackendConfig, CompletionClient
from .retrieval import ScoredPrinciple


class CliError(Exception):
    pass


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_jsonl(path: Path, records: list[dict]) -> None:
    _atomic_write(path, "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records))


class RunManifest:
    def __init__(self, command: str, args: argparse.Namespace, out_dir: Path):
        self.record = {
            "run_id": uuid.uuid4().hex,
            "command": command,
            "argv": sys.argv[1:],
            "config": {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"},
            "seed": getattr(args, "seed", None),
            "started": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }
        self.path = out_dir / "manifest.json"
        if self.path.exists():
            raise CliError(f"{self.path} already exists; manifests are immutable, use a fresh output dir")

    def finish(self, outputs: list[Path]) -> None:
        self.record["outputs"] = [str(p) for p in outputs]
        self.record["finished"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        _atomic_write(self.path, json.dumps(self.record, indent=2) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _backend_config(args) -> BackendConfig:
    if args.backend == "mock":
        return BackendConfig(kind="mock")
    if not getattr(args, "backend_url", None):
        raise CliError("--backend http requires --backend-url")
    return BackendConfig(kind="http", base_url=args.backend_url)


def _scorer_config(args) -> scoring.ScorerConfig:
    kind = "remote_relevance" if args.scorer == "remote" else "lexical"
    return scoring.default_scorer_config(
        kind, endpoint=getattr(args, "scorer_endpoint", None), threshold=args.threshold
    )


# -- subcommands ----------------------------------------------------------------


def cmd_ingest(args) -> None:
    out = _out_dir(args)
    manifest = RunManifest("ingest", args, out)
    quandaries, answers, report = corpus.ingest(args.input)
    corpus.export(quandaries, answers, out / "corpus.jsonl")
    _atomic_write(
        out / "ingest_report.json",
        json.dumps(
            {
                "quandaries": report.quandary_count,
                "answers": report.answer_count,
                "rejected": [{"line": r.line_no, "reason": r.reason} for r in report.rejected],
            },
            indent=2,
        )
        + "\n",
    )
    manifest.finish([out / "corpus.jsonl", out / "ingest_report.json"])
    print(f"ingested {report.quandary_count} quandaries, {report.answer_count} answers, "
          f"{len(report.rejected)} rejected")


def cmd_index(args) -> None:
    out = _out_dir(args)
    manifest = RunManifest("index", args, out)
    principles = corpus.load_principles(args.input)
    index = retrieval.build_index(principles)
    retrieval.save_index(index, out / "index.jsonl")
    manifest.finish([out / "index.jsonl"])
    print(f"indexed {index.doc_count} principles -> {out / 'index.jsonl'}")


def _load_corpus_quandaries(path: str) -> list[corpus.Quandary]:
    quandaries, _, report = corpus.ingest(path)
    fatal = [r for r in report.rejected if "does not resolve" not in r.reason]
    if fatal:
        raise CliError(f"{len(fatal)} invalid corpus lines, first: {fatal[0].reason!r}")
    return sorted(quandaries, key=lambda q: q.id)


def cmd_candidates(args) -> None:
    out = _out_dir(args)
    manifest = RunManifest("candidates", args, out)
    quandaries = _load_corpus_quandaries(args.input)
    index = retrieval.load_index(args.index) if args.index else None
    handcrafted = corpus.load_principles(args.handcrafted) if args.handcrafted else []
    config = _scorer_config(args)
    client = CompletionClient(_backend_config(args))

    lines = []
    for quandary in quandaries:
        pool = scoring.build_candidate_pool(
            quandary,
            index=index,
            client=client,
            handcrafted=handcrafted,
            top_k=args.top_k,
            seed=args.seed,
        )
        scored, dropped = scoring.score_pool(quandary, pool, config)
        pending = scoring.select_principles(quandary, scored, config, mode="human")
        lines.append(
            {
                "quandary_id": quandary.id,
                "scorer_id": config.scorer_id,
                "polarity": config.polarity,
                "threshold": config.threshold,
                "top_k": args.top_k,
                "token": pending.token,
                "candidates": [
                    {
                        "id": s.principle.id,
                        "text": s.principle.text,
                        "provenance": s.principle.provenance,
                        "score": s.score,
                    }
                    for s in pending.candidates
                ],
                "dropped": [{"id": d.principle.id, "reason": d.reason} for d in dropped],
            }
        )
    _write_jsonl(out / "candidates.jsonl", lines)
    manifest.finish([out / "candidates.jsonl"])
    covered = sum(1 for l in lines if l["candidates"])
    print(f"candidates for {len(lines)} quandaries ({covered} with a non-empty pool) -> {out / 'candidates.jsonl'}")


def cmd_generate(args) -> None:
    out = _out_dir(args)
    manifest = RunManifest("generate", args, out)
    quandaries = {q.id: q for q in _load_corpus_quandaries(args.input)}
    client = CompletionClient(_backend_config(args))

    records = []
    with Path(args.candidates).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            entry = json.loads(line)
            quandary = quandaries.get(entry["quandary_id"])
            if quandary is None:
                raise CliError(f"candidates reference unknown quandary {entry['quandary_id']!r}")
            if not entry["candidates"]:
                continue
            chosen = entry["candidates"][: scoring.MAX_SELECTED]
            trace = tuple(
                ScoredPrinciple(
                    principle=corpus.Principle(id=c["id"], text=c["text"], provenance=c["provenance"]),
                    score=c["score"],
                    scorer_id=entry["scorer_id"],
                    polarity=entry["polarity"],
                )
                for c in entry["candidates"]
            )
            selection = scoring.PrincipleSelection(
                quandary_id=quandary.id,
                principles=tuple(s.principle for s in trace[: len(chosen)]),
                mode="automatic",
                trace=trace,
            )
            answer = generation.generate_answer(
                quandary,
                selection,
                client,
                max_tokens=args.max_tokens,
                temperature=args.temperature,
                seed=args.seed,
            )
            records.append(generation.answer_to_record(answer))
    _write_jsonl(out / "answers.jsonl", records)
    manifest.finish([out / "answers.jsonl"])
    print(f"generated {len(records)} answers -> {out / 'answers.jsonl'}")


def cmd_evaluate(args) -> None:
    out = _out_dir(args)
    manifest = RunManifest("evaluate", args, out)
    _, answers, _ = corpus.ingest(args.references)
    references = list(answers)

    candidates = []
    with Path(args.candidates).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            text = obj.get("concatenated", obj.get("text"))
            if text is None:
                raise CliError("candidate records need 'concatenated' or 'text'")
            candidates.append((obj["quandary_id"], text))

    report = metrics.evaluate_corpus(candidates, references)
    _atomic_write(out / "metric_report.json", json.dumps(report.to_json_dict(), indent=2) + "\n")
    _atomic_write(out / "metric_table.txt", report.format_table())
    manifest.finish([out / "metric_report.json", out / "metric_table.txt"])
    print(report.format_table(), end="")


def cmd_analyze(args) -> None:
    out = _out_dir(args)
    manifest = RunManifest("analyze", args, out)
    records = analysis.load_annotations(args.annotations)
    blinding = analysis.load_blinding(args.blinding)

    reports = [analysis.success_rate(records, c, args.system, blinding) for c in analysis.CRITERIA]
    payload = {
        "system": args.system,
        "criteria": {
            r.criterion: {
                "success_rate": r.success_rate_system,
                "reference_success_rate": r.success_rate_reference,
                "breakdown": r.breakdown,
                "win_tie_loss": list(r.win_tie_loss),
                "total": r.total,
            }
            for r in reports
        },
        "conditional": {
            "coherence->justification": analysis.conditional_rate(
                records, "coherence", "justification", args.system, blinding
            )
        },
    }
    outputs = [out / "analysis_report.json", out / "criteria_table.txt"]
    _atomic_write(out / "criteria_table.txt", analysis.format_criteria_table(reports, args.system))

    if args.scores:
        scores = {k: float(v) for k, v in json.loads(Path(args.scores).read_text()).items()}
        stratified = analysis.build_stratified_report(
            args.metric, scores, records, args.system, blinding, factor=args.factor
        )
        payload["stratified"] = {
            "metric": stratified.metric,
            "mean": stratified.mean,
            "std": stratified.std,
            "factor": stratified.factor,
            "low_n": len(stratified.low_ids),
            "high_n": len(stratified.high_ids),
            "criteria": {
                c.criterion: {"rate_low": c.rate_low, "rate_high": c.rate_high, "p_value": c.p_value}
                for c in stratified.criteria
            },
        }
        _atomic_write(out / "stratified_table.txt", analysis.format_stratified_table([stratified]))
        outputs.append(out / "stratified_table.txt")

    _atomic_write(out / "analysis_report.json", json.dumps(payload, indent=2) + "\n")
    manifest.finish(outputs)
    print(analysis.format_criteria_table(reports, args.system), end="")
    if args.scores:
        print(analysis.format_stratified_table([stratified]), end="")


def cmd_sweep_threshold(args) -> None:
    out = _out_dir(args)
    manifest = RunManifest("sweep-threshold", args, out)
    quandaries = _load_corpus_quandaries(args.input)
    index = retrieval.load_index(args.index) if args.index else None
    handcrafted = corpus.load_principles(args.handcrafted) if args.handcrafted else []
    base = _scorer_config(args)
    client = CompletionClient(_backend_config(args))

    scored_pools = []
    for quandary in quandaries:
        pool = scoring.build_candidate_pool(
            quandary, index=index, client=client, handcrafted=handcrafted, top_k=args.top_k, seed=args.seed
        )
        scored, _ = scoring.score_pool(quandary, pool, base)
        scored_pools.append(scoring.rank_candidates(scored))

    lo, hi, points = args.grid
    if points < 2:
        raise CliError("grid needs at least 2 points")
    rows = []
    from dataclasses import replace

    for i in range(int(points)):
        th = lo + (hi - lo) * i / (points - 1)
        config = replace(base, threshold=th)
        sizes = [len(scoring.dedup(scoring.filter_by_threshold(pool, config))) for pool in scored_pools]
        rows.append(
            {
                "threshold": th,
                "mean_pool_size": sum(sizes) / len(sizes) if sizes else 0.0,
                "coverage": sum(1 for s in sizes if s > 0) / len(sizes) if sizes else 0.0,
            }
        )
    _atomic_write(out / "sweep.json", json.dumps({"scorer": base.scorer_id, "rows": rows}, indent=2) + "\n")
    manifest.finish([out / "sweep.json"])
    print(f"{'threshold':>10}  {'mean pool':>10}  {'coverage':>9}")
    for row in rows:
        print(f"{row['threshold']:>10.4f}  {row['mean_pool_size']:>10.2f}  {row['coverage']:>9.2%}")


def cmd_serve(args) -> None:
    from .service import ServiceConfig, serve

    config = ServiceConfig(
        data_dir=Path(args.data_dir),
        principles_path=Path(args.principles) if args.principles else None,
        handcrafted_path=Path(args.handcrafted) if args.handcrafted else None,
        scorer="remote_relevance" if args.scorer == "remote" else "lexical",
        scorer_endpoint=args.scorer_endpoint,
        threshold=args.threshold,
        top_k=args.top_k,
        backend=_backend_config(args),
        seed=args.seed,
        static_dir=Path(args.static) if args.static else None,
        auth_token=args.auth_token or os.environ.get("QUANDARY_SERVICE_TOKEN") or None,
    )
    app, server = serve(config, host=args.host, port=args.port)
    print(f"serving on http://{args.host}:{server.server_address[1]}/ (data dir {config.data_dir})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass


def cmd_export_annotations(args) -> None:
    from .service import QuandaryService, ServiceConfig

    out = _out_dir(args)
    manifest = RunManifest("export-annotations", args, out)
    service = QuandaryService(ServiceConfig(data_dir=Path(args.data_dir)))
    records = service.export_annotations()
    analysis.save_annotations(records, out / "annotations.jsonl")
    analysis.save_blinding(service.blinding, out / "blinding.json")
    manifest.finish([out / "annotations.jsonl", out / "blinding.json"])
    print(f"exported {len(records)} annotation records -> {out / 'annotations.jsonl'}")


# -- parser -----------------------------------------------------------------------


def _grid(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, points = text.split(":")
        return float(lo), float(hi), int(points)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("grid must look like MIN:MAX:POINTS") from exc


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="quandary", description=__doc__)
    parser.add_argument("--config", help="JSON file of default flag values (flags win)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, backend=True, scorer=True):
        p.add_argument("--seed", type=int, default=0)
        if backend:
            p.add_argument("--backend", choices=["mock", "http"], default="mock")
            p.add_argument("--backend-url")
        if scorer:
            p.add_argument("--scorer", choices=["lexical", "remote"], default="lexical")
            p.add_argument("--scorer-endpoint")
            p.add_argument("--threshold", type=float, default=None)
            p.add_argument("--top-k", type=int, default=10)

    p = sub.add_parser("ingest", help="load and validate a corpus file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build the principle retrieval index")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("candidates", help="rank candidate principles per quandary")
    p.add_argument("--input", required=True)
    p.add_argument("--index")
    p.add_argument("--handcrafted")
    p.add_argument("--output", required=True)
    common(p)
    p.set_defaults(func=cmd_candidates)

    p = sub.add_parser("generate", help="generate principle-guided answers")
    p.add_argument("--input", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--max-tokens", type=int, default=512)
    p.add_argument("--temperature", type=float, default=0.7)
    common(p, scorer=False)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score generated answers against references")
    p.add_argument("--candidates", required=True)
    p.add_argument("--references", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="success rates and stratified tables from annotations")
    p.add_argument("--annotations", required=True)
    p.add_argument("--blinding", required=True)
    p.add_argument("--system", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--scores", help="JSON of quandary id -> metric score for stratification")
    p.add_argument("--metric", default="bertscore")
    p.add_argument("--factor", type=float, default=0.5)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep-threshold", help="scan th over a grid, report pool sizes and coverage")
    p.add_argument("--input", required=True)
    p.add_argument("--index")
    p.add_argument("--handcrafted")
    p.add_argument("--output", required=True)
    p.add_argument("--grid", type=_grid, default=(0.0, 1.5, 20))
    common(p)
    p.set_defaults(func=cmd_sweep_threshold)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--principles")
    p.add_argument("--handcrafted")
    p.add_argument("--static")
    p.add_argument("--auth-token")
    common(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-annotations", help="export annotation records from a service data dir")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_export_annotations)

    return parser, dict(sub.choices)


def main(argv: list[str] | None = None) -> int:
    parser, subparsers = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)

    # --config supplies defaults; explicit flags win. Defaults must be applied
    # per subparser: subcommands parse into a fresh namespace, so main-parser
    # defaults would be clobbered by the subparser's own.
    config_path = None
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif arg.startswith("--config="):
            config_path = arg.split("=", 1)[1]
    if config_path:
        defaults = json.loads(Path(config_path).read_text())
        for sp in subparsers.values():
            sp.set_defaults(**{k: v for k, v in defaults.items() if k != "func"})

    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (CliError, corpus.CorpusError, retrieval.RetrievalError, scoring.ScoringError,
            metrics.MetricError, analysis.AnalysisError, FileNotFoundError, ValueError) as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

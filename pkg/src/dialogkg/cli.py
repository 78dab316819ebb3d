"""Command-line entry point: ``dialogkg evaluate | probe | graph-dump``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import EngineConfig, load_config
from .embedding import EmbeddingCache, HttpEmbedder, hash_embedder, load_table_file
from .engine import Providers, SessionReport, read_sessions, score_session
from .errors import ConfigError, EvaluationError
from .extraction import (
    HttpExtractor,
    RuleExtractor,
    ScriptedExtractor,
    triples_from_json_list,
    turn_text,
)
from .probes import PROBE_IDS, load_probe, load_walkthrough, run_probe_suite

logger = logging.getLogger("dialogkg")

EXIT_OK, EXIT_EVAL, EXIT_CONFIG = 0, 1, 2


def make_embedder(spec: str):
    if spec == "hash":
        return hash_embedder()
    if spec.startswith("table:"):
        return load_table_file(spec[len("table:"):], hash_embedder())
    if spec == "http":
        return HttpEmbedder.from_env()
    raise ConfigError(f"unknown embedder {spec!r}; expected hash, table:<file> or http")


def make_extractor(spec: str, raw_lines: list[str]):
    if spec == "rules":
        return RuleExtractor()
    if spec == "http":
        return HttpExtractor.from_env()
    if spec == "inline":
        # triples shipped alongside each turn in the input file
        script = {}
        for line in raw_lines:
            if not line.strip():
                continue
            for t in json.loads(line).get("turns", []):
                script[turn_text(t["prompt"], t["response"])] = triples_from_json_list(t.get("triples", []))
        return ScriptedExtractor(script)
    raise ConfigError(f"unknown extractor {spec!r}; expected rules, http or inline")


def _safe_name(session_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", session_id) or "_"


def write_series(report: SessionReport, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["turn", "S_loc", "S_cons", "S_log", "Q"])
        for ts in report.turn_scores:
            w.writerow([ts.turn, repr(ts.s_loc), repr(ts.s_cons), repr(ts.s_log), repr(ts.q)])


def cmd_evaluate(args) -> int:
    config = load_config(args.config)
    try:
        raw = Path(args.input).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read input {args.input}: {exc}") from None
    sessions = read_sessions(raw)
    if args.parallel < 1:
        raise ConfigError("--parallel must be at least 1")
    providers = Providers(EmbeddingCache(make_embedder(args.embedder)), make_extractor(args.extractor, raw))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_lock = threading.Lock()

    def run(session):
        try:
            report, failed = score_session(session, providers, config), False
        except EvaluationError as exc:
            logger.error("%s", exc)
            report, failed = exc.partial, True
        text = report.to_json()
        with write_lock:
            name = _safe_name(session.session_id)
            (out / f"{name}.json").write_text(text, encoding="utf-8")
            if args.emit_series:
                write_series(report, out / f"{name}.series.csv")
        return session.session_id, report, failed

    with ThreadPoolExecutor(max_workers=args.parallel) as pool:
        results = list(pool.map(run, sessions))

    failures = 0
    for sid, report, failed in results:
        failures += failed
        status = "FAILED" if failed else f"{report.final_score:.4f} {report.trend.value}"
        print(f"{sid}\t{len(report.turn_scores)} turns\t{status}")
    return EXIT_EVAL if failures else EXIT_OK


def cmd_probe(args) -> int:
    config = load_config(args.config)
    extractor = HttpExtractor.from_env() if args.live_extraction else None
    verdicts = run_probe_suite(config, extractor)
    for v in verdicts:
        mark = "PASS" if v.passed else "FAIL"
        fired = ",".join(v.fired) or "none"
        print(f"{mark} {v.session_id} expected={v.expected or 'none'} fired={fired}")
    passed = sum(v.passed for v in verdicts)
    print(f"{passed}/{len(verdicts)} probe sessions behave as expected")
    if args.output:
        Path(args.output).write_text(
            json.dumps([v.to_dict() for v in verdicts], indent=2) + "\n", encoding="utf-8"
        )
    return EXIT_OK if passed == len(verdicts) else EXIT_EVAL


def cmd_graph_dump(args) -> int:
    """Print a session's final graph from a saved report, or score a bundled session."""
    saved = Path(args.reports) / f"{_safe_name(args.session)}.json"
    if saved.exists():
        graph = json.loads(saved.read_text(encoding="utf-8"))["graph"]
    elif args.session in PROBE_IDS:
        case = load_probe(args.session)
        graph = score_session(case.session, case.providers()).graph.to_dict(include_embeddings=False)
    elif args.session == "walkthrough":
        w = load_walkthrough()
        graph = score_session(w.session, w.providers, w.config).graph.to_dict(include_embeddings=False)
    else:
        raise ConfigError(f"no report for session {args.session!r} under {args.reports}")
    text = json.dumps(graph, indent=2, sort_keys=True) + "\n"
    if args.output:
        target = Path(args.output)
        if target.is_dir():
            target = target / f"{_safe_name(args.session)}.graph.json"
        target.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dialogkg", description="Score multi-turn dialogues.")
    p.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = p.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="score sessions from a JSON Lines file")
    ev.add_argument("--input", required=True)
    ev.add_argument("--config")
    ev.add_argument("--output", required=True, help="directory for per-session reports")
    ev.add_argument("--embedder", default="hash", help="hash | table:<file> | http")
    ev.add_argument("--extractor", default="rules", help="rules | http | inline")
    ev.add_argument("--emit-series", action="store_true", help="also write per-turn score CSVs")
    ev.add_argument("--parallel", type=int, default=1)
    ev.set_defaults(func=cmd_evaluate)

    pr = sub.add_parser("probe", help="run the bundled diagnostic sessions")
    pr.add_argument("--live-extraction", action="store_true", help="re-extract triples over HTTP")
    pr.add_argument("--config")
    pr.add_argument("--output", help="write verdicts as JSON here")
    pr.set_defaults(func=cmd_probe)

    gd = sub.add_parser("graph-dump", help="print a session's knowledge graph")
    gd.add_argument("--session", required=True)
    gd.add_argument("--reports", default="reports", help="directory written by evaluate")
    gd.add_argument("--output")
    gd.set_defaults(func=cmd_graph_dump)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Phase-granular command line: fw <command>.

Commands mirror the pipeline stages so a crashed cycle can be resumed one
phase at a time: ingest, issue, resolve, benchmark, export, score, plus the
closed-loop simulate driver and the wall-clock cycle driver.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date
from pathlib import Path

from .benchmark import BenchmarkAnswer, GoldRecord, read_jsonl, score_benchmark_batch
from .domain import dumps_canonical
from .ledger import write_training_batch
from .orchestrator import CycleConfig, Orchestrator
from .prompts import BenchmarkQuestion
from .scoring import ProbPrediction, summarize_probabilistic
from .sources import fetch_all


def _load_config(path: str | None) -> CycleConfig:
    if path is None:
        return CycleConfig()
    return CycleConfig.from_yaml(Path(path))


def _orchestrator(args: argparse.Namespace) -> Orchestrator:
    return Orchestrator(_load_config(args.config), Path(args.run_dir))


def _cmd_ingest(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    day = date.fromisoformat(args.day)
    result = fetch_all(config.source_specs(), day)
    out = Path(args.out) if args.out else Path(f"candidates-{day.isoformat()}.jsonl")
    with out.open("w", encoding="utf-8") as fh:
        for event in result.events:
            fh.write(dumps_canonical(event.to_dict()) + "\n")
    print(f"wrote {len(result.events)} candidates to {out}")
    for error in result.errors:
        print(f"record error at line {error.line_number}: {error.message}", file=sys.stderr)
    return 0


def _cmd_issue(args: argparse.Namespace) -> int:
    report = _orchestrator(args).run_issue_phase(date.fromisoformat(args.day))
    print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    return 0


def _cmd_resolve(args: argparse.Namespace) -> int:
    report = _orchestrator(args).run_resolve_phase(date.fromisoformat(args.day))
    print(report.render_text())
    return 0


def _cmd_benchmark(args: argparse.Namespace) -> int:
    report = _orchestrator(args).run_benchmark_phase(date.fromisoformat(args.day))
    print(json.dumps(report, indent=1, sort_keys=True))
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    orch = _orchestrator(args)
    day = date.fromisoformat(args.day)
    for agent in orch.config.agents:
        groups = orch.ledger_for(agent).export_training_batch(day)
        path = orch.export_path(agent, day)
        write_training_batch(path, groups)
        print(f"{agent}: {len(groups)} groups -> {path}")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    preds_rows = read_jsonl(Path(args.preds))
    truth_rows = read_jsonl(Path(args.truth))

    prob_rows = [r for r in preds_rows if "prob" in r]
    if prob_rows:
        labels = {r["question_id"]: int(r["label"]) for r in truth_rows}
        preds = [
            ProbPrediction(prob=r["prob"], label=labels[r["question_id"]])
            for r in prob_rows
            if r["question_id"] in labels
        ]
        report = summarize_probabilistic(preds, seed=args.seed)
    else:
        questions = [BenchmarkQuestion.from_dict(r) for r in read_jsonl(Path(args.questions))]
        answers = {r["question_id"]: BenchmarkAnswer.from_dict(r) for r in preds_rows}
        gold = {r["question_id"]: GoldRecord.from_dict(r) for r in truth_rows}
        report = score_benchmark_batch(questions, answers, gold)
    print(report.render_text())
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    from dataclasses import replace

    config = replace(
        config,
        seed=args.seed if args.seed is not None else config.seed,
        agents=tuple(args.agents.split(",")) if args.agents else config.agents,
    )
    if args.questions_per_day is not None:
        config = replace(config, questions_per_day=args.questions_per_day)
    orch = Orchestrator(config, Path(args.run_dir))
    result = orch.simulate(args.days)
    print(f"simulated {args.days} days in {result.elapsed_seconds:.1f}s -> {result.run_dir}")
    for agent, report in result.final_reports.items():
        print(f"[{agent}]")
        print(report.render_text())
    return 0


def _cmd_cycle(args: argparse.Namespace) -> int:
    if not args.live:
        print("cycle currently supports --live only; use simulate for virtual runs", file=sys.stderr)
        return 2
    executed = _orchestrator(args).run_due_phases()
    print("executed: " + (", ".join(executed) if executed else "nothing due"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fw", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, day: bool = True) -> None:
        p.add_argument("--config", default=None, help="YAML cycle config")
        p.add_argument("--run-dir", default="fw-run", help="run directory")
        if day:
            p.add_argument("--day", required=True, help="ISO date, e.g. 2026-03-02")

    p = sub.add_parser("ingest", help="fetch candidate events for a day")
    p.add_argument("--config", default=None)
    p.add_argument("--day", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("issue", help="run the issue phase for a day")
    common(p)
    p.set_defaults(func=_cmd_issue)

    p = sub.add_parser("resolve", help="resolve and backfill a day's batch")
    common(p)
    p.set_defaults(func=_cmd_resolve)

    p = sub.add_parser("benchmark", help="issue and lag-score the daily benchmark")
    common(p)
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("export", help="re-export training groups for a day")
    common(p)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("score", help="score a predictions file against answers")
    p.add_argument("--in", dest="preds", required=True, help="predictions JSONL")
    p.add_argument("--truth", required=True, help="answers JSONL")
    p.add_argument("--questions", default=None, help="benchmark questions JSONL")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("simulate", help="run a closed-loop multi-day simulation")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--agents", default=None, help="comma list: oracle,constant,noisy,malformed")
    p.add_argument("--questions-per-day", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--run-dir", default="fw-run")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("cycle", help="run due phases against the wall clock")
    common(p, day=False)
    p.add_argument("--live", action="store_true")
    p.set_defaults(func=_cmd_cycle)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

"""The daily cycle: issue questions, run rollouts, resolve, backfill, export.

Timeline for one batch: questions are issued at the configured issue time on
day t (default 20:00) and their outcomes are retrieved at the configured
resolve time on day t+1 (default 20:30). Retrieved outcomes are backfilled
into the stored prefixes; questions whose outcomes could not be retrieved are
discarded and excluded from training and scoring. The daily benchmark runs on
its own two-day resolution lag.

Two modes share all of this code. ``simulate`` drives D virtual days against
a synthetic world with an injected clock (no waiting, fully deterministic
given the seed); ``live`` schedules the same phases by wall clock and binds
the agent/search/judge interfaces to external HTTP endpoints. Every phase is
a pure function of (config, ledger state, day), so a run can be killed
between phases and re-invoked without changing the final ledger.
"""

from __future__ import annotations

import json
import time as _walltime
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence
from zoneinfo import ZoneInfo

import yaml

from .agents import SimulatedSearchTool, make_scripted_agent
from .benchmark import (
    BenchmarkAnswer,
    BenchmarkPoolConfig,
    DegenerateAnswerer,
    GoldRecord,
    SeededAnswerer,
    generate_benchmark_pool,
    read_jsonl,
    score_benchmark_batch,
    write_jsonl,
)
from .domain import Question, TrajectoryStatus
from .embedding import HashingEmbedder
from .ledger import TrajectoryLedger, write_training_batch
from .prompts import (
    BenchmarkCaps,
    BenchmarkQuestion,
    load_default_templates,
    render_benchmark_prompt,
    render_prediction_prompt,
    select_daily_benchmark,
)
from .qpipeline import (
    DEFAULT_BLOCKLIST,
    DEFAULT_DOMAIN_RULES,
    DEFAULT_TEMPLATES,
    DomainRule,
    MeaningfulJudge,
    QuestionTemplate,
    ResolvableJudge,
    SafeJudge,
    apply_filters,
    construct_pair,
    resample,
)
from .resolve import SyntheticTruthResolver, FileLookupResolver, resolve_batch
from .rollout import RolloutLimits, run_group
from .scoring import ProbPrediction, ScoreReport, summarize_probabilistic, trajectory_reward
from .seeding import derive_seed
from .sources import SourceSpec, fetch_all, write_truth_file


@dataclass(frozen=True)
class BenchmarkSettings:
    enabled: bool = True
    lag_days: int = 2
    caps: BenchmarkCaps = field(default_factory=BenchmarkCaps)
    pool: BenchmarkPoolConfig = field(default_factory=BenchmarkPoolConfig)
    #: scripted answerer skill per agent name; unknown names get 0.5
    skills: Mapping[str, float] = field(
        default_factory=lambda: {"oracle": 0.85, "noisy": 0.7, "constant": 0.35}
    )


@dataclass(frozen=True)
class CycleConfig:
    seed: int = 0
    start_day: date = date(2026, 3, 2)
    issue_time: str = "20:00"
    resolve_time: str = "20:30"
    timezone: str = "UTC"
    questions_per_day: int = 500
    rollouts_per_question: int = 4
    unresolved_policy: str = "discard"
    agents: tuple[str, ...] = ("oracle", "constant")
    event_rate: int = 300
    unresolved_rate: float = 0.3565
    information_level: float = 1.0
    limits: RolloutLimits = field(default_factory=RolloutLimits)
    benchmark: BenchmarkSettings = field(default_factory=BenchmarkSettings)
    sources: tuple[SourceSpec, ...] = ()
    domain_rules: tuple[DomainRule, ...] = DEFAULT_DOMAIN_RULES
    question_templates: tuple[QuestionTemplate, ...] = DEFAULT_TEMPLATES
    blocklist: tuple[str, ...] = DEFAULT_BLOCKLIST
    answer_files: Mapping[str, str] = field(default_factory=dict)
    max_workers: int = 1

    def __post_init__(self) -> None:
        if self.questions_per_day < 0:
            raise ValueError("questions_per_day must be non-negative")
        if self.rollouts_per_question < 1:
            raise ValueError("rollouts_per_question must be at least 1")
        if self.unresolved_policy != "discard":
            raise ValueError("the only supported unresolved policy is 'discard'")
        if not 0.0 <= self.unresolved_rate <= 1.0:
            raise ValueError("unresolved_rate must lie in [0, 1]")
        if self.max_workers < 1:
            raise ValueError("max_workers must be at least 1")
        _parse_clock(self.issue_time)
        _parse_clock(self.resolve_time)
        ZoneInfo(self.timezone)

    def source_specs(self) -> tuple[SourceSpec, ...]:
        if self.sources:
            return self.sources
        return (
            SourceSpec(
                source_id="synthetic",
                kind="synthetic",
                params={
                    "seed": self.seed,
                    "event_rate": self.event_rate,
                    "unresolved_rate": self.unresolved_rate,
                },
            ),
        )

    @classmethod
    def from_yaml(cls, path: Path) -> "CycleConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        kwargs: dict[str, Any] = {}
        simple = (
            "seed", "issue_time", "resolve_time", "timezone", "questions_per_day",
            "rollouts_per_question", "unresolved_policy", "event_rate",
            "unresolved_rate", "information_level", "max_workers",
        )
        for key in simple:
            if key in raw:
                kwargs[key] = raw[key]
        if "start_day" in raw:
            kwargs["start_day"] = date.fromisoformat(str(raw["start_day"]))
        if "agents" in raw:
            kwargs["agents"] = tuple(raw["agents"])
        if "limits" in raw:
            kwargs["limits"] = RolloutLimits(**raw["limits"])
        if "benchmark" in raw:
            b = dict(raw["benchmark"])
            if "caps" in b:
                b["caps"] = BenchmarkCaps(**b["caps"])
            if "pool" in b:
                b["pool"] = BenchmarkPoolConfig(**b["pool"])
            kwargs["benchmark"] = BenchmarkSettings(**b)
        if "sources" in raw:
            kwargs["sources"] = tuple(
                SourceSpec(
                    source_id=s["source_id"],
                    kind=s["kind"],
                    domain_hint=s.get("domain_hint", "other"),
                    params=s.get("params", {}),
                )
                for s in raw["sources"]
            )
        if "domain_rules" in raw:
            kwargs["domain_rules"] = tuple(
                DomainRule(label=r["label"], keywords=tuple(r["keywords"]))
                for r in raw["domain_rules"]
            )
        if "question_templates" in raw:
            kwargs["question_templates"] = tuple(
                QuestionTemplate(
                    name=t["name"],
                    pattern=t["pattern"],
                    description_pattern=t.get("description_pattern"),
                )
                for t in raw["question_templates"]
            )
        if "blocklist" in raw:
            kwargs["blocklist"] = tuple(raw["blocklist"])
        if "answer_files" in raw:
            kwargs["answer_files"] = dict(raw["answer_files"])
        return cls(**kwargs)


def _parse_clock(text: str) -> time:
    hour, minute = text.split(":")
    return time(int(hour), int(minute))


@dataclass
class IssueReport:
    day: date
    candidates: int = 0
    feed_errors: int = 0
    constructed: int = 0
    construct_errors: int = 0
    filtered_kept: int = 0
    questions_issued: int = 0
    rollouts_recorded: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "day": self.day.isoformat(),
            "candidates": self.candidates,
            "feed_errors": self.feed_errors,
            "constructed": self.constructed,
            "construct_errors": self.construct_errors,
            "filtered_kept": self.filtered_kept,
            "questions_issued": self.questions_issued,
            "rollouts_recorded": dict(self.rollouts_recorded),
        }


@dataclass
class CycleReport:
    """Accounting for one matured batch: issued on ``day``, resolved next day."""

    day: date
    questions_issued: int
    rollouts_recorded: dict[str, int]
    outcomes_resolved: int
    unresolved_count: int
    unresolved_reasons: dict[str, int]
    groups_exported: dict[str, int]
    metrics: dict[str, dict[str, Any]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "day": self.day.isoformat(),
            "questions_issued": self.questions_issued,
            "rollouts_recorded": dict(self.rollouts_recorded),
            "outcomes_resolved": self.outcomes_resolved,
            "unresolved_count": self.unresolved_count,
            "unresolved_reasons": dict(self.unresolved_reasons),
            "groups_exported": dict(self.groups_exported),
            "metrics": {k: dict(v) for k, v in self.metrics.items()},
        }

    def render_text(self) -> str:
        lines = [
            f"batch day        {self.day.isoformat()}",
            f"issued           {self.questions_issued}",
            f"resolved         {self.outcomes_resolved}",
            f"unresolved       {self.unresolved_count} {self.unresolved_reasons}",
        ]
        def cell(value: Any) -> str:
            return "--" if value is None else f"{value:.4f}"

        for agent in sorted(self.metrics):
            m = self.metrics[agent]
            lines.append(
                f"{agent:<12} n={m['n']:<5} acc={cell(m['accuracy'])} "
                f"brier={cell(m['brier'])} ece={cell(m.get('ece'))} "
                f"groups={self.groups_exported.get(agent, 0)}"
            )
        return "\n".join(lines)


@dataclass
class SimulationResult:
    run_dir: Path
    cycle_reports: list[CycleReport]
    benchmark_reports: list[dict[str, Any]]
    final_reports: dict[str, ScoreReport]
    elapsed_seconds: float


class Orchestrator:
    """Drives the phases against one run directory.

    All state lives on disk (question batches, sidecars, ledgers, exports,
    reports); constructing an orchestrator over an existing run directory
    resumes exactly where the previous process stopped.
    """

    def __init__(self, config: CycleConfig, run_dir: Path):
        self.config = config
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.templates = load_default_templates()
        self.question_templates = config.question_templates
        self.judges = [
            ResolvableJudge(),
            MeaningfulJudge(),
            SafeJudge(blocklist=config.blocklist),
        ]
        self.embedder = HashingEmbedder(seed=config.seed)
        self._ledgers: dict[str, TrajectoryLedger] = {}

    # -- paths ---------------------------------------------------------------

    def questions_path(self, day: date) -> Path:
        return self.run_dir / "questions" / f"questions-{day.isoformat()}.jsonl"

    def pairs_path(self, day: date) -> Path:
        return self.run_dir / "pairs" / f"pairs-{day.isoformat()}.jsonl"

    def verdicts_path(self, day: date) -> Path:
        return self.run_dir / "filters" / f"verdicts-{day.isoformat()}.jsonl"

    def candidates_path(self, day: date) -> Path:
        return self.run_dir / "candidates" / f"candidates-{day.isoformat()}.jsonl"

    def truth_path(self, day: date) -> Path:
        return self.run_dir / "truth" / f"truth-{day.isoformat()}.jsonl"

    def hints_path(self, day: date) -> Path:
        return self.run_dir / "hints" / f"hints-{day.isoformat()}.jsonl"

    def export_path(self, agent: str, day: date) -> Path:
        return self.run_dir / "exports" / agent / f"train-{day.isoformat()}.jsonl"

    def report_path(self, name: str) -> Path:
        return self.run_dir / "reports" / name

    def ledger_for(self, agent: str) -> TrajectoryLedger:
        if agent not in self._ledgers:
            self._ledgers[agent] = TrajectoryLedger(self.run_dir / "ledgers" / agent)
        return self._ledgers[agent]

    # -- clock -----------------------------------------------------------------

    def phase_datetime(self, day: date, clock_text: str) -> datetime:
        local = datetime.combine(
            day, _parse_clock(clock_text), tzinfo=ZoneInfo(self.config.timezone)
        )
        return local.astimezone(timezone.utc)

    # -- issue phase -------------------------------------------------------------

    def run_issue_phase(self, day: date) -> IssueReport:
        """Fetch, construct, filter, resample, render, and roll out one day."""
        report = IssueReport(day=day)
        questions = self._load_or_build_questions(day, report)
        report.questions_issued = len(questions)

        issue_at = self.phase_datetime(day, self.config.issue_time)
        search_tool = self._search_tool_for(day, questions)
        prob_template = self.templates["probabilistic"]
        for agent_name in self.config.agents:
            agent = make_scripted_agent(agent_name, seed=self.config.seed)
            ledger = self.ledger_for(agent_name)
            pending = [
                q for q in sorted(questions, key=lambda q: q.id)
                if not ledger.has_question(q.id)  # restart: this group already ran
            ]

            def roll(question: Question):
                prompt = render_prediction_prompt(question, prob_template)
                return run_group(
                    question,
                    prompt,
                    agent,
                    search_tool,
                    self.config.limits,
                    self.config.rollouts_per_question,
                    clock=lambda: issue_at,
                )

            if self.config.max_workers > 1:
                # Rollouts fan out to a bounded pool; groups are appended in
                # question order afterwards so the ledger stays deterministic.
                with ThreadPoolExecutor(max_workers=self.config.max_workers) as pool:
                    group_results = list(pool.map(roll, pending))
            else:
                group_results = [roll(q) for q in pending]

            recorded = 0
            for results in group_results:
                ledger.append_prefix_batch([(r.trajectory, r.transcript) for r in results])
                recorded += len(results)
            report.rollouts_recorded[agent_name] = recorded

        self._write_json(self.report_path(f"issue-{day.isoformat()}.json"), report.to_dict())
        return report

    def _load_or_build_questions(self, day: date, report: IssueReport) -> list[Question]:
        path = self.questions_path(day)
        if path.exists():
            questions = [Question.from_dict(row) for row in read_jsonl(path)]
            report.questions_issued = len(questions)
            return questions

        fetched = fetch_all(self.config.source_specs(), day)
        report.candidates = len(fetched.events)
        report.feed_errors = len(fetched.errors)
        write_jsonl(self.candidates_path(day), (e.to_dict() for e in fetched.events))
        if fetched.truth_rows:
            write_truth_file(self.truth_path(day), fetched.truth_rows)
        if fetched.hint_rows:
            write_truth_file(self.hints_path(day), fetched.hint_rows)

        issue_at = self.phase_datetime(day, self.config.issue_time)
        pairs = []
        for event in fetched.events:
            try:
                pairs.append(construct_pair(event, self.question_templates, issue_at))
            except Exception:
                report.construct_errors += 1
        report.constructed = len(pairs)

        kept = []
        verdict_rows = []
        for pair in pairs:
            decision = apply_filters(pair, self.judges)
            verdict_rows.extend(v.to_dict() for v in decision.verdicts)
            if decision.keep:
                kept.append(pair)
        write_jsonl(self.verdicts_path(day), verdict_rows)
        report.filtered_kept = len(kept)

        selected = resample(
            kept,
            self.config.questions_per_day,
            self.config.domain_rules,
            self.embedder,
            derive_seed(self.config.seed, "resample", day.isoformat()),
        )
        write_jsonl(self.pairs_path(day), (p.to_dict() for p in selected))
        questions = [p.question for p in selected]
        write_jsonl(path, (q.to_dict() for q in questions))
        return questions

    def _search_tool_for(self, day: date, questions: Sequence[Question]) -> SimulatedSearchTool:
        latent_by_identifier: dict[str, float] = {}
        hints_path = self.hints_path(day)
        if hints_path.exists():
            for row in read_jsonl(hints_path):
                latent_by_identifier[row["identifier"]] = float(row["latent_p"])
        latent_by_text = {
            q.text: latent_by_identifier[q.resolver_metadata["identifier"]]
            for q in questions
            if q.resolver_metadata.get("identifier") in latent_by_identifier
        }
        return SimulatedSearchTool(
            latent_by_text=latent_by_text,
            information_level=self.config.information_level,
            seed=self.config.seed,
        )

    # -- resolve phase --------------------------------------------------------

    def run_resolve_phase(self, day: date) -> CycleReport:
        """Resolve and backfill the batch issued on ``day`` (runs on day+1)."""
        path = self.questions_path(day)
        if not path.exists():
            raise FileNotFoundError(f"no issued batch found for {day.isoformat()}")
        questions = [Question.from_dict(row) for row in read_jsonl(path)]
        now = self.phase_datetime(day + timedelta(days=1), self.config.resolve_time)
        registry = self._resolver_registry()
        resolution = resolve_batch(questions, registry, now)

        rollouts: dict[str, int] = {}
        groups_exported: dict[str, int] = {}
        metrics: dict[str, dict[str, Any]] = {}
        for agent_name in self.config.agents:
            ledger = self.ledger_for(agent_name)
            for outcome in resolution.outcomes:
                ledger.backfill(outcome.question_id, outcome, trajectory_reward)
            for unresolved in resolution.unresolved:
                ledger.discard(unresolved.question_id, unresolved.reason, now)
            groups = ledger.export_training_batch(day)
            write_training_batch(self.export_path(agent_name, day), groups)
            groups_exported[agent_name] = len(groups)

            batch_qids = set(q.id for q in questions)
            resolved_trajectories = [
                t
                for t in ledger.all_trajectories()
                if t.question_id in batch_qids and t.status is TrajectoryStatus.RESOLVED
            ]
            rollouts[agent_name] = sum(
                len(ledger.trajectories_for(qid)) for qid in batch_qids if ledger.has_question(qid)
            )
            metrics[agent_name] = self._batch_metrics(resolved_trajectories)

        report = CycleReport(
            day=day,
            questions_issued=len(questions),
            rollouts_recorded=rollouts,
            outcomes_resolved=len(resolution.outcomes),
            unresolved_count=len(resolution.unresolved),
            unresolved_reasons=resolution.unresolved_reasons(),
            groups_exported=groups_exported,
            metrics=metrics,
        )
        if report.outcomes_resolved + report.unresolved_count != report.questions_issued:
            raise RuntimeError("batch accounting broke: issued != resolved + unresolved")
        base = self.report_path(f"cycle-{day.isoformat()}")
        self._write_json(base.with_suffix(".json"), report.to_dict())
        base.with_suffix(".txt").write_text(report.render_text() + "\n", encoding="utf-8")
        return report

    def _resolver_registry(self) -> dict[str, Any]:
        truth_files = sorted((self.run_dir / "truth").glob("truth-*.jsonl"))
        registry: dict[str, Any] = {}
        if truth_files:
            registry["synthetic"] = SyntheticTruthResolver.from_files(truth_files)
        for key, answer_file in self.config.answer_files.items():
            registry[key] = FileLookupResolver(path=Path(answer_file))
        return registry

    def _batch_metrics(self, trajectories: Sequence[Any]) -> dict[str, Any]:
        preds = [
            ProbPrediction(prob=t.final_probability, label=t.label) for t in trajectories
        ]
        if not preds:
            return {"n": 0, "accuracy": None, "brier": None, "ece": None, "mean_reward": None}
        summary = summarize_probabilistic(preds, with_intervals=False)
        mean_reward = sum(t.reward for t in trajectories) / len(trajectories)
        return {
            "n": len(preds),
            "accuracy": summary.accuracy,
            "brier": summary.brier,
            "ece": summary.ece,
            "mean_reward": mean_reward,
        }

    # -- benchmark phase -------------------------------------------------------

    def run_benchmark_phase(self, day: date) -> dict[str, Any]:
        """Issue today's benchmark batch and score the lagged one."""
        settings = self.config.benchmark
        bench_dir = self.run_dir / "benchmark"
        issued_path = bench_dir / f"issued-{day.isoformat()}.jsonl"
        gold_path = bench_dir / f"gold-{day.isoformat()}.jsonl"

        if issued_path.exists():
            selection = [BenchmarkQuestion.from_dict(r) for r in read_jsonl(issued_path)]
        else:
            pool, gold = generate_benchmark_pool(day, settings.pool, self.config.seed)
            selection = select_daily_benchmark(
                pool, settings.caps, derive_seed(self.config.seed, "bench-day", day.isoformat())
            )
            selected_ids = {q.id for q in selection}
            write_jsonl(issued_path, (q.to_dict() for q in selection))
            write_jsonl(gold_path, (g.to_dict() for g in gold if g.question_id in selected_ids))

        gold_records = {
            g.question_id: g for g in map(GoldRecord.from_dict, read_jsonl(gold_path))
        }
        for agent_name in self.config.agents:
            preds_path = bench_dir / f"preds-{agent_name}-{day.isoformat()}.jsonl"
            if preds_path.exists():
                continue
            answerer = self._benchmark_answerer(agent_name, gold_records)
            answers = []
            for question in selection:
                prompt = render_benchmark_prompt(question, self.templates[question.qtype])
                answers.append(answerer.answer(question, prompt).to_dict())
            write_jsonl(preds_path, answers)

        report: dict[str, Any] = {
            "day": day.isoformat(),
            "issued": len(selection),
            "issued_by_type": _count_by_type(selection),
            "scored_day": None,
            "scores": {},
        }

        target_day = day - timedelta(days=settings.lag_days)
        target_issued = bench_dir / f"issued-{target_day.isoformat()}.jsonl"
        if target_issued.exists():
            report["scored_day"] = target_day.isoformat()
            questions = [BenchmarkQuestion.from_dict(r) for r in read_jsonl(target_issued)]
            target_gold = {
                g.question_id: g
                for g in map(
                    GoldRecord.from_dict,
                    read_jsonl(bench_dir / f"gold-{target_day.isoformat()}.jsonl"),
                )
            }
            for agent_name in self.config.agents:
                preds_path = bench_dir / f"preds-{agent_name}-{target_day.isoformat()}.jsonl"
                if not preds_path.exists():
                    continue
                answers = {
                    a.question_id: a
                    for a in map(BenchmarkAnswer.from_dict, read_jsonl(preds_path))
                }
                score = score_benchmark_batch(questions, answers, target_gold)
                report["scores"][agent_name] = score.to_dict()
                score_txt = bench_dir / f"scores-{agent_name}-{day.isoformat()}.txt"
                score_txt.parent.mkdir(parents=True, exist_ok=True)
                score_txt.write_text(score.render_text() + "\n", encoding="utf-8")

        self._write_json(bench_dir / f"benchmark-{day.isoformat()}.json", report)
        return report

    def _benchmark_answerer(self, agent_name: str, gold: Mapping[str, GoldRecord]):
        if agent_name == "malformed":
            return DegenerateAnswerer()
        skill = float(self.config.benchmark.skills.get(agent_name, 0.5))
        return SeededAnswerer(name=agent_name, skill=skill, seed=self.config.seed, gold=gold)

    # -- simulation --------------------------------------------------------------

    def simulate(self, days: int) -> SimulationResult:
        """Run D virtual days end to end; deterministic given the config seed."""
        if days < 1:
            raise ValueError("simulation needs at least one day")
        started = _walltime.monotonic()
        cycle_reports: list[CycleReport] = []
        benchmark_reports: list[dict[str, Any]] = []
        for offset in range(days):
            day = self.config.start_day + timedelta(days=offset)
            self.run_issue_phase(day)
            if offset > 0:
                cycle_reports.append(self.run_resolve_phase(day - timedelta(days=1)))
            if self.config.benchmark.enabled:
                benchmark_reports.append(self.run_benchmark_phase(day))
        cycle_reports.append(
            self.run_resolve_phase(self.config.start_day + timedelta(days=days - 1))
        )

        final_reports = self._final_reports()
        elapsed = _walltime.monotonic() - started
        summary = {
            "days": days,
            "elapsed_seconds": elapsed,
            "cycles": [r.to_dict() for r in cycle_reports],
            "benchmarks": benchmark_reports,
            "final": {agent: report.to_dict() for agent, report in final_reports.items()},
        }
        self._write_json(self.report_path("summary.json"), summary)
        text = ["simulation summary", "=" * 60]
        for r in cycle_reports:
            text.append(r.render_text())
            text.append("-" * 60)
        for agent, report in final_reports.items():
            text.append(f"[{agent}]")
            text.append(report.render_text())
            text.append("-" * 60)
        self.report_path("summary.txt").write_text("\n".join(text) + "\n", encoding="utf-8")
        return SimulationResult(
            run_dir=self.run_dir,
            cycle_reports=cycle_reports,
            benchmark_reports=benchmark_reports,
            final_reports=final_reports,
            elapsed_seconds=elapsed,
        )

    def _final_reports(self) -> dict[str, ScoreReport]:
        """Aggregate probabilistic metrics per agent over all resolved rollouts."""
        reports: dict[str, ScoreReport] = {}
        for agent_name in self.config.agents:
            ledger = self.ledger_for(agent_name)
            resolved = [
                t for t in ledger.all_trajectories() if t.status is TrajectoryStatus.RESOLVED
            ]
            if not resolved:
                reports[agent_name] = ScoreReport()
                continue
            preds = [ProbPrediction(prob=t.final_probability, label=t.label) for t in resolved]
            reports[agent_name] = summarize_probabilistic(
                preds, seed=derive_seed(self.config.seed, "final-ci", agent_name)
            )
        return reports

    # -- live mode ----------------------------------------------------------------

    def run_due_phases(self, now: Optional[datetime] = None) -> list[str]:
        """Cron-style live driver: run every phase whose wall-clock time has passed.

        Intended to be invoked periodically (or once per evening); each call
        is idempotent thanks to the phases' restartability.
        """
        now = now or datetime.now(timezone.utc)
        executed: list[str] = []
        today = now.astimezone(ZoneInfo(self.config.timezone)).date()
        if now >= self.phase_datetime(today, self.config.issue_time):
            self.run_issue_phase(today)
            executed.append(f"issue:{today.isoformat()}")
        yesterday = today - timedelta(days=1)
        if self.questions_path(yesterday).exists() and now >= self.phase_datetime(
            today, self.config.resolve_time
        ):
            self.run_resolve_phase(yesterday)
            executed.append(f"resolve:{yesterday.isoformat()}")
        if self.config.benchmark.enabled and now >= self.phase_datetime(
            today, self.config.issue_time
        ):
            self.run_benchmark_phase(today)
            executed.append(f"benchmark:{today.isoformat()}")
        return executed

    # -- helpers --------------------------------------------------------------------

    @staticmethod
    def _write_json(path: Path, payload: Mapping[str, Any]) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )


def _count_by_type(questions: Sequence[BenchmarkQuestion]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for q in questions:
        counts[q.qtype] = counts.get(q.qtype, 0) + 1
    return counts


def simulate(
    days: int,
    seed: int = 0,
    agents: Sequence[str] = ("oracle", "constant"),
    run_dir: Optional[Path] = None,
    config: Optional[CycleConfig] = None,
) -> SimulationResult:
    """Convenience entry point for closed-loop simulation runs."""
    if config is None:
        config = CycleConfig(seed=seed, agents=tuple(agents))
    else:
        config = replace(config, seed=seed, agents=tuple(agents))
    if run_dir is None:
        run_dir = Path.cwd() / f"fw-run-{seed}"
    return Orchestrator(config, Path(run_dir)).simulate(days)

"""Core data model shared by every pipeline stage.

All timestamps are stored and compared in UTC at second precision; wall-clock
configuration (issue/resolve times in a local timezone) is converted on
ingest. Types are immutable value records and safe to share across threads.

The canonical wire encoding for each record is a flat JSON object whose field
names match the dataclass fields, with timestamps as RFC 3339 strings. Every
module reuses these encodings for its JSONL files.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import Any, Mapping, Optional

QuestionId = str
PairId = str
TrajectoryId = str
SourceId = str
DomainLabel = str

#: Reserved fallback label for questions no classification rule matches.
OTHER_DOMAIN: DomainLabel = "other"


def ensure_utc(ts: datetime) -> datetime:
    """Normalize a timestamp to tz-aware UTC, truncated to whole seconds."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_rfc3339(ts: datetime) -> str:
    return ensure_utc(ts).isoformat()


def parse_rfc3339(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return ensure_utc(datetime.fromisoformat(text))


class TrajectoryStatus(str, enum.Enum):
    PENDING = "PENDING"
    RESOLVED = "RESOLVED"
    DISCARDED = "DISCARDED"


@dataclass(frozen=True)
class CandidateEvent:
    """A raw future event pulled from a source, before templating.

    The payload holds the extracted fields a question template needs; the
    resolver routing information travels alongside so the question built from
    this event can later be matched back to its outcome.
    """

    source_id: SourceId
    source_url: str
    observed_at: datetime
    payload: Mapping[str, str]
    expected_resolution: datetime
    resolver_key: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "observed_at", ensure_utc(self.observed_at))
        object.__setattr__(self, "expected_resolution", ensure_utc(self.expected_resolution))
        object.__setattr__(self, "payload", dict(self.payload))
        if self.expected_resolution <= self.observed_at:
            raise ValueError("expected_resolution must be after observed_at")

    def to_dict(self) -> dict[str, Any]:
        return {
            "source_id": self.source_id,
            "source_url": self.source_url,
            "observed_at": format_rfc3339(self.observed_at),
            "payload": dict(self.payload),
            "expected_resolution": format_rfc3339(self.expected_resolution),
            "resolver_key": self.resolver_key,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CandidateEvent":
        return cls(
            source_id=data["source_id"],
            source_url=data["source_url"],
            observed_at=parse_rfc3339(data["observed_at"]),
            payload=dict(data["payload"]),
            expected_resolution=parse_rfc3339(data["expected_resolution"]),
            resolver_key=data["resolver_key"],
        )


@dataclass(frozen=True)
class Question:
    """A binary future-event question issued to agents at prediction time."""

    id: QuestionId
    text: str
    prediction_time: datetime
    resolution_time: datetime
    source: SourceId
    source_url: str
    resolver_key: str
    resolver_metadata: Mapping[str, str]
    domain: DomainLabel = OTHER_DOMAIN

    def __post_init__(self) -> None:
        object.__setattr__(self, "prediction_time", ensure_utc(self.prediction_time))
        object.__setattr__(self, "resolution_time", ensure_utc(self.resolution_time))
        object.__setattr__(self, "resolver_metadata", dict(self.resolver_metadata))
        if not self.text:
            raise ValueError("question text must be non-empty")
        if self.resolution_time <= self.prediction_time:
            raise ValueError("resolution_time must be after prediction_time")

    def with_domain(self, domain: DomainLabel) -> "Question":
        return replace(self, domain=domain)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "prediction_time": format_rfc3339(self.prediction_time),
            "resolution_time": format_rfc3339(self.resolution_time),
            "source": self.source,
            "source_url": self.source_url,
            "resolver_key": self.resolver_key,
            "resolver_metadata": dict(self.resolver_metadata),
            "domain": self.domain,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Question":
        return cls(
            id=data["id"],
            text=data["text"],
            prediction_time=parse_rfc3339(data["prediction_time"]),
            resolution_time=parse_rfc3339(data["resolution_time"]),
            source=data["source"],
            source_url=data["source_url"],
            resolver_key=data["resolver_key"],
            resolver_metadata=dict(data["resolver_metadata"]),
            domain=data.get("domain", OTHER_DOMAIN),
        )


@dataclass(frozen=True)
class QuestionDescriptionPair:
    """A question plus its optional background description.

    The description supports filtering and similarity resampling only; it is
    never shown to agents.
    """

    pair_id: PairId
    question: Question
    description: Optional[str] = None

    def __post_init__(self) -> None:
        if self.description is not None and not self.description:
            raise ValueError("description, when present, must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "pair_id": self.pair_id,
            "question": self.question.to_dict(),
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "QuestionDescriptionPair":
        return cls(
            pair_id=data["pair_id"],
            question=Question.from_dict(data["question"]),
            description=data.get("description"),
        )


@dataclass(frozen=True)
class Step:
    """One search action and the observation the tool returned for it."""

    action: str
    observation: str
    issued_at: datetime

    def __post_init__(self) -> None:
        object.__setattr__(self, "issued_at", ensure_utc(self.issued_at))
        if not self.action:
            raise ValueError("step action must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "action": self.action,
            "observation": self.observation,
            "issued_at": format_rfc3339(self.issued_at),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Step":
        return cls(
            action=data["action"],
            observation=data["observation"],
            issued_at=parse_rfc3339(data["issued_at"]),
        )


@dataclass(frozen=True)
class Trajectory:
    """One stochastic rollout of a question.

    The record is completed in two stages: the prediction-time prefix (steps
    and the final probability estimate) is stored first with status PENDING,
    and the label/reward are backfilled once the outcome is retrieved. The
    raw final answer is kept verbatim so the invalid-output penalty stays
    auditable next to the parsed probability.
    """

    trajectory_id: TrajectoryId
    question_id: QuestionId
    rollout_index: int
    prediction_time: datetime
    steps: tuple[Step, ...]
    raw_final_answer: str
    final_probability: Optional[float]
    status: TrajectoryStatus = TrajectoryStatus.PENDING
    label: Optional[int] = None
    reward: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "prediction_time", ensure_utc(self.prediction_time))
        object.__setattr__(self, "steps", tuple(self.steps))

    def resolved(self, label: int, reward: float) -> "Trajectory":
        """Return the RESOLVED copy of this trajectory; requires both fields."""
        if label not in (0, 1):
            raise ValueError(f"label must be binary, got {label!r}")
        if not -1.0 <= reward <= 0.0:
            raise ValueError(f"reward must lie in [-1, 0], got {reward!r}")
        return replace(self, status=TrajectoryStatus.RESOLVED, label=label, reward=reward)

    def discarded(self) -> "Trajectory":
        return replace(self, status=TrajectoryStatus.DISCARDED, label=None, reward=None)

    def to_dict(self) -> dict[str, Any]:
        return {
            "trajectory_id": self.trajectory_id,
            "question_id": self.question_id,
            "rollout_index": self.rollout_index,
            "prediction_time": format_rfc3339(self.prediction_time),
            "steps": [s.to_dict() for s in self.steps],
            "raw_final_answer": self.raw_final_answer,
            "final_probability": self.final_probability,
            "status": self.status.value,
            "label": self.label,
            "reward": self.reward,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Trajectory":
        return cls(
            trajectory_id=data["trajectory_id"],
            question_id=data["question_id"],
            rollout_index=data["rollout_index"],
            prediction_time=parse_rfc3339(data["prediction_time"]),
            steps=tuple(Step.from_dict(s) for s in data["steps"]),
            raw_final_answer=data["raw_final_answer"],
            final_probability=data["final_probability"],
            status=TrajectoryStatus(data["status"]),
            label=data["label"],
            reward=data["reward"],
        )


@dataclass(frozen=True)
class Outcome:
    """The realized binary outcome of a question."""

    question_id: QuestionId
    label: int
    resolved_at: datetime
    evidence: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "resolved_at", ensure_utc(self.resolved_at))
        if self.label not in (0, 1):
            raise ValueError(f"outcome label must be binary, got {self.label!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "question_id": self.question_id,
            "label": self.label,
            "resolved_at": format_rfc3339(self.resolved_at),
            "evidence": self.evidence,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Outcome":
        return cls(
            question_id=data["question_id"],
            label=data["label"],
            resolved_at=parse_rfc3339(data["resolved_at"]),
            evidence=data.get("evidence", ""),
        )


def validate_trajectory(t: Trajectory) -> list[str]:
    """Return every violated trajectory invariant; an empty list means ok.

    Total function: it never raises, so it can audit records of any shape,
    including ones a buggy writer produced.
    """
    violations: list[str] = []
    if t.rollout_index < 0:
        violations.append("negative rollout_index")
    if t.status is TrajectoryStatus.PENDING:
        if t.label is not None:
            violations.append("label on PENDING")
        if t.reward is not None:
            violations.append("reward on PENDING")
    elif t.status is TrajectoryStatus.RESOLVED:
        if t.label not in (0, 1):
            violations.append("RESOLVED without binary label")
        if t.reward is None:
            violations.append("RESOLVED without reward")
        elif not -1.0 <= t.reward <= 0.0:
            violations.append("reward outside [-1, 0]")
    elif t.status is TrajectoryStatus.DISCARDED:
        if t.label is not None:
            violations.append("label on DISCARDED")
        if t.reward is not None:
            violations.append("reward on DISCARDED")
    if len(t.steps) == 0:
        violations.append("no search action")
    if t.final_probability is not None and not 0.0 <= t.final_probability <= 1.0:
        violations.append("final_probability outside [0, 1]")
    return violations


def dumps_canonical(obj: Any) -> str:
    """Serialize to the canonical single-line JSON used in every JSONL file."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)

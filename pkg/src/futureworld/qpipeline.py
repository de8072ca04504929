"""Candidate events -> filtered, domain-balanced, similarity-reduced pairs.

Stages, in order:
  1. construct_pair: instantiate a question template from an event payload.
  2. apply_filters: three eligibility judges (resolvable, meaningful, safe);
     a pair is dropped if any judge flags it, or if a judge is unavailable.
  3. resample: classify into domains by keyword rules, water-fill the
     retention budget across domains, then reduce within-domain similarity by
     seeded K-means over text embeddings, keeping one representative per
     cluster (the pair closest to its centroid).

Reference judges are rule-based so the pipeline is testable offline; an HTTP
judge client (see ``http_clients``) conforms to the same interface for live
model-backed judging.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from datetime import datetime
from typing import Mapping, Optional, Protocol, Sequence

import numpy as np

from .domain import (
    CandidateEvent,
    DomainLabel,
    OTHER_DOMAIN,
    PairId,
    Question,
    QuestionDescriptionPair,
)
from .embedding import HashingEmbedder, embed_text
from .seeding import derive_seed

FILTER_NAMES = ("resolvable", "meaningful", "safe")

JUDGE_UNAVAILABLE = "judge-unavailable"


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class QuestionTemplate:
    """A question pattern with ``{field}`` placeholders filled from payloads."""

    name: str
    pattern: str
    description_pattern: Optional[str] = None

    def required_fields(self) -> set[str]:
        formatter = string.Formatter()
        return {name for _, name, _, _ in formatter.parse(self.pattern) if name}


DEFAULT_TEMPLATES: tuple[QuestionTemplate, ...] = (
    QuestionTemplate(
        name="temperature",
        pattern="Will the highest temperature in {city} be between {band} on {date}?",
        description_pattern=(
            "Recent daily highs in {city} have clustered near {band}. "
            "Station reference {identifier}."
        ),
    ),
    QuestionTemplate(
        name="match",
        pattern="Will {home} beat {away} in their match on {date}?",
    ),
    QuestionTemplate(
        name="index_threshold",
        pattern="Will the {index} close above {threshold} points on {date}?",
        description_pattern=(
            "The {index} has traded in a narrow range around {threshold} this week. "
            "Series reference {identifier}."
        ),
    ),
    QuestionTemplate(
        name="release",
        pattern="Will {company} ship the {product} update by {date}?",
    ),
    QuestionTemplate(
        name="vote",
        pattern="Will the {body} approve the {measure} by {date}?",
        description_pattern=(
            "The {measure} has been on the {body} docket for two sessions. "
            "Filing reference {identifier}."
        ),
    ),
    QuestionTemplate(
        name="box_office",
        pattern="Will {film} gross over {amount} million on {date}?",
    ),
    QuestionTemplate(
        name="storm",
        pattern="Will the storm near {city} cause casualties on {date}?",
    ),
)


def select_template(
    event: CandidateEvent, templates: Sequence[QuestionTemplate]
) -> QuestionTemplate:
    by_name = {t.name: t for t in templates}
    wanted = event.payload.get("template")
    if wanted is not None:
        if wanted not in by_name:
            raise TemplateError(f"no matching template named {wanted!r}")
        return by_name[wanted]
    for template in templates:
        if template.required_fields() <= set(event.payload):
            return template
    raise TemplateError("no matching template for event payload")


def construct_pair(
    event: CandidateEvent,
    templates: Sequence[QuestionTemplate],
    prediction_time: datetime,
) -> QuestionDescriptionPair:
    """Instantiate a question-description pair from one candidate event.

    Deterministic: the same event always yields the same pair text and ids.
    """
    template = select_template(event, templates)
    missing = template.required_fields() - set(event.payload)
    if missing:
        raise TemplateError(f"payload missing required fields: {sorted(missing)}")
    text = template.pattern.format(**event.payload)
    description: Optional[str] = event.payload.get("description")
    if description is None and template.description_pattern is not None:
        description = template.description_pattern.format(**event.payload)
    identifier = event.payload.get("identifier", event.source_url)
    question = Question(
        id=f"q-{identifier}",
        text=text,
        prediction_time=prediction_time,
        resolution_time=event.expected_resolution,
        source=event.source_id,
        source_url=event.source_url,
        resolver_key=event.resolver_key,
        resolver_metadata={"identifier": identifier},
        domain=OTHER_DOMAIN,
    )
    return QuestionDescriptionPair(
        pair_id=f"p-{identifier}", question=question, description=description
    )


@dataclass(frozen=True)
class FilterVerdict:
    pair_id: PairId
    filter_name: str
    eligible: bool
    reason: str

    def to_dict(self) -> dict[str, object]:
        return {
            "pair_id": self.pair_id,
            "filter_name": self.filter_name,
            "eligible": self.eligible,
            "reason": self.reason,
        }


class Judge(Protocol):
    """One eligibility criterion over a question-description pair."""

    name: str

    def judge(self, question: Question, description: Optional[str]) -> tuple[bool, str]:
        ...


@dataclass
class ResolvableJudge:
    """A question is resolvable if its outcome can be routed and retrieved."""

    name: str = "resolvable"

    def judge(self, question: Question, description: Optional[str]) -> tuple[bool, str]:
        if not question.resolver_key:
            return False, "no resolver registered for this question"
        if "identifier" not in question.resolver_metadata:
            return False, "no identifier to match an outcome record against"
        if question.resolution_time <= question.prediction_time:
            return False, "resolution scheduled before prediction time"
        return True, "outcome is retrievable and matchable"


@dataclass
class MeaningfulJudge:
    """Cheap structural proxy for 'asks about a concrete real-world outcome'."""

    min_words: int = 5
    name: str = "meaningful"

    def judge(self, question: Question, description: Optional[str]) -> tuple[bool, str]:
        text = question.text.strip()
        if not text.endswith("?"):
            return False, "not phrased as a question"
        if len(text.split()) < self.min_words:
            return False, "too short to describe a concrete outcome"
        return True, "concrete binary question"


DEFAULT_BLOCKLIST = (
    "casualties",
    "fatalities",
    "assassination",
    "hostage",
    "overdose",
)


@dataclass
class SafeJudge:
    """Blocklist screen for content unsuitable for public release."""

    blocklist: Sequence[str] = DEFAULT_BLOCKLIST
    name: str = "safe"

    def judge(self, question: Question, description: Optional[str]) -> tuple[bool, str]:
        haystack = (question.text + " " + (description or "")).lower()
        for term in self.blocklist:
            if term.lower() in haystack:
                return False, f"blocklisted term: {term}"
        return True, "no blocklisted content"


def default_judges() -> list[Judge]:
    return [ResolvableJudge(), MeaningfulJudge(), SafeJudge()]


@dataclass
class FilterDecision:
    pair_id: PairId
    keep: bool
    verdicts: list[FilterVerdict]

    @property
    def drop_reasons(self) -> list[str]:
        return [v.reason for v in self.verdicts if not v.eligible]


def apply_filters(pair: QuestionDescriptionPair, judges: Sequence[Judge]) -> FilterDecision:
    """Run all three eligibility judges; drop if any flags the pair.

    A judge failure is conservative: the pair is dropped with reason
    ``judge-unavailable`` and the verdict is still recorded.
    """
    names = [j.name for j in judges]
    if sorted(names) != sorted(FILTER_NAMES):
        raise ValueError(f"expected one judge per criterion {FILTER_NAMES}, got {names}")
    verdicts: list[FilterVerdict] = []
    for judge in judges:
        try:
            eligible, reason = judge.judge(pair.question, pair.description)
        except Exception:
            eligible, reason = False, JUDGE_UNAVAILABLE
        verdicts.append(
            FilterVerdict(
                pair_id=pair.pair_id,
                filter_name=judge.name,
                eligible=eligible,
                reason=reason,
            )
        )
    keep = all(v.eligible for v in verdicts)
    return FilterDecision(pair_id=pair.pair_id, keep=keep, verdicts=verdicts)


@dataclass(frozen=True)
class DomainRule:
    label: DomainLabel
    keywords: tuple[str, ...]


DEFAULT_DOMAIN_RULES: tuple[DomainRule, ...] = (
    DomainRule("weather", ("temperature", "storm", "rainfall")),
    DomainRule("sports", ("beat", "match", "tournament")),
    DomainRule("finance", ("close above", "index", "points")),
    DomainRule("technology", ("ship the", "update", "release")),
    DomainRule("politics", ("approve", "council", "board")),
    DomainRule("entertainment", ("gross", "film", "premiere")),
)


def classify_domain(
    pair: QuestionDescriptionPair, rules: Sequence[DomainRule]
) -> DomainLabel:
    """First keyword rule that matches the question+description text wins."""
    if not rules:
        raise ValueError("domain rules must be non-empty")
    haystack = (pair.question.text + " " + (pair.description or "")).lower()
    for rule in rules:
        if any(kw.lower() in haystack for kw in rule.keywords):
            return rule.label
    return OTHER_DOMAIN


@dataclass(frozen=True)
class BudgetAllocation:
    """Per-domain retained budgets M_d under capacities N_d."""

    per_domain: Mapping[str, tuple[int, int]]  # domain -> (N_d, M_d)

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_domain", dict(self.per_domain))

    def budget(self, domain: str) -> int:
        return self.per_domain[domain][1]

    def total(self) -> int:
        return sum(m for _, m in self.per_domain.values())


def allocate_budget(counts: Mapping[str, int], target: int) -> BudgetAllocation:
    """Water-fill the retention target across non-empty domains.

    Raise the common level c as far as capacities allow, then hand out any
    remainder one unit per unsaturated domain in ascending lexicographic
    order. The result is as balanced as possible: no unit can move between
    two domains and reduce the spread.
    """
    if target < 0:
        raise ValueError("target must be non-negative")
    if any(n <= 0 for n in counts.values()):
        raise ValueError("counts must cover non-empty domains only")
    domains = sorted(counts)
    capacity = sum(counts.values())
    budget = min(target, capacity)

    level = 0
    max_count = max(counts.values(), default=0)
    while level < max_count and sum(min(n, level + 1) for n in counts.values()) <= budget:
        level += 1
    allocated = {d: min(counts[d], level) for d in domains}
    remainder = budget - sum(allocated.values())
    for d in domains:
        if remainder == 0:
            break
        if allocated[d] < counts[d]:
            allocated[d] += 1
            remainder -= 1
    return BudgetAllocation({d: (counts[d], allocated[d]) for d in domains})


@dataclass(frozen=True)
class EmbeddingVector:
    """A fixed-length, unit-norm embedding of one pair's text."""

    values: np.ndarray

    def __post_init__(self) -> None:
        norm = float(np.linalg.norm(self.values))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"embedding must be unit-norm, got {norm}")


def embed_pair(
    pair: QuestionDescriptionPair, embedder: HashingEmbedder
) -> EmbeddingVector:
    """Embed the question concatenated with its description (if any)."""
    text = pair.question.text + "\n" + (pair.description or "")
    return EmbeddingVector(values=embed_text(text, embedder))


def _kmeans(
    points: np.ndarray, k: int, seed: int, max_iterations: int = 100
) -> np.ndarray:
    """Seeded K-means returning final assignments.

    Init is greedy farthest-point from a seeded starting index; assignment
    ties go to the lowest center index; empty clusters are refilled with the
    point farthest from the centroid of the largest cluster.
    """
    n = points.shape[0]
    rng = np.random.default_rng(seed)

    centers = [int(rng.integers(n))]
    dist_to_nearest = np.linalg.norm(points - points[centers[0]], axis=1)
    while len(centers) < k:
        nxt = int(np.argmax(dist_to_nearest))
        centers.append(nxt)
        dist_to_nearest = np.minimum(
            dist_to_nearest, np.linalg.norm(points - points[nxt], axis=1)
        )
    centroids = points[centers].copy()

    assignments = np.full(n, -1, dtype=int)
    for _ in range(max_iterations):
        distances = np.linalg.norm(points[:, None, :] - centroids[None, :, :], axis=2)
        new_assignments = np.argmin(distances, axis=1)

        for cluster in range(k):
            if np.any(new_assignments == cluster):
                continue
            sizes = np.bincount(new_assignments, minlength=k)
            donor = int(np.argmax(sizes))
            members = np.flatnonzero(new_assignments == donor)
            donor_centroid = points[members].mean(axis=0)
            farthest = members[
                int(np.argmax(np.linalg.norm(points[members] - donor_centroid, axis=1)))
            ]
            new_assignments[farthest] = cluster

        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for cluster in range(k):
            members = points[assignments == cluster]
            if len(members):
                centroids[cluster] = members.mean(axis=0)
    return assignments


def resample_domain(
    pairs: Sequence[QuestionDescriptionPair],
    budget: int,
    embedder: HashingEmbedder,
    seed: int,
) -> list[QuestionDescriptionPair]:
    """Keep ``budget`` representatives of one domain's pairs.

    Clusters the pair embeddings into ``budget`` groups and keeps, per
    cluster, the pair closest to the centroid (ties broken by smallest
    pair_id). Selection order follows the input order.
    """
    if budget > len(pairs):
        raise ValueError(f"budget {budget} exceeds available pairs {len(pairs)}")
    if budget == len(pairs):
        return list(pairs)
    if budget == 0:
        return []

    points = np.stack([embed_pair(p, embedder).values for p in pairs])
    assignments = _kmeans(points, budget, seed)

    selected_ids: set[str] = set()
    for cluster in range(budget):
        members = np.flatnonzero(assignments == cluster)
        centroid = points[members].mean(axis=0)
        dists = np.linalg.norm(points[members] - centroid, axis=1)
        best = min(
            zip(dists, (pairs[i].pair_id for i in members)),
            key=lambda item: (item[0], item[1]),
        )
        selected_ids.add(best[1])
    return [p for p in pairs if p.pair_id in selected_ids]


def resample(
    pairs: Sequence[QuestionDescriptionPair],
    target: int,
    rules: Sequence[DomainRule],
    embedder: HashingEmbedder,
    seed: int,
) -> list[QuestionDescriptionPair]:
    """Balance domains and reduce within-domain similarity.

    Returns min(target, len(pairs)) pairs with their domain labels attached,
    in input order. Deterministic in (inputs, seed), and a projection:
    resampling the output again with the same target returns the same set.
    """
    if target < 0:
        raise ValueError("target must be non-negative")
    if not pairs or target == 0:
        return []

    labeled = [
        QuestionDescriptionPair(
            pair_id=p.pair_id,
            question=p.question.with_domain(classify_domain(p, rules)),
            description=p.description,
        )
        for p in pairs
    ]
    by_domain: dict[str, list[QuestionDescriptionPair]] = {}
    for p in labeled:
        by_domain.setdefault(p.question.domain, []).append(p)

    allocation = allocate_budget({d: len(v) for d, v in by_domain.items()}, target)
    selected_ids: set[str] = set()
    for domain in sorted(by_domain):
        chosen = resample_domain(
            by_domain[domain],
            allocation.budget(domain),
            embedder,
            derive_seed(seed, "resample", domain),
        )
        selected_ids.update(p.pair_id for p in chosen)
    return [p for p in labeled if p.pair_id in selected_ids]

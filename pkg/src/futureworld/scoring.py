"""Numeric evaluation: trajectory rewards, calibration metrics, benchmark scores.

Probabilistic metrics
    reward   = -(pi - z)^2          (invalid output -> -1, the floor)
    brier    = mean((pi - z)^2)     (invalid output -> worst-case term 1.0)
    accuracy with a 0.5 threshold, ties counted as positive predictions
    ECE over 10 equal-width bins, last bin closed at 1.0

Benchmark scores (all in [0, 1], reported on a 0-100 scale)
    choice   = 2 * y.yhat / (||y||_1 + ||yhat||_1), option-level F1
    numeric  = max(0, 1 - ((vhat - v) / (3 * sigma(V) + eps))^2)
    overall  = equal-weight mean over the question types that have at least
               one resolved question

Uncertainty is reported as seeded percentile bootstrap intervals.

Treatment of invalid probabilistic outputs, declared here once: reward -1,
accuracy counts them wrong, Brier assigns the worst-case term 1.0, and ECE
excludes them (callers filter before binning).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class ProbPrediction:
    """A final probability estimate paired with the realized binary label.

    ``prob`` is None when the agent failed to produce a valid probability.
    """

    prob: Optional[float]
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be binary, got {self.label!r}")

    @property
    def valid(self) -> bool:
        return self.prob is not None and 0.0 <= self.prob <= 1.0


@dataclass(frozen=True)
class ChoiceAnswer:
    """Gold and predicted option vectors for one choice question."""

    gold: tuple[int, ...]
    predicted: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "gold", tuple(int(v) for v in self.gold))
        object.__setattr__(self, "predicted", tuple(int(v) for v in self.predicted))
        if len(self.gold) != len(self.predicted):
            raise ValueError("gold and prediction vectors must have equal length")
        if any(v not in (0, 1) for v in self.gold + self.predicted):
            raise ValueError("option vectors must be binary")
        if sum(self.gold) < 1:
            raise ValueError("gold vector must select at least one option")


@dataclass(frozen=True)
class NumericAnswer:
    """A numeric prediction with the eight-value history ending at the truth."""

    predicted: float
    history: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "history", tuple(float(v) for v in self.history))
        if len(self.history) != 8:
            raise ValueError(f"history must hold exactly 8 values, got {len(self.history)}")

    @property
    def true_value(self) -> float:
        return self.history[-1]


def trajectory_reward(prob: Optional[float], label: int) -> float:
    """Delayed trajectory reward: negative squared error, -1 when invalid."""
    if label not in (0, 1):
        raise ValueError(f"label must be binary, got {label!r}")
    if prob is None or not 0.0 <= prob <= 1.0:
        return -1.0
    return -((prob - label) ** 2)


def reward(pred: ProbPrediction) -> float:
    return trajectory_reward(pred.prob, pred.label)


def brier(preds: Sequence[ProbPrediction]) -> float:
    """Mean squared probability error; lower is better, 0.25 is the 0.5 baseline."""
    if not preds:
        raise ValueError("cannot compute Brier score on an empty list")
    total = 0.0
    for p in preds:
        total += (p.prob - p.label) ** 2 if p.valid else 1.0
    return total / len(preds)


def accuracy(preds: Sequence[ProbPrediction], threshold: float = 0.5) -> float:
    """Fraction of correct thresholded predictions; ties count as positive."""
    if not preds:
        raise ValueError("cannot compute accuracy on an empty list")
    correct = 0
    for p in preds:
        if not p.valid:
            continue  # invalid predictions count as wrong
        predicted_positive = p.prob >= threshold
        if predicted_positive == (p.label == 1):
            correct += 1
    return correct / len(preds)


def ece(preds: Sequence[ProbPrediction], bins: int = 10) -> float:
    """Expected calibration error over equal-width bins.

    Bins are [0, 1/bins), ..., [1-1/bins, 1.0] with the last bin closed;
    empty bins contribute nothing. All predictions must be valid.
    """
    if not preds:
        raise ValueError("cannot compute ECE on an empty list")
    if any(not p.valid for p in preds):
        raise ValueError("ECE requires valid predictions; filter invalid ones first")
    sums_p = [0.0] * bins
    sums_z = [0.0] * bins
    counts = [0] * bins
    for p in preds:
        idx = min(int(p.prob * bins), bins - 1)
        sums_p[idx] += p.prob
        sums_z[idx] += p.label
        counts[idx] += 1
    n = len(preds)
    total = 0.0
    for b in range(bins):
        if counts[b] == 0:
            continue
        gap = abs(sums_z[b] / counts[b] - sums_p[b] / counts[b])
        total += counts[b] / n * gap
    return total


def f1_choice(answer: ChoiceAnswer, is_binary: bool = False) -> float:
    """Option-level F1 between gold and predicted selections.

    Binary questions must select exactly one option; anything else scores 0.
    An empty selection on a multi-select question also scores 0.
    """
    n_pred = sum(answer.predicted)
    if is_binary and n_pred != 1:
        return 0.0
    if n_pred == 0:
        return 0.0
    overlap = sum(y * yh for y, yh in zip(answer.gold, answer.predicted))
    return 2.0 * overlap / (sum(answer.gold) + n_pred)


def numeric_score(answer: NumericAnswer, eps: float = 1e-8) -> float:
    """Score a numeric prediction against the recent variability of its target.

    The error is normalized by three sample standard deviations of the
    eight-value history, so targets that fluctuate more are scored more
    leniently. Bounded in [0, 1].
    """
    values = answer.history
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    sigma = math.sqrt(var)
    scaled = (answer.predicted - answer.true_value) / (3.0 * sigma + eps)
    return max(0.0, 1.0 - scaled * scaled)


def overall(
    s_bin: Optional[float],
    s_smc: Optional[float],
    s_dmc: Optional[float],
    s_num: Optional[float],
) -> float:
    """Equal-weight mean over the question-type scores that are present."""
    present = [s for s in (s_bin, s_smc, s_dmc, s_num) if s is not None]
    if not present:
        raise ValueError("overall score needs at least one per-type score")
    return sum(present) / len(present)


def bootstrap_ci(
    values: Sequence[float],
    level: float = 0.95,
    n_resamples: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Seeded percentile bootstrap interval for the mean of per-question scores."""
    if len(values) == 0:
        raise ValueError("cannot bootstrap an empty sample")
    rng = np.random.default_rng(seed)
    arr = np.asarray(values, dtype=float)
    idx = rng.integers(0, len(arr), size=(n_resamples, len(arr)))
    means = arr[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    low, high = np.quantile(means, [alpha, 1.0 - alpha])
    return float(low), float(high)


def bootstrap_metric_ci(
    preds: Sequence[ProbPrediction],
    metric: Callable[[Sequence[ProbPrediction]], float],
    level: float = 0.95,
    n_resamples: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Bootstrap interval for a metric that is not a plain per-question mean."""
    if not preds:
        raise ValueError("cannot bootstrap an empty sample")
    rng = np.random.default_rng(seed)
    stats = []
    for _ in range(n_resamples):
        idx = rng.integers(0, len(preds), size=len(preds))
        stats.append(metric([preds[i] for i in idx]))
    alpha = (1.0 - level) / 2.0
    low, high = np.quantile(np.asarray(stats), [alpha, 1.0 - alpha])
    return float(low), float(high)


@dataclass
class ScoreReport:
    """Per-type benchmark scores plus probabilistic metrics, with intervals.

    Benchmark scores are stored in [0, 1]; the text rendering scales them to
    0-100. A per-type score is None when that type had no resolved questions
    that day, and the overall score averages the remaining types.
    """

    s_bin: Optional[float] = None
    s_smc: Optional[float] = None
    s_dmc: Optional[float] = None
    s_num: Optional[float] = None
    s_overall: Optional[float] = None
    accuracy: Optional[float] = None
    brier: Optional[float] = None
    ece: Optional[float] = None
    n_predictions: int = 0
    n_by_type: dict[str, int] = field(default_factory=dict)
    intervals: dict[str, tuple[float, float]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "s_bin": self.s_bin,
            "s_smc": self.s_smc,
            "s_dmc": self.s_dmc,
            "s_num": self.s_num,
            "s_overall": self.s_overall,
            "accuracy": self.accuracy,
            "brier": self.brier,
            "ece": self.ece,
            "n_predictions": self.n_predictions,
            "n_by_type": dict(self.n_by_type),
            "intervals": {k: list(v) for k, v in self.intervals.items()},
        }

    def render_text(self) -> str:
        def cell(value: Optional[float], scale: float = 100.0) -> str:
            return "--" if value is None else f"{value * scale:.2f}"

        lines = ["metric        value"]
        lines.append(f"S_bin         {cell(self.s_bin)}")
        lines.append(f"S_smc         {cell(self.s_smc)}")
        lines.append(f"S_dmc         {cell(self.s_dmc)}")
        lines.append(f"S_num         {cell(self.s_num)}")
        lines.append(f"S_overall     {cell(self.s_overall)}")
        lines.append(f"accuracy      {cell(self.accuracy, 1.0)}")
        lines.append(f"brier         {cell(self.brier, 1.0)}")
        lines.append(f"ece           {cell(self.ece, 1.0)}")
        for name in sorted(self.intervals):
            low, high = self.intervals[name]
            lines.append(f"ci[{name}]    ({low:.4f}, {high:.4f})")
        return "\n".join(lines)


def summarize_probabilistic(
    preds: Sequence[ProbPrediction],
    seed: int = 0,
    with_intervals: bool = True,
) -> ScoreReport:
    """Accuracy/Brier/ECE over a prediction set, with bootstrap intervals."""
    if not preds:
        raise ValueError("cannot summarize an empty prediction set")
    report = ScoreReport(n_predictions=len(preds))
    report.accuracy = accuracy(preds)
    report.brier = brier(preds)
    valid = [p for p in preds if p.valid]
    if valid:
        report.ece = ece(valid)
    if with_intervals:
        acc_scores = [
            1.0 if p.valid and (p.prob >= 0.5) == (p.label == 1) else 0.0 for p in preds
        ]
        brier_terms = [(p.prob - p.label) ** 2 if p.valid else 1.0 for p in preds]
        report.intervals["accuracy"] = bootstrap_ci(acc_scores, seed=seed)
        report.intervals["brier"] = bootstrap_ci(brier_terms, seed=seed + 1)
        if valid:
            report.intervals["ece"] = bootstrap_metric_ci(valid, ece, seed=seed + 2)
    return report

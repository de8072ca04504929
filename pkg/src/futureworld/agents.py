"""Scripted in-process agents and the simulated search tool.

These make the full training loop runnable and measurable without any model:
the oracle reads the world's likelihood hint from search results and reports
it back (perfectly calibrated by construction), the constant agent anchors
the Brier baseline at 0.25, the noisy oracle sits between them, and the
malformed agent never produces a parseable probability, exercising the floor
reward path.

The simulated search tool derives snippets deterministically from the query
and, when it recognizes which question is being researched, includes a
likelihood index: the event's latent probability blurred according to the
configured information level (1.0 reveals it exactly).
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .rollout import ROLE_ENVIRONMENT, ROLE_TOOL, AgentMove, Turn
from .seeding import derive_seed

_HINT_RE = re.compile(r"likelihood index ([01]?\.\d+|[01])")
_QUESTION_LINE = re.compile(r"^Question:\s*(.+)$", re.MULTILINE)


def question_text_from_prompt(prompt: str) -> str:
    """Pull the question line out of a rendered prompt, or fall back to all of it."""
    match = _QUESTION_LINE.search(prompt)
    return match.group(1).strip() if match else prompt.strip()


def hint_from_observation(observation: str) -> Optional[float]:
    match = _HINT_RE.search(observation)
    return float(match.group(1)) if match else None


@dataclass
class SimulatedSearchTool:
    """Deterministic offline stand-in for a web search endpoint.

    ``latent_by_text`` maps a question's exact text to its latent probability.
    Snippets never mention realized outcomes; only the latent likelihood
    leaks, and only as blurred as ``information_level`` allows.
    """

    latent_by_text: Mapping[str, float] = field(default_factory=dict)
    information_level: float = 1.0
    seed: int = 0

    def search(self, query: str, top_k: int = 3) -> list[str]:
        digest = hashlib.blake2b(query.encode("utf-8"), digest_size=6).hexdigest()
        snippets = [f"Archive digest {digest}: coverage of '{query[:80]}'."]
        matched = self._match(query)
        if matched is not None:
            text, latent = matched
            hint = self._blur(latent, text)
            snippets.append(
                f"Outlook wire {digest}: consensus likelihood index {hint:.4f} for: {text}"
            )
        snippets.append(f"Clipping {digest[:4]}: no further updates found.")
        return snippets[:top_k]

    def _match(self, query: str) -> Optional[tuple[str, float]]:
        if query in self.latent_by_text:
            return query, self.latent_by_text[query]
        for text in sorted(self.latent_by_text, key=len, reverse=True):
            if text in query or query in text:
                return text, self.latent_by_text[text]
        return None

    def _blur(self, latent: float, question_text: str) -> float:
        if self.information_level >= 1.0:
            return latent
        rng = random.Random(derive_seed(self.seed, "hint", question_text))
        sigma = 0.3 * (1.0 - self.information_level)
        return min(0.999, max(0.001, latent + rng.gauss(0.0, sigma)))


def _latest_observation(turns: Sequence[Turn]) -> Optional[str]:
    for turn in reversed(turns):
        if turn.role == ROLE_TOOL:
            return turn.text
    return None


def _initial_prompt(turns: Sequence[Turn]) -> str:
    for turn in turns:
        if turn.role == ROLE_ENVIRONMENT:
            return turn.text
    return ""


@dataclass
class OracleAgent:
    """Searches once, then reports the likelihood hint it found verbatim."""

    fallback: float = 0.5

    def act(self, trajectory_id: str, rollout_index: int, turns: Sequence[Turn]) -> AgentMove:
        observation = _latest_observation(turns)
        if observation is None:
            return AgentMove(kind="search", query=question_text_from_prompt(_initial_prompt(turns)))
        hint = hint_from_observation(observation)
        value = self.fallback if hint is None else hint
        return AgentMove(kind="final", answer=f"FINAL: {value:.4f}")


@dataclass
class ConstantAgent:
    """Searches once to satisfy the protocol, then always answers the same."""

    probability: float = 0.5

    def act(self, trajectory_id: str, rollout_index: int, turns: Sequence[Turn]) -> AgentMove:
        if _latest_observation(turns) is None:
            return AgentMove(kind="search", query=question_text_from_prompt(_initial_prompt(turns)))
        return AgentMove(kind="final", answer=f"FINAL: {self.probability}")


@dataclass
class NoisyOracleAgent:
    """Oracle plus clipped Gaussian noise, distinct per rollout."""

    sigma: float = 0.08
    fallback: float = 0.5
    seed: int = 0

    def act(self, trajectory_id: str, rollout_index: int, turns: Sequence[Turn]) -> AgentMove:
        observation = _latest_observation(turns)
        if observation is None:
            return AgentMove(kind="search", query=question_text_from_prompt(_initial_prompt(turns)))
        hint = hint_from_observation(observation)
        value = self.fallback if hint is None else hint
        rng = random.Random(derive_seed(self.seed, "noisy", trajectory_id))
        value = min(1.0, max(0.0, value + rng.gauss(0.0, self.sigma)))
        return AgentMove(kind="final", answer=f"FINAL: {value:.4f}")


@dataclass
class MalformedAgent:
    """Searches, then answers free text with no parseable probability."""

    def act(self, trajectory_id: str, rollout_index: int, turns: Sequence[Turn]) -> AgentMove:
        if _latest_observation(turns) is None:
            return AgentMove(kind="search", query=question_text_from_prompt(_initial_prompt(turns)))
        return AgentMove(kind="final", answer="The outlook is genuinely uncertain either way.")


SCRIPTED_AGENTS = ("oracle", "constant", "noisy", "malformed")


def make_scripted_agent(name: str, seed: int = 0):
    if name == "oracle":
        return OracleAgent()
    if name == "constant":
        return ConstantAgent()
    if name == "noisy":
        return NoisyOracleAgent(seed=seed)
    if name == "malformed":
        return MalformedAgent()
    raise ValueError(f"unknown scripted agent {name!r}; available: {SCRIPTED_AGENTS}")

"""HTTP bindings for the agent, search-tool, and judge interfaces.

Live deployments point these clients at external services; they satisfy the
same protocols as the in-process implementations, so the rest of the engine
does not care which side of the wire a component lives on.

Wire formats:
  agent    POST {trajectory_id, rollout_index, turns: [{role, text}]}
           ->   {kind: "search"|"final", query?, answer?}
  search   POST {query, top_k} -> {snippets: [text, ...]}
  judge    POST {filter, question, description} -> {eligible: bool, reason}

Endpoints and API keys come from the environment:
  FW_AGENT_URL / FW_AGENT_API_KEY
  FW_SEARCH_URL / FW_SEARCH_API_KEY
  FW_JUDGE_URL / FW_JUDGE_API_KEY
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Sequence

import requests

from .rollout import AgentMove, Turn

DEFAULT_TIMEOUT = 30.0


def _headers(api_key: Optional[str]) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    return headers


@dataclass
class HttpAgentClient:
    url: str
    api_key: Optional[str] = None
    timeout: float = DEFAULT_TIMEOUT

    @classmethod
    def from_env(cls) -> "HttpAgentClient":
        url = os.environ.get("FW_AGENT_URL")
        if not url:
            raise RuntimeError("FW_AGENT_URL is not set")
        return cls(url=url, api_key=os.environ.get("FW_AGENT_API_KEY"))

    def act(self, trajectory_id: str, rollout_index: int, turns: Sequence[Turn]) -> AgentMove:
        payload = {
            "trajectory_id": trajectory_id,
            "rollout_index": rollout_index,
            "turns": [t.to_dict() for t in turns],
        }
        response = requests.post(
            self.url, json=payload, headers=_headers(self.api_key), timeout=self.timeout
        )
        response.raise_for_status()
        body = response.json()
        return AgentMove(
            kind=body["kind"], query=body.get("query", ""), answer=body.get("answer", "")
        )


@dataclass
class HttpSearchClient:
    url: str
    api_key: Optional[str] = None
    timeout: float = DEFAULT_TIMEOUT

    @classmethod
    def from_env(cls) -> "HttpSearchClient":
        url = os.environ.get("FW_SEARCH_URL")
        if not url:
            raise RuntimeError("FW_SEARCH_URL is not set")
        return cls(url=url, api_key=os.environ.get("FW_SEARCH_API_KEY"))

    def search(self, query: str, top_k: int = 3) -> list[str]:
        response = requests.post(
            self.url,
            json={"query": query, "top_k": top_k},
            headers=_headers(self.api_key),
            timeout=self.timeout,
        )
        response.raise_for_status()
        return list(response.json()["snippets"])


@dataclass
class HttpJudgeClient:
    """Remote eligibility judge; transport errors surface as exceptions and
    the filtering stage treats them as judge-unavailable drops."""

    name: str
    url: str
    api_key: Optional[str] = None
    timeout: float = DEFAULT_TIMEOUT

    @classmethod
    def from_env(cls, name: str) -> "HttpJudgeClient":
        url = os.environ.get("FW_JUDGE_URL")
        if not url:
            raise RuntimeError("FW_JUDGE_URL is not set")
        return cls(name=name, url=url, api_key=os.environ.get("FW_JUDGE_API_KEY"))

    def judge(self, question, description) -> tuple[bool, str]:
        response = requests.post(
            self.url,
            json={
                "filter": self.name,
                "question": question.text,
                "description": description,
            },
            headers=_headers(self.api_key),
            timeout=self.timeout,
        )
        response.raise_for_status()
        body = response.json()
        return bool(body["eligible"]), str(body.get("reason", ""))

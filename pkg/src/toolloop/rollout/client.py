"""Clients the rollout drivers use to reach a tool server.

Both speak the same batch contract as the HTTP wire: a list of requests in,
a list of responses out, positionally aligned.
"""

from __future__ import annotations

from typing import Protocol, Sequence, runtime_checkable

import httpx

from ..errors import ServerUnreachable
from ..server.service import ToolRequest, ToolResponse, ToolServer
from ..trajectory import StopTokenSet


@runtime_checkable
class ToolClient(Protocol):
    def call_batch(self, requests: Sequence[ToolRequest]) -> list[ToolResponse]:
        ...

    def finish(self, trajectory_id: str) -> None:
        ...

    @property
    def stop_sets(self) -> tuple[StopTokenSet, ...]:
        ...


class LocalToolClient:
    """In-process client wrapping a ToolServer directly."""

    def __init__(self, server: ToolServer) -> None:
        self._server = server

    @property
    def stop_sets(self) -> tuple[StopTokenSet, ...]:
        return tuple(self._server.registry.stop_sets())

    def call_batch(self, requests: Sequence[ToolRequest]) -> list[ToolResponse]:
        return self._server.handle_batch(list(requests))

    def finish(self, trajectory_id: str) -> None:
        self._server.handle_batch(
            [ToolRequest(trajectory_id=trajectory_id, action_text="", finish=True)]
        )


class HttpToolClient:
    """Client for a remote tool server over the batch HTTP endpoint.

    Stop token sets are not part of the wire contract, so the caller supplies
    them (normally from the same config that launched the server).
    """

    def __init__(
        self,
        base_url: str,
        stop_sets: Sequence[StopTokenSet],
        *,
        timeout_s: float = 60.0,
        client: httpx.Client | None = None,
    ) -> None:
        self._base_url = base_url.rstrip("/")
        self._stop_sets = tuple(stop_sets)
        self._client = client or httpx.Client(timeout=timeout_s)

    @property
    def stop_sets(self) -> tuple[StopTokenSet, ...]:
        return self._stop_sets

    def call_batch(self, requests: Sequence[ToolRequest]) -> list[ToolResponse]:
        payload = {
            "trajectory_ids": [r.trajectory_id for r in requests],
            "actions": [r.action_text for r in requests],
            "extra_fields": [r.extra for r in requests],
            "finish": [r.finish for r in requests],
        }
        try:
            resp = self._client.post(self._base_url + "/get_observation", json=payload)
            resp.raise_for_status()
            body = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise ServerUnreachable(f"tool server call failed: {exc}") from exc
        try:
            observations = body["observations"]
            valids = body["valids"]
            dones = body["dones"]
            return [
                ToolResponse(observation=o, valid=bool(v), done=bool(d))
                for o, v, d in zip(observations, valids, dones, strict=True)
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ServerUnreachable(f"malformed tool server reply: {exc}") from exc

    def finish(self, trajectory_id: str) -> None:
        self.call_batch(
            [ToolRequest(trajectory_id=trajectory_id, action_text="", finish=True)]
        )

    def close(self) -> None:
        self._client.close()

"""HTTP wire for the tool server: one batch endpoint plus a health probe."""

from __future__ import annotations

from contextlib import asynccontextmanager
from typing import Any

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict

from .service import ToolRequest, ToolServer


class ObservationRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    trajectory_ids: list[str]
    actions: list[str]
    extra_fields: list[dict[str, Any]] | None = None
    finish: list[bool] | None = None


class ObservationResponse(BaseModel):
    observations: list[str]
    valids: list[bool]
    dones: list[bool]


class HealthResponse(BaseModel):
    status: str
    tools: list[str]


def create_app(server: ToolServer) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        server.close()

    app = FastAPI(title="toolloop", lifespan=lifespan)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", tools=server.registry.tool_ids())

    @app.post("/get_observation", response_model=ObservationResponse)
    def get_observation(body: ObservationRequest) -> ObservationResponse:
        n = len(body.trajectory_ids)
        extras = body.extra_fields if body.extra_fields is not None else [{}] * n
        finishes = body.finish if body.finish is not None else [False] * n
        if not (len(body.actions) == len(extras) == len(finishes) == n):
            raise HTTPException(
                status_code=400,
                detail=(
                    f"parallel lists disagree: {n} trajectory_ids, "
                    f"{len(body.actions)} actions, {len(extras)} extra_fields, "
                    f"{len(finishes)} finish flags"
                ),
            )
        requests = [
            ToolRequest(
                trajectory_id=tid, action_text=action, extra=extra, finish=fin
            )
            for tid, action, extra, fin in zip(
                body.trajectory_ids, body.actions, extras, finishes
            )
        ]
        responses = server.handle_batch(requests)
        return ObservationResponse(
            observations=[r.observation for r in responses],
            valids=[r.valid for r in responses],
            dones=[r.done for r in responses],
        )

    return app

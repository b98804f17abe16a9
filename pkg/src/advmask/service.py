"""HTTP layer over the study: JSON endpoints plus blinded image delivery."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import Response
from pydantic import BaseModel, Field

from .errors import (
    DuplicateResponseError,
    StudyError,
    TrialIndexError,
    UnknownSessionError,
)
from .study import Study

__all__ = ["create_app"]

_MEDIA_TYPES = {
    ".png": "image/png",
    ".pgm": "image/x-portable-graymap",
    ".ppm": "image/x-portable-pixmap",
}


class SessionRequest(BaseModel):
    seed: int | None = None


class ResponseBody(BaseModel):
    choice: str
    latency_ms: float = Field(ge=0)


def create_app(study: Study, static_dir=None) -> FastAPI:
    app = FastAPI(title="pair-comparison study")

    @app.post("/api/session")
    def create_session(body: SessionRequest | None = None):
        seed = body.seed if body is not None else None
        return study.create_session(seed=seed)

    @app.get("/api/trial/{session_id}/{index}")
    def get_trial(session_id: str, index: int):
        try:
            return study.get_trial(session_id, index)
        except UnknownSessionError as exc:
            raise HTTPException(404, str(exc)) from exc
        except TrialIndexError as exc:
            raise HTTPException(404, str(exc)) from exc

    @app.post("/api/response/{session_id}/{index}")
    def post_response(session_id: str, index: int, body: ResponseBody):
        try:
            return study.post_response(session_id, index, body.choice, body.latency_ms)
        except UnknownSessionError as exc:
            raise HTTPException(404, str(exc)) from exc
        except DuplicateResponseError as exc:
            raise HTTPException(409, str(exc)) from exc
        except TrialIndexError as exc:
            raise HTTPException(409, str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc

    @app.get("/api/results")
    def get_results():
        return study.results()

    @app.get("/img/{token}")
    def get_image(token: str):
        try:
            path = Path(study.resolve_token(token))
        except StudyError as exc:
            raise HTTPException(404, str(exc)) from exc
        if not path.exists():
            raise HTTPException(404, "image file missing")
        media = _MEDIA_TYPES.get(path.suffix.lower(), "application/octet-stream")
        return Response(content=path.read_bytes(), media_type=media)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app

"""HTTP session service for the operator measurement loop.

Each session holds one uploaded frame and walks awaiting-roi -> ran ->
accepted; editing the ROI and re-running while in `ran` is allowed (that is
the semi-automatic loop: inspect the overlay, re-steer, run again). Results
and overlays are recomputed synchronously per run; sessions live in memory
with an optional JSON snapshot written on accept.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from ntscan.image import GrayImage, ImageFormatError, Roi, decode_image
from ntscan.pipeline import (
    PipelineConfig,
    PipelineResult,
    StageError,
    overlay_png,
    report_json,
    run_pipeline,
    to_report,
)

AWAITING_ROI = "awaiting-roi"
RAN = "ran"
ACCEPTED = "accepted"


class RoiBody(BaseModel):
    x0: int
    y0: int
    w: int
    h: int


class RunBody(BaseModel):
    mm_per_px: float | None = None
    weeks: float | None = None


@dataclass
class Session:
    id: str
    image: GrayImage
    status: str = AWAITING_ROI
    roi: Roi | None = None
    result: PipelineResult | None = None
    overlay: bytes | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def view(self) -> dict:
        return {
            "id": self.id,
            "status": self.status,
            "width": self.image.width,
            "height": self.image.height,
            "roi": None if self.roi is None else {
                "x0": self.roi.x0, "y0": self.roi.y0,
                "w": self.roi.w, "h": self.roi.h,
            },
            "has_result": self.result is not None,
        }


class SessionStore:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def add(self, image: GrayImage) -> Session:
        session = Session(id=uuid.uuid4().hex[:12], image=image)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return session


def create_app(
    cfg: PipelineConfig | None = None,
    snapshot_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    cfg = cfg if cfg is not None else PipelineConfig()
    store = SessionStore()
    app = FastAPI(title="ntscan", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        raw = await request.body()
        if not raw:
            raise HTTPException(status_code=400, detail="empty upload")
        try:
            image = decode_image(raw, name="upload")
        except ImageFormatError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return store.add(image).view()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return store.get(session_id).view()

    @app.put("/sessions/{session_id}/roi")
    def put_roi(session_id: str, body: RoiBody):
        session = store.get(session_id)
        with session.lock:
            if session.status == ACCEPTED:
                raise HTTPException(
                    status_code=409, detail="session already accepted"
                )
            try:
                roi = Roi(body.x0, body.y0, body.w, body.h)
                roi.validate_inside(session.image)
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            session.roi = roi
            return session.view()

    @app.post("/sessions/{session_id}/run")
    def run(session_id: str, body: RunBody | None = None):
        session = store.get(session_id)
        with session.lock:
            if session.status == ACCEPTED:
                raise HTTPException(
                    status_code=409, detail="session already accepted"
                )
            if session.roi is None:
                raise HTTPException(
                    status_code=409, detail="set a ROI before running"
                )
            run_cfg = cfg
            if body is not None:
                if body.mm_per_px is not None:
                    run_cfg = replace(run_cfg, mm_per_px=body.mm_per_px)
                if body.weeks is not None:
                    run_cfg = replace(run_cfg, gestation_weeks=body.weeks)
            try:
                result = run_pipeline(session.image, session.roi, run_cfg)
            except StageError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            session.result = result
            session.overlay = overlay_png(result)
            session.status = RAN
            view = session.view()
            view["report"] = to_report(result)
            return view

    @app.get("/sessions/{session_id}/result")
    def get_result(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if session.result is None:
                raise HTTPException(status_code=409, detail="no run yet")
            return to_report(session.result)

    @app.get("/sessions/{session_id}/overlay.png")
    def get_overlay(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if session.overlay is None:
                raise HTTPException(status_code=409, detail="no run yet")
            return Response(content=session.overlay, media_type="image/png")

    @app.post("/sessions/{session_id}/accept")
    def accept(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if session.status != RAN:
                raise HTTPException(
                    status_code=409,
                    detail=f"cannot accept from status {session.status!r}",
                )
            session.status = ACCEPTED
            snapshot = None
            if snapshot_dir is not None:
                out = Path(snapshot_dir)
                out.mkdir(parents=True, exist_ok=True)
                snapshot = str(out / f"{session.id}.json")
                Path(snapshot).write_text(report_json(session.result))
            view = session.view()
            view["snapshot"] = snapshot
            return view

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def serve(bind: str, cfg: PipelineConfig | None = None,
          snapshot_dir: str | Path | None = None,
          ui_dir: str | Path | None = None) -> None:
    """Run the service on HOST:PORT (blocking)."""
    import uvicorn

    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bind must be HOST:PORT, got {bind!r}")
    app = create_app(cfg=cfg, snapshot_dir=snapshot_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=int(port), log_level="warning")

"""HTTP annotation service.

Registers annotators, schedules pairs with deterministic trap injection,
records answers durably (append-before-ack through the study store) and
exposes an admin export. Static UI assets, when present under
``<data_dir>/static``, are served at the root path.
"""

import hashlib
import hmac
import json
import random
import threading
import uuid
from collections import deque
from contextlib import asynccontextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .errors import ConflictError, NotFoundError
from .study import AnnotationEvent, StudyStore

__all__ = ["ServiceConfig", "Session", "load_config", "create_app", "serve"]

_MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
}


@dataclass(frozen=True)
class ServiceConfig:
    """Service settings; trap_rate is "one trap per this many queued pairs"."""

    data_dir: str
    admin_token: str
    bind_address: str = "127.0.0.1:8075"
    trap_rate: int = 15
    images_dir: str | None = None

    def __post_init__(self):
        if not self.admin_token:
            raise ValueError("admin_token must be nonempty")
        if self.trap_rate < 1:
            raise ValueError(f"trap_rate must be >= 1, got {self.trap_rate}")
        if ":" not in self.bind_address:
            raise ValueError(f"bind_address needs host:port, got {self.bind_address!r}")

    @property
    def host(self) -> str:
        return self.bind_address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.bind_address.rsplit(":", 1)[1])

    @property
    def resolved_images_dir(self) -> Path:
        return Path(self.images_dir) if self.images_dir else Path(self.data_dir)


def load_config(path) -> ServiceConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    missing = [k for k in ("data_dir", "admin_token") if k not in doc]
    if missing:
        raise ValueError(f"config {path} is missing: {', '.join(missing)}")
    known = {k: doc[k] for k in
             ("data_dir", "admin_token", "bind_address", "trap_rate", "images_dir")
             if k in doc}
    try:
        return ServiceConfig(**known)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"config {path} is invalid: {exc}") from exc


@dataclass
class Session:
    session_id: str
    annotator_id: str
    created_at: str
    queue: deque  # pair_ids remaining, head is the next question


def _session_seed(annotator_id: str) -> int:
    digest = hashlib.sha256(annotator_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def build_queue(store: StudyStore, annotator_id: str, trap_rate: int) -> deque:
    """Assemble the question queue for one session.

    Unanswered non-trap pairs, least-annotated first so coverage evens
    out, shuffled within equal counts; traps injected at one per
    trap_rate pairs at seeded positions. Everything derives from
    sha256(annotator_id), so a rebuilt session sees the same order as
    long as the store state is unchanged.
    """
    answered = store.answered_pairs(annotator_id)
    n_valid = {s.pair_id: s.n_valid for s in store.aggregate_scores()}
    main = [p.pair_id for p in store.pairs()
            if not p.is_trap and p.pair_id not in answered]
    traps = [p.pair_id for p in store.pairs()
             if p.is_trap and p.pair_id not in answered]
    rng = random.Random(_session_seed(annotator_id))
    rng.shuffle(main)
    # Stable sort: the shuffle still decides order within equal counts.
    main.sort(key=lambda pid: n_valid.get(pid, 0))
    queue = list(main)
    if queue and traps:
        rng.shuffle(traps)
        n_traps = min(len(traps), max(1, len(queue) // trap_rate))
        for trap_id in traps[:n_traps]:
            queue.insert(rng.randrange(len(queue) + 1), trap_id)
    return deque(queue)


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(config: ServiceConfig, store: StudyStore | None = None) -> FastAPI:
    """Build the application; opens the study store under config.data_dir."""
    owns_store = store is None
    if store is None:
        store = StudyStore(config.data_dir)

    @asynccontextmanager
    async def lifespan(app):
        yield
        if owns_store:
            store.close()

    app = FastAPI(lifespan=lifespan)
    app.state.config = config
    app.state.store = store
    sessions: dict = {}
    sessions_lock = threading.Lock()

    @app.post("/api/session")
    async def create_session(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body must be JSON")
        name = str(body.get("annotator_name", "") or "").strip()
        if not name:
            return _error(400, "annotator_name must be nonempty")
        store.register_annotator(name)
        session = Session(
            session_id=uuid.uuid4().hex,
            annotator_id=name,
            created_at=datetime.now(timezone.utc).isoformat(),
            queue=build_queue(store, name, config.trap_rate),
        )
        with sessions_lock:
            sessions[session.session_id] = session
        return {"session_id": session.session_id,
                "total_pairs": len(session.queue)}

    def _get_session(session_id: str) -> Session | None:
        with sessions_lock:
            return sessions.get(session_id)

    @app.get("/api/session/{session_id}/next")
    async def next_pair(session_id: str):
        session = _get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        if not session.queue:
            return {"done": True}
        pair_id = session.queue[0]
        return {
            "pair_id": pair_id,
            "gt_url": f"/images/{pair_id}/gt",
            "sr_url": f"/images/{pair_id}/sr",
        }

    @app.post("/api/session/{session_id}/answer")
    async def answer(session_id: str, request: Request):
        session = _get_session(session_id)
        if session is None:
            return _error(404, "unknown session")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body must be JSON")
        pair_id = body.get("pair_id")
        verdict = body.get("answer")
        latency_ms = body.get("latency_ms", 0)
        if verdict not in ("yes", "no"):
            return _error(400, "answer must be 'yes' or 'no'")
        if not isinstance(latency_ms, int) or latency_ms < 0:
            return _error(400, "latency_ms must be a non-negative integer")
        if not session.queue:
            return _error(409, "session queue is exhausted")
        head = session.queue[0]
        if pair_id != head:
            return _error(409, f"expected answer for pair {head!r}")
        event = AnnotationEvent(
            event_id=uuid.uuid4().hex,
            annotator_id=session.annotator_id,
            pair_id=pair_id,
            answer=(verdict == "yes"),
            presented_at=datetime.now(timezone.utc).isoformat(),
            latency_ms=latency_ms,
        )
        try:
            store.record_annotation(event)
        except ConflictError as exc:
            # Another session for the same annotator got there first. Drop
            # the stale head so a /next refetch resyncs cleanly.
            if session.queue and session.queue[0] == pair_id:
                session.queue.popleft()
            return _error(409, str(exc))
        except NotFoundError as exc:
            return _error(404, str(exc))
        session.queue.popleft()
        return {"accepted": True, "remaining": len(session.queue)}

    @app.get("/images/{pair_id}/{role}")
    async def image(pair_id: str, role: str):
        if role not in ("gt", "sr"):
            return _error(404, "role must be gt or sr")
        if not store.has_pair(pair_id):
            return _error(404, "unknown pair")
        pair = store.pair(pair_id)
        raw = pair.gt_path if role == "gt" else pair.sr_path
        path = Path(raw)
        if not path.is_absolute():
            path = config.resolved_images_dir / path
        if not path.is_file():
            return _error(404, "image file not found")
        media = _MEDIA_TYPES.get(path.suffix.lower(), "application/octet-stream")
        return FileResponse(path, media_type=media)

    @app.get("/api/admin/export")
    async def export(request: Request):
        token = request.headers.get("x-admin-token", "")
        if not hmac.compare_digest(token, config.admin_token):
            return _error(401, "bad admin token")
        what = request.query_params.get("what", "events")
        if what == "events":
            records = [e.to_dict() for e in store.events()]
        elif what == "scores":
            records = [s.to_dict() for s in store.aggregate_scores()]
        elif what == "statuses":
            records = [s.to_dict() for s in store.annotator_statuses()]
        else:
            return _error(400, "what must be events, scores or statuses")

        def stream():
            for record in records:
                yield json.dumps(record, sort_keys=True) + "\n"

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    @app.get("/api/progress")
    async def progress():
        scores = store.aggregate_scores()
        return {
            "pairs": len(scores),
            "final_pairs": sum(1 for s in scores if s.final),
            "events": len(store.events()),
            "annotators": len(store.annotator_statuses()),
        }

    static_dir = Path(config.data_dir) / "static"
    if static_dir.is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="static")

    return app


def serve(config: ServiceConfig):
    """Run the service until interrupted."""
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port,
                log_level="info")

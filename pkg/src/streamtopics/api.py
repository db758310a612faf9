"""HTTP/WebSocket transport around the engine.

One request/response channel (POST /command) plus one ordered server-push
event channel per client (WS /ws). Every connection starts with a full
SnapshotEvent; sequence numbers are per-connection and gapless. Events
arriving while the snapshot is being prepared may be delivered after it;
the fold is key-replacement, so re-applying them is harmless.
"""

from __future__ import annotations

import asyncio
import contextlib
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .service import Engine


def create_app(engine: Engine, update_interval: Optional[float] = None) -> FastAPI:
    interval = update_interval if update_interval is not None else engine.config.update_interval_secs

    @contextlib.asynccontextmanager
    async def lifespan(app):
        task = asyncio.create_task(_update_loop(engine, interval))
        yield
        task.cancel()
        with contextlib.suppress(asyncio.CancelledError):
            await task

    app = FastAPI(title="streamtopics", lifespan=lifespan)

    @app.post("/command")
    async def command(cmd: dict):
        return await asyncio.get_running_loop().run_in_executor(None, engine.handle_command, cmd)

    @app.get("/state")
    async def state():
        return {
            "vm": engine.view_model(),
            "hash": engine.state_hash(),
            "ingested": engine.ingested,
            "skipped": engine.skipped,
            "window": len(engine.window),
        }

    @app.get("/healthz")
    async def healthz():
        return {"ok": True}

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        await websocket.accept()
        queue: asyncio.Queue = asyncio.Queue()
        loop = asyncio.get_running_loop()

        def push(event):
            loop.call_soon_threadsafe(queue.put_nowait, event)

        engine.subscribe(push)
        seq = 1
        try:
            snap = engine.snapshot_event()
            await websocket.send_json({**snap, "seq": seq})
            while True:
                event = await queue.get()
                seq += 1
                await websocket.send_json({**event, "seq": seq})
        except WebSocketDisconnect:
            pass
        finally:
            engine.unsubscribe(push)

    return app


async def _update_loop(engine: Engine, interval: float) -> None:
    """Tick at the configured cadence, first tick one interval after
    startup. The loop is sequential, so an update that overruns the
    interval delays the next tick and never overlaps it."""
    loop = asyncio.get_running_loop()
    while True:
        await asyncio.sleep(interval)
        if engine.stream_now is not None:
            await loop.run_in_executor(None, engine.tick)

"""Benchmark job endpoints"""

import asyncio
import json
import uuid

from celery.result import AsyncResult
from fastapi import APIRouter, Depends, HTTPException, Request, status
from fastapi.responses import PlainTextResponse
from sse_starlette.sse import EventSourceResponse

from bandfec.config import get_settings
from bandfec.schemas import BenchJobResponse, BenchJobStatus, CodeFamily, DecoderKind, ExperimentConfig
from celery_init import celery_app
from dependencies import QUEUED, get_job

router = APIRouter(prefix="/bench", tags=["Benchmarks"])
settings = get_settings()

STATUS_NAMES = {
    QUEUED: "queued",
    "STARTED": "running",
    "PROGRESS": "running",
    "RETRY": "running",
    "SUCCESS": "completed",
    "FAILURE": "failed",
    "REVOKED": "failed",
}


def _submit(kind: str, cfg: ExperimentConfig) -> BenchJobResponse:
    if cfg.code.family == CodeFamily.WINDOWED and cfg.decoder == DecoderKind.ITERATIVE:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail="Windowed codes decode by ML only; use decoder 'ml' or 'hybrid'",
        )
    job_id = str(uuid.uuid4())
    celery_app.backend.store_result(job_id, None, QUEUED)
    celery_app.send_task(
        'tasks.run_experiment_task',
        args=[kind, cfg.model_dump(mode="json")],
        task_id=job_id,
        queue=settings.bench_queue,
    )
    return BenchJobResponse(job_id=job_id, status="queued", message=f"{kind.capitalize()} experiment queued")


def _job_status(job_id: str, result: AsyncResult) -> BenchJobStatus:
    state = result.state
    info = result.info if isinstance(result.info, dict) else {}
    return BenchJobStatus(
        job_id=job_id,
        status=STATUS_NAMES.get(state, state.lower()),
        done=info.get("done", 0),
        total=info.get("total", 0),
        error_message=str(result.info) if state == "FAILURE" else None,
        result_available=state == "SUCCESS",
    )


@router.post("/overhead", response_model=BenchJobResponse, status_code=status.HTTP_202_ACCEPTED)
def submit_overhead(cfg: ExperimentConfig):
    """
    Queue an overhead experiment

    - Each trial feeds a random permutation of the n symbols until decoding succeeds
    - Poll /bench/status/{job_id} or stream /bench/stream/{job_id}
    """
    return _submit("overhead", cfg)


@router.post("/throughput", response_model=BenchJobResponse, status_code=status.HTTP_202_ACCEPTED)
def submit_throughput(cfg: ExperimentConfig):
    """Queue a decoding-speed experiment over cfg.loss_grid"""
    if not cfg.loss_grid:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail="loss_grid must not be empty")
    return _submit("throughput", cfg)


@router.get("/status/{job_id}", response_model=BenchJobStatus)
def get_job_status(job_id: str, result: AsyncResult = Depends(get_job)):
    """Get state and trial progress of a benchmark job"""
    return _job_status(job_id, result)


@router.get("/stream/{job_id}")
async def stream_job_status(job_id: str, request: Request, result: AsyncResult = Depends(get_job)):
    """
    Stream job status via Server-Sent Events

    - Sends an event whenever state or progress changes
    - Closes the stream once the job completes or fails
    """

    async def event_generator():
        last = None
        while True:
            if await request.is_disconnected():
                break

            current = _job_status(job_id, AsyncResult(job_id, app=celery_app))
            if current != last:
                last = current
                yield {"event": "status", "data": json.dumps(current.model_dump())}

                # Terminal states close the stream
                if current.status in ("completed", "failed"):
                    break

            await asyncio.sleep(2)

    return EventSourceResponse(event_generator())


@router.get("/result/{job_id}", response_class=PlainTextResponse)
def get_job_result(job_id: str, result: AsyncResult = Depends(get_job)):
    """
    Get the CSV produced by a finished job

    - 409 while the job is still queued or running
    """
    if result.state == "FAILURE":
        raise HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=f"Job failed: {result.info}")
    if result.state != "SUCCESS":
        raise HTTPException(status_code=status.HTTP_409_CONFLICT, detail="Job has not finished yet")
    return PlainTextResponse(result.result["csv"], media_type="text/csv")

"""FastAPI dependencies for benchmark job lookup"""

from celery.result import AsyncResult
from fastapi import HTTPException, status

from celery_init import celery_app

# Written to the result backend before dispatch so unknown ids stay PENDING
QUEUED = "QUEUED"


def get_job(job_id: str) -> AsyncResult:
    """Get the Celery result of a submitted benchmark job"""
    result = AsyncResult(job_id, app=celery_app)
    if result.state == "PENDING":
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Job not found")
    return result

"""Shared Celery app instance for the API and the benchmark worker"""

from celery import Celery
from bandfec.config import get_settings

settings = get_settings()

celery_app = Celery(
    'bandfec_worker',
    broker=settings.celery_broker_url,
    backend=settings.celery_result_backend,
    include=['tasks'],
)
celery_app.conf.update(
    task_track_started=True,
    task_default_queue=settings.bench_queue,
    result_extended=True,
)

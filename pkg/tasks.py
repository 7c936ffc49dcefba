"""Celery tasks run by the benchmark worker"""

import io

from celery.utils.log import get_task_logger

from bandfec.construct import build_from_params
from bandfec.schemas import ExperimentConfig
from bandfec.sim import (
    overhead_experiment,
    throughput_experiment,
    write_overhead_summary,
    write_records,
    write_throughput_summary,
)
from celery_init import celery_app

logger = get_task_logger(__name__)

EXPERIMENTS = ("overhead", "throughput")


def run_experiment(kind: str, config: dict, progress=None) -> dict:
    """
    Run one experiment and render it as CSV

    - kind: "overhead" or "throughput"
    - config: ExperimentConfig as JSON-compatible dict
    """
    if kind not in EXPERIMENTS:
        raise ValueError(f"Unknown experiment {kind!r}")
    cfg = ExperimentConfig.model_validate(config)
    _, code = build_from_params(cfg.code)
    out = io.StringIO()
    if kind == "overhead":
        records, summary = overhead_experiment(cfg, code, progress)
        write_records(out, records)
        write_overhead_summary(out, code, cfg.decoder, summary)
        result = {"summary": summary.model_dump()}
    else:
        records, points = throughput_experiment(cfg, code, progress)
        write_records(out, records)
        write_throughput_summary(out, code, cfg.decoder, points)
        result = {"points": [p.model_dump() for p in points]}
    result.update(kind=kind, csv=out.getvalue())
    return result


@celery_app.task(bind=True, name="tasks.run_experiment_task")
def run_experiment_task(self, kind: str, config: dict) -> dict:
    """Run an experiment, reporting progress through the PROGRESS state"""
    job_id = self.request.id
    logger.info(f"Starting {kind} experiment for job {job_id}")
    last = {"step": -1}

    def progress(done: int, total: int) -> None:
        step = done * 100 // total
        if step != last["step"]:
            last["step"] = step
            self.update_state(state="PROGRESS", meta={"done": done, "total": total})

    try:
        result = run_experiment(kind, config, progress)
    except Exception as e:
        logger.error(f"Experiment {job_id} failed: {e}")
        raise
    logger.info(f"Experiment {job_id} finished")
    return result

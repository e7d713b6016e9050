# multiview/services/runs.py

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

from django.db import DatabaseError

from multiview.models import ExperimentRun

logger = logging.getLogger(__name__)


def record_run(command: str, config: dict, summary: dict, output_dir: Optional[Path] = None,
               status: str = "ok") -> Optional[ExperimentRun]:
    """
    Store a provenance row for a command run. A missing table (migrate not
    run) or any other database failure is logged and otherwise ignored.
    """
    try:
        return ExperimentRun.objects.create(
            command=command,
            status=status,
            config=config,
            summary=summary,
            output_dir=str(output_dir) if output_dir else "",
        )
    except DatabaseError as e:
        logger.warning("[runs] could not record %s run: %s", command, e)
        return None

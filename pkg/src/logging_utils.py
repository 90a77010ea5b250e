import json
import logging
import os
from datetime import datetime, timezone


logging.basicConfig(level=os.environ.get("SECTOR_ENSEMBLE_LOG_LEVEL", "INFO").upper())

logger = logging.getLogger("sector_ensemble")


def _default(value):
    # numpy scalars, arrays and paths show up in event fields
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    return str(value)


def log_event(event: str, **fields):
    """One JSON line per event on the sector_ensemble logger."""
    payload = {
        "ts": datetime.now(timezone.utc).isoformat(),
        "event": event,
        **fields,
    }

    logger.info(json.dumps(payload, default=_default))

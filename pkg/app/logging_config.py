# Copyright (C) 2023-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.


import logging
import sys
from functools import lru_cache
from typing import Optional

import sentry_sdk
from sentry_sdk.integrations.logging import LoggingIntegration

import config as cfg


@lru_cache(maxsize=None)
def init_sentry(sentry_dsn: str) -> None:
    """Initializes the Sentry client once per process, whatever the number of importing modules."""
    sentry_logging = LoggingIntegration(
        level=logging.INFO,  # Capture info and above as breadcrumbs
        event_level=logging.ERROR,  # Send errors as events
    )
    sentry_sdk.init(
        dsn=sentry_dsn,
        release=cfg.VERSION,
        server_name=cfg.SERVER_NAME,
        integrations=[sentry_logging],
    )


def configure_logging(debug: bool, sentry_dsn: Optional[str] = None, name: str = __name__) -> logging.Logger:
    # Reports are written on stdout, logs stay on stderr
    handlers = [logging.StreamHandler(sys.stderr)]

    # Sentry integration with logging
    if sentry_dsn:
        init_sentry(sentry_dsn)

    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
    )

    logger = logging.getLogger(name)
    return logger
